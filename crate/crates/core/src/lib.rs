//! Simulated acoustic sensing for soft pneumatic actuators.
//!
//! A speaker and microphone sit inside the actuator's air chamber. The
//! chamber's resonances change with contact, force, inflation, temperature
//! and the touched material, so the amplitude spectrum of the recorded
//! sound can be classified or regressed into those quantities.

pub mod actuator;
pub mod dataset_io;
pub mod eval;
pub mod features;
pub mod models;
pub mod rng;
pub mod signal_gen;

pub use actuator::{ActuatorModel, ActuatorState, ContactLocation, ContactSite, Material, Recording};
pub use features::{FeatureSet, SpectrumFeature, Target};
pub use signal_gen::{SoundKind, SoundSpec, Waveform};
