use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Categorical contact sites on the finger, plus "no contact".
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContactSite {
    Base,
    Middle,
    Tip,
    Left,
    Right,
    Top,
    None,
}

impl ContactSite {
    /// The six contact sites, without `None`.
    pub const CONTACTS: [ContactSite; 6] = [
        ContactSite::Base,
        ContactSite::Middle,
        ContactSite::Tip,
        ContactSite::Left,
        ContactSite::Right,
        ContactSite::Top,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ContactSite::Base => "base",
            ContactSite::Middle => "middle",
            ContactSite::Tip => "tip",
            ContactSite::Left => "left",
            ContactSite::Right => "right",
            ContactSite::Top => "top",
            ContactSite::None => "none",
        }
    }
}

impl fmt::Display for ContactSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ContactSite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        std::iter::once(ContactSite::None)
            .chain(ContactSite::CONTACTS)
            .find(|site| site.name() == s)
            .ok_or_else(|| format!("unknown contact site `{s}`"))
    }
}

/// Where the finger is touched: a named site or a distance along the
/// palmar side, measured in millimetres from the base.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ContactLocation {
    Site(ContactSite),
    Along { position_mm: f64 },
}

impl ContactLocation {
    pub fn is_contact(&self) -> bool {
        !matches!(self, ContactLocation::Site(ContactSite::None))
    }

    pub fn position_mm(&self) -> Option<f64> {
        match self {
            ContactLocation::Along { position_mm } => Some(*position_mm),
            ContactLocation::Site(_) => None,
        }
    }

    /// Class label: the site name, or the position formatted in mm.
    pub fn label(&self) -> String {
        match self {
            ContactLocation::Site(site) => site.name().to_string(),
            ContactLocation::Along { position_mm } => format!("{position_mm}mm"),
        }
    }
}

impl From<ContactSite> for ContactLocation {
    fn from(site: ContactSite) -> Self {
        ContactLocation::Site(site)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Material {
    Wood,
    Silicone,
    Aluminum,
    None,
}

impl Material {
    pub const OBJECTS: [Material; 3] = [Material::Wood, Material::Silicone, Material::Aluminum];

    pub fn name(self) -> &'static str {
        match self {
            Material::Wood => "wood",
            Material::Silicone => "silicone",
            Material::Aluminum => "aluminum",
            Material::None => "none",
        }
    }
}

impl fmt::Display for Material {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Physical condition of the simulated actuator during one recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActuatorState {
    pub location: ContactLocation,
    pub contact_force_n: f64,
    pub inflation_kpa: f64,
    pub temperature_c: f64,
    pub material: Material,
    /// Robot workspace pose; 0 means no robot attached.
    pub pose_id: u32,
}

pub const ROOM_TEMPERATURE_C: f64 = 20.0;

impl Default for ActuatorState {
    fn default() -> Self {
        Self::neutral()
    }
}

impl ActuatorState {
    /// No contact, deflated, room temperature, no robot.
    pub fn neutral() -> Self {
        Self {
            location: ContactLocation::Site(ContactSite::None),
            contact_force_n: 0.0,
            inflation_kpa: 0.0,
            temperature_c: ROOM_TEMPERATURE_C,
            material: Material::None,
            pose_id: 0,
        }
    }

    /// Contact at `site` with `force_n` against a wooden object.
    /// `ContactSite::None` yields the neutral state.
    pub fn touching(site: ContactSite, force_n: f64) -> Self {
        if site == ContactSite::None {
            return Self::neutral();
        }
        Self {
            location: ContactLocation::Site(site),
            contact_force_n: force_n,
            material: Material::Wood,
            ..Self::neutral()
        }
    }

    /// Contact at a continuous position along the finger.
    pub fn touching_at(position_mm: f64, force_n: f64) -> Self {
        Self {
            location: ContactLocation::Along { position_mm },
            contact_force_n: force_n,
            material: Material::Wood,
            ..Self::neutral()
        }
    }

    pub fn with_inflation(mut self, kpa: f64) -> Self {
        self.inflation_kpa = kpa;
        self
    }

    pub fn with_temperature(mut self, celsius: f64) -> Self {
        self.temperature_c = celsius;
        self
    }

    pub fn with_material(mut self, material: Material) -> Self {
        self.material = material;
        self
    }

    pub fn with_pose(mut self, pose_id: u32) -> Self {
        self.pose_id = pose_id;
        self
    }

    pub fn is_contact(&self) -> bool {
        self.location.is_contact()
    }

    /// Checks the state's own invariants against a finger of the given length.
    pub fn validate(&self, finger_length_mm: f64) -> Result<(), String> {
        if !(self.contact_force_n >= 0.0) {
            return Err(format!("contact force {} N is negative", self.contact_force_n));
        }
        if !(self.inflation_kpa >= 0.0) {
            return Err(format!("inflation {} kPa is negative", self.inflation_kpa));
        }
        if !self.temperature_c.is_finite() {
            return Err("temperature is not finite".into());
        }
        if !self.is_contact() && (self.contact_force_n != 0.0 || self.material != Material::None) {
            return Err("no-contact state must have zero force and no material".into());
        }
        if let Some(p) = self.location.position_mm() {
            if !(0.0..=finger_length_mm).contains(&p) {
                return Err(format!(
                    "position {p} mm outside finger [0, {finger_length_mm}] mm"
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn site_round_trips_through_names() {
        for site in ContactSite::CONTACTS {
            assert_eq!(site.name().parse::<ContactSite>().unwrap(), site);
        }
        assert!("elbow".parse::<ContactSite>().is_err());
    }

    #[test]
    fn no_contact_requires_zero_force() {
        let mut s = ActuatorState::neutral();
        assert!(s.validate(90.0).is_ok());
        s.contact_force_n = 1.0;
        assert!(s.validate(90.0).is_err());
        assert!(ActuatorState::touching_at(120.0, 1.0).validate(90.0).is_err());
        assert!(ActuatorState::touching_at(45.0, 1.0).validate(90.0).is_ok());
    }

    #[test]
    fn location_serializes_compactly() {
        let site = serde_json::to_string(&ContactLocation::Site(ContactSite::Tip)).unwrap();
        assert_eq!(site, "\"tip\"");
        let along = serde_json::to_string(&ContactLocation::Along { position_mm: 3.0 }).unwrap();
        assert_eq!(along, "{\"position_mm\":3.0}");
        let back: ContactLocation = serde_json::from_str(&along).unwrap();
        assert_eq!(back.position_mm(), Some(3.0));
    }
}
