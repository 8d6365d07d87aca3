use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

/// One grid cell of an ablation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    /// One value per axis, in `AblationResult::axes` order.
    pub coords: Vec<String>,
    pub score: f64,
    /// Secondary numbers such as SNR or standard error.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, f64>,
}

/// Scores over a grid of experiment settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub name: String,
    pub axes: Vec<String>,
    /// `"acr"` or `"rmse"`.
    pub metric: String,
    pub cells: Vec<AblationCell>,
}

impl AblationResult {
    pub fn new(name: &str, axes: &[&str], metric: &str) -> Self {
        Self {
            name: name.to_string(),
            axes: axes.iter().map(|a| a.to_string()).collect(),
            metric: metric.to_string(),
            cells: Vec::new(),
        }
    }

    pub fn push(&mut self, coords: &[String], score: f64, extra: &[(&str, f64)]) {
        debug_assert_eq!(coords.len(), self.axes.len());
        self.cells.push(AblationCell {
            coords: coords.to_vec(),
            score,
            extra: extra.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        });
    }

    /// Score of the cell at `coords`.
    pub fn get(&self, coords: &[&str]) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.coords.iter().map(String::as_str).eq(coords.iter().copied()))
            .map(|c| c.score)
    }

    pub fn extra(&self, coords: &[&str], key: &str) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.coords.iter().map(String::as_str).eq(coords.iter().copied()))
            .and_then(|c| c.extra.get(key).copied())
    }

    fn extra_keys(&self) -> Vec<String> {
        self.cells
            .iter()
            .flat_map(|c| c.extra.keys().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Plot-ready CSV: axis columns, the metric, then any extra columns.
    pub fn to_csv(&self) -> String {
        let extras = self.extra_keys();
        let mut w = csv::Writer::from_writer(Vec::new());
        let header: Vec<&str> = self
            .axes
            .iter()
            .map(String::as_str)
            .chain([self.metric.as_str()])
            .chain(extras.iter().map(String::as_str))
            .collect();
        w.write_record(&header).expect("in-memory write");
        for c in &self.cells {
            let mut row = c.coords.clone();
            row.push(c.score.to_string());
            for k in &extras {
                row.push(c.extra.get(k).map_or(String::new(), f64::to_string));
            }
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    /// Same table, tab-separated.
    pub fn to_tsv(&self) -> String {
        let extras = self.extra_keys();
        let mut out = self.axes.join("\t");
        out.push('\t');
        out.push_str(&self.metric);
        for k in &extras {
            out.push('\t');
            out.push_str(k);
        }
        out.push('\n');
        for c in &self.cells {
            out.push_str(&c.coords.join("\t"));
            out.push_str(&format!("\t{}", c.score));
            for k in &extras {
                out.push('\t');
                if let Some(v) = c.extra.get(k) {
                    out.push_str(&v.to_string());
                }
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_one_row_per_cell() {
        let mut r = AblationResult::new("volume", &["volume"], "acr");
        r.push(&["1".into()], 0.98, &[]);
        r.push(&["0.5".into()], 0.97, &[("snr_db", 41.5)]);
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines, vec!["volume,acr,snr_db", "1,0.98,", "0.5,0.97,41.5"]);
        assert_eq!(r.get(&["0.5"]), Some(0.97));
        assert_eq!(r.extra(&["0.5"], "snr_db"), Some(41.5));
        assert_eq!(r.to_tsv().lines().count(), 3);
    }
}
