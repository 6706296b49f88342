//! LUT bank JSON: `{ "n_l", "s_lut", "weights": [...], "sets": [{ "h", "s", "v" }] }`.

use std::fs;
use std::path::Path;

use anyhow::{ensure, Context, Result};
use flarekit_core::lut::{LutBank, LutSet};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetJson {
    pub h: Vec<f64>,
    pub s: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankJson {
    pub n_l: usize,
    pub s_lut: usize,
    pub weights: Vec<f64>,
    pub sets: Vec<SetJson>,
}

impl From<&LutBank> for BankJson {
    fn from(bank: &LutBank) -> Self {
        Self {
            n_l: bank.n_sets(),
            s_lut: bank.lut_size(),
            weights: bank.weights().to_vec(),
            sets: bank
                .sets()
                .iter()
                .map(|s| SetJson {
                    h: s.h.values().to_vec(),
                    s: s.s.values().to_vec(),
                    v: s.v.values().to_vec(),
                })
                .collect(),
        }
    }
}

impl BankJson {
    pub fn to_bank(&self) -> Result<LutBank> {
        ensure!(self.sets.len() == self.n_l, "n_l = {} but {} sets given", self.n_l, self.sets.len());
        ensure!(
            self.sets.iter().all(|s| [&s.h, &s.s, &s.v].iter().all(|c| c.len() == self.s_lut)),
            "every curve must have s_lut = {} control points",
            self.s_lut
        );
        let sets = self
            .sets
            .iter()
            .map(|s| LutSet::from_values(s.h.clone(), s.s.clone(), s.v.clone()))
            .collect::<flarekit_core::Result<Vec<_>>>()?;
        Ok(LutBank::new(sets, self.weights.clone())?)
    }
}

pub fn to_string(bank: &LutBank) -> String {
    let mut s = serde_json::to_string_pretty(&BankJson::from(bank)).expect("plain data serializes");
    s.push('\n');
    s
}

pub fn write(path: &Path, bank: &LutBank) -> Result<()> {
    crate::io::ensure_parent(path)?;
    fs::write(path, to_string(bank)).with_context(|| format!("cannot write {}", path.display()))
}

pub fn read(path: &Path) -> Result<LutBank> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let json: BankJson = serde_json::from_str(&text).with_context(|| format!("cannot parse {}", path.display()))?;
    json.to_bank().with_context(|| format!("invalid bank in {}", path.display()))
}
