//! JSON wire types shared by every subcommand.

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockpoly::{FockState, StateVector};

/// Complex number as `{re, im}`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Default)]
pub struct ComplexJson {
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl From<Complex64> for ComplexJson {
    fn from(z: Complex64) -> Self {
        ComplexJson { re: z.re, im: z.im }
    }
}

impl From<ComplexJson> for Complex64 {
    fn from(z: ComplexJson) -> Self {
        Complex64::new(z.re, z.im)
    }
}

/// One component of a state vector.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct AmplitudeJson {
    pub occupations: Vec<u32>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

pub fn state_to_wire(state: &StateVector) -> Vec<AmplitudeJson> {
    state
        .iter()
        .map(|(s, a)| AmplitudeJson { occupations: s.0.clone(), re: a.re, im: a.im })
        .collect()
}

pub fn state_from_wire(entries: &[AmplitudeJson]) -> Result<StateVector> {
    let mut out: StateVector = BTreeMap::new();
    let modes = entries.first().map(|e| e.occupations.len());
    for e in entries {
        if Some(e.occupations.len()) != modes {
            return Err(Error::InvalidProblem("state components have inconsistent mode counts".into()));
        }
        *out.entry(FockState(e.occupations.clone())).or_default() += Complex64::new(e.re, e.im);
    }
    Ok(out)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))
}
