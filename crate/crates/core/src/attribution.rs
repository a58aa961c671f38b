use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Which method produced an attribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Neflag,
    Saliency,
    Smoothgrad,
    Ig,
    Taylor,
    Random,
    /// Externally supplied reference (e.g. known ground truth).
    Reference,
}

impl Method {
    pub fn id(self) -> &'static str {
        match self {
            Method::Neflag => "neflag",
            Method::Saliency => "saliency",
            Method::Smoothgrad => "smoothgrad",
            Method::Ig => "ig",
            Method::Taylor => "taylor",
            Method::Random => "random",
            Method::Reference => "reference",
        }
    }
}

impl core::fmt::Display for Method {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.id())
    }
}

/// A recorded method parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Param {
    Flag(bool),
    Integer(u64),
    Number(f64),
    Text(String),
}

impl From<f64> for Param {
    fn from(v: f64) -> Self {
        Param::Number(v)
    }
}

impl From<usize> for Param {
    fn from(v: usize) -> Self {
        Param::Integer(v as u64)
    }
}

impl From<u64> for Param {
    fn from(v: u64) -> Self {
        Param::Integer(v)
    }
}

impl From<bool> for Param {
    fn from(v: bool) -> Self {
        Param::Flag(v)
    }
}

impl From<&str> for Param {
    fn from(v: &str) -> Self {
        Param::Text(v.to_string())
    }
}

/// Per-feature attribution scores plus the parameters that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionMap {
    pub method: Method,
    pub params: BTreeMap<String, Param>,
    pub values: Vec<f64>,
    /// Accepted negative-flux points (NeFLAG) or gradient samples taken.
    pub samples_used: usize,
}

impl AttributionMap {
    pub fn new(method: Method, values: Vec<f64>) -> Self {
        AttributionMap {
            method,
            params: BTreeMap::new(),
            values,
            samples_used: 0,
        }
    }

    pub fn with_param(mut self, key: &str, value: impl Into<Param>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples_used = samples;
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}
