use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::elements::NUM_ELEMENTS;
use crate::{Error, Result};

/// How the interaction filter `f_ij` is formed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MpVariant {
    /// `swish(Linear(e_ij ‖ h_i ‖ h_j))`
    #[default]
    Standard,
    /// `swish(Linear(e_ij))`
    Simple,
    /// `e_ij`
    Basic,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyHead {
    /// `Σ sigmoid(MLP_α(h)) · MLP_v(h)`
    #[default]
    Weighted,
    /// `Σ MLP_v(h)`
    Simple,
}

macro_rules! names {
    ($ty:ty, $($variant:ident => $name:literal),+) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $(Self::$variant => $name),+ })
            }
        }
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok(Self::$variant),)+
                    _ => Err(Error::InvalidConfig(format!("unknown {} {s:?}", stringify!($ty)))),
                }
            }
        }
    };
}

names!(MpVariant, Standard => "standard", Simple => "simple", Basic => "basic");
names!(EnergyHead, Weighted => "weighted", Simple => "simple");

/// Model hyperparameters. Missing JSON fields take the defaults below.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FAENetConfig {
    pub hidden_channels: usize,
    pub num_filters: usize,
    pub num_gaussians: usize,
    pub num_interactions: usize,
    /// Å
    pub cutoff: f64,
    pub max_neighbors: usize,
    pub mp_variant: MpVariant,
    pub energy_head: EnergyHead,
    pub jumping_connections: bool,
    pub predict_forces: bool,
    /// 118 rows of per-element features, projected to `property_channels`
    /// and concatenated to the learned embedding.
    pub property_table: Option<Vec<Vec<f64>>>,
    pub property_channels: usize,
    pub force_hidden_channels: usize,
}

impl Default for FAENetConfig {
    fn default() -> Self {
        Self {
            hidden_channels: 384,
            num_filters: 480,
            num_gaussians: 104,
            num_interactions: 5,
            cutoff: 6.0,
            max_neighbors: 40,
            mp_variant: MpVariant::Standard,
            energy_head: EnergyHead::Weighted,
            jumping_connections: true,
            predict_forces: false,
            property_table: None,
            property_channels: 32,
            force_hidden_channels: 256,
        }
    }
}

impl FAENetConfig {
    /// Small model for tests and laptop-scale benchmarks.
    pub fn desk() -> Self {
        Self {
            hidden_channels: 32,
            num_filters: 32,
            num_gaussians: 16,
            num_interactions: 2,
            predict_forces: true,
            property_channels: 8,
            force_hidden_channels: 32,
            ..Self::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("hidden_channels", self.hidden_channels),
            ("num_filters", self.num_filters),
            ("num_gaussians", self.num_gaussians),
            ("num_interactions", self.num_interactions),
            ("max_neighbors", self.max_neighbors),
            ("force_hidden_channels", self.force_hidden_channels),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if self.hidden_channels < 2 {
            return Err(Error::InvalidConfig("hidden_channels must be at least 2".into()));
        }
        if !(self.cutoff > 0.0 && self.cutoff.is_finite()) {
            return Err(Error::InvalidConfig(format!("cutoff must be positive, got {}", self.cutoff)));
        }
        if let Some(table) = &self.property_table {
            if table.len() != NUM_ELEMENTS {
                return Err(Error::InvalidConfig(format!(
                    "property_table needs {NUM_ELEMENTS} rows, got {}",
                    table.len()
                )));
            }
            let width = table[0].len();
            if width == 0 || table.iter().any(|r| r.len() != width) {
                return Err(Error::InvalidConfig("property_table rows must share a positive width".into()));
            }
            if table.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig("property_table has non-finite entries".into()));
            }
            if self.property_channels == 0 || self.property_channels >= self.hidden_channels {
                return Err(Error::InvalidConfig(
                    "property_channels must lie in 1..hidden_channels".into(),
                ));
            }
        }
        Ok(())
    }

    /// Width of the learned per-element embedding.
    pub fn embedding_channels(&self) -> usize {
        match self.property_table {
            Some(_) => self.hidden_channels - self.property_channels,
            None => self.hidden_channels,
        }
    }

    pub fn head_channels(&self) -> usize {
        self.hidden_channels / 2
    }
}
