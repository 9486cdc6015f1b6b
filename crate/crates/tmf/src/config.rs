//! Experiment configuration: a sectioned key = value file (TOML) that
//! round-trips losslessly and validates every physical parameter, plus
//! the echo written as the first artifact of every run.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::basis::BasisTruncation;
use crate::dynamics::{ModelVariant, VariantTag};
use crate::error::{Error, Result};
use crate::spectral::fields::{random_solenoidal, taylor_green};
use crate::spectral::{GridSpec, VectorField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSection {
    pub eta: f64,
    /// "v1" (Hamiltonian), "v2" (projected) or "h17" (raw).
    pub variant: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub k_max: i64,
    #[serde(default = "default_s")]
    pub s: f64,
    pub seed: u64,
}

fn default_s() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepperSection {
    pub dt: f64,
    pub t_final: f64,
    /// Ensemble size: N coupled particles (ips) or M independent
    /// trajectories (meanfield).
    pub particles: usize,
    /// Output cadence in steps.
    #[serde(default = "default_every")]
    pub output_every: usize,
}

fn default_every() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    /// "taylor-green" or "random-band".
    pub preset: String,
    #[serde(default = "default_band")]
    pub k_band: i64,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_band() -> i64 {
    3
}

fn default_amplitude() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopSection {
    pub center: Vec<f64>,
    pub radius: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_seeds")]
    pub seeds: u64,
}

fn default_points() -> usize {
    256
}

fn default_seeds() -> u64 {
    1
}

impl Default for LoopSection {
    fn default() -> Self {
        Self {
            center: vec![std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2],
            radius: 0.5,
            points: default_points(),
            seeds: default_seeds(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardSection {
    #[serde(default = "default_iters")]
    pub iterations: usize,
    #[serde(default = "default_traj")]
    pub trajectories: usize,
}

fn default_iters() -> usize {
    8
}

fn default_traj() -> usize {
    50
}

impl Default for PicardSection {
    fn default() -> Self {
        Self { iterations: default_iters(), trajectories: default_traj() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSection,
    pub physics: PhysicsSection,
    pub noise: NoiseSection,
    pub stepper: StepperSection,
    pub initial: InitialSection,
    #[serde(default, rename = "loop")]
    pub loop_spec: LoopSection,
    #[serde(default)]
    pub picard: PicardSection,
    pub output: OutputSection,
}

fn positive(key: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::Config { key: key.into(), reason: format!("{v} must be positive") });
    }
    Ok(())
}

impl RunConfig {
    pub fn from_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)
            .map_err(|e| Error::Config { key: "<file>".into(), reason: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid_spec()?;
        positive("physics.eta", self.physics.eta)?;
        self.variant_tag()?;
        if self.noise.k_max < 1 {
            return Err(Error::Config { key: "noise.k_max".into(), reason: format!("{} must be at least 1", self.noise.k_max) });
        }
        let s_min = 1.0 + self.grid.n as f64 / 2.0;
        if !(self.noise.s.is_finite() && self.noise.s > s_min) {
            return Err(Error::Config { key: "noise.s".into(), reason: format!("{} must exceed 1 + n/2 = {s_min}", self.noise.s) });
        }
        positive("stepper.dt", self.stepper.dt)?;
        positive("stepper.t_final", self.stepper.t_final)?;
        if self.stepper.particles == 0 {
            return Err(Error::Config { key: "stepper.particles".into(), reason: "must be at least 1".into() });
        }
        match self.initial.preset.as_str() {
            "taylor-green" => {}
            "random-band" => {
                if self.initial.k_band < 1 {
                    return Err(Error::Config { key: "initial.k_band".into(), reason: format!("{} must be at least 1", self.initial.k_band) });
                }
                positive("initial.amplitude", self.initial.amplitude)?;
            }
            other => {
                return Err(Error::Config { key: "initial.preset".into(), reason: format!("unknown preset `{other}`") });
            }
        }
        if self.loop_spec.center.len() != self.grid.n {
            return Err(Error::Config { key: "loop.center".into(), reason: format!("needs {} coordinates", self.grid.n) });
        }
        positive("loop.radius", self.loop_spec.radius)?;
        if self.loop_spec.points < 64 {
            return Err(Error::Config { key: "loop.points".into(), reason: "needs at least 64 points".into() });
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid.n, self.grid.m)
            .map_err(|e| Error::Config { key: "grid".into(), reason: e.to_string() })
    }

    pub fn variant_tag(&self) -> Result<VariantTag> {
        match self.physics.variant.as_str() {
            "v1" => Ok(VariantTag::V1Hamiltonian),
            "v2" => Ok(VariantTag::V2Projected),
            "h17" => Ok(VariantTag::H17Raw),
            other => Err(Error::Config { key: "physics.variant".into(), reason: format!("unknown variant `{other}`, expected v1, v2 or h17") }),
        }
    }

    pub fn truncation(&self) -> Result<BasisTruncation> {
        BasisTruncation::new(self.grid.n, self.noise.k_max, self.noise.s)
    }

    pub fn model(&self) -> Result<ModelVariant> {
        ModelVariant::new(self.variant_tag()?, self.physics.eta, self.truncation()?)
    }

    pub fn initial_field(&self) -> Result<VectorField> {
        let grid = self.grid_spec()?;
        let mut u0 = match self.initial.preset.as_str() {
            "taylor-green" => taylor_green(grid),
            _ => random_solenoidal(grid, self.initial.k_band, self.initial.seed),
        };
        u0.scale(self.initial.amplitude);
        Ok(u0)
    }

    /// Fully-resolved config with the derived constants appended; written
    /// as the first artifact of every run.
    pub fn echo(&self) -> Result<String> {
        let model = self.model()?;
        let trunc = model.trunc();
        let body = toml::to_string_pretty(self)
            .map_err(|e| Error::Config { key: "<serialize>".into(), reason: e.to_string() })?;
        Ok(format!(
            "{body}\n[derived]\nnu = {:.16e}\nc_k = {:.16e}\nepsilon_k = {:.16e}\nbasis_dim = {}\n",
            model.nu(),
            trunc.c_k(),
            trunc.epsilon_k(),
            trunc.len(),
        ))
    }
}
