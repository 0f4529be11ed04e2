//! Experiment configuration: TOML sections with environment overrides.
//!
//! Every key can be overridden by `VORTEXLAB_<SECTION>__<KEY>`, e.g.
//! `VORTEXLAB_PLAN__SEEDS=3`. Override values are parsed as TOML values and fall back
//! to plain strings.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{Integrator, SimulationConfig};
use crate::error::{Error, Result};
use crate::field::VorticityField;
use crate::metrics::MetricMode;
use crate::noise::{BrownianPath, NoiseModel};
use crate::reference::{NoiseStep, ReferenceConfig};
use crate::sampling::{InitialVorticity, Preset, SamplingMode};

/// Prefix of environment overrides.
pub const ENV_PREFIX: &str = "VORTEXLAB_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TorusSection {
    /// Quadrature grid for kernel norms.
    pub quadrature_n: usize,
}

impl Default for TorusSection {
    fn default() -> Self {
        TorusSection { quadrature_n: 512 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    pub eps: f64,
    pub kmax: usize,
    pub table_n: Option<usize>,
}

impl Default for KernelSection {
    fn default() -> Self {
        KernelSection {
            eps: 0.25,
            kmax: 64,
            table_n: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub kmax: usize,
    pub beta: f64,
    pub dt_fine: f64,
    /// Multiplies every mode amplitude; 0 switches the noise off.
    pub scale: f64,
    /// Brownian seed for single runs; experiments use the plan's seeds.
    pub seed: u64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection {
            kmax: 8,
            beta: 5.0,
            dt_fine: 1e-3,
            scale: 1.0,
            seed: 0,
        }
    }
}

impl NoiseSection {
    pub fn model(&self) -> Result<NoiseModel> {
        if self.scale == 0.0 {
            return Ok(NoiseModel::none());
        }
        let base = NoiseModel::perpendicular(self.kmax, self.beta)?;
        if self.scale == 1.0 {
            return Ok(base);
        }
        NoiseModel::from_modes(
            base.modes()
                .iter()
                .map(|m| crate::noise::NoiseMode {
                    k: m.k,
                    amplitude: [m.amplitude[0] * self.scale, m.amplitude[1] * self.scale],
                })
                .collect(),
        )
    }

    pub fn path(&self, seed: u64, model: &NoiseModel) -> Result<BrownianPath> {
        BrownianPath::new(seed, self.dt_fine, model.len())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParticlesSection {
    #[serde(alias = "N")]
    pub n: usize,
    /// Overrides kernel.eps for single runs.
    pub eps: Option<f64>,
    pub dt: f64,
    #[serde(alias = "T")]
    pub t_end: f64,
    pub integrator: Integrator,
    pub tv_bound: f64,
    pub save_every: usize,
}

impl Default for ParticlesSection {
    fn default() -> Self {
        ParticlesSection {
            n: 1024,
            eps: None,
            dt: 5e-3,
            t_end: 0.5,
            integrator: Integrator::EulerMaruyama,
            tv_bound: 64.0,
            save_every: 10,
        }
    }
}

impl ParticlesSection {
    pub fn simulation(&self, t_end: f64, save_every: usize) -> SimulationConfig {
        SimulationConfig {
            dt: self.dt,
            t_end,
            integrator: self.integrator,
            tv_bound: self.tv_bound,
            save_every,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceSection {
    pub n: usize,
    pub dt: f64,
    #[serde(alias = "T")]
    pub t_end: f64,
    pub save_every: usize,
    pub noise_step: NoiseStep,
}

impl Default for ReferenceSection {
    fn default() -> Self {
        ReferenceSection {
            n: 64,
            dt: 2e-3,
            t_end: 0.5,
            save_every: 25,
            noise_step: NoiseStep::Exponential,
        }
    }
}

impl ReferenceSection {
    pub fn solver(&self, t_end: f64, save_every: usize) -> ReferenceConfig {
        ReferenceConfig {
            n: self.n,
            dt: self.dt,
            t_end,
            save_every,
            noise_step: self.noise_step,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitSection {
    pub mode: SamplingMode,
    pub preset: Preset,
    pub amplitude: f64,
    /// Field CSV (t, i, j, xi) used instead of the preset when set.
    pub field_file: Option<PathBuf>,
    pub seed: u64,
    /// Grid on which the i.i.d. density is tabulated.
    pub density_n: usize,
}

impl Default for InitSection {
    fn default() -> Self {
        InitSection {
            mode: SamplingMode::Grid,
            preset: Preset::TaylorGreen,
            amplitude: 1.0,
            field_file: None,
            seed: 0,
            density_n: 64,
        }
    }
}

impl InitSection {
    pub fn initial(&self) -> Result<InitialVorticity> {
        match &self.field_file {
            None => Ok(InitialVorticity::preset(self.preset, self.amplitude)),
            Some(p) => {
                let f: VorticityField = crate::io::read_field_csv(std::fs::File::open(p)?)?;
                Ok(InitialVorticity::Field(f))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    pub delta: f64,
    pub lambda: f64,
    /// Feed ζ_N / ‖ξ₀‖_L1 to the schedule instead of ζ_N.
    pub normalize_zeta: bool,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        ScheduleSection {
            delta: 0.0,
            lambda: 1.0,
            normalize_zeta: true,
        }
    }
}

/// How the mollified flow Φ^ε is approximated in the mollification experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowProxy {
    /// Spectral solver with velocity K^ε * ξ.
    Pde,
    /// Tracers advected through a large particle system at ε.
    Particles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanSection {
    pub n_values: Vec<usize>,
    pub n_ref: usize,
    /// Number of noise realizations; seeds are seed_offset .. seed_offset + seeds.
    pub seeds: u64,
    pub seed_offset: u64,
    /// Times at which distances are measured; the last one is the horizon.
    pub sample_times: Vec<f64>,
    /// ε ladder of the mollification experiment.
    pub eps_values: Vec<f64>,
    /// Tracers form a tracer_side x tracer_side grid.
    pub tracer_side: usize,
    pub flow_proxy: FlowProxy,
    /// Fixed ε of the schedule ablation in the full experiment.
    pub ablation_eps: f64,
    /// Rerun the smallest N on independent noise to check the coupling.
    pub decoupled_ablation: bool,
}

impl Default for PlanSection {
    fn default() -> Self {
        PlanSection {
            n_values: vec![64, 256, 1024],
            n_ref: 4096,
            seeds: 5,
            seed_offset: 0,
            sample_times: vec![0.25, 0.5],
            eps_values: vec![0.5, 0.25, 0.125, 0.0625],
            tracer_side: 16,
            flow_proxy: FlowProxy::Pde,
            ablation_eps: 1.0,
            decoupled_ablation: true,
        }
    }
}

impl PlanSection {
    pub fn seed_list(&self) -> Vec<u64> {
        (self.seed_offset..self.seed_offset + self.seeds).collect()
    }

    pub fn horizon(&self) -> f64 {
        self.sample_times.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricSection {
    pub mode: MetricMode,
    /// Grid whose node atoms represent ξ₀ when measuring ζ_N.
    pub zeta_reference_n: usize,
    /// Target gap of the dual-ascent bracket used above the exact-LP size limit.
    pub tol: f64,
}

impl Default for MetricSection {
    fn default() -> Self {
        MetricSection {
            mode: MetricMode::Bl,
            zeta_reference_n: 64,
            tol: 1e-6,
        }
    }
}

/// Full configuration of a run or experiment.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub torus: TorusSection,
    pub kernel: KernelSection,
    pub noise: NoiseSection,
    pub particles: ParticlesSection,
    pub reference: ReferenceSection,
    pub init: InitSection,
    pub schedule: ScheduleSection,
    pub plan: PlanSection,
    pub metric: MetricSection,
}

impl Config {
    /// Parse TOML text and apply the given `(SECTION__KEY, value)` overrides.
    pub fn from_toml_with_overrides<I, K, V>(text: &str, overrides: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut root: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        for (key, value) in overrides {
            let key = key.as_ref().to_ascii_lowercase();
            let (section, field) = key
                .split_once("__")
                .ok_or_else(|| Error::Config(format!("override `{key}` is not SECTION__KEY")))?;
            let value = parse_override(value.as_ref());
            let table = root
                .entry(section.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            match table {
                toml::Value::Table(t) => {
                    t.insert(field.to_string(), value);
                }
                _ => return Err(Error::Config(format!("`{section}` is not a section"))),
            }
        }
        toml::Value::Table(root)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))
    }

    /// Parse TOML text, applying overrides from the process environment.
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_with_overrides(text, env_overrides())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    /// Defaults plus environment overrides.
    pub fn from_env() -> Result<Self> {
        Self::from_toml("")
    }

    /// Mollification scale of single particle runs.
    pub fn particle_eps(&self) -> f64 {
        self.particles.eps.unwrap_or(self.kernel.eps)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the canonical JSON form; changes iff some field changes.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn parse_override(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match wrapped.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// `VORTEXLAB_<SECTION>__<KEY>` variables with the prefix stripped.
pub fn env_overrides() -> Vec<(String, String)> {
    let mut v: Vec<(String, String)> = std::env::vars()
        .filter_map(|(k, val)| k.strip_prefix(ENV_PREFIX).map(|rest| (rest.to_string(), val)))
        .filter(|(k, _)| k.contains("__"))
        .collect();
    v.sort();
    v
}
