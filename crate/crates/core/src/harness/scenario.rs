use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::SupportRule;
use crate::error::{io_err, Error, Result};
use crate::hele_shaw::PsorConfig;
use crate::model::{Domain, Drift, Exponent, InitialData, ModelSpec, Source};

/// Model without the exponent; the scenario supplies `m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelTemplate {
    #[serde(default = "none_drift")]
    pub drift: Drift,
    #[serde(default = "none_source")]
    pub source: Source,
    pub horizon: f64,
    pub domain: Domain,
    pub init: InitialData,
}

fn none_drift() -> Drift {
    Drift::None
}
fn none_source() -> Source {
    Source::None
}

impl ModelTemplate {
    pub fn spec(&self, m: Exponent) -> ModelSpec {
        ModelSpec {
            m,
            drift: self.drift.clone(),
            source: self.source.clone(),
            horizon: self.horizon,
            domain: self.domain.clone(),
            init: self.init.clone(),
        }
    }
}

fn d_true() -> bool {
    true
}
fn d_frames() -> usize {
    10
}
fn d_output() -> PathBuf {
    PathBuf::from("runs")
}
fn d_cfl() -> f64 {
    0.4
}
fn d_limit_cfl() -> f64 {
    0.25
}
fn d_max_dt() -> f64 {
    1e-2
}
fn d_margin() -> usize {
    4
}
fn d_avg_steps() -> usize {
    2
}
fn d_probes() -> usize {
    512
}
fn d_max_slope() -> f64 {
    1.9
}
fn d_max_excess() -> f64 {
    0.25
}
fn d_probe_radii() -> Vec<f64> {
    vec![2.0, 3.0, 4.0, 6.0, 8.0, 11.0]
}
fn d_osc_radii() -> Vec<f64> {
    vec![1.0, 2.0, 4.0, 8.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    #[serde(default = "d_cfl")]
    pub cfl: f64,
    #[serde(default = "d_max_dt")]
    pub max_dt: f64,
    #[serde(default)]
    pub positivity_floor: f64,
    #[serde(default = "d_margin")]
    pub margin: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { cfl: d_cfl(), max_dt: d_max_dt(), positivity_floor: 0.0, margin: d_margin() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitSettings {
    #[serde(default = "d_limit_cfl")]
    pub cfl: f64,
    #[serde(default = "d_max_dt")]
    pub max_dt: f64,
    #[serde(default)]
    pub psor: PsorConfig,
    #[serde(default = "d_avg_steps")]
    pub avg_steps: usize,
}

impl Default for LimitSettings {
    fn default() -> Self {
        Self { cfl: d_limit_cfl(), max_dt: d_max_dt(), psor: PsorConfig::default(), avg_steps: d_avg_steps() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbSelection {
    /// Defaults to `0.1 T`.
    #[serde(default)]
    pub eta0: Option<f64>,
    /// Use the floor `-C0/(m-1)` from `t = 0`.
    #[serde(default)]
    pub improved: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamlineSelection {
    #[serde(default)]
    pub t0_min: Option<f64>,
    #[serde(default = "d_probes")]
    pub max_probes: usize,
}

impl Default for StreamlineSelection {
    fn default() -> Self {
        Self { t0_min: None, max_probes: d_probes() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSelection {
    /// Defaults to `T`.
    #[serde(default)]
    pub time: Option<f64>,
    /// Radii in cells.
    #[serde(default = "d_probe_radii")]
    pub radii_cells: Vec<f64>,
    #[serde(default = "d_max_slope")]
    pub max_slope: f64,
}

impl Default for ProbeSelection {
    fn default() -> Self {
        Self { time: None, radii_cells: d_probe_radii(), max_slope: d_max_slope() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpansionSelection {
    #[serde(default)]
    pub eta0: Option<f64>,
    /// Backward lags; empty means one to four frame spacings.
    #[serde(default)]
    pub s_ladder: Vec<f64>,
    /// Times for the start-up check; needs sub-quadratic initial data.
    #[serde(default)]
    pub start_taus: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSelection {
    #[serde(default)]
    pub eta0: Option<f64>,
    #[serde(default)]
    pub time_weight: Option<f64>,
    #[serde(default)]
    pub slack_radius: Option<f64>,
    /// Times at which `d_H(Omega_m, Omega_next)` must not increase along the sweep (1-cell slack).
    #[serde(default)]
    pub check_times: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionSelection {
    #[serde(default)]
    pub time: Option<f64>,
    /// Radii in cells; empty means six radii from three cells to a quarter of the support diameter.
    #[serde(default)]
    pub radii_cells: Vec<f64>,
    /// Pass iff the fitted dimension is at most `d - 1 + max_excess`.
    #[serde(default = "d_max_excess")]
    pub max_excess: f64,
}

impl Default for DimensionSelection {
    fn default() -> Self {
        Self { time: None, radii_cells: Vec::new(), max_excess: d_max_excess() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillationSelection {
    #[serde(default = "d_osc_radii")]
    pub radii_cells: Vec<f64>,
}

impl Default for OscillationSelection {
    fn default() -> Self {
        Self { radii_cells: d_osc_radii() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSelection {
    #[serde(default)]
    pub ab: Option<AbSelection>,
    #[serde(default)]
    pub streamline: Option<StreamlineSelection>,
    #[serde(default)]
    pub nondegeneracy: Option<ProbeSelection>,
    #[serde(default)]
    pub expansion: Option<ExpansionSelection>,
    #[serde(default)]
    pub convergence: Option<ConvergenceSelection>,
    #[serde(default)]
    pub dimension: Option<DimensionSelection>,
    #[serde(default)]
    pub oscillation: Option<OscillationSelection>,
}

impl DiagnosticsSelection {
    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub model: ModelTemplate,
    /// Finite exponents, kept sorted ascending.
    pub m_values: Vec<f64>,
    #[serde(default)]
    pub include_limit: bool,
    /// Cells per axis; defaults to 256 in 1D and 128 in 2D.
    #[serde(default)]
    pub cells: Option<usize>,
    /// Uniform frame count used when `save_times` is empty.
    #[serde(default = "d_frames")]
    pub frames: usize,
    #[serde(default)]
    pub save_times: Vec<f64>,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub limit: LimitSettings,
    #[serde(default)]
    pub support: SupportRule,
    #[serde(default)]
    pub diagnostics: DiagnosticsSelection,
    #[serde(default = "d_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_true")]
    pub write_snapshots: bool,
}

impl Scenario {
    pub fn dim(&self) -> usize {
        self.model.domain.dim()
    }

    pub fn resolved_cells(&self) -> usize {
        self.cells.unwrap_or(if self.dim() == 1 { 256 } else { 128 })
    }

    pub fn resolved_save_times(&self) -> Vec<f64> {
        let t = self.model.horizon;
        if self.save_times.is_empty() {
            let k = self.frames.max(1);
            (0..=k).map(|i| t * i as f64 / k as f64).collect()
        } else {
            let mut s = self.save_times.clone();
            s.push(0.0);
            s.push(t);
            s.sort_by(f64::total_cmp);
            s.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
            s
        }
    }

    /// Sorts `m_values` and checks the scenario is runnable.
    pub fn normalize(mut self) -> Result<Self> {
        self.m_values.sort_by(f64::total_cmp);
        self.m_values.dedup();
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(Error::InvalidParameter(format!("scenario name {:?} must be [A-Za-z0-9_-]+", self.name)));
        }
        if self.m_values.is_empty() && !self.include_limit {
            return Err(Error::InvalidParameter("no runs: m_values is empty and include_limit is false".into()));
        }
        if self.m_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("m_values must be sorted ascending".into()));
        }
        for &m in &self.m_values {
            self.model.spec(Exponent::Finite(m)).validate()?;
        }
        if self.include_limit {
            self.model.spec(Exponent::Infinite).validate()?;
        }
        let t = self.model.horizon;
        if self.save_times.iter().any(|&s| !(0.0..=t).contains(&s)) {
            return Err(Error::InvalidParameter("save_times must lie in [0, T]".into()));
        }
        self.model.domain.grid(self.resolved_cells())?;
        Ok(())
    }

    /// Short digest of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("scenario serializes");
        hex::encode(&Sha256::digest(&json)[..6])
    }

    pub fn run_dir(&self) -> PathBuf {
        self.output.join(format!("{}-{}", self.name, self.hash()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config { path: PathBuf::new(), message: e.to_string() })
    }
}

/// Strict parse of a TOML (default) or JSON scenario; errors name the offending key.
pub fn parse_scenario(text: &str, json: bool, path: &Path) -> Result<Scenario> {
    let cfg_err = |message: String| Error::Config { path: path.to_path_buf(), message };
    let scenario: Scenario = if json {
        let mut de = serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(&mut de)
            .map_err(|e| cfg_err(format!("at `{}`: {}", e.path(), e.inner())))?
    } else {
        let de = toml::Deserializer::new(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let inner = e.inner().to_string();
            cfg_err(format!("at `{}`: {}", e.path(), inner.trim_end()))
        })?
    };
    scenario.normalize().map_err(|e| match e {
        Error::Config { .. } => e,
        other => cfg_err(other.to_string()),
    })
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    parse_scenario(&text, json, path)
}
