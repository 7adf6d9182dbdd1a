//! Problem definition: thermal plants, pumped-storage plants and the
//! net-demand profile, plus the instance file loader and a synthetic
//! demand generator.
//!
//! Powers are in dimensionless per-unit, one time step is one hour.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default reserve margins when the instance does not specify them.
pub const DEFAULT_RESERVE_MARGIN: f64 = 0.05;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot read {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed instance file")]
    Parse(#[from] toml::de::Error),
    #[error("malformed demand csv")]
    Csv(#[from] csv::Error),
    #[error("invalid instance: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ModelError {
    ModelError::Invalid(msg.into())
}

/// A thermal generating unit with a quadratic fuel-cost curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalPlant {
    pub id: usize,
    pub g_min: f64,
    pub g_max: f64,
    pub ramp_up: f64,
    pub ramp_down: f64,
    /// Minimum number of hours the plant stays halted before a restart.
    pub mdt: u32,
    /// Parsed for completeness; no constraint uses it.
    pub min_uptime: Option<u32>,
    pub startup_cost: f64,
    pub cost_a: f64,
    pub cost_b: f64,
    pub cost_c: f64,
}

impl ThermalPlant {
    /// Fuel cost of one committed hour at output `g`.
    #[inline]
    pub fn fuel_cost(&self, g: f64) -> f64 {
        self.cost_a + self.cost_b * g + self.cost_c * g * g
    }

    #[inline]
    pub fn marginal_cost(&self, g: f64) -> f64 {
        self.cost_b + 2.0 * self.cost_c * g
    }

    fn validate(&self) -> Result<(), ModelError> {
        let id = self.id + 1;
        let finite = [
            self.g_min,
            self.g_max,
            self.ramp_up,
            self.ramp_down,
            self.startup_cost,
            self.cost_a,
            self.cost_b,
            self.cost_c,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(invalid(format!("thermal plant {id}: non-finite parameter")));
        }
        if !(0.0 <= self.g_min && self.g_min <= self.g_max) {
            return Err(invalid(format!(
                "thermal plant {id}: requires 0 <= g_min <= g_max (got {} / {})",
                self.g_min, self.g_max
            )));
        }
        if self.ramp_up <= 0.0 || self.ramp_down <= 0.0 {
            return Err(invalid(format!("thermal plant {id}: ramp rates must be positive")));
        }
        if self.cost_c < 0.0 {
            return Err(invalid(format!("thermal plant {id}: cost_c must be >= 0")));
        }
        Ok(())
    }
}

/// A pumped-storage hydro plant and its upper reservoir.
///
/// Positive output generates (draining the reservoir), negative output pumps.
/// The level follows `epsilon * hv[t] = epsilon * hv[t-1] - eta * hg[t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PumpedStoragePlant {
    pub id: usize,
    pub hg_min: f64,
    pub hg_max: f64,
    pub hp_min: f64,
    pub hp_max: f64,
    pub ramp_gen_up: f64,
    pub ramp_pump_down: f64,
    pub hv_min: f64,
    pub hv_max: f64,
    pub hv_initial: f64,
    pub epsilon: f64,
    pub eta: f64,
}

impl PumpedStoragePlant {
    /// Level change per unit of output held for one hour (`eta / epsilon`).
    #[inline]
    pub fn level_per_output(&self) -> f64 {
        self.eta / self.epsilon
    }

    /// Level after one hour at output `hg`, starting from `prev`.
    #[inline]
    pub fn next_level(&self, prev: f64, hg: f64) -> f64 {
        (self.epsilon * prev - self.eta * hg) / self.epsilon
    }

    fn validate(&self) -> Result<(), ModelError> {
        let id = self.id + 1;
        let finite = [
            self.hg_min,
            self.hg_max,
            self.hp_min,
            self.hp_max,
            self.ramp_gen_up,
            self.ramp_pump_down,
            self.hv_min,
            self.hv_max,
            self.hv_initial,
            self.epsilon,
            self.eta,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(invalid(format!("hydro plant {id}: non-finite parameter")));
        }
        if !(0.0 <= self.hg_min && self.hg_min <= self.hg_max) {
            return Err(invalid(format!("hydro plant {id}: requires 0 <= hg_min <= hg_max")));
        }
        if !(0.0 <= self.hp_min && self.hp_min <= self.hp_max) {
            return Err(invalid(format!("hydro plant {id}: requires 0 <= hp_min <= hp_max")));
        }
        if self.ramp_gen_up <= 0.0 || self.ramp_pump_down <= 0.0 {
            return Err(invalid(format!("hydro plant {id}: ramp rates must be positive")));
        }
        if !(self.hv_min <= self.hv_initial && self.hv_initial <= self.hv_max) {
            return Err(invalid(format!(
                "hydro plant {id}: requires hv_min <= hv_initial <= hv_max"
            )));
        }
        if self.epsilon <= 0.0 {
            return Err(invalid(format!("hydro plant {id}: epsilon must be positive")));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(invalid(format!("hydro plant {id}: eta must lie in (0, 1]")));
        }
        Ok(())
    }
}

/// Hourly net demand (demand minus PV) with the reserve margins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandProfile {
    pub net_demand: Vec<f64>,
    /// Maximum relative decrease of net demand to cover.
    pub alpha: Vec<f64>,
    /// Maximum relative increase of net demand to cover.
    pub beta: Vec<f64>,
}

impl DemandProfile {
    /// Profile with constant reserve margins.
    pub fn with_margins(net_demand: Vec<f64>, alpha: f64, beta: f64) -> Self {
        let n = net_demand.len();
        Self { net_demand, alpha: vec![alpha; n], beta: vec![beta; n] }
    }

    /// Number of hourly steps.
    pub fn steps(&self) -> usize {
        self.net_demand.len()
    }

    pub fn truncated(&self, steps: usize) -> Result<Self, ModelError> {
        if steps == 0 || steps > self.steps() {
            return Err(invalid(format!(
                "horizon {steps} outside 1..={} available hours",
                self.steps()
            )));
        }
        Ok(Self {
            net_demand: self.net_demand[..steps].to_vec(),
            alpha: self.alpha[..steps].to_vec(),
            beta: self.beta[..steps].to_vec(),
        })
    }

    fn validate(&self) -> Result<(), ModelError> {
        let n = self.net_demand.len();
        if n == 0 {
            return Err(invalid("demand profile is empty"));
        }
        if self.alpha.len() != n || self.beta.len() != n {
            return Err(invalid(format!(
                "demand series lengths differ (net {n}, alpha {}, beta {})",
                self.alpha.len(),
                self.beta.len()
            )));
        }
        if self.net_demand.iter().any(|v| !v.is_finite()) {
            return Err(invalid("net demand contains a non-finite value"));
        }
        for (name, series) in [("alpha", &self.alpha), ("beta", &self.beta)] {
            if let Some(t) = series.iter().position(|v| !(0.0..=1.0).contains(v)) {
                return Err(invalid(format!("{name}[{t}] outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Writes `t,net_demand,alpha,beta` rows.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "net_demand", "alpha", "beta"])?;
        for t in 0..self.steps() {
            out.write_record([
                t.to_string(),
                self.net_demand[t].to_string(),
                self.alpha[t].to_string(),
                self.beta[t].to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self, ModelError> {
        #[derive(Deserialize)]
        struct Row {
            t: usize,
            net_demand: f64,
            alpha: Option<f64>,
            beta: Option<f64>,
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let mut profile = Self { net_demand: vec![], alpha: vec![], beta: vec![] };
        for (k, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row?;
            if row.t != k {
                return Err(invalid(format!("demand csv row {k} has t = {}", row.t)));
            }
            profile.net_demand.push(row.net_demand);
            profile.alpha.push(row.alpha.unwrap_or(DEFAULT_RESERVE_MARGIN));
            profile.beta.push(row.beta.unwrap_or(DEFAULT_RESERVE_MARGIN));
        }
        Ok(profile)
    }
}

/// How the time-indexed reserve capabilities are derived from the schedule.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReserveMode {
    /// Committed thermal plants offer `[g_min, g_max]`, every hydro plant
    /// offers `[-hp_max, hg_max]`.
    #[default]
    Static,
    /// Capabilities are additionally limited by ramp rates from the previous
    /// hour and by reservoir headroom.
    RampAware,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub name: String,
    pub thermal: Vec<ThermalPlant>,
    pub hydro: Vec<PumpedStoragePlant>,
    pub demand: DemandProfile,
    pub reserve_mode: ReserveMode,
}

impl ProblemInstance {
    pub fn new(
        name: impl Into<String>,
        thermal: Vec<ThermalPlant>,
        hydro: Vec<PumpedStoragePlant>,
        demand: DemandProfile,
    ) -> Result<Self, ModelError> {
        let inst = Self {
            name: name.into(),
            thermal,
            hydro,
            demand,
            reserve_mode: ReserveMode::Static,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn steps(&self) -> usize {
        self.demand.steps()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.thermal.is_empty() {
            return Err(invalid("at least one thermal plant is required"));
        }
        for (k, p) in self.thermal.iter().enumerate() {
            if p.id != k {
                return Err(invalid(format!("thermal plant at position {k} has id {}", p.id)));
            }
            p.validate()?;
        }
        for (k, p) in self.hydro.iter().enumerate() {
            if p.id != k {
                return Err(invalid(format!("hydro plant at position {k} has id {}", p.id)));
            }
            p.validate()?;
        }
        self.demand.validate()
    }

    /// Hours where the whole fleet cannot cover `(1 + beta) * net_demand`.
    ///
    /// Such instances load fine; the solver will report a reserve penalty.
    pub fn capacity_shortfalls(&self) -> Vec<usize> {
        let cap: f64 = self.thermal.iter().map(|p| p.g_max).sum::<f64>()
            + self.hydro.iter().map(|p| p.hg_max).sum::<f64>();
        (0..self.steps())
            .filter(|&t| (1.0 + self.demand.beta[t]) * self.demand.net_demand[t] > cap)
            .collect()
    }

    /// Copy restricted to the first `steps` hours.
    pub fn with_horizon(&self, steps: usize) -> Result<Self, ModelError> {
        Ok(Self { demand: self.demand.truncated(steps)?, ..self.clone() })
    }
}

// ---------------------------------------------------------------------------
// Instance file

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    reserve_mode: ReserveMode,
    thermal: Vec<ThermalEntry>,
    #[serde(default)]
    hydro: Vec<HydroEntry>,
    demand: DemandEntry,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ThermalEntry {
    g_min: f64,
    g_max: f64,
    ramp_up: Option<f64>,
    ramp_down: Option<f64>,
    mdt: u32,
    min_uptime: Option<u32>,
    startup_cost: f64,
    cost_a: f64,
    cost_b: f64,
    cost_c: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HydroEntry {
    #[serde(default)]
    hg_min: f64,
    hg_max: f64,
    #[serde(default)]
    hp_min: f64,
    hp_max: f64,
    ramp_gen_up: Option<f64>,
    ramp_pump_down: Option<f64>,
    #[serde(default)]
    hv_min: f64,
    hv_max: f64,
    hv_initial: Option<f64>,
    epsilon: f64,
    eta: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Series {
    Scalar(f64),
    Values(Vec<f64>),
}

impl Series {
    fn expand(self, n: usize) -> Vec<f64> {
        match self {
            Series::Scalar(v) => vec![v; n],
            Series::Values(v) => v,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DemandEntry {
    net_demand: Option<Vec<f64>>,
    csv: Option<PathBuf>,
    synth: Option<SynthSpec>,
    alpha: Option<Series>,
    beta: Option<Series>,
}

/// Parameters of [`synth_demand`], also accepted inline in instance files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub days: u32,
    pub peak: f64,
    pub pv_peak: f64,
    #[serde(default)]
    pub seed: u64,
}

/// Loads and validates an instance file.
///
/// A relative `demand.csv` path is resolved against the instance file's
/// directory.
pub fn load_instance(path: impl AsRef<Path>) -> Result<ProblemInstance, ModelError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|source| ModelError::Io { path: path.to_path_buf(), source })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let default_name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
    parse_instance(&text, base, default_name)
}

/// Parses instance text; `base` resolves relative CSV paths.
pub fn parse_instance(
    text: &str,
    base: &Path,
    default_name: Option<String>,
) -> Result<ProblemInstance, ModelError> {
    let file: InstanceFile = toml::from_str(text)?;

    let thermal = file
        .thermal
        .into_iter()
        .enumerate()
        .map(|(id, e)| ThermalPlant {
            id,
            g_min: e.g_min,
            g_max: e.g_max,
            ramp_up: e.ramp_up.unwrap_or(e.g_max),
            ramp_down: e.ramp_down.unwrap_or(e.g_max),
            mdt: e.mdt,
            min_uptime: e.min_uptime,
            startup_cost: e.startup_cost,
            cost_a: e.cost_a,
            cost_b: e.cost_b,
            cost_c: e.cost_c,
        })
        .collect();

    let hydro = file
        .hydro
        .into_iter()
        .enumerate()
        .map(|(id, e)| PumpedStoragePlant {
            id,
            hg_min: e.hg_min,
            hg_max: e.hg_max,
            hp_min: e.hp_min,
            hp_max: e.hp_max,
            ramp_gen_up: e.ramp_gen_up.unwrap_or(e.hg_max),
            ramp_pump_down: e.ramp_pump_down.unwrap_or(e.hp_max),
            hv_min: e.hv_min,
            hv_max: e.hv_max,
            hv_initial: e.hv_initial.unwrap_or(e.hv_max / 2.0),
            epsilon: e.epsilon,
            eta: e.eta,
        })
        .collect();

    let d = file.demand;
    let sources = [d.net_demand.is_some(), d.csv.is_some(), d.synth.is_some()];
    if sources.iter().filter(|s| **s).count() != 1 {
        return Err(invalid("demand needs exactly one of net_demand, csv, synth"));
    }
    let mut demand = if let Some(net) = d.net_demand {
        DemandProfile::with_margins(net, DEFAULT_RESERVE_MARGIN, DEFAULT_RESERVE_MARGIN)
    } else if let Some(csv_path) = d.csv {
        let full = base.join(csv_path);
        let f = fs::File::open(&full).map_err(|source| ModelError::Io { path: full, source })?;
        DemandProfile::read_csv(f)?
    } else {
        let s = d.synth.expect("checked above");
        synth_demand(s.days, s.peak, s.pv_peak, s.seed)?
    };
    let n = demand.steps();
    if let Some(a) = d.alpha {
        demand.alpha = a.expand(n);
    }
    if let Some(b) = d.beta {
        demand.beta = b.expand(n);
    }

    let inst = ProblemInstance {
        name: file.name.or(default_name).unwrap_or_else(|| "instance".into()),
        thermal,
        hydro,
        demand,
        reserve_mode: file.reserve_mode,
    };
    inst.validate()?;
    Ok(inst)
}

// ---------------------------------------------------------------------------
// Synthetic demand

/// Relative weekend demand level.
const WEEKEND_FACTOR: f64 = 0.85;
/// Half-width of the multiplicative demand noise.
const NOISE: f64 = 0.03;

/// Hourly net demand for `days` days.
///
/// Demand follows a diurnal sinusoid between 0.6 and 1.0 of `peak` (low at
/// 04:00, high at 16:00), scaled by 0.85 on days 5 and 6 of each week, with
/// a seeded multiplicative jitter of +-3 %. A PV bell `pv_peak * sin` over
/// 06:00-18:00 is subtracted.
pub fn synth_demand(days: u32, peak: f64, pv_peak: f64, seed: u64) -> Result<DemandProfile, ModelError> {
    if days < 1 {
        return Err(invalid("synth_demand: days must be >= 1"));
    }
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(invalid("synth_demand: peak must be positive"));
    }
    if !(pv_peak >= 0.0 && pv_peak.is_finite()) {
        return Err(invalid("synth_demand: pv_peak must be >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hours = days as usize * 24;
    let net = (0..hours)
        .map(|h| {
            let day = h / 24;
            let hod = (h % 24) as f64;
            let shape = 0.5 - 0.5 * (2.0 * PI * (hod - 4.0) / 24.0).cos();
            let weekly = if day % 7 >= 5 { WEEKEND_FACTOR } else { 1.0 };
            let jitter = 1.0 + rng.random_range(-NOISE..=NOISE);
            let demand = peak * (0.6 + 0.4 * shape) * weekly * jitter;
            let pv = if (6.0..=18.0).contains(&hod) {
                pv_peak * (PI * (hod - 6.0) / 12.0).sin().max(0.0)
            } else {
                0.0
            };
            demand - pv
        })
        .collect();
    Ok(DemandProfile::with_margins(net, DEFAULT_RESERVE_MARGIN, DEFAULT_RESERVE_MARGIN))
}
