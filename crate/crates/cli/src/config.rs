//! Run configuration: a TOML file whose sections mirror the library types,
//! overridden by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use boost_core::baselines::DPConfig;
use boost_core::economics::CostModel;
use boost_core::oo::{DesignBounds, OOSettings, SamplingStrategy};
use boost_core::timeseries::{load_trace, synth_trace, HourlyTrace, TraceFormat};
use boost_core::{Design, DispatchParams, Method, Simulator};
use boost_solver::{BranchRule, LpOptions, MilpOptions};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    /// CSV file to read; when absent a synthetic trace is generated.
    pub file: Option<PathBuf>,
    pub synth_seed: u64,
    /// Hours of synthetic data, or a prefix length to cut a file to.
    pub hours: Option<usize>,
    pub window_hours: usize,
    pub format: TraceFormat,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self { file: None, synth_seed: 0, hours: None, window_hours: 168, format: TraceFormat::default() }
    }
}

/// Dispatch parameters; unset fields take the defaults derived from the
/// trace's peak load.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DispatchParamsConfig {
    pub diesel_price: Option<f64>,
    pub diesel_max_kw: Option<f64>,
    pub diesel_min_kw: Option<f64>,
    pub eta_charge: Option<f64>,
    pub eta_discharge: Option<f64>,
    pub soc_min_frac: Option<f64>,
    pub soc_max_frac: Option<f64>,
    pub soc_init_frac: Option<f64>,
    pub c_rate: Option<f64>,
}

impl DispatchParamsConfig {
    pub fn resolve(&self, peak_kw: f64) -> DispatchParams {
        let d = DispatchParams::for_peak_load(peak_kw);
        DispatchParams {
            diesel_price: self.diesel_price.unwrap_or(d.diesel_price),
            diesel_max_kw: self.diesel_max_kw.unwrap_or(d.diesel_max_kw),
            diesel_min_kw: self.diesel_min_kw.unwrap_or(d.diesel_min_kw),
            eta_charge: self.eta_charge.unwrap_or(d.eta_charge),
            eta_discharge: self.eta_discharge.unwrap_or(d.eta_discharge),
            soc_min_frac: self.soc_min_frac.unwrap_or(d.soc_min_frac),
            soc_max_frac: self.soc_max_frac.unwrap_or(d.soc_max_frac),
            soc_init_frac: self.soc_init_frac.unwrap_or(d.soc_init_frac),
            c_rate: self.c_rate.or(d.c_rate),
        }
    }

    fn from_params(p: &DispatchParams) -> Self {
        Self {
            diesel_price: Some(p.diesel_price),
            diesel_max_kw: Some(p.diesel_max_kw),
            diesel_min_kw: Some(p.diesel_min_kw),
            eta_charge: Some(p.eta_charge),
            eta_discharge: Some(p.eta_discharge),
            soc_min_frac: Some(p.soc_min_frac),
            soc_max_frac: Some(p.soc_max_frac),
            soc_init_frac: Some(p.soc_init_frac),
            c_rate: p.c_rate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub strategy: SamplingStrategy,
    pub seed: u64,
    pub battery_kwh: [f64; 2],
    pub pv_kw: [f64; 2],
}

impl Default for SamplingConfig {
    fn default() -> Self {
        let b = DesignBounds::default();
        Self {
            strategy: SamplingStrategy::Grid,
            seed: 0,
            battery_kwh: [b.battery_kwh.0, b.battery_kwh.1],
            pv_kw: [b.pv_kw.0, b.pv_kw.1],
        }
    }
}

impl SamplingConfig {
    pub fn bounds(&self) -> DesignBounds {
        DesignBounds { battery_kwh: (self.battery_kwh[0], self.battery_kwh[1]), pv_kw: (self.pv_kw[0], self.pv_kw[1]) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branching {
    MostFractional,
    FirstFractional,
    Reliability,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub node_limit: usize,
    pub relative_gap: f64,
    pub branching: Branching,
    pub heuristic_interval: usize,
    pub cut_rounds: usize,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let m = MilpOptions::default();
        Self {
            node_limit: m.node_limit,
            relative_gap: m.relative_gap,
            branching: Branching::Reliability,
            heuristic_interval: m.heuristic_interval,
            cut_rounds: m.cut_rounds,
            max_iterations: m.lp.max_iterations,
        }
    }
}

impl SolverConfig {
    pub fn milp_options(&self) -> MilpOptions {
        let d = MilpOptions::default();
        MilpOptions {
            node_limit: self.node_limit,
            relative_gap: self.relative_gap,
            heuristic_interval: self.heuristic_interval,
            cut_rounds: self.cut_rounds,
            lp: LpOptions { max_iterations: self.max_iterations, ..d.lp },
            branching: match self.branching {
                Branching::MostFractional => BranchRule::MostFractional,
                Branching::FirstFractional => BranchRule::FirstFractional,
                Branching::Reliability => BranchRule::Reliability,
            },
            ..d
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub out: PathBuf,
    /// Worker threads for design evaluation; 0 uses every core.
    pub jobs: usize,
    pub method: Method,
    /// `[E_B kWh, PV kW]` for `dispatch` and `compare`.
    pub design: Option<[f64; 2]>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { out: PathBuf::from("out"), jobs: 0, method: Method::Milp, design: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub trace: TraceConfig,
    pub dispatch_params: DispatchParamsConfig,
    pub cost_model: CostModel,
    pub oo_plan: OOSettings,
    pub sampling: SamplingConfig,
    pub dp_config: DPConfig,
    pub solver: SolverConfig,
}

/// Flag values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub method: Option<Method>,
    pub design: Option<Design>,
    pub jobs: Option<usize>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// `--seed` sets both the synthetic trace seed and the sampling seed.
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.trace.synth_seed = seed;
            self.sampling.seed = seed;
        }
        if let Some(out) = &o.out {
            self.run.out.clone_from(out);
        }
        if let Some(m) = o.method {
            self.run.method = m;
        }
        if let Some(d) = o.design {
            self.run.design = Some([d.battery_kwh, d.pv_kw]);
        }
        if let Some(j) = o.jobs {
            self.run.jobs = j;
        }
    }

    pub fn design(&self) -> Option<Design> {
        self.run.design.map(|[e, p]| Design::new(e, p))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }
}

/// A configuration with its trace loaded and every default filled in.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    pub trace: HourlyTrace,
    pub params: DispatchParams,
}

impl Resolved {
    pub fn new(mut config: RunConfig) -> Result<Self, CliError> {
        let tc = &config.trace;
        let mut trace = match &tc.file {
            Some(path) => load_trace(path, &tc.format).map_err(|e| CliError::Usage(e.to_string()))?,
            None => synth_trace(tc.synth_seed, tc.hours.unwrap_or(8760)).map_err(|e| CliError::Usage(e.to_string()))?,
        };
        if let (Some(h), Some(_)) = (tc.hours, &tc.file) {
            if h == 0 || h > trace.len() {
                return Err(CliError::Usage(format!("trace.hours = {h} but the file has {} hours", trace.len())));
            }
            trace = trace.slice(boost_core::timeseries::Window { start: 0, len: h });
        }
        if tc.window_hours == 0 {
            return Err(CliError::Usage("trace.window_hours must be positive".into()));
        }
        let params = config.dispatch_params.resolve(trace.peak_load());
        params.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        config.cost_model.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        config.dp_config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        if let Some(d) = config.design() {
            d.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        }
        config.dispatch_params = DispatchParamsConfig::from_params(&params);
        Ok(Self { config, trace, params })
    }

    pub fn simulator(&self) -> Simulator {
        let mut sim = Simulator::new(self.params, self.config.trace.window_hours).with_milp_options(self.config.solver.milp_options());
        sim.dp = self.config.dp_config;
        sim
    }

    /// The resolved configuration as `# `-prefixed lines for report headers.
    pub fn header(&self) -> String {
        let mut out = String::new();
        for line in self.config.to_toml().lines() {
            out.push('#');
            if !line.is_empty() {
                out.push(' ');
                out.push_str(line);
            }
            out.push('\n');
        }
        out
    }
}
