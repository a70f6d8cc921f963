//! Flat `key = value` run configuration with command-line overrides.
//!
//! Blank lines and `#` comments are ignored. Relative paths are resolved
//! against the directory of the configuration file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::params::ModelSpec;
use crate::sampler::{InitMode, SamplerConfig};

/// How predictive summaries assign a state to each (draw, time).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assignment {
    /// Each draw's own forward-filter backward-sample trajectory.
    Sampled,
    /// The per-time modal state of the draw-averaged marginals.
    Modal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitStrategy {
    /// Jitter around the origin of the unconstrained space.
    Jitter,
    /// Jitter around a point found by a short gradient ascent.
    Pilot,
}

/// A model to compare in the held-out evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelVariant {
    pub name: String,
    pub n_states: usize,
    pub shared_sigma_phi: bool,
    pub model_missingness: bool,
    pub spatial: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSettings {
    pub grid: (usize, usize),
    pub n_times: usize,
    pub means: Vec<f64>,
    pub self_transition: f64,
    pub sigma_lambda: f64,
    pub sigma_phi: Vec<f64>,
    pub seasonal_amplitude: f64,
    pub peak_month: usize,
    pub state_missingness: bool,
    pub xi: Vec<f64>,
    pub beta: Vec<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub panel: PathBuf,
    pub edges: PathBuf,
    pub out_dir: PathBuf,
    pub n_sites: Option<usize>,
    pub n_times: Option<usize>,
    pub n_states: usize,
    pub start_month: u8,
    pub shared_sigma_phi: bool,
    pub model_missingness: bool,
    pub spatial: bool,
    pub sampler: SamplerConfig,
    pub init: InitStrategy,
    pub pilot_iters: usize,
    pub pilot_starts: usize,
    pub jitter: f64,
    /// Upper bound on the draws used for decoding and prediction (evenly thinned).
    pub post_draws: usize,
    pub predict_replications: usize,
    pub assignment: Assignment,
    pub holdout_fraction: f64,
    pub elpd_replications: usize,
    pub elpd_variants: Vec<ModelVariant>,
    pub changepoint_iter: usize,
    pub changepoint_burnin: usize,
    pub simulation: SimulationSettings,
}

const KEYS: &[&str] = &[
    "panel",
    "edges",
    "out_dir",
    "n_sites",
    "n_times",
    "n_states",
    "start_month",
    "shared_sigma_phi",
    "model_missingness",
    "spatial",
    "n_chains",
    "n_warmup",
    "n_draws",
    "seed",
    "target_acceptance",
    "max_tree_depth",
    "init",
    "pilot_iters",
    "pilot_starts",
    "jitter",
    "post_draws",
    "predict_replications",
    "assignment",
    "holdout_fraction",
    "elpd_replications",
    "elpd_variants",
    "changepoint_iter",
    "changepoint_burnin",
    "sim_grid",
    "sim_n_times",
    "sim_means",
    "sim_self_transition",
    "sim_sigma_lambda",
    "sim_sigma_phi",
    "sim_seasonal_amplitude",
    "sim_peak_month",
    "sim_missingness",
    "sim_xi",
    "sim_beta",
    "sim_seed",
];

/// Parsed key-value pairs before interpretation.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
    base_dir: PathBuf,
}

impl RawConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", k + 1)))?;
            insert(&mut values, key.trim(), value.trim())?;
        }
        Ok(Self { values, base_dir: base_dir.to_path_buf() })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    /// Applies a `key=value` override; paths given this way stay relative
    /// to the working directory.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
        let key = key.trim();
        let value = value.trim();
        let value = if matches!(key, "panel" | "edges" | "out_dir") && Path::new(value).is_relative() {
            std::env::current_dir().map_err(|e| Error::io(".", e))?.join(value).display().to_string()
        } else {
            value.to_string()
        };
        insert(&mut self.values, key, &value)
    }

    fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse `{v}`"))),
        }
    }

    fn get_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.values
            .get(key)
            .map(|v| v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse `{v}`"))))
            .transpose()
    }

    fn get_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.values.get(key) {
            None => Ok(default.to_vec()),
            Some(v) if v.is_empty() => Ok(Vec::new()),
            Some(v) => v
                .split(',')
                .map(|x| x.trim().parse().map_err(|_| Error::Config(format!("{key}: cannot parse `{x}`"))))
                .collect(),
        }
    }

    fn path(&self, key: &str, default: &str) -> PathBuf {
        let raw = self.values.get(key).map_or(default, String::as_str);
        let p = PathBuf::from(raw);
        if p.is_relative() {
            self.base_dir.join(p)
        } else {
            p
        }
    }

    pub fn into_run_config(self) -> Result<RunConfig> {
        let out_dir = self.path("out_dir", "out");
        let n_states: usize = self.get("n_states", 5)?;
        if n_states == 0 {
            return Err(Error::Config("n_states must be at least 1".into()));
        }
        let start_month: u8 = self.get("start_month", 1)?;
        if !(1..=12).contains(&start_month) {
            return Err(Error::Config(format!("start_month {start_month} outside 1..=12")));
        }
        let init = match self.get("init", "pilot".to_string())?.as_str() {
            "pilot" => InitStrategy::Pilot,
            "jitter" => InitStrategy::Jitter,
            other => return Err(Error::Config(format!("init: unknown strategy `{other}`"))),
        };
        let assignment = match self.get("assignment", "sampled".to_string())?.as_str() {
            "sampled" => Assignment::Sampled,
            "modal" => Assignment::Modal,
            other => return Err(Error::Config(format!("assignment: unknown mode `{other}`"))),
        };
        let jitter: f64 = self.get("jitter", 2.0)?;
        let sampler = SamplerConfig {
            n_chains: self.get("n_chains", 4)?,
            n_warmup: self.get("n_warmup", 5000)?,
            n_draws: self.get("n_draws", 10000)?,
            seed: self.get("seed", 1)?,
            target_acceptance: self.get("target_acceptance", 0.8)?,
            max_tree_depth: self.get("max_tree_depth", 10)?,
            init: InitMode::RandomJitter { center: None, scale: jitter },
        };
        sampler.validate().map_err(|e| Error::Config(e.to_string()))?;
        let grid = self.get("sim_grid", "5x6".to_string())?;
        let grid = grid
            .split_once('x')
            .and_then(|(r, c)| Some((r.trim().parse().ok()?, c.trim().parse().ok()?)))
            .ok_or_else(|| Error::Config(format!("sim_grid: expected ROWSxCOLS, got `{grid}`")))?;
        let sim_missingness = match self.get("sim_missingness", "state".to_string())?.as_str() {
            "state" => true,
            "none" => false,
            other => return Err(Error::Config(format!("sim_missingness: unknown regime `{other}`"))),
        };
        let simulation = SimulationSettings {
            grid,
            n_times: self.get("sim_n_times", 300)?,
            means: self.get_list("sim_means", &[-4.0, -2.5, -1.0])?,
            self_transition: self.get("sim_self_transition", 0.9)?,
            sigma_lambda: self.get("sim_sigma_lambda", 0.5)?,
            sigma_phi: self.get_list("sim_sigma_phi", &[0.5])?,
            seasonal_amplitude: self.get("sim_seasonal_amplitude", 0.3)?,
            peak_month: self.get("sim_peak_month", 5)?,
            state_missingness: sim_missingness,
            xi: self.get_list("sim_xi", &[-0.5, -1.0, -1.5])?,
            beta: self.get_list("sim_beta", &[-1.0, 0.0, 1.0])?,
            seed: self.get("sim_seed", 1)?,
        };
        let cfg = RunConfig {
            panel: self.path("panel", "panel.csv"),
            edges: self.path("edges", "edges.csv"),
            out_dir,
            n_sites: self.get_opt("n_sites")?,
            n_times: self.get_opt("n_times")?,
            n_states,
            start_month,
            shared_sigma_phi: self.get("shared_sigma_phi", false)?,
            model_missingness: self.get("model_missingness", true)?,
            spatial: self.get("spatial", true)?,
            sampler,
            init,
            pilot_iters: self.get("pilot_iters", 1000)?,
            pilot_starts: self.get("pilot_starts", 8)?,
            jitter,
            post_draws: self.get("post_draws", 1000)?,
            predict_replications: self.get("predict_replications", 1)?,
            assignment,
            holdout_fraction: self.get("holdout_fraction", 0.01)?,
            elpd_replications: self.get("elpd_replications", 10)?,
            elpd_variants: Vec::new(),
            changepoint_iter: self.get("changepoint_iter", 1000)?,
            changepoint_burnin: self.get("changepoint_burnin", 500)?,
            simulation,
        };
        let mut cfg = cfg;
        cfg.elpd_variants = self
            .get("elpd_variants", "main,simpler".to_string())?
            .split(',')
            .map(|v| parse_variant(v.trim(), &cfg))
            .collect::<Result<_>>()?;
        if cfg.post_draws == 0 || cfg.predict_replications == 0 {
            return Err(Error::Config("post_draws and predict_replications must be positive".into()));
        }
        Ok(cfg)
    }
}

/// `main`, `simpler` or `no_spatial`, optionally suffixed `:S` to change the
/// number of states. `main` takes its flags from the run configuration;
/// `simpler` shares one ICAR scale and drops the missingness submodel.
fn parse_variant(token: &str, cfg: &RunConfig) -> Result<ModelVariant> {
    let (base, states) = match token.split_once(':') {
        Some((b, k)) => {
            let k: usize = k.parse().map_err(|_| Error::Config(format!("elpd_variants: bad state count in `{token}`")))?;
            if k == 0 {
                return Err(Error::Config("elpd_variants: state count must be positive".into()));
            }
            (b, k)
        }
        None => (token, cfg.n_states),
    };
    let mut v = ModelVariant {
        name: token.to_string(),
        n_states: states,
        shared_sigma_phi: cfg.shared_sigma_phi,
        model_missingness: cfg.model_missingness,
        spatial: cfg.spatial,
    };
    match base {
        "main" => {}
        "simpler" => {
            v.shared_sigma_phi = true;
            v.model_missingness = false;
        }
        "no_spatial" => v.spatial = false,
        other => return Err(Error::Config(format!("elpd_variants: unknown model `{other}`"))),
    }
    Ok(v)
}

fn insert(values: &mut BTreeMap<String, String>, key: &str, value: &str) -> Result<()> {
    if !KEYS.contains(&key) {
        return Err(Error::Config(format!("unknown key `{key}`")));
    }
    values.insert(key.to_string(), value.to_string());
    Ok(())
}

impl ModelVariant {
    pub fn model_spec(&self, n_sites: usize) -> ModelSpec {
        ModelSpec {
            n_states: self.n_states,
            n_sites,
            shared_sigma_phi: self.shared_sigma_phi,
            model_missingness: self.model_missingness,
            spatial: self.spatial,
        }
    }
}

impl RunConfig {
    pub fn model_spec(&self, n_sites: usize) -> ModelSpec {
        ModelSpec {
            n_states: self.n_states,
            n_sites,
            shared_sigma_phi: self.shared_sigma_phi,
            model_missingness: self.model_missingness,
            spatial: self.spatial,
        }
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let mut raw = RawConfig::load(path)?;
        for o in overrides {
            raw.set(o)?;
        }
        raw.into_run_config()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_relative_paths() {
        let raw = RawConfig::parse("# comment\npanel = data/p.csv\nn_states = 3 # trailing\n", Path::new("/cfg")).unwrap();
        let cfg = raw.into_run_config().unwrap();
        assert_eq!(cfg.panel, PathBuf::from("/cfg/data/p.csv"));
        assert_eq!(cfg.n_states, 3);
        assert_eq!(cfg.sampler.n_warmup, 5000);
        assert_eq!(cfg.sampler.n_draws, 10000);
        assert_eq!(cfg.assignment, Assignment::Sampled);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(RawConfig::parse("n_stats = 3", Path::new(".")), Err(Error::Config(_))));
        let raw = RawConfig::parse("n_states = three", Path::new(".")).unwrap();
        assert!(matches!(raw.into_run_config(), Err(Error::Config(_))));
        let raw = RawConfig::parse("start_month = 13", Path::new(".")).unwrap();
        assert!(raw.into_run_config().is_err());
        let raw = RawConfig::parse("n_warmup = 10", Path::new(".")).unwrap();
        assert!(raw.into_run_config().is_err());
    }

    #[test]
    fn overrides_win() {
        let mut raw = RawConfig::parse("seed = 1\nsim_means = -3,-1", Path::new(".")).unwrap();
        raw.set("seed=7").unwrap();
        let cfg = raw.into_run_config().unwrap();
        assert_eq!(cfg.sampler.seed, 7);
        assert_eq!(cfg.simulation.means, vec![-3.0, -1.0]);
    }

    #[test]
    fn variants() {
        let raw = RawConfig::parse("n_states = 5\nelpd_variants = main, main:4, simpler, no_spatial", Path::new(".")).unwrap();
        let v = raw.into_run_config().unwrap().elpd_variants;
        assert_eq!(v.len(), 4);
        assert_eq!((v[0].n_states, v[1].n_states), (5, 4));
        assert!(v[2].shared_sigma_phi && !v[2].model_missingness && v[2].spatial);
        assert!(!v[3].spatial && v[3].model_missingness);
        let raw = RawConfig::parse("elpd_variants = fancy", Path::new(".")).unwrap();
        assert!(raw.into_run_config().is_err());
    }
}
