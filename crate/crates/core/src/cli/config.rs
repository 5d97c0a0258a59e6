//! Flat `key = value` configuration.
//!
//! Blank lines and `#` comments are ignored. Keys not listed below are
//! rejected, as are repeated keys.
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `source` | `simulate` | `simulate` or `csv` |
//! | `states_csv`, `controls_csv` | – | trace files when `source = csv` |
//! | `method` | `both` | `dmdc`, `hdmdc` or `both` |
//! | `train_snapshots` | `400` | training transitions `m` |
//! | `predict_steps` | `200,400,1200` | prediction horizons |
//! | `embedding` | `9` | Hankel depth `h` for `hdmdc` |
//! | `rank` | `auto` | `auto`, `<r>` or `energy:<fraction>` |
//! | `seed` | `2021` | simulator seed |
//! | `arrival_model` | `poisson` | `poisson` or `deterministic` |
//! | `arrival_rates`, `saturation_flows`, `initial_queues` | preset | eight comma-separated values, EB WB NB SB EBL WBL NBL SBL |
//! | `signal_plan` | preset | `EBL+WBL:15:3;EB+WB:30:3;…` (movements:duration:yellow) |
//! | `duration_seconds`, `warmup_seconds` | `3600`, `900` | simulated span and discarded warmup |
//! | `sweep_train_snapshots`, `sweep_embeddings`, `sweep_windows` | `200,400,600`, `1,5,9`, `200,400,800` | sweep grid axes |

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::csvio::read_file;
use crate::error::{Error, Result};
use crate::linalg::RankSpec;
use crate::simqueue::{sha256_hex, IntersectionConfig, N_MOVEMENTS};

const KNOWN_KEYS: &[&str] = &[
    "source",
    "states_csv",
    "controls_csv",
    "method",
    "train_snapshots",
    "predict_steps",
    "embedding",
    "rank",
    "seed",
    "arrival_model",
    "arrival_rates",
    "saturation_flows",
    "initial_queues",
    "signal_plan",
    "duration_seconds",
    "warmup_seconds",
    "sweep_train_snapshots",
    "sweep_embeddings",
    "sweep_windows",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    Dmdc,
    Hdmdc,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Dmdc => "dmdc",
            Method::Hdmdc => "hdmdc",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Simulate(IntersectionConfig),
    Csv { states: PathBuf, controls: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub methods: Vec<Method>,
    pub train_snapshots: usize,
    pub predict_steps: Vec<usize>,
    pub embedding: usize,
    pub rank: RankSpec,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let sim = IntersectionConfig::default();
        Self {
            seed: sim.seed,
            source: DataSource::Simulate(sim),
            methods: vec![Method::Dmdc, Method::Hdmdc],
            train_snapshots: 400,
            predict_steps: vec![200, 400, 1200],
            embedding: 9,
            rank: RankSpec::Automatic,
        }
    }
}

/// Axes of a (training size, depth, window) grid; remaining settings come
/// from the experiment config.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub train_snapshots: Vec<usize>,
    pub embeddings: Vec<usize>,
    pub windows: Vec<usize>,
    pub rank: RankSpec,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            train_snapshots: vec![200, 400, 600],
            embeddings: vec![1, 5, 9],
            windows: vec![200, 400, 800],
            rank: RankSpec::Automatic,
        }
    }
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        for (name, axis) in [
            ("sweep_train_snapshots", &self.train_snapshots),
            ("sweep_embeddings", &self.embeddings),
            ("sweep_windows", &self.windows),
        ] {
            if axis.is_empty() {
                v.push(format!("{name} is empty"));
            }
            if axis.contains(&0) {
                v.push(format!("{name} contains 0"));
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }
}

/// Parsed configuration file: experiment settings plus sweep axes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Config {
    pub experiment: ExperimentConfig,
    pub sweep: SweepGrid,
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad element `{}` in {key}", s.trim())))
        })
        .collect()
}

fn scalar<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for {key}")))
}

fn movement_array(key: &str, value: &str) -> Result<[f64; N_MOVEMENTS]> {
    let v: Vec<f64> = list(key, value)?;
    v.try_into().map_err(|v: Vec<f64>| {
        Error::Config(format!("{key} needs {N_MOVEMENTS} values, got {}", v.len()))
    })
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

pub fn parse_entries(text: &str, path: &Path) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let perr = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| perr(format!("expected `key = value`, found `{line}`")))?;
        let (k, v) = (k.trim(), v.trim());
        if !KNOWN_KEYS.contains(&k) {
            return Err(perr(format!("unknown key `{k}`")));
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(perr(format!("duplicate key `{k}`")));
        }
    }
    Ok(map)
}

impl Config {
    pub fn from_entries(entries: &BTreeMap<String, String>, base_dir: &Path) -> Result<Self> {
        let mut cfg = Config::default();
        let mut sim = IntersectionConfig::default();
        let mut source = "simulate".to_string();
        let mut states = None;
        let mut controls = None;
        let e = &mut cfg.experiment;
        for (k, v) in entries {
            let v = v.as_str();
            match k.as_str() {
                "source" => source = v.to_string(),
                "states_csv" => states = Some(base_dir.join(v)),
                "controls_csv" => controls = Some(base_dir.join(v)),
                "method" => {
                    e.methods = match v {
                        "dmdc" => vec![Method::Dmdc],
                        "hdmdc" => vec![Method::Hdmdc],
                        "both" => vec![Method::Dmdc, Method::Hdmdc],
                        _ => return Err(Error::Config(format!("unknown method `{v}`"))),
                    }
                }
                "train_snapshots" => e.train_snapshots = scalar(k, v)?,
                "predict_steps" => e.predict_steps = list(k, v)?,
                "embedding" => e.embedding = scalar(k, v)?,
                "rank" => {
                    e.rank = v.parse()?;
                    cfg.sweep.rank = e.rank;
                }
                "seed" => e.seed = scalar(k, v)?,
                "arrival_model" => sim.arrival_model = v.parse()?,
                "arrival_rates" => sim.arrival_rate = movement_array(k, v)?,
                "saturation_flows" => sim.saturation_flow = movement_array(k, v)?,
                "initial_queues" => sim.initial_queue = movement_array(k, v)?,
                "signal_plan" => sim.plan = v.parse()?,
                "duration_seconds" => sim.duration_seconds = scalar(k, v)?,
                "warmup_seconds" => sim.warmup_seconds = scalar(k, v)?,
                "sweep_train_snapshots" => cfg.sweep.train_snapshots = list(k, v)?,
                "sweep_embeddings" => cfg.sweep.embeddings = list(k, v)?,
                "sweep_windows" => cfg.sweep.windows = list(k, v)?,
                other => unreachable!("key `{other}` passed the known-key filter"),
            }
        }
        e.source = match source.as_str() {
            "simulate" => DataSource::Simulate(sim),
            "csv" => match (states, controls) {
                (Some(states), Some(controls)) => DataSource::Csv { states, controls },
                _ => {
                    return Err(Error::Config(
                        "source = csv needs states_csv and controls_csv".into(),
                    ))
                }
            },
            other => return Err(Error::Config(format!("unknown source `{other}`"))),
        };
        e.set_seed(e.seed);
        Ok(cfg)
    }

    /// Relative CSV paths resolve against the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_file(path)?;
        let entries = parse_entries(&text, path)?;
        Self::from_entries(&entries, path.parent().unwrap_or(Path::new(".")))
    }
}

impl ExperimentConfig {
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        if let DataSource::Simulate(sim) = &mut self.source {
            sim.seed = seed;
        }
    }

    pub fn max_steps(&self) -> usize {
        self.predict_steps.iter().copied().max().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        if self.embedding == 0 {
            v.push("embedding must be at least 1".to_string());
        }
        if self.train_snapshots < self.embedding + 2 {
            v.push(format!(
                "train_snapshots {} must be at least embedding + 2 = {}",
                self.train_snapshots,
                self.embedding + 2
            ));
        }
        if self.predict_steps.is_empty() {
            v.push("predict_steps is empty".to_string());
        }
        if self.predict_steps.contains(&0) {
            v.push("predict_steps contains 0".to_string());
        }
        if self.methods.is_empty() {
            v.push("no method selected".to_string());
        }
        if let DataSource::Simulate(sim) = &self.source {
            if let Err(Error::Validation(sv)) = sim.validate() {
                v.extend(sv);
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }

    /// Hankel depth used for `method`.
    pub fn depth(&self, method: Method) -> usize {
        match method {
            Method::Dmdc => 1,
            Method::Hdmdc => self.embedding,
        }
    }

    /// Every resolved setting in a fixed order; the config digest hashes this.
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        match &self.source {
            DataSource::Simulate(sim) => {
                out.push_str("source = simulate\n");
                out.push_str(&sim.canonical_text());
            }
            DataSource::Csv { states, controls } => {
                out.push_str(&format!(
                    "source = csv\nstates_csv = {}\ncontrols_csv = {}\nseed = {}\n",
                    states.display(),
                    controls.display(),
                    self.seed
                ));
            }
        }
        let methods: Vec<&str> = self.methods.iter().map(|m| m.name()).collect();
        out.push_str(&format!(
            "method = {}\ntrain_snapshots = {}\npredict_steps = {}\nembedding = {}\nrank = {}\n",
            methods.join(","),
            self.train_snapshots,
            join(&self.predict_steps),
            self.embedding,
            self.rank
        ));
        out
    }

    pub fn digest(&self) -> String {
        sha256_hex(self.canonical_text().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simqueue::ArrivalModel;

    fn parse(text: &str) -> Result<Config> {
        let entries = parse_entries(text, Path::new("test.cfg"))?;
        Config::from_entries(&entries, Path::new("/data"))
    }

    #[test]
    fn defaults() {
        let c = parse("").unwrap();
        assert_eq!(c.experiment.train_snapshots, 400);
        assert_eq!(c.experiment.predict_steps, vec![200, 400, 1200]);
        assert_eq!(c.experiment.embedding, 9);
        assert_eq!(c.experiment.methods, vec![Method::Dmdc, Method::Hdmdc]);
        assert_eq!(c.experiment.rank, RankSpec::Automatic);
        assert_eq!(c.experiment.depth(Method::Dmdc), 1);
        c.experiment.validate().unwrap();
    }

    #[test]
    fn full_file() {
        let c = parse(
            "# experiment\nmethod = hdmdc\ntrain_snapshots = 300 # inline\npredict_steps = 50, 100\n\
             embedding = 4\nrank = energy:0.999\nseed = 7\narrival_model = deterministic\n\
             signal_plan = EB+WB+NB+SB:40:3;EBL+WBL+NBL+SBL:20:3\n\
             sweep_embeddings = 1,2\n",
        )
        .unwrap();
        let e = &c.experiment;
        assert_eq!(e.methods, vec![Method::Hdmdc]);
        assert_eq!(e.train_snapshots, 300);
        assert_eq!(e.predict_steps, vec![50, 100]);
        assert_eq!(e.rank, RankSpec::Energy(0.999));
        let DataSource::Simulate(sim) = &e.source else { panic!() };
        assert_eq!(sim.seed, 7);
        assert_eq!(sim.arrival_model, ArrivalModel::Deterministic);
        assert_eq!(sim.plan.cycle_seconds(), 60);
        assert_eq!(c.sweep.embeddings, vec![1, 2]);
        assert_eq!(c.sweep.rank, RankSpec::Energy(0.999));
    }

    #[test]
    fn csv_source_paths_resolve_relative() {
        let c = parse("source = csv\nstates_csv = s.csv\ncontrols_csv = c.csv\n").unwrap();
        assert_eq!(
            c.experiment.source,
            DataSource::Csv {
                states: PathBuf::from("/data/s.csv"),
                controls: PathBuf::from("/data/c.csv")
            }
        );
        assert!(parse("source = csv\nstates_csv = s.csv\n").is_err());
    }

    #[test]
    fn unknown_and_duplicate_keys() {
        assert!(matches!(
            parse("train_snapshot = 3\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse("seed = 1\nseed = 2\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(parse("seed 1\n"), Err(Error::Parse { .. })));
        assert!(parse("arrival_rates = 1,2\n").is_err());
    }

    #[test]
    fn validation_rules() {
        let mut c = parse("train_snapshots = 10\nembedding = 9\n").unwrap().experiment;
        assert!(matches!(c.validate(), Err(Error::Validation(_))));
        c.train_snapshots = 11;
        c.validate().unwrap();
        c.predict_steps.clear();
        assert!(c.validate().is_err());
    }

    #[test]
    fn digest_tracks_settings() {
        let a = parse("").unwrap().experiment;
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.set_seed(99);
        assert_ne!(a.digest(), b.digest());
    }
}
