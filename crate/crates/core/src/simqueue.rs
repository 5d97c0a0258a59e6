//! Point-queue simulator of one signalized intersection with eight turning
//! movements under a fixed-time plan.
//!
//! Every second, each movement receives arrivals `a_t`, discharges
//! `d_t = min(q_t + a_t, s·u_t)` where `s` is its saturation flow and `u_t`
//! its binary signal state, and carries `q_{t+1} = q_t + a_t − d_t` forward.
//! Queues are in vehicles. The trace records the queue at the end of each
//! second next to the signal state during that second.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::metrics::{self, PairedSamples, CC_THRESHOLD, GEH_THRESHOLD};
use crate::snapshots::{ControlSequence, TimeSeries};

pub const N_MOVEMENTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Movement {
    Eb,
    Wb,
    Nb,
    Sb,
    Ebl,
    Wbl,
    Nbl,
    Sbl,
}

impl Movement {
    /// State-vector order.
    pub const ALL: [Movement; N_MOVEMENTS] = [
        Movement::Eb,
        Movement::Wb,
        Movement::Nb,
        Movement::Sb,
        Movement::Ebl,
        Movement::Wbl,
        Movement::Nbl,
        Movement::Sbl,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Movement::Eb => "EB",
            Movement::Wb => "WB",
            Movement::Nb => "NB",
            Movement::Sb => "SB",
            Movement::Ebl => "EBL",
            Movement::Wbl => "WBL",
            Movement::Nbl => "NBL",
            Movement::Sbl => "SBL",
        }
    }
}

impl fmt::Display for Movement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Movement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Movement::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Argument(format!("unknown movement `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phase {
    /// Whole phase, yellow tail included.
    pub duration_seconds: u32,
    pub yellow_seconds: u32,
    pub movements: Vec<Movement>,
}

impl Phase {
    pub fn new(duration_seconds: u32, yellow_seconds: u32, movements: Vec<Movement>) -> Self {
        Self {
            duration_seconds,
            yellow_seconds,
            movements,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.movements.iter().map(|m| m.name()).collect();
        write!(
            f,
            "{}:{}:{}",
            names.join("+"),
            self.duration_seconds,
            self.yellow_seconds
        )
    }
}

impl FromStr for Phase {
    type Err = Error;

    /// `EB+WB:30:3` is a 30 s phase serving EB and WB whose last 3 s are yellow.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Argument(format!(
                "phase `{s}` is not MOVEMENTS:DURATION:YELLOW"
            )));
        }
        let movements = parts[0]
            .split('+')
            .map(str::parse)
            .collect::<Result<Vec<Movement>>>()?;
        let num = |p: &str| {
            p.trim()
                .parse::<u32>()
                .map_err(|_| Error::Argument(format!("bad seconds `{p}` in phase `{s}`")))
        };
        Ok(Phase::new(num(parts[1])?, num(parts[2])?, movements))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalPlan {
    pub phases: Vec<Phase>,
}

impl SignalPlan {
    pub fn new(phases: Vec<Phase>) -> Self {
        Self { phases }
    }

    pub fn cycle_seconds(&self) -> u64 {
        self.phases.iter().map(|p| p.duration_seconds as u64).sum()
    }

    /// Problems with the plan, empty when it is usable.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.phases.is_empty() {
            out.push("signal plan has no phases".to_string());
        }
        for (i, p) in self.phases.iter().enumerate() {
            if p.duration_seconds == 0 {
                out.push(format!("phase {i} has zero duration"));
            }
            if p.yellow_seconds > p.duration_seconds {
                out.push(format!(
                    "phase {i} yellow {} s exceeds its duration {} s",
                    p.yellow_seconds, p.duration_seconds
                ));
            }
            if p.movements.is_empty() {
                out.push(format!("phase {i} serves no movement"));
            }
        }
        for m in Movement::ALL {
            if !self.phases.iter().any(|p| p.movements.contains(&m)) {
                out.push(format!("movement {m} is never served"));
            }
        }
        out
    }
}

impl fmt::Display for SignalPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.phases.iter().map(|p| p.to_string()).collect();
        f.write_str(&parts.join(";"))
    }
}

impl FromStr for SignalPlan {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.split(';')
            .filter(|p| !p.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<Phase>>>()
            .map(SignalPlan::new)
    }
}

/// Binary signal state of every movement at second `t`: 1 during green and
/// the yellow tail of a phase serving it, 0 otherwise.
pub fn signal_state(plan: &SignalPlan, t: u64) -> [u8; N_MOVEMENTS] {
    let mut out = [0u8; N_MOVEMENTS];
    let cycle = plan.cycle_seconds();
    if cycle == 0 {
        return out;
    }
    let mut offset = t % cycle;
    for p in &plan.phases {
        let d = p.duration_seconds as u64;
        if offset < d {
            for m in &p.movements {
                out[m.index()] = 1;
            }
            break;
        }
        offset -= d;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrivalModel {
    /// Rate accumulates each second; whole vehicles are released as the
    /// accumulator crosses integers.
    Deterministic,
    /// Independent Poisson counts drawn from the seeded generator.
    Poisson,
}

impl fmt::Display for ArrivalModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArrivalModel::Deterministic => "deterministic",
            ArrivalModel::Poisson => "poisson",
        })
    }
}

impl FromStr for ArrivalModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "deterministic" => Ok(ArrivalModel::Deterministic),
            "poisson" => Ok(ArrivalModel::Poisson),
            other => Err(Error::Argument(format!("unknown arrival model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntersectionConfig {
    /// vehicles / second, indexed by [`Movement::index`]
    pub arrival_rate: [f64; N_MOVEMENTS],
    pub arrival_model: ArrivalModel,
    /// vehicles / second of green
    pub saturation_flow: [f64; N_MOVEMENTS],
    pub initial_queue: [f64; N_MOVEMENTS],
    pub plan: SignalPlan,
    pub duration_seconds: u64,
    pub warmup_seconds: u64,
    pub seed: u64,
}

impl Default for IntersectionConfig {
    /// Four-phase, 90 s plan (protected lefts before each through pair),
    /// one hour simulated with the first fifteen minutes discarded.
    fn default() -> Self {
        use Movement::*;
        Self {
            arrival_rate: [0.13, 0.11, 0.12, 0.10, 0.05, 0.06, 0.04, 0.05],
            arrival_model: ArrivalModel::Poisson,
            saturation_flow: [0.5; N_MOVEMENTS],
            initial_queue: [0.0; N_MOVEMENTS],
            plan: SignalPlan::new(vec![
                Phase::new(15, 3, vec![Ebl, Wbl]),
                Phase::new(30, 3, vec![Eb, Wb]),
                Phase::new(15, 3, vec![Nbl, Sbl]),
                Phase::new(30, 3, vec![Nb, Sb]),
            ]),
            duration_seconds: 3600,
            warmup_seconds: 900,
            seed: 2021,
        }
    }
}

fn fmt_array(values: &[f64; N_MOVEMENTS]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl IntersectionConfig {
    pub fn validate(&self) -> Result<()> {
        let mut v = self.plan.violations();
        for m in Movement::ALL {
            let i = m.index();
            let rate = self.arrival_rate[i];
            if !(rate.is_finite() && rate >= 0.0) {
                v.push(format!("arrival rate of {m} must be finite and >= 0, got {rate}"));
            }
            let sat = self.saturation_flow[i];
            if !(sat.is_finite() && sat > 0.0) {
                v.push(format!("saturation flow of {m} must be finite and > 0, got {sat}"));
            }
            let q0 = self.initial_queue[i];
            if !(q0.is_finite() && q0 >= 0.0) {
                v.push(format!("initial queue of {m} must be finite and >= 0, got {q0}"));
            }
        }
        if self.duration_seconds <= self.warmup_seconds {
            v.push(format!(
                "duration {} s must exceed warmup {} s",
                self.duration_seconds, self.warmup_seconds
            ));
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }

    /// One `key = value` line per field in a fixed order.
    pub fn canonical_text(&self) -> String {
        format!(
            "arrival_model = {}\narrival_rates = {}\nsaturation_flows = {}\ninitial_queues = {}\nsignal_plan = {}\nduration_seconds = {}\nwarmup_seconds = {}\nseed = {}\n",
            self.arrival_model,
            fmt_array(&self.arrival_rate),
            fmt_array(&self.saturation_flow),
            fmt_array(&self.initial_queue),
            self.plan,
            self.duration_seconds,
            self.warmup_seconds,
            self.seed,
        )
    }

    pub fn digest(&self) -> String {
        sha256_hex(self.canonical_text().as_bytes())
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub queues: TimeSeries,
    pub controls: ControlSequence,
    /// Vehicles arriving during each recorded second.
    pub arrivals: DMatrix<f64>,
    /// Vehicles discharged during each recorded second.
    pub departures: DMatrix<f64>,
    /// Queues at the start of the first recorded second.
    pub entry_queues: DVector<f64>,
    /// Absolute second of column 0.
    pub start_second: u64,
    pub seed_used: u64,
    pub config_digest: String,
}

impl SimTrace {
    pub fn n_steps(&self) -> usize {
        self.queues.n_steps()
    }

    /// Total arrivals per movement over the recorded window.
    pub fn volumes(&self) -> [f64; N_MOVEMENTS] {
        let mut out = [0.0; N_MOVEMENTS];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.arrivals.row(i).iter().sum();
        }
        out
    }
}

pub fn simulate(config: &IntersectionConfig) -> Result<SimTrace> {
    config.validate()?;
    let recorded = (config.duration_seconds - config.warmup_seconds) as usize;
    let mut queues = DMatrix::zeros(N_MOVEMENTS, recorded);
    let mut controls = DMatrix::zeros(N_MOVEMENTS, recorded);
    let mut arrivals = DMatrix::zeros(N_MOVEMENTS, recorded);
    let mut departures = DMatrix::zeros(N_MOVEMENTS, recorded);
    let mut entry_queues = DVector::zeros(N_MOVEMENTS);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let poisson: Vec<Option<Poisson<f64>>> = config
        .arrival_rate
        .iter()
        .map(|&r| {
            if config.arrival_model == ArrivalModel::Poisson && r > 0.0 {
                Poisson::new(r).ok()
            } else {
                None
            }
        })
        .collect();

    let mut q = config.initial_queue;
    let mut carry = [0.0f64; N_MOVEMENTS];
    for t in 0..config.duration_seconds {
        let col = t.checked_sub(config.warmup_seconds).map(|c| c as usize);
        if col == Some(0) {
            entry_queues.copy_from_slice(&q);
        }
        let u = signal_state(&config.plan, t);
        for i in 0..N_MOVEMENTS {
            let a = match config.arrival_model {
                ArrivalModel::Deterministic => {
                    carry[i] += config.arrival_rate[i];
                    let whole = carry[i].floor();
                    carry[i] -= whole;
                    whole
                }
                ArrivalModel::Poisson => match &poisson[i] {
                    Some(d) => d.sample(&mut rng),
                    None => 0.0,
                },
            };
            let available = q[i] + a;
            let d = available.min(config.saturation_flow[i] * u[i] as f64);
            q[i] = available - d;
            if let Some(c) = col {
                queues[(i, c)] = q[i];
                controls[(i, c)] = u[i] as f64;
                arrivals[(i, c)] = a;
                departures[(i, c)] = d;
            }
        }
    }

    Ok(SimTrace {
        queues: TimeSeries::new(queues)?,
        controls: ControlSequence::new(controls)?,
        arrivals,
        departures,
        entry_queues,
        start_second: config.warmup_seconds,
        seed_used: config.seed,
        config_digest: config.digest(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub edge_geh: Vec<f64>,
    pub edge_pass: Vec<bool>,
    /// GEH of the summed volumes over all edges.
    pub total_geh: f64,
    /// `None` with a single edge.
    pub correlation: Option<f64>,
    pub pass: bool,
}

/// Both statistics inside their acceptance thresholds.
pub fn calibration_passes(geh: f64, cc: f64) -> bool {
    geh < GEH_THRESHOLD && cc >= CC_THRESHOLD
}

/// Compares simulated edge volumes with reference (observed) ones.
pub fn calibration_check(simulated: &[f64], reference: &[f64]) -> Result<CalibrationReport> {
    if simulated.len() != reference.len() {
        return Err(Error::Mismatch(format!(
            "{} simulated edges vs {} reference edges",
            simulated.len(),
            reference.len()
        )));
    }
    if simulated.is_empty() {
        return Err(Error::Argument("calibration needs at least one edge".into()));
    }
    let edge_geh = reference
        .iter()
        .zip(simulated)
        .map(|(&o, &s)| metrics::geh(o, s))
        .collect::<Result<Vec<f64>>>()?;
    let edge_pass: Vec<bool> = edge_geh.iter().map(|&g| g < GEH_THRESHOLD).collect();
    let total_geh = metrics::geh(reference.iter().sum(), simulated.iter().sum())?;
    let correlation = if simulated.len() >= 2 {
        Some(metrics::pearson_cc(&PairedSamples::new(
            reference.to_vec(),
            simulated.to_vec(),
        )?)?)
    } else {
        None
    };
    let pass = edge_pass.iter().all(|&p| p)
        && total_geh < GEH_THRESHOLD
        && correlation.is_none_or(|c| c >= CC_THRESHOLD);
    Ok(CalibrationReport {
        edge_geh,
        edge_pass,
        total_geh,
        correlation,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Movement::*;

    fn single_phase_plan() -> SignalPlan {
        SignalPlan::new(vec![
            Phase::new(30, 3, vec![Eb]),
            Phase::new(30, 3, vec![Wb, Nb, Sb, Ebl, Wbl, Nbl, Sbl]),
        ])
    }

    fn quiet(plan: SignalPlan) -> IntersectionConfig {
        IntersectionConfig {
            arrival_rate: [0.0; N_MOVEMENTS],
            arrival_model: ArrivalModel::Deterministic,
            saturation_flow: [1.0; N_MOVEMENTS],
            initial_queue: [0.0; N_MOVEMENTS],
            plan,
            duration_seconds: 10,
            warmup_seconds: 0,
            seed: 1,
        }
    }

    #[test]
    fn signal_state_phases_and_period() {
        let plan = single_phase_plan();
        assert_eq!(signal_state(&plan, 15)[Eb.index()], 1);
        assert_eq!(signal_state(&plan, 45)[Eb.index()], 0);
        assert_eq!(signal_state(&plan, 0), signal_state(&plan, plan.cycle_seconds()));
        // yellow tail of the first phase
        assert_eq!(signal_state(&plan, 29)[Eb.index()], 1);
        assert_eq!(signal_state(&plan, 30)[Eb.index()], 0);
    }

    #[test]
    fn plan_text_round_trip() {
        let plan = IntersectionConfig::default().plan;
        let text = plan.to_string();
        assert_eq!(text, "EBL+WBL:15:3;EB+WB:30:3;NBL+SBL:15:3;NB+SB:30:3");
        assert_eq!(text.parse::<SignalPlan>().unwrap(), plan);
        assert!("EB:10".parse::<Phase>().is_err());
        assert!("XX:10:0".parse::<Phase>().is_err());
    }

    #[test]
    fn empty_network_stays_empty() {
        let t = simulate(&quiet(single_phase_plan())).unwrap();
        assert!(t.queues.values().iter().all(|&q| q == 0.0));
    }

    #[test]
    fn red_movement_accumulates() {
        let mut c = quiet(SignalPlan::new(vec![
            Phase::new(60, 0, vec![Wb, Nb, Sb, Ebl, Wbl, Nbl, Sbl]),
            Phase::new(1, 0, vec![Eb]),
        ]));
        c.arrival_rate[Eb.index()] = 1.0;
        let t = simulate(&c).unwrap();
        let row: Vec<f64> = t.queues.values().row(Eb.index()).iter().copied().collect();
        assert_eq!(row, (1..=10).map(|k| k as f64).collect::<Vec<_>>());
    }

    #[test]
    fn discharge_at_saturation() {
        let mut c = quiet(SignalPlan::new(vec![Phase::new(60, 3, Movement::ALL.to_vec())]));
        c.initial_queue[Nb.index()] = 10.0;
        c.saturation_flow[Nb.index()] = 2.0;
        let t = simulate(&c).unwrap();
        let row: Vec<f64> = t.queues.values().row(Nb.index()).iter().copied().collect();
        assert_eq!(row, vec![8.0, 6.0, 4.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn fractional_rates_accumulate() {
        let mut c = quiet(SignalPlan::new(vec![
            Phase::new(60, 0, vec![Wb, Nb, Sb, Ebl, Wbl, Nbl, Sbl]),
            Phase::new(1, 0, vec![Eb]),
        ]));
        c.arrival_rate[Eb.index()] = 0.25;
        let t = simulate(&c).unwrap();
        let row: Vec<f64> = t.queues.values().row(Eb.index()).iter().copied().collect();
        assert_eq!(row, vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0]);
    }

    #[test]
    fn validation_lists_everything() {
        let mut c = quiet(SignalPlan::new(vec![Phase::new(10, 20, vec![Eb])]));
        c.arrival_rate[0] = -1.0;
        c.saturation_flow[1] = 0.0;
        c.warmup_seconds = 10;
        let Err(Error::Validation(v)) = simulate(&c) else {
            panic!("expected validation error")
        };
        // yellow, 7 unserved movements, rate, saturation, warmup
        assert_eq!(v.len(), 11, "{v:?}");
    }

    #[test]
    fn warmup_is_discarded() {
        let mut c = IntersectionConfig::default();
        c.duration_seconds = 200;
        c.warmup_seconds = 50;
        let t = simulate(&c).unwrap();
        assert_eq!(t.n_steps(), 150);
        assert_eq!(t.start_second, 50);
        for k in 0..150 {
            let u = signal_state(&c.plan, 50 + k as u64);
            for i in 0..N_MOVEMENTS {
                assert_eq!(t.controls.values()[(i, k)], u[i] as f64);
            }
        }
    }

    #[test]
    fn poisson_traces_are_seed_determined() {
        let c = IntersectionConfig::default();
        let a = simulate(&c).unwrap();
        let b = simulate(&c).unwrap();
        assert_eq!(a, b);
        let mut c2 = c.clone();
        c2.seed += 1;
        assert_ne!(simulate(&c2).unwrap().queues, a.queues);
        assert_ne!(c.digest(), c2.digest());
    }

    #[test]
    fn calibration_examples() {
        let v = [120.0, 80.0, 95.0, 40.0];
        let r = calibration_check(&v, &v).unwrap();
        assert!(r.edge_geh.iter().all(|&g| g == 0.0));
        assert!((r.correlation.unwrap() - 1.0).abs() < 1e-15);
        assert!(r.pass);

        assert!(calibration_passes(0.78, 0.96));
        assert!(!calibration_passes(4.0, 0.96));
        assert!(!calibration_passes(0.78, 0.84));

        let r = calibration_check(&[40.0], &[100.0]).unwrap();
        assert!((r.edge_geh[0] - (7200.0f64 / 140.0).sqrt()).abs() < 1e-12);
        assert!((r.edge_geh[0] - 7.17).abs() < 0.01);
        assert!(!r.edge_pass[0] && !r.pass);
        assert!(r.correlation.is_none());
    }
}
