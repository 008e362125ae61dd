//! Seeded Monte Carlo experiments: risk estimation against data, ideal and
//! adversarial oracles, the lower-bound game, phase and risk sweeps, and
//! CSV / JSON-lines output.
//!
//! Every trial draws from its own RNG stream keyed by `(seed, trial, role)`,
//! so results do not depend on the number of worker threads.

use std::fmt::Write as _;

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{phase_classify, risk_lower_bound, sup_distinguishable_numeric, PhasePoint, PhaseProblem, Regime};
use crate::detectors::{run, run_on_data, Detector, DetectorOptions, Setting, Verdict};
use crate::error::{invalid, Error, Result};
use crate::models::{sample_under, McConfig, ModelKind, ProblemInstance, Truth};
use crate::oracle::{AdversaryMode, AdversaryState, Commitment, DataOracle, IdealOracle, OracleSession};
use crate::rng::{stream, Role};
use crate::structure_classes::{enumerate_class, sample_uniform, ClassKind, IndexSet, StructureClass, DEFAULT_ENUMERATION_CAP};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    Data,
    Ideal,
    Adversarial,
}

impl OracleMode {
    pub fn name(self) -> &'static str {
        match self {
            OracleMode::Data => "data",
            OracleMode::Ideal => "ideal",
            OracleMode::Adversarial => "adversarial",
        }
    }
}

impl std::str::FromStr for OracleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "data" => Ok(OracleMode::Data),
            "ideal" => Ok(OracleMode::Ideal),
            "adversarial" | "adversary" => Ok(OracleMode::Adversarial),
            _ => invalid(format!("unknown oracle mode `{s}` (expected data, ideal or adversarial)")),
        }
    }
}

/// Model and structure class of an experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub model: ModelKind,
    pub class: ClassKind,
    pub d: usize,
    pub s_star: usize,
    pub beta_star: f64,
    pub alpha: f64,
}

impl ProblemSpec {
    pub fn instance(&self) -> Result<ProblemInstance> {
        let class = StructureClass::new(self.class, self.d, self.s_star)?;
        ProblemInstance::new(self.model, class, self.beta_star, self.alpha)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub setting: Setting,
    pub oracle_mode: OracleMode,
    pub n: usize,
    pub xi: f64,
    /// Trials per hypothesis.
    pub trials: usize,
    pub seed: u64,
    pub c_const: f64,
    pub cap: u64,
    pub mc_samples: usize,
    /// Keep only the first `budget` scheduled queries.
    #[serde(default)]
    pub budget: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(problem: ProblemSpec, setting: Setting, oracle_mode: OracleMode, n: usize, xi: f64, trials: usize, seed: u64) -> Self {
        ExperimentConfig {
            problem,
            setting,
            oracle_mode,
            n,
            xi,
            trials,
            seed,
            c_const: DetectorOptions::default().c_const,
            cap: DEFAULT_ENUMERATION_CAP,
            mc_samples: McConfig::default().samples,
            budget: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return invalid("trials must be at least 1");
        }
        if self.n == 0 {
            return invalid("n must be at least 1");
        }
        Ok(())
    }

    pub fn detector(&self) -> Result<Detector> {
        let opts = DetectorOptions {
            c_const: self.c_const,
            cap: self.cap,
        };
        let det = Detector::new(self.setting, &self.problem.instance()?, self.n, opts)?;
        Ok(match self.budget {
            Some(t) => det.truncated(t),
            None => det,
        })
    }

    pub fn mc(&self) -> McConfig {
        McConfig {
            samples: self.mc_samples,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub type1_hat: f64,
    pub type2_hat: f64,
    pub risk_hat: f64,
    /// 95% Wald half-width for `risk_hat`.
    pub ci_halfwidth: f64,
    pub trials: usize,
}

impl RiskEstimate {
    fn from_counts(false_rejects: usize, misses: usize, trials: usize) -> Self {
        let t = trials as f64;
        let (p1, p2) = (false_rejects as f64 / t, misses as f64 / t);
        let var = p1 * (1.0 - p1) / t + p2 * (1.0 - p2) / t;
        RiskEstimate {
            type1_hat: p1,
            type2_hat: p2,
            risk_hat: p1 + p2,
            ci_halfwidth: 1.96 * var.sqrt(),
            trials,
        }
    }
}

/// Run `f(0..count)` on `workers` threads; results come back in index order.
pub fn parallel_map<T, F>(count: usize, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    if workers <= 1 {
        return (0..count).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| (0..count).into_par_iter().map(f).collect())
}

struct Trial<'a> {
    cfg: &'a ExperimentConfig,
    inst: &'a ProblemInstance,
    det: &'a Detector,
}

impl Trial<'_> {
    /// Trial `k < trials` is a null trial; the rest are alternative trials.
    fn planted(&self, k: usize) -> Option<IndexSet> {
        (k >= self.cfg.trials).then(|| sample_uniform(self.inst.class(), &mut stream(self.cfg.seed, k as u64, Role::Planted)))
    }

    fn verdict(&self, k: usize) -> Result<Verdict> {
        let planted = self.planted(k);
        let truth = match &planted {
            Some(s) => Truth::Planted(s),
            None => Truth::Null,
        };
        let mc = self.cfg.mc();
        match self.cfg.oracle_mode {
            OracleMode::Data => {
                let data = sample_under(self.inst, truth, self.cfg.n, &mut stream(self.cfg.seed, k as u64, Role::Data))?;
                run_on_data(self.det, &data)
            }
            OracleMode::Ideal => run(self.det, &mut IdealOracle::new(self.inst, truth, mc)),
            OracleMode::Adversarial => {
                let mut state = self.adversary(planted, k)?;
                run(self.det, &mut state)
            }
        }
    }

    fn adversary(&self, planted: Option<IndexSet>, k: usize) -> Result<AdversaryState> {
        let mode = match planted {
            Some(s) => AdversaryMode::Alternative(s),
            None => AdversaryMode::NullWorstCase,
        };
        let ocfg = self.det.oracle_config(self.cfg.xi)?;
        let sched = self.det.schedule();
        AdversaryState::new(
            self.inst.clone(),
            ocfg,
            sched.len(),
            mode,
            Some(sched),
            self.cfg.cap,
            self.cfg.mc(),
            stream(self.cfg.seed, k as u64, Role::Commitment),
        )
    }
}

/// `trials` null and `trials` alternative trials, a fresh uniform planted set
/// for each alternative trial.
pub fn estimate_risk(cfg: &ExperimentConfig, workers: usize) -> Result<RiskEstimate> {
    cfg.validate()?;
    let inst = cfg.problem.instance()?;
    let det = cfg.detector()?;
    let trial = Trial {
        cfg,
        inst: &inst,
        det: &det,
    };
    let rejects = parallel_map(2 * cfg.trials, workers, |k| Ok(trial.verdict(k)?.rejects()))?;
    let false_rejects = rejects[..cfg.trials].iter().filter(|&&r| r).count();
    let misses = rejects[cfg.trials..].iter().filter(|&&r| !r).count();
    Ok(RiskEstimate::from_counts(false_rejects, misses, cfg.trials))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ValidityRate {
    pub replications: usize,
    /// Replications where some response left its tolerance band.
    pub violations: usize,
}

impl ValidityRate {
    pub fn violation_rate(&self) -> f64 {
        self.violations as f64 / self.replications as f64
    }
}

/// Replay the detector against the data oracle and check each transcript
/// against `τ_q` with the detector's capacity. Even replications are null,
/// odd ones planted.
pub fn data_oracle_validity(cfg: &ExperimentConfig, replications: usize, workers: usize) -> Result<ValidityRate> {
    let inst = cfg.problem.instance()?;
    let det = cfg.detector()?;
    let ocfg = det.oracle_config(cfg.xi)?;
    let mc = cfg.mc();
    let flags = parallel_map(replications, workers, |r| {
        let planted = (r % 2 == 1).then(|| sample_uniform(inst.class(), &mut stream(cfg.seed, r as u64, Role::Planted)));
        let truth = planted.as_ref().map_or(Truth::Null, Truth::Planted);
        let data = sample_under(&inst, truth, cfg.n, &mut stream(cfg.seed, r as u64, Role::Data))?;
        let mut oracle = DataOracle::new(&data);
        for q in det.schedule() {
            oracle.respond(q)?;
        }
        Ok(!crate::oracle::validate_transcript(oracle.transcript(), &inst, truth, &ocfg, &mc)?)
    })?;
    Ok(ValidityRate {
        replications,
        violations: flags.into_iter().filter(|&v| v).count(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Episode {
    pub episode: usize,
    pub batch: usize,
    pub hypothesis: &'static str,
    pub planted: Option<Vec<usize>>,
    pub commitment: Option<Commitment>,
    pub rejected: bool,
    pub statistic: f64,
    pub digest: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BatchRisk {
    pub batch: usize,
    pub type1_hat: f64,
    pub type2_hat: f64,
    pub risk_hat: f64,
    /// One binomial standard error of `risk_hat`.
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GameResult {
    pub budget: usize,
    pub sup_cq: String,
    pub class_size: String,
    pub xi: f64,
    pub bound: f64,
    /// Risk with the commitment distribution and the alternative prior
    /// summed exactly rather than sampled.
    pub exact_risk: f64,
    pub realized_risk: f64,
    pub batches: Vec<BatchRisk>,
    #[serde(skip)]
    pub episodes: Vec<Episode>,
}

/// Play the detector against the worst-case oracle: `batches` batches of
/// `trials` null and `trials` alternative episodes each.
pub fn adversary_game(cfg: &ExperimentConfig, batches: usize, workers: usize) -> Result<GameResult> {
    cfg.validate()?;
    if batches == 0 {
        return invalid("batches must be at least 1");
    }
    let inst = cfg.problem.instance()?;
    let det = cfg.detector()?;
    let class = inst.class();
    let all = enumerate_class(class, cfg.cap)?;
    let t = det.schedule().len();
    let sup = sup_distinguishable_numeric(class, &inst, cfg.n, cfg.xi)?;
    let size = class.cardinality();
    let bound = risk_lower_bound(t as u64, &sup, &size, cfg.xi)?;

    let exact_risk = exact_game_risk(cfg, &inst, &det, &all)?;

    let per_batch = 2 * cfg.trials;
    let trial = Trial {
        cfg,
        inst: &inst,
        det: &det,
    };
    let episodes = parallel_map(batches * per_batch, workers, |e| {
        let (batch, k) = (e / per_batch, e % per_batch);
        // Stream index: batches never share RNG streams.
        let key = batch * per_batch + k;
        let planted = if k >= cfg.trials {
            Some(sample_uniform(class, &mut stream(cfg.seed, key as u64, Role::Planted)))
        } else {
            None
        };
        let mut state = trial.adversary(planted.clone(), key)?;
        let v = run(&det, &mut state)?;
        Ok(Episode {
            episode: e,
            batch,
            hypothesis: if planted.is_some() { "alternative" } else { "null" },
            planted: planted.map(|s| s.indices().to_vec()),
            commitment: state.committed().cloned(),
            rejected: v.rejects(),
            statistic: v.statistic,
            digest: state.transcript().digest(),
        })
    })?;

    let mut batch_risks = Vec::with_capacity(batches);
    for b in 0..batches {
        let eps = &episodes[b * per_batch..(b + 1) * per_batch];
        let fr = eps.iter().filter(|e| e.planted.is_none() && e.rejected).count();
        let ms = eps.iter().filter(|e| e.planted.is_some() && !e.rejected).count();
        let r = RiskEstimate::from_counts(fr, ms, cfg.trials);
        batch_risks.push(BatchRisk {
            batch: b,
            type1_hat: r.type1_hat,
            type2_hat: r.type2_hat,
            risk_hat: r.risk_hat,
            std_error: r.ci_halfwidth / 1.96,
        });
    }
    let realized = batch_risks.iter().map(|b| b.risk_hat).sum::<f64>() / batches as f64;
    Ok(GameResult {
        budget: t,
        sup_cq: sup.to_string(),
        class_size: size.to_string(),
        xi: cfg.xi,
        bound,
        exact_risk,
        realized_risk: realized,
        batches: batch_risks,
        episodes,
    })
}

fn exact_game_risk(cfg: &ExperimentConfig, inst: &ProblemInstance, det: &Detector, all: &[IndexSet]) -> Result<f64> {
    let ocfg = det.oracle_config(cfg.xi)?;
    let mc = cfg.mc();
    let sched = det.schedule();
    let probe = AdversaryState::new(
        inst.clone(),
        ocfg,
        sched.len(),
        AdversaryMode::NullWorstCase,
        Some(sched),
        cfg.cap,
        mc,
        stream(cfg.seed, 0, Role::Commitment),
    )?;
    let plan = probe.plan().expect("declared schedules carry a plan").clone();
    let mut type1 = 0.0;
    for (commitment, w) in &plan.atoms {
        let mut state = AdversaryState::with_commitment(inst.clone(), ocfg, sched, commitment.clone(), mc);
        if run(det, &mut state)?.rejects() {
            type1 += w;
        }
    }
    let mut misses = 0usize;
    for s in all {
        if !run(det, &mut IdealOracle::new(inst, Truth::Planted(s), mc))?.rejects() {
            misses += 1;
        }
    }
    Ok(type1 + misses as f64 / all.len() as f64)
}

/// JSON lines: the resolved config, one line per episode, then the summary.
pub fn game_jsonl(cfg: &ExperimentConfig, result: &GameResult) -> String {
    let mut out = String::new();
    let head = serde_json::json!({ "record": "config", "config": cfg });
    writeln!(out, "{head}").unwrap();
    for e in &result.episodes {
        let mut v = serde_json::to_value(e).expect("episodes serialize");
        v["record"] = "episode".into();
        writeln!(out, "{v}").unwrap();
    }
    let mut v = serde_json::to_value(result).expect("results serialize");
    v["record"] = "summary".into();
    writeln!(out, "{v}").unwrap();
    out
}

pub const RISK_CSV_HEADER: &str = "setting,d,s_star,beta_star,alpha,n,xi,oracle_mode,trials,seed,type1_hat,type2_hat,risk_hat,ci_halfwidth";

pub fn risk_csv(rows: &[(ExperimentConfig, RiskEstimate)]) -> String {
    let mut out = String::from(RISK_CSV_HEADER);
    out.push('\n');
    for (c, r) in rows {
        let p = &c.problem;
        writeln!(
            out,
            "{},{},{},{:?},{:?},{},{:?},{},{},{},{:?},{:?},{:?},{:?}",
            c.setting,
            p.d,
            p.s_star,
            p.beta_star,
            p.alpha,
            c.n,
            c.xi,
            c.oracle_mode.name(),
            c.trials,
            c.seed,
            r.type1_hat,
            r.type2_hat,
            r.risk_hat,
            r.ci_halfwidth
        )
        .unwrap();
    }
    out
}

/// Axis of a phase grid: `res` evenly spaced values on `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub res: usize,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        if self.res == 1 {
            return vec![self.lo];
        }
        (0..self.res)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (self.res - 1) as f64)
            .collect()
    }
}

pub const MAX_PHASE_RESOLUTION: usize = 1001;

/// `p_s` slices crossed with a `(p_β, p_n)` grid at fixed `p_α`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub p_s: Vec<f64>,
    pub p_alpha: f64,
    pub p_beta: Axis,
    pub p_n: Axis,
}

impl PhaseGrid {
    pub fn new(p_s: Vec<f64>, p_alpha: f64, res: usize) -> Self {
        PhaseGrid {
            p_s,
            p_alpha,
            p_beta: Axis { lo: 0.0, hi: 1.0, res },
            p_n: Axis { lo: 0.0, hi: 2.0, res },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhaseRow {
    pub problem: PhaseProblem,
    pub point: PhasePoint,
    pub regime: Regime,
}

pub fn sweep_phase_diagram(grid: &PhaseGrid, problem: PhaseProblem) -> Result<Vec<PhaseRow>> {
    for axis in [grid.p_beta, grid.p_n] {
        if axis.res == 0 || axis.res > MAX_PHASE_RESOLUTION {
            return Err(Error::CapExceeded {
                what: "phase grid axis".into(),
                size: axis.res.to_string(),
                cap: MAX_PHASE_RESOLUTION as u64,
            });
        }
    }
    let slices: Vec<f64> = match problem {
        PhaseProblem::MatchingSm => vec![0.5],
        _ => grid.p_s.clone(),
    };
    if slices.is_empty() {
        return invalid("at least one p_s slice is required");
    }
    let mut rows = Vec::new();
    for &p_s in &slices {
        for p_n in grid.p_n.values() {
            for p_beta in grid.p_beta.values() {
                let point = PhasePoint::new(p_s, p_beta, p_n, grid.p_alpha)?;
                rows.push(PhaseRow {
                    problem,
                    point,
                    regime: phase_classify(&point, problem)?,
                });
            }
        }
    }
    Ok(rows)
}

/// Pairs of grid points where a smaller `p_β` (stronger signal) is ranked below
/// a larger one at the same `(p_s, p_n, p_α)`. Boundary points are skipped.
pub fn phase_monotonicity_violations(rows: &[PhaseRow]) -> Vec<(PhaseRow, PhaseRow)> {
    let mut bad = Vec::new();
    for a in rows {
        for b in rows {
            let same = a.point.p_s == b.point.p_s && a.point.p_n == b.point.p_n && a.point.p_alpha == b.point.p_alpha;
            if same && b.point.p_beta < a.point.p_beta {
                if let (Some(ra), Some(rb)) = (a.regime.rank(), b.regime.rank()) {
                    if rb < ra {
                        bad.push((*a, *b));
                    }
                }
            }
        }
    }
    bad
}

pub const PHASE_CSV_HEADER: &str = "problem,p_s,p_beta,p_n,p_alpha,regime";

pub fn phase_csv(rows: &[PhaseRow]) -> String {
    let mut out = String::from(PHASE_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let p = r.point;
        writeln!(
            out,
            "{},{:?},{:?},{:?},{:?},{}",
            r.problem, p.p_s, p.p_beta, p.p_n, p.p_alpha, r.regime
        )
        .unwrap();
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    BetaStar,
    Alpha,
    N,
}

impl std::str::FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "beta" | "beta_star" => Ok(SweepParameter::BetaStar),
            "alpha" => Ok(SweepParameter::Alpha),
            "n" => Ok(SweepParameter::N),
            _ => invalid(format!("unknown sweep parameter `{s}` (expected beta, alpha or n)")),
        }
    }
}

/// Risk along a one-dimensional slice through the base configuration.
pub fn sweep_empirical_boundary(
    base: &ExperimentConfig,
    parameter: SweepParameter,
    values: &[f64],
    workers: usize,
) -> Result<Vec<(ExperimentConfig, RiskEstimate)>> {
    values
        .iter()
        .map(|&v| {
            let mut cfg = base.clone();
            match parameter {
                SweepParameter::BetaStar => cfg.problem.beta_star = v,
                SweepParameter::Alpha => cfg.problem.alpha = v,
                SweepParameter::N => {
                    if !(v >= 1.0 && v.fract() == 0.0) {
                        return invalid(format!("n must be a positive integer (got {v})"));
                    }
                    cfg.n = v as usize
                }
            }
            let r = estimate_risk(&cfg, workers)?;
            Ok((cfg, r))
        })
        .collect()
}

/// `(|C|, sup|C(q)|)` as big integers, for reporting.
pub fn class_and_sup(inst: &ProblemInstance, n: usize, xi: f64) -> Result<(BigUint, BigUint)> {
    Ok((inst.class().cardinality(), sup_distinguishable_numeric(inst.class(), inst, n, xi)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sparse(d: usize, s: usize, beta: f64, alpha: f64) -> ProblemSpec {
        ProblemSpec {
            model: ModelKind::ShiftedMean,
            class: ClassKind::SparseSet,
            d,
            s_star: s,
            beta_star: beta,
            alpha,
        }
    }

    #[test]
    fn trivial_detectors_have_unit_risk() {
        for mode in [OracleMode::Data, OracleMode::Ideal, OracleMode::Adversarial] {
            for setting in [Setting::AcceptAll, Setting::RejectAll] {
                let cfg = ExperimentConfig::new(sparse(6, 2, 1.0, 1.0), setting, mode, 20, 0.05, 13, 4);
                let r = estimate_risk(&cfg, 1).unwrap();
                assert_eq!(r.risk_hat, 1.0, "{setting} {mode:?}");
            }
        }
    }

    #[test]
    fn ideal_oracle_zero_risk_at_margin_point() {
        let cfg = ExperimentConfig::new(sparse(20, 2, 0.8, 0.5), Setting::SM2, OracleMode::Ideal, 2000, 0.05, 25, 1);
        let r = estimate_risk(&cfg, 1).unwrap();
        assert_eq!(r.risk_hat, 0.0);
        assert_eq!(r.ci_halfwidth, 0.0);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let cfg = ExperimentConfig::new(sparse(10, 2, 0.8, 0.6), Setting::SM2, OracleMode::Data, 200, 0.05, 40, 9);
        let a = estimate_risk(&cfg, 1).unwrap();
        let b = estimate_risk(&cfg, 3).unwrap();
        assert_eq!(a, b);
        let game = ExperimentConfig {
            oracle_mode: OracleMode::Adversarial,
            ..cfg.clone()
        };
        let g1 = adversary_game(&game, 2, 1).unwrap();
        let g3 = adversary_game(&game, 2, 4).unwrap();
        assert_eq!(game_jsonl(&game, &g1), game_jsonl(&game, &g3));
    }

    #[test]
    fn game_respects_bound() {
        for t in [0usize, 1, 2, 4] {
            let mut cfg = ExperimentConfig::new(sparse(8, 1, 1.0, 1.0), Setting::SM2, OracleMode::Adversarial, 100, 0.05, 200, 3);
            cfg.budget = Some(t);
            assert_eq!(cfg.detector().unwrap().schedule().len(), t);
            let g = adversary_game(&cfg, 2, 1).unwrap();
            assert_eq!(g.budget, t);
            assert!(g.exact_risk >= g.bound - 1e-12, "T={t}: {} < {}", g.exact_risk, g.bound);
            for b in &g.batches {
                assert!(
                    b.risk_hat >= g.bound - 3.0 * b.std_error - 1e-12,
                    "T={t}: batch {b:?} vs {}",
                    g.bound
                );
            }
        }
    }

    #[test]
    fn game_jsonl_layout() {
        let cfg = ExperimentConfig::new(sparse(8, 1, 1.0, 1.0), Setting::SM2, OracleMode::Adversarial, 100, 0.05, 3, 3);
        let g = adversary_game(&cfg, 2, 1).unwrap();
        let text = game_jsonl(&cfg, &g);
        let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines.len(), 1 + 12 + 1);
        assert_eq!(lines[0]["record"], "config");
        assert_eq!(lines[0]["config"]["seed"], 3);
        assert_eq!(lines[1]["record"], "episode");
        assert_eq!(lines[1]["digest"].as_str().unwrap().len(), 64);
        assert_eq!(lines[13]["record"], "summary");
        assert!(lines[13]["bound"].is_number());
    }

    #[test]
    fn alternative_adversary_matches_ideal_oracle() {
        let cfg = ExperimentConfig::new(sparse(8, 2, 0.9, 0.7), Setting::SM2, OracleMode::Adversarial, 300, 0.05, 1, 0);
        let inst = cfg.problem.instance().unwrap();
        let det = cfg.detector().unwrap();
        let s = IndexSet::new(8, vec![3, 6]).unwrap();
        let trial = Trial {
            cfg: &cfg,
            inst: &inst,
            det: &det,
        };
        let mut adv = trial.adversary(Some(s.clone()), 0).unwrap();
        let mut ideal = IdealOracle::new(&inst, Truth::Planted(&s), cfg.mc());
        let a = run(&det, &mut adv).unwrap();
        let b = run(&det, &mut ideal).unwrap();
        assert_eq!(a, b);
        let resp_a: Vec<u64> = adv.transcript().responses().map(f64::to_bits).collect();
        let resp_b: Vec<u64> = ideal.transcript().responses().map(f64::to_bits).collect();
        assert_eq!(resp_a, resp_b);
    }

    #[test]
    fn risk_csv_schema() {
        let cfg = ExperimentConfig::new(sparse(6, 2, 1.0, 1.0), Setting::SM2, OracleMode::Data, 10, 0.05, 1, 7);
        let r = estimate_risk(&cfg, 1).unwrap();
        let csv = risk_csv(&[(cfg, r)]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], RISK_CSV_HEADER);
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1].split(',').count(), RISK_CSV_HEADER.split(',').count());
        assert!(lines[1].starts_with("SM2,6,2,1.0,1.0,10,0.05,data,1,7,"));
    }

    #[test]
    fn phase_sweeps() {
        let grid = PhaseGrid::new(vec![0.25, 0.5, 0.75], 0.0, 51);
        let rows = sweep_phase_diagram(&grid, PhaseProblem::SparseSm).unwrap();
        assert_eq!(rows.len(), 3 * 51 * 51);
        // With p_α = 0, A < 0 forces p_n − 2p_β < 0, so the middle region is empty.
        assert!(rows.iter().any(|x| x.regime == Regime::Impossible));
        assert!(rows.iter().any(|x| x.regime == Regime::Tractable));
        assert!(!rows.iter().any(|x| x.regime == Regime::IntractablePossible));
        assert!(phase_monotonicity_violations(&rows).is_empty());
        let mixed = sweep_phase_diagram(
            &PhaseGrid {
                p_alpha: 0.3,
                ..grid.clone()
            },
            PhaseProblem::SparseSm,
        )
        .unwrap();
        for r in [Regime::Impossible, Regime::IntractablePossible, Regime::Tractable] {
            assert!(mixed.iter().any(|x| x.regime == r), "{r} missing");
        }
        assert!(phase_monotonicity_violations(&mixed).is_empty());
        let m = sweep_phase_diagram(&grid, PhaseProblem::MatchingSm).unwrap();
        assert!(m.iter().all(|r| r.point.p_s == 0.5));
        let csv = phase_csv(&m);
        assert!(csv.starts_with(PHASE_CSV_HEADER));
        assert!(csv.lines().nth(1).unwrap().starts_with("matching_sm,0.5,"));
        let big = PhaseGrid::new(vec![0.5], 0.0, MAX_PHASE_RESOLUTION + 1);
        assert!(sweep_phase_diagram(&big, PhaseProblem::Spca).is_err());
    }

    #[test]
    fn empirical_sweep_smoke() {
        let base = ExperimentConfig::new(sparse(10, 2, 0.5, 0.5), Setting::SM2, OracleMode::Data, 200, 0.05, 1, 2);
        let rows = sweep_empirical_boundary(&base, SweepParameter::BetaStar, &[0.2, 0.8, 1.5], 1).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[1].0.problem.beta_star, 0.8);
        assert_eq!(risk_csv(&rows).lines().count(), 4);
    }
}
