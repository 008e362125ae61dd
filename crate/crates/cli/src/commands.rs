use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use sqphase::bounds::{
    chi2_mixture_exact, closed_form_bound_matching, closed_form_bound_sparse, closed_form_bound_spca, lecam_risk_lower_bound,
    risk_lower_bound, BoundParams, PhaseProblem, SparseRegime,
};
use sqphase::detectors::Setting;
use sqphase::harness::{
    adversary_game, class_and_sup, estimate_risk, game_jsonl, phase_csv, risk_csv, sweep_empirical_boundary, sweep_phase_diagram, Axis,
    ExperimentConfig, OracleMode, PhaseGrid, ProblemSpec, SweepParameter,
};
use sqphase::models::{McConfig, ModelKind};
use sqphase::numeric::fmt_sig;
use sqphase::structure_classes::{enumerate_class, overlap_distribution, shell_counts, ClassKind, StructureClass, DEFAULT_ENUMERATION_CAP};
use sqphase::svg::{phase_svg, risk_curves_svg};

use crate::args::{resolve, BoundsArgs, Chi2Args, Command, EnumerateArgs, ExperimentArgs, GameArgs, PhaseArgs, ProblemArgs, RiskArgs};
use crate::CliError;

const SIG: usize = 6;

pub fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Bounds(a) => bounds(resolve(&a, a.config.as_deref())?),
        Command::Phase(a) => phase(resolve(&a, a.config.as_deref())?),
        Command::Risk(a) => {
            let workers = a.workers;
            risk(resolve(&a, a.config.as_deref())?, workers)
        }
        Command::Game(a) => {
            let workers = a.workers;
            game(resolve(&a, a.config.as_deref())?, workers)
        }
        Command::Chi2(a) => chi2(resolve(&a, a.config.as_deref())?),
        Command::Enumerate(a) => enumerate(resolve(&a, a.config.as_deref())?),
    }
}

fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

fn required<T: Copy>(v: Option<T>, flag: &str) -> Result<T, CliError> {
    match v {
        Some(x) => Ok(x),
        None => usage(format!("missing required flag --{flag}")),
    }
}

fn parse<T: std::str::FromStr<Err = sqphase::Error>>(s: &str) -> Result<T, CliError> {
    s.parse().map_err(|e: sqphase::Error| CliError::Usage(e.to_string()))
}

fn problem_spec(p: &ProblemArgs) -> Result<(ProblemSpec, PhaseProblem), CliError> {
    let Some(name) = p.problem.as_deref() else {
        return usage("missing required flag --problem (sparse-sm, matching-sm or spca)");
    };
    let problem: PhaseProblem = parse(name)?;
    let d = required(p.d, "d")?;
    let beta = match (p.beta, p.beta2) {
        (Some(b), None) => b,
        (None, Some(b2)) if b2 >= 0.0 => b2.sqrt(),
        (None, Some(b2)) => return usage(format!("--beta2 must be nonnegative (got {b2})")),
        (Some(_), Some(_)) => return usage("give only one of --beta and --beta2"),
        (None, None) => return usage("missing required flag --beta (or --beta2)"),
    };
    let spec = match problem {
        PhaseProblem::SparseSm => ProblemSpec {
            model: ModelKind::ShiftedMean,
            class: ClassKind::SparseSet,
            d,
            s_star: required(p.s, "s")?,
            beta_star: beta,
            alpha: p.alpha.unwrap_or(1.0),
        },
        PhaseProblem::MatchingSm => {
            let root = (d as f64).sqrt().round() as usize;
            if root * root != d {
                return usage(format!("matching-sm needs d to be a perfect square (got {d})"));
            }
            if let Some(s) = p.s.filter(|&s| s != root) {
                return usage(format!("matching-sm fixes s* = sqrt(d) = {root} (got --s {s})"));
            }
            ProblemSpec {
                model: ModelKind::ShiftedMean,
                class: ClassKind::PerfectMatching,
                d,
                s_star: root,
                beta_star: beta,
                alpha: p.alpha.unwrap_or(1.0),
            }
        }
        PhaseProblem::Spca => {
            if p.alpha.is_some_and(|a| a != 1.0) {
                return usage("spca has no mixture weight; drop --alpha");
            }
            ProblemSpec {
                model: ModelKind::SpikedCovariance,
                class: ClassKind::SparseSet,
                d,
                s_star: required(p.s, "s")?,
                beta_star: beta,
                alpha: 1.0,
            }
        }
    };
    Ok((spec, problem))
}

fn class_of(spec: &ProblemSpec) -> Result<StructureClass, CliError> {
    Ok(StructureClass::new(spec.class, spec.d, spec.s_star)?)
}

fn config_line(v: &serde_json::Value) -> String {
    format!("# config: {v}\n")
}

fn table(rows: &[(String, String)]) -> String {
    let w = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = String::new();
    for (k, v) in rows {
        writeln!(out, "{k:<w$}  {v}").unwrap();
    }
    out
}

fn row(k: &str, v: impl Into<String>) -> (String, String) {
    (k.to_string(), v.into())
}

fn sig(x: f64) -> String {
    fmt_sig(x, SIG)
}

fn write_file(path: &Path, body: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, body)?;
    Ok(())
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".config.json");
    PathBuf::from(s)
}

/// CSV to `out` with the config in a sidecar file, or to stdout behind a comment line.
fn emit_csv(out: Option<&Path>, config: &serde_json::Value, csv: &str) -> Result<(), CliError> {
    match out {
        Some(p) => {
            write_file(p, csv)?;
            write_file(
                &sidecar(p),
                &format!("{}\n", serde_json::to_string_pretty(config).expect("config serializes")),
            )?;
        }
        None => print!("{}{csv}", config_line(config)),
    }
    Ok(())
}

fn closed_form_cell(r: sqphase::Result<f64>) -> Result<String, CliError> {
    match r {
        Ok(v) => Ok(format!("{}  (hypothesis holds)", sig(v))),
        Err(sqphase::Error::HypothesisViolated(m)) => Ok(format!("N/A  ({m})")),
        Err(e) => Err(e.into()),
    }
}

fn bounds(a: BoundsArgs) -> Result<(), CliError> {
    let (spec, problem) = problem_spec(&a.problem)?;
    let n = required(a.n, "n")?;
    let xi = a.xi.unwrap_or(0.05);
    let t = required(a.budget, "T")?;
    let delta = a.delta.unwrap_or(0.1);
    let inst = spec.instance()?;
    let (size, sup) = class_and_sup(&inst, n, xi)?;
    let ratio = sup.to_string().parse::<f64>().unwrap_or(f64::NAN) / size.to_string().parse::<f64>().unwrap_or(f64::NAN);
    let lower = risk_lower_bound(t, &sup, &size, xi)?;
    let params = BoundParams {
        d: spec.d,
        s_star: spec.s_star,
        n,
        beta_star: spec.beta_star,
        alpha: spec.alpha,
        xi,
        delta,
    };

    let config = json!({ "command": "bounds", "problem": spec, "n": n, "xi": xi, "T": t, "delta": delta });
    let mut rows = vec![
        row("class", class_of(&spec)?.to_string()),
        row("|C|", size.to_string()),
        row("sup |C(q)| (numeric)", sup.to_string()),
        row("sup |C(q)| / |C|", sig(ratio)),
    ];
    match problem {
        PhaseProblem::SparseSm => {
            let regime = SparseRegime::for_params(&params);
            let name = match regime {
                SparseRegime::Dilute => "closed form sparse (dilute)",
                SparseRegime::Dense => "closed form sparse (dense)",
            };
            rows.push(row(name, closed_form_cell(closed_form_bound_sparse(&params, regime))?));
        }
        PhaseProblem::MatchingSm => rows.push(row("closed form matching", closed_form_cell(closed_form_bound_matching(&params))?)),
        PhaseProblem::Spca => rows.push(row("closed form spca", closed_form_cell(closed_form_bound_spca(&params))?)),
    }
    rows.push(row(&format!("risk lower bound at T={t}"), sig(lower)));
    print!("{}{}", config_line(&config), table(&rows));
    Ok(())
}

fn parse_values(list: &str) -> Result<Vec<f64>, CliError> {
    list.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("not a number: `{v}`"))))
        .collect()
}

fn phase(a: PhaseArgs) -> Result<(), CliError> {
    let Some(name) = a.problem.as_deref() else {
        return usage("missing required flag --problem (sparse-sm, matching-sm or spca)");
    };
    let problem: PhaseProblem = parse(name)?;
    let (mut p_alpha, mut p_s) = (0.0, vec![0.25, 0.5, 0.75]);
    for s in &a.slice {
        for part in s.split(';') {
            let Some((k, v)) = part.split_once('=') else {
                return usage(format!("--slice expects key=value (got `{part}`)"));
            };
            let vals = parse_values(v)?;
            match k.trim() {
                "p_alpha" if vals.len() == 1 => p_alpha = vals[0],
                "p_alpha" => return usage("p_alpha takes a single value"),
                "p_s" => p_s = vals,
                other => return usage(format!("unknown slice coordinate `{other}` (expected p_alpha or p_s)")),
            }
        }
    }
    let res = a.res.unwrap_or(51);
    let grid = PhaseGrid {
        p_s: if problem == PhaseProblem::MatchingSm { vec![0.5] } else { p_s },
        p_alpha,
        p_beta: Axis {
            lo: 0.0,
            hi: a.p_beta_max.unwrap_or(1.0),
            res,
        },
        p_n: Axis {
            lo: 0.0,
            hi: a.p_n_max.unwrap_or(2.0),
            res,
        },
    };
    let rows = sweep_phase_diagram(&grid, problem)?;
    let config = json!({ "command": "phase", "problem": problem.name(), "grid": grid });
    emit_csv(a.out.as_deref(), &config, &phase_csv(&rows))?;
    if let Some(p) = &a.svg {
        write_file(p, &phase_svg(&rows))?;
    }
    Ok(())
}

fn experiment(e: &ExperimentArgs, default_mode: OracleMode) -> Result<ExperimentConfig, CliError> {
    let (spec, _) = problem_spec(&e.problem)?;
    let Some(det) = e.detector.as_deref() else {
        return usage("missing required flag --detector");
    };
    let setting: Setting = parse(det)?;
    let mode = match e.oracle.as_deref() {
        Some(m) => parse(m)?,
        None => default_mode,
    };
    let mut cfg = ExperimentConfig::new(
        spec,
        setting,
        mode,
        required(e.n, "n")?,
        e.xi.unwrap_or(0.05),
        e.trials.unwrap_or(200),
        e.seed.unwrap_or(0),
    );
    cfg.c_const = e.c_const.unwrap_or(cfg.c_const);
    cfg.cap = e.cap.unwrap_or(DEFAULT_ENUMERATION_CAP);
    cfg.mc_samples = e.mc_samples.unwrap_or(McConfig::default().samples);
    cfg.budget = e.budget;
    cfg.validate()?;
    Ok(cfg)
}

fn risk(a: RiskArgs, workers: usize) -> Result<(), CliError> {
    let base = experiment(&a.experiment, OracleMode::Data)?;
    let (rows, sweep) = match a.sweep.as_deref() {
        Some(s) => {
            let Some((k, v)) = s.split_once('=') else {
                return usage(format!("--sweep expects parameter=v1,v2,... (got `{s}`)"));
            };
            let param: SweepParameter = parse(k.trim())?;
            let values = parse_values(v)?;
            let rows = sweep_empirical_boundary(&base, param, &values, workers)?;
            (rows, Some((param, values)))
        }
        None => {
            let r = estimate_risk(&base, workers)?;
            (vec![(base.clone(), r)], None)
        }
    };
    let config = json!({
        "command": "risk",
        "experiment": base,
        "sweep": sweep.as_ref().map(|(p, v)| json!({ "parameter": p, "values": v })),
    });
    emit_csv(a.out.as_deref(), &config, &risk_csv(&rows))?;
    if let Some(p) = &a.svg {
        let x = |c: &ExperimentConfig| match sweep.as_ref().map(|s| s.0) {
            Some(SweepParameter::Alpha) => c.problem.alpha,
            Some(SweepParameter::N) => c.n as f64,
            _ => c.problem.beta_star,
        };
        let points = rows.iter().map(|(c, r)| (x(c), r.risk_hat)).collect();
        let label = match sweep.as_ref().map(|s| s.0) {
            Some(SweepParameter::Alpha) => "alpha",
            Some(SweepParameter::N) => "n",
            _ => "beta*",
        };
        write_file(p, &risk_curves_svg(&[(base.setting.to_string(), points)], label))?;
    }
    Ok(())
}

fn game(a: GameArgs, workers: usize) -> Result<(), CliError> {
    let mut cfg = experiment(&a.experiment, OracleMode::Adversarial)?;
    cfg.oracle_mode = OracleMode::Adversarial;
    let batches = a.batches.unwrap_or(1);
    let result = adversary_game(&cfg, batches, workers)?;
    let jsonl = game_jsonl(&cfg, &result);
    match &a.out {
        Some(p) => {
            write_file(p, &jsonl)?;
            let config = json!({ "command": "game", "experiment": cfg, "batches": batches });
            let mut rows = vec![
                row("budget T", result.budget.to_string()),
                row("|C|", result.class_size.clone()),
                row("sup |C(q)| (numeric)", result.sup_cq.clone()),
                row("risk lower bound", sig(result.bound)),
                row("exact risk", sig(result.exact_risk)),
                row("realized risk", sig(result.realized_risk)),
            ];
            for b in &result.batches {
                rows.push(row(
                    &format!("batch {} risk", b.batch),
                    format!("{} ± {}", sig(b.risk_hat), sig(b.std_error)),
                ));
            }
            print!("{}{}", config_line(&config), table(&rows));
        }
        None => print!("{jsonl}"),
    }
    Ok(())
}

fn chi2(a: Chi2Args) -> Result<(), CliError> {
    let (spec, _) = problem_spec(&a.problem)?;
    let n = required(a.n, "n")?;
    let inst = spec.instance()?;
    let chi2 = chi2_mixture_exact(inst.class(), &inst, None, n)?;
    let config = json!({ "command": "chi2", "problem": spec, "n": n });
    let rows = [
        row("class", inst.class().to_string()),
        row("chi2(mixture, P0)", sig(chi2)),
        row("Le Cam risk lower bound", sig(lecam_risk_lower_bound(chi2)?)),
    ];
    print!("{}{}", config_line(&config), table(&rows));
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct CachedShells {
    class: String,
    counts: Vec<String>,
    total: String,
    fractions: Vec<f64>,
}

fn shells(class: &StructureClass) -> CachedShells {
    let t = shell_counts(class);
    CachedShells {
        class: class.to_string(),
        counts: t.counts.iter().map(|c| c.to_string()).collect(),
        total: t.total.to_string(),
        fractions: overlap_distribution(class),
    }
}

/// Shell table, through `SQPHASE_CACHE_DIR` when it is set.
fn cached_shells(class: &StructureClass) -> Result<CachedShells, CliError> {
    let Some(dir) = std::env::var_os("SQPHASE_CACHE_DIR").filter(|d| !d.is_empty()) else {
        return Ok(shells(class));
    };
    let kind = match class.kind() {
        ClassKind::SparseSet => "sparse",
        ClassKind::PerfectMatching => "matching",
    };
    let path = Path::new(&dir).join(format!("shells_{kind}_d{}_s{}.json", class.d(), class.s_star()));
    if let Ok(text) = std::fs::read_to_string(&path) {
        if let Ok(hit) = serde_json::from_str::<CachedShells>(&text) {
            if hit.class == class.to_string() {
                return Ok(hit);
            }
        }
    }
    let fresh = shells(class);
    write_file(&path, &serde_json::to_string(&fresh).expect("shells serialize"))?;
    Ok(fresh)
}

fn enumerate(a: EnumerateArgs) -> Result<(), CliError> {
    let p = &a.problem;
    let Some(name) = p.problem.as_deref() else {
        return usage("missing required flag --problem (sparse-sm, matching-sm or spca)");
    };
    let problem: PhaseProblem = parse(name)?;
    let d = required(p.d, "d")?;
    let class = match problem {
        PhaseProblem::MatchingSm => StructureClass::perfect_matching(d)?,
        _ => StructureClass::sparse(d, required(p.s, "s")?)?,
    };
    let cap = a.cap.unwrap_or(DEFAULT_ENUMERATION_CAP);
    let table_ = cached_shells(&class)?;
    let config =
        json!({ "command": "enumerate", "problem": problem.name(), "d": class.d(), "s_star": class.s_star(), "list": a.list, "cap": cap });
    let mut out = config_line(&config);
    writeln!(out, "# {}  |C| = {}", table_.class, table_.total).unwrap();
    writeln!(out, "shell,overlap,count,fraction").unwrap();
    let s = class.s_star();
    for (j, c) in table_.counts.iter().enumerate() {
        let f = table_.fractions.get(s - j).copied().unwrap_or(0.0);
        writeln!(out, "{j},{},{c},{}", s - j, sig(f)).unwrap();
    }
    if a.list {
        writeln!(out, "# elements").unwrap();
        for s in enumerate_class(&class, cap)? {
            writeln!(out, "{s}").unwrap();
        }
    }
    print!("{out}");
    Ok(())
}
