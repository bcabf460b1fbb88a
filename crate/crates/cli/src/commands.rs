use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use tfx::analysis::{ansatz_error, ground_metrics, verify_claims, GroundMetrics, Sweep, VerificationReport};
use tfx::ansatz::{product_ansatz, solve_painleve, tf_cloud};
use tfx::equilibrium::{
    predict_position_asymptotic, refine_uv, solve_bifurcation_scalar, solve_toda, PositionSource, SolitonConfig,
};
use tfx::error::EquilibriumError;
use tfx::gpe::{solve_excited_from, solve_ground, StationaryState};
use tfx::grid::Grid;
use tfx::io::{csv_string, painleve_csv, plot_stub, spectrum_csv, state_csv, write_text, CacheKey, StateCache, StateRecord};
use tfx::spectrum::{
    build_l0_multi, build_l0_single, build_leps, classify_localization, lowest_eigenpairs, Localization, SpectrumSummary,
    ZGrid,
};

use crate::config::{validate_eps_list, Common, GridChoice};
use crate::failure::Failure;

/// A file to be written by the collector, relative to the output directory.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

impl Artifact {
    fn new(name: impl Into<String>, contents: impl Into<String>) -> Self {
        Self { name: name.into(), contents: contents.into() }
    }

    fn json<T: Serialize>(name: impl Into<String>, value: &T) -> Self {
        let mut s = serde_json::to_string_pretty(value).expect("serializable");
        s.push('\n');
        Self::new(name, s)
    }

    /// The CSV and its gnuplot stub.
    fn csv_pair(stem: &str, headers: &[&str], csv: String) -> [Self; 2] {
        [Self::new(format!("{stem}.csv"), csv), Self::new(format!("{stem}.gp"), plot_stub(&format!("{stem}.csv"), headers))]
    }
}

/// Single writer for every artifact of a command.
pub fn collect(out: &Path, artifacts: &[Artifact]) -> Result<Vec<PathBuf>, Failure> {
    artifacts
        .iter()
        .map(|a| {
            let path = out.join(&a.name);
            write_text(&path, &a.contents)?;
            Ok(path)
        })
        .collect()
}

/// Runs `f` over `items` on at most `jobs` threads, keeping input order.
fn run_legs<T: Sync, R: Send>(jobs: usize, items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Result<Vec<R>, Failure> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure::usage(format!("cannot start {jobs} worker threads: {e}")))?;
    Ok(pool.install(|| items.par_iter().map(&f).collect()))
}

#[derive(Clone, Debug)]
pub struct Context {
    pub common: Common,
    pub cache: Option<StateCache>,
}

impl Context {
    pub fn new(common: Common) -> Result<Self, Failure> {
        let cache = if common.cache { Some(StateCache::from_env(&common.out.join("cache"))?) } else { None };
        Ok(Self { common, cache })
    }

    fn cached(&self, m: usize, eps: f64, grid: &Grid, solve: impl FnOnce() -> Result<StationaryState, Failure>) -> Result<StationaryState, Failure> {
        let key = CacheKey::new(m, eps, grid.x_max(), grid.n());
        if let Some(cache) = &self.cache {
            match cache.load(&key, self.common.solver.residual_tol) {
                Ok(Some(s)) => {
                    log::info!("cache hit m={m} eps={eps} n={}", grid.n());
                    return Ok(s);
                }
                Ok(None) => {}
                Err(e) => log::warn!("ignoring cached state m={m} eps={eps}: {e}"),
            }
        }
        let state = solve()?;
        if let Some(cache) = &self.cache {
            cache.store(&state)?;
        }
        Ok(state)
    }

    fn ground(&self, eps: f64, grid: &Grid) -> Result<StationaryState, Failure> {
        self.cached(0, eps, grid, || Ok(solve_ground(eps, grid, &self.common.solver)?))
    }
}

/// Where each soliton sits when positions are not given.
pub fn default_positions(eps: f64, m: usize) -> Result<SolitonConfig, Failure> {
    Ok(match m {
        2 => solve_bifurcation_scalar(eps)?,
        _ => solve_toda(eps, m)?,
    })
}

fn eps_tag(eps: f64) -> String {
    format!("{eps}")
}

#[derive(Serialize)]
struct GroundReport {
    eps: f64,
    n: usize,
    x_max: f64,
    residual_sup: f64,
    newton_iters: usize,
    metrics: GroundMetrics,
    p1_pass: bool,
}

pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub lines: Vec<String>,
    /// The first failing leg, after all successful artifacts.
    pub failure: Option<(Failure, serde_json::Value)>,
}

fn split_legs<T>(results: Vec<(f64, Result<T, Failure>)>) -> (Vec<(f64, T)>, Option<(Failure, serde_json::Value)>) {
    let mut ok = Vec::new();
    let mut failure = None;
    for (eps, r) in results {
        match r {
            Ok(v) => ok.push((eps, v)),
            Err(f) if failure.is_none() => failure = Some((f, serde_json::json!({ "eps": eps }))),
            Err(_) => {}
        }
    }
    (ok, failure)
}

fn report_artifacts(prefix: &str, reports: &[VerificationReport]) -> Vec<Artifact> {
    let mut out = vec![Artifact::json(format!("{prefix}.json"), &reports)];
    for r in reports {
        let headers = ["eps", "value", "fitted", "residual"];
        out.extend(Artifact::csv_pair(&format!("{prefix}_{}", r.claim_id), &headers, r.raw_table.clone()));
    }
    out
}

fn report_line(r: &VerificationReport) -> String {
    format!("{:<9} {}  {}", r.claim_id, if r.pass { "pass" } else { "FAIL" }, r.note)
}

pub fn ground(ctx: &Context, eps: &[f64], grid: GridChoice, verify: bool) -> Result<Outcome, Failure> {
    validate_eps_list(eps, 1.0)?;
    grid.validate()?;
    if verify && eps.len() < 3 {
        return Err(Failure::usage("--verify needs at least three eps values"));
    }
    let results = run_legs(ctx.common.jobs, eps, |&e| {
        let r = grid.grid(e).and_then(|g| ctx.ground(e, &g));
        (e, r)
    })?;
    let (states, failure) = split_legs(results);
    let mut artifacts = Vec::new();
    let mut lines = Vec::new();
    for (e, s) in &states {
        let stem = format!("ground_eps{}", eps_tag(*e));
        let metrics = ground_metrics(s)?;
        let p1_pass = metrics.min_value > 0.0 && metrics.max_value <= 1.0 + 1e-8;
        artifacts.push(Artifact::new(format!("{stem}.json"), StateRecord::from_state(s).to_json()));
        let tf = tf_cloud(s.grid());
        artifacts.extend(Artifact::csv_pair(&stem, &["x", "u", "tf"], state_csv(s, Some(("tf", &tf)))?));
        let report = GroundReport {
            eps: *e,
            n: s.grid().n(),
            x_max: s.grid().x_max(),
            residual_sup: s.residual_sup,
            newton_iters: s.newton_iters,
            metrics,
            p1_pass,
        };
        artifacts.push(Artifact::json(format!("{stem}_report.json"), &report));
        lines.push(format!(
            "ground eps={e} n={} residual={:.3e} iters={} P1 {}",
            s.grid().n(),
            s.residual_sup,
            s.newton_iters,
            if p1_pass { "pass" } else { "FAIL" }
        ));
    }
    if verify && failure.is_none() {
        let sweep = Sweep { ground: states.into_iter().map(|(_, s)| s).collect(), ..Default::default() };
        let reports = verify_claims(&sweep)?;
        lines.extend(reports.iter().map(report_line));
        artifacts.extend(report_artifacts("ground_verification", &reports));
    }
    Ok(Outcome { artifacts, lines, failure })
}

#[derive(Serialize)]
struct ExcitedSummary {
    eps: f64,
    m: usize,
    positions: Vec<f64>,
    source: PositionSource,
    zeros: Vec<f64>,
    sup_error_vs_ansatz: f64,
    residual_sup: f64,
    newton_iters: usize,
}

fn check_positions(m: usize, positions: &[f64]) -> Result<(), Failure> {
    if positions.len() != m {
        return Err(Failure::usage(format!("{} positions given for m = {m}", positions.len())));
    }
    if positions.windows(2).any(|w| !(w[1] > w[0])) || positions.iter().any(|a| !(a.abs() < 1.0)) {
        return Err(Failure::usage("positions must be strictly increasing inside (-1, 1)"));
    }
    Ok(())
}

pub fn excited(ctx: &Context, m: usize, eps: &[f64], grid: GridChoice, positions: Option<Vec<f64>>) -> Result<Outcome, Failure> {
    validate_eps_list(eps, 1.0)?;
    grid.validate()?;
    if m == 0 {
        return Err(Failure::usage("m must be at least 1; use `ground` for m = 0"));
    }
    if let Some(p) = &positions {
        check_positions(m, p)?;
    }
    let leg = |&e: &f64| -> (f64, Result<(StationaryState, SolitonConfig, f64), Failure>) {
        let r = (|| {
            let g = grid.grid(e)?;
            let ground = ctx.ground(e, &g)?;
            let config = match &positions {
                Some(p) => SolitonConfig::new(e, p.clone(), PositionSource::Manual, 0.0)?,
                None => default_positions(e, m)?,
            };
            let solve = || Ok(solve_excited_from(&ground, &config.positions, &ctx.common.solver)?);
            let state = if positions.is_none() { ctx.cached(m, e, &g, solve)? } else { solve()? };
            let err = ansatz_error(&state, &ground, &config.positions)?;
            Ok((state, config, err))
        })();
        (e, r)
    };
    let (states, failure) = split_legs(run_legs(ctx.common.jobs, eps, leg)?);
    let mut artifacts = Vec::new();
    let mut lines = Vec::new();
    for (e, (s, config, err)) in &states {
        let stem = format!("excited_m{m}_eps{}", eps_tag(*e));
        artifacts.push(Artifact::new(format!("{stem}.json"), StateRecord::from_state(s).to_json()));
        let ground = ctx.ground(*e, s.grid())?;
        let ansatz = product_ansatz(&ground.field, *e, &config.positions)?;
        artifacts.extend(Artifact::csv_pair(&stem, &["x", "u", "ansatz"], state_csv(s, Some(("ansatz", &ansatz)))?));
        let summary = ExcitedSummary {
            eps: *e,
            m,
            positions: config.positions.clone(),
            source: config.source,
            zeros: s.zeros.clone(),
            sup_error_vs_ansatz: *err,
            residual_sup: s.residual_sup,
            newton_iters: s.newton_iters,
        };
        artifacts.push(Artifact::json(format!("{stem}_summary.json"), &summary));
        let zeros: Vec<String> = s.zeros.iter().map(|z| format!("{z:.6}")).collect();
        lines.push(format!("excited m={m} eps={e} zeros=[{}] sup|u - ansatz|={err:.3e}", zeros.join(", ")));
    }
    Ok(Outcome { artifacts, lines, failure })
}

#[derive(Serialize)]
struct EquilibriumRow {
    eps: f64,
    a_asymptotic: Option<f64>,
    a_scalar: Option<f64>,
    a_uv: Option<f64>,
    toda: SolitonConfig,
    outside_asymptotic_regime: bool,
}

fn optional(r: Result<f64, EquilibriumError>, what: &str, eps: f64) -> Result<Option<f64>, Failure> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(EquilibriumError::OutOfRange(_)) => {
            log::warn!("{what} is undefined at eps = {eps}");
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

pub fn equilibrium(m: usize, eps: &[f64]) -> Result<Outcome, Failure> {
    validate_eps_list(eps, 1.0)?;
    if m == 0 {
        return Err(Failure::usage("m must be at least 1"));
    }
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for &e in eps {
        let outside = e > 0.1;
        if outside {
            eprintln!("warning: eps = {e} is outside the asymptotic validity range (eps <= 0.1)");
        }
        let toda = solve_toda(e, m)?;
        let row = if m == 1 {
            EquilibriumRow { eps: e, a_asymptotic: Some(0.0), a_scalar: Some(0.0), a_uv: Some(0.0), toda, outside_asymptotic_regime: outside }
        } else {
            EquilibriumRow {
                eps: e,
                a_asymptotic: optional(predict_position_asymptotic(e), "asymptotic position", e)?,
                a_scalar: optional(solve_bifurcation_scalar(e).map(|c| c.positions[1]), "scalar root", e)?,
                a_uv: optional(refine_uv(e).map(|r| r.a), "U/V refinement", e)?,
                toda,
                outside_asymptotic_regime: outside,
            }
        };
        let show = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.6e}"));
        lines.push(format!(
            "m={m} eps={e} a_asym={} a_scalar={} a_uv={} a_toda={} beta={:.3} bounds {}",
            show(row.a_asymptotic),
            show(row.a_scalar),
            show(row.a_uv),
            show(row.toda.positions.last().copied()),
            row.toda.bounds.beta,
            if row.toda.bounds.ok() { "ok" } else { "violated" }
        ));
        rows.push(row);
    }
    let col = |f: &dyn Fn(&EquilibriumRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let nan = |v: Option<f64>| v.unwrap_or(f64::NAN);
    let columns = [
        col(&|r| r.eps),
        col(&|r| nan(r.a_asymptotic)),
        col(&|r| nan(r.a_scalar)),
        col(&|r| nan(r.a_uv)),
        col(&|r| r.toda.positions.last().copied().unwrap_or(0.0)),
        col(&|r| r.toda.bounds.beta),
        col(&|r| r.toda.bounds.pair_constant),
    ];
    let headers = ["eps", "a_asymptotic", "a_scalar", "a_uv", "a_toda_outer", "beta", "pair_constant"];
    let refs: Vec<&[f64]> = columns.iter().map(Vec::as_slice).collect();
    let stem = format!("equilibrium_m{m}");
    let mut artifacts = vec![Artifact::json(format!("{stem}.json"), &rows)];
    artifacts.extend(Artifact::csv_pair(&stem, &headers, csv_string(&headers, &refs)?));
    Ok(Outcome { artifacts, lines, failure: None })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    L0,
    L0Multi,
    Leps,
}

impl std::str::FromStr for OperatorKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "l0" => Ok(OperatorKind::L0),
            "l0-multi" | "l0multi" | "multi" => Ok(OperatorKind::L0Multi),
            "leps" | "l-eps" => Ok(OperatorKind::Leps),
            other => Err(format!("unknown operator {other:?} (expected L0, L0-multi or Leps)")),
        }
    }
}

pub struct SpectrumRequest {
    pub op: OperatorKind,
    pub k: usize,
    pub z_max: f64,
    pub h_z: f64,
    pub centers: Option<Vec<f64>>,
    pub eps: f64,
    pub m: usize,
    pub grid: GridChoice,
}

#[derive(Serialize)]
struct SpectrumFile {
    #[serde(flatten)]
    summary: SpectrumSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    localization: Option<Vec<Localization>>,
}

pub fn spectrum(ctx: &Context, req: &SpectrumRequest) -> Result<Outcome, Failure> {
    if req.k == 0 || req.k > 64 {
        return Err(Failure::usage(format!("k = {} must lie in 1..=64", req.k)));
    }
    let (result, localization, tag) = match req.op {
        OperatorKind::L0 | OperatorKind::L0Multi => {
            let z = ZGrid::new(req.z_max, req.h_z)?;
            let op = match (req.op, &req.centers) {
                (OperatorKind::L0, _) => build_l0_single(&z)?,
                (_, Some(c)) => build_l0_multi(&z, c)?,
                (_, None) => return Err(Failure::usage("L0-multi needs --centers")),
            };
            (lowest_eigenpairs(&op, req.k)?, None, if req.op == OperatorKind::L0 { "L0" } else { "L0-multi" })
        }
        OperatorKind::Leps => {
            validate_eps_list(&[req.eps], 1.0)?;
            req.grid.validate()?;
            let g = req.grid.grid(req.eps)?;
            let ground = ctx.ground(req.eps, &g)?;
            let positions = if req.m == 0 { Vec::new() } else { default_positions(req.eps, req.m)?.positions };
            let op = build_leps(&g, req.eps, &ground.field, &positions)?;
            let r = lowest_eigenpairs(&op, req.k)?;
            let loc = r.eigenfunctions.iter().map(|f| classify_localization(f, req.eps, &positions)).collect();
            (r, Some(loc), "Leps")
        }
    };
    let stem = format!("spectrum_{tag}");
    let mut lines: Vec<String> =
        result.eigenvalues.iter().enumerate().map(|(j, l)| format!("lambda[{j}] = {l:.10}  (residual {:.2e})", result.residuals[j])).collect();
    if let Some(loc) = &localization {
        for (line, l) in lines.iter_mut().zip(loc) {
            line.push_str(&format!("  {l:?}"));
        }
    }
    let file = SpectrumFile { summary: result.summary(), localization };
    let mut artifacts = vec![Artifact::json(format!("{stem}.json"), &file)];
    let index: Vec<f64> = (0..result.eigenvalues.len()).map(|j| j as f64).collect();
    let vh = ["index", "lambda", "residual"];
    artifacts.extend(Artifact::csv_pair(&format!("{stem}_values"), &vh, csv_string(&vh, &[&index, &result.eigenvalues, &result.residuals])?));
    let (headers, csv) = spectrum_csv(&result)?;
    let h: Vec<&str> = headers.iter().map(String::as_str).collect();
    artifacts.extend(Artifact::csv_pair(&format!("{stem}_modes"), &h, csv));
    Ok(Outcome { artifacts, lines, failure: None })
}

/// Claim identifiers accepted by `converge`.
pub fn claim_ids(claim: &str) -> Result<Vec<&'static str>, Failure> {
    Ok(match claim.to_ascii_lowercase().as_str() {
        "p1" => vec!["P1"],
        "p2" => vec!["P2"],
        "p3" => vec!["P3-sup", "P3-deriv"],
        "p4" => vec!["P4"],
        "thm1" => vec!["Thm1"],
        "thm2" => vec!["Thm2"],
        "rem2" => vec!["Rem2"],
        "all" => vec!["P1", "P2", "P3-sup", "P3-deriv", "P4", "Thm1", "Thm2", "Rem2"],
        other => return Err(Failure::usage(format!("unknown claim {other:?} (p1, p2, p3, p4, thm1, thm2, rem2, all)"))),
    })
}

pub fn converge(ctx: &Context, claim: &str, eps: &[f64], grid: GridChoice) -> Result<Outcome, Failure> {
    let ids = claim_ids(claim)?;
    validate_eps_list(eps, 1.0)?;
    grid.validate()?;
    if eps.len() < 3 {
        return Err(Failure::usage("rate verification needs at least three eps values"));
    }
    let need_m1 = ids.contains(&"Thm1");
    let need_m2 = ids.iter().any(|i| *i == "Thm2" || *i == "Rem2");
    type Leg = (StationaryState, Option<StationaryState>, Option<(StationaryState, f64)>);
    let leg = |&e: &f64| -> (f64, Result<Leg, Failure>) {
        let r = (|| {
            let g = grid.grid(e)?;
            let ground = ctx.ground(e, &g)?;
            let m1 = if need_m1 {
                Some(ctx.cached(1, e, &g, || Ok(solve_excited_from(&ground, &[0.0], &ctx.common.solver)?))?)
            } else {
                None
            };
            let m2 = if need_m2 {
                let a = solve_bifurcation_scalar(e)?.positions[1];
                let s = ctx.cached(2, e, &g, || Ok(solve_excited_from(&ground, &[-a, a], &ctx.common.solver)?))?;
                Some((s, a))
            } else {
                None
            };
            Ok((ground, m1, m2))
        })();
        (e, r)
    };
    let (legs, failure) = split_legs(run_legs(ctx.common.jobs, eps, leg)?);
    if let Some(f) = failure {
        return Ok(Outcome { artifacts: Vec::new(), lines: Vec::new(), failure: Some(f) });
    }
    let mut sweep = Sweep::default();
    for (_, (g, m1, m2)) in legs {
        sweep.ground.push(g);
        sweep.first_excited.extend(m1);
        sweep.second_excited.extend(m2);
    }
    let reports: Vec<VerificationReport> = verify_claims(&sweep)?.into_iter().filter(|r| ids.contains(&r.claim_id.as_str())).collect();
    let mut lines: Vec<String> = reports.iter().map(report_line).collect();
    let all_pass = reports.iter().all(|r| r.pass);
    lines.push(format!("converge {claim}: {}", if all_pass { "pass" } else { "FAIL" }));
    let artifacts = report_artifacts(&format!("converge_{}", claim.to_ascii_lowercase()), &reports);
    Ok(Outcome { artifacts, lines, failure: None })
}

#[derive(Serialize)]
struct PainleveFile {
    y_min: f64,
    y_max: f64,
    n: usize,
    residual_norm: f64,
    nu_at_zero: f64,
    max_deviation_from_sqrt: f64,
    residual_history: Vec<f64>,
    step_history: Vec<f64>,
}

pub fn painleve(y_min: f64, y_max: f64, n: usize) -> Result<Outcome, Failure> {
    let p = solve_painleve(y_min, y_max, n)?;
    let file = PainleveFile {
        y_min,
        y_max,
        n,
        residual_norm: p.residual_norm,
        nu_at_zero: p.eval(0.0),
        max_deviation_from_sqrt: p.max_deviation_from_sqrt(),
        residual_history: p.residual_history.clone(),
        step_history: p.step_history.clone(),
    };
    let lines = vec![
        format!("painleve y in [{y_min}, {y_max}] n={n} residual={:.3e}", p.residual_norm),
        format!("nu(0) = {:.10}  nu(y_max) = {:.10}", file.nu_at_zero, p.nu_values.last().copied().unwrap_or(f64::NAN)),
    ];
    let mut artifacts = vec![Artifact::json("painleve.json", &file)];
    artifacts.extend(Artifact::csv_pair("painleve", &["y", "nu"], painleve_csv(&p)?));
    Ok(Outcome { artifacts, lines, failure: None })
}
