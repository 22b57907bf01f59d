use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use shrinker_core::audit::{
    audit_chain, check_deltaf_rf, check_soliton_identities, find_good_point, gradient_f_bound_audit, ChainOutcome,
};
use shrinker_core::phigeo::{solve_minimal_candidate, CandidatePair};
use shrinker_core::sampling::random_points;
use shrinker_core::{AuditError, AuditReport, GoodPoint, ManifoldPoint, ModelError, PhiGeoError, PhiParams, PhiPath, Verdict};

use crate::config::{Resolved, RunConfig};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
enum Status {
    Ok,
    Refused,
    SolverFailure,
}

#[derive(Debug, Serialize)]
struct Cell<T> {
    c: f64,
    ry: f64,
    status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<T>,
}

impl<T> Cell<T> {
    fn from_result(c: f64, ry: f64, r: Result<T, AuditError>) -> Self {
        match r {
            Ok(v) => Cell { c, ry, status: Status::Ok, error: None, result: Some(v) },
            Err(e) => {
                let status = if is_refusal(&e) { Status::Refused } else { Status::SolverFailure };
                Cell { c, ry, status, error: Some(e.to_string()), result: None }
            }
        }
    }
}

fn is_refusal(e: &AuditError) -> bool {
    e.is_refusal() || matches!(e, AuditError::PhiGeo(PhiGeoError::Model(ModelError::BeyondDiameter { .. })))
}

/// Exit code from per-cell outcomes: solver failures win over audit
/// failures, which win over refusals.
#[derive(Debug, Default)]
struct Tally {
    failed: usize,
    solver: usize,
    refused: usize,
}

impl Tally {
    fn add_status(&mut self, s: Status) {
        match s {
            Status::Ok => {}
            Status::Refused => self.refused += 1,
            Status::SolverFailure => self.solver += 1,
        }
    }

    fn exit_code(&self) -> i32 {
        if self.solver > 0 {
            3
        } else if self.failed > 0 {
            1
        } else if self.refused > 0 {
            4
        } else {
            0
        }
    }
}

fn grid(cfg: &Resolved) -> Vec<(PhiParams, f64)> {
    cfg.params.iter().flat_map(|&p| cfg.raw.ry.iter().map(move |&r| (p, r))).collect()
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<std::path::PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

#[derive(Debug, Default, Serialize)]
struct NameSummary {
    count: usize,
    passed: usize,
    worst_margin: f64,
}

#[derive(Serialize)]
struct IdentityBundle<'a> {
    command: &'static str,
    config: &'a RunConfig,
    summary: BTreeMap<String, NameSummary>,
    skipped: Vec<String>,
    reports: Vec<AuditReport>,
}

pub fn verify_identities(cfg: &Resolved) -> Result<i32, CliError> {
    let model = &cfg.model;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.raw.seed);
    let points = random_points(model, &mut rng, cfg.raw.samples, cfg.raw.euclid_radius);
    let degenerate = model.is_degenerate();
    let per_point: Vec<Result<Vec<AuditReport>, AuditError>> = points
        .par_iter()
        .map(|p| {
            let one = std::slice::from_ref(p);
            let mut r = check_soliton_identities(model, one, &cfg.identity_tol, &cfg.settings.fd)?;
            r.extend(gradient_f_bound_audit(model, one)?);
            if !degenerate {
                r.extend(check_deltaf_rf(model, one, cfg.identity_tol.fd, &cfg.settings.fd)?);
            }
            Ok(r)
        })
        .collect();
    let mut reports = Vec::new();
    for r in per_point {
        reports.extend(r.map_err(|e| CliError::Solver(e.to_string()))?);
    }
    let mut skipped = Vec::new();
    if degenerate {
        let note = "deltaf_R_over_f: skipped, R ≡ 0 on this model".to_string();
        eprintln!("notice: {note}");
        skipped.push(note);
    }
    let mut summary: BTreeMap<String, NameSummary> = BTreeMap::new();
    for r in &reports {
        let s = summary.entry(r.name.clone()).or_insert(NameSummary { worst_margin: f64::INFINITY, ..Default::default() });
        s.count += 1;
        s.passed += usize::from(r.pass);
        s.worst_margin = s.worst_margin.min(r.margin);
    }
    let failed = reports.iter().filter(|r| !r.pass).count();
    for (name, s) in &summary {
        println!("{name}: {}/{} pass, worst margin {:e}", s.passed, s.count, s.worst_margin);
    }
    let bundle = IdentityBundle { command: "verify-identities", config: &cfg.raw, summary, skipped, reports };
    let path = write_json(&cfg.raw.out, "identities.json", &bundle)?;
    println!("{model}: {failed} failing reports; wrote {}", path.display());
    Ok(if failed > 0 { 1 } else { 0 })
}

#[derive(Debug, Serialize)]
struct PathSummary {
    action_j: f64,
    c_value: f64,
    drift: f64,
    iterations: usize,
    solver_residual: f64,
    non_unique: bool,
    stalled: bool,
    nodes: usize,
    csv: String,
}

impl PathSummary {
    fn new(p: &PhiPath, csv: String) -> Self {
        PathSummary {
            action_j: p.action_j,
            c_value: p.c_value,
            drift: p.drift,
            iterations: p.iterations,
            solver_residual: p.solver_residual,
            non_unique: p.non_unique,
            stalled: p.stalled,
            nodes: p.len(),
            csv,
        }
    }
}

#[derive(Debug, Serialize)]
struct GeodesicResult {
    x: Vec<f64>,
    y: Vec<f64>,
    shooting: PathSummary,
    discrete: PathSummary,
    background_j: f64,
    solvers_agree: bool,
    below_background: bool,
}

#[derive(Serialize)]
struct Bundle<'a, T> {
    command: &'static str,
    config: &'a RunConfig,
    cells: Vec<Cell<T>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    empirical_c_hat: Option<f64>,
}

fn write_geodesic(
    cfg: &Resolved,
    params: PhiParams,
    ry: f64,
    x: &ManifoldPoint,
    y: ManifoldPoint,
    pair: &CandidatePair,
) -> Result<GeodesicResult, CliError> {
    let c = params.c();
    let mut names = Vec::new();
    for (tag, path) in [("shooting", &pair.shooting), ("discrete", &pair.discrete)] {
        let name = format!("geodesic_c{c}_r{ry}_{tag}.csv");
        let file = fs::File::create(cfg.raw.out.join(&name)).map_err(|e| CliError::Io(format!("{name}: {e}")))?;
        path.write_csv(&cfg.model, params, std::io::BufWriter::new(file))
            .map_err(|e| CliError::Io(format!("{name}: {e}")))?;
        names.push(name);
    }
    let discrete_csv = names.pop().expect("two files");
    let shooting_csv = names.pop().expect("two files");
    Ok(GeodesicResult {
        x: x.0.clone(),
        y: y.0,
        shooting: PathSummary::new(&pair.shooting, shooting_csv),
        discrete: PathSummary::new(&pair.discrete, discrete_csv),
        background_j: pair.evidence.background_j,
        solvers_agree: pair.evidence.solvers_agree,
        below_background: pair.evidence.below_background,
    })
}

pub fn geodesic(cfg: &Resolved) -> Result<i32, CliError> {
    let model = &cfg.model;
    let x = cfg.start_point()?;
    let cells = grid(cfg);
    let solved: Vec<_> = cells
        .par_iter()
        .map(|&(params, ry)| -> Result<_, AuditError> {
            let y = model.point_at_radius(ry)?;
            let pair = solve_minimal_candidate(model, params, &x, &y, &cfg.settings.solver)?;
            Ok((y, pair))
        })
        .collect();
    let dir = &cfg.raw.out;
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let mut tally = Tally::default();
    let mut out = Vec::with_capacity(cells.len());
    for (&(params, ry), r) in cells.iter().zip(solved) {
        let c = params.c();
        let r = match r {
            Ok((y, pair)) => Ok(write_geodesic(cfg, params, ry, &x, y, &pair)?),
            Err(e) => Err(e),
        };
        let cell = Cell::from_result(c, ry, r);
        tally.add_status(cell.status);
        match &cell.result {
            Some(g) => {
                if !g.solvers_agree {
                    tally.failed += 1;
                }
                println!(
                    "c={c} r(y)={ry}: J shooting {:.9} discrete {:.9} background {:.9}; C {:.9} / {:.9}; agree {}",
                    g.shooting.action_j, g.discrete.action_j, g.background_j, g.shooting.c_value, g.discrete.c_value,
                    g.solvers_agree
                );
            }
            None => println!("c={c} r(y)={ry}: {:?}: {}", cell.status, cell.error.as_deref().unwrap_or("")),
        }
        out.push(cell);
    }
    let bundle = Bundle { command: "geodesic", config: &cfg.raw, cells: out, empirical_c_hat: None };
    let path = write_json(dir, "geodesic.json", &bundle)?;
    println!("wrote {}", path.display());
    Ok(tally.exit_code())
}

pub fn audit_chain_cmd(cfg: &Resolved) -> Result<i32, CliError> {
    cfg.require_audit_range()?;
    let model = &cfg.model;
    let x = cfg.start_point()?;
    let cells = grid(cfg);
    let results: Vec<Result<ChainOutcome, AuditError>> = cells
        .par_iter()
        .map(|&(params, ry)| {
            let y = model.point_at_radius(ry)?;
            audit_chain(model, params, &x, &y, &cfg.settings)
        })
        .collect();
    let mut tally = Tally::default();
    let mut out = Vec::with_capacity(cells.len());
    for (&(params, ry), r) in cells.iter().zip(results) {
        let cell = Cell::from_result(params.c(), ry, r);
        tally.add_status(cell.status);
        let c = params.c();
        match &cell.result {
            Some(o) => {
                if !o.acceptable() {
                    tally.failed += 1;
                }
                let verdicts: Vec<String> =
                    o.reports.iter().map(|r| format!("{} {:?} ({:.3e})", r.name, r.verdict(), r.margin)).collect();
                println!("c={c} r(y)={ry}: candidate {} | {}", o.minimal_candidate, verdicts.join(" | "));
                for (name, why) in &o.skipped {
                    eprintln!("notice: c={c} r(y)={ry}: {name} skipped: {why}");
                }
            }
            None => println!("c={c} r(y)={ry}: {:?}: {}", cell.status, cell.error.as_deref().unwrap_or("")),
        }
        out.push(cell);
    }
    let bundle = Bundle { command: "audit-chain", config: &cfg.raw, cells: out, empirical_c_hat: None };
    let path = write_json(&cfg.raw.out, "audit_chain.json", &bundle)?;
    println!("wrote {}", path.display());
    Ok(tally.exit_code())
}

pub fn scan(cfg: &Resolved) -> Result<i32, CliError> {
    cfg.require_audit_range()?;
    let model = &cfg.model;
    if cfg.raw.x_ry != 0.0 {
        eprintln!("notice: scan always starts at the base point; x_ry ignored");
    }
    let cells = grid(cfg);
    let results: Vec<Result<GoodPoint, AuditError>> = cells
        .par_iter()
        .map(|&(params, ry)| {
            let y = model.point_at_radius(ry)?;
            find_good_point(model, params, &y, &cfg.settings)
        })
        .collect();
    let mut tally = Tally::default();
    let mut out = Vec::with_capacity(cells.len());
    let mut c_hat: Option<f64> = None;
    for (&(params, ry), r) in cells.iter().zip(results) {
        let cell = Cell::from_result(params.c(), ry, r);
        tally.add_status(cell.status);
        let c = params.c();
        match &cell.result {
            Some(g) => {
                let ok = g.report.verdict() != Verdict::Fail && g.chain.iter().all(|r| r.pass);
                if !ok {
                    tally.failed += 1;
                }
                c_hat = Some(c_hat.map_or(g.c_hat, |m| m.max(g.c_hat)));
                println!(
                    "c={c} r(y)={ry}: |Rc|(z) = {:.12} at s = {:.6}, bound {:.6}, C_hat {:.6}, chain {}",
                    g.ricci_norm,
                    g.s_z,
                    g.bound,
                    g.c_hat,
                    if ok { "pass" } else { "FAIL" }
                );
            }
            None => println!("c={c} r(y)={ry}: {:?}: {}", cell.status, cell.error.as_deref().unwrap_or("")),
        }
        out.push(cell);
    }
    if let Some(ch) = c_hat {
        println!("empirical C_hat = {ch:.6}");
    }
    let bundle = Bundle { command: "scan", config: &cfg.raw, cells: out, empirical_c_hat: c_hat };
    let path = write_json(&cfg.raw.out, "scan.json", &bundle)?;
    println!("wrote {}", path.display());
    Ok(tally.exit_code())
}
