use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::scenario::Scenario;
use crate::diagnostics::{self as diag, FrameSeries};
use crate::error::{io_err, Error, Result};
use crate::geometry::frontier_csv;
use crate::grid::write_snapshot;
use crate::hele_shaw::{run_limit, LimitConfig, SolveReport};
use crate::model::{ab_constant, audit_assumptions, AssumptionReport, AuditOptions, Exponent};
use crate::pme::{run, DtPolicy, SolveConfig};

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Concurrent solver runs; `None` uses the rayon default.
    pub jobs: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub label: String,
    pub m: Exponent,
    pub seconds: f64,
    pub steps: usize,
    /// `ok` or the solver error.
    pub status: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRecord {
    pub name: String,
    pub run: String,
    pub pass: bool,
    pub detail: String,
    pub report: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: String,
    pub scenario_hash: String,
    pub version: String,
    pub seed: u64,
    pub runs: Vec<RunRecord>,
    pub diagnostics: Vec<DiagnosticRecord>,
    pub files: Vec<FileEntry>,
    pub total_seconds: f64,
    pub all_pass: bool,
}

/// Per-run data written next to the snapshots (no timings, so it is reproducible).
#[derive(Serialize)]
struct RunLog<'a> {
    label: &'a str,
    m: Exponent,
    save_times: Vec<f64>,
    mass_series: &'a [(f64, f64)],
    dt_log: &'a [f64],
    clamped_mass: Option<f64>,
    min_before_clamp: Option<f64>,
    barrier_exceedances: Option<usize>,
    psor_log: Option<&'a [SolveReport]>,
    max_rho: Option<f64>,
}

pub fn run_label(m: Exponent) -> String {
    match m {
        Exponent::Finite(v) => format!("m{v}"),
        Exponent::Infinite => "limit".into(),
    }
}

struct Outcome {
    record: RunRecord,
    series: Option<FrameSeries>,
    log_json: Option<String>,
}

fn write_text(dir: &Path, rel: &str, text: &str) -> Result<()> {
    let path = dir.join(rel);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    std::fs::write(&path, text).map_err(io_err(&path))
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn solve_one(s: &Scenario, m: Exponent, audit: Option<&AssumptionReport>) -> Outcome {
    let label = run_label(m);
    let spec = s.model.spec(m);
    let cells = s.resolved_cells();
    let save_times = s.resolved_save_times();
    let start = Instant::now();
    let result: Result<(FrameSeries, usize, String)> = match m {
        Exponent::Finite(_) => {
            let cfg = SolveConfig {
                cells,
                cfl: s.solver.cfl,
                max_dt: s.solver.max_dt,
                save_times: save_times.clone(),
                positivity_floor: s.solver.positivity_floor,
                margin: s.solver.margin,
                dt_policy: DtPolicy::Adaptive,
                barrier: audit.map(|a| a.barrier),
            };
            run(&spec, &cfg).and_then(|traj| {
                let log = RunLog {
                    label: &label,
                    m,
                    save_times: save_times.clone(),
                    mass_series: &traj.mass_series,
                    dt_log: &traj.step_log,
                    clamped_mass: Some(traj.clamped_mass),
                    min_before_clamp: Some(traj.min_before_clamp),
                    barrier_exceedances: Some(traj.barrier_exceedances),
                    psor_log: None,
                    max_rho: None,
                };
                Ok((FrameSeries::from_trajectory(&traj, s.support), traj.step_log.len(), to_json(&log)?))
            })
        }
        Exponent::Infinite => {
            let cfg = LimitConfig {
                cells,
                cfl: s.limit.cfl,
                max_dt: s.limit.max_dt,
                save_times: save_times.clone(),
                psor: s.limit.psor,
                avg_steps: s.limit.avg_steps,
                tol_c: None,
            };
            run_limit(&spec, &cfg).and_then(|traj| {
                let log = RunLog {
                    label: &label,
                    m,
                    save_times: save_times.clone(),
                    mass_series: &traj.mass_series,
                    dt_log: &traj.step_log,
                    clamped_mass: None,
                    min_before_clamp: None,
                    barrier_exceedances: None,
                    psor_log: Some(&traj.psor_log),
                    max_rho: Some(traj.max_rho),
                };
                Ok((FrameSeries::from_limit(&traj), traj.step_log.len(), to_json(&log)?))
            })
        }
    };
    let seconds = start.elapsed().as_secs_f64();
    match result {
        Ok((series, steps, log)) => Outcome {
            record: RunRecord { label, m, seconds, steps, status: "ok".into() },
            series: Some(series),
            log_json: Some(log),
        },
        Err(e) => Outcome {
            record: RunRecord { label, m, seconds, steps: 0, status: e.to_string() },
            series: None,
            log_json: None,
        },
    }
}

struct Ctx<'a> {
    dir: &'a Path,
    records: Vec<DiagnosticRecord>,
}

impl Ctx<'_> {
    fn emit<T: Serialize>(&mut self, name: &str, run: &str, outcome: Result<(T, bool, String)>) -> Result<()> {
        match outcome {
            Ok((report, pass, detail)) => {
                let rel = format!("reports/{name}-{run}.json");
                write_text(self.dir, &rel, &to_json(&report)?)?;
                self.records.push(DiagnosticRecord {
                    name: name.into(),
                    run: run.into(),
                    pass,
                    detail,
                    report: Some(rel),
                });
            }
            Err(e) => self.records.push(DiagnosticRecord {
                name: name.into(),
                run: run.into(),
                pass: false,
                detail: e.to_string(),
                report: None,
            }),
        }
        Ok(())
    }
}

fn run_diagnostics(
    s: &Scenario,
    dir: &Path,
    finished: &[(String, &FrameSeries)],
    audits: &[(String, Result<AssumptionReport>)],
) -> Result<Vec<DiagnosticRecord>> {
    let sel = &s.diagnostics;
    let horizon = s.model.horizon;
    let eta_default = 0.1 * horizon;
    let mut ctx = Ctx { dir, records: Vec::new() };
    let c0_of = |label: &str| -> Result<f64> {
        let (_, audit) = audits
            .iter()
            .find(|(l, _)| l == label)
            .ok_or_else(|| Error::Insufficient(format!("no audit for {label}")))?;
        let report = audit.as_ref().map_err(|e| Error::Insufficient(format!("audit failed: {e}")))?;
        ab_constant(report, report.p_max, report.c_d)
    };
    for (label, series) in finished {
        let finite = !series.m().is_infinite();
        let dx = series.grid()?.dx;
        if let (Some(a), true) = (&sel.ab, finite) {
            let eta0 = a.eta0.unwrap_or(eta_default);
            let out = c0_of(label).and_then(|c0| diag::ab_check(series, eta0, c0, a.improved)).map(|r| {
                let worst = r.rows.iter().filter_map(|row| row.margin.map(|m| m / row.tolerance)).fold(f64::INFINITY, f64::min);
                let pass = r.pass;
                (r, pass, format!("worst margin/tolerance {worst:.3e}"))
            });
            ctx.emit("ab", label, out)?;
        }
        if let (Some(st), true) = (&sel.streamline, finite) {
            let t0 = st.t0_min.unwrap_or(eta_default);
            let out = c0_of(label).and_then(|c0| diag::streamline_check(series, c0, t0, st.max_probes)).map(|r| {
                let detail = format!(
                    "{} containment failures over {} pairs; decay holds at {:.4} of {} probes",
                    r.containment_failures.len(),
                    r.pairs,
                    r.decay_fraction,
                    r.probes
                );
                let pass = r.pass;
                (r, pass, detail)
            });
            ctx.emit("streamline", label, out)?;
        }
        if let Some(np) = &sel.nondegeneracy {
            let time = np.time.unwrap_or(horizon);
            let radii: Vec<f64> = np.radii_cells.iter().map(|c| c * dx).collect();
            let out = series.at(time).and_then(|f| {
                let rec = f.frontier();
                let points = diag::sample_cells(&rec.boundary, 512);
                diag::avg_pressure_probe(series, f.time, &points, &radii, None)
            });
            let out = out.map(|t| {
                let (pass, detail) = match t.pooled {
                    Some(fit) if !fit.inconclusive => {
                        (fit.slope <= np.max_slope, format!("slope {:.4}, R2 {:.4}", fit.slope, fit.r2))
                    }
                    Some(fit) => (true, format!("inconclusive: slope {:.4}, R2 {:.4}", fit.slope, fit.r2)),
                    None => (true, "inconclusive: no complete probes".into()),
                };
                (t, pass, detail)
            });
            if let Ok((t, _, _)) = &out {
                write_text(dir, &format!("reports/nondegeneracy-{label}.csv"), &diag::xy_csv(&t.radii, &t.pooled_averages, ("r", "mean_average")))?;
            }
            ctx.emit("nondegeneracy", label, out)?;
        }
        if let Some(ex) = &sel.expansion {
            let spacing = series.frame_spacing();
            let eta0 = ex.eta0.unwrap_or(eta_default.max(2.0 * spacing));
            let ladder =
                if ex.s_ladder.is_empty() { (1..=4).map(|k| k as f64 * spacing).collect() } else { ex.s_ladder.clone() };
            let out = diag::strict_expansion_measure(series, eta0, &ladder).and_then(|r| {
                let start = match (ex.start_taus.is_empty(), series.spec.init.growth_constants()) {
                    (true, _) => Vec::new(),
                    (false, Some((_, varsigma0))) => diag::start_expansion_check(series, varsigma0, &ex.start_taus)?,
                    (false, None) => {
                        return Err(Error::InvalidParameter("start-up check needs bump initial data".into()));
                    }
                };
                let pass = start.iter().all(|r| r.pass);
                let detail = format!(
                    "gamma {:?}, forward C {:.4}, start-up rows passing {}/{}",
                    r.gamma,
                    r.forward_c,
                    start.iter().filter(|r| r.pass).count(),
                    start.len()
                );
                Ok((serde_json::json!({ "expansion": r, "start": start }), pass, detail))
            });
            ctx.emit("expansion", label, out)?;
        }
        if let Some(dm) = &sel.dimension {
            let time = dm.time.unwrap_or(horizon);
            let d = series.spec.dim() as f64;
            let out = series.at(time).and_then(|f| {
                let rec = f.frontier();
                let radii: Vec<f64> = if dm.radii_cells.is_empty() {
                    diag::auto_radii(&rec, 6)
                } else {
                    dm.radii_cells.iter().map(|c| c * dx).collect()
                };
                diag::covering_dimension(&rec, &radii, None)
            });
            let out = out.map(|e| {
                let (pass, detail) = match e.fit {
                    Some(fit) if !fit.inconclusive => (
                        fit.slope <= d - 1.0 + dm.max_excess,
                        format!("dimension {:.4}, R2 {:.4}", fit.slope, fit.r2),
                    ),
                    _ => (true, "inconclusive fit".into()),
                };
                (e, pass, detail)
            });
            if let Ok((e, _, _)) = &out {
                let inv: Vec<f64> = e.radii.iter().map(|r| 1.0 / r).collect();
                let counts: Vec<f64> = e.counts.iter().map(|&c| c as f64).collect();
                write_text(dir, &format!("reports/dimension-{label}.csv"), &diag::xy_csv(&inv, &counts, ("inv_r", "count")))?;
            }
            ctx.emit("dimension", label, out)?;
        }
        if let Some(os) = &sel.oscillation {
            let radii: Vec<f64> = os.radii_cells.iter().map(|c| c * dx).collect();
            let out = diag::oscillation_propagation(series, &radii).map(|r| {
                let pass = r.pass;
                let detail = format!("C = {:?} (limit {})", r.c, r.c_limit);
                (r, pass, detail)
            });
            ctx.emit("oscillation", label, out)?;
        }
    }
    if let Some(cv) = &sel.convergence {
        let finite: Vec<FrameSeries> =
            finished.iter().filter(|(_, s)| !s.m().is_infinite()).map(|(_, s)| (*s).clone()).collect();
        let limit = finished.iter().find(|(_, s)| s.m().is_infinite()).map(|(_, s)| *s);
        let opts = diag::ConvergenceOptions {
            eta0: cv.eta0.unwrap_or(eta_default),
            time_weight: cv.time_weight,
            slack_radius: cv.slack_radius,
        };
        let out = diag::convergence_report(&finite, limit, &opts).map(|table| {
            let dx = finite.first().or(limit).and_then(|s| s.grid().ok()).map(|g| g.dx).unwrap_or(0.0);
            let mut violations = Vec::new();
            for &t in &cv.check_times {
                let seq: Vec<Option<f64>> = finite
                    .windows(2)
                    .map(|w| {
                        table
                            .pair(&diag::convergence::label(&w[0]), &diag::convergence::label(&w[1]))
                            .and_then(|p| p.at(t))
                            .and_then(|r| r.hausdorff)
                    })
                    .collect();
                for w in seq.windows(2) {
                    if let (Some(a), Some(b)) = (w[0], w[1]) {
                        if b > a + dx * (1.0 + 1e-9) {
                            violations.push(t);
                        }
                    }
                }
            }
            let pass = violations.is_empty();
            let detail = format!("{} pairs; sweep monotonicity violations at {:?}", table.pairs.len(), violations);
            (table, pass, detail)
        });
        ctx.emit("convergence", "all", out)?;
    }
    Ok(ctx.records)
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_err(dir))?
        .map(|e| e.map(|e| e.path()).map_err(io_err(dir)))
        .collect::<Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect_files(root, &p, out)?;
        } else if p != root.join(MANIFEST) {
            out.push(p);
        }
    }
    Ok(())
}

pub fn file_digest(path: &Path) -> Result<(String, u64)> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    Ok((hex::encode(Sha256::digest(&bytes)), bytes.len() as u64))
}

fn inventory(root: &Path) -> Result<Vec<FileEntry>> {
    let mut files = Vec::new();
    collect_files(root, root, &mut files)?;
    files
        .iter()
        .map(|p| {
            let (sha256, bytes) = file_digest(p)?;
            let rel = p.strip_prefix(root).unwrap_or(p).to_string_lossy().replace('\\', "/");
            Ok(FileEntry { path: rel, sha256, bytes })
        })
        .collect()
}

/// Audits every requested exponent.
pub fn audit_scenario(s: &Scenario) -> Vec<(String, Result<AssumptionReport>)> {
    let mut ms: Vec<Exponent> = s.m_values.iter().map(|&m| Exponent::Finite(m)).collect();
    if s.include_limit {
        ms.push(Exponent::Infinite);
    }
    let opts = AuditOptions { grid_cells: s.resolved_cells(), ..Default::default() };
    ms.into_iter().map(|m| (run_label(m), audit_assumptions(&s.model.spec(m), &opts))).collect()
}

/// Runs the sweep, the selected diagnostics, and writes everything under `<output>/<name>-<hash>/`.
pub fn run_scenario(s: &Scenario, opts: &RunOptions) -> Result<RunManifest> {
    s.validate()?;
    let start = Instant::now();
    let dir = s.run_dir();
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    write_text(&dir, "scenario.toml", &s.to_toml()?)?;

    let audits = audit_scenario(s);
    for (label, a) in &audits {
        if let Ok(report) = a {
            write_text(&dir, &format!("reports/audit-{label}.json"), &to_json(report)?)?;
        }
    }
    let mut ms: Vec<Exponent> = s.m_values.iter().map(|&m| Exponent::Finite(m)).collect();
    if s.include_limit {
        ms.push(Exponent::Infinite);
    }
    let solve_all = || -> Vec<Outcome> {
        ms.par_iter()
            .map(|&m| {
                let label = run_label(m);
                let audit = audits.iter().find(|(l, _)| *l == label).and_then(|(_, a)| a.as_ref().ok());
                solve_one(s, m, audit)
            })
            .collect()
    };
    let outcomes = match opts.jobs {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(solve_all),
        None => solve_all(),
    };

    for o in &outcomes {
        let (Some(series), Some(log)) = (&o.series, &o.log_json) else { continue };
        let label = &o.record.label;
        write_text(&dir, &format!("runs/{label}.json"), log)?;
        let records: Vec<_> = series.frames.iter().map(|f| f.frontier()).collect();
        write_text(&dir, &format!("frontiers/{label}.csv"), &frontier_csv(&records))?;
        if s.write_snapshots {
            for (k, f) in series.frames.iter().enumerate() {
                let base = dir.join("snapshots").join(label);
                std::fs::create_dir_all(&base).map_err(io_err(&base))?;
                write_snapshot(&base.join(format!("rho_{k:03}.bin")), &f.rho, "rho")?;
                write_snapshot(&base.join(format!("p_{k:03}.bin")), &f.p, "p")?;
                write_text(&dir, &format!("snapshots/{label}/support_{k:03}.json"), &to_json(&f.support.to_rle())?)?;
            }
        }
    }

    let finished: Vec<(String, &FrameSeries)> =
        outcomes.iter().filter_map(|o| o.series.as_ref().map(|s| (o.record.label.clone(), s))).collect();
    let mut diagnostics = run_diagnostics(s, &dir, &finished, &audits)?;
    for o in &outcomes {
        if o.series.is_none() {
            diagnostics.push(DiagnosticRecord {
                name: "solve".into(),
                run: o.record.label.clone(),
                pass: false,
                detail: o.record.status.clone(),
                report: None,
            });
        }
    }
    let all_pass = diagnostics.iter().all(|d| d.pass);
    let manifest = RunManifest {
        scenario: s.name.clone(),
        scenario_hash: s.hash(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: s.seed,
        runs: outcomes.into_iter().map(|o| o.record).collect(),
        diagnostics,
        files: inventory(&dir)?,
        total_seconds: start.elapsed().as_secs_f64(),
        all_pass,
    };
    write_text(&dir, MANIFEST, &to_json(&manifest)?)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|e| Error::Config { path, message: e.to_string() })
}

/// Files whose digest no longer matches the manifest, plus files missing from it.
pub fn verify_manifest(dir: &Path, manifest: &RunManifest) -> Result<Vec<String>> {
    let current = inventory(dir)?;
    let mut problems = Vec::new();
    for f in &manifest.files {
        match current.iter().find(|c| c.path == f.path) {
            Some(c) if c.sha256 == f.sha256 => {}
            Some(_) => problems.push(format!("digest mismatch: {}", f.path)),
            None => problems.push(format!("missing: {}", f.path)),
        }
    }
    for c in &current {
        if !manifest.files.iter().any(|f| f.path == c.path) {
            problems.push(format!("not in manifest: {}", c.path));
        }
    }
    Ok(problems)
}
