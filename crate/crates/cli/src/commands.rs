use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use kslab::config::{SimConfig, Solver};
use kslab::inequality::*;
use kslab::initial::{initial_density, initial_spectrum};
use kslab::io::{diagnostics_csv, fmt_f64, read_density, spectra_csv, write_density, write_json, write_text, Table};
use kslab::metrics::{
    fit_decay_rate, fourier_d1, free_energy, second_moment, wasserstein2, DecayFit, FreeEnergyReport,
};
use kslab::physical::run_physical;
use kslab::profiles::{characterization_residual, euler_lagrange_residual, solve_self_similar, Frame, Grid, Identity};
use kslab::record::{RunRecord, RunStatus};
use kslab::spectral::run_spectral;
use kslab::{fourier_transform, AnyDensity, Error, Result};

use crate::manifest::Recorder;
use crate::{Outcome, RunArgs, Suite};

/// Relative error allowed against the exact heat transform when `chi = 0`.
const HEAT_ORACLE_TOL: f64 = 1e-6;

pub fn load_config(args: &RunArgs) -> Result<SimConfig> {
    let mut cfg = match &args.config {
        Some(path) => SimConfig::from_file(path)?,
        None => SimConfig::default(),
    };
    let mut overrides: Vec<(String, String)> = Vec::new();
    if let Some(v) = args.chi {
        overrides.push(("chi".into(), v.to_string()));
    }
    if let Some(v) = args.dimension {
        overrides.push(("dimension".into(), v.to_string()));
    }
    if let Some(v) = &args.frame {
        overrides.push(("frame".into(), v.clone()));
    }
    if let Some(v) = &args.solver {
        overrides.push(("solver".into(), v.clone()));
    }
    if let Some(v) = args.seed {
        overrides.push(("seed".into(), v.to_string()));
    }
    if let Some(v) = args.cadence {
        overrides.push(("cadence".into(), v.to_string()));
    }
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::config(kv.clone(), "expected `key=value`"))?;
        overrides.push((k.trim().into(), v.trim().into()));
    }
    for (k, v) in overrides {
        cfg.set(&k, &v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn config_echo(cfg: &SimConfig) -> Value {
    serde_json::to_value(cfg).expect("config serialises")
}

fn status_name(s: &RunStatus) -> &'static str {
    match s {
        RunStatus::Completed => "completed",
        RunStatus::BlowupDetected { .. } => "blowup_detected",
        RunStatus::Diverged { .. } => "diverged",
    }
}

fn run(cfg: &SimConfig) -> Result<(RunRecord, f64)> {
    match cfg.solver {
        Solver::Spectral => {
            let init = initial_spectrum(cfg)?;
            let m2 = init.second_moment();
            Ok((run_spectral(cfg, init)?, m2))
        }
        Solver::Physical => {
            let init = initial_density(cfg)?;
            let m2 = second_moment(&init);
            Ok((run_physical(cfg, init)?, m2))
        }
    }
}

/// Upper bound on the blow-up time from `1/2 dM2/dt = 1 - chi` (free frame).
fn virial_bound(cfg: &SimConfig, m2: f64) -> Option<f64> {
    (cfg.frame == Frame::Free && cfg.chi > 1.0).then(|| m2 / (2.0 * (cfg.chi - 1.0)))
}

/// Largest relative error of the stored spectra against
/// `exp(-(v/2 + t) xi^2)`, for free-frame Gaussian spectral runs at `chi = 0`.
fn heat_oracle(cfg: &SimConfig, rec: &RunRecord) -> Option<f64> {
    use kslab::config::InitKind;
    if cfg.chi != 0.0 || cfg.frame != Frame::Free || cfg.init != InitKind::Gaussian || rec.spectra.is_empty() {
        return None;
    }
    let v = cfg.init_variance;
    let err = rec
        .spectra
        .iter()
        .flat_map(|(t, s)| {
            (0..s.len()).map(move |j| {
                let xi = s.xi(j);
                let exact = (-xi * xi * (0.5 * v + t)).exp();
                (s.values()[j] - exact).norm() / exact
            })
        })
        .fold(0.0, f64::max);
    Some(err)
}

#[derive(Serialize)]
struct RunSummary {
    status: RunStatus,
    steps: usize,
    final_time: f64,
    initial_second_moment: f64,
    virial_bound: Option<f64>,
    heat_oracle_error: Option<f64>,
    heat_oracle_pass: Option<bool>,
}

pub fn simulate(args: &RunArgs, out: &Path) -> Result<Outcome> {
    let cfg = load_config(args)?;
    let mut rec_files = Recorder::start("simulate");
    let (rec, m2) = run(&cfg)?;

    write_text(out.join("diagnostics.csv"), &diagnostics_csv(&rec.samples))?;
    rec_files.output("diagnostics.csv");
    if !rec.spectra.is_empty() {
        write_text(out.join("spectra.csv"), &spectra_csv(&rec.spectra))?;
        rec_files.output("spectra.csv");
    }
    if !rec.snapshots.is_empty() {
        let mut index = String::from("index,t\n");
        for (k, (t, d)) in rec.snapshots.iter().enumerate() {
            let name = format!("snapshots/snapshot_{k:04}.csv");
            write_density(out.join(&name), d)?;
            rec_files.output(name);
            let _ = writeln!(index, "{k},{}", fmt_f64(*t));
        }
        write_text(out.join("snapshots/index.csv"), &index)?;
        rec_files.output("snapshots/index.csv");
    }
    let heat = heat_oracle(&cfg, &rec);
    let summary = RunSummary {
        status: rec.status,
        steps: rec.steps,
        final_time: rec.samples.last().map_or(0.0, |s| s.t),
        initial_second_moment: m2,
        virial_bound: virial_bound(&cfg, m2),
        heat_oracle_error: heat,
        heat_oracle_pass: heat.map(|e| e <= HEAT_ORACLE_TOL),
    };
    write_json(out.join("run.json"), &summary)?;
    rec_files.output("run.json");
    let status = status_name(&rec.status);
    println!("{status} at t = {} after {} steps", summary.final_time, rec.steps);
    rec_files.finish(out, Some(cfg.seed), config_echo(&cfg), status)?;
    Ok(Outcome::Success)
}

pub fn profile(chi: f64, dimension: usize, cells: usize, half_width: Option<f64>, out: &Path) -> Result<Outcome> {
    let mut files = Recorder::start("profile");
    let grid = match dimension {
        1 => Grid::Line {
            half_width: half_width.unwrap_or(10.0),
            cells,
        },
        2 => Grid::Radial {
            radius: half_width.unwrap_or(8.0),
            cells,
        },
        d => return Err(Error::config("dimension", format!("must be 1 or 2, got {d}"))),
    };
    let p = solve_self_similar(chi, grid, 1e-11, 20_000)?;
    let identity = if dimension == 1 {
        Identity::Rescaled1d
    } else {
        Identity::RescaledRadial
    };
    let report = json!({
        "chi": chi,
        "dimension": dimension,
        "grid": grid,
        "iterations": p.iterations,
        "fixed_point_residual": p.residual,
        "euler_lagrange_residual": euler_lagrange_residual(&p.density, chi, Frame::Rescaled)?,
        "characterization_residual": characterization_residual(&p.density, identity, chi)?,
        "second_moment": p.second_moment,
    });
    write_density(out.join("profile.csv"), &p.density)?;
    files.output("profile.csv");
    write_json(out.join("profile.json"), &report)?;
    files.output("profile.json");
    println!(
        "profile chi = {chi}, N = {dimension}: second moment {:.6}, {} iterations",
        p.second_moment, p.iterations
    );
    files.finish(
        out,
        None,
        json!({ "chi": chi, "dimension": dimension, "grid": grid }),
        "completed",
    )?;
    Ok(Outcome::Success)
}

/// First and last snapshot of a run directory written by `simulate`.
fn run_endpoints(dir: &Path) -> Result<(PathBuf, PathBuf)> {
    let index = Table::read(dir.join("snapshots/index.csv"))?;
    let k = index
        .column_index("index")
        .ok_or_else(|| Error::io(dir, "snapshot index has no index column"))?;
    let ks: Vec<usize> = index.rows.iter().filter_map(|r| r[k]).map(|v| v as usize).collect();
    match (ks.first(), ks.last()) {
        (Some(a), Some(b)) if a != b => Ok((
            dir.join(format!("snapshots/snapshot_{a:04}.csv")),
            dir.join(format!("snapshots/snapshot_{b:04}.csv")),
        )),
        _ => Err(Error::io(dir, "run holds fewer than two snapshots")),
    }
}

#[derive(Serialize)]
struct DensityReport {
    path: String,
    mass: f64,
    second_moment: f64,
    free_energy: FreeEnergyReport,
}

fn density_report(path: &Path, d: &AnyDensity, chi: f64, frame: Frame) -> DensityReport {
    let mass = match d {
        AnyDensity::Line(d) => d.mass(),
        AnyDensity::Radial(d) => d.mass(),
    };
    DensityReport {
        path: path.display().to_string(),
        mass,
        second_moment: second_moment(d),
        free_energy: free_energy(d, chi, frame),
    }
}

pub fn metrics(inputs: &[PathBuf], chi: f64, frame: Frame, freq_max: f64, modes: usize, out: &Path) -> Result<Outcome> {
    let mut files = Recorder::start("metrics");
    let (pa, pb) = match inputs {
        [dir] => run_endpoints(dir)?,
        [a, b] => (a.clone(), b.clone()),
        _ => unreachable!("clap enforces one or two inputs"),
    };
    let (a, b) = (read_density(&pa)?, read_density(&pb)?);
    let same = match (&a, &b) {
        (AnyDensity::Line(x), AnyDensity::Line(y)) => x.same_grid(y),
        (AnyDensity::Radial(x), AnyDensity::Radial(y)) => x.same_grid(y),
        _ => false,
    };
    if !same {
        return Err(Error::GridMismatch(format!(
            "{} and {} are not on the same grid",
            pa.display(),
            pb.display()
        )));
    }
    let d1 = match (&a, &b) {
        (AnyDensity::Line(x), AnyDensity::Line(y)) => {
            let (sx, sy) = (
                fourier_transform(x, freq_max, modes)?,
                fourier_transform(y, freq_max, modes)?,
            );
            match fourier_d1(&sx, &sy) {
                Ok(d) => json!(d),
                Err(e @ Error::CenterMismatch { .. }) => json!({ "skipped": e.to_string() }),
                Err(e) => return Err(e),
            }
        }
        _ => Value::Null,
    };
    let report = json!({
        "first": density_report(&pa, &a, chi, frame),
        "second": density_report(&pb, &b, chi, frame),
        "wasserstein2": wasserstein2(&a, &b)?,
        "fourier_d1": d1,
    });
    write_json(out.join("metrics.json"), &report)?;
    files.output("metrics.json");
    println!("{}", serde_json::to_string_pretty(&report).expect("report serialises"));
    let config = json!({ "chi": chi, "frame": frame, "freq_max": freq_max, "modes": modes });
    files.finish(out, None, config, "completed")?;
    Ok(Outcome::Success)
}

fn run_suite(suite: Suite, seed: u64, trials: usize) -> Result<Vec<InequalityVerdict>> {
    let wants = |s: Suite| suite == Suite::All || suite == s;
    let mut v = Vec::new();
    if wants(Suite::Pointwise) {
        for lemma in PointwiseLemma::ALL {
            v.push(sweep_pointwise(lemma, trials, seed)?);
        }
    }
    if wants(Suite::Transport) {
        for k in [ConcaveK::Log, ConcaveK::NegInverse] {
            v.push(sweep_transport_jensen(k, 200, 50, seed)?);
        }
    }
    if wants(Suite::Newton) {
        v.push(sweep_newton(&newton_grid(20))?);
    }
    if wants(Suite::Obstruction) {
        v.push(obstruction_scan_3d(&obstruction_grid(10_000))?);
    }
    if wants(Suite::Loghls) {
        for dimension in [1, 2] {
            v.push(check_loghls(&loghls_corpus(dimension, seed)?)?);
            v.push(check_loghls_dilations(dimension, &[0.5, 1.0, 2.0])?);
        }
    }
    if wants(Suite::Confined) {
        for dimension in [1, 2] {
            for chi in [0.0, 0.5, 0.8] {
                let nu = confined_profile(dimension, chi)?;
                v.push(check_loghls_confined(&confined_corpus(&nu, seed)?, chi, &nu)?);
            }
        }
    }
    Ok(v)
}

pub fn verify(suite: Suite, seed: u64, trials: usize, out: &Path) -> Result<Outcome> {
    let mut files = Recorder::start("verify");
    let verdicts = run_suite(suite, seed, trials)?;
    let mut worst = String::from("id,input,value\n");
    for v in &verdicts {
        println!(
            "{} {:<40} worst {:+.3e} (tol {:.0e}, {} trials)",
            if v.holds { "PASS" } else { "FAIL" },
            v.id,
            v.worst_margin,
            v.tolerance,
            v.trials
        );
        for (k, x) in &v.worst_inputs {
            let _ = writeln!(worst, "{},{k},{}", v.id, fmt_f64(*x));
        }
    }
    write_json(out.join("verdicts.json"), &verdicts)?;
    files.output("verdicts.json");
    write_text(out.join("worst_inputs.csv"), &worst)?;
    files.output("worst_inputs.csv");
    let ok = verdicts.iter().all(|v| v.holds);
    let suite_name = format!("{suite:?}").to_lowercase();
    let config = json!({ "suite": suite_name, "trials": trials });
    files.finish(out, Some(seed), config, if ok { "passed" } else { "failed" })?;
    Ok(if ok {
        Outcome::Success
    } else {
        Outcome::VerificationFailed
    })
}

pub fn rates(run_dir: &Path, window: Option<(f64, f64)>, out: &Path) -> Result<Outcome> {
    let mut files = Recorder::start("rates");
    let path = run_dir.join("diagnostics.csv");
    let table = Table::read(&path)?;
    let (times, _) = table.pairs("t", "second_moment").unwrap_or_default();
    let (t0, t1) = match (times.first(), times.last()) {
        (Some(&a), Some(&b)) if b > a => (a, b),
        _ => return Err(Error::io(&path, "needs at least two samples")),
    };
    let window = window.unwrap_or((t0 + 0.25 * (t1 - t0), t0 + 0.75 * (t1 - t0)));
    let mut fits: BTreeMap<&str, DecayFit> = BTreeMap::new();
    if let Some((t, w)) = table.pairs("t", "w2_to_reference").filter(|(t, _)| !t.is_empty()) {
        let w2sq: Vec<f64> = w.iter().map(|w| w * w).collect();
        fits.insert("w2_squared", fit_decay_rate(&t, &w2sq, window)?);
    }
    if let Some((t, d)) = table.pairs("t", "d1_to_reference").filter(|(t, _)| !t.is_empty()) {
        fits.insert("d1", fit_decay_rate(&t, &d, window)?);
    }
    if fits.is_empty() {
        return Err(Error::io(
            &path,
            "no distance to a reference profile (rescaled runs with chi < 1 record one)",
        ));
    }
    for (name, f) in &fits {
        println!(
            "{name}: rate {:.4} over [{}, {}] ({} samples)",
            f.rate, f.window.0, f.window.1, f.samples
        );
    }
    write_json(out.join("rates.json"), &json!({ "window": window, "fits": fits }))?;
    files.output("rates.json");
    files.finish(out, None, json!({ "window": window }), "completed")?;
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct ScanEntry {
    chi: f64,
    status: RunStatus,
    t_blowup: Option<f64>,
    virial_bound: Option<f64>,
    final_time: f64,
}

fn scan_one(cfg: SimConfig) -> Result<ScanEntry> {
    let (rec, m2) = run(&cfg)?;
    Ok(ScanEntry {
        chi: cfg.chi,
        status: rec.status,
        t_blowup: match rec.status {
            RunStatus::BlowupDetected { t } => Some(t),
            _ => None,
        },
        virial_bound: virial_bound(&cfg, m2),
        final_time: rec.samples.last().map_or(0.0, |s| s.t),
    })
}

pub fn blowup_scan(args: &RunArgs, chis: &[f64], out: &Path) -> Result<Outcome> {
    let base = load_config(args)?;
    let mut files = Recorder::start("blowup-scan");
    let configs = chis
        .iter()
        .map(|&chi| {
            let cfg = SimConfig { chi, ..base.clone() };
            cfg.validate().map(|_| cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    // one worker per coupling; results are collected in input order
    let entries = std::thread::scope(|s| {
        let handles: Vec<_> = configs.into_iter().map(|c| s.spawn(move || scan_one(c))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scan worker panicked"))
            .collect::<Result<Vec<_>>>()
    })?;
    let mut csv = String::from("chi,blowup,t_blowup,virial_bound,final_time\n");
    for e in &entries {
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            fmt_f64(e.chi),
            u8::from(e.t_blowup.is_some()),
            opt(e.t_blowup),
            opt(e.virial_bound),
            fmt_f64(e.final_time)
        );
        println!(
            "chi {:<6} {:<16} t_b {:?} bound {:?}",
            e.chi,
            status_name(&e.status),
            e.t_blowup,
            e.virial_bound
        );
    }
    write_text(out.join("blowup_scan.csv"), &csv)?;
    files.output("blowup_scan.csv");
    write_json(out.join("blowup_scan.json"), &entries)?;
    files.output("blowup_scan.json");
    files.finish(out, Some(base.seed), config_echo(&base), "completed")?;
    Ok(Outcome::Success)
}
