//! Subcommand implementations: simulate, laplace, validate, compare.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};

use cbdi::cumulant::Cumulant;
use cbdi::mechanisms::CbdiModel;
use cbdi::path_construction::{
    coupled_compare, picard_solve, Replicate,
};
use cbdi::random_drivers::{sample_atoms, stream};
use cbdi::sde_engine::{simulate_cbdi_sde, SamplePath};
use cbdi::stats;
use cbdi::validation::{run_suite, SuiteConfig};
use cbdi::Error as CoreError;

use crate::config::{rates_preset, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Sde,
    Pathspace,
    Both,
}

fn out_dir(cfg: &RunConfig, flag: &Option<PathBuf>) -> anyhow::Result<PathBuf> {
    let dir = flag.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.directory));
    fs::create_dir_all(&dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))?;
    Ok(dir)
}

fn write(path: &Path, contents: &str) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

/// Simulate replicate paths over one or both routes; writes capped
/// per-replicate CSVs and a summary, and a cross-route table for `both`.
pub fn cmd_simulate(cfg: &RunConfig, route: Route, out: &Option<PathBuf>) -> anyhow::Result<i32> {
    let model = cfg.resolve_model()?;
    let dir = out_dir(cfg, out)?;
    let grid = cfg.grid();
    let n = cfg.mc.replicates;
    let seed = cfg.mc.seed;
    let x0 = cfg.mc.x0;

    let mut summary = String::from("# cbdi simulate summary v1\n");
    summary.push_str(&format!("replicates: {n}\nseed: {seed}\nroute: {route:?}\n"));

    let mut sde_stats: Option<(f64, f64)> = None;
    let mut path_stats: Option<(f64, f64)> = None;

    if route == Route::Sde || route == Route::Both {
        let route_seed = stream::derive(seed, &[11]);
        let keep = cfg.output.max_path_files;
        let scheme = cfg.scheme();
        let trunc = cfg.truncations();
        let bounds = cfg.bounds();
        let results: Vec<(f64, usize, Option<String>)> =
            stats::ensemble(n, route_seed, |rseed, idx| {
                let mut driver = sample_atoms(
                    rseed,
                    grid,
                    &model.branching,
                    &model.immigration_jumps,
                    bounds,
                    trunc,
                )?;
                let path = simulate_cbdi_sde(&model, x0, &mut driver, &scheme)?;
                let csv = (idx < keep).then(|| path.to_csv());
                Ok((path.terminal(), path.clamped_steps, csv))
            })
            .map_err(friendly)?;
        for (idx, (_, _, csv)) in results.iter().enumerate() {
            if let Some(csv) = csv {
                write(&dir.join(format!("path_sde_{idx:04}.csv")), csv)?;
            }
        }
        let terminals: Vec<f64> = results.iter().map(|r| r.0).collect();
        let (mean, se) = stats::mean_se(&terminals);
        let clamped: usize = results.iter().map(|r| r.1).sum();
        sde_stats = Some((mean, se));
        summary.push_str(&format!(
            "sde_terminal_mean: {mean:.17e}\nsde_terminal_se: {se:.17e}\n\
             sde_clamped_fraction: {:.6e}\n",
            clamped as f64 / (n * grid.n_cells) as f64
        ));
    }

    if route == Route::Pathspace || route == Route::Both {
        let route_seed = stream::derive(seed, &[13]);
        let keep = cfg.output.max_path_files;
        let scheme = cfg.scheme();
        let trunc = cfg.truncations();
        let mut bounds = cfg.bounds();
        // excursion atoms only exist below a finite slope; with ρ ≡ 0 the
        // construction runs without them, otherwise the field evaluation
        // reports the unsupported regime
        if !model.branching.slope_at_infinity().is_finite() {
            bounds.excursion = 0.0;
        }
        let picard = cfg.picard();
        let results: Vec<(f64, usize, Option<String>)> =
            stats::ensemble(n, route_seed, |rseed, idx| {
                let mut rep = Replicate::new(
                    &model.branching,
                    &model.immigration_jumps,
                    x0,
                    grid,
                    rseed,
                    trunc,
                    bounds,
                    scheme,
                )?;
                let out = picard_solve(&model, &mut rep, &picard)?;
                let csv = (idx < keep).then(|| out.path.to_csv());
                Ok((out.path.terminal(), out.iterations(), csv))
            })
            .map_err(friendly)?;
        for (idx, (_, _, csv)) in results.iter().enumerate() {
            if let Some(csv) = csv {
                write(&dir.join(format!("path_field_{idx:04}.csv")), csv)?;
            }
        }
        let terminals: Vec<f64> = results.iter().map(|r| r.0).collect();
        let (mean, se) = stats::mean_se(&terminals);
        let max_iter = results.iter().map(|r| r.1).max().unwrap_or(0);
        path_stats = Some((mean, se));
        summary.push_str(&format!(
            "pathspace_terminal_mean: {mean:.17e}\npathspace_terminal_se: {se:.17e}\n\
             pathspace_max_picard_iterations: {max_iter}\n"
        ));
    }

    if let (Some((ma, sa)), Some((mb, sb))) = (sde_stats, path_stats) {
        let combined = (sa * sa + sb * sb).sqrt();
        let agree = (ma - mb).abs() <= 3.0 * combined;
        summary.push_str("cross_route_table:\n");
        summary.push_str("route,mean,std_error\n");
        summary.push_str(&format!("sde,{ma:.17e},{sa:.17e}\n"));
        summary.push_str(&format!("pathspace,{mb:.17e},{sb:.17e}\n"));
        summary.push_str(&format!(
            "cross_route_gap: {:.17e}\ncross_route_3se: {:.17e}\ncross_route_agree: {agree}\n",
            (ma - mb).abs(),
            3.0 * combined
        ));
    }

    write(&dir.join("simulate_summary.txt"), &summary)?;
    print!("{summary}");
    Ok(0)
}

/// Print the analytic transforms for the configured model at one point.
pub fn cmd_laplace(cfg: &RunConfig, x: f64, t: f64, lambda: f64) -> anyhow::Result<i32> {
    if x < 0.0 || t < 0.0 || lambda < 0.0 {
        bail!("laplace arguments must be nonnegative");
    }
    let model = cfg.resolve_model()?;
    let cum = Cumulant::new(model.branching.clone()).with_tol(cfg.numeric.tol);
    let v = cum.v(t, lambda).map_err(friendly)?;
    let cb = cum.laplace_cb(x, t, lambda).map_err(friendly)?;
    println!("v: {v:.12}");
    println!("laplace_cb: {cb:.12}");
    if let Some(imm) = model.constant_rate_mechanism() {
        if imm.drift > 0.0 || !imm.jumps.is_zero() {
            let cbi = cum.laplace_cbi(&imm, x, t, lambda).map_err(friendly)?;
            println!("laplace_cbi: {cbi:.12}");
        }
    }
    println!("tol: {:.1e}", cfg.numeric.tol);
    Ok(0)
}

/// Run the validation suite and write the report files.
pub fn cmd_validate(cfg: &RunConfig, quick: bool, out: &Option<PathBuf>) -> anyhow::Result<i32> {
    let dir = out_dir(cfg, out)?;
    let mut suite = if quick { SuiteConfig::quick() } else { SuiteConfig::default() };
    suite.seed = cfg.mc.seed;
    suite.truncations = cfg.truncations();
    suite.scheme = cfg.scheme();
    let report = run_suite(&suite).map_err(friendly)?;
    write(&dir.join("report.txt"), &report.render())?;
    write(&dir.join("report.csv"), &report.to_csv())?;
    print!("{}", report.render());
    Ok(if report.overall_pass() { 0 } else { 1 })
}

/// Coupled comparison of two rate presets on shared noise; exits zero only
/// when the ordering holds at every grid point of every replicate.
pub fn cmd_compare(
    cfg: &RunConfig,
    rates_lo: &str,
    rates_hi: &str,
    out: &Option<PathBuf>,
) -> anyhow::Result<i32> {
    let base = cfg.resolve_model()?;
    let lo = CbdiModel {
        branching: base.branching.clone(),
        immigration_jumps: base.immigration_jumps.clone(),
        rates: rates_preset(rates_lo, &base.immigration_jumps)?,
    };
    let hi = CbdiModel {
        branching: base.branching.clone(),
        immigration_jumps: base.immigration_jumps.clone(),
        rates: rates_preset(rates_hi, &base.immigration_jumps)?,
    };
    let dir = out_dir(cfg, out)?;
    let grid = cfg.grid();
    let trunc = cfg.truncations();
    let mut bounds = cfg.bounds();
    if !base.branching.slope_at_infinity().is_finite() {
        bounds.excursion = 0.0;
    }
    let scheme = cfg.scheme();
    let picard = cfg.picard();
    let x0 = cfg.mc.x0;

    let gaps: Vec<f64> = stats::ensemble(cfg.mc.replicates, cfg.mc.seed, |rseed, _| {
        let mut rep = Replicate::new(
            &hi.branching,
            &hi.immigration_jumps,
            x0,
            grid,
            rseed,
            trunc,
            bounds,
            scheme,
        )?;
        Ok(coupled_compare(&lo, &hi, &mut rep, &picard)?.positive_gap)
    })
    .map_err(friendly)?;

    let worst = gaps.iter().cloned().fold(0.0, f64::max);
    let violations = gaps.iter().filter(|&&g| g > 0.0).count();
    let mut report = String::from("# cbdi compare v1\n");
    report.push_str(&format!(
        "rates_lo: {rates_lo}\nrates_hi: {rates_hi}\nreplicates: {}\n\
         max_positive_gap: {worst:.17e}\nviolating_replicates: {violations}\n\
         ordering_holds: {}\n",
        cfg.mc.replicates,
        violations == 0
    ));
    write(&dir.join("compare.txt"), &report)?;
    print!("{report}");
    Ok(if violations == 0 { 0 } else { 1 })
}

/// Map core errors to actionable CLI messages (exit formatting happens in
/// main).
fn friendly(e: CoreError) -> anyhow::Error {
    match &e {
        CoreError::UnsupportedRegime(msg) => {
            anyhow::anyhow!("unsupported regime: {msg}")
        }
        _ => anyhow::Error::new(e),
    }
}

/// Dump a sample path CSV for debugging.
pub fn dump_path_csv(path: &SamplePath, file: &Path) -> anyhow::Result<()> {
    write(file, &path.to_csv())
}
