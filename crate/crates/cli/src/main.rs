//! `nmg` — command-line front end for the multigrid solvers: training,
//! single solves, benchmark tables, and diagnostic data dumps.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

mod config;
mod table;

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nmg_core::checkpoint::{load_checkpoint, save_checkpoint, HashPolicy};
use nmg_core::classic::{cg_solve, jacobi_reduction_factor, mg_solve, SolveReport};
use nmg_core::fft::{bin_phi, centered_to_natural};
use nmg_core::field::Field;
use nmg_core::fno::{FnoConfig, FnoParams};
use nmg_core::hierarchy::build_hierarchy;
use nmg_core::linalg::eig_sym;
use nmg_core::mask::{make_mask_1d, MaskVariant};
use nmg_core::neural::{error_spectra, nmg_solve, NeuralHierarchy, SmootherKind};
use nmg_core::problem::LinearSystemOp;
use nmg_core::train::{train, write_train_log};
use nmg_core::Error as CoreError;

use config::{ExperimentConfig, Method, Overrides};
use table::{emit_table, mean_std, BenchRow};

#[derive(Debug)]
pub struct CliError {
    message: String,
    exit_code: i32,
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> CliError {
        CliError {
            message: msg.into(),
            exit_code: 2,
        }
    }
    pub fn numerical(msg: impl Into<String>) -> CliError {
        CliError {
            message: msg.into(),
            exit_code: 3,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> CliError {
        let numerical = matches!(
            e,
            CoreError::SingularMatrix { .. }
                | CoreError::NotSymmetric { .. }
                | CoreError::NotSpd
                | CoreError::CgBreakdown { .. }
                | CoreError::Diverged { .. }
                | CoreError::NonFinite { .. }
        );
        if numerical {
            CliError::numerical(e.to_string())
        } else {
            CliError::config(e.to_string())
        }
    }
}

#[derive(Parser)]
#[command(name = "nmg", about = "Neural multigrid solver for convolution-type systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train level smoothers and write a checkpoint plus a JSON-lines log.
    Train {
        #[command(flatten)]
        over: Overrides,
    },
    /// Solve one system for one right-hand side; prints a JSON report.
    Solve {
        #[command(flatten)]
        over: Overrides,
    },
    /// Run a (method, n, alpha) grid and emit bench.csv / bench.json.
    Bench {
        #[command(flatten)]
        over: Overrides,
    },
    /// Dump per-level error magnitude spectra over one cycle as CSV.
    Spectra {
        #[command(flatten)]
        over: Overrides,
    },
    /// Sample the damped-Jacobi per-mode reduction factor over a phi grid.
    SmoothingFactor {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 0.5)]
        omega: f64,
        #[arg(long, default_value_t = 65)]
        samples: usize,
        #[arg(long, short = 'o')]
        out: Option<PathBuf>,
    },
    /// Extreme eigenpairs of a densified small system, as CSV + JSON.
    Eigs {
        #[command(flatten)]
        over: Overrides,
    },
    /// Dump frequency-mask values per level as CSV.
    Masks {
        #[arg(long, default_value_t = 256)]
        n: usize,
        #[arg(long, default_value_t = 4)]
        levels: usize,
        #[arg(long, short = 'o')]
        out: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train { over } => cmd_train(&over),
        Command::Solve { over } => cmd_solve(&over),
        Command::Bench { over } => cmd_bench(&over),
        Command::Spectra { over } => cmd_spectra(&over),
        Command::SmoothingFactor {
            alpha,
            omega,
            samples,
            out,
        } => cmd_smoothing_factor(alpha, omega, samples, out.as_deref()),
        Command::Eigs { over } => cmd_eigs(&over),
        Command::Masks { n, levels, out } => cmd_masks(n, levels, out.as_deref()),
    };
    if let Err(e) = result {
        eprintln!("error: {}", e.message.replace('\n', " "));
        std::process::exit(e.exit_code);
    }
}

/// Test RHS k: y = A x with x standard normal seeded as base_seed + k.
fn make_rhs(op: &dyn LinearSystemOp, seed: u64) -> Result<(Field, Field), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Field::new(
        (0..op.shape().len())
            .map(|_| rng.sample(StandardNormal))
            .collect(),
        op.shape(),
    )?;
    let y = op.apply(&x)?;
    Ok((x, y))
}

fn load_neural(
    cfg: &ExperimentConfig,
    op: Arc<dyn LinearSystemOp>,
) -> Result<NeuralHierarchy, CliError> {
    let path = cfg
        .run
        .checkpoint
        .as_ref()
        .ok_or_else(|| CliError::config("method nmg requires run.checkpoint (or --checkpoint)"))?;
    let (models, meta, mismatch) =
        load_checkpoint(path, Some(cfg.problem.hash()), HashPolicy::Warn)?;
    if mismatch {
        eprintln!(
            "warning: checkpoint {} was trained on a different problem (hash mismatch)",
            path.display()
        );
    }
    let base = build_hierarchy(op, meta.num_levels)?;
    let smoothers: Vec<SmootherKind> = models
        .into_iter()
        .map(|(config, params)| SmootherKind::Fno { config, params })
        .collect();
    Ok(NeuralHierarchy::new(base, smoothers, cfg.run.filtered)?)
}

fn run_one(
    cfg: &ExperimentConfig,
    op: &Arc<dyn LinearSystemOp>,
    nh: Option<&NeuralHierarchy>,
    y: &Field,
) -> Result<SolveReport, CliError> {
    let r = &cfg.run;
    Ok(match r.method {
        Method::Cg => cg_solve(op.as_ref(), y, r.tol, r.max_cycles)?,
        Method::Mg => {
            let hier = build_hierarchy(op.clone(), r.levels)?;
            mg_solve(&hier, y, r.nu1, 0, r.tol, r.max_cycles, r.omega)?
        }
        Method::Nmg => {
            let nh = nh.expect("prepared by caller");
            nmg_solve(nh, y, r.levels, r.tol, r.max_cycles)?
        }
    })
}

fn out_dir(cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    let dir = cfg
        .run
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::config(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn cmd_train(over: &Overrides) -> Result<(), CliError> {
    let cfg = over.resolve()?;
    let tcfg = cfg
        .train
        .as_ref()
        .ok_or_else(|| CliError::config("train requires a [train] section in the config file"))?;
    let dir = out_dir(&cfg)?;
    let (nh, log) = train(&cfg.problem, tcfg)?;
    let models: Vec<(FnoConfig, FnoParams)> = nh
        .smoothers
        .iter()
        .map(|s| match s {
            SmootherKind::Fno { config, params } => (config.clone(), params.clone()),
            _ => unreachable!("training produces FNO smoothers"),
        })
        .collect();
    let ckpt = dir.join("smoothers.nmgckpt");
    save_checkpoint(
        &ckpt,
        &models,
        cfg.problem.hash(),
        tcfg.num_levels,
        tcfg.seed,
    )?;
    write_train_log(&dir.join("train_log.jsonl"), &log)?;
    let last = log.last().map(|e| e.losses.clone()).unwrap_or_default();
    println!(
        "{}",
        serde_json::json!({
            "checkpoint": ckpt,
            "epochs": log.len(),
            "final_losses": last,
        })
    );
    Ok(())
}

fn cmd_solve(over: &Overrides) -> Result<(), CliError> {
    let cfg = over.resolve()?;
    let op = cfg.problem.build()?;
    let nh = match cfg.run.method {
        Method::Nmg => Some(load_neural(&cfg, op.clone())?),
        _ => None,
    };
    let (_, y) = make_rhs(op.as_ref(), cfg.run.rhs_seed)?;
    let report = run_one(&cfg, &op, nh.as_ref(), &y)?;
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::config(format!("json: {e}")))?;
    if let Some(dir) = &cfg.run.output_dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::config(format!("cannot create {}: {e}", dir.display())))?;
        std::fs::write(dir.join("solve.json"), &text)
            .map_err(|e| CliError::config(format!("write: {e}")))?;
    }
    println!("{text}");
    if !report.converged {
        return Err(CliError::numerical(format!(
            "did not reach tol {} within {} iterations",
            cfg.run.tol, cfg.run.max_cycles
        )));
    }
    Ok(())
}

fn cmd_bench(over: &Overrides) -> Result<(), CliError> {
    let cfg = over.resolve()?;
    let dir = out_dir(&cfg)?;
    let ns = if cfg.run.bench_ns.is_empty() {
        vec![cfg.problem.n]
    } else {
        cfg.run.bench_ns.clone()
    };
    let alphas = if cfg.run.bench_alphas.is_empty() {
        vec![cfg.problem.alpha]
    } else {
        cfg.run.bench_alphas.clone()
    };
    let mut rows = Vec::new();
    for &n in &ns {
        for &alpha in &alphas {
            let mut cell = cfg.clone();
            cell.problem.n = n;
            cell.problem.alpha = alpha;
            let op = cell.problem.build()?;
            let nh = match cell.run.method {
                Method::Nmg => Some(load_neural(&cell, op.clone())?),
                _ => None,
            };
            let mut cycles = Vec::with_capacity(cell.run.num_rhs);
            let mut seconds = Vec::with_capacity(cell.run.num_rhs);
            for k in 0..cell.run.num_rhs {
                let (_, y) = make_rhs(op.as_ref(), cell.run.rhs_seed + k as u64)?;
                let report = run_one(&cell, &op, nh.as_ref(), &y)?;
                if !report.converged {
                    eprintln!(
                        "warning: {} n={n} alpha={alpha} rhs {k} hit the {}-iteration cap",
                        cell.run.method, cell.run.max_cycles
                    );
                }
                cycles.push(report.iterations as f64);
                seconds.push(report.wall_time);
            }
            let (mean_cycles, std_cycles) = mean_std(&cycles);
            let (mean_seconds, _) = mean_std(&seconds);
            rows.push(BenchRow {
                method: cell.run.method.to_string(),
                n,
                alpha,
                levels: cell.run.levels,
                mean_cycles,
                std_cycles,
                mean_seconds,
            });
        }
    }
    emit_table(&dir, &rows)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&rows).map_err(|e| CliError::config(e.to_string()))?
    );
    Ok(())
}

fn cmd_spectra(over: &Overrides) -> Result<(), CliError> {
    let cfg = over.resolve()?;
    if cfg.problem.dimension != 1 {
        return Err(CliError::config("spectra export supports 1D problems only"));
    }
    let dir = out_dir(&cfg)?;
    let op = cfg.problem.build()?;
    let nh = match cfg.run.method {
        Method::Nmg => load_neural(&cfg, op.clone())?,
        _ => {
            // Untrained reference: pure coarse-grid correction.
            let base = build_hierarchy(op.clone(), cfg.run.levels)?;
            let count = base.num_levels() - 1;
            NeuralHierarchy::new(base, vec![SmootherKind::Zero; count], cfg.run.filtered)?
        }
    };
    let (x, y) = make_rhs(op.as_ref(), cfg.run.rhs_seed)?;
    let spectra = error_spectra(&nh, &x, &y, cfg.run.levels)?;
    let n = x.len();
    let path = dir.join("spectra.csv");
    let mut w = csv::Writer::from_path(&path)
        .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))?;
    let mut header = vec!["phi".to_string(), "initial".to_string()];
    header.extend((1..spectra.len() - 1).map(|l| format!("after_level_{l}")));
    header.push("after_cycle".into());
    w.write_record(&header)
        .map_err(|e| CliError::config(format!("csv: {e}")))?;
    for c in 0..n {
        let phi = bin_phi(n, centered_to_natural(n, c));
        let mut record = vec![format!("{phi}")];
        record.extend(spectra.iter().map(|s| format!("{}", s.data()[c])));
        w.write_record(&record)
            .map_err(|e| CliError::config(format!("csv: {e}")))?;
    }
    w.flush().map_err(|e| CliError::config(format!("csv: {e}")))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_smoothing_factor(
    alpha: f64,
    omega: f64,
    samples: usize,
    out: Option<&Path>,
) -> Result<(), CliError> {
    if samples < 2 {
        return Err(CliError::config("--samples must be >= 2"));
    }
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(CliError::config("--alpha must be a finite non-negative number"));
    }
    let mut lines = vec!["phi,reduction_factor".to_string()];
    for i in 0..samples {
        let phi = -std::f64::consts::PI
            + 2.0 * std::f64::consts::PI * i as f64 / (samples - 1) as f64;
        lines.push(format!("{phi},{}", jacobi_reduction_factor(phi, alpha, omega)));
    }
    let text = lines.join("\n") + "\n";
    match out {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| CliError::config(format!("cannot write {}: {e}", p.display())))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_eigs(over: &Overrides) -> Result<(), CliError> {
    let cfg = over.resolve()?;
    let dir = out_dir(&cfg)?;
    let op = cfg.problem.build()?;
    let dense = op.densify()?;
    let (vals, vecs) = eig_sym(&dense)?;
    let n = vals.len();
    let path = dir.join("eigs.csv");
    let mut w = csv::Writer::from_path(&path)
        .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))?;
    w.write_record(["index", "smallest_eigenvector", "largest_eigenvector"])
        .map_err(|e| CliError::config(format!("csv: {e}")))?;
    for i in 0..n {
        w.write_record([
            i.to_string(),
            format!("{}", vecs[(i, 0)]),
            format!("{}", vecs[(i, n - 1)]),
        ])
        .map_err(|e| CliError::config(format!("csv: {e}")))?;
    }
    w.flush().map_err(|e| CliError::config(format!("csv: {e}")))?;
    println!(
        "{}",
        serde_json::json!({
            "lambda_min": vals[0],
            "lambda_max": vals[n - 1],
            "csv": path,
        })
    );
    Ok(())
}

fn cmd_masks(n: usize, levels: usize, out: Option<&Path>) -> Result<(), CliError> {
    if levels < 2 {
        return Err(CliError::config("--levels must be >= 2"));
    }
    let mut lines = vec!["level,variant,phi,value".to_string()];
    for l in 1..levels {
        for (variant, name, len) in [
            (MaskVariant::Fine, "fine", n),
            (MaskVariant::Level, "level", n >> (l - 1)),
        ] {
            let mask = make_mask_1d(l, levels, len, variant)?;
            let values = mask.centered();
            for c in 0..len {
                let phi = bin_phi(len, centered_to_natural(len, c));
                // The fine mask is stated against the fine-grid frequency;
                // the level mask against the level grid's own frequency.
                lines.push(format!("{l},{name},{phi},{}", values.data()[c]));
            }
        }
    }
    let text = lines.join("\n") + "\n";
    match out {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| CliError::config(format!("cannot write {}: {e}", p.display())))?,
        None => print!("{text}"),
    }
    Ok(())
}
