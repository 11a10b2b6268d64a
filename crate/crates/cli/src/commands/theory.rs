use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use candidate_distill::theory::{
    condition_top1, condition_top2, phase_sweep, simulate_finite, simulate_infinite, sweep_csv, Mode, NoiseMatrix,
    TheoryParams,
};
use clap::{Args, Subcommand};
use serde::{Deserialize, Serialize};

use super::Context;
use crate::output::Outputs;

#[derive(Debug, Subcommand)]
pub enum TheoryCommand {
    /// Evaluate both noise conditions for one noise matrix.
    Check(CheckArgs),
    /// Large-sample accuracies and conditions over a grid of noise levels.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct ParamArgs {
    #[arg(long, visible_alias = "C")]
    num_classes: Option<usize>,
    #[arg(long, visible_alias = "m")]
    num_samples: Option<usize>,
    /// Same-class feature similarity.
    #[arg(long, visible_alias = "a")]
    intra: Option<f64>,
    /// Cross-class feature similarity.
    #[arg(long, visible_alias = "b")]
    inter: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Symmetric noise rate.
    #[arg(long, conflicts_with = "noise_matrix")]
    rho: Option<f64>,
    /// JSON file with the rows of a noise matrix.
    #[arg(long)]
    noise_matrix: Option<PathBuf>,
    /// Also report sampled accuracies on `num_samples` points.
    #[arg(long)]
    finite: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, default_value_t = 0.0)]
    rho_start: f64,
    #[arg(long, default_value_t = 0.49)]
    rho_stop: f64,
    #[arg(long, default_value_t = 0.01)]
    rho_step: f64,
    /// JSON array of noise matrices, used instead of the symmetric grid.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long, default_value = "sweep.csv")]
    out: PathBuf,
}

#[derive(Serialize)]
struct ParamFlags {
    num_classes: Option<usize>,
    num_samples: Option<usize>,
    intra: Option<f64>,
    inter: Option<f64>,
    lambda: Option<f64>,
}

fn params(ctx: &Context, args: &ParamArgs) -> Result<TheoryParams<f64>> {
    #[derive(Serialize, Deserialize)]
    struct Raw {
        num_classes: usize,
        num_samples: usize,
        intra: f64,
        inter: f64,
        lambda: f64,
    }
    let base = Raw { num_classes: 2, num_samples: 100, intra: 0.8, inter: 0.2, lambda: 0.01 };
    let flags = ParamFlags {
        num_classes: args.num_classes,
        num_samples: args.num_samples,
        intra: args.intra,
        inter: args.inter,
        lambda: args.lambda,
    };
    let r: Raw = ctx.file.layer(&base, &flags)?;
    Ok(TheoryParams::new(r.num_classes, r.num_samples, r.intra, r.inter, r.lambda)?)
}

fn load_matrix(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn run(ctx: &Context, cmd: TheoryCommand) -> Result<()> {
    match cmd {
        TheoryCommand::Check(args) => check(ctx, args),
        TheoryCommand::Sweep(args) => sweep(ctx, args),
    }
}

fn check(ctx: &Context, args: CheckArgs) -> Result<()> {
    let p = params(ctx, &args.params)?;
    let r = match (&args.noise_matrix, args.rho) {
        (Some(path), _) => NoiseMatrix::from_rows(&load_matrix(path)?)?,
        (None, rho) => NoiseMatrix::symmetric(p.num_classes, rho.or(ctx.file.get("rho")?).unwrap_or(0.0))?,
    };
    if r.num_classes() != p.num_classes {
        bail!("noise matrix has {} classes, params have {}", r.num_classes(), p.num_classes);
    }
    let s = p.shrinkage();
    println!(
        "C={} m={} a={} b={} lambda={} noise rate={:.6}",
        p.num_classes,
        p.num_samples,
        p.intra,
        p.inter,
        p.lambda,
        r.noise_rate()
    );
    println!("theta={:.6} phi={:.6} psi={:.6}", s.theta, s.phi, s.psi);
    println!("{}", condition_top1(&r, s.theta, s.phi).to_string().trim_end());
    println!("{}", condition_top2(&r).to_string().trim_end());
    let mut accs = Vec::new();
    for mode in Mode::ALL {
        accs.push(simulate_infinite(&p, &r, mode)?.accuracy);
    }
    println!("large-sample accuracy: teacher={:.6} top1={:.6} top2={:.6}", accs[0], accs[1], accs[2]);
    if args.finite {
        let mut line = format!("sampled accuracy (m={}):", p.num_samples);
        for mode in Mode::ALL {
            let sim = simulate_finite(&p, &r, mode, ctx.seed)?;
            line.push_str(&format!(" {}={:.6}", mode_name(mode), sim.accuracy));
            if sim.ambiguous_cells > 0 {
                line.push_str(&format!(" ({} tie-broken targets)", sim.ambiguous_cells));
            }
        }
        println!("{line}");
    }
    Ok(())
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Teacher => "teacher",
        Mode::Top1 => "top1",
        Mode::Top2 => "top2",
    }
}

fn sweep(ctx: &Context, args: SweepArgs) -> Result<()> {
    let p = params(ctx, &args.params)?;
    let mut out = Outputs::new("theory sweep", ctx.seed);
    let grid: Vec<NoiseMatrix<f64>> = match &args.grid {
        Some(path) => {
            out.input(path);
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let mats: Vec<Vec<Vec<f64>>> =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            mats.iter().map(|m| NoiseMatrix::from_rows(m)).collect::<candidate_distill::Result<_>>()?
        }
        None => {
            if !(args.rho_step > 0.0) || args.rho_stop < args.rho_start {
                bail!("need rho_step > 0 and rho_stop >= rho_start");
            }
            let n = ((args.rho_stop - args.rho_start) / args.rho_step + 1e-9).floor() as usize + 1;
            (0..n)
                .map(|i| NoiseMatrix::symmetric(p.num_classes, args.rho_start + i as f64 * args.rho_step))
                .collect::<candidate_distill::Result<_>>()?
        }
    };
    let rows = phase_sweep(&p, &grid)?;
    let csv = sweep_csv(&rows);
    print!("{csv}");
    out.add(ctx.out_path(&args.out), csv);
    out.commit(&serde_json::json!({
        "num_classes": p.num_classes,
        "num_samples": p.num_samples,
        "intra": p.intra,
        "inter": p.inter,
        "lambda": p.lambda,
        "rho_start": args.rho_start,
        "rho_stop": args.rho_stop,
        "rho_step": args.rho_step,
    }))?;
    Ok(())
}
