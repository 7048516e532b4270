use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use sil_core::grid_domain::{congruence_check, RigidMotion};
use sil_core::io::{load_domain, load_motion, load_operator, write_field_csv, write_vector_field_csv};
use sil_core::operators::{reconstruct, rigid_motion_fit, Operator};
use sil_core::suites::{run_suite, summary_line, Suite, SuiteConfig};
use sil_core::{LabError, Result};

#[derive(Parser)]
#[command(name = "sil", version, about = "Sobolev isometry laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named verification suite.
    Verify(VerifyArgs),
    /// Recover weight and map of an operator from probe images.
    Reconstruct(ReconstructArgs),
    /// Compare a domain with the rigid image of another.
    Congruence(CongruenceArgs),
}

#[derive(Args)]
struct VerifyArgs {
    /// norm-calculus | clarkson | plaplace | examples | reconstruction | congruence
    #[arg(long)]
    suite: String,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Operator spec (file or inline JSON).
    #[arg(long)]
    spec: Option<String>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ReconstructArgs {
    #[arg(long)]
    spec: String,
    /// Target domain for specs that do not name one.
    #[arg(long)]
    domain: Option<String>,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, default_value_t = 0.01)]
    h: f64,
    /// Threshold on the rigidity defects for the verdict.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CongruenceArgs {
    #[arg(long)]
    domain1: String,
    #[arg(long)]
    domain2: String,
    /// Motion applied to the second domain; identity by default.
    #[arg(long)]
    motion: Option<String>,
    /// Defaults to four cell widths.
    #[arg(long)]
    tol: Option<f64>,
    /// Width for builtin domains without one.
    #[arg(long, default_value_t = 0.01)]
    h: f64,
}

enum Outcome {
    Pass,
    Fail,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Verify(a) => verify(a),
        Command::Reconstruct(a) => reconstruct_cmd(a),
        Command::Congruence(a) => congruence(a),
    };
    match result {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

fn verify(a: VerifyArgs) -> Result<Outcome> {
    let suite: Suite = a.suite.parse()?;
    let mut cfg = SuiteConfig::new(suite);
    cfg.p = a.p.unwrap_or(cfg.p);
    cfg.h = a.h.unwrap_or(cfg.h);
    cfg.tol = a.tol;
    cfg.seed = a.seed;
    cfg.spec = a.spec;
    cfg.report_path = a.report;
    let report = run_suite(&cfg)?;
    for c in &report.checks {
        println!(
            "[{}] {} ({}): {:e} {} {:e}",
            if c.passed() { "pass" } else { "FAIL" },
            c.name,
            c.tag,
            c.value,
            c.relation,
            c.threshold
        );
    }
    println!("{}", summary_line(&report));
    if let Some(path) = &cfg.report_path {
        write_text(path, &report.to_json()?)?;
    }
    Ok(if report.passed { Outcome::Pass } else { Outcome::Fail })
}

fn reconstruct_cmd(a: ReconstructArgs) -> Result<Outcome> {
    let domain = a.domain.as_deref().map(|d| load_domain(d, a.h)).transpose()?.map(Arc::new);
    let op = load_operator(&a.spec, domain.as_ref(), a.h)?;
    let rec = reconstruct(&op, a.p)?;
    let fit = rigid_motion_fit(&rec)?;
    fs::create_dir_all(&a.out)?;
    write_field_csv(fs::File::create(a.out.join("g_hat.csv"))?, &rec.g_hat)?;
    write_vector_field_csv(fs::File::create(a.out.join("xi_hat.csv"))?, &rec.xi_hat)?;

    let target = op.target();
    let dim = target.dim();
    let identity_deviation = (0..target.len())
        .filter(|&i| rec.usable(i))
        .map(|i| {
            let (x, y) = (rec.xi_hat.value(i), target.center(i));
            (0..dim).map(|k| (x[k] - y[k]).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    let rigid = fit.orthogonality_defect <= a.tol && fit.grad_g_defect <= a.tol && fit.weight_defect <= a.tol;
    let zero_fraction = rec.zero_set_cells as f64 / target.len() as f64;
    let angles: Vec<f64> = fit.components.iter().map(|c| c.motion.angle()).collect();
    let report = json!({
        "rigid": rigid,
        "zero_set_cells": rec.zero_set_cells,
        "zero_set_fraction": zero_fraction,
        "identity_deviation": identity_deviation,
        "angles": angles,
        "fit": fit,
    });
    write_text(&a.out.join("fit.json"), &(serde_json::to_string_pretty(&report)? + "\n"))?;
    println!(
        "{}: orthogonality defect {:e}, grad g defect {:e}, weight defect {:e}, zero set {} cells",
        if rigid { "rigid" } else { "non-rigid" },
        fit.orthogonality_defect,
        fit.grad_g_defect,
        fit.weight_defect,
        rec.zero_set_cells
    );
    Ok(if zero_fraction > 0.01 { Outcome::Fail } else { Outcome::Pass })
}

fn congruence(a: CongruenceArgs) -> Result<Outcome> {
    let first = load_domain(&a.domain1, a.h)?;
    let second = load_domain(&a.domain2, a.h)?;
    let motion = match &a.motion {
        Some(m) => load_motion(m)?,
        None => RigidMotion::identity(second.dim()),
    };
    if motion.dim() != second.dim() {
        return Err(LabError::DimMismatch(second.dim(), motion.dim()));
    }
    let tol = a.tol.unwrap_or(4.0 * first.h().min(second.h()));
    let verdict = congruence_check(&first, &second, &motion, tol)?;
    println!(
        "symmetric difference {:e} (tol {:e}): {}",
        verdict.symmetric_difference,
        tol,
        if verdict.congruent { "congruent" } else { "not congruent" }
    );
    Ok(if verdict.congruent { Outcome::Pass } else { Outcome::Fail })
}
