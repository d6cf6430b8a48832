use squidnoise::convergence::{run_convergence, ConvergenceReport};
use squidnoise::{Error, Result};

use super::Context;
use crate::output::{write_json, Cell, Table};

/// Writes the report, then fails with a numerical error if any check failed.
pub fn run(ctx: &Context) -> Result<ConvergenceReport> {
    let report = run_convergence(&ctx.config.convergence)?;
    ctx.ensure_out()?;
    write_json(&ctx.out.join("convergence.json"), &report)?;
    let mut table = Table::new(&[
        "check",
        "baseline_parameter",
        "refined_parameter",
        "baseline_total",
        "refined_total",
        "relative_delta",
        "threshold",
        "passed",
    ]);
    for c in &report.checks {
        table.push(vec![
            c.name.as_str().into(),
            c.baseline_parameter.into(),
            c.refined_parameter.into(),
            c.baseline_total.into(),
            c.refined_total.into(),
            c.relative_delta.into(),
            c.threshold.into(),
            Cell::from(if c.passed { "true" } else { "false" }),
        ]);
        println!(
            "{:<28} delta {:.3e} (threshold {}) {}",
            c.name,
            c.relative_delta,
            c.threshold,
            if c.passed { "ok" } else { "FAILED" }
        );
    }
    if ctx.format == crate::output::Format::Csv {
        table.write(&ctx.out, "convergence", ctx.format)?;
    }
    if !report.passed {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        return Err(Error::Numerical(format!(
            "convergence checks failed on a {}x{} grid: {}",
            report.nx,
            report.ny,
            failed.join(", ")
        )));
    }
    Ok(report)
}
