use std::path::Path;

use serde::Serialize;
use squidnoise::dephasing::io::{read_dataset_dir, write_dataset_dir};
use squidnoise::dephasing::{run_pipeline, synthesize_qubit_dataset, SynthesisTruth};
use squidnoise::Result;

use super::Context;
use crate::output::{write_json, Table};

#[derive(Serialize)]
struct Provenance<'a> {
    seed: u64,
    truth: &'a SynthesisTruth,
}

/// Runs the spectroscopy pipeline on `input`, or on a synthetic dataset
/// written to `<out>/data` when `input` is `None`.
pub fn run(ctx: &Context, input: Option<&Path>) -> Result<()> {
    ctx.ensure_out()?;
    let data_dir = match input {
        Some(dir) => dir.to_path_buf(),
        None => {
            let syn = &ctx.config.synthesis;
            let data = synthesize_qubit_dataset(&syn.truth, &syn.plan, ctx.seed)?;
            let dir = ctx.out.join("data");
            write_dataset_dir(&dir, &data)?;
            write_json(
                &ctx.out.join("synthesis.json"),
                &Provenance {
                    seed: ctx.seed,
                    truth: &syn.truth,
                },
            )?;
            dir
        }
    };
    let data = read_dataset_dir(&data_dir)?;
    let result = run_pipeline(&data.spectrum, &data.traces, &ctx.config.extraction)?;

    write_json(&ctx.out.join("hyperbola.json"), &result.hyperbola)?;
    let mut table = Table::new(&[
        "flux_phi0",
        "slope_rad_per_s_per_phi0",
        "amplitude",
        "offset",
        "gamma_exp_per_s",
        "gamma_exp_error",
        "gamma_phi_per_s",
        "gamma_phi_error",
        "reduced_chi2",
    ]);
    for t in &result.traces {
        let f = &t.fit;
        table.push(vec![
            t.flux.into(),
            t.slope.into(),
            f.amplitude.into(),
            f.offset.into(),
            f.gamma_exp.into(),
            f.gamma_exp_error.into(),
            f.gamma_phi.into(),
            f.gamma_phi_error.into(),
            f.reduced_chi2.into(),
        ]);
    }
    table.write(&ctx.out, "decay_fits", ctx.format)?;
    write_json(&ctx.out.join("extraction.json"), &result.extraction)?;

    let c = result.extraction.combined;
    println!("sqrt(A) = {:.4} +- {:.4} uPhi0", c.value, c.error);
    for flag in &result.extraction.flags {
        println!("note: {flag}");
    }
    Ok(())
}
