use std::path::Path;

use squidnoise::dataset::load_dataset;
use squidnoise::noise::{fit_defect_density, NoiseModel};
use squidnoise::{Error, Result};

use super::Context;
use crate::output::{write_json, Cell, Table};

pub fn run(ctx: &Context) -> Result<()> {
    let section = &ctx.config.fit;
    let path = section
        .dataset
        .as_deref()
        .ok_or_else(|| Error::Config("fit needs a dataset (--dataset or fit.dataset)".into()))?;
    let records = load_dataset(path).map_err(|e| with_path(e, path))?;
    let model = NoiseModel::with_config(section.variant, ctx.config.solver);
    let result = fit_defect_density(&model, &records, section.film, &section.options)?;

    ctx.ensure_out()?;
    write_json(&ctx.out.join("fit.json"), &result)?;

    let mut table = Table::new(&[
        "sample",
        "qubit",
        "capacitor",
        "perimeter_um",
        "mean_width_um",
        "measured_uphi0",
        "predicted_uphi0",
        "residual",
    ]);
    for r in &result.records {
        let capacitor = records
            .iter()
            .find(|q| q.sample == r.sample && q.qubit == r.qubit)
            .and_then(|q| q.capacitor)
            .map_or(Cell::Empty, |c| c.as_str().into());
        table.push(vec![
            r.sample.as_str().into(),
            Cell::Int(r.qubit.into()),
            capacitor,
            r.perimeter_um.into(),
            r.mean_width_um.into(),
            r.measured_uphi0.into(),
            r.predicted_uphi0.into(),
            r.residual.into(),
        ]);
    }
    table.write(&ctx.out, "predictions", ctx.format)?;
    println!(
        "{}: m^2 sigma = {:.4e} J^2/(T^2 m^2); sigma = {:.3e} m^-2 at 1 muB, {:.3e} m^-2 at 1.8 muB",
        result.variant.as_str(),
        result.m2sigma,
        result.sigma_for_mu_b,
        result.sigma_for_1p8_mu_b
    );
    Ok(())
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Parse { row, msg } => Error::Parse {
            row,
            msg: format!("{}: {msg}", path.display()),
        },
        Error::Schema(msg) => Error::Schema(format!("{}: {msg}", path.display())),
        Error::Io(io) => Error::Io(std::io::Error::new(
            io.kind(),
            format!("{}: {io}", path.display()),
        )),
        other => other,
    }
}
