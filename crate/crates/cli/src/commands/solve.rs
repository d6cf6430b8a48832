use serde::Serialize;
use squidnoise::field::{interface_profiles, FieldProfile, PROFILE_CSV_HEADER};
use squidnoise::noise::{
    analytic_variance_integral, numeric_variance_integral, ModelVariant, VarianceBreakdown,
};
use squidnoise::strip::{discretize_cross_section, solve_current_distribution, SolverParams};
use squidnoise::{Error, Result};
use std::io::Write;

use super::Context;
use crate::output::{create, write_json, Cell, Format, Table};

#[derive(Serialize)]
struct SolveReport<'a> {
    nx: usize,
    ny: usize,
    strip_length: f64,
    breakdown: &'a VarianceBreakdown,
    integral_over_mu0_squared: f64,
    side_share: f64,
    /// Thin-film closed form for one face, when inside its regime.
    analytic_top: Option<f64>,
}

pub fn run(ctx: &Context) -> Result<()> {
    let geo = &ctx.config.geometry;
    let (w, b, lambda) = (geo.width, geo.film.thickness, geo.film.penetration_depth);
    for (name, v) in [
        ("width", w),
        ("thickness", b),
        ("penetration depth", lambda),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "{name} must be positive, got {v}"
            )));
        }
    }
    let variant = match geo.variant {
        ModelVariant::AnalyticTop => ModelVariant::NumericTop,
        v => v,
    };
    let numeric = &ctx.config.solver;
    let grid =
        discretize_cross_section(w, b, numeric.patch_over_lambda * lambda, numeric.patch_cap)?;
    let params = SolverParams {
        strip_length: numeric.length_factor * w.max(b),
        ..SolverParams::for_strip(w, b, lambda)
    };
    let dist = solve_current_distribution(&grid, &params)?;
    let profiles = interface_profiles(&dist, &numeric.field.specs(variant.interfaces(), &grid))?;
    let breakdown = numeric_variance_integral(&profiles, variant, b, lambda)?;

    ctx.ensure_out()?;
    let mut jw = create(&ctx.out.join("current_density.csv"))?;
    dist.write_density_csv(&mut jw)?;
    jw.flush()?;
    write_profiles(ctx, &profiles)?;

    let mu0 = squidnoise::constants::MU_0;
    let report = SolveReport {
        nx: grid.nx(),
        ny: grid.ny(),
        strip_length: params.strip_length,
        breakdown: &breakdown,
        integral_over_mu0_squared: breakdown.total / (mu0 * mu0),
        side_share: breakdown.side_share(),
        analytic_top: analytic_variance_integral(w, b, lambda).ok(),
    };
    write_json(&ctx.out.join("breakdown.json"), &report)?;
    println!(
        "solved {}x{} patches; integral/mu0^2 = {:.6e} 1/m",
        grid.nx(),
        grid.ny(),
        report.integral_over_mu0_squared
    );
    Ok(())
}

fn write_profiles(ctx: &Context, profiles: &[FieldProfile]) -> Result<()> {
    match ctx.format {
        Format::Csv => {
            let mut w = create(&ctx.out.join("profiles.csv"))?;
            writeln!(w, "{PROFILE_CSV_HEADER}")?;
            for p in profiles {
                p.write_csv_rows(&mut w)?;
            }
            w.flush()?;
        }
        Format::Json => {
            let mut t = Table::new(&["interface", "coord_m", "B_over_I_T_per_A"]);
            for p in profiles {
                for (c, v) in p.coordinates.iter().zip(&p.field_over_current) {
                    t.push(vec![
                        Cell::from(p.spec.kind.as_str()),
                        (*c).into(),
                        (*v).into(),
                    ]);
                }
            }
            t.write(&ctx.out, "profiles", Format::Json)?;
        }
    }
    Ok(())
}
