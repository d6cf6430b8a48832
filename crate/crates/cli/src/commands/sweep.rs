use rayon::prelude::*;
use squidnoise::constants::{BOHR_MAGNETON, MU_0};
use squidnoise::noise::{DefectParams, NoiseModel};
use squidnoise::{Error, FilmParams, Result, SquidGeometry};

use super::Context;
use crate::config::{SweepKind, SweepSection};
use crate::output::{line_plot_svg, Series, Table};

pub const COLUMNS: [&str; 10] = [
    "parameter",
    "value",
    "variant",
    "inner_x_um",
    "inner_y_um",
    "width_um",
    "thickness_nm",
    "integral_over_mu0_squared",
    "loop_integral",
    "sqrt_a_uphi0",
];

pub fn validate(spec: &SweepSection) -> Result<SweepKind> {
    let kind = spec
        .kind
        .ok_or_else(|| Error::Config("sweep needs a kind (--kind or sweep.kind)".into()))?;
    if spec.values.len() < 2 {
        return Err(Error::Config(format!(
            "a sweep needs at least 2 values, got {}",
            spec.values.len()
        )));
    }
    if let Some(v) = spec.values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::Config(format!(
            "sweep values must be positive, got {v}"
        )));
    }
    if spec.variants.is_empty() {
        return Err(Error::Config("sweep needs at least one variant".into()));
    }
    for (name, v) in [
        ("width", spec.width),
        ("inner_perimeter", spec.inner_perimeter),
        ("aspect", spec.aspect),
        ("sigma", spec.sigma),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Config(format!(
                "sweep.{name} must be positive, got {v}"
            )));
        }
    }
    Ok(kind)
}

/// Loop for one sweep point. Swept values are in display units.
pub fn geometry(spec: &SweepSection, kind: SweepKind, value: f64) -> Result<SquidGeometry> {
    let (mut perimeter, mut aspect, mut width, mut film) =
        (spec.inner_perimeter, spec.aspect, spec.width, spec.film);
    match kind {
        SweepKind::Perimeter => perimeter = value * 1e-6,
        SweepKind::Width => width = value * 1e-6,
        SweepKind::Thickness => {
            film = FilmParams {
                thickness: value * 1e-9,
                ..film
            }
        }
        SweepKind::Aspect => aspect = value,
    }
    let y = perimeter / (2.0 * (1.0 + aspect));
    SquidGeometry::new(aspect * y, y, width, film)
}

struct Point {
    integral: Option<f64>,
    loop_integral: Option<f64>,
    sqrt_a: Option<f64>,
}

fn evaluate(model: &NoiseModel, g: &SquidGeometry, d: &DefectParams) -> Result<Point> {
    let strip = model
        .breakdown(g.width(), &g.film())
        .and_then(|b| Ok((b.total, model.loop_integral(g, None)?)));
    match strip {
        Ok((total, li)) => Ok(Point {
            integral: Some(total / (MU_0 * MU_0)),
            loop_integral: Some(li),
            sqrt_a: Some(model.predict_amplitude(g, d)?),
        }),
        // outside the thin-film regime the analytic column is left blank
        Err(Error::Validity(_)) => Ok(Point {
            integral: None,
            loop_integral: None,
            sqrt_a: None,
        }),
        Err(e) => Err(e),
    }
}

pub fn sweep_table(spec: &SweepSection, ctx: &Context) -> Result<Table> {
    let kind = validate(spec)?;
    let geometries = spec
        .values
        .iter()
        .map(|&v| geometry(spec, kind, v))
        .collect::<Result<Vec<_>>>()?;
    let models: Vec<NoiseModel> = spec
        .variants
        .iter()
        .map(|&v| NoiseModel::with_config(v, ctx.config.solver))
        .collect();
    let defects = DefectParams::from_moment(BOHR_MAGNETON, spec.sigma)?;

    let tasks: Vec<(usize, usize)> = (0..geometries.len())
        .flat_map(|i| (0..models.len()).map(move |m| (i, m)))
        .collect();
    let points = tasks
        .par_iter()
        .map(|&(i, m)| evaluate(&models[m], &geometries[i], &defects))
        .collect::<Result<Vec<_>>>()?;

    let mut table = Table::new(&COLUMNS);
    for (&(i, m), p) in tasks.iter().zip(points) {
        let g = &geometries[i];
        table.push(vec![
            kind.column().into(),
            spec.values[i].into(),
            models[m].variant().as_str().into(),
            (g.inner_x() * 1e6).into(),
            (g.inner_y() * 1e6).into(),
            (g.width() * 1e6).into(),
            (g.thickness() * 1e9).into(),
            p.integral.into(),
            p.loop_integral.into(),
            p.sqrt_a.into(),
        ]);
    }
    Ok(table)
}

pub fn run(ctx: &Context, plot: bool) -> Result<()> {
    let spec = &ctx.config.sweep;
    let table = sweep_table(spec, ctx)?;
    ctx.ensure_out()?;
    let path = table.write(&ctx.out, "sweep", ctx.format)?;
    if plot {
        let kind = validate(spec)?;
        let sqrt_a = table.column("sqrt_a_uphi0").unwrap_or_default();
        let series: Vec<Series> = spec
            .variants
            .iter()
            .enumerate()
            .map(|(m, v)| Series {
                label: v.as_str().into(),
                points: spec
                    .values
                    .iter()
                    .enumerate()
                    .filter_map(|(i, &x)| sqrt_a[i * spec.variants.len() + m].map(|y| (x, y)))
                    .collect(),
            })
            .collect();
        let svg = line_plot_svg(
            &format!("sqrt(A) vs {}", kind.column()),
            kind.column(),
            "sqrt(A) (uPhi0)",
            &series,
        );
        std::fs::write(ctx.out.join("sweep.svg"), svg)?;
    }
    println!("wrote {} rows to {}", table.rows.len(), path.display());
    Ok(())
}
