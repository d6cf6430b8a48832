//! Acceptance criteria. Prints one PASS/FAIL line per criterion. With
//! `ACCEPTANCE_STRICT=1` the process exits non-zero when any criterion fails.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use squidnoise::constants::MU_0;
use squidnoise::convergence::{run_convergence, ConvergenceConfig};
use squidnoise::dataset::{load_dataset, load_reference_amplitudes};
use squidnoise::dephasing::{
    filter_log_integral, run_pipeline, synthesize_qubit_dataset, ExtractionConfig, SamplingPlan,
    SynthesisTruth,
};
use squidnoise::noise::{
    analytic_variance_integral, fit_defect_density, strip_variance, surface_current_profile,
    DefectParams, FitConfig, ModelVariant, NoiseModel, NumericConfig,
};
use squidnoise::{FilmParams, SquidGeometry};

struct Outcome {
    passed: bool,
    detail: String,
}

fn data(file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(file)
}

fn timed(f: impl FnOnce() -> Outcome) -> (Outcome, Duration) {
    let t = Instant::now();
    let o = f();
    (o, t.elapsed())
}

fn c1_filter_identity() -> Outcome {
    let t = Instant::now();
    let worst = [1e-6, 10e-6, 100e-6]
        .iter()
        .map(|&t| (filter_log_integral(t).unwrap() - 2f64.ln()).abs())
        .fold(0.0, f64::max);
    let el = t.elapsed();
    Outcome {
        passed: worst < 1e-6 && el < Duration::from_secs(1),
        detail: format!("max |integral - ln 2| = {worst:.2e} (limit 1e-6), {el:.2?} (limit 1 s)"),
    }
}

/// (µ0/2)² ∫K² / (∫K)² on a unit-width strip by composite Simpson. The inner
/// branch uses x̄ = sin(θ)/2, which turns K into sec θ.
fn simpson(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn profile_oracle(eps: f64) -> f64 {
    let join = 0.5 * (1.0 - eps);
    let theta_j = (2.0 * join).asin();
    // inner: dx̄ = cos(θ)/2 dθ, K = sec θ
    let k1_inner = simpson(0.0, theta_j, 200_000, |_| 0.5);
    let k2_inner = simpson(0.0, theta_j, 200_000, |t| 0.5 / t.cos());
    let k = |x: f64| surface_current_profile(x, eps).unwrap();
    let k1_outer = simpson(join, 0.5, 20_000, k);
    let k2_outer = simpson(join, 0.5, 20_000, |x| k(x).powi(2));
    let i1 = 2.0 * (k1_inner + k1_outer);
    let i2 = 2.0 * (k2_inner + k2_outer);
    (MU_0 / 2.0).powi(2) * i2 / (i1 * i1)
}

fn c2_analytic_oracle() -> Outcome {
    let t = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for (eps, tol) in [(1e-3f64, 0.01), (1e-2, 0.05)] {
        let analytic = analytic_variance_integral(1.0, 1.0, eps.sqrt()).unwrap();
        let rel = (analytic / profile_oracle(eps) - 1.0).abs();
        ok &= rel < tol;
        parts.push(format!("eps={eps:e}: |rel| = {rel:.4} (limit {tol})"));
    }
    let el = t.elapsed();
    ok &= el < Duration::from_secs(1);
    Outcome {
        passed: ok,
        detail: format!("{}, {el:.2?}", parts.join("; ")),
    }
}

fn c3_thin_film() -> Outcome {
    let t = Instant::now();
    let cfg = NumericConfig::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for w in [1e-6, 2e-6, 5e-6] {
        let a = analytic_variance_integral(w, 20e-9, 40e-9).unwrap();
        let n = strip_variance(w, 20e-9, 40e-9, ModelVariant::NumericTop, &cfg).unwrap();
        let r = n.total / a;
        ok &= (r - 1.0).abs() < 0.15;
        parts.push(format!("W={}um ratio {r:.3}", w * 1e6));
    }
    let el = t.elapsed();
    ok &= el < Duration::from_secs(300);
    Outcome {
        passed: ok,
        detail: format!("{} (limit +-15%), {el:.2?}", parts.join(", ")),
    }
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn numeric_all_totals(points: &[(f64, f64)]) -> Vec<f64> {
    let cfg = NumericConfig::default();
    points
        .iter()
        .map(|&(w, b)| {
            strip_variance(w, b, 40e-9, ModelVariant::NumericAll, &cfg)
                .unwrap()
                .total
        })
        .collect()
}

fn c4_thickness_trend() -> Outcome {
    let totals = numeric_all_totals(&[(1e-6, 20e-9), (1e-6, 190e-9), (1e-6, 800e-9)]);
    Outcome {
        passed: strictly_decreasing(&totals),
        detail: format!(
            "integral/mu0^2 at b = 20, 190, 800 nm: {}",
            fmt_list(&totals, 1.0 / (MU_0 * MU_0))
        ),
    }
}

fn c5_width_trend() -> Outcome {
    let widths = [0.4e-6, 0.5e-6, 1e-6, 2e-6, 5e-6];
    let pts: Vec<_> = widths.iter().map(|&w| (w, 190e-9)).collect();
    let totals = numeric_all_totals(&pts);
    Outcome {
        passed: strictly_decreasing(&totals),
        detail: format!(
            "integral/mu0^2 at W = 0.4, 0.5, 1, 2, 5 um: {}",
            fmt_list(&totals, 1.0 / (MU_0 * MU_0))
        ),
    }
}

fn fmt_list(v: &[f64], scale: f64) -> String {
    v.iter()
        .map(|x| format!("{:.4e}", x * scale))
        .collect::<Vec<_>>()
        .join(", ")
}

struct Fits {
    numeric_all: NoiseModel,
    numeric_all_m2sigma: f64,
}

fn c6_defect_density() -> (Outcome, Fits) {
    let t = Instant::now();
    let records = load_dataset(data("table_s1.csv")).unwrap();
    let film = FilmParams::default();
    let fit =
        |m: &NoiseModel| fit_defect_density(m, &records, film, &FitConfig::default()).unwrap();

    let analytic = fit(&NoiseModel::new(ModelVariant::AnalyticTop));
    let top = fit(&NoiseModel::new(ModelVariant::NumericTop));
    let all_model = NoiseModel::new(ModelVariant::NumericAll);
    let all = fit(&all_model);
    let el = t.elapsed();

    let within_factor = |v: f64, target: f64| v / target <= 2.0 && target / v <= 2.0;
    let a_ok = (0.8e17..=1.6e17).contains(&analytic.sigma_for_mu_b);
    let all_ok = within_factor(all.sigma_for_mu_b, 6.7e16);
    let top_ok = within_factor(top.sigma_for_mu_b, 2.6e17);
    let t_ok = el < Duration::from_secs(900);
    let mark = |b: bool| if b { "ok" } else { "out" };
    let outcome = Outcome {
        passed: a_ok && all_ok && top_ok && t_ok,
        detail: format!(
            "sigma(m=muB): analytic {:.3e} [0.8e17, 1.6e17] {}; numeric_all {:.3e} (x2 of 6.7e16) {}; \
             numeric_top {:.3e} (x2 of 2.6e17) {}; {el:.2?}",
            analytic.sigma_for_mu_b,
            mark(a_ok),
            all.sigma_for_mu_b,
            mark(all_ok),
            top.sigma_for_mu_b,
            mark(top_ok),
        ),
    };
    let fits = Fits {
        numeric_all_m2sigma: all.m2sigma,
        numeric_all: all_model,
    };
    (outcome, fits)
}

fn c7_optimized_geometry(fits: &Fits) -> Outcome {
    let reference = load_reference_amplitudes(data("table1.csv")).unwrap();
    let mean = reference.iter().map(|r| r.sqrt_a).sum::<f64>() / reference.len() as f64 * 1e6;
    let r = &reference[0];
    let g = SquidGeometry::new(r.inner_x, r.inner_y, r.width, FilmParams::default()).unwrap();
    let d = DefectParams::new(fits.numeric_all_m2sigma).unwrap();
    let predicted = fits.numeric_all.predict_amplitude(&g, &d).unwrap();
    let rel = (predicted / mean - 1.0).abs();
    Outcome {
        passed: rel < 0.35,
        detail: format!(
            "P = {:.2} um, W = {} um: predicted {predicted:.3} uPhi0 vs mean {mean:.3} uPhi0, |rel| = {rel:.3} (limit 0.35)",
            g.perimeter() * 1e6,
            g.width() * 1e6
        ),
    }
}

fn r_squared(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy * sxy / (sxx * syy)
}

fn c8_perimeter_linearity(fits: &Fits) -> Outcome {
    // fixed aspect ratio X/Y = 9.16/8, W = 1 µm, P from 21 to 101 µm
    let aspect = 9.16 / 8.0;
    let w = 1e-6;
    let d = DefectParams::new(fits.numeric_all_m2sigma).unwrap();
    let (mut ps, mut powers) = (Vec::new(), Vec::new());
    for k in 0..9 {
        let p = (21.0 + 10.0 * k as f64) * 1e-6;
        let y = (p - 4.0 * w) / (2.0 * (1.0 + aspect));
        let g = SquidGeometry::new(aspect * y, y, w, FilmParams::default()).unwrap();
        ps.push(g.perimeter());
        powers.push(fits.numeric_all.flux_variance(&g, &d).unwrap());
    }
    let r2 = r_squared(&ps, &powers);
    Outcome {
        passed: r2 > 0.999,
        detail: format!("R^2 = {r2:.6} over 9 perimeters (limit 0.999)"),
    }
}

fn c9_round_trip() -> Outcome {
    let t = Instant::now();
    let truth = SynthesisTruth {
        sqrt_a_uphi0: 2.5,
        ..SynthesisTruth::default()
    };
    let config = ExtractionConfig::default();
    let clean = SamplingPlan {
        population_noise: 0.0,
        ..SamplingPlan::default()
    };
    let d = synthesize_qubit_dataset(&truth, &clean, 1).unwrap();
    let noiseless = run_pipeline(&d.spectrum, &d.traces, &config)
        .unwrap()
        .extraction
        .combined
        .value;
    let clean_rel = (noiseless / 2.5 - 1.0).abs();

    let noisy = SamplingPlan {
        population_noise: 0.02,
        ..SamplingPlan::default()
    };
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let d = synthesize_qubit_dataset(&truth, &noisy, seed).unwrap();
        let v = run_pipeline(&d.spectrum, &d.traces, &config)
            .unwrap()
            .extraction
            .combined
            .value;
        worst = worst.max((v / 2.5 - 1.0).abs());
    }
    let el = t.elapsed();
    Outcome {
        passed: clean_rel < 0.005 && worst < 0.05 && el < Duration::from_secs(60),
        detail: format!(
            "noiseless |rel| = {clean_rel:.2e} (limit 0.005); worst of 100 seeds at 2% noise = {worst:.4} (limit 0.05); {el:.2?}"
        ),
    }
}

fn c10_convergence() -> Outcome {
    let report = run_convergence(&ConvergenceConfig::default()).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, limit) in [
        ("grid_doubling", 0.02),
        ("strip_length_doubling", 0.01),
        ("standoff_halving", 0.02),
    ] {
        let c = report.check(name).unwrap();
        ok &= c.relative_delta < limit;
        parts.push(format!("{name} {:.2e} (limit {limit})", c.relative_delta));
    }
    Outcome {
        passed: ok,
        detail: parts.join(", "),
    }
}

fn main() -> ExitCode {
    let mut results: Vec<(u32, &str, Outcome, Duration)> = Vec::new();
    let mut record = |n, name, (o, d): (Outcome, Duration)| results.push((n, name, o, d));
    record(1, "filter identity", timed(c1_filter_identity));
    record(2, "analytic oracle", timed(c2_analytic_oracle));
    record(3, "thin-film agreement", timed(c3_thin_film));
    record(4, "thickness trend", timed(c4_thickness_trend));
    record(5, "width trend", timed(c5_width_trend));
    let t = Instant::now();
    let (o6, fits) = c6_defect_density();
    record(6, "defect-density recovery", (o6, t.elapsed()));
    record(
        7,
        "optimized-geometry prediction",
        timed(|| c7_optimized_geometry(&fits)),
    );
    record(
        8,
        "perimeter linearity",
        timed(|| c8_perimeter_linearity(&fits)),
    );
    record(9, "spectroscopy round trip", timed(c9_round_trip));
    record(10, "convergence gates", timed(c10_convergence));

    let mut failed = 0;
    for (n, name, o, d) in &results {
        let status = if o.passed { "PASS" } else { "FAIL" };
        if !o.passed {
            failed += 1;
        }
        println!("criterion {n:>2} {status} {name}: {} [{d:.2?}]", o.detail);
    }
    println!(
        "acceptance: {} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if failed == 0 || !strict {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
