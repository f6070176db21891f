use std::path::PathBuf;

use clap::Args;
use log::info;
use num_complex::Complex64;
use serde::Serialize;

use bzpiii::bianchi::{
    c_matrix, r_from_c, zcb_residual, GammaSource, PerturbedGamma,
};
use bzpiii::laxpair::{
    holonomy, rectangle_transport_residual, zcn_comparison, LshConnection, ZcnComparison,
};

use crate::config::{ComplexArg, Overlay, Span};
use crate::output::{write_json, Format, Table};
use crate::{CliError, CommonArgs, EXIT_OK};

#[derive(Args, Debug)]
pub struct CheckArgs {
    /// Standard class: I, II, VI0 or VII0 (alternative to --c/--d/--k).
    #[arg(long)]
    model: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    c: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    d: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    k: Option<f64>,
    /// Initial scale factor a(t0).
    #[arg(long)]
    a0: Option<f64>,
    /// Initial derivative a'(t0).
    #[arg(long, allow_negative_numbers = true)]
    da0: Option<f64>,
    /// Time span "t0:t1".
    #[arg(long)]
    t: Option<Span>,
    /// Rectangle corner lambda0 as "re,im".
    #[arg(long, allow_negative_numbers = true)]
    lam0: Option<ComplexArg>,
    /// Rectangle corner lambda1 as "re,im".
    #[arg(long, allow_negative_numbers = true)]
    lam1: Option<ComplexArg>,
    /// Relative amplitude of the smooth non-solution perturbation probe.
    #[arg(long)]
    perturb: Option<f64>,
    /// Seed shaping the perturbation probe.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    common: CommonArgs,
}

const CHECK_KEYS: &[&str] = &[
    "model", "c", "d", "k", "a0", "da0", "t", "lam0", "lam1", "perturb", "seed", "rtol",
    "atol", "h_max", "out", "format",
];

#[derive(Serialize)]
struct PerturbationInfo {
    eps: f64,
    seed: u64,
}

#[derive(Serialize)]
struct CheckReport {
    model: String,
    zcb_residual_max: f64,
    rectangle_residual: f64,
    vec4_vs_zcn_discrepancies: ZcnComparison,
    perturbation: Option<PerturbationInfo>,
}

pub fn run_check(args: CheckArgs) -> Result<i32, CliError> {
    let overlay = Overlay::load(args.common.config.as_deref())?;
    overlay.check_known(CHECK_KEYS)?;

    let model =
        super::bianchi::model_from_flags(&overlay, args.model.clone(), args.c, args.d, args.k)?;
    let cm = c_matrix(&model);
    let a0 = overlay.pick(args.a0, "a0", 2.0)?;
    let da0 = overlay.pick(args.da0, "da0", 0.0)?;
    let Span(t0, t1) = overlay.pick(args.t, "t", Span(1.0, 2.2))?;
    let ComplexArg(l0re, l0im) = overlay.pick(args.lam0, "lam0", ComplexArg(0.8, 0.2))?;
    let ComplexArg(l1re, l1im) = overlay.pick(args.lam1, "lam1", ComplexArg(1.8, 0.2))?;
    let perturb = overlay.pick_opt(args.perturb, "perturb")?;
    let seed = overlay.pick(args.seed, "seed", 0u64)?;
    let out = overlay
        .pick_opt(args.common.out.clone(), "out")?
        .ok_or_else(|| CliError::Config("--out is required".into()))?;
    if t0 <= 0.0 || t1 <= t0 {
        return Err(CliError::Config(format!(
            "t span must satisfy 0 < t0 < t1, got {t0}:{t1}"
        )));
    }

    info!("lax check: {model:?} t={t0}:{t1} perturb={perturb:?} seed={seed}");

    let ev = super::bianchi::evolve_in_decades(&cm, a0, da0, (t0, t1), &overlay, &args.common)?;
    if let Some(t) = ev.positivity_loss_at {
        return Err(CliError::Numeric(format!(
            "scale factor lost positivity at t = {t}; check is undefined"
        )));
    }
    let r = r_from_c(&cm);

    let lam0 = Complex64::new(l0re, l0im);
    let lam1 = Complex64::new(l1re, l1im);
    let margin = 0.05 * (t1 - t0);
    let sample_ts: Vec<f64> = (0..=20)
        .map(|i| t0 + margin + (t1 - t0 - 2.0 * margin) * i as f64 / 20.0)
        .collect();

    let run_probes = |source: &dyn GammaSource| -> Result<(f64, f64), CliError> {
        let mut zcb_max: f64 = 0.0;
        for &t in &sample_ts {
            zcb_max = zcb_max.max(zcb_residual(source, &r, t)?);
        }
        let conn = LshConnection::new(source, r);
        let rect = rectangle_transport_residual(
            &conn,
            t0 + margin,
            t1 - margin,
            lam0,
            lam1,
            0,
        )?;
        Ok((zcb_max, rect))
    };

    let ((zcb_max, rect), perturbation) = match perturb {
        Some(eps) => {
            let perturbed = PerturbedGamma::seeded(&ev.gamma, eps, seed);
            (
                run_probes(&perturbed)?,
                Some(PerturbationInfo { eps, seed }),
            )
        }
        None => (run_probes(&ev.gamma)?, None),
    };

    // deterministic probe input for the vectorization comparison
    let (gamma, gamma_dot) = ev.gamma.gamma_pair(0.5 * (t0 + t1))?;
    let comparison = zcn_comparison(
        0.5 * (t0 + t1),
        Complex64::new(0.7, 0.0),
        &gamma,
        &gamma_dot,
        &r,
    )?;

    write_json(
        &out,
        &CheckReport {
            model: format!("{model:?}"),
            zcb_residual_max: zcb_max,
            rectangle_residual: rect,
            vec4_vs_zcn_discrepancies: comparison,
            perturbation,
        },
    )?;
    Ok(EXIT_OK)
}

#[derive(Args, Debug)]
pub struct HolonomyArgs {
    /// Standard class: I, II, VI0 or VII0 (alternative to --c/--d/--k).
    #[arg(long)]
    model: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    c: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    d: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    k: Option<f64>,
    /// Initial scale factor a(t0).
    #[arg(long)]
    a0: Option<f64>,
    /// Initial derivative a'(t0).
    #[arg(long, allow_negative_numbers = true)]
    da0: Option<f64>,
    /// Time span "t0:t1".
    #[arg(long)]
    t: Option<Span>,
    /// Contour radius around lambda = 0.
    #[arg(long)]
    radius: Option<f64>,
    /// Number of probe times across the span.
    #[arg(long)]
    samples: Option<usize>,
    /// Relative amplitude of the smooth non-solution perturbation probe.
    #[arg(long)]
    perturb: Option<f64>,
    /// Seed shaping the perturbation probe.
    #[arg(long)]
    seed: Option<u64>,
    /// Optional JSON summary with the max relative drift.
    #[arg(long)]
    summary_out: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

const HOLONOMY_KEYS: &[&str] = &[
    "model", "c", "d", "k", "a0", "da0", "t", "radius", "samples", "perturb", "seed",
    "summary_out", "rtol", "atol", "h_max", "out", "format", "jobs",
];

#[derive(Serialize)]
struct HolonomySummary {
    model: String,
    radius: f64,
    samples: usize,
    max_relative_drift: f64,
    max_richardson_error: f64,
    max_liouville_gap: f64,
    perturbation: Option<PerturbationInfo>,
}

pub fn run_holonomy(args: HolonomyArgs) -> Result<i32, CliError> {
    let overlay = Overlay::load(args.common.config.as_deref())?;
    overlay.check_known(HOLONOMY_KEYS)?;

    let model =
        super::bianchi::model_from_flags(&overlay, args.model.clone(), args.c, args.d, args.k)?;
    let cm = c_matrix(&model);
    let a0 = overlay.pick(args.a0, "a0", 2.0)?;
    let da0 = overlay.pick(args.da0, "da0", 0.0)?;
    let Span(t0, t1) = overlay.pick(args.t, "t", Span(1.0, 3.0))?;
    let radius = overlay.pick(args.radius, "radius", 1.0)?;
    let samples = overlay.pick(args.samples, "samples", 7)?;
    let perturb = overlay.pick_opt(args.perturb, "perturb")?;
    let seed = overlay.pick(args.seed, "seed", 0u64)?;
    let jobs = overlay.pick(args.common.jobs, "jobs", 1usize)?.max(1);
    let out = overlay
        .pick_opt(args.common.out.clone(), "out")?
        .ok_or_else(|| CliError::Config("--out is required".into()))?;
    let format = overlay.pick(args.common.format, "format", Format::Csv)?;
    let summary_out = overlay.pick_opt(args.summary_out.clone(), "summary_out")?;
    if t0 <= 0.0 || t1 <= t0 {
        return Err(CliError::Config(format!(
            "t span must satisfy 0 < t0 < t1, got {t0}:{t1}"
        )));
    }
    if radius <= 0.0 {
        return Err(CliError::Config("radius must be positive".into()));
    }
    if samples < 2 {
        return Err(CliError::Config("need at least 2 samples".into()));
    }

    info!("lax holonomy: {model:?} t={t0}:{t1} radius={radius} jobs={jobs}");

    let ev = super::bianchi::evolve_in_decades(&cm, a0, da0, (t0, t1), &overlay, &args.common)?;
    if let Some(t) = ev.positivity_loss_at {
        return Err(CliError::Numeric(format!(
            "scale factor lost positivity at t = {t}; holonomies are undefined"
        )));
    }
    let r = r_from_c(&cm);

    let ts: Vec<f64> = (0..samples)
        .map(|i| t0 + (t1 - t0) * i as f64 / (samples - 1) as f64)
        .collect();

    // holonomies at distinct base times are independent; fan them out
    let compute = |source: &dyn GammaSource,
                   ts: &[f64]|
     -> Result<Vec<bzpiii::laxpair::Holonomy>, CliError> {
        let conn = LshConnection::new(source, r);
        if jobs == 1 {
            ts.iter()
                .map(|&t| holonomy(&conn, t, Complex64::new(0.0, 0.0), radius, 64))
                .collect::<Result<Vec<_>, _>>()
                .map_err(CliError::from)
        } else {
            std::thread::scope(|scope| {
                let chunks: Vec<_> = ts.chunks(ts.len().div_ceil(jobs)).collect();
                let handles: Vec<_> = chunks
                    .into_iter()
                    .map(|chunk| {
                        let conn = LshConnection::new(source, r);
                        scope.spawn(move || {
                            chunk
                                .iter()
                                .map(|&t| {
                                    holonomy(&conn, t, Complex64::new(0.0, 0.0), radius, 64)
                                })
                                .collect::<Result<Vec<_>, _>>()
                        })
                    })
                    .collect();
                let mut all = Vec::new();
                for handle in handles {
                    all.extend(handle.join().expect("holonomy worker panicked")?);
                }
                Ok(all)
            })
        }
    };

    let perturbed_source = perturb.map(|eps| PerturbedGamma::seeded(&ev.gamma, eps, seed));
    let holonomies = match &perturbed_source {
        Some(p) => compute(p, &ts)?,
        None => compute(&ev.gamma, &ts)?,
    };

    let mut table = Table::new(vec!["t", "trace_re", "trace_im", "richardson_err"]);
    for h in &holonomies {
        table.push(vec![h.t, h.trace.re, h.trace.im, h.richardson_error]);
    }
    table.write(&out, format)?;

    let first = holonomies[0].trace;
    let scale = first.norm().max(1e-12);
    let max_relative_drift = holonomies
        .iter()
        .map(|h| (h.trace - first).norm() / scale)
        .fold(0.0f64, f64::max);

    if let Some(path) = &summary_out {
        write_json(
            path,
            &HolonomySummary {
                model: format!("{model:?}"),
                radius,
                samples,
                max_relative_drift,
                max_richardson_error: holonomies
                    .iter()
                    .map(|h| h.richardson_error)
                    .fold(0.0f64, f64::max),
                max_liouville_gap: holonomies
                    .iter()
                    .map(|h| h.liouville_gap)
                    .fold(0.0f64, f64::max),
                perturbation: perturb.map(|eps| PerturbationInfo { eps, seed }),
            },
        )?;
    }

    info!("max relative trace drift {max_relative_drift:.3e}");
    Ok(EXIT_OK)
}
