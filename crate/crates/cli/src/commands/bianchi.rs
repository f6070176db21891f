use std::path::PathBuf;

use clap::Args;
use log::info;
use serde::Serialize;

use bzpiii::bianchi::{
    assemble_metric, c_matrix, ernst_residual, evolve_model, integrate_f, r_from_c,
    uniform_grid, zcb_residual, GammaEvolution, GammaSource, ModelClass, SymmetricC,
};
use bzpiii::ode::Trajectory;

use crate::config::{Overlay, Span};
use crate::output::{write_json, Format, Table};
use crate::{CliError, CommonArgs, EXIT_OK, EXIT_SINGULAR};

#[derive(Args, Debug)]
pub struct EvolveArgs {
    /// Standard class: I, II, VI0 or VII0 (alternative to --c/--d/--k).
    #[arg(long)]
    model: Option<String>,
    /// Coupling matrix entry c.
    #[arg(long, allow_negative_numbers = true)]
    c: Option<f64>,
    /// Coupling matrix off-diagonal d.
    #[arg(long, allow_negative_numbers = true)]
    d: Option<f64>,
    /// Coupling matrix entry k.
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
    /// z window "z0:z1" for the sampled field.
    #[arg(long)]
    z: Option<Span>,
    /// t-grid nodes of the sampled field.
    #[arg(long)]
    grid_t: Option<usize>,
    /// z-grid nodes of the sampled field.
    #[arg(long)]
    grid_z: Option<usize>,
    /// Conformal factor at the left span edge.
    #[arg(long)]
    f0: Option<f64>,
    /// Optional g-field file with columns t,z,g11,g12,g22,f.
    #[arg(long)]
    grid_out: Option<PathBuf>,
    /// Optional JSON summary (residuals, convergence order).
    #[arg(long)]
    summary_out: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

const KEYS: &[&str] = &[
    "model", "c", "d", "k", "a0", "da0", "t", "z", "grid_t", "grid_z", "f0", "grid_out",
    "summary_out", "rtol", "atol", "h_max", "out", "format",
];

#[derive(Serialize)]
struct EvolveSummary {
    model: String,
    zcb_residual_max: f64,
    ernst_residual_max: f64,
    ernst_residual_refined: f64,
    ernst_convergence_order: f64,
    f_cross_z_spread: f64,
    f_route_mismatch: f64,
}

pub fn model_from_flags(
    overlay: &Overlay,
    model: Option<String>,
    c: Option<f64>,
    d: Option<f64>,
    k: Option<f64>,
) -> Result<ModelClass, CliError> {
    let name = overlay.pick_opt(model, "model")?;
    if let Some(name) = name {
        return match name.as_str() {
            "I" | "i" => Ok(ModelClass::BianchiI),
            "II" | "ii" => Ok(ModelClass::BianchiII),
            "VI0" | "vi0" => Ok(ModelClass::BianchiVI0),
            "VII0" | "vii0" => Ok(ModelClass::BianchiVII0),
            other => Err(CliError::Config(format!(
                "unknown model {other:?}; expected I, II, VI0 or VII0"
            ))),
        };
    }
    let c = overlay.pick(c, "c", 1.0)?;
    let d = overlay.pick(d, "d", 0.0)?;
    let k = overlay.pick(k, "k", 1.0)?;
    Ok(ModelClass::Custom(SymmetricC::new(c, d, k)))
}

/// Evolve decade by decade with scale-proportional step caps.
pub fn evolve_in_decades(
    cm: &SymmetricC,
    a0: f64,
    da0: f64,
    span: (f64, f64),
    overlay: &Overlay,
    common: &CommonArgs,
) -> Result<GammaEvolution, CliError> {
    let mut parts: Vec<Trajectory> = Vec::new();
    let mut a = a0;
    let mut da = da0;
    let mut positivity_loss_at = None;
    for (lo, hi) in super::decade_segments(span.0, span.1) {
        let control =
            super::step_control(overlay, common.rtol, common.atol, common.h_max, 1e-3 * lo)?;
        let ev = evolve_model(cm, a, da, (lo, hi), &control)?;
        let stopped = ev.positivity_loss_at;
        parts.push(ev.gamma.trajectory().clone());
        if let Some(t) = stopped {
            positivity_loss_at = Some(t);
            break;
        }
        let y = parts.last().unwrap().states().last().unwrap().clone();
        a = y[0];
        da = y[1];
    }
    let traj = super::concat_trajectories(parts);
    Ok(GammaEvolution {
        gamma: bzpiii::bianchi::GammaTrajectory::from_trajectory(traj),
        positivity_loss_at,
    })
}

pub fn run_evolve(args: EvolveArgs) -> Result<i32, CliError> {
    let overlay = Overlay::load(args.common.config.as_deref())?;
    overlay.check_known(KEYS)?;

    let model = model_from_flags(&overlay, args.model.clone(), args.c, args.d, args.k)?;
    let cm = c_matrix(&model);
    let a0 = overlay.pick(args.a0, "a0", 1.0)?;
    let da0 = overlay.pick(args.da0, "da0", 1.0)?;
    let Span(t0, t1) = overlay.pick(args.t, "t", Span(1.0, 2.0))?;
    let Span(z0, z1) = overlay.pick(args.z, "z", Span(0.0, 1.0))?;
    let grid_t = overlay.pick(args.grid_t, "grid_t", 65)?;
    let grid_z = overlay.pick(args.grid_z, "grid_z", 65)?;
    let f0 = overlay.pick(args.f0, "f0", 1.0)?;
    let out = overlay
        .pick_opt(args.common.out.clone(), "out")?
        .ok_or_else(|| CliError::Config("--out is required".into()))?;
    let format = overlay.pick(args.common.format, "format", Format::Csv)?;
    let grid_out = overlay.pick_opt(args.grid_out.clone(), "grid_out")?;
    let summary_out = overlay.pick_opt(args.summary_out.clone(), "summary_out")?;
    if t0 <= 0.0 || t1 <= t0 {
        return Err(CliError::Config(format!(
            "t span must satisfy 0 < t0 < t1, got {t0}:{t1}"
        )));
    }
    if grid_t < 5 || grid_z < 5 {
        return Err(CliError::Config("grids need at least 5 nodes".into()));
    }

    info!("bianchi evolve: {model:?} a0={a0} da0={da0} t={t0}:{t1}");

    let ev = evolve_in_decades(&cm, a0, da0, (t0, t1), &overlay, &args.common)?;

    if let Some(t_loss) = ev.positivity_loss_at {
        // partial trajectory only: the metric products below need a > 0
        let mut table = Table::new(vec!["t", "a", "b", "f"]);
        let (lo, hi) = GammaSource::span(&ev.gamma);
        for i in 0..grid_t {
            let t = lo + (hi - lo) * i as f64 / (grid_t - 1) as f64;
            let (a, _) = ev.gamma.scale_factor(t)?;
            table.push(vec![t, a, t * t / a, f64::NAN]);
        }
        table.write(&out, format)?;
        info!("positivity loss flagged at t = {t_loss}; partial output written");
        return Ok(EXIT_SINGULAR);
    }

    let t_grid = uniform_grid(t0, t1, grid_t);
    let z_grid = uniform_grid(z0, z1, grid_z);
    let field = assemble_metric(&model, &ev.gamma, &t_grid, &z_grid)?;
    let (field, f_report) = integrate_f(&field, t0, f0)?;
    let f = field.f().expect("f was just integrated");

    let mut table = Table::new(vec!["t", "a", "b", "f"]);
    for (i, &t) in field.t_grid().iter().enumerate() {
        let (a, _) = ev.gamma.scale_factor(t)?;
        table.push(vec![t, a, t * t / a, f[i]]);
    }
    table.write(&out, format)?;

    if let Some(path) = &grid_out {
        let mut grid_table = Table::new(vec!["t", "z", "g11", "g12", "g22", "f"]);
        for (i, &t) in field.t_grid().iter().enumerate() {
            for (j, &z) in field.z_grid().iter().enumerate() {
                let g = field.g_at_node(i, j);
                grid_table.push(vec![t, z, g.at(0, 0), g.at(0, 1), g.at(1, 1), f[i]]);
            }
        }
        grid_table.write(path, format)?;
    }

    if let Some(path) = &summary_out {
        let r = r_from_c(&cm);
        let mut zcb_max: f64 = 0.0;
        for i in 0..=20 {
            let t = t0 + (t1 - t0) * (0.05 + 0.9 * i as f64 / 20.0);
            zcb_max = zcb_max.max(zcb_residual(&ev.gamma, &r, t)?);
        }
        let ernst = ernst_residual(&field)?;
        write_json(
            path,
            &EvolveSummary {
                model: format!("{model:?}"),
                zcb_residual_max: zcb_max,
                ernst_residual_max: ernst.max_residual,
                ernst_residual_refined: ernst.refined_max_residual,
                ernst_convergence_order: ernst.convergence_order,
                f_cross_z_spread: f_report.cross_z_spread,
                f_route_mismatch: f_report.fa_fb_mismatch,
            },
        )?;
    }

    Ok(EXIT_OK)
}
