use clap::Args;
use log::{debug, info};

use bzpiii::ode::Trajectory;
use bzpiii::piii::{
    params_from_ck, residual_piii, solve_piii, CkParams, PiiiParams, PiiiState,
    SingularityBounds,
};

use crate::config::{Overlay, Span};
use crate::output::{Format, Table};
use crate::{CliError, CommonArgs, EXIT_OK, EXIT_SINGULAR};

#[derive(Args, Debug)]
pub struct SolveArgs {
    /// Coupling c (alpha = -2 c^2).
    #[arg(long, allow_negative_numbers = true)]
    c: Option<f64>,
    /// Coupling k (beta = 2 k^2).
    #[arg(long, allow_negative_numbers = true)]
    k: Option<f64>,
    /// Painleve III alpha (must be <= 0); alternative to --c.
    #[arg(long, allow_negative_numbers = true, conflicts_with = "c")]
    alpha: Option<f64>,
    /// Painleve III beta (must be >= 0); alternative to --k.
    #[arg(long, allow_negative_numbers = true, conflicts_with = "k")]
    beta: Option<f64>,
    /// Initial u.
    #[arg(long)]
    u0: Option<f64>,
    /// Initial du/dtau.
    #[arg(long, allow_negative_numbers = true)]
    du0: Option<f64>,
    /// Integration span "tau0:tau1".
    #[arg(long)]
    tau: Option<Span>,
    /// Output rows.
    #[arg(long)]
    samples: Option<usize>,
    #[command(flatten)]
    common: CommonArgs,
}

const KEYS: &[&str] = &[
    "c", "k", "alpha", "beta", "u0", "du0", "tau", "samples", "rtol", "atol", "h_max", "out",
    "format",
];

pub fn params_from_flags(
    overlay: &Overlay,
    c: Option<f64>,
    k: Option<f64>,
    alpha: Option<f64>,
    beta: Option<f64>,
) -> Result<PiiiParams, CliError> {
    let alpha = overlay.pick_opt(alpha, "alpha")?;
    let beta = overlay.pick_opt(beta, "beta")?;
    if alpha.is_some() || beta.is_some() {
        let alpha = alpha.unwrap_or(0.0);
        let beta = beta.unwrap_or(0.0);
        return PiiiParams::new(alpha, beta)
            .map_err(|e| CliError::Config(format!("bad alpha/beta: {e}")));
    }
    let c = overlay.pick(c, "c", 1.0)?;
    let k = overlay.pick(k, "k", 1.0)?;
    Ok(params_from_ck(&CkParams::new(c, k)))
}

pub fn run_solve(args: SolveArgs) -> Result<i32, CliError> {
    let overlay = Overlay::load(args.common.config.as_deref())?;
    overlay.check_known(KEYS)?;

    let params = params_from_flags(&overlay, args.c, args.k, args.alpha, args.beta)?;
    let u0 = overlay.pick(args.u0, "u0", 1.0)?;
    let du0 = overlay.pick(args.du0, "du0", 0.0)?;
    let Span(tau0, tau1) = overlay.pick(args.tau, "tau", Span(1.0, 10.0))?;
    let samples = overlay.pick(args.samples, "samples", 400)?;
    let out = overlay
        .pick_opt(args.common.out.clone(), "out")?
        .ok_or_else(|| CliError::Config("--out is required".into()))?;
    let format = overlay.pick(args.common.format, "format", Format::Csv)?;
    if tau0 <= 0.0 || tau1 <= tau0 {
        return Err(CliError::Config(format!(
            "tau span must satisfy 0 < tau0 < tau1, got {tau0}:{tau1}"
        )));
    }
    if samples < 2 {
        return Err(CliError::Config("need at least 2 samples".into()));
    }

    info!("piii solve: alpha={} beta={} u0={u0} du0={du0} tau={tau0}:{tau1}", params.alpha, params.beta);

    let initial =
        PiiiState::new(tau0, u0, du0).map_err(|e| CliError::Config(format!("bad initial data: {e}")))?;
    let bounds = SingularityBounds::default();

    // integrate decade by decade so the dense-output cap scales with tau
    let mut parts: Vec<Trajectory> = Vec::new();
    let mut state = initial;
    let mut singular_at = None;
    for (lo, hi) in super::decade_segments(tau0, tau1) {
        let control = super::step_control(
            &overlay,
            args.common.rtol,
            args.common.atol,
            args.common.h_max,
            2e-4 * lo,
        )?;
        let sol = solve_piii(&params, &state, hi, &control, &bounds)?;
        let stopped = sol.singular_at;
        let end = *sol.trajectory.times().last().unwrap();
        parts.push(sol.trajectory);
        if let Some(tau) = stopped {
            singular_at = Some(tau);
            break;
        }
        let y = parts.last().unwrap().states().last().unwrap().clone();
        state = PiiiState::new(end, y[0], y[1])
            .map_err(|e| CliError::Numeric(format!("state left its domain: {e}")))?;
    }
    let traj = super::concat_trajectories(parts);
    let (span_lo, span_hi) = {
        let (a, b) = traj.span();
        (a.min(b), a.max(b))
    };

    let mut table = Table::new(vec!["tau", "u", "du", "residual"]);
    let mut residual_max: f64 = 0.0;
    for i in 0..samples {
        let tau = span_lo + (span_hi - span_lo) * i as f64 / (samples - 1) as f64;
        let y = traj.evaluate(tau)?;
        // the centered stencil needs tau +- h inside the span
        let h = 1e-4 * tau;
        let residual = if tau - h >= span_lo && tau + h <= span_hi {
            let r = residual_piii(&traj, &params, tau)?;
            residual_max = residual_max.max(r);
            r
        } else {
            f64::NAN
        };
        table.push(vec![tau, y[0], y[1], residual]);
    }
    table.write(&out, format)?;
    debug!("max interior residual {residual_max:.3e}");

    if let Some(tau) = singular_at {
        info!("movable singularity flagged at tau = {tau}; partial output written");
        return Ok(EXIT_SINGULAR);
    }
    Ok(EXIT_OK)
}
