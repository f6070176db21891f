use std::path::PathBuf;

use clap::Args;
use log::info;
use serde::Serialize;

use bzpiii::hamiltonian::{energy_law_residual, flow, h_value, HamChoice, PhasePoint};
use bzpiii::ode::StepControl;
use bzpiii::piii::{params_from_ck, solve_piii, transform_u_to_q, CkParams, PiiiState};

use crate::config::{Overlay, Span};
use crate::output::{write_json, Format, Table};
use crate::{CliError, CommonArgs, EXIT_OK};

#[derive(Args, Debug)]
pub struct FlowArgs {
    /// Coupling c.
    #[arg(long, allow_negative_numbers = true)]
    c: Option<f64>,
    /// Coupling k.
    #[arg(long, allow_negative_numbers = true)]
    k: Option<f64>,
    /// Initial coordinate q.
    #[arg(long, allow_negative_numbers = true)]
    q0: Option<f64>,
    /// Initial momentum p.
    #[arg(long, allow_negative_numbers = true)]
    p0: Option<f64>,
    /// Integration span "tau0:tau1".
    #[arg(long)]
    tau: Option<Span>,
    /// Output rows.
    #[arg(long)]
    samples: Option<usize>,
    /// Optional JSON equivalence report.
    #[arg(long)]
    summary_out: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

const KEYS: &[&str] = &[
    "c", "k", "q0", "p0", "tau", "samples", "summary_out", "rtol", "atol", "h_max", "out",
    "format",
];

#[derive(Serialize)]
struct FlowReport {
    /// Max |q_ham - q_piii| over the sample grid.
    max_q_gap_vs_piii: f64,
    /// Max |q(tau)| gap between the two Hamiltonian pictures after the
    /// tau = e^t~ resampling.
    max_q_gap_tdh_vs_tdhn: f64,
    max_energy_law_residual: f64,
}

pub fn run_flow(args: FlowArgs) -> Result<i32, CliError> {
    let overlay = Overlay::load(args.common.config.as_deref())?;
    overlay.check_known(KEYS)?;

    let c = overlay.pick(args.c, "c", 1.0)?;
    let k = overlay.pick(args.k, "k", 1.0)?;
    let q0 = overlay.pick(args.q0, "q0", 0.5)?;
    let p0 = overlay.pick(args.p0, "p0", 0.0)?;
    let Span(tau0, tau1) = overlay.pick(args.tau, "tau", Span(1.0, 10.0))?;
    let samples = overlay.pick(args.samples, "samples", 400)?;
    let out = overlay
        .pick_opt(args.common.out.clone(), "out")?
        .ok_or_else(|| CliError::Config("--out is required".into()))?;
    let format = overlay.pick(args.common.format, "format", Format::Csv)?;
    let summary_out = overlay.pick_opt(args.summary_out.clone(), "summary_out")?;
    if tau0 <= 0.0 || tau1 <= tau0 {
        return Err(CliError::Config(format!(
            "tau span must satisfy 0 < tau0 < tau1, got {tau0}:{tau1}"
        )));
    }
    if samples < 2 {
        return Err(CliError::Config("need at least 2 samples".into()));
    }

    info!("ham flow: c={c} k={k} q0={q0} p0={p0} tau={tau0}:{tau1}");

    let ck = CkParams::new(c, k);
    let init = PhasePoint::new(q0, p0, tau0)
        .map_err(|e| CliError::Config(format!("bad initial data: {e}")))?;

    // residual probes need a capped dense output; equivalence runs use
    // plain tight tolerances
    let capped = super::step_control(
        &overlay,
        args.common.rtol,
        args.common.atol,
        args.common.h_max,
        1e-3 * tau0,
    )?;
    let tight = StepControl::with_tols(capped.rtol.min(1e-11), capped.atol.min(1e-13));

    let traj = flow(HamChoice::Tdh, &init, tau1, &ck, &capped)?;

    let mut table = Table::new(vec!["tau", "q", "p", "H", "energy_law_residual"]);
    let mut max_energy_residual: f64 = 0.0;
    for i in 0..samples {
        let tau = tau0 + (tau1 - tau0) * i as f64 / (samples - 1) as f64;
        let y = traj.evaluate(tau)?;
        let pt = PhasePoint::new(y[0], y[1], tau)
            .map_err(|e| CliError::Numeric(format!("flow left its domain: {e}")))?;
        let h = h_value(&pt, &ck);
        let hfd = 1e-5 * tau;
        let residual = if tau - hfd >= tau0 && tau + hfd <= tau1 {
            let r = energy_law_residual(&traj, &ck, tau)?;
            max_energy_residual = max_energy_residual.max(r);
            r
        } else {
            f64::NAN
        };
        table.push(vec![tau, y[0], y[1], h, residual]);
    }
    table.write(&out, format)?;

    // equivalence against the scalar dynamics in u-coordinates:
    // u = e^q, du/dtau = u p/tau
    let params = params_from_ck(&ck);
    let u0 = q0.exp();
    let piii_init = PiiiState::new(tau0, u0, u0 * p0 / tau0)
        .map_err(|e| CliError::Numeric(format!("bad scalar seed: {e}")))?;
    let sol = solve_piii(&params, &piii_init, tau1, &tight, &Default::default())?;
    let ham_tight = flow(HamChoice::Tdh, &init, tau1, &ck, &tight)?;
    let tdhn = flow(HamChoice::Tdhn, &init, tau1.ln(), &ck, &tight)?;

    let mut max_q_gap_vs_piii: f64 = 0.0;
    let mut max_q_gap_tdh_vs_tdhn: f64 = 0.0;
    for i in 0..=100 {
        let tau = tau0 + (tau1 - tau0) * i as f64 / 100.0;
        let q_ham = ham_tight.evaluate(tau)?[0];
        if let Ok(state) = sol.state_at(tau) {
            let q_piii = transform_u_to_q(&state)
                .map_err(|e| CliError::Numeric(e.to_string()))?
                .q;
            max_q_gap_vs_piii = max_q_gap_vs_piii.max((q_ham - q_piii).abs());
        }
        let q_tilde = tdhn.evaluate(tau.ln())?[0];
        max_q_gap_tdh_vs_tdhn = max_q_gap_tdh_vs_tdhn.max((q_ham - q_tilde).abs());
    }

    if let Some(path) = &summary_out {
        write_json(
            path,
            &FlowReport {
                max_q_gap_vs_piii,
                max_q_gap_tdh_vs_tdhn,
                max_energy_law_residual: max_energy_residual,
            },
        )?;
    }
    info!(
        "equivalence: |q_ham - q_piii| {max_q_gap_vs_piii:.3e}, \
         tdh vs tdhn {max_q_gap_tdh_vs_tdhn:.3e}"
    );
    Ok(EXIT_OK)
}
