//! The Painleve III family with gamma = delta = 0.
//!
//! Three equivalent coordinate systems are supported, connected by exact
//! changes of variables:
//!
//! * (a, t): the metric scale factor, with the generalized dynamics
//!   t^-1 d/dt(t a^-1 a') = k^2 a^-2 t^2 - c^2 a^2 t^-2;
//! * (u, tau): u = a^2/t^2, tau = t^2/4, the standard Painleve III form
//!   with alpha = -2c^2, beta = 2k^2;
//! * (q, tau): q = ln u, where the equation becomes
//!   d/dtau(tau dq/dtau) = 2(k^2 e^-q - c^2 e^q), i.e. -4 sinh q at c = k = 1.

use crate::error::{Error, Result};
use crate::ode::{integrate, EventSpec, OdeProblem, StepControl, Trajectory};

/// Diagonal couplings (c, k) of the symmetric coefficient matrix; the
/// off-diagonal entry lives in [`crate::bianchi::SymmetricC`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CkParams {
    pub c: f64,
    pub k: f64,
}

impl CkParams {
    pub fn new(c: f64, k: f64) -> Self {
        assert!(c.is_finite() && k.is_finite());
        CkParams { c, k }
    }
}

/// Painleve III parameters in the standard form; this family always has
/// alpha <= 0, beta >= 0 and gamma = delta = 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PiiiParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl PiiiParams {
    /// Validating constructor for externally supplied parameters.
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha <= 0.0 && beta >= 0.0) || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::DomainError(format!(
                "need alpha <= 0 and beta >= 0, got ({alpha}, {beta})"
            )));
        }
        Ok(PiiiParams {
            alpha,
            beta,
            gamma: 0.0,
            delta: 0.0,
        })
    }

    /// The couplings (|c|, |k|) reproducing these parameters.
    pub fn to_ck(&self) -> CkParams {
        CkParams::new((-self.alpha / 2.0).sqrt(), (self.beta / 2.0).sqrt())
    }
}

/// alpha = -2c^2, beta = 2k^2, gamma = delta = 0.
pub fn params_from_ck(p: &CkParams) -> PiiiParams {
    PiiiParams {
        alpha: -2.0 * p.c * p.c,
        beta: 2.0 * p.k * p.k,
        gamma: 0.0,
        delta: 0.0,
    }
}

/// State of the (u, tau) system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PiiiState {
    pub tau: f64,
    pub u: f64,
    pub du: f64,
}

impl PiiiState {
    pub fn new(tau: f64, u: f64, du: f64) -> Result<Self> {
        if tau <= 0.0 || u <= 0.0 || !tau.is_finite() || !u.is_finite() || !du.is_finite() {
            return Err(Error::DomainError(format!(
                "PiiiState needs tau > 0 and u > 0, got (tau, u, du) = ({tau}, {u}, {du})"
            )));
        }
        Ok(PiiiState { tau, u, du })
    }
}

/// State of the logarithmic (q, tau) system, q = ln u.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SinhState {
    pub tau: f64,
    pub q: f64,
    pub dq: f64,
}

impl SinhState {
    pub fn new(tau: f64, q: f64, dq: f64) -> Result<Self> {
        if tau <= 0.0 || !tau.is_finite() || !q.is_finite() || !dq.is_finite() {
            return Err(Error::DomainError(format!(
                "SinhState needs tau > 0, got (tau, q, dq) = ({tau}, {q}, {dq})"
            )));
        }
        Ok(SinhState { tau, q, dq })
    }
}

/// d^2u/dtau^2 of the standard Painleve III form:
/// u'' = u'^2/u - u'/tau + (alpha u^2 + beta)/tau + gamma u^3 + delta/u.
pub fn rhs_spiii(tau: f64, u: f64, du: f64, params: &PiiiParams) -> Result<f64> {
    if tau == 0.0 || u == 0.0 {
        return Err(Error::DomainError(format!(
            "rhs undefined at tau = {tau}, u = {u}"
        )));
    }
    Ok(du * du / u - du / tau
        + (params.alpha * u * u + params.beta) / tau
        + params.gamma * u * u * u
        + params.delta / u)
}

/// d^2a/dt^2 of the scale-factor equation, expanded as
/// a'' = a'^2/a - a'/t + a (k^2 t^2/a^2 - c^2 a^2/t^2).
pub fn rhs_pgen(t: f64, a: f64, da: f64, p: &CkParams) -> Result<f64> {
    if t <= 0.0 || a == 0.0 {
        return Err(Error::DomainError(format!(
            "rhs undefined at t = {t}, a = {a}"
        )));
    }
    let ratio = a / t;
    Ok(da * da / a - da / t + a * (p.k * p.k / (ratio * ratio) - p.c * p.c * ratio * ratio))
}

/// d^2q/dtau^2 of the logarithmic form:
/// tau q'' + q' = 2(k^2 e^-q - c^2 e^q).
pub fn rhs_symp(tau: f64, q: f64, dq: f64, p: &CkParams) -> Result<f64> {
    if tau <= 0.0 {
        return Err(Error::DomainError(format!("rhs undefined at tau = {tau}")));
    }
    Ok((2.0 * (p.k * p.k * (-q).exp() - p.c * p.c * q.exp()) - dq) / tau)
}

/// Change of variables u = a^2/t^2, tau = t^2/4, with
/// du/dtau = 4 a a'/t^3 - 4 a^2/t^4.
pub fn transform_a_to_u(t: f64, a: f64, da: f64) -> Result<PiiiState> {
    if t <= 0.0 {
        return Err(Error::DomainError(format!("need t > 0, got {t}")));
    }
    if a == 0.0 {
        return Err(Error::DomainError("need a != 0".into()));
    }
    let tau = t * t / 4.0;
    let u = a * a / (t * t);
    let du = 4.0 * a * da / (t * t * t) - 4.0 * a * a / (t * t * t * t);
    PiiiState::new(tau, u, du)
}

/// Inverse of [`transform_a_to_u`] on the a > 0 branch:
/// t = 2 sqrt(tau), a = t sqrt(u), a' = sqrt(u) + t^2 u' / (4 sqrt(u)).
pub fn transform_u_to_a(s: &PiiiState) -> (f64, f64, f64) {
    let t = 2.0 * s.tau.sqrt();
    let su = s.u.sqrt();
    let a = t * su;
    let da = su + t * t * s.du / (4.0 * su);
    (t, a, da)
}

/// q = ln u, dq = du/u.
pub fn transform_u_to_q(s: &PiiiState) -> Result<SinhState> {
    if s.u <= 0.0 {
        return Err(Error::DomainError(format!("need u > 0, got {}", s.u)));
    }
    SinhState::new(s.tau, s.u.ln(), s.du / s.u)
}

/// u = e^q, du = e^q dq.
pub fn transform_q_to_u(s: &SinhState) -> PiiiState {
    let u = s.q.exp();
    PiiiState {
        tau: s.tau,
        u,
        du: u * s.dq,
    }
}

/// Positivity window for u; leaving it flags a movable singularity.
#[derive(Clone, Copy, Debug)]
pub struct SingularityBounds {
    pub u_floor: f64,
    pub u_ceiling: f64,
}

impl Default for SingularityBounds {
    fn default() -> Self {
        SingularityBounds {
            u_floor: 1e-8,
            u_ceiling: 1e8,
        }
    }
}

/// A (u, du) trajectory, possibly terminated early at a movable
/// singularity (a flagged outcome, not an error).
#[derive(Clone, Debug)]
pub struct PiiiSolution {
    pub trajectory: Trajectory,
    pub singular_at: Option<f64>,
}

impl PiiiSolution {
    pub fn state_at(&self, tau: f64) -> Result<PiiiState> {
        let y = self.trajectory.evaluate(tau)?;
        Ok(PiiiState {
            tau,
            u: y[0],
            du: y[1],
        })
    }
}

/// Integrate the (u, tau) system from `initial` to `tau_end`.
pub fn solve_piii(
    params: &PiiiParams,
    initial: &PiiiState,
    tau_end: f64,
    control: &StepControl,
    bounds: &SingularityBounds,
) -> Result<PiiiSolution> {
    if tau_end <= 0.0 {
        return Err(Error::DomainError(format!(
            "tau span must exclude 0, got tau_end = {tau_end}"
        )));
    }
    let p = *params;
    let problem = OdeProblem {
        rhs: move |tau: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            // rhs_spiii without the error plumbing: the event guard keeps
            // u inside its window, so u = 0 is unreachable here
            let (u, du) = (y[0], y[1]);
            dy[1] = du * du / u - du / tau + (p.alpha * u * u + p.beta) / tau;
        },
        t0: initial.tau,
        y0: vec![initial.u, initial.du],
        t_end: tau_end,
    };
    let event = EventSpec {
        label: "movable-singularity",
        triggered: {
            let b = *bounds;
            Box::new(move |_tau, y: &[f64]| y[0] <= b.u_floor || y[0] >= b.u_ceiling)
        },
    };
    let trajectory = integrate(&problem, control, Some(&event))?;
    let singular_at = trajectory.event().map(|hit| hit.t);
    Ok(PiiiSolution {
        trajectory,
        singular_at,
    })
}

/// |u'' - rhs| at an interior tau, with u'' from central differences of
/// the dense output at step 1e-4 tau plus one Richardson refinement.
pub fn residual_piii(traj: &Trajectory, params: &PiiiParams, tau: f64) -> Result<f64> {
    let h = 1e-4 * tau.abs();
    for probe in [tau - h, tau + h] {
        if !traj.contains(probe) {
            let (a, b) = traj.span();
            return Err(Error::OutOfSpan {
                t: probe,
                span: (a.min(b), a.max(b)),
            });
        }
    }
    let u_at = |t: f64| -> Result<f64> { Ok(traj.evaluate(t)?[0]) };
    let center = traj.evaluate(tau)?;
    let second_diff = |h: f64| -> Result<f64> {
        Ok((u_at(tau + h)? - 2.0 * center[0] + u_at(tau - h)?) / (h * h))
    };
    let d_h = second_diff(h)?;
    let d_h2 = second_diff(h / 2.0)?;
    let u_dd = (4.0 * d_h2 - d_h) / 3.0;
    let expect = rhs_spiii(tau, center[0], center[1], params)?;
    Ok((u_dd - expect).abs())
}

/// Power-law fit of a trajectory window.
#[derive(Clone, Copy, Debug)]
pub struct AsymptoticFit {
    /// Least-squares slope of ln u against ln tau.
    pub exponent: f64,
    /// Intercept, i.e. ln(amplitude).
    pub log_amplitude: f64,
    /// RMS residual of the fit.
    pub fit_residual: f64,
}

/// Fit ln u ~ exponent * ln tau + log_amplitude over `window`.
pub fn asymptotic_probe(traj: &Trajectory, window: (f64, f64)) -> Result<AsymptoticFit> {
    let (wa, wb) = window;
    for probe in [wa, wb] {
        if !traj.contains(probe) {
            let (a, b) = traj.span();
            return Err(Error::OutOfSpan {
                t: probe,
                span: (a.min(b), a.max(b)),
            });
        }
    }
    if wa <= 0.0 || wb <= wa {
        return Err(Error::DomainError(format!(
            "bad probe window ({wa}, {wb})"
        )));
    }

    const SAMPLES: usize = 256;
    let (la, lb) = (wa.ln(), wb.ln());
    let mut xs = Vec::with_capacity(SAMPLES);
    let mut ys = Vec::with_capacity(SAMPLES);
    for i in 0..SAMPLES {
        let x = la + (lb - la) * i as f64 / (SAMPLES - 1) as f64;
        let tau = x.exp();
        let u = traj.evaluate(tau)?[0];
        if u <= 0.0 {
            return Err(Error::DomainError(format!(
                "u must stay positive in the fit window, got u({tau}) = {u}"
            )));
        }
        xs.push(x);
        ys.push(u.ln());
    }

    let n = SAMPLES as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    Ok(AsymptoticFit {
        exponent: slope,
        log_amplitude: intercept,
        fit_residual: (ss / n).sqrt(),
    })
}
