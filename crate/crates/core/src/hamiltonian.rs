//! Time-dependent Hamiltonian picture of the scalar dynamics.
//!
//! Two dynamically equivalent Hamiltonians are supported,
//!
//!   H(q, p, tau)   = p^2/(2 tau) + 2 (k^2 e^-q + c^2 e^q),
//!   H~(q, p~, t~)  = p~^2/2 + 2 e^t~ (k^2 e^-q + c^2 e^q),
//!
//! related by the exact reparametrization tau = e^t~, p~ = p. The
//! canonical flow of the first reproduces the logarithmic form of the
//! Painleve III equation, d/dtau(tau dq/dtau) = 2(k^2 e^-q - c^2 e^q),
//! which is the binding cross-check between this module and
//! [`crate::piii`]. Conservation is verified through the non-autonomous
//! energy law dH/dtau = dH/dtau|_explicit rather than by a structure-
//! preserving integrator.

use crate::error::{Error, Result};
use crate::ode::{integrate, OdeProblem, StepControl, Trajectory};
use crate::piii::CkParams;

/// Point of the (q, p) phase space at a time tau > 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhasePoint {
    pub q: f64,
    pub p: f64,
    pub tau: f64,
}

impl PhasePoint {
    pub fn new(q: f64, p: f64, tau: f64) -> Result<Self> {
        if tau <= 0.0 || !tau.is_finite() || !q.is_finite() || !p.is_finite() {
            return Err(Error::DomainError(format!(
                "phase point needs tau > 0 and finite coordinates, got (q, p, tau) = ({q}, {p}, {tau})"
            )));
        }
        Ok(PhasePoint { q, p, tau })
    }

    /// The logarithmic time of the equivalent autonomous-kinetic picture.
    pub fn ttilde(&self) -> f64 {
        self.tau.ln()
    }
}

fn potential(q: f64, ck: &CkParams) -> f64 {
    2.0 * (ck.k * ck.k * (-q).exp() + ck.c * ck.c * q.exp())
}

fn force(q: f64, ck: &CkParams) -> f64 {
    // -dV/dq
    2.0 * (ck.k * ck.k * (-q).exp() - ck.c * ck.c * q.exp())
}

/// H = p^2/(2 tau) + 2(k^2 e^-q + c^2 e^q).
pub fn h_value(pt: &PhasePoint, ck: &CkParams) -> f64 {
    pt.p * pt.p / (2.0 * pt.tau) + potential(pt.q, ck)
}

/// H~ = p~^2/2 + 2 e^t~ (k^2 e^-q + c^2 e^q).
pub fn h_tilde_value(q: f64, ptilde: f64, ttilde: f64, ck: &CkParams) -> f64 {
    0.5 * ptilde * ptilde + ttilde.exp() * potential(q, ck)
}

/// Which Hamiltonian drives the flow.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HamChoice {
    /// Time variable tau; kinetic term p^2/(2 tau).
    Tdh,
    /// Time variable t~ = ln tau; kinetic term p~^2/2.
    Tdhn,
}

/// Integrate the canonical equations q' = dH/dp, p' = -dH/dq.
///
/// For [`HamChoice::Tdh`] the trajectory is parametrized by tau and
/// `time_end` is the final tau; for [`HamChoice::Tdhn`] the trajectory is
/// parametrized by t~ starting at ln(initial.tau) and `time_end` is the
/// final t~.
pub fn flow(
    choice: HamChoice,
    initial: &PhasePoint,
    time_end: f64,
    ck: &CkParams,
    control: &StepControl,
) -> Result<Trajectory> {
    let p = *ck;
    match choice {
        HamChoice::Tdh => {
            if time_end <= 0.0 {
                return Err(Error::DomainError(format!(
                    "tau span must stay positive, got tau_end = {time_end}"
                )));
            }
            let problem = OdeProblem {
                rhs: move |tau: f64, y: &[f64], dy: &mut [f64]| {
                    dy[0] = y[1] / tau;
                    dy[1] = force(y[0], &p);
                },
                t0: initial.tau,
                y0: vec![initial.q, initial.p],
                t_end: time_end,
            };
            integrate(&problem, control, None)
        }
        HamChoice::Tdhn => {
            let problem = OdeProblem {
                rhs: move |ttilde: f64, y: &[f64], dy: &mut [f64]| {
                    dy[0] = y[1];
                    dy[1] = ttilde.exp() * force(y[0], &p);
                },
                t0: initial.ttilde(),
                y0: vec![initial.q, initial.p],
                t_end: time_end,
            };
            integrate(&problem, control, None)
        }
    }
}

/// Residual of the non-autonomous energy law along a tau-flow:
/// |d/dtau H(q(tau), p(tau), tau) + p^2/(2 tau^2)|, with the derivative
/// from central differences at h = 1e-5 tau plus one Richardson pass.
pub fn energy_law_residual(traj: &Trajectory, ck: &CkParams, tau: f64) -> Result<f64> {
    let h = 1e-5 * tau.abs();
    for probe in [tau - h, tau + h] {
        if !traj.contains(probe) {
            let (a, b) = traj.span();
            return Err(Error::OutOfSpan {
                t: probe,
                span: (a.min(b), a.max(b)),
            });
        }
    }
    let h_at = |tau: f64| -> Result<f64> {
        let y = traj.evaluate(tau)?;
        Ok(y[1] * y[1] / (2.0 * tau) + potential(y[0], ck))
    };
    let diff = |h: f64| -> Result<f64> { Ok((h_at(tau + h)? - h_at(tau - h)?) / (2.0 * h)) };
    let d_h = diff(h)?;
    let d_h2 = diff(h / 2.0)?;
    let dh_dtau = (4.0 * d_h2 - d_h) / 3.0;
    let y = traj.evaluate(tau)?;
    let expect = -y[1] * y[1] / (2.0 * tau * tau);
    Ok((dh_dtau - expect).abs())
}

/// Same residual for the t~-flow, whose energy law is
/// dH~/dt~ = e^t~ (potential).
pub fn energy_law_residual_tilde(traj: &Trajectory, ck: &CkParams, ttilde: f64) -> Result<f64> {
    let h = 1e-5 * ttilde.abs().max(1e-2);
    for probe in [ttilde - h, ttilde + h] {
        if !traj.contains(probe) {
            let (a, b) = traj.span();
            return Err(Error::OutOfSpan {
                t: probe,
                span: (a.min(b), a.max(b)),
            });
        }
    }
    let h_at = |tt: f64| -> Result<f64> {
        let y = traj.evaluate(tt)?;
        Ok(h_tilde_value(y[0], y[1], tt, ck))
    };
    let diff = |h: f64| -> Result<f64> { Ok((h_at(ttilde + h)? - h_at(ttilde - h)?) / (2.0 * h)) };
    let d_h = diff(h)?;
    let d_h2 = diff(h / 2.0)?;
    let dh = (4.0 * d_h2 - d_h) / 3.0;
    let y = traj.evaluate(ttilde)?;
    let expect = ttilde.exp() * potential(y[0], ck);
    Ok((dh - expect).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::piii::{rhs_symp, PiiiState, SinhState};

    fn control() -> StepControl {
        StepControl::with_tols(1e-12, 1e-14)
    }

    #[test]
    fn hamiltonian_spot_values() {
        let ck = CkParams::new(1.0, 1.0);
        let pt = PhasePoint::new(0.0, 0.0, 3.0).unwrap();
        assert_eq!(h_value(&pt, &ck), 4.0);

        // free particle
        let free = CkParams::new(0.0, 0.0);
        let pt = PhasePoint::new(1.0, 2.0, 4.0).unwrap();
        assert_eq!(h_value(&pt, &free), 0.5);

        let pt = PhasePoint::new(2.0f64.ln(), 2.0, 1.0).unwrap();
        assert_eq!(h_value(&pt, &ck), 7.0);
    }

    #[test]
    fn h_tilde_spot_values() {
        let ck = CkParams::new(1.0, 1.0);
        assert_eq!(h_tilde_value(0.0, 0.0, 0.0, &ck), 4.0);
        let free = CkParams::new(0.0, 0.0);
        assert_eq!(h_tilde_value(0.7, 3.0, 1.0, &free), 4.5);
        assert_eq!(h_tilde_value(0.0, 2.0, 2.0f64.ln(), &ck), 10.0);
    }

    #[test]
    fn phase_point_validation() {
        assert!(PhasePoint::new(0.0, 0.0, 0.0).is_err());
        assert!(PhasePoint::new(0.0, 0.0, -1.0).is_err());
        assert!(PhasePoint::new(f64::NAN, 0.0, 1.0).is_err());
    }

    #[test]
    fn fixed_point_stays_put() {
        let ck = CkParams::new(1.0, 1.0);
        let init = PhasePoint::new(0.0, 0.0, 1.0).unwrap();
        let traj = flow(HamChoice::Tdh, &init, 50.0, &ck, &control()).unwrap();
        for tau in [5.0, 20.0, 50.0] {
            let y = traj.evaluate(tau).unwrap();
            assert!(y[0].abs() < 1e-12 && y[1].abs() < 1e-12);
        }
    }

    #[test]
    fn flow_matches_symp_integration() {
        let ck = CkParams::new(1.0, 1.0);
        let init = PhasePoint::new(0.7, 0.0, 1.0).unwrap();
        let ham = flow(HamChoice::Tdh, &init, 10.0, &ck, &control()).unwrap();

        // independent route: integrate the scalar equation for q directly;
        // dq/dtau = p/tau fixes the initial slope
        let symp = {
            let p = ck;
            let problem = OdeProblem {
                rhs: move |tau: f64, y: &[f64], dy: &mut [f64]| {
                    dy[0] = y[1];
                    dy[1] = rhs_symp(tau, y[0], y[1], &p).unwrap();
                },
                t0: 1.0,
                y0: vec![0.7, 0.0],
                t_end: 10.0,
            };
            integrate(&problem, &control(), None).unwrap()
        };

        for i in 1..=20 {
            let tau = 1.0 + 9.0 * i as f64 / 20.0;
            let qh = ham.evaluate(tau).unwrap()[0];
            let qs = symp.evaluate(tau).unwrap()[0];
            assert!((qh - qs).abs() <= 1e-9, "q mismatch at tau = {tau}");
        }
    }

    #[test]
    fn reparametrization_is_exact() {
        let ck = CkParams::new(1.0, 0.5);
        let init = PhasePoint::new(0.4, -0.3, 1.0).unwrap();
        let tdh = flow(HamChoice::Tdh, &init, 20.0, &ck, &control()).unwrap();
        let tdhn = flow(HamChoice::Tdhn, &init, 20.0f64.ln(), &ck, &control()).unwrap();

        for i in 0..=20 {
            let tau = 1.0 + 19.0 * i as f64 / 20.0;
            let a = tdh.evaluate(tau).unwrap();
            let b = tdhn.evaluate(tau.ln()).unwrap();
            assert!((a[0] - b[0]).abs() <= 1e-9, "q gap at tau = {tau}");
            assert!((a[1] - b[1]).abs() <= 1e-9, "p gap at tau = {tau}");
        }
    }

    #[test]
    fn energy_law_residuals() {
        let ck = CkParams::new(1.0, 1.0);

        // fixed point: H constant and p = 0
        let init = PhasePoint::new(0.0, 0.0, 1.0).unwrap();
        let traj = flow(HamChoice::Tdh, &init, 5.0, &ck, &control()).unwrap();
        let r = energy_law_residual(&traj, &ck, 3.0).unwrap();
        assert!(r <= 1e-12, "fixed-point residual {r}");

        // generic orbit
        let init = PhasePoint::new(0.6, 0.2, 1.0).unwrap();
        let c = StepControl::with_tols(1e-12, 1e-14).with_h_max(1e-3);
        let traj = flow(HamChoice::Tdh, &init, 6.0, &ck, &c).unwrap();
        for tau in [1.5, 3.0, 5.5] {
            let r = energy_law_residual(&traj, &ck, tau).unwrap();
            assert!(r <= 1e-7, "energy-law residual {r} at tau = {tau}");
        }

        // corrupted trajectory: scale p by 1.01
        let states: Vec<Vec<f64>> = traj
            .states()
            .iter()
            .map(|y| vec![y[0], y[1] * 1.01])
            .collect();
        let derivs: Vec<Vec<f64>> = traj
            .derivatives()
            .iter()
            .map(|d| vec![d[0], d[1] * 1.01])
            .collect();
        let corrupted = Trajectory::from_samples(traj.times().to_vec(), states, derivs);
        let r = energy_law_residual(&corrupted, &ck, 3.0).unwrap();
        assert!(r >= 1e-3, "corrupted residual only {r}");
    }

    #[test]
    fn tilde_energy_law() {
        let ck = CkParams::new(1.0, 1.0);
        let init = PhasePoint::new(0.5, 0.1, 1.0).unwrap();
        let c = StepControl::with_tols(1e-12, 1e-14).with_h_max(1e-3);
        let traj = flow(HamChoice::Tdhn, &init, 2.0, &ck, &c).unwrap();
        for tt in [0.5, 1.0, 1.8] {
            let r = energy_law_residual_tilde(&traj, &ck, tt).unwrap();
            assert!(r <= 1e-7, "tilde energy-law residual {r} at t~ = {tt}");
        }
    }

    #[test]
    fn mirror_symmetry_at_equal_couplings() {
        let ck = CkParams::new(1.0, 1.0);
        let plus = flow(
            HamChoice::Tdh,
            &PhasePoint::new(0.8, 0.0, 1.0).unwrap(),
            15.0,
            &ck,
            &control(),
        )
        .unwrap();
        let minus = flow(
            HamChoice::Tdh,
            &PhasePoint::new(-0.8, 0.0, 1.0).unwrap(),
            15.0,
            &ck,
            &control(),
        )
        .unwrap();
        for i in 1..=14 {
            let tau = 1.0 + i as f64;
            let a = plus.evaluate(tau).unwrap();
            let b = minus.evaluate(tau).unwrap();
            assert!((a[0] + b[0]).abs() <= 1e-8);
            let ha = h_value(&PhasePoint::new(a[0], a[1], tau).unwrap(), &ck);
            let hb = h_value(&PhasePoint::new(b[0], b[1], tau).unwrap(), &ck);
            assert!((ha - hb).abs() <= 1e-9, "mirror energies differ at tau = {tau}");
        }
    }

    #[test]
    fn flow_agrees_with_u_coordinates() {
        // close the loop against the (u, tau) representation
        let ck = CkParams::new(1.0, 1.0);
        let params = crate::piii::params_from_ck(&ck);
        let u0 = PiiiState::new(1.0, 2.0, 0.0).unwrap();
        let q0 = crate::piii::transform_u_to_q(&u0).unwrap();
        // p = tau dq/dtau
        let init = PhasePoint::new(q0.q, q0.tau * q0.dq, q0.tau).unwrap();

        let ham = flow(HamChoice::Tdh, &init, 8.0, &ck, &control()).unwrap();
        let sol =
            crate::piii::solve_piii(&params, &u0, 8.0, &control(), &Default::default()).unwrap();
        for i in 1..=10 {
            let tau = 1.0 + 7.0 * i as f64 / 10.0;
            let q_ham = ham.evaluate(tau).unwrap()[0];
            let u = sol.state_at(tau).unwrap();
            let q_u = crate::piii::transform_u_to_q(&u).unwrap();
            assert!((q_ham - q_u.q).abs() <= 1e-9, "q gap at tau = {tau}");
            let _ = SinhState::new(tau, q_u.q, q_u.dq).unwrap();
        }
    }
}
