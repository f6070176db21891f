//! Adaptive explicit Runge-Kutta integration with dense output.
//!
//! The stepper is the Dormand-Prince 5(4) embedded pair with a
//! proportional-integral controller (Hairer, Norsett & Wanner, "Solving
//! Ordinary Differential Equations I", II.4). Dense output is cubic
//! Hermite on the stored (state, derivative) samples, which is enough for
//! the second-order finite-difference residual probes built on top of it.
//! All the flows integrated here are non-stiff away from t = 0.

use crate::error::{Error, Result};

/// Butcher tableau of the Dormand-Prince 5(4) pair.
mod dopri5 {
    pub const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
    pub const A: [[f64; 6]; 6] = [
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    /// Fifth-order solution weights (row 7 of A; the pair is FSAL).
    pub const B: [f64; 7] = [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
        0.0,
    ];
    /// Difference between the 5th- and 4th-order weights.
    pub const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
}

/// An initial value problem y' = rhs(t, y) on [t0, t_end].
///
/// `t_end < t0` integrates backward.
pub struct OdeProblem<F>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    pub rhs: F,
    pub t0: f64,
    pub y0: Vec<f64>,
    pub t_end: f64,
}

/// Step-size control parameters.
#[derive(Clone, Copy, Debug)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; 0 selects one automatically.
    pub h_init: f64,
    /// Hard cap on the step magnitude; also caps the dense-output
    /// interpolation error, which matters for residual probes.
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: 0.0,
            h_max: f64::INFINITY,
            max_steps: 1_000_000,
        }
    }
}

impl StepControl {
    pub fn with_tols(rtol: f64, atol: f64) -> Self {
        StepControl {
            rtol,
            atol,
            ..Default::default()
        }
    }

    pub fn with_h_max(mut self, h_max: f64) -> Self {
        self.h_max = h_max;
        self
    }
}

/// Terminal event: integration stops at the first accepted step whose
/// endpoint satisfies the predicate, with the crossing time refined by
/// bisection on the dense output.
pub struct EventSpec {
    pub label: &'static str,
    pub triggered: Box<dyn Fn(f64, &[f64]) -> bool>,
}

impl EventSpec {
    /// Stop when the max-norm of the state reaches `threshold`.
    pub fn norm_threshold(threshold: f64) -> Self {
        EventSpec {
            label: "norm-threshold",
            triggered: Box::new(move |_, y| {
                y.iter().fold(0.0f64, |m, v| m.max(v.abs())) >= threshold
            }),
        }
    }

    /// Stop when component `index` leaves the open interval (lo, hi).
    pub fn component_bounds(index: usize, lo: f64, hi: f64) -> Self {
        EventSpec {
            label: "component-bounds",
            triggered: Box::new(move |_, y| y[index] <= lo || y[index] >= hi),
        }
    }
}

/// Record of a triggered terminal event.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EventHit {
    pub t: f64,
    pub label: &'static str,
}

/// Sampled solution with derivative data for dense evaluation.
#[derive(Clone, Debug)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    derivs: Vec<Vec<f64>>,
    event: Option<EventHit>,
}

impl Trajectory {
    /// Build directly from samples; used for closed-form reference
    /// trajectories in tests and for degenerate-branch solutions.
    pub fn from_samples(times: Vec<f64>, states: Vec<Vec<f64>>, derivs: Vec<Vec<f64>>) -> Self {
        assert!(times.len() >= 2, "need at least two samples");
        assert_eq!(times.len(), states.len());
        assert_eq!(times.len(), derivs.len());
        let increasing = times[1] > times[0];
        for w in times.windows(2) {
            assert!(
                (w[1] > w[0]) == increasing && w[1] != w[0],
                "times must be strictly monotone"
            );
        }
        Trajectory {
            times,
            states,
            derivs,
            event: None,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn derivatives(&self) -> &[Vec<f64>] {
        &self.derivs
    }

    pub fn event(&self) -> Option<&EventHit> {
        self.event.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    /// (start, end) in integration order; end < start for backward runs.
    pub fn span(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().unwrap())
    }

    pub fn contains(&self, t: f64) -> bool {
        let (a, b) = self.span();
        if a <= b {
            (a..=b).contains(&t)
        } else {
            (b..=a).contains(&t)
        }
    }

    fn out_of_span_err(&self, t: f64) -> Error {
        let (a, b) = self.span();
        Error::OutOfSpan {
            t,
            span: (a.min(b), a.max(b)),
        }
    }

    /// Dense evaluation by cubic Hermite interpolation. A query at a
    /// stored sample time returns the stored state exactly.
    pub fn evaluate(&self, t: f64) -> Result<Vec<f64>> {
        if !self.contains(t) {
            return Err(self.out_of_span_err(t));
        }
        let increasing = self.times[1] > self.times[0];
        // binary search for the segment containing t
        let pos = if increasing {
            self.times.partition_point(|&x| x < t)
        } else {
            self.times.partition_point(|&x| x > t)
        };
        if pos < self.times.len() && self.times[pos] == t {
            return Ok(self.states[pos].clone());
        }
        let hi = pos.clamp(1, self.times.len() - 1);
        let lo = hi - 1;
        if self.times[lo] == t {
            return Ok(self.states[lo].clone());
        }

        let (t0, t1) = (self.times[lo], self.times[hi]);
        let h = t1 - t0;
        let theta = (t - t0) / h;
        let th2 = theta * theta;
        let th3 = th2 * theta;
        let h00 = 2.0 * th3 - 3.0 * th2 + 1.0;
        let h10 = th3 - 2.0 * th2 + theta;
        let h01 = -2.0 * th3 + 3.0 * th2;
        let h11 = th3 - th2;

        let n = self.dim();
        let mut out = vec![0.0; n];
        for i in 0..n {
            out[i] = h00 * self.states[lo][i]
                + h10 * h * self.derivs[lo][i]
                + h01 * self.states[hi][i]
                + h11 * h * self.derivs[hi][i];
        }
        Ok(out)
    }
}

fn rms_error_norm(err: &[f64], y_old: &[f64], y_new: &[f64], control: &StepControl) -> f64 {
    let n = err.len() as f64;
    let mut s = 0.0;
    for i in 0..err.len() {
        let sc = control.atol + control.rtol * y_old[i].abs().max(y_new[i].abs());
        let r = err[i] / sc;
        s += r * r;
    }
    (s / n).sqrt()
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Automatic initial step selection (Hairer et al., II.4 starting step).
fn initial_step<F>(rhs: &F, t0: f64, y0: &[f64], f0: &[f64], direction: f64, control: &StepControl) -> f64
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let sc: Vec<f64> = y0
        .iter()
        .map(|y| control.atol + control.rtol * y.abs())
        .collect();
    let d0 = (y0.iter().zip(&sc).map(|(y, s)| (y / s).powi(2)).sum::<f64>() / n as f64).sqrt();
    let d1 = (f0.iter().zip(&sc).map(|(f, s)| (f / s).powi(2)).sum::<f64>() / n as f64).sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };

    let y1: Vec<f64> = y0
        .iter()
        .zip(f0)
        .map(|(y, f)| y + direction * h0 * f)
        .collect();
    let mut f1 = vec![0.0; n];
    rhs(t0 + direction * h0, &y1, &mut f1);
    let d2 = (f1
        .iter()
        .zip(f0)
        .zip(&sc)
        .map(|((a, b), s)| ((a - b) / s).powi(2))
        .sum::<f64>()
        / n as f64)
        .sqrt()
        / h0;

    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(control.h_max)
}

/// Integrate an initial value problem.
///
/// The local error per step is kept at `atol + rtol * |y|` by the embedded
/// 5(4) pair; the trajectory covers the whole span unless a terminal event
/// fires, in which case it ends at the refined crossing time with the
/// event recorded on the trajectory.
pub fn integrate<F>(
    problem: &OdeProblem<F>,
    control: &StepControl,
    event: Option<&EventSpec>,
) -> Result<Trajectory>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    assert!(problem.t0 != problem.t_end, "empty integration span");
    assert!(all_finite(&problem.y0), "non-finite initial state");
    assert!(control.rtol > 0.0 && control.atol > 0.0, "tolerances must be positive");
    assert!(control.max_steps >= 1, "max_steps must be at least 1");

    let n = problem.y0.len();
    let direction = (problem.t_end - problem.t0).signum();
    let span = (problem.t_end - problem.t0).abs();
    let rhs = &problem.rhs;

    let mut t = problem.t0;
    let mut y = problem.y0.clone();
    let mut f = vec![0.0; n];
    rhs(t, &y, &mut f);
    if !all_finite(&f) {
        return Err(Error::NonFiniteState { t });
    }

    let mut h = if control.h_init > 0.0 {
        control.h_init.min(span).min(control.h_max)
    } else {
        initial_step(rhs, t, &y, &f, direction, control).min(span)
    };

    let mut times = vec![t];
    let mut states = vec![y.clone()];
    let mut derivs = vec![f.clone()];
    let mut hit = None;

    // PI controller state (safety 0.9, exponents 0.7/5 and 0.4/5)
    const SAFETY: f64 = 0.9;
    const ALPHA: f64 = 0.7 / 5.0;
    const BETA: f64 = 0.4 / 5.0;
    let mut err_old: f64 = 1e-4;

    let mut k = vec![vec![0.0; n]; 7];
    k[0].copy_from_slice(&f);
    let mut steps = 0usize;

    'outer: while (problem.t_end - t) * direction > 0.0 {
        if steps >= control.max_steps {
            return Err(Error::MaxStepsExceeded {
                t,
                max_steps: control.max_steps,
            });
        }
        steps += 1;

        let remaining = (problem.t_end - t).abs();
        let underflow = 100.0 * f64::EPSILON * t.abs().max(problem.t_end.abs());
        let h_cap = h.min(control.h_max);
        // Underflow means the controller collapsed the step, not that the
        // remaining span happens to be a roundoff residue.
        if h_cap <= underflow && h_cap < remaining {
            return Err(Error::StepSizeUnderflow { t, h: h_cap });
        }
        let h_eff = h_cap.min(remaining);
        let hs = direction * h_eff;

        // stages 2..7 (stage 1 is the FSAL derivative already in k[0])
        let mut y_stage = vec![0.0; n];
        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = dopri5::A[s - 1][j];
                    if a != 0.0 {
                        acc += a * kj[i];
                    }
                }
                y_stage[i] = y[i] + hs * acc;
            }
            let t_stage = t + dopri5::C[s] * hs;
            rhs(t_stage, &y_stage, &mut k[s]);
            if !all_finite(&k[s]) {
                return Err(Error::NonFiniteState { t: t_stage });
            }
        }

        // 5th-order solution and embedded error estimate
        let mut y_new = vec![0.0; n];
        let mut err_vec = vec![0.0; n];
        for i in 0..n {
            let mut acc = 0.0;
            let mut eacc = 0.0;
            for s in 0..7 {
                if dopri5::B[s] != 0.0 {
                    acc += dopri5::B[s] * k[s][i];
                }
                if dopri5::E[s] != 0.0 {
                    eacc += dopri5::E[s] * k[s][i];
                }
            }
            y_new[i] = y[i] + hs * acc;
            err_vec[i] = hs * eacc;
        }
        if !all_finite(&y_new) {
            return Err(Error::NonFiniteState { t: t + hs });
        }

        let err = rms_error_norm(&err_vec, &y, &y_new, control).max(1e-30);

        if err <= 1.0 {
            // accept; snap a within-roundoff endpoint onto t_end exactly
            let mut t_new = t + hs;
            if (problem.t_end - t_new).abs() <= underflow {
                t_new = problem.t_end;
            }
            let f_new = k[6].clone(); // FSAL: stage 7 is rhs(t_new, y_new)

            if let Some(spec) = event {
                if (spec.triggered)(t_new, &y_new) {
                    let (te, ye) = refine_event(
                        spec, t, &y, &f, t_new, &y_new, &f_new,
                    );
                    let mut fe = vec![0.0; n];
                    rhs(te, &ye, &mut fe);
                    times.push(te);
                    states.push(ye);
                    derivs.push(fe);
                    hit = Some(EventHit {
                        t: te,
                        label: spec.label,
                    });
                    break 'outer;
                }
            }

            times.push(t_new);
            states.push(y_new.clone());
            derivs.push(f_new.clone());

            t = t_new;
            y = y_new;
            f = f_new;
            k[0].copy_from_slice(&f);

            let factor = (SAFETY * err.powf(-ALPHA) * err_old.powf(BETA)).clamp(0.2, 5.0);
            h = (h_eff * factor).min(control.h_max);
            err_old = err.max(1e-4);
        } else {
            // reject: shrink and retry
            let factor = (SAFETY * err.powf(-0.2)).clamp(0.1, 1.0);
            h = h_eff * factor;
        }
    }

    let mut traj = Trajectory::from_samples(times, states, derivs);
    traj.event = hit;
    Ok(traj)
}

/// Bisect the last step down to the earliest trigger time, using the cubic
/// Hermite interpolant of that step. Relative time accuracy 1e-12.
fn refine_event(
    spec: &EventSpec,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    t1: f64,
    y1: &[f64],
    f1: &[f64],
) -> (f64, Vec<f64>) {
    let n = y0.len();
    let h = t1 - t0;
    let interp = |t: f64| -> Vec<f64> {
        let theta = (t - t0) / h;
        let th2 = theta * theta;
        let th3 = th2 * theta;
        let h00 = 2.0 * th3 - 3.0 * th2 + 1.0;
        let h10 = th3 - 2.0 * th2 + theta;
        let h01 = -2.0 * th3 + 3.0 * th2;
        let h11 = th3 - th2;
        (0..n)
            .map(|i| h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i])
            .collect()
    };

    // If the state already triggers at the left endpoint, the event time is t0.
    if (spec.triggered)(t0, y0) {
        return (t0, y0.to_vec());
    }

    let mut lo = t0;
    let mut hi = t1;
    let tol = 1e-12 * t1.abs().max(t0.abs()).max(1e-300);
    while (hi - lo).abs() > tol {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let ym = interp(mid);
        if (spec.triggered)(mid, &ym) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (hi, interp(hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn decay() -> OdeProblem<impl Fn(f64, &[f64], &mut [f64])> {
        OdeProblem {
            rhs: |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = -y[0],
            t0: 0.0,
            y0: vec![1.0],
            t_end: 1.0,
        }
    }

    #[test]
    fn exponential_decay_matches_closed_form() {
        let traj = integrate(&decay(), &StepControl::default(), None).unwrap();
        let y_end = traj.states().last().unwrap()[0];
        assert!((y_end - (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn harmonic_oscillator_energy_drift() {
        let period = 2.0 * std::f64::consts::PI;
        let problem = OdeProblem {
            rhs: |_t: f64, y: &[f64], dy: &mut [f64]| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            t0: 0.0,
            y0: vec![1.0, 0.0],
            t_end: 10.0 * period,
        };
        let traj = integrate(&problem, &StepControl::default(), None).unwrap();
        let energy = |y: &[f64]| 0.5 * (y[0] * y[0] + y[1] * y[1]);
        let e0 = energy(&traj.states()[0]);
        let drift = traj
            .states()
            .iter()
            .map(|y| (energy(y) - e0).abs())
            .fold(0.0f64, f64::max);
        assert!(drift <= 1e-7, "energy drift {drift}");
    }

    #[test]
    fn blow_up_event_terminates_near_pole() {
        // y' = y^2, y(0) = 1 blows up at t = 1
        let problem = OdeProblem {
            rhs: |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = y[0] * y[0],
            t0: 0.0,
            y0: vec![1.0],
            t_end: 2.0,
        };
        let event = EventSpec::norm_threshold(1e6);
        let traj = integrate(&problem, &StepControl::default(), Some(&event)).unwrap();
        let hit = traj.event().expect("event should fire");
        // closed form: y = 1/(1-t) reaches 1e6 at t = 1 - 1e-6
        assert!((hit.t - (1.0 - 1e-6)).abs() < 1e-8, "hit at {}", hit.t);
        assert_eq!(hit.label, "norm-threshold");
        let y_end = traj.states().last().unwrap()[0];
        assert!((y_end - 1e6).abs() / 1e6 < 1e-6);
    }

    #[test]
    fn dense_output_at_sample_is_exact() {
        let traj = integrate(&decay(), &StepControl::default(), None).unwrap();
        let idx = traj.times().len() / 2;
        let t_mid = traj.times()[idx];
        let v = traj.evaluate(t_mid).unwrap();
        assert_eq!(v, traj.states()[idx]);
    }

    #[test]
    fn dense_output_linear_rhs_is_exact() {
        let problem = OdeProblem {
            rhs: |_t: f64, _y: &[f64], dy: &mut [f64]| dy[0] = 1.0,
            t0: 0.0,
            y0: vec![0.0],
            t_end: 1.0,
        };
        let traj = integrate(&problem, &StepControl::default(), None).unwrap();
        let v = traj.evaluate(0.5).unwrap();
        assert!((v[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn dense_output_decay_midpoints() {
        let traj = integrate(&decay(), &StepControl::default(), None).unwrap();
        for i in 0..traj.times().len() - 1 {
            let tm = 0.5 * (traj.times()[i] + traj.times()[i + 1]);
            let v = traj.evaluate(tm).unwrap();
            assert!((v[0] - (-tm).exp()).abs() <= 1e-8);
        }
    }

    #[test]
    fn out_of_span_is_an_error() {
        let traj = integrate(&decay(), &StepControl::default(), None).unwrap();
        assert!(matches!(traj.evaluate(1.5), Err(Error::OutOfSpan { .. })));
        assert!(matches!(traj.evaluate(-0.1), Err(Error::OutOfSpan { .. })));
    }

    #[test]
    fn max_steps_is_enforced() {
        let control = StepControl {
            max_steps: 10,
            ..Default::default()
        };
        let problem = OdeProblem {
            rhs: |_t: f64, y: &[f64], dy: &mut [f64]| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            t0: 0.0,
            y0: vec![1.0, 0.0],
            t_end: 100.0,
        };
        assert!(matches!(
            integrate(&problem, &control, None),
            Err(Error::MaxStepsExceeded { .. })
        ));
    }

    #[test]
    fn non_finite_rhs_is_an_error() {
        let problem = OdeProblem {
            rhs: |t: f64, _y: &[f64], dy: &mut [f64]| {
                dy[0] = if t > 0.5 { f64::NAN } else { 1.0 };
            },
            t0: 0.0,
            y0: vec![0.0],
            t_end: 1.0,
        };
        assert!(matches!(
            integrate(&problem, &StepControl::default(), None),
            Err(Error::NonFiniteState { .. })
        ));
    }

    #[test]
    fn backward_integration_works() {
        let problem = OdeProblem {
            rhs: |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = -y[0],
            t0: 1.0,
            y0: vec![(-1.0f64).exp()],
            t_end: 0.0,
        };
        let traj = integrate(&problem, &StepControl::default(), None).unwrap();
        assert!((traj.states().last().unwrap()[0] - 1.0).abs() < 1e-9);
        // dense evaluation inside a decreasing-time trajectory
        let v = traj.evaluate(0.5).unwrap();
        assert!((v[0] - (-0.5f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn tightening_tolerances_does_not_hurt() {
        let mut prev_err = f64::INFINITY;
        for exp in [6, 8, 10] {
            let control = StepControl::with_tols(10f64.powi(-exp), 10f64.powi(-exp - 2));
            let traj = integrate(&decay(), &control, None).unwrap();
            let err = (traj.states().last().unwrap()[0] - (-1.0f64).exp()).abs();
            assert!(
                err <= prev_err * 1.01 + 5e-14,
                "error grew from {prev_err} to {err} at rtol 1e-{exp}"
            );
            prev_err = err;
        }
    }

    #[test]
    fn forward_backward_roundtrip() {
        let control = StepControl::default();
        let problem = OdeProblem {
            rhs: |_t: f64, y: &[f64], dy: &mut [f64]| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            t0: 0.0,
            y0: vec![1.0, 0.0],
            t_end: 2.0,
        };
        let fwd = integrate(&problem, &control, None).unwrap();
        let back = OdeProblem {
            rhs: |_t: f64, y: &[f64], dy: &mut [f64]| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            t0: 2.0,
            y0: fwd.states().last().unwrap().clone(),
            t_end: 0.0,
        };
        let bwd = integrate(&back, &control, None).unwrap();
        let y_back = bwd.states().last().unwrap();
        let bound = 10.0 * (control.atol + control.rtol * 1.0);
        assert!((y_back[0] - 1.0).abs() <= bound);
        assert!(y_back[1].abs() <= bound);
    }

    proptest! {
        #[test]
        fn deterministic_replay(y0 in 0.5..2.0f64, t_end in 0.5..3.0f64) {
            let make = || OdeProblem {
                rhs: |t: f64, y: &[f64], dy: &mut [f64]| dy[0] = -y[0] * t.sin(),
                t0: 0.0,
                y0: vec![y0],
                t_end,
            };
            let a = integrate(&make(), &StepControl::default(), None).unwrap();
            let b = integrate(&make(), &StepControl::default(), None).unwrap();
            prop_assert_eq!(a.times(), b.times());
            prop_assert_eq!(a.states(), b.states());
        }
    }
}
