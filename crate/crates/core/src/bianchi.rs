//! Bianchi model data and the matrix zero-curvature dynamics.
//!
//! A Bianchi I/II/VI0/VII0 metric with two commuting spacelike Killing
//! vectors factorizes as g(t,z) = l^T(z) gamma-hat(t) l(z) with
//! det l = 1 and gamma-hat = diag(a, t^2/a), so det g = t^2 and
//! sigma = t. The coupling matrix C = [[c, d], [d, k]] fixes both the
//! z-dependence (dl/dz = C^T eps l) and the t-dynamics
//!
//!   (1/t) d/dt(t gamma' gamma^-1) = R gamma R^T gamma^-1
//!                                   - gamma R^T gamma^-1 R,   R = eps C,
//!
//! whose diagonal reduction is the scale-factor equation in [`crate::piii`].
//! This module also assembles sampled metric fields, integrates the
//! conformal factor f(t) by quadrature and verifies the Ernst equation by
//! grid residuals with a convergence-order estimate.

use crate::error::{Error, Result};
use crate::linalg::Mat2r;
use crate::ode::{integrate, EventSpec, OdeProblem, StepControl, Trajectory};
use crate::piii::CkParams;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Symmetric coupling matrix [[c, d], [d, k]].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymmetricC {
    pub c: f64,
    pub d: f64,
    pub k: f64,
}

impl SymmetricC {
    pub fn new(c: f64, d: f64, k: f64) -> Self {
        assert!(c.is_finite() && d.is_finite() && k.is_finite());
        SymmetricC { c, d, k }
    }

    pub fn diag(c: f64, k: f64) -> Self {
        SymmetricC::new(c, 0.0, k)
    }

    pub fn as_mat(&self) -> Mat2r {
        Mat2r::new([[self.c, self.d], [self.d, self.k]])
    }

    pub fn ck(&self) -> CkParams {
        CkParams::new(self.c, self.k)
    }
}

/// The four standard symmetry classes, plus arbitrary symmetric couplings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModelClass {
    BianchiI,
    BianchiII,
    BianchiVI0,
    BianchiVII0,
    Custom(SymmetricC),
}

/// Coupling matrix of a model class.
pub fn c_matrix(m: &ModelClass) -> SymmetricC {
    match m {
        ModelClass::BianchiI => SymmetricC::diag(0.0, 0.0),
        ModelClass::BianchiII => SymmetricC::diag(1.0, 0.0),
        ModelClass::BianchiVI0 => SymmetricC::diag(1.0, -1.0),
        ModelClass::BianchiVII0 => SymmetricC::diag(1.0, 1.0),
        ModelClass::Custom(c) => *c,
    }
}

/// R = eps C, with eps the antisymmetric unit matrix (entry (0,1) = 1).
pub fn r_from_c(cm: &SymmetricC) -> Mat2r {
    Mat2r::epsilon() * cm.as_mat()
}

/// Generator of the l-matrix equation dl/dz = C^T eps l. Trace-free, so
/// det l(z) = 1 for every z.
pub fn l_generator(cm: &SymmetricC) -> Mat2r {
    cm.as_mat().transpose() * Mat2r::epsilon()
}

/// Closed-form l(z) for the four standard classes.
pub fn l_of_z(m: &ModelClass, z: f64) -> Result<Mat2r> {
    match m {
        ModelClass::BianchiI => Ok(Mat2r::identity()),
        ModelClass::BianchiII => Ok(Mat2r::new([[1.0, z], [0.0, 1.0]])),
        ModelClass::BianchiVI0 => Ok(Mat2r::new([
            [z.cosh(), z.sinh()],
            [z.sinh(), z.cosh()],
        ])),
        ModelClass::BianchiVII0 => Ok(Mat2r::new([
            [z.cos(), z.sin()],
            [-z.sin(), z.cos()],
        ])),
        ModelClass::Custom(_) => Err(Error::UnsupportedClass),
    }
}

/// Closed-form l(z) = exp(z C^T eps) for any symmetric C, via
/// Cayley-Hamilton: the generator G is trace-free with G^2 = -det(C) I,
/// so l is trigonometric, hyperbolic or affine in z depending on the
/// sign of det C.
pub fn l_closed(cm: &SymmetricC, z: f64) -> Mat2r {
    let g = l_generator(cm);
    let det_c = cm.c * cm.k - cm.d * cm.d;
    let id = Mat2r::identity();
    if det_c > 0.0 {
        let w = det_c.sqrt();
        id.scale((w * z).cos()) + g.scale((w * z).sin() / w)
    } else if det_c < 0.0 {
        let w = (-det_c).sqrt();
        id.scale((w * z).cosh()) + g.scale((w * z).sinh() / w)
    } else {
        id + g.scale(z)
    }
}

/// Numerically integrated l(z) from l(0) = I.
pub struct LTrajectory {
    traj: Trajectory,
}

impl LTrajectory {
    pub fn l_at(&self, z: f64) -> Result<Mat2r> {
        let y = self.traj.evaluate(z)?;
        Ok(Mat2r::new([[y[0], y[1]], [y[2], y[3]]]))
    }

    pub fn span(&self) -> (f64, f64) {
        self.traj.span()
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.traj
    }
}

/// Integrate dl/dz = C^T eps l from the identity to z_end.
pub fn solve_l_ode(cm: &SymmetricC, z_end: f64, control: &StepControl) -> Result<LTrajectory> {
    let g = l_generator(cm);
    let problem = OdeProblem {
        rhs: move |_z: f64, y: &[f64], dy: &mut [f64]| {
            let l = Mat2r::new([[y[0], y[1]], [y[2], y[3]]]);
            let dl = g * l;
            dy[0] = dl.at(0, 0);
            dy[1] = dl.at(0, 1);
            dy[2] = dl.at(1, 0);
            dy[3] = dl.at(1, 1);
        },
        t0: 0.0,
        y0: vec![1.0, 0.0, 0.0, 1.0],
        t_end: z_end,
    };
    Ok(LTrajectory {
        traj: integrate(&problem, control, None)?,
    })
}

/// Anything that can hand out (gamma-hat, d/dt gamma-hat) on a t-span.
///
/// Implemented by evolved trajectories and by their deliberately
/// perturbed variants used in sensitivity probes. Sources are immutable
/// views, so concurrent probes may share them.
pub trait GammaSource: Sync {
    /// Ordered (min, max) span.
    fn span(&self) -> (f64, f64);
    fn gamma_pair(&self, t: f64) -> Result<(Mat2r, Mat2r)>;
}

/// Evolved diagonal degree of freedom: gamma-hat(t) = diag(a, t^2/a),
/// carried as an (a, a') trajectory so that det gamma-hat = t^2 holds by
/// construction.
#[derive(Clone, Debug)]
pub struct GammaTrajectory {
    traj: Trajectory,
}

impl GammaTrajectory {
    fn wrap(traj: Trajectory) -> Self {
        for y in traj.states() {
            assert!(y[0] > 0.0, "scale factor must stay positive");
        }
        GammaTrajectory { traj }
    }

    /// Wrap an existing (a, a') trajectory. Panics unless every sample
    /// keeps a > 0.
    pub fn from_trajectory(traj: Trajectory) -> Self {
        GammaTrajectory::wrap(traj)
    }

    /// Sample a closed-form (a, a', a'') on n uniform nodes.
    pub fn from_closed_form(
        f: impl Fn(f64) -> (f64, f64, f64),
        span: (f64, f64),
        n: usize,
    ) -> Self {
        assert!(n >= 2 && span.1 != span.0);
        let mut times = Vec::with_capacity(n);
        let mut states = Vec::with_capacity(n);
        let mut derivs = Vec::with_capacity(n);
        for i in 0..n {
            let t = span.0 + (span.1 - span.0) * i as f64 / (n - 1) as f64;
            let (a, da, dda) = f(t);
            times.push(t);
            states.push(vec![a, da]);
            derivs.push(vec![da, dda]);
        }
        GammaTrajectory::wrap(Trajectory::from_samples(times, states, derivs))
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.traj
    }

    /// (a, a') at t.
    pub fn scale_factor(&self, t: f64) -> Result<(f64, f64)> {
        let y = self.traj.evaluate(t)?;
        Ok((y[0], y[1]))
    }
}

impl GammaSource for GammaTrajectory {
    fn span(&self) -> (f64, f64) {
        let (a, b) = self.traj.span();
        (a.min(b), a.max(b))
    }

    fn gamma_pair(&self, t: f64) -> Result<(Mat2r, Mat2r)> {
        let (a, da) = self.scale_factor(t)?;
        if a <= 0.0 {
            return Err(Error::DomainError(format!(
                "scale factor a({t}) = {a} is not positive"
            )));
        }
        let gamma = Mat2r::diag(a, t * t / a);
        let gamma_dot = Mat2r::diag(da, 2.0 * t / a - t * t * da / (a * a));
        Ok((gamma, gamma_dot))
    }
}

/// Multiplicative perturbation a -> a (1 + p(t)) of a gamma source, with
/// p either constant or a seeded low-order Fourier sum. b = t^2/a is
/// recomputed, so det gamma-hat = t^2 survives while the dynamics breaks.
pub struct PerturbedGamma<'a, S: GammaSource> {
    inner: &'a S,
    /// (amplitude, angular frequency, phase) triples; constant terms have
    /// frequency zero.
    modes: Vec<(f64, f64, f64)>,
}

impl<'a, S: GammaSource> PerturbedGamma<'a, S> {
    /// Constant relative perturbation (1 + eps).
    pub fn uniform(inner: &'a S, eps: f64) -> Self {
        PerturbedGamma {
            inner,
            modes: vec![(eps, 0.0, std::f64::consts::FRAC_PI_2)],
        }
    }

    /// Smooth seeded perturbation with peak amplitude <= eps; identical
    /// seeds give identical perturbations.
    pub fn seeded(inner: &'a S, eps: f64, seed: u64) -> Self {
        let (t0, t1) = inner.span();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut raw: Vec<(f64, f64, f64)> = (1..=3)
            .map(|j| {
                let amp: f64 = rng.gen_range(0.25..1.0);
                let omega = j as f64 * std::f64::consts::PI / (t1 - t0);
                let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                (amp, omega, phase)
            })
            .collect();
        let total: f64 = raw.iter().map(|m| m.0).sum();
        for m in &mut raw {
            m.0 *= eps / total;
        }
        PerturbedGamma { inner, modes: raw }
    }

    fn perturbation(&self, t: f64) -> (f64, f64) {
        let mut p = 0.0;
        let mut dp = 0.0;
        for &(amp, omega, phase) in &self.modes {
            p += amp * (omega * t + phase).sin();
            dp += amp * omega * (omega * t + phase).cos();
        }
        (p, dp)
    }
}

impl<S: GammaSource> GammaSource for PerturbedGamma<'_, S> {
    fn span(&self) -> (f64, f64) {
        self.inner.span()
    }

    fn gamma_pair(&self, t: f64) -> Result<(Mat2r, Mat2r)> {
        let (gamma, gamma_dot) = self.inner.gamma_pair(t)?;
        let (a, da) = (gamma.at(0, 0), gamma_dot.at(0, 0));
        let (p, dp) = self.perturbation(t);
        let ap = a * (1.0 + p);
        let dap = da * (1.0 + p) + a * dp;
        let g = Mat2r::diag(ap, t * t / ap);
        let gd = Mat2r::diag(dap, 2.0 * t / ap - t * t * dap / (ap * ap));
        Ok((g, gd))
    }
}

/// Outcome of a gamma-hat evolution; a positivity loss is flagged, not
/// an error.
#[derive(Clone, Debug)]
pub struct GammaEvolution {
    pub gamma: GammaTrajectory,
    pub positivity_loss_at: Option<f64>,
}

/// Integrate the diagonal dynamics from (a0, a0') over a t-span in
/// (0, inf).
pub fn evolve_gamma(
    ck: &CkParams,
    a0: f64,
    da0: f64,
    t_span: (f64, f64),
    control: &StepControl,
) -> Result<GammaEvolution> {
    if t_span.0 <= 0.0 || t_span.1 <= 0.0 {
        return Err(Error::DomainError(format!(
            "t span must stay inside (0, inf), got {t_span:?}"
        )));
    }
    if a0 <= 0.0 {
        return Err(Error::DomainError(format!("need a0 > 0, got {a0}")));
    }
    let p = *ck;
    let problem = OdeProblem {
        rhs: move |t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            let (a, da) = (y[0], y[1]);
            let ratio = a / t;
            dy[1] = da * da / a - da / t
                + a * (p.k * p.k / (ratio * ratio) - p.c * p.c * ratio * ratio);
        },
        t0: t_span.0,
        y0: vec![a0, da0],
        t_end: t_span.1,
    };
    let floor = 1e-8 * a0;
    let event = EventSpec {
        label: "positivity-loss",
        triggered: Box::new(move |_t, y: &[f64]| y[0] <= floor),
    };
    let traj = integrate(&problem, control, Some(&event))?;
    let positivity_loss_at = traj.event().map(|hit| hit.t);
    Ok(GammaEvolution {
        gamma: GammaTrajectory::wrap(traj),
        positivity_loss_at,
    })
}

/// Degenerate-branch solution a = sqrt(-k/c) t, available only when the
/// couplings have opposite signs.
pub fn special_branch_a(cm: &SymmetricC, t: f64) -> Result<f64> {
    if cm.c == 0.0 || cm.k * cm.c >= 0.0 {
        return Err(Error::DomainError(format!(
            "degenerate branch needs k/c < 0, got c = {}, k = {}",
            cm.c, cm.k
        )));
    }
    Ok((-cm.k / cm.c).sqrt() * t)
}

/// Residual of the diagonal consistency equation
/// t^-1 d/dt(t a'/a) - (k^2 b/a - c^2 a/b) on the degenerate branch,
/// with the derivative taken by central differences of the closed form.
pub fn special_branch_residual(cm: &SymmetricC, t: f64) -> Result<f64> {
    let a_of = |t: f64| special_branch_a(cm, t);
    let a = a_of(t)?;
    let mu = a / t;
    let log_deriv = |t: f64, a: f64| t * mu / a;
    let h = 1e-5 * t;
    let lhs = (log_deriv(t + h, a_of(t + h)?) - log_deriv(t - h, a_of(t - h)?)) / (2.0 * h) / t;
    let b = t * t / a;
    let rhs = cm.k * cm.k * b / a - cm.c * cm.c * a / b;
    Ok((lhs - rhs).abs())
}

/// Evolve any symmetric coupling matrix. For d != 0 the consistency
/// system forces the degenerate linear branch, so the initial data must
/// already sit on it.
pub fn evolve_model(
    cm: &SymmetricC,
    a0: f64,
    da0: f64,
    t_span: (f64, f64),
    control: &StepControl,
) -> Result<GammaEvolution> {
    if cm.d == 0.0 {
        return evolve_gamma(&cm.ck(), a0, da0, t_span, control);
    }
    let mu_t0 = special_branch_a(cm, t_span.0)?;
    let mu = mu_t0 / t_span.0;
    let on_branch =
        (a0 - mu_t0).abs() <= 1e-9 * mu_t0.abs() && (da0 - mu).abs() <= 1e-9 * mu.abs().max(1.0);
    if !on_branch {
        return Err(Error::DomainError(format!(
            "off-diagonal coupling d = {} admits only the linear branch a = {mu} t",
            cm.d
        )));
    }
    let gamma = GammaTrajectory::from_closed_form(|t| (mu * t, mu, 0.0), t_span, 2001);
    Ok(GammaEvolution {
        gamma,
        positivity_loss_at: None,
    })
}

/// Frobenius norm of the zero-curvature defect
/// (1/t) d/dt(t gamma' gamma^-1) - (R gamma R^T gamma^-1 - gamma R^T gamma^-1 R)
/// at a single time, with the t-derivative from central differences at
/// h = 1e-5 t plus one Richardson refinement.
pub fn zcb_residual(source: &dyn GammaSource, r: &Mat2r, t: f64) -> Result<f64> {
    let h = 1e-5 * t.abs();
    let (lo, hi) = source.span();
    if t - h < lo || t + h > hi {
        return Err(Error::OutOfSpan { t, span: (lo, hi) });
    }

    let flow = |t: f64| -> Result<Mat2r> {
        let (gamma, gamma_dot) = source.gamma_pair(t)?;
        Ok((gamma_dot * gamma.inv()?).scale(t))
    };
    let diff = |h: f64| -> Result<Mat2r> {
        Ok((flow(t + h)? - flow(t - h)?).scale(1.0 / (2.0 * h)))
    };
    let d_h = diff(h)?;
    let d_h2 = diff(h / 2.0)?;
    let lhs = (d_h2.scale(4.0) - d_h).scale(1.0 / 3.0).scale(1.0 / t);

    let (gamma, _) = source.gamma_pair(t)?;
    let gamma_inv = gamma.inv()?;
    let rt = r.transpose();
    let rhs = *r * gamma * rt * gamma_inv - gamma * rt * gamma_inv * *r;
    Ok((lhs - rhs).frobenius_norm())
}

/// Multiplicative grid perturbation 1 + amp sin(kz z + kt t + phase),
/// applied to every metric entry at sampling time.
#[derive(Clone, Copy, Debug)]
pub struct GridPerturbation {
    pub amplitude: f64,
    pub kz: f64,
    pub kt: f64,
    pub phase: f64,
}

impl GridPerturbation {
    fn factor(&self, t: f64, z: f64) -> f64 {
        1.0 + self.amplitude * (self.kz * z + self.kt * t + self.phase).sin()
    }
}

/// Pointwise-exact evaluators behind a sampled metric field.
#[derive(Clone, Debug)]
struct MetricSource {
    coupling: SymmetricC,
    gamma: GammaTrajectory,
}

impl MetricSource {
    fn g_at(&self, t: f64, z: f64) -> Result<Mat2r> {
        let (gamma, _) = self.gamma.gamma_pair(t)?;
        let l = l_closed(&self.coupling, z);
        Ok(l.transpose() * gamma * l)
    }

    /// A = -sigma g_xi g^-1 and B = sigma g_eta g^-1 evaluated exactly:
    /// with l' = -R^T l these collapse to conjugations of
    /// gamma' -+ (R gamma + gamma R^T).
    fn ab_at(&self, t: f64, z: f64) -> Result<(Mat2r, Mat2r)> {
        let (gamma, gamma_dot) = self.gamma.gamma_pair(t)?;
        let gamma_inv = gamma.inv()?;
        let r = r_from_c(&self.coupling);
        let z_part = r * gamma + gamma * r.transpose();
        let l = l_closed(&self.coupling, z);
        let lt = l.transpose();
        let lt_inv = lt.inv()?;
        let a = (lt * (gamma_dot - z_part) * gamma_inv * lt_inv).scale(-t);
        let b = (lt * (-gamma_dot - z_part) * gamma_inv * lt_inv).scale(t);
        Ok((a, b))
    }
}

/// Sampled metric on a rectangular (t, z) grid with sigma = t bookkeeping.
#[derive(Clone, Debug)]
pub struct MetricField {
    t_grid: Vec<f64>,
    z_grid: Vec<f64>,
    /// g[i][j] at (t_grid[i], z_grid[j]).
    g: Vec<Vec<Mat2r>>,
    sigma: Vec<f64>,
    f: Option<Vec<f64>>,
    source: MetricSource,
    perturbation: Option<GridPerturbation>,
}

fn check_uniform(grid: &[f64], name: &str) -> f64 {
    assert!(grid.len() >= 2, "{name} grid needs at least 2 nodes");
    let h = grid[1] - grid[0];
    assert!(h != 0.0, "{name} grid must be strictly monotone");
    for w in grid.windows(2) {
        let hi = w[1] - w[0];
        assert!(
            (hi - h).abs() <= 1e-12 * h.abs(),
            "{name} grid must be uniform"
        );
    }
    h
}

/// Uniform grid helper.
pub fn uniform_grid(start: f64, end: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && end != start);
    (0..n)
        .map(|i| start + (end - start) * i as f64 / (n - 1) as f64)
        .collect()
}

impl MetricField {
    pub fn t_grid(&self) -> &[f64] {
        &self.t_grid
    }

    pub fn z_grid(&self) -> &[f64] {
        &self.z_grid
    }

    pub fn g_at_node(&self, i: usize, j: usize) -> &Mat2r {
        &self.g[i][j]
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn f(&self) -> Option<&[f64]> {
        self.f.as_deref()
    }

    pub fn coupling(&self) -> SymmetricC {
        self.source.coupling
    }

    /// Pointwise-exact metric, bypassing the grid.
    pub fn g_exact(&self, t: f64, z: f64) -> Result<Mat2r> {
        self.source.g_at(t, z)
    }

    /// Pointwise-exact (A, B), bypassing the grid.
    pub fn ab_exact(&self, t: f64, z: f64) -> Result<(Mat2r, Mat2r)> {
        self.source.ab_at(t, z)
    }

    /// Re-sample the same source with a multiplicative probe perturbation.
    pub fn with_perturbation(&self, p: GridPerturbation) -> Result<MetricField> {
        assemble_from_source(self.source.clone(), &self.t_grid, &self.z_grid, Some(p))
    }
}

fn assemble_from_source(
    source: MetricSource,
    t_grid: &[f64],
    z_grid: &[f64],
    perturbation: Option<GridPerturbation>,
) -> Result<MetricField> {
    check_uniform(t_grid, "t");
    check_uniform(z_grid, "z");
    let mut g = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let mut row = Vec::with_capacity(z_grid.len());
        for &z in z_grid {
            let mut node = source.g_at(t, z)?;
            if let Some(p) = &perturbation {
                node = node.scale(p.factor(t, z));
            }
            row.push(node);
        }
        g.push(row);
    }

    let field = MetricField {
        t_grid: t_grid.to_vec(),
        z_grid: z_grid.to_vec(),
        g,
        sigma: t_grid.to_vec(),
        f: None,
        source,
        perturbation,
    };

    if field.perturbation.is_none() {
        // det g = t^2 and symmetry hold exactly up to roundoff
        for (i, &t) in field.t_grid.iter().enumerate() {
            for j in 0..field.z_grid.len() {
                let node = &field.g[i][j];
                let det_gap = (node.det() - t * t).abs() / (t * t);
                assert!(det_gap <= 1e-10, "det g defect {det_gap} at node ({i},{j})");
                assert!(
                    (node.at(0, 1) - node.at(1, 0)).abs()
                        <= 1e-12 * node.frobenius_norm().max(1.0),
                    "asymmetric metric at node ({i},{j})"
                );
            }
        }
    }
    Ok(field)
}

/// Sample g(t,z) = l^T gamma-hat l on a rectangular grid. sigma = t is
/// recorded; f stays unset until [`integrate_f`].
pub fn assemble_metric(
    m: &ModelClass,
    gt: &GammaTrajectory,
    t_grid: &[f64],
    z_grid: &[f64],
) -> Result<MetricField> {
    let (lo, hi) = GammaSource::span(gt);
    for &t in [t_grid[0], *t_grid.last().unwrap()].iter() {
        if t < lo || t > hi {
            return Err(Error::OutOfSpan { t, span: (lo, hi) });
        }
    }
    let source = MetricSource {
        coupling: c_matrix(m),
        gamma: gt.clone(),
    };
    assemble_from_source(source, t_grid, z_grid, None)
}

/// Grid finite-difference (A, B) at an interior node: central stencils
/// for g_t and g_z, then A = -sigma (g_t + g_z) g^-1,
/// B = sigma (-g_t + g_z) g^-1.
pub fn compute_ab(field: &MetricField, i: usize, j: usize) -> Result<(Mat2r, Mat2r)> {
    let nt = field.t_grid.len();
    let nz = field.z_grid.len();
    if i == 0 || j == 0 || i + 1 >= nt || j + 1 >= nz {
        return Err(Error::BoundaryNode { i, j });
    }
    let dt = field.t_grid[1] - field.t_grid[0];
    let dz = field.z_grid[1] - field.z_grid[0];
    let g_t = (field.g[i + 1][j] - field.g[i - 1][j]).scale(1.0 / (2.0 * dt));
    let g_z = (field.g[i][j + 1] - field.g[i][j - 1]).scale(1.0 / (2.0 * dz));
    let g_inv = field.g[i][j].inv()?;
    let sigma = field.sigma[i];
    let a = ((g_t + g_z) * g_inv).scale(-sigma);
    let b = ((-g_t + g_z) * g_inv).scale(sigma);
    Ok((a, b))
}

/// Consistency diagnostics from the conformal-factor quadrature.
#[derive(Clone, Copy, Debug)]
pub struct FReport {
    /// Max |ln f| spread across z columns (the value must be z-independent).
    pub cross_z_spread: f64,
    /// Max |ln f| gap between the xi- and eta-route quadratures.
    pub fa_fb_mismatch: f64,
}

fn quadrature_lnf(field: &MetricField, z: f64, t0: f64, use_b: bool) -> Result<Vec<f64>> {
    // d ln f / dt = -1/t + tr A^2 / (4t)  (xi route; eta route uses tr B^2)
    let source = field.source.clone();
    let rhs = move |t: f64, _y: &[f64], dy: &mut [f64]| {
        let (a, b) = source.ab_at(t, z).expect("A,B evaluable inside the span");
        let m = if use_b { b } else { a };
        let tr = (m * m).trace();
        dy[0] = -1.0 / t + tr / (4.0 * t);
    };
    let control = StepControl::with_tols(1e-12, 1e-13);
    let t_first = field.t_grid[0];
    let t_last = *field.t_grid.last().unwrap();

    // integrate up and (when t0 is interior) down from the anchor point
    let mut lnf = vec![0.0; field.t_grid.len()];
    if t0 < t_last {
        let up = integrate(
            &OdeProblem {
                rhs: &rhs,
                t0,
                y0: vec![0.0],
                t_end: t_last,
            },
            &control,
            None,
        )?;
        for (i, &t) in field.t_grid.iter().enumerate() {
            if t >= t0 {
                lnf[i] = up.evaluate(t)?[0];
            }
        }
    }
    if t0 > t_first {
        let down = integrate(
            &OdeProblem {
                rhs: &rhs,
                t0,
                y0: vec![0.0],
                t_end: t_first,
            },
            &control,
            None,
        )?;
        for (i, &t) in field.t_grid.iter().enumerate() {
            if t < t0 {
                lnf[i] = down.evaluate(t)?[0];
            }
        }
    }
    Ok(lnf)
}

/// Integrate the conformal factor along t with f(t0) = f0, returning the
/// enriched field and the consistency report. The quadrature runs per z
/// column (the integrand is z-independent only if the conjugation algebra
/// is right, which is exactly what the spread diagnoses) and along both
/// null routes.
pub fn integrate_f(field: &MetricField, t0: f64, f0: f64) -> Result<(MetricField, FReport)> {
    if f0 <= 0.0 {
        return Err(Error::DomainError(format!("need f0 > 0, got {f0}")));
    }
    let t_first = field.t_grid[0];
    let t_last = *field.t_grid.last().unwrap();
    if t0 < t_first || t0 > t_last {
        return Err(Error::OutOfSpan {
            t: t0,
            span: (t_first, t_last),
        });
    }

    let reference = quadrature_lnf(field, field.z_grid[0], t0, false)?;

    let mut cross_z_spread: f64 = 0.0;
    for &z in field.z_grid.iter().skip(1) {
        let column = quadrature_lnf(field, z, t0, false)?;
        for (a, b) in column.iter().zip(&reference) {
            cross_z_spread = cross_z_spread.max((a - b).abs());
        }
    }

    let eta_route = quadrature_lnf(field, field.z_grid[0], t0, true)?;
    let mut fa_fb_mismatch: f64 = 0.0;
    for (a, b) in eta_route.iter().zip(&reference) {
        fa_fb_mismatch = fa_fb_mismatch.max((a - b).abs());
    }

    const LIMIT: f64 = 1e-6;
    if cross_z_spread > LIMIT {
        return Err(Error::InconsistentF {
            spread: cross_z_spread,
            limit: LIMIT,
        });
    }
    if fa_fb_mismatch > LIMIT {
        return Err(Error::InconsistentF {
            spread: fa_fb_mismatch,
            limit: LIMIT,
        });
    }

    let f: Vec<f64> = reference.iter().map(|lnf| f0 * lnf.exp()).collect();
    for &v in &f {
        assert!(v > 0.0, "conformal factor must stay positive");
    }
    let mut out = field.clone();
    out.f = Some(f);
    Ok((
        out,
        FReport {
            cross_z_spread,
            fa_fb_mismatch,
        },
    ))
}

/// Ernst-equation residual of a sampled field.
#[derive(Clone, Copy, Debug)]
pub struct ErnstReport {
    /// Max Frobenius norm of the discretized operator over interior nodes.
    pub max_residual: f64,
    /// Same after one refinement of both grids.
    pub refined_max_residual: f64,
    /// Empirical order from the refinement pair.
    pub convergence_order: f64,
}

fn ernst_max_residual(field: &MetricField) -> Result<f64> {
    let nt = field.t_grid.len();
    let nz = field.z_grid.len();
    let dt = field.t_grid[1] - field.t_grid[0];
    let dz = field.z_grid[1] - field.z_grid[0];

    // P = sigma g_xi g^-1 and Q = sigma g_eta g^-1 on interior nodes
    let mut p = vec![vec![Mat2r::zero(); nz]; nt];
    let mut q = vec![vec![Mat2r::zero(); nz]; nt];
    for i in 1..nt - 1 {
        for j in 1..nz - 1 {
            let g_t = (field.g[i + 1][j] - field.g[i - 1][j]).scale(1.0 / (2.0 * dt));
            let g_z = (field.g[i][j + 1] - field.g[i][j - 1]).scale(1.0 / (2.0 * dz));
            let g_inv = field.g[i][j].inv()?;
            let sigma = field.sigma[i];
            p[i][j] = ((g_t + g_z) * g_inv).scale(sigma);
            q[i][j] = ((-g_t + g_z) * g_inv).scale(sigma);
        }
    }

    // residual = d_eta P + d_xi Q = d_t(Q - P) + d_z(P + Q)
    let mut max_norm: f64 = 0.0;
    for i in 2..nt - 2 {
        for j in 2..nz - 2 {
            let dt_term = ((q[i + 1][j] - p[i + 1][j]) - (q[i - 1][j] - p[i - 1][j]))
                .scale(1.0 / (2.0 * dt));
            let dz_term = ((p[i][j + 1] + q[i][j + 1]) - (p[i][j - 1] + q[i][j - 1]))
                .scale(1.0 / (2.0 * dz));
            max_norm = max_norm.max((dt_term + dz_term).frobenius_norm());
        }
    }
    Ok(max_norm)
}

/// Discretize the Ernst operator with second-order central differences,
/// then refine both grids once and report the empirical convergence order.
pub fn ernst_residual(field: &MetricField) -> Result<ErnstReport> {
    let nt = field.t_grid.len();
    let nz = field.z_grid.len();
    if nt < 5 || nz < 5 {
        return Err(Error::GridTooSmall { nt, nz });
    }

    let coarse = ernst_max_residual(field)?;

    // 2n-1 nodes over the same extent halves the spacing exactly
    let fine_t = uniform_grid(field.t_grid[0], *field.t_grid.last().unwrap(), 2 * nt - 1);
    let fine_z = uniform_grid(field.z_grid[0], *field.z_grid.last().unwrap(), 2 * nz - 1);
    let fine_field =
        assemble_from_source(field.source.clone(), &fine_t, &fine_z, field.perturbation)?;
    let fine = ernst_max_residual(&fine_field)?;

    let order = if coarse > 0.0 && fine > 0.0 {
        (coarse / fine).ln() / 2f64.ln()
    } else {
        f64::INFINITY
    };
    Ok(ErnstReport {
        max_residual: coarse,
        refined_max_residual: fine,
        convergence_order: order,
    })
}
