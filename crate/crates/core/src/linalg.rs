//! Dense 2x2 and 4x4 matrix algebra over real and complex scalars.
//!
//! Everything downstream (metric assembly, linear-system transport,
//! holonomies) works with matrices of these two fixed sizes, so the
//! implementations are direct: no pivoting machinery, no heap.
//! The matrix exponential uses scaling-and-squaring with a Taylor series
//! whose order adapts to the scaled norm; for 2x2/4x4 this is both simple
//! and accurate (cf. Higham, SIAM J. Matrix Anal. Appl. 26, 2005, for the
//! general-purpose alternative).

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Scalar types admitted in the fixed-size matrices.
pub trait Scalar:
    Copy
    + PartialEq
    + std::fmt::Debug
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_f64(x: f64) -> Self;
    /// Modulus |x| as f64.
    fn modulus(self) -> f64;
    fn is_finite_scalar(self) -> bool;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn is_finite_scalar(self) -> bool {
        self.is_finite()
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn is_finite_scalar(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// 2x2 matrix over a real or complex scalar.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2<T: Scalar> {
    e: [[T; 2]; 2],
}

pub type Mat2r = Mat2<f64>;
pub type Mat2c = Mat2<Complex64>;

impl<T: Scalar> Mat2<T> {
    /// Construct from rows. Panics on non-finite entries: a NaN here is
    /// always a caller bug, not a recoverable condition.
    pub fn new(e: [[T; 2]; 2]) -> Self {
        for row in &e {
            for x in row {
                assert!(x.is_finite_scalar(), "non-finite Mat2 entry: {x:?}");
            }
        }
        Mat2 { e }
    }

    pub fn zero() -> Self {
        Mat2 {
            e: [[T::zero(); 2]; 2],
        }
    }

    pub fn identity() -> Self {
        Mat2 {
            e: [[T::one(), T::zero()], [T::zero(), T::one()]],
        }
    }

    pub fn diag(d0: T, d1: T) -> Self {
        Mat2::new([[d0, T::zero()], [T::zero(), d1]])
    }

    /// The antisymmetric unit matrix with entry (0,1) = 1.
    pub fn epsilon() -> Self {
        Mat2::new([[T::zero(), T::one()], [-T::one(), T::zero()]])
    }

    pub fn at(&self, i: usize, j: usize) -> T {
        self.e[i][j]
    }

    pub fn entries(&self) -> &[[T; 2]; 2] {
        &self.e
    }

    pub fn det(&self) -> T {
        self.e[0][0] * self.e[1][1] - self.e[0][1] * self.e[1][0]
    }

    pub fn trace(&self) -> T {
        self.e[0][0] + self.e[1][1]
    }

    pub fn transpose(&self) -> Self {
        Mat2 {
            e: [
                [self.e[0][0], self.e[1][0]],
                [self.e[0][1], self.e[1][1]],
            ],
        }
    }

    /// Max absolute row sum; used to scale the singularity threshold.
    pub fn inf_norm(&self) -> f64 {
        let r0 = self.e[0][0].modulus() + self.e[0][1].modulus();
        let r1 = self.e[1][0].modulus() + self.e[1][1].modulus();
        r0.max(r1)
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut s = 0.0;
        for row in &self.e {
            for x in row {
                let m = x.modulus();
                s += m * m;
            }
        }
        s.sqrt()
    }

    /// Inverse by the adjugate formula. Fails when |det| is at or below
    /// the machine-scaled threshold 1e-12 * max(1, inf-norm); the metric
    /// dynamics guarantee det = t^2 > 0, so a near-zero determinant means
    /// the caller wandered too close to t = 0 and must hear about it.
    pub fn inv(&self) -> Result<Self> {
        let det = self.det();
        let threshold = 1e-12 * self.inf_norm().max(1.0);
        if det.modulus() <= threshold {
            return Err(Error::SingularMatrix {
                det_abs: det.modulus(),
                threshold,
            });
        }
        Ok(Mat2 {
            e: [
                [self.e[1][1] / det, -self.e[0][1] / det],
                [-self.e[1][0] / det, self.e[0][0] / det],
            ],
        })
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|x| x * s)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Mat2 {
            e: [
                [f(self.e[0][0]), f(self.e[0][1])],
                [f(self.e[1][0]), f(self.e[1][1])],
            ],
        }
    }

    pub fn matexp(&self, tol: f64) -> Self {
        scaled_taylor_exp(*self, tol)
    }
}

impl Mat2<f64> {
    pub fn to_complex(&self) -> Mat2c {
        Mat2 {
            e: [
                [
                    Complex64::new(self.e[0][0], 0.0),
                    Complex64::new(self.e[0][1], 0.0),
                ],
                [
                    Complex64::new(self.e[1][0], 0.0),
                    Complex64::new(self.e[1][1], 0.0),
                ],
            ],
        }
    }
}

impl<T: Scalar> std::ops::Add for Mat2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let mut e = self.e;
        for i in 0..2 {
            for j in 0..2 {
                e[i][j] = e[i][j] + o.e[i][j];
            }
        }
        Mat2 { e }
    }
}

impl<T: Scalar> std::ops::Sub for Mat2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        let mut e = self.e;
        for i in 0..2 {
            for j in 0..2 {
                e[i][j] = e[i][j] - o.e[i][j];
            }
        }
        Mat2 { e }
    }
}

impl<T: Scalar> std::ops::Neg for Mat2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        self.map(|x| -x)
    }
}

impl<T: Scalar> std::ops::Mul for Mat2<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut e = [[T::zero(); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                e[i][j] = self.e[i][0] * o.e[0][j] + self.e[i][1] * o.e[1][j];
            }
        }
        Mat2 { e }
    }
}

pub fn commutator2<T: Scalar>(a: Mat2<T>, b: Mat2<T>) -> Mat2<T> {
    a * b - b * a
}

/// 4x4 complex matrix; carries the vectorized linear system and holonomies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat4 {
    e: [[Complex64; 4]; 4],
}

impl Mat4 {
    pub fn new(e: [[Complex64; 4]; 4]) -> Self {
        for row in &e {
            for x in row {
                assert!(x.is_finite_scalar(), "non-finite Mat4 entry: {x:?}");
            }
        }
        Mat4 { e }
    }

    pub fn zero() -> Self {
        Mat4 {
            e: [[Complex64::new(0.0, 0.0); 4]; 4],
        }
    }

    pub fn identity() -> Self {
        let mut m = Self::zero();
        for i in 0..4 {
            m.e[i][i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.e[i][j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.e[i][j] = v;
    }

    pub fn trace(&self) -> Complex64 {
        self.e[0][0] + self.e[1][1] + self.e[2][2] + self.e[3][3]
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut s = 0.0;
        for row in &self.e {
            for x in row {
                s += x.norm_sqr();
            }
        }
        s.sqrt()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut e = self.e;
        for row in e.iter_mut() {
            for x in row.iter_mut() {
                *x *= s;
            }
        }
        Mat4 { e }
    }

    pub fn apply(&self, v: &[Complex64; 4]) -> [Complex64; 4] {
        let mut out = [Complex64::new(0.0, 0.0); 4];
        for i in 0..4 {
            for j in 0..4 {
                out[i] += self.e[i][j] * v[j];
            }
        }
        out
    }

    /// Determinant by Gaussian elimination with partial pivoting.
    pub fn det(&self) -> Complex64 {
        let mut a = self.e;
        let mut det = Complex64::new(1.0, 0.0);
        for col in 0..4 {
            let mut pivot = col;
            for row in col + 1..4 {
                if a[row][col].norm() > a[pivot][col].norm() {
                    pivot = row;
                }
            }
            if a[pivot][col].norm() == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            if pivot != col {
                a.swap(pivot, col);
                det = -det;
            }
            det *= a[col][col];
            for row in col + 1..4 {
                let factor = a[row][col] / a[col][col];
                for j in col..4 {
                    let sub = factor * a[col][j];
                    a[row][j] -= sub;
                }
            }
        }
        det
    }

    pub fn matexp(&self, tol: f64) -> Self {
        scaled_taylor_exp(*self, tol)
    }
}

impl std::ops::Add for Mat4 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let mut e = self.e;
        for i in 0..4 {
            for j in 0..4 {
                e[i][j] += o.e[i][j];
            }
        }
        Mat4 { e }
    }
}

impl std::ops::Sub for Mat4 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        let mut e = self.e;
        for i in 0..4 {
            for j in 0..4 {
                e[i][j] -= o.e[i][j];
            }
        }
        Mat4 { e }
    }
}

impl std::ops::Neg for Mat4 {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl std::ops::Mul for Mat4 {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut e = [[Complex64::new(0.0, 0.0); 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                let mut s = Complex64::new(0.0, 0.0);
                for l in 0..4 {
                    s += self.e[i][l] * o.e[l][j];
                }
                e[i][j] = s;
            }
        }
        Mat4 { e }
    }
}

pub fn commutator4(a: Mat4, b: Mat4) -> Mat4 {
    a * b - b * a
}

/// Kronecker product: block (i,j) of the result is a_ij * b.
pub fn kron(a: &Mat2c, b: &Mat2c) -> Mat4 {
    let mut m = Mat4::zero();
    for i in 0..2 {
        for j in 0..2 {
            for p in 0..2 {
                for q in 0..2 {
                    m.e[2 * i + p][2 * j + q] = a.at(i, j) * b.at(p, q);
                }
            }
        }
    }
    m
}

/// Shared engine for the matrix exponential.
trait ExpOps: Copy {
    fn exp_identity() -> Self;
    fn exp_add(self, o: Self) -> Self;
    fn exp_mul(self, o: Self) -> Self;
    fn exp_scale(self, s: f64) -> Self;
    fn exp_norm(self) -> f64;
}

impl<T: Scalar> ExpOps for Mat2<T> {
    fn exp_identity() -> Self {
        Mat2::identity()
    }
    fn exp_add(self, o: Self) -> Self {
        self + o
    }
    fn exp_mul(self, o: Self) -> Self {
        self * o
    }
    fn exp_scale(self, s: f64) -> Self {
        self.map(|x| x * T::from_f64(s))
    }
    fn exp_norm(self) -> f64 {
        self.frobenius_norm()
    }
}

impl ExpOps for Mat4 {
    fn exp_identity() -> Self {
        Mat4::identity()
    }
    fn exp_add(self, o: Self) -> Self {
        self + o
    }
    fn exp_mul(self, o: Self) -> Self {
        self * o
    }
    fn exp_scale(self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }
    fn exp_norm(self) -> f64 {
        self.frobenius_norm()
    }
}

/// Scaling-and-squaring: scale the argument below norm 1/2, sum the Taylor
/// series until the running term drops under the requested tolerance, then
/// undo the scaling by repeated squaring.
fn scaled_taylor_exp<M: ExpOps>(m: M, tol: f64) -> M {
    let tol = tol.max(1e-16);
    let norm = m.exp_norm();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let x = m.exp_scale(0.5f64.powi(squarings as i32));

    let mut sum = M::exp_identity().exp_add(x);
    let mut term = x;
    let mut k = 2.0;
    while k <= 40.0 {
        term = term.exp_mul(x).exp_scale(1.0 / k);
        sum = sum.exp_add(term);
        if term.exp_norm() <= 0.25 * tol * sum.exp_norm() {
            break;
        }
        k += 1.0;
    }

    let mut result = sum;
    for _ in 0..squarings {
        result = result.exp_mul(result);
    }
    result
}
