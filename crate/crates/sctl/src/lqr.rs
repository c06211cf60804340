//! LQR guidance-policy design.
//!
//! Solves the continuous algebraic Riccati equation for the assumed linear
//! model and produces the state-feedback force `u* = −K·[x, ẋ]ᵀ`. The CARE is
//! solved by Kleinman-Newton iteration from an Ackermann pole-placement
//! stabilizing gain; each iterate solves a Lyapunov equation by Kronecker
//! vectorization. Postconditions (residual, symmetry, Hurwitz closed loop)
//! are checked explicitly.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::PlantParams;
use crate::error::{Result, SctlError};

/// State-space form of the assumed single-input plant.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    /// n×n system matrix.
    pub a: DMatrix<f64>,
    /// n×1 input matrix.
    pub b: DMatrix<f64>,
}

impl StateSpace {
    /// A = [[0,1],[−k/m, −c/m]], B = [0, 1/m]ᵀ.
    pub fn from_plant(p: &PlantParams) -> Result<Self> {
        p.validate()?;
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -p.k / p.m, -p.c / p.m]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0 / p.m]);
        let ss = StateSpace { a, b };
        ss.check_controllable()?;
        Ok(ss)
    }

    /// Rank check on the controllability matrix [B, AB, ..., A^{n-1}B].
    pub fn check_controllable(&self) -> Result<()> {
        let n = self.a.nrows();
        let mut ctrb = DMatrix::zeros(n, n);
        let mut col = self.b.column(0).into_owned();
        for j in 0..n {
            ctrb.set_column(j, &col);
            col = &self.a * &col;
        }
        let svd = ctrb.svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if smin <= 1e-10 * smax.max(1.0) {
            return Err(SctlError::Design(format!(
                "(A, B) not controllable: controllability matrix near-singular (smin {:e})",
                smin
            )));
        }
        Ok(())
    }
}

/// Designed guidance policy: gain, Riccati solution, and the weights used.
#[derive(Debug, Clone, PartialEq)]
pub struct LqrPolicy {
    /// 1×n gain row-vector.
    pub k: DMatrix<f64>,
    /// n×n Riccati solution.
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: f64,
}

/// Max-norm of the CARE residual AᵀP + PA − PBR⁻¹BᵀP + Q.
pub fn care_residual(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: f64, p: &DMatrix<f64>) -> f64 {
    let res = a.transpose() * p + p * a - p * b * (b.transpose() * p) / r + q;
    res.amax()
}

/// True when all eigenvalues of `m` have negative real part.
pub fn is_hurwitz(m: &DMatrix<f64>) -> bool {
    m.complex_eigenvalues().iter().all(|ev| ev.re < 0.0)
}

/// Solve A_clᵀ X + X A_cl = −M for X by Kronecker vectorization.
fn solve_lyapunov(a_cl: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a_cl.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    // vec(AᵀX + XA) = (I ⊗ Aᵀ + Aᵀ ⊗ I) vec(X)
    let at = a_cl.transpose();
    let lhs = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = DVector::from_iterator(n * n, m.iter().map(|v| -v));
    let x = lhs.lu().solve(&rhs).ok_or_else(|| SctlError::Numeric {
        what: "singular Lyapunov operator in Kleinman iteration".into(),
        residual: f64::NAN,
    })?;
    let x = DMatrix::from_column_slice(n, n, x.as_slice());
    // symmetrize against round-off
    Ok((&x + x.transpose()) * 0.5)
}

/// Characteristic-polynomial coefficients of ∏ (s − poles[i]), lowest order first.
fn poly_from_roots(poles: &[f64]) -> Vec<f64> {
    let mut coeffs = vec![1.0];
    for &p in poles {
        let mut next = vec![0.0; coeffs.len() + 1];
        for (i, &c) in coeffs.iter().enumerate() {
            next[i + 1] += c;
            next[i] -= p * c;
        }
        coeffs = next;
    }
    coeffs
}

/// Ackermann's formula for a single-input stabilizing gain placing the
/// closed-loop poles at the given (real, negative) locations.
fn ackermann_gain(ss: &StateSpace, poles: &[f64]) -> Result<DMatrix<f64>> {
    let n = ss.a.nrows();
    let mut ctrb = DMatrix::zeros(n, n);
    let mut col = ss.b.column(0).into_owned();
    for j in 0..n {
        ctrb.set_column(j, &col);
        col = &ss.a * &col;
    }
    let coeffs = poly_from_roots(poles);
    // p(A) = Σ coeffs[i] A^i
    let mut p_a = DMatrix::<f64>::zeros(n, n);
    let mut a_pow = DMatrix::<f64>::identity(n, n);
    for &c in &coeffs {
        p_a += c * &a_pow;
        a_pow = &a_pow * &ss.a;
    }
    let inv = ctrb.lu().try_inverse().ok_or_else(|| {
        SctlError::Design("controllability matrix singular in Ackermann formula".into())
    })?;
    let mut e_last = DMatrix::<f64>::zeros(1, n);
    e_last[(0, n - 1)] = 1.0;
    Ok(e_last * inv * p_a)
}

const KLEINMAN_MAX_ITERS: usize = 200;
/// Acceptable ‖AᵀP + PA − PBR⁻¹BᵀP + Q‖∞ after Kleinman iteration.
const CARE_RESIDUAL_TOL: f64 = 1e-8;

/// Solve the continuous algebraic Riccati equation for a single-input system.
///
/// Returns the symmetric stabilizing solution. Q must be symmetric PSD, R > 0,
/// (A, B) controllable.
pub fn solve_care(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: f64,
) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || b.ncols() != 1 || q.nrows() != n || q.ncols() != n {
        return Err(SctlError::Shape(format!(
            "solve_care expects A n×n, B n×1, Q n×n; got A {}×{}, B {}×{}, Q {}×{}",
            a.nrows(), a.ncols(), b.nrows(), b.ncols(), q.nrows(), q.ncols()
        )));
    }
    if !(r > 0.0) {
        return Err(SctlError::Config(format!("R must be > 0, got {}", r)));
    }
    if (q - q.transpose()).amax() > 1e-12 * q.amax().max(1.0) {
        return Err(SctlError::Config("Q must be symmetric".into()));
    }
    let ss = StateSpace { a: a.clone(), b: b.clone() };
    ss.check_controllable()?;

    // Initial stabilizing gain: place poles left of the open-loop spectrum.
    let scale = 1.0 + a.amax();
    let poles: Vec<f64> = (1..=n).map(|i| -(i as f64) * scale).collect();
    let mut k = ackermann_gain(&ss, &poles)?;

    let mut p = DMatrix::<f64>::zeros(n, n);
    for _ in 0..KLEINMAN_MAX_ITERS {
        let a_cl = a - b * &k;
        if !is_hurwitz(&a_cl) {
            return Err(SctlError::Numeric {
                what: "Kleinman iterate lost stability".into(),
                residual: care_residual(a, b, q, r, &p),
            });
        }
        let m = q + k.transpose() * &k * r;
        p = solve_lyapunov(&a_cl, &m)?;
        let k_next = (b.transpose() * &p) / r;
        let delta = (&k_next - &k).amax();
        k = k_next;
        if delta < 1e-13 * (1.0 + k.amax()) {
            break;
        }
    }

    let residual = care_residual(a, b, q, r, &p);
    if residual >= CARE_RESIDUAL_TOL {
        return Err(SctlError::Numeric {
            what: "Kleinman iteration did not converge".into(),
            residual,
        });
    }
    let a_cl = a - b * ((b.transpose() * &p) / r);
    if !is_hurwitz(&a_cl) {
        return Err(SctlError::Numeric {
            what: "CARE solution not stabilizing".into(),
            residual,
        });
    }
    Ok(p)
}

/// K = R⁻¹BᵀP.
pub fn lqr_gain(p: &DMatrix<f64>, b: &DMatrix<f64>, r: f64) -> DMatrix<f64> {
    (b.transpose() * p) / r
}

/// Design the full policy for an assumed plant with the given weights.
pub fn design(assumed: &PlantParams, q: DMatrix<f64>, r: f64) -> Result<LqrPolicy> {
    let ss = StateSpace::from_plant(assumed)?;
    let p = solve_care(&ss.a, &ss.b, &q, r)?;
    let k = lqr_gain(&p, &ss.b, r);
    Ok(LqrPolicy { k, p, q, r })
}

/// Default state weight Q = I₂.
pub fn default_q() -> DMatrix<f64> {
    DMatrix::identity(2, 2)
}

/// Default input weight.
pub const DEFAULT_R: f64 = 1e-3;

impl LqrPolicy {
    /// Guidance force u* = −K·[x, v]ᵀ.
    pub fn force(&self, x: f64, v: f64) -> f64 {
        -(self.k[(0, 0)] * x + self.k[(0, 1)] * v)
    }

    /// Text provenance record written alongside every training run.
    pub fn provenance(&self, assumed: &PlantParams) -> String {
        let mut s = String::new();
        s.push_str("# LQR design record\n");
        s.push_str(&format!(
            "assumed_model: m={:.15e} c={:.15e} k={:.15e}\n",
            assumed.m, assumed.c, assumed.k
        ));
        s.push_str(&format!("K: [{:.15e}, {:.15e}]\n", self.k[(0, 0)], self.k[(0, 1)]));
        s.push_str(&format!(
            "P: [[{:.15e}, {:.15e}], [{:.15e}, {:.15e}]]\n",
            self.p[(0, 0)], self.p[(0, 1)], self.p[(1, 0)], self.p[(1, 1)]
        ));
        s.push_str(&format!(
            "Q: [[{:.15e}, {:.15e}], [{:.15e}, {:.15e}]]\n",
            self.q[(0, 0)], self.q[(0, 1)], self.q[(1, 0)], self.q[(1, 1)]
        ));
        s.push_str(&format!("R: {:.15e}\n", self.r));
        s
    }
}
