use crate::error::{check_dim, AdrcError, Result};
use crate::linalg::{definiteness, max_abs, rightmost_eigenvalue};
use crate::scaling::ScaledSystem;
use crate::{Matrix, Vector};

/// Solves `H^T P + P H + Q = 0` for symmetric positive definite `P`.
///
/// This is the orientation under which `V = x^T P x / 2` satisfies
/// `V' = -x^T Q x / 2` along `x' = H x`.
pub fn solve_lyapunov(h: &Matrix, q: &Matrix) -> Result<Matrix> {
    let m = h.nrows();
    if m == 0 {
        return Err(AdrcError::Empty("Lyapunov equation"));
    }
    check_dim("Lyapunov H columns", m, h.ncols())?;
    check_dim("Lyapunov Q rows", m, q.nrows())?;
    check_dim("Lyapunov Q columns", m, q.ncols())?;
    let (re, im) = rightmost_eigenvalue(h);
    if re.is_nan() || re >= 0.0 {
        return Err(AdrcError::NotHurwitz {
            what: "Lyapunov matrix H",
            re,
            im,
        });
    }
    let dq = definiteness(q);
    if !dq.positive_definite || max_abs(&(q - q.transpose())) > 1e-12 * max_abs(q).max(1.0) {
        return Err(AdrcError::NotPositiveDefinite {
            what: "Lyapunov weight Q",
            lambda_min: dq.lambda_min,
        });
    }
    let eye = Matrix::identity(m, m);
    let ht = h.transpose();
    // column-major vec: vec(H^T P) = (I kron H^T) vec P, vec(P H) = (H^T kron I) vec P
    let a = eye.kronecker(&ht) + ht.kronecker(&eye);
    let rhs = -Vector::from_column_slice(q.as_slice());
    let sol = a
        .lu()
        .solve(&rhs)
        .ok_or(AdrcError::SingularSystem("Lyapunov equation"))?;
    let p = Matrix::from_column_slice(m, m, sol.as_slice());
    let p = (&p + p.transpose()) * 0.5;
    let dp = definiteness(&p);
    if !dp.positive_definite {
        return Err(AdrcError::NotPositiveDefinite {
            what: "Lyapunov solution P",
            lambda_min: dp.lambda_min,
        });
    }
    Ok(p)
}

/// Solves the dual equation `P H^T + H P + Q = 0`.
pub fn solve_lyapunov_dual(h: &Matrix, q: &Matrix) -> Result<Matrix> {
    solve_lyapunov(&h.transpose(), q)
}

/// Max-norm of `H^T P + P H + Q`.
pub fn lyapunov_residual(h: &Matrix, p: &Matrix, q: &Matrix) -> f64 {
    max_abs(&(h.transpose() * p + p * h + q))
}

/// Max-norm of `P H^T + H P + Q`.
pub fn lyapunov_residual_dual(h: &Matrix, p: &Matrix, q: &Matrix) -> f64 {
    max_abs(&(p * h.transpose() + h * p + q))
}

/// Lyapunov solutions for the scaled controller and observer matrices.
/// Independent of `omega` and `kappa` once the scaled gains are fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovPair {
    pub pc: Matrix,
    pub qc: Matrix,
    pub po: Matrix,
    pub qo: Matrix,
}

impl LyapunovPair {
    pub fn new(sys: &ScaledSystem, qc: Matrix, qo: Matrix) -> Result<Self> {
        let pc = solve_lyapunov(sys.hc(), &qc)?;
        let po = solve_lyapunov(sys.ho(), &qo)?;
        Ok(Self { pc, qc, po, qo })
    }

    pub fn identity(sys: &ScaledSystem) -> Result<Self> {
        let n = sys.dim();
        Self::new(sys, Matrix::identity(2 * n, 2 * n), Matrix::identity(3 * n, 3 * n))
    }

    /// `Q_c = qc I`, `Q_o = qo I`.
    pub fn weighted(sys: &ScaledSystem, qc: f64, qo: f64) -> Result<Self> {
        let n = sys.dim();
        Self::new(
            sys,
            Matrix::identity(2 * n, 2 * n) * qc,
            Matrix::identity(3 * n, 3 * n) * qo,
        )
    }

    /// Largest residual of the two Lyapunov equations.
    pub fn residual(&self, sys: &ScaledSystem) -> f64 {
        lyapunov_residual(sys.hc(), &self.pc, &self.qc).max(lyapunov_residual(sys.ho(), &self.po, &self.qo))
    }

    /// `V = (e^T Pc e + z^T Po z + u~^T u~) / 2`.
    pub fn value(&self, e_bar: &Vector, z_bar: &Vector, u_tilde: &Vector) -> f64 {
        0.5 * (e_bar.dot(&(&self.pc * e_bar)) + z_bar.dot(&(&self.po * z_bar)) + u_tilde.norm_squared())
    }

    /// Extreme eigenvalues of `diag(Pc, Po, I) / 2`, the quadratic form of `V`.
    pub fn value_extremes(&self) -> (f64, f64) {
        let (a, b) = crate::linalg::symmetric_extremes(&self.pc);
        let (c, d) = crate::linalg::symmetric_extremes(&self.po);
        (0.5 * a.min(c).min(1.0), 0.5 * b.max(d).max(1.0))
    }
}
