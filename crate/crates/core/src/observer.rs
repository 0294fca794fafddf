//! Extended state observer.
//!
//! The plant is rewritten with the total disturbance `z3 = q + h - h_u` as an
//! extra state and estimated by
//!
//! ```text
//! z1^' = K1 (z1 - z1^) + z2^
//! z2^' = K2 (z1 - z1^) + z3^ + h_u + B v
//! z3^' = K3 (z1 - z1^)
//! ```

use crate::error::{check_dim, AdrcError, Result};
use crate::linalg::{identity, set_block};
use crate::{Matrix, Vector};

/// Diagonal observer gains `K1`, `K2`, `K3`, stored as their diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverGains {
    k1: Vector,
    k2: Vector,
    k3: Vector,
}

impl ObserverGains {
    /// Rejects gains whose per-axis observer matrix is not Hurwitz.
    pub fn new(k1: Vector, k2: Vector, k3: Vector) -> Result<Self> {
        let n = k1.len();
        if n == 0 {
            return Err(AdrcError::Empty("observer gains"));
        }
        check_dim("observer gain K2", n, k2.len())?;
        check_dim("observer gain K3", n, k3.len())?;
        for i in 0..n {
            let (re, im) = axis_abscissa(k1[i], k2[i], k3[i]);
            if re.is_nan() || re >= -1e-9 {
                return Err(AdrcError::NotHurwitz {
                    what: "observer matrix H_o",
                    re,
                    im,
                });
            }
        }
        Ok(Self { k1, k2, k3 })
    }

    pub fn dim(&self) -> usize {
        self.k1.len()
    }

    pub fn k1(&self) -> &Vector {
        &self.k1
    }

    pub fn k2(&self) -> &Vector {
        &self.k2
    }

    pub fn k3(&self) -> &Vector {
        &self.k3
    }

    pub fn build_ho(&self) -> Matrix {
        build_ho(&self.k1, &self.k2, &self.k3)
    }
}

/// Rightmost eigenvalue of one axis block `[-k1 1 0; -k2 0 1; -k3 0 0]`.
fn axis_abscissa(k1: f64, k2: f64, k3: f64) -> (f64, f64) {
    if ![k1, k2, k3].iter().all(|v| v.is_finite()) {
        return (f64::NAN, 0.0);
    }
    let m = Matrix::from_row_slice(3, 3, &[-k1, 1.0, 0.0, -k2, 0.0, 1.0, -k3, 0.0, 0.0]);
    crate::linalg::rightmost_eigenvalue(&m)
}

/// `H_o = [-K1 I 0; -K2 0 I; -K3 0 0]` for diagonal gains.
pub fn build_ho(k1: &Vector, k2: &Vector, k3: &Vector) -> Matrix {
    let n = k1.len();
    let mut h = Matrix::zeros(3 * n, 3 * n);
    for (row, k) in [k1, k2, k3].into_iter().enumerate() {
        set_block(&mut h, row * n, 0, &Matrix::from_diagonal(&(-k)));
    }
    set_block(&mut h, 0, n, &identity(n));
    set_block(&mut h, n, 2 * n, &identity(n));
    h
}

/// `C0 = [0; -I; 0]`, the entry point of `B u~` into the observation error.
pub fn c0(n: usize) -> Matrix {
    let mut c = Matrix::zeros(3 * n, n);
    set_block(&mut c, n, 0, &(-identity(n)));
    c
}

/// `C1 = [0; 0; I]`, the entry point of `z3'`.
pub fn c1(n: usize) -> Matrix {
    let mut c = Matrix::zeros(3 * n, n);
    set_block(&mut c, 2 * n, 0, &identity(n));
    c
}

/// Extended state `(z1, z2, z3) = (x1, x2, q + h - h_u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedState {
    pub z1: Vector,
    pub z2: Vector,
    pub z3: Vector,
}

impl ExtendedState {
    pub fn stacked(&self) -> Vector {
        stack3(&self.z1, &self.z2, &self.z3)
    }
}

pub(crate) fn stack3(a: &Vector, b: &Vector, c: &Vector) -> Vector {
    let n = a.len();
    let mut out = Vector::zeros(3 * n);
    out.rows_mut(0, n).copy_from(a);
    out.rows_mut(n, n).copy_from(b);
    out.rows_mut(2 * n, n).copy_from(c);
    out
}

/// Observer start: measured position, zero velocity and disturbance.
pub fn initial_estimate(z1_measured: &Vector) -> Vector {
    let n = z1_measured.len();
    let mut z = Vector::zeros(3 * n);
    z.rows_mut(0, n).copy_from(z1_measured);
    z
}

pub fn observer_derivative(
    gains: &ObserverGains,
    z_hat: &Vector,
    z1_measured: &Vector,
    h_u: &Vector,
    bv: &Vector,
) -> Result<Vector> {
    let n = gains.dim();
    check_dim("observer state", 3 * n, z_hat.len())?;
    check_dim("measured position", n, z1_measured.len())?;
    check_dim("compensation", n, h_u.len())?;
    check_dim("B v", n, bv.len())?;
    Ok(observer_derivative_unchecked(gains, z_hat, z1_measured, h_u, bv))
}

pub(crate) fn observer_derivative_unchecked(
    gains: &ObserverGains,
    z_hat: &Vector,
    z1_measured: &Vector,
    h_u: &Vector,
    bv: &Vector,
) -> Vector {
    let n = gains.dim();
    let innov = z1_measured - z_hat.rows(0, n);
    let d1 = gains.k1.component_mul(&innov) + z_hat.rows(n, n);
    let d2 = gains.k2.component_mul(&innov) + z_hat.rows(2 * n, n) + h_u + bv;
    let d3 = gains.k3.component_mul(&innov);
    stack3(&d1, &d2, &d3)
}

/// `z~' = H_o z~ + C0 B u~ + C1 z3'`.
pub fn observation_error_derivative(
    ho: &Matrix,
    z_tilde: &Vector,
    bu_tilde: &Vector,
    z3_dot: &Vector,
) -> Result<Vector> {
    let n = bu_tilde.len();
    check_dim("observer matrix", 3 * n, ho.nrows())?;
    check_dim("observer matrix columns", 3 * n, ho.ncols())?;
    check_dim("observation error", 3 * n, z_tilde.len())?;
    check_dim("disturbance rate", n, z3_dot.len())?;
    Ok(ho * z_tilde + c0(n) * bu_tilde + c1(n) * z3_dot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_row_slice(xs)
    }

    fn unit_bandwidth() -> ObserverGains {
        ObserverGains::new(v(&[3.0]), v(&[3.0]), v(&[1.0])).unwrap()
    }

    #[test]
    fn ho_structure_and_spectrum() {
        let h = unit_bandwidth().build_ho();
        let expected = Matrix::from_row_slice(3, 3, &[-3.0, 1.0, 0.0, -3.0, 0.0, 1.0, -1.0, 0.0, 0.0]);
        assert_eq!(h, expected);
        // (lambda + 1)^3: triple root, so the eigensolver only resolves it to ~1e-5
        for c in h.complex_eigenvalues().iter() {
            assert!((c.re + 1.0).abs() < 1e-4 && c.im.abs() < 1e-4);
        }
        let ch = |l: f64| l * l * l + 3.0 * l * l + 3.0 * l + 1.0;
        assert_eq!(ch(-1.0), 0.0);
    }

    #[test]
    fn zero_gains_are_not_hurwitz() {
        let err = ObserverGains::new(v(&[0.0]), v(&[0.0]), v(&[0.0])).unwrap_err();
        match err {
            AdrcError::NotHurwitz { re, .. } => assert!(re.abs() < 1e-12),
            e => panic!("unexpected {e:?}"),
        }
        assert!(ObserverGains::new(v(&[3.0]), v(&[-3.0]), v(&[1.0])).is_err());
        // k1 k2 > k3 is the Routh condition; 1 * 1 < 2 fails it
        assert!(ObserverGains::new(v(&[1.0]), v(&[1.0]), v(&[2.0])).is_err());
    }

    #[test]
    fn zero_innovation_gives_zero_rate() {
        let g = unit_bandwidth();
        let d = observer_derivative(&g, &v(&[0.4, 0.0, 0.0]), &v(&[0.4]), &v(&[0.0]), &v(&[0.0])).unwrap();
        assert_eq!(d, v(&[0.0, 0.0, 0.0]));
    }

    #[test]
    fn pure_innovation() {
        let g = unit_bandwidth();
        let d = observer_derivative(&g, &v(&[0.0, 0.0, 0.0]), &v(&[1.0]), &v(&[0.0]), &v(&[0.0])).unwrap();
        assert_eq!(d, v(&[3.0, 3.0, 1.0]));
    }

    #[test]
    fn selectors_place_inputs() {
        let h = unit_bandwidth().build_ho();
        let d = observation_error_derivative(&h, &v(&[0.0, 0.0, 0.0]), &v(&[2.0]), &v(&[0.0])).unwrap();
        assert_eq!(d, v(&[0.0, -2.0, 0.0]));
        let d = observation_error_derivative(&h, &v(&[0.0, 0.0, 0.0]), &v(&[0.0]), &v(&[0.5])).unwrap();
        assert_eq!(d, v(&[0.0, 0.0, 0.5]));
    }

    #[test]
    fn two_axis_ho_is_block_permutation_of_axes() {
        let g = ObserverGains::new(v(&[3.0, 30.0]), v(&[3.0, 300.0]), v(&[1.0, 1000.0])).unwrap();
        let h = g.build_ho();
        let sub = |a: usize| {
            let idx = [a, 2 + a, 4 + a];
            Matrix::from_fn(3, 3, |i, j| h[(idx[i], idx[j])])
        };
        assert_eq!(sub(0), unit_bandwidth().build_ho());
        let s1 = ObserverGains::new(v(&[30.0]), v(&[300.0]), v(&[1000.0]))
            .unwrap()
            .build_ho();
        assert!(max_abs(&(sub(1) - s1)) == 0.0);
        assert!(max_abs(&Matrix::from_fn(3, 3, |i, j| h[(2 * i, 2 * j + 1)])) == 0.0);
    }

    #[test]
    fn initial_estimate_copies_position() {
        assert_eq!(initial_estimate(&v(&[1.0, 2.0])), v(&[1.0, 2.0, 0.0, 0.0, 0.0, 0.0]));
    }
}
