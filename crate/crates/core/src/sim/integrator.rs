use crate::Vector;

/// One classical fourth-order Runge-Kutta step. `f` returns the derivative
/// and is called four times, at `t`, `t + h/2` (twice) and `t + h`.
pub fn rk4_step<F>(mut f: F, t: f64, y: &Vector, h: f64, k1: &Vector) -> Vector
where
    F: FnMut(f64, &Vector) -> Vector,
{
    let k2 = f(t + 0.5 * h, &(y + k1 * (0.5 * h)));
    let k3 = f(t + 0.5 * h, &(y + &k2 * (0.5 * h)));
    let k4 = f(t + h, &(y + &k3 * h));
    y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Integrates from `t0` over `steps` fixed steps and returns the final state.
pub fn rk4_integrate<F>(mut f: F, t0: f64, y0: Vector, h: f64, steps: usize) -> Vector
where
    F: FnMut(f64, &Vector) -> Vector,
{
    let mut y = y0;
    for i in 0..steps {
        let t = t0 + i as f64 * h;
        let k1 = f(t, &y);
        y = rk4_step(&mut f, t, &y, h, &k1);
    }
    y
}

/// Trapezoidal accumulator for `int f dt` on a uniform grid.
#[derive(Debug, Clone, Copy, Default)]
pub struct Trapezoid {
    total: f64,
    last: Option<f64>,
}

impl Trapezoid {
    pub fn push(&mut self, value: f64, h: f64) {
        if let Some(prev) = self.last {
            self.total += 0.5 * h * (prev + value);
        }
        self.last = Some(value);
    }

    pub fn value(&self) -> f64 {
        self.total
    }
}
