//! Explicit Runge-Kutta integrators for `x' = u(x, t)` in the universal cover.

use crate::scalar::{axpy, Coords, Real};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum IntegratorConfig<T> {
    /// Classical RK4 on `ceil(h / max_step)` equal substeps. `None` means
    /// `min(h, 1e-2)`.
    Rk4 { max_step: Option<T> },
    /// Dormand-Prince 5(4) with embedded error control.
    DormandPrince { abs_tol: T, rel_tol: T },
}

impl<T: Real> Default for IntegratorConfig<T> {
    fn default() -> Self {
        IntegratorConfig::Rk4 { max_step: None }
    }
}

impl<T: Real> IntegratorConfig<T> {
    pub fn rk4(max_step: T) -> Self {
        IntegratorConfig::Rk4 {
            max_step: Some(max_step),
        }
    }

    /// Tight adaptive reference used as the trajectory oracle.
    pub fn reference() -> Self {
        IntegratorConfig::DormandPrince {
            abs_tol: T::lit(1e-10),
            rel_tol: T::lit(1e-10),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let pos = |v: T| v.is_finite() && v > T::zero();
        match *self {
            IntegratorConfig::Rk4 { max_step: Some(s) } if !pos(s) => {
                Err(format!("rk4 max_step must be > 0, got {s}"))
            }
            IntegratorConfig::DormandPrince { abs_tol, rel_tol } if !pos(abs_tol) || !pos(rel_tol) => {
                Err(format!(
                    "dormand-prince tolerances must be > 0, got abs {abs_tol}, rel {rel_tol}"
                ))
            }
            _ => Ok(()),
        }
    }

    /// Number of RK4 substeps for a step of length `h`.
    pub fn rk4_substeps(max_step: Option<T>, h: T) -> usize {
        let ms = max_step.unwrap_or_else(|| h.min(T::lit(1e-2)));
        let ratio = h / ms;
        // absorb the rounding in ratios such as 1 / 0.01
        let n = (ratio - ratio * T::lit(64.0) * T::eps()).ceil();
        n.to_usize().unwrap_or(1).max(1)
    }

    /// Scale of the per-step trajectory error, for diagnostics tolerances.
    pub fn nominal_tolerance(&self, h: T) -> T {
        match *self {
            IntegratorConfig::Rk4 { max_step } => {
                let n = Self::rk4_substeps(max_step, h);
                (h / T::lit(n as f64)).powi(4)
            }
            IntegratorConfig::DormandPrince { abs_tol, rel_tol } => abs_tol.max(rel_tol),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepUnderflow;

/// Integrates from `t0` to `t0 + h` without wrapping, calling `observe` with
/// each accepted state.
pub fn integrate<T, F, O>(
    config: &IntegratorConfig<T>,
    rhs: F,
    x0: &Coords<T>,
    dim: usize,
    t0: T,
    h: T,
    mut observe: O,
) -> Result<Coords<T>, StepUnderflow>
where
    T: Real,
    F: Fn(&Coords<T>, T) -> Coords<T>,
    O: FnMut(&Coords<T>),
{
    match *config {
        IntegratorConfig::Rk4 { max_step } => {
            let n = IntegratorConfig::rk4_substeps(max_step, h);
            let dt = h / T::lit(n as f64);
            let half = dt * T::lit(0.5);
            let sixth = dt / T::lit(6.0);
            let mut x = *x0;
            // compensated summation keeps long substep chains at rounding level
            let mut carry: Coords<T> = [T::zero(); 3];
            for i in 0..n {
                let t = t0 + dt * T::lit(i as f64);
                let k1 = rhs(&x, t);
                let k2 = rhs(&axpy(&x, half, &k1, dim), t + half);
                let k3 = rhs(&axpy(&x, half, &k2, dim), t + half);
                let k4 = rhs(&axpy(&x, dt, &k3, dim), t + dt);
                for j in 0..dim {
                    let inc = sixth * (k1[j] + T::lit(2.0) * (k2[j] + k3[j]) + k4[j]) - carry[j];
                    let sum = x[j] + inc;
                    carry[j] = (sum - x[j]) - inc;
                    x[j] = sum;
                }
                observe(&x);
            }
            Ok(x)
        }
        IntegratorConfig::DormandPrince { abs_tol, rel_tol } => {
            dopri5(rhs, x0, dim, t0, h, abs_tol, rel_tol, observe)
        }
    }
}

const MAX_DP_STEPS: usize = 1_000_000;

#[allow(clippy::too_many_arguments)]
fn dopri5<T, F, O>(
    rhs: F,
    x0: &Coords<T>,
    dim: usize,
    t0: T,
    h: T,
    atol: T,
    rtol: T,
    mut observe: O,
) -> Result<Coords<T>, StepUnderflow>
where
    T: Real,
    F: Fn(&Coords<T>, T) -> Coords<T>,
    O: FnMut(&Coords<T>),
{
    let c = |v: f64| T::lit(v);
    let (c2, c3, c4, c5) = (c(1.0 / 5.0), c(3.0 / 10.0), c(4.0 / 5.0), c(8.0 / 9.0));
    let a21 = c(1.0 / 5.0);
    let (a31, a32) = (c(3.0 / 40.0), c(9.0 / 40.0));
    let (a41, a42, a43) = (c(44.0 / 45.0), c(-56.0 / 15.0), c(32.0 / 9.0));
    let (a51, a52, a53, a54) = (
        c(19372.0 / 6561.0),
        c(-25360.0 / 2187.0),
        c(64448.0 / 6561.0),
        c(-212.0 / 729.0),
    );
    let (a61, a62, a63, a64, a65) = (
        c(9017.0 / 3168.0),
        c(-355.0 / 33.0),
        c(46732.0 / 5247.0),
        c(49.0 / 176.0),
        c(-5103.0 / 18656.0),
    );
    let (b1, b3, b4, b5, b6) = (
        c(35.0 / 384.0),
        c(500.0 / 1113.0),
        c(125.0 / 192.0),
        c(-2187.0 / 6784.0),
        c(11.0 / 84.0),
    );
    // difference between 5th and embedded 4th order weights
    let (e1, e3, e4, e5, e6, e7) = (
        c(71.0 / 57600.0),
        c(-71.0 / 16695.0),
        c(71.0 / 1920.0),
        c(-17253.0 / 339200.0),
        c(22.0 / 525.0),
        c(-1.0 / 40.0),
    );

    let t_end = t0 + h;
    let mut t = t0;
    let mut x = *x0;
    let mut dt = h.min(c(1e-2));
    let mut k1 = rhs(&x, t);
    let min_step = |t: T| T::lit(16.0) * T::eps() * t.abs().max(T::one());

    let comb = |x: &Coords<T>, terms: &[(T, &Coords<T>)], dt: T| {
        let mut out = *x;
        for (w, k) in terms {
            for j in 0..dim {
                out[j] += dt * *w * k[j];
            }
        }
        out
    };

    for _ in 0..MAX_DP_STEPS {
        let remaining = t_end - t;
        if remaining <= T::zero() {
            return Ok(x);
        }
        let last = dt >= remaining;
        if last {
            dt = remaining;
        }
        if dt < min_step(t) && !last {
            return Err(StepUnderflow);
        }
        let k2 = rhs(&comb(&x, &[(a21, &k1)], dt), t + c2 * dt);
        let k3 = rhs(&comb(&x, &[(a31, &k1), (a32, &k2)], dt), t + c3 * dt);
        let k4 = rhs(&comb(&x, &[(a41, &k1), (a42, &k2), (a43, &k3)], dt), t + c4 * dt);
        let k5 = rhs(
            &comb(&x, &[(a51, &k1), (a52, &k2), (a53, &k3), (a54, &k4)], dt),
            t + c5 * dt,
        );
        let k6 = rhs(
            &comb(
                &x,
                &[(a61, &k1), (a62, &k2), (a63, &k3), (a64, &k4), (a65, &k5)],
                dt,
            ),
            t + dt,
        );
        let y = comb(&x, &[(b1, &k1), (b3, &k3), (b4, &k4), (b5, &k5), (b6, &k6)], dt);
        let k7 = rhs(&y, t + dt);

        let mut err = T::zero();
        for j in 0..dim {
            let e = dt
                * (e1 * k1[j] + e3 * k3[j] + e4 * k4[j] + e5 * k5[j] + e6 * k6[j] + e7 * k7[j]);
            let sc = atol + rtol * x[j].abs().max(y[j].abs());
            err += (e / sc) * (e / sc);
        }
        err = (err / T::lit(dim as f64)).sqrt();

        if err <= T::one() {
            t = if last { t_end } else { t + dt };
            x = y;
            k1 = k7;
            observe(&x);
            if last {
                return Ok(x);
            }
        } else if dt <= min_step(t) {
            return Err(StepUnderflow);
        }
        let factor = if err == T::zero() {
            c(5.0)
        } else {
            (c(0.9) * err.powf(c(-0.2))).max(c(0.2)).min(c(5.0))
        };
        dt = dt * factor;
    }
    Err(StepUnderflow)
}
