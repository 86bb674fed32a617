//! Built-in divergence-free velocity fields on tori and finite-difference
//! Lie-bracket machinery.

use crate::error::{Error, Result};
use crate::scalar::{dot, zero3, Coords, Real};
use crate::torus::{centered_frac, check_dim};

/// One Fourier term of a shear profile `U(y)`:
/// `cos_coef * cos(2 pi n y) + sin_coef * sin(2 pi n y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShearMode<T> {
    pub wavenumber: i64,
    pub cos_coef: T,
    pub sin_coef: T,
}

/// Plane-wave term `amplitude * cos(2 pi k.x + phase)`; divergence-free iff
/// `amplitude . k = 0`. A zero wavevector gives a constant field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrigTerm<T> {
    pub amplitude: Coords<T>,
    pub wavevector: [i64; 3],
    pub phase: T,
}

#[derive(Clone, Debug, PartialEq)]
pub enum VectorField<T> {
    /// Arnold-Beltrami-Childress field on `T^3`.
    Abc { a: T, b: T, c: T },
    /// Linear hyperbolic stagnation field `a e^{-at} (-xi1, -xi2, 2 xi3)` in
    /// centered coordinates `xi = centered_frac(x - center)`; discontinuous on
    /// the half-integer sheets around `center`.
    HouLuo { a: T, center: Coords<T> },
    /// `(U(y), 0, ...)` with `U` a finite trig series; `dim` is 2 or 3.
    Shear { profile: Vec<ShearMode<T>>, dim: usize },
    TrigComposite { dim: usize, terms: Vec<TrigTerm<T>> },
}

impl<T: Real> VectorField<T> {
    pub fn abc(a: T, b: T, c: T) -> Self {
        VectorField::Abc { a, b, c }
    }

    pub fn hou_luo(a: T, center: Coords<T>) -> Self {
        VectorField::HouLuo { a, center }
    }

    /// Hou-Luo field centred at `(1/2, 1/2, 1/2)`.
    pub fn hou_luo_default(a: T) -> Self {
        let h = T::lit(0.5);
        VectorField::HouLuo {
            a,
            center: [h, h, h],
        }
    }

    /// Shear flow on `T^3` with `U(y) = sin(2 pi y)`.
    pub fn sine_shear() -> Self {
        VectorField::Shear {
            profile: vec![ShearMode {
                wavenumber: 1,
                cos_coef: T::zero(),
                sin_coef: T::one(),
            }],
            dim: 3,
        }
    }

    /// Constant field `x' = velocity`.
    pub fn constant(velocity: &[T]) -> Result<Self> {
        check_dim(velocity.len())?;
        let mut amplitude = zero3();
        amplitude[..velocity.len()].copy_from_slice(velocity);
        Ok(VectorField::TrigComposite {
            dim: velocity.len(),
            terms: vec![TrigTerm {
                amplitude,
                wavevector: [0; 3],
                phase: T::zero(),
            }],
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            VectorField::Abc { .. } | VectorField::HouLuo { .. } => 3,
            VectorField::Shear { dim, .. } | VectorField::TrigComposite { dim, .. } => *dim,
        }
    }

    pub fn is_time_dependent(&self) -> bool {
        matches!(self, VectorField::HouLuo { .. })
    }

    pub fn has_cut(&self) -> bool {
        matches!(self, VectorField::HouLuo { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: T| v.is_finite();
        match self {
            VectorField::Abc { a, b, c } => {
                if ![*a, *b, *c].into_iter().all(finite) {
                    return Err(Error::InvalidParameter("ABC coefficients must be finite".into()));
                }
            }
            VectorField::HouLuo { a, center } => {
                if !(a.is_finite() && *a > T::zero()) {
                    return Err(Error::InvalidParameter(format!(
                        "Hou-Luo strength a must be > 0, got {a}"
                    )));
                }
                if !center.iter().copied().all(finite) {
                    return Err(Error::InvalidParameter("Hou-Luo center must be finite".into()));
                }
            }
            VectorField::Shear { profile, dim } => {
                if !(2..=3).contains(dim) {
                    return Err(Error::InvalidParameter(format!(
                        "shear flow needs dimension 2 or 3, got {dim}"
                    )));
                }
                if profile
                    .iter()
                    .any(|m| !finite(m.cos_coef) || !finite(m.sin_coef))
                {
                    return Err(Error::InvalidParameter("shear coefficients must be finite".into()));
                }
            }
            VectorField::TrigComposite { dim, terms } => {
                check_dim(*dim)?;
                for term in terms {
                    if term.wavevector[*dim..].iter().any(|&k| k != 0)
                        || term.amplitude[*dim..].iter().any(|v| !v.is_zero())
                    {
                        return Err(Error::InvalidParameter(format!(
                            "trig term {term:?} has components beyond dimension {dim}"
                        )));
                    }
                    if !term.amplitude.iter().copied().all(finite) || !finite(term.phase) {
                        return Err(Error::InvalidParameter("trig term must be finite".into()));
                    }
                    let k = term.wavevector.map(|v| T::lit(v as f64));
                    let scale = term
                        .amplitude
                        .iter()
                        .zip(&k)
                        .map(|(a, k)| (*a * *k).abs())
                        .fold(T::zero(), |m, v| m.max(v));
                    let div = dot(&term.amplitude, &k, *dim);
                    if div.abs() > T::lit(64.0) * T::eps() * scale.max(T::one()) {
                        return Err(Error::InvalidParameter(format!(
                            "trig term is not divergence-free: amplitude . k = {div}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Velocity at the lifted position `x` and absolute time `t`.
    pub fn velocity(&self, x: &Coords<T>, t: T) -> Coords<T> {
        let tau = T::TAU();
        match self {
            VectorField::Abc { a, b, c } => {
                let (sx, cx) = (tau * x[0]).sin_cos();
                let (sy, cy) = (tau * x[1]).sin_cos();
                let (sz, cz) = (tau * x[2]).sin_cos();
                [
                    *a * sz + *c * cy,
                    *b * sx + *a * cz,
                    *c * sy + *b * cx,
                ]
            }
            VectorField::HouLuo { a, center } => hou_luo_velocity(*a, center, x, t),
            VectorField::Shear { profile, .. } => {
                let mut u = zero3();
                u[0] = shear_profile(profile, x[1]);
                u
            }
            VectorField::TrigComposite { dim, terms } => {
                let mut u = zero3();
                for term in terms {
                    let k = term.wavevector.map(|v| T::lit(v as f64));
                    let w = (tau * dot(&k, x, *dim) + term.phase).cos();
                    for j in 0..*dim {
                        u[j] += term.amplitude[j] * w;
                    }
                }
                u
            }
        }
    }

    /// Central-difference divergence.
    pub fn divergence_fd(&self, x: &Coords<T>, t: T, eta: T) -> T {
        let jac = jacobian_fd(self, x, t, eta);
        (0..self.dim()).map(|j| jac[j][j]).sum()
    }
}

fn shear_profile<T: Real>(profile: &[ShearMode<T>], y: T) -> T {
    profile
        .iter()
        .map(|m| {
            let (s, c) = (T::TAU() * T::lit(m.wavenumber as f64) * y).sin_cos();
            m.cos_coef * c + m.sin_coef * s
        })
        .sum()
}

fn hou_luo_velocity<T: Real>(a: T, center: &Coords<T>, x: &Coords<T>, t: T) -> Coords<T> {
    let amp = a * (-a * t).exp();
    let xi = [
        centered_frac(x[0] - center[0]),
        centered_frac(x[1] - center[1]),
        centered_frac(x[2] - center[2]),
    ];
    [-amp * xi[0], -amp * xi[1], T::lit(2.0) * amp * xi[2]]
}

/// Hou-Luo stagnation field evaluated on the torus.
pub fn hou_luo_field<T: Real>(a: T, center: &Coords<T>, x: &[T], t: T) -> Result<Coords<T>> {
    if x.len() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            got: x.len(),
        });
    }
    Ok(hou_luo_velocity(a, center, &[x[0], x[1], x[2]], t))
}

/// `jac[i][j] = d u_i / d x_j` by central differences.
pub fn jacobian_fd<T: Real>(
    field: &VectorField<T>,
    x: &Coords<T>,
    t: T,
    eta: T,
) -> [Coords<T>; 3] {
    let dim = field.dim();
    let mut jac = [zero3(); 3];
    let two_eta = eta + eta;
    for j in 0..dim {
        let mut xp = *x;
        let mut xm = *x;
        xp[j] += eta;
        xm[j] -= eta;
        let up = field.velocity(&xp, t);
        let um = field.velocity(&xm, t);
        for i in 0..dim {
            jac[i][j] = (up[i] - um[i]) / two_eta;
        }
    }
    jac
}

/// Central-difference vorticity `curl u` on `T^3`.
pub fn vorticity_fd<T: Real>(field: &VectorField<T>, x: &Coords<T>, t: T, eta: T) -> Coords<T> {
    let j = jacobian_fd(field, x, t, eta);
    [j[2][1] - j[1][2], j[0][2] - j[2][0], j[1][0] - j[0][1]]
}

/// `[u, v] = (u . grad) v - (v . grad) u` at `x`, Jacobians by central
/// differences with step `eta`.
pub fn lie_bracket<T: Real>(
    u: &VectorField<T>,
    v: &VectorField<T>,
    x: &Coords<T>,
    t: T,
    eta: T,
) -> Result<Coords<T>> {
    let dim = u.dim();
    if v.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: v.dim(),
        });
    }
    let ju = jacobian_fd(u, x, t, eta);
    let jv = jacobian_fd(v, x, t, eta);
    let uu = u.velocity(x, t);
    let vv = v.velocity(x, t);
    let mut out = zero3();
    for i in 0..dim {
        out[i] = dot(&jv[i], &uu, dim) - dot(&ju[i], &vv, dim);
    }
    Ok(out)
}

/// Smooth scalar test function `sum_i c_i cos(2 pi k_i . x + phi_i)` with an
/// exact gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigScalar<T> {
    pub dim: usize,
    pub terms: Vec<(T, [i64; 3], T)>,
}

impl<T: Real> TrigScalar<T> {
    /// `cos(2 pi x_axis)`.
    pub fn cosine(dim: usize, axis: usize) -> Self {
        let mut k = [0; 3];
        k[axis] = 1;
        TrigScalar {
            dim,
            terms: vec![(T::one(), k, T::zero())],
        }
    }

    pub fn value(&self, x: &Coords<T>) -> T {
        self.terms
            .iter()
            .map(|(c, k, phi)| {
                let k = k.map(|v| T::lit(v as f64));
                *c * (T::TAU() * dot(&k, x, self.dim) + *phi).cos()
            })
            .sum()
    }

    pub fn gradient(&self, x: &Coords<T>) -> Coords<T> {
        let mut g = zero3();
        for (c, k, phi) in &self.terms {
            let k = k.map(|v| T::lit(v as f64));
            let s = (T::TAU() * dot(&k, x, self.dim) + *phi).sin();
            for j in 0..self.dim {
                g[j] -= *c * T::TAU() * k[j] * s;
            }
        }
        g
    }
}

/// Pointwise residual `|T_u(T_v f) - T_v(T_u f) - T_[u,v] f|` where
/// `T_w f = w . grad f`. The outer derivatives and the bracket Jacobians are
/// central differences with step `eta`; the inner gradient is exact.
pub fn check_commutator_identity<T: Real>(
    u: &VectorField<T>,
    v: &VectorField<T>,
    f: &TrigScalar<T>,
    x: &Coords<T>,
    t: T,
    eta: T,
) -> Result<T> {
    let dim = u.dim();
    if v.dim() != dim || f.dim != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: if v.dim() != dim { v.dim() } else { f.dim },
        });
    }
    let t_of = |w: &VectorField<T>, y: &Coords<T>| dot(&w.velocity(y, t), &f.gradient(y), dim);
    // u . grad(g) with g = T_w f, gradient by central differences
    let nested = |outer: &VectorField<T>, inner: &VectorField<T>| {
        let mut grad = zero3();
        for j in 0..dim {
            let mut xp = *x;
            let mut xm = *x;
            xp[j] += eta;
            xm[j] -= eta;
            grad[j] = (t_of(inner, &xp) - t_of(inner, &xm)) / (eta + eta);
        }
        dot(&outer.velocity(x, t), &grad, dim)
    };
    let bracket = lie_bracket(u, v, x, t, eta)?;
    let lhs = nested(u, v) - nested(v, u);
    let rhs = dot(&bracket, &f.gradient(x), dim);
    Ok((lhs - rhs).abs())
}
