//! Measure-preserving one-step dynamics on tori.

mod field;
mod integrate;

pub use field::{
    check_commutator_identity, hou_luo_field, jacobian_fd, lie_bracket, vorticity_fd, ShearMode,
    TrigScalar, TrigTerm, VectorField,
};
pub use integrate::{integrate, IntegratorConfig, StepUnderflow};

use std::cell::Cell;

use crate::error::{Error, Result};
use crate::scalar::{zero3, Coords, Real};
use crate::torus::{centered_frac, check_dim, frac, Displacement, TorusPoint};

#[derive(Clone, Debug, PartialEq)]
pub enum SystemKind<T> {
    /// `x -> x + shift`.
    Translation { shift: Coords<T> },
    /// `x -> A x` on `T^2`.
    CatMap { matrix: [[i64; 2]; 2] },
    /// Time-`h` map of a velocity field.
    Flow {
        field: VectorField<T>,
        integrator: IntegratorConfig<T>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DynamicalSystem<T> {
    kind: SystemKind<T>,
    dim: usize,
}

/// Image of one step together with its lifted displacement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepResult<T> {
    pub image: TorusPoint<T>,
    pub disp: Displacement<T>,
    /// The trajectory left the smooth cell of a field with a cut.
    pub crossed_cut: bool,
}

impl<T: Real> DynamicalSystem<T> {
    pub fn identity(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(DynamicalSystem {
            kind: SystemKind::Translation { shift: zero3() },
            dim,
        })
    }

    pub fn translation(shift: &[T]) -> Result<Self> {
        check_dim(shift.len())?;
        if shift.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(shift.iter().map(|v| v.as_f64()).collect()));
        }
        let mut s = zero3();
        s[..shift.len()].copy_from_slice(shift);
        Ok(DynamicalSystem {
            kind: SystemKind::Translation { shift: s },
            dim: shift.len(),
        })
    }

    pub fn cat_map(matrix: [[i64; 2]; 2]) -> Result<Self> {
        let det = matrix[0][0] * matrix[1][1] - matrix[0][1] * matrix[1][0];
        if det.abs() != 1 {
            return Err(Error::InvalidParameter(format!(
                "toral automorphism needs |det A| = 1, got det = {det}"
            )));
        }
        Ok(DynamicalSystem {
            kind: SystemKind::CatMap { matrix },
            dim: 2,
        })
    }

    /// Arnold's cat map `[[2, 1], [1, 1]]`.
    pub fn arnold_cat() -> Self {
        DynamicalSystem {
            kind: SystemKind::CatMap {
                matrix: [[2, 1], [1, 1]],
            },
            dim: 2,
        }
    }

    pub fn flow(field: VectorField<T>, integrator: IntegratorConfig<T>) -> Result<Self> {
        field.validate()?;
        integrator.validate().map_err(Error::InvalidParameter)?;
        let dim = field.dim();
        Ok(DynamicalSystem {
            kind: SystemKind::Flow { field, integrator },
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &SystemKind<T> {
        &self.kind
    }

    pub fn is_flow(&self) -> bool {
        matches!(self.kind, SystemKind::Flow { .. })
    }

    pub fn field(&self) -> Option<&VectorField<T>> {
        match &self.kind {
            SystemKind::Flow { field, .. } => Some(field),
            _ => None,
        }
    }

    /// Same dynamics with a different integrator; discrete maps are returned unchanged.
    pub fn with_integrator(&self, integrator: IntegratorConfig<T>) -> Result<Self> {
        match &self.kind {
            SystemKind::Flow { field, .. } => Self::flow(field.clone(), integrator),
            _ => Ok(self.clone()),
        }
    }

    /// Velocity at `x` for flows, `None` for discrete maps.
    pub fn velocity(&self, x: &TorusPoint<T>, t: T) -> Option<Coords<T>> {
        self.field().map(|f| f.velocity(x.raw(), t))
    }

    /// One application of the map, or the flow from `t0` to `t0 + h`.
    /// For discrete maps `t0` and `h` are ignored.
    pub fn step(&self, x: &TorusPoint<T>, t0: T, h: T) -> Result<StepResult<T>> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.dim(),
            });
        }
        let dim = self.dim;
        match &self.kind {
            SystemKind::Translation { shift } => {
                let disp = Displacement::from_raw(*shift, dim);
                Ok(StepResult {
                    image: disp.apply(x),
                    disp,
                    crossed_cut: false,
                })
            }
            SystemKind::CatMap { matrix } => {
                let p = x.raw();
                let m = |i: usize, j: usize| T::lit(matrix[i][j] as f64);
                let lifted = [
                    m(0, 0) * p[0] + m(0, 1) * p[1],
                    m(1, 0) * p[0] + m(1, 1) * p[1],
                ];
                let mut delta = zero3();
                let mut img = zero3();
                for j in 0..2 {
                    delta[j] = lifted[j] - p[j];
                    img[j] = frac(lifted[j]);
                }
                Ok(StepResult {
                    image: TorusPoint::from_reduced(img, dim),
                    disp: Displacement::from_raw(delta, dim),
                    crossed_cut: false,
                })
            }
            SystemKind::Flow { field, integrator } => {
                if !(h.is_finite() && h > T::zero()) {
                    return Err(Error::InvalidParameter(format!(
                        "flow step h must be > 0, got {h}"
                    )));
                }
                let x0 = *x.raw();
                let cut_center = match field {
                    VectorField::HouLuo { center, .. } => Some(*center),
                    _ => None,
                };
                let xi0 = cut_center.map(|c| {
                    let mut xi = zero3();
                    for j in 0..3 {
                        xi[j] = centered_frac(x0[j] - c[j]);
                    }
                    xi
                });
                // The field reverses at the cut, so a trajectory reaching it
                // can stall just inside; every evaluation point is checked,
                // not only accepted states.
                let crossed = Cell::new(false);
                let half = T::lit(0.5);
                let check = |s: &Coords<T>| {
                    if let Some(xi0) = &xi0 {
                        for j in 0..3 {
                            let xi = xi0[j] + (s[j] - x0[j]);
                            if xi > half || xi <= -half {
                                crossed.set(true);
                            }
                        }
                    }
                };
                let end = integrate(
                    integrator,
                    |s, t| {
                        check(s);
                        field.velocity(s, t)
                    },
                    &x0,
                    dim,
                    t0,
                    h,
                    check,
                )
                .map_err(|_| Error::StepUnderflow {
                    x: x.coords().iter().map(|v| v.as_f64()).collect(),
                    t0: t0.as_f64(),
                    h: h.as_f64(),
                })?;
                let mut delta = zero3();
                for j in 0..dim {
                    delta[j] = end[j] - x0[j];
                }
                let disp = Displacement::from_raw(delta, dim);
                Ok(StepResult {
                    image: disp.apply(x),
                    disp,
                    crossed_cut: crossed.get(),
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::{sample_haar, wrap, SamplingStrategy};

    fn pts(dim: usize, n: usize, seed: u64) -> Vec<TorusPoint<f64>> {
        sample_haar(dim, n, seed, SamplingStrategy::MonteCarlo).unwrap()
    }

    #[test]
    fn translation_step() {
        let sys = DynamicalSystem::translation(&[0.123f64, 0.0, 0.0]).unwrap();
        let x = wrap(&[0.5, 0.5, 0.5]).unwrap();
        let r = sys.step(&x, 0.0, 1.0).unwrap();
        assert!((r.image.coords()[0] - 0.623).abs() < 1e-15);
        assert_eq!(&r.image.coords()[1..], &[0.5, 0.5]);
        assert_eq!(r.disp.delta(), &[0.123, 0.0, 0.0]);
    }

    #[test]
    fn cat_map_step() {
        let sys = DynamicalSystem::<f64>::arnold_cat();
        let x = wrap(&[0.25, 0.5]).unwrap();
        let r = sys.step(&x, 0.0, 1.0).unwrap();
        assert_eq!(r.image.coords(), &[0.0, 0.75]);
        assert_eq!(r.disp.delta(), &[0.75, 0.25]);
    }

    #[test]
    fn cat_map_rejects_non_unimodular() {
        assert!(DynamicalSystem::<f64>::cat_map([[2, 0], [0, 1]]).is_err());
        assert!(DynamicalSystem::<f64>::cat_map([[1, 1], [1, 2]]).is_ok());
    }

    #[test]
    fn dimension_mismatch() {
        let sys = DynamicalSystem::<f64>::arnold_cat();
        let x = wrap(&[0.1, 0.2, 0.3]).unwrap();
        assert!(sys.step(&x, 0.0, 1.0).is_err());
    }

    #[test]
    fn flow_rejects_non_positive_h() {
        let sys =
            DynamicalSystem::flow(VectorField::abc(1.0, 1.0, 1.0), IntegratorConfig::default())
                .unwrap();
        let x = wrap(&[0.1, 0.2, 0.3]).unwrap();
        assert!(sys.step(&x, 0.0, 0.0).is_err());
        assert!(sys.step(&x, 0.0, -1.0).is_err());
    }

    #[test]
    fn rk4_richardson_self_consistency() {
        let f = VectorField::abc(1.0, 1.0, 1.0);
        let a = DynamicalSystem::flow(f.clone(), IntegratorConfig::rk4(1e-3)).unwrap();
        let b = DynamicalSystem::flow(f, IntegratorConfig::rk4(5e-4)).unwrap();
        for x in pts(3, 100, 4) {
            let da = a.step(&x, 0.0, 1.0).unwrap().disp;
            let db = b.step(&x, 0.0, 1.0).unwrap().disp;
            for j in 0..3 {
                assert!((da.delta()[j] - db.delta()[j]).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn flow_group_property() {
        let f = VectorField::abc(1.0, 1.0, 1.0);
        let sys = DynamicalSystem::flow(f, IntegratorConfig::reference()).unwrap();
        let tol = 10.0 * 1e-10 * 10.0;
        for x in pts(3, 100, 6) {
            let one = sys.step(&x, 0.0, 0.3).unwrap();
            let two = sys.step(&one.image, 0.3, 0.45).unwrap();
            let direct = sys.step(&x, 0.0, 0.75).unwrap();
            for j in 0..3 {
                let composed = one.disp.delta()[j] + two.disp.delta()[j];
                assert!(
                    (composed - direct.disp.delta()[j]).abs() <= tol,
                    "{composed} vs {}",
                    direct.disp.delta()[j]
                );
            }
        }
    }

    #[test]
    fn rk4_order_against_reference() {
        let f = VectorField::abc(1.0, 1.0, 1.0);
        let reference = DynamicalSystem::flow(f.clone(), IntegratorConfig::DormandPrince {
            abs_tol: 1e-13,
            rel_tol: 1e-13,
        })
        .unwrap();
        let xs = pts(3, 20, 8);
        let refs: Vec<_> = xs
            .iter()
            .map(|x| reference.step(x, 0.0, 1.0).unwrap().disp)
            .collect();
        let steps = [0.1, 0.05, 0.02, 0.01];
        let errs: Vec<f64> = steps
            .iter()
            .map(|&s| {
                let sys = DynamicalSystem::flow(f.clone(), IntegratorConfig::rk4(s)).unwrap();
                xs.iter()
                    .zip(&refs)
                    .map(|(x, r)| {
                        let d = sys.step(x, 0.0, 1.0).unwrap().disp;
                        (0..3)
                            .map(|j| (d.delta()[j] - r.delta()[j]).abs())
                            .fold(0.0, f64::max)
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        let lx: Vec<f64> = steps.iter().map(|s| s.ln()).collect();
        let ly: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
        let n = lx.len() as f64;
        let mx = lx.iter().sum::<f64>() / n;
        let my = ly.iter().sum::<f64>() / n;
        let slope = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / lx.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        assert!((slope - 4.0).abs() <= 0.3, "slope {slope}, errors {errs:?}");
    }

    #[test]
    fn exact_maps_preserve_box_counts() {
        let n = 200_000;
        let boxes = 16usize;
        let check = |sys: &DynamicalSystem<f64>, dim: usize| {
            let cells = boxes.pow(dim as u32);
            let mut counts = vec![0usize; cells];
            for x in pts(dim, n, 31) {
                let y = sys.step(&x, 0.0, 1.0).unwrap().image;
                let mut idx = 0;
                for &c in y.coords() {
                    idx = idx * boxes + ((c * boxes as f64) as usize).min(boxes - 1);
                }
                counts[idx] += 1;
            }
            let per_box = n as f64 / cells as f64;
            let worst = counts
                .iter()
                .map(|&c| (c as f64 - per_box).abs() / per_box)
                .fold(0.0, f64::max);
            assert!(worst <= 5.0 / per_box.sqrt(), "{worst}");
        };
        check(&DynamicalSystem::translation(&[0.123, 0.4, 0.77]).unwrap(), 3);
        check(&DynamicalSystem::arnold_cat(), 2);
    }

    #[test]
    fn hou_luo_flags_cut_crossings() {
        let sys = DynamicalSystem::flow(
            VectorField::hou_luo_default(1.0),
            IntegratorConfig::rk4(1e-2),
        )
        .unwrap();
        // near the centre: slow, no crossing
        let x = wrap(&[0.5, 0.5, 0.51]).unwrap();
        assert!(!sys.step(&x, 0.0, 1.0).unwrap().crossed_cut);
        // far along the expanding axis: reaches the z-sheet within one unit
        let x = wrap(&[0.5, 0.5, 0.9]).unwrap();
        assert!(sys.step(&x, 0.0, 1.0).unwrap().crossed_cut);
    }

    #[test]
    fn hou_luo_flow_is_explicit_near_centre() {
        // xi3(t) = xi3(0) exp(2 (1 - e^{-t})) for a = 1 and t0 = 0
        let sys = DynamicalSystem::flow(
            VectorField::hou_luo_default(1.0),
            IntegratorConfig::reference(),
        )
        .unwrap();
        let x = wrap(&[0.45, 0.52, 0.51]).unwrap();
        let r = sys.step(&x, 0.0, 1.0).unwrap();
        let g = 1.0 - (-1.0f64).exp();
        let expect = [
            -0.05 * ((-g).exp() - 1.0),
            0.02 * ((-g).exp() - 1.0),
            0.01 * ((2.0 * g).exp() - 1.0),
        ];
        for j in 0..3 {
            assert!((r.disp.delta()[j] - expect[j]).abs() < 1e-9, "{:?} {:?}", r.disp, expect);
        }
    }
}
