//! The neutral metric and the canonical symplectic form on `T*B`, and their
//! compatibility with `D`.

use nalgebra::{DMatrix, DVector};

use crate::base::{covariant_derivative, Flavor, Slot};
use crate::error::{Error, Result};
use crate::lifted::{FieldKind, FrameField, FramedVector, LiftedSpace, PointJet, TotalPoint};
use crate::tensor::{fd_jet, signature, BoxDomain, SmoothField, Tensor};

/// `⟨X, V⟩ = V̂(X̌)`, `⟨X, Y⟩ = ⟨V, W⟩ = 0`.
#[derive(Clone, Debug)]
pub struct NeutralMetric {
    space: LiftedSpace,
}

impl NeutralMetric {
    pub fn new(space: LiftedSpace) -> Result<Self> {
        if space.flavor() != Flavor::Cotangent {
            return Err(Error::WrongFlavor);
        }
        Ok(NeutralMetric { space })
    }

    pub fn space(&self) -> &LiftedSpace {
        &self.space
    }

    /// Pairing of two framed vectors: `v₁(y₂) + v₂(y₁)`.
    pub fn pair(a: &FramedVector, b: &FramedVector) -> f64 {
        let mut s = 0.0;
        for i in 0..a.y.len() {
            s += a.v[i] * b.y[i] + b.v[i] * a.y[i];
        }
        s
    }

    /// Chart matrix in `(∂_i, ∂/∂ξ_a)`.
    pub fn matrix(&self, p: &TotalPoint) -> Result<DMatrix<f64>> {
        self.space.base().domain().check(&p.x, 0.0)?;
        let g = self.space.base().christoffels(&p.x)?;
        Ok(metric_from_gamma(&g, &p.xi))
    }

    /// Chart matrix as a field on `M`, for finite differencing.
    pub fn field(&self) -> SmoothField {
        let base = self.space.base().clone();
        let n = self.space.n();
        let dom = base.domain().product(&BoxDomain::unbounded(n));
        SmoothField::new(dom, &[2 * n, 2 * n], move |z| {
            let p = TotalPoint::from_chart(z);
            match base.christoffels(&p.x) {
                Ok(g) => Tensor::from_matrix(&metric_from_gamma(&g, &p.xi)),
                Err(_) => Tensor::zeros(&[2 * n, 2 * n]).map(|_| f64::NAN),
            }
        })
        .with_step(self.space.fd_step())
        .expect("positive step")
    }

    pub fn signature(&self, p: &TotalPoint, tol: f64) -> Result<(usize, usize, usize)> {
        signature(&self.matrix(p)?, tol)
    }

    /// `Dg` at `p` as `[m][μ][ν]`, by finite differences of the chart matrix.
    pub fn covariant_derivative(&self, p: &TotalPoint) -> Result<Tensor> {
        let field = self.field();
        let z = p.chart();
        let g = field.eval(&z)?;
        let dg = fd_jet(&field, &z, 1)?;
        let c = self.space.christoffels(p)?;
        Ok(covariant_derivative(&g, &dg, &c, &[], &[Slot::Down, Slot::Down]))
    }

    /// Largest `|Dg|` component over the points.
    pub fn compatibility(&self, points: &[TotalPoint]) -> Result<f64> {
        let mut worst = 0.0_f64;
        for p in points {
            worst = worst.max(self.covariant_derivative(p)?.max_abs());
        }
        Ok(worst)
    }

    /// Frame value of `q ↦ ⟨A, B⟩_q`.
    fn pair_at(&self, a: &FrameField, b: &FrameField, q: &TotalPoint) -> Result<f64> {
        Ok(Self::pair(
            &self.space.frame_value(a, q)?,
            &self.space.frame_value(b, q)?,
        ))
    }

    /// Derivative of `⟨A, B⟩` along the field `W` at `p`.
    fn derivative_along(&self, w: &FrameField, a: &FrameField, b: &FrameField, p: &TotalPoint) -> Result<f64> {
        let dir = self.space.frame_to_chart(p, &self.space.frame_value(w, p)?)?;
        let h = self.space.fd_step();
        let z = p.chart();
        let f = |s: f64| -> Result<f64> {
            let q: Vec<f64> = z.iter().zip(&dir).map(|(zi, di)| zi + s * di).collect();
            self.pair_at(a, b, &TotalPoint::from_chart(&q))
        };
        let d1 = (f(h)? - f(-h)?) / (2.0 * h);
        let d2 = (f(2.0 * h)? - f(-2.0 * h)?) / (4.0 * h);
        Ok((4.0 * d1 - d2) / 3.0)
    }

    /// `|2⟨D_X Y, Z⟩ − Koszul right-hand side|` for three frame fields at `p`.
    ///
    /// The left side uses the frame form of `D`; the right side uses
    /// finite-difference derivatives of the pairing and the closed-form
    /// brackets.
    pub fn koszul_residual(
        &self,
        x: &FrameField,
        y: &FrameField,
        z: &FrameField,
        p: &TotalPoint,
    ) -> Result<KoszulSides> {
        let s = &self.space;
        let lhs = 2.0 * Self::pair(&s.d_frame(x, y, p)?, &s.frame_value(z, p)?);
        let xv = s.frame_value(x, p)?;
        let yv = s.frame_value(y, p)?;
        let zv = s.frame_value(z, p)?;
        let rhs = self.derivative_along(x, y, z, p)? + self.derivative_along(y, x, z, p)?
            - self.derivative_along(z, x, y, p)?
            + Self::pair(&s.bracket_frame(x, y, p)?, &zv)
            - Self::pair(&s.bracket_frame(x, z, p)?, &yv)
            - Self::pair(&s.bracket_frame(y, z, p)?, &xv);
        Ok(KoszulSides { lhs, rhs })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KoszulSides {
    pub lhs: f64,
    pub rhs: f64,
}

impl KoszulSides {
    pub fn residual(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }
}

/// `g_{ij} = −2Γ^b_{ij}ξ_b`, `g(∂_i, ∂/∂ξ_a) = δ_i^a`, vertical block zero.
pub fn metric_from_gamma(gamma: &Tensor, xi: &[f64]) -> DMatrix<f64> {
    let n = xi.len();
    let mut g = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            g[(i, j)] = -2.0 * (0..n).map(|b| gamma[[b, i, j]] * xi[b]).sum::<f64>();
        }
        g[(i, n + i)] = 1.0;
        g[(n + i, i)] = 1.0;
    }
    g
}

/// `ω(V, X) = −ω(X, V) = V̂(X̌)`, `ω(X, Y) = ω(V, W) = 0`.
#[derive(Clone, Debug)]
pub struct CanonicalSymplectic {
    space: LiftedSpace,
}

impl CanonicalSymplectic {
    pub fn new(space: LiftedSpace) -> Result<Self> {
        if space.flavor() != Flavor::Cotangent {
            return Err(Error::WrongFlavor);
        }
        Ok(CanonicalSymplectic { space })
    }

    pub fn space(&self) -> &LiftedSpace {
        &self.space
    }

    /// Frame evaluation `ω(a, b) = a.v(b.y) − b.v(a.y)`.
    pub fn pair(a: &FramedVector, b: &FramedVector) -> f64 {
        let mut s = 0.0;
        for i in 0..a.y.len() {
            s += a.v[i] * b.y[i] - b.v[i] * a.y[i];
        }
        s
    }

    /// Chart matrix `[[0, −I], [I, 0]]` in `(x, ξ)` order.
    pub fn matrix(&self) -> DMatrix<f64> {
        symplectic_matrix(self.space.n())
    }

    pub fn field(&self) -> SmoothField {
        SmoothField::constant(self.space.domain(), Tensor::from_matrix(&self.matrix()))
            .with_step(self.space.fd_step())
            .expect("positive step")
    }

    /// Largest component of `dω` at `p`, from finite differences of the coefficients.
    pub fn exterior_derivative(&self, p: &TotalPoint) -> Result<f64> {
        let field = self.field();
        let dw = fd_jet(&field, &p.chart(), 1)?;
        let d = 2 * self.space.n();
        let mut worst = 0.0_f64;
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    let v = dw[[a, b, c]] + dw[[b, c, a]] + dw[[c, a, b]];
                    worst = worst.max(v.abs());
                }
            }
        }
        Ok(worst)
    }

    /// `Dω` at `p` as `[m][μ][ν]`.
    pub fn covariant_derivative(&self, p: &TotalPoint) -> Result<Tensor> {
        let field = self.field();
        let z = p.chart();
        let w = field.eval(&z)?;
        let dw = fd_jet(&field, &z, 1)?;
        let c = self.space.christoffels(p)?;
        Ok(covariant_derivative(&w, &dw, &c, &[], &[Slot::Down, Slot::Down]))
    }

    /// `(D_X ω)(Y, Z)` on framed vectors at `p`, through the chart Christoffels.
    pub fn covariant_derivative_on(
        &self,
        p: &TotalPoint,
        x: &FramedVector,
        y: &FramedVector,
        z: &FramedVector,
    ) -> Result<f64> {
        let j = self.space.point_jet(&p.x)?;
        let dw = self.covariant_derivative(p)?;
        let to = |w: &FramedVector| LiftedSpace::frame_to_chart_with(&j, p, w);
        let (xc, yc, zc) = (to(x), to(y), to(z));
        let d = xc.len();
        let mut s = 0.0;
        for m in 0..d {
            for a in 0..d {
                for b in 0..d {
                    s += dw[[m, a, b]] * xc[m] * yc[a] * zc[b];
                }
            }
        }
        Ok(s)
    }

    pub fn compatibility(&self, points: &[TotalPoint]) -> Result<f64> {
        let mut worst = 0.0_f64;
        for p in points {
            worst = worst.max(self.covariant_derivative(p)?.max_abs());
        }
        Ok(worst)
    }
}

pub fn symplectic_matrix(n: usize) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        w[(i, n + i)] = -1.0;
        w[(n + i, i)] = 1.0;
    }
    w
}

/// `½(R̂(Y,Z)V)(X) + (Φ̂(X,Z)V)(Y) − (Φ̂(X,Y)V)(Z)` for base vectors and a covector `V`.
pub fn symplectic_condition(jet: &PointJet, x: &[f64], y: &[f64], z: &[f64], v: &[f64]) -> f64 {
    let v = DVector::from_column_slice(v);
    let eval = |m: DMatrix<f64>, w: &[f64]| -> f64 { (m * &v).iter().zip(w).map(|(a, b)| a * b).sum() };
    0.5 * eval(PointJet::contract(&jet.bundle_curvature, y, z), x) + eval(PointJet::contract(&jet.phi, x, z), y)
        - eval(PointJet::contract(&jet.phi, x, y), z)
}

/// Closed-form value of the symplectic condition and the direct `(D_Xω)(Y,Z)`,
/// for horizontal directions `x, y, z` at `p` (covector `V = ξ`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymplecticSample {
    pub closed_form: f64,
    pub direct: f64,
}

pub fn symplectic_sample(
    omega: &CanonicalSymplectic,
    p: &TotalPoint,
    x: &[f64],
    y: &[f64],
    z: &[f64],
) -> Result<SymplecticSample> {
    let j = omega.space().point_jet(&p.x)?;
    let closed_form = symplectic_condition(&j, x, y, z, &p.xi);
    let h = |w: &[f64]| FramedVector::horizontal(w.to_vec());
    let direct = omega.covariant_derivative_on(p, &h(x), &h(y), &h(z))?;
    Ok(SymplecticSample { closed_form, direct })
}

/// Result of splitting `Φ̂` against the symplectic member of the family.
#[derive(Clone, Debug)]
pub struct SymplecticSplit {
    pub compatible: bool,
    /// Largest asymmetry of the recovered cubic over the grid.
    pub asymmetry: f64,
    /// `Š^l_{ijk}` at each grid point (as `[l][i][j][k]`) when compatible.
    pub cubic: Option<Vec<(Vec<f64>, Tensor)>>,
}

/// Subtracts the symplectic member `Φ̂_{t_s}` and tests whether the rest
/// comes from a totally symmetric `Š`.
pub fn phi_symplectic_decomposition(space: &LiftedSpace, grid: usize, tol: f64) -> Result<SymplecticSplit> {
    use crate::lifted::t_values::SYMPLECTIC;
    if space.flavor() != Flavor::Cotangent {
        return Err(Error::WrongFlavor);
    }
    let n = space.n();
    let reference = LiftedSpace::from_base(
        space.base().clone(),
        Flavor::Cotangent,
        crate::lifted::PhiSpec::new(SYMPLECTIC),
    )?;
    let mut asymmetry = 0.0_f64;
    let mut cubic = Vec::new();
    for x in space.base().sample_grid(grid) {
        let phi = space.phi_eval(&x)?;
        let phi_s = reference.phi_eval(&x)?;
        let mut s = Tensor::zeros(&[n, n, n, n]);
        for i in 0..n {
            for j in 0..n {
                let d = &phi[i * n + j] - &phi_s[i * n + j];
                for k in 0..n {
                    for l in 0..n {
                        s[[l, i, j, k]] = -d[(k, l)];
                    }
                }
            }
        }
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let v = s[[l, i, j, k]];
                        asymmetry = asymmetry
                            .max((v - s[[l, j, i, k]]).abs())
                            .max((v - s[[l, i, k, j]]).abs());
                    }
                }
            }
        }
        cubic.push((x, s));
    }
    let compatible = asymmetry <= tol;
    Ok(SymplecticSplit {
        compatible,
        asymmetry,
        cubic: compatible.then_some(cubic),
    })
}

/// The 27 ordered kind triples `(X|V|A)³`.
pub fn kind_triples() -> Vec<[FieldKind; 3]> {
    let kinds = [FieldKind::Basic, FieldKind::ConstantVertical, FieldKind::LinearVertical];
    let mut out = Vec::with_capacity(27);
    for a in kinds {
        for b in kinds {
            for c in kinds {
                out.push([a, b, c]);
            }
        }
    }
    out
}

/// A non-constant test field of the given kind; `variant` picks one of a few.
pub fn test_field(kind: FieldKind, n: usize, variant: usize) -> FrameField {
    let dom = BoxDomain::unbounded(n);
    let v = variant as f64;
    match kind {
        FieldKind::Basic | FieldKind::ConstantVertical => {
            let f = SmoothField::new(dom, &[n], move |x| {
                let data = (0..n)
                    .map(|k| {
                        let kf = k as f64;
                        0.4 + 0.3 * v - 0.5 * kf
                            + (0.7 * x[k % x.len()] + 0.2 * v + kf).sin()
                            + 0.25 * x[(k + 1) % x.len()] * (1.0 + v)
                    })
                    .collect();
                Tensor::from_vec(&[n], data).expect("length n")
            });
            if kind == FieldKind::Basic {
                FrameField::Basic(f)
            } else {
                FrameField::ConstantVertical(f)
            }
        }
        FieldKind::LinearVertical => FrameField::LinearVertical(SmoothField::new(dom, &[n, n], move |x| {
            let mut t = Tensor::zeros(&[n, n]);
            for a in 0..n {
                for b in 0..n {
                    let (af, bf) = (a as f64, b as f64);
                    t[[a, b]] =
                        (0.3 * af - 0.6 * bf + v).cos() + 0.2 * (af + 1.0) * x[b % x.len()] - 0.1 * v * x[a % x.len()];
                }
            }
            t
        })),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lifted::PhiSpec;
    use crate::presets::preset;

    fn metric(name: &str, t: f64) -> NeutralMetric {
        NeutralMetric::new(LiftedSpace::from_base(preset(name).unwrap(), Flavor::Cotangent, PhiSpec::new(t)).unwrap())
            .unwrap()
    }

    #[test]
    fn zero_section_metric_is_hyperbolic_pairing() {
        let g = metric("sphere_stereo", 1.0);
        let p = TotalPoint::zero_section(vec![0.3, -0.2]);
        let m = g.matrix(&p).unwrap();
        let mut want = DMatrix::zeros(4, 4);
        for i in 0..2 {
            want[(i, 2 + i)] = 1.0;
            want[(2 + i, i)] = 1.0;
        }
        assert_eq!(m, want);
        assert_eq!(g.signature(&p, 1e-9).unwrap(), (2, 2, 0));
    }

    #[test]
    fn poly22_metric_entry() {
        let g = metric("poly22", 1.0);
        let m = g.matrix(&TotalPoint::new(vec![1.0, 0.0], vec![1.0, 0.0])).unwrap();
        assert!((m[(1, 1)] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn frame_values_of_metric() {
        let g = metric("halfplane", 1.0);
        let p = TotalPoint::new(vec![0.2, 1.5], vec![0.6, -1.1]);
        let m = g.matrix(&p).unwrap();
        let f = g.space().frame_matrix(&p).unwrap();
        let framed = f.transpose() * &m * &f;
        let mut want = DMatrix::zeros(4, 4);
        for i in 0..2 {
            want[(i, 2 + i)] = 1.0;
            want[(2 + i, i)] = 1.0;
        }
        assert!((framed - want).amax() < 1e-12);
    }

    #[test]
    fn symplectic_frame_values_and_closedness() {
        let w = CanonicalSymplectic::new(
            LiftedSpace::from_base(preset("poly22").unwrap(), Flavor::Cotangent, PhiSpec::new(0.0)).unwrap(),
        )
        .unwrap();
        let p = TotalPoint::new(vec![0.2, 0.5], vec![0.6, -1.1]);
        let f = w.space().frame_matrix(&p).unwrap();
        let framed = f.transpose() * w.matrix() * &f;
        // ω(V, X) = V̂(X̌): row V = n + a, column X = i
        for a in 0..2 {
            for i in 0..2 {
                let want = if a == i { 1.0 } else { 0.0 };
                assert!((framed[(2 + a, i)] - want).abs() < 1e-12);
                assert!(framed[(a, i)].abs() < 1e-12);
                assert!(framed[(2 + a, 2 + i)].abs() < 1e-12);
            }
        }
        assert_eq!(w.exterior_derivative(&p).unwrap(), 0.0);
    }

    #[test]
    fn structures_need_cotangent() {
        let s = LiftedSpace::from_base(preset("poly22").unwrap(), Flavor::Tangent, PhiSpec::new(1.0)).unwrap();
        assert!(matches!(NeutralMetric::new(s.clone()), Err(Error::WrongFlavor)));
        assert!(matches!(CanonicalSymplectic::new(s), Err(Error::WrongFlavor)));
    }

    #[test]
    fn flat_base_is_compatible_with_everything() {
        let p = vec![TotalPoint::new(vec![0.2, 0.5], vec![0.6, -1.1])];
        for t in [-1.0, 0.0, 1.0] {
            assert!(metric("flat_2", t).compatibility(&p).unwrap() < 1e-12);
        }
    }

    #[test]
    fn metric_compatibility_selects_levi_civita() {
        let p = vec![TotalPoint::new(vec![0.2, 0.5], vec![0.6, -1.1])];
        assert!(metric("poly22", 1.0).compatibility(&p).unwrap() < 1e-6);
        assert!(metric("poly22", 0.0).compatibility(&p).unwrap() > 1e-3);
    }

    #[test]
    fn koszul_on_vertical_triple_is_zero() {
        let g = metric("poly22", 1.0);
        let p = TotalPoint::new(vec![0.2, 0.5], vec![0.6, -1.1]);
        let v = test_field(FieldKind::ConstantVertical, 2, 0);
        let w = test_field(FieldKind::ConstantVertical, 2, 1);
        let u = test_field(FieldKind::ConstantVertical, 2, 2);
        let k = g.koszul_residual(&v, &w, &u, &p).unwrap();
        assert!(k.lhs.abs() < 1e-12 && k.rhs.abs() < 1e-9);
    }

    #[test]
    fn koszul_basic_triple_equals_curvature_pairing() {
        let g = metric("poly22", 1.0);
        let p = TotalPoint::new(vec![0.2, 0.5], vec![0.6, -1.1]);
        let j = g.space().point_jet(&p.x).unwrap();
        for x in 0..2 {
            for y in 0..2 {
                for z in 0..2 {
                    let f = |i| FrameField::coordinate_basic(2, i);
                    let k = g.koszul_residual(&f(x), &f(y), &f(z), &p).unwrap();
                    let want = 2.0 * (0..2).map(|l| j.curvature[[l, x, y, z]] * p.xi[l]).sum::<f64>();
                    assert!((k.lhs - want).abs() < 1e-9, "lhs {} want {want}", k.lhs);
                    assert!(k.residual() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn decomposition_recovers_cubic() {
        use crate::lifted::t_values::SYMPLECTIC;
        let base = preset("poly22").unwrap();
        let plain = LiftedSpace::from_base(base.clone(), Flavor::Cotangent, PhiSpec::new(SYMPLECTIC)).unwrap();
        let split = phi_symplectic_decomposition(&plain, 3, 1e-8).unwrap();
        assert!(split.compatible);
        assert!(split.cubic.unwrap().iter().all(|(_, s)| s.max_abs() < 1e-12));

        let s0 = SmoothField::new(BoxDomain::unbounded(2), &[2, 2, 2, 2], |x| {
            let mut t = Tensor::zeros(&[2, 2, 2, 2]);
            // Š¹ = x₂ (dx¹)³ + (dx¹)²dx² terms, Š² = dx¹(dx²)²
            for &(i, j, k) in &[(0, 0, 1), (0, 1, 0), (1, 0, 0)] {
                t[[0, i, j, k]] = 0.5;
            }
            t[[0, 0, 0, 0]] = x[1];
            for &(i, j, k) in &[(0, 1, 1), (1, 0, 1), (1, 1, 0)] {
                t[[1, i, j, k]] = -0.25 * x[0];
            }
            t
        });
        let with =
            LiftedSpace::from_base(base, Flavor::Cotangent, PhiSpec::with_cubic(SYMPLECTIC, s0.clone())).unwrap();
        let split = phi_symplectic_decomposition(&with, 3, 1e-8).unwrap();
        assert!(split.compatible);
        for (x, s) in split.cubic.unwrap() {
            assert!(s.max_diff(&s0.eval(&x).unwrap()) < 1e-9);
        }

        let lc = LiftedSpace::from_base(preset("poly22").unwrap(), Flavor::Cotangent, PhiSpec::new(1.0)).unwrap();
        assert!(!phi_symplectic_decomposition(&lc, 3, 1e-8).unwrap().compatible);
    }
}
