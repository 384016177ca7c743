//! The connection `D` on the total space `M = TB` or `M = T*B`.
//!
//! `D` is realised twice. The frame form evaluates `D_A B` for basic,
//! constant-vertical and linear-vertical fields from base data only; the chart
//! form gives Christoffel symbols in `(x¹..xⁿ, ξ₁..ξₙ)`, from which curvature
//! `R` and `DR` are produced by finite differences. The two are cross-checked
//! by [`curvature_table`] and [`dr_table`].

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::base::{
    bundle_coefficients, bundle_curvature_from, covariant_derivative, curvature_from_christoffels, gamma_endomorphisms,
    gamma_from_curvature, jet_matrices, BaseConnection, BundleConnection, Flavor, Slot,
};
use crate::error::{Error, Result};
use crate::tensor::{fd_jet, symmetry_residual, BoxDomain, SmoothField, Tensor};

/// Parameter of the named structures on `T*B` and `TB`.
///
/// On `T*B`, `t = 1` is the Levi-Civita connection of the neutral metric and
/// `t = −1/3` is the family member preserving the canonical symplectic form.
pub mod t_values {
    pub const LEVI_CIVITA: f64 = 1.0;
    pub const SYMPLECTIC: f64 = -1.0 / 3.0;
    pub const COMPLETE_LIFT: f64 = 0.0;
    pub const OPPOSITE: f64 = -1.0;
}

/// Resolves `t` aliases such as `levi-civita` or plain numbers like `1/3`.
pub fn parse_t(s: &str) -> Result<f64> {
    let s = s.trim();
    match s {
        "levi-civita" => return Ok(t_values::LEVI_CIVITA),
        "symplectic" => return Ok(t_values::SYMPLECTIC),
        "complete-lift" => return Ok(t_values::COMPLETE_LIFT),
        "opposite" => return Ok(t_values::OPPOSITE),
        _ => {}
    }
    let bad = || Error::Invalid(format!("cannot parse t value '{s}'"));
    if let Some((num, den)) = s.split_once('/') {
        let num: f64 = num.trim().parse().map_err(|_| bad())?;
        let den: f64 = den.trim().parse().map_err(|_| bad())?;
        if den == 0.0 {
            return Err(bad());
        }
        return Ok(num / den);
    }
    s.parse().map_err(|_| bad())
}

/// A point of `M`: base point `x` and fiber coordinates `ξ`.
#[derive(Clone, Debug, PartialEq)]
pub struct TotalPoint {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
}

impl TotalPoint {
    pub fn new(x: Vec<f64>, xi: Vec<f64>) -> Self {
        assert_eq!(x.len(), xi.len(), "base and fiber dimensions differ");
        TotalPoint { x, xi }
    }

    pub fn zero_section(x: Vec<f64>) -> Self {
        let n = x.len();
        TotalPoint { x, xi: vec![0.0; n] }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn chart(&self) -> Vec<f64> {
        let mut z = self.x.clone();
        z.extend_from_slice(&self.xi);
        z
    }

    pub fn from_chart(z: &[f64]) -> Self {
        let n = z.len() / 2;
        TotalPoint {
            x: z[..n].to_vec(),
            xi: z[n..].to_vec(),
        }
    }
}

/// A tangent vector of `M` split as `yⁱHᵢ + vᵃ∂/∂ξₐ`.
#[derive(Clone, Debug, PartialEq)]
pub struct FramedVector {
    pub y: Vec<f64>,
    pub v: Vec<f64>,
}

impl FramedVector {
    pub fn zero(n: usize) -> Self {
        FramedVector {
            y: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    pub fn horizontal(y: Vec<f64>) -> Self {
        let n = y.len();
        FramedVector { y, v: vec![0.0; n] }
    }

    pub fn vertical(v: Vec<f64>) -> Self {
        let n = v.len();
        FramedVector { y: vec![0.0; n], v }
    }

    pub fn stacked(&self) -> Vec<f64> {
        let mut s = self.y.clone();
        s.extend_from_slice(&self.v);
        s
    }

    pub fn from_stacked(s: &[f64]) -> Self {
        let n = s.len() / 2;
        FramedVector {
            y: s[..n].to_vec(),
            v: s[n..].to_vec(),
        }
    }

    pub fn max_diff(&self, other: &FramedVector) -> f64 {
        self.stacked()
            .iter()
            .zip(other.stacked())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn max_abs(&self) -> f64 {
        self.stacked().iter().fold(0.0_f64, |m, a| m.max(a.abs()))
    }
}

/// The symmetric correction `Φ̂ = t·Φ̂₁ + Ŝ`.
#[derive(Clone, Debug)]
pub struct PhiSpec {
    pub t: f64,
    /// Totally symmetric `Š^l_{ijk}`, shape `[n,n,n,n]` as `[l][i][j][k]`.
    pub extra_s: Option<SmoothField>,
}

impl PhiSpec {
    pub fn new(t: f64) -> Self {
        PhiSpec { t, extra_s: None }
    }

    pub fn with_cubic(t: f64, s: SmoothField) -> Self {
        PhiSpec { t, extra_s: Some(s) }
    }
}

/// The three classes of vector fields on `M` used by the frame calculus.
#[derive(Clone, Debug)]
pub enum FrameField {
    /// Basic lift of a base vector field `X̌` (output shape `[n]`).
    Basic(SmoothField),
    /// Constant vertical field of a section `V̂` (output shape `[n]`).
    ConstantVertical(SmoothField),
    /// Linear vertical field `ξ ↦ Â(x)ξ` of an endomorphism field (shape `[n,n]`).
    LinearVertical(SmoothField),
}

impl FrameField {
    pub fn kind(&self) -> FieldKind {
        match self {
            FrameField::Basic(_) => FieldKind::Basic,
            FrameField::ConstantVertical(_) => FieldKind::ConstantVertical,
            FrameField::LinearVertical(_) => FieldKind::LinearVertical,
        }
    }

    fn field(&self) -> &SmoothField {
        match self {
            FrameField::Basic(f) | FrameField::ConstantVertical(f) | FrameField::LinearVertical(f) => f,
        }
    }

    /// Basic lift of a constant coordinate field.
    pub fn coordinate_basic(n: usize, i: usize) -> Self {
        FrameField::Basic(unit_field(n, i))
    }

    /// Constant vertical field of a coordinate section.
    pub fn coordinate_vertical(n: usize, a: usize) -> Self {
        FrameField::ConstantVertical(unit_field(n, a))
    }
}

fn unit_field(n: usize, i: usize) -> SmoothField {
    let mut e = Tensor::zeros(&[n]);
    e[[i]] = 1.0;
    SmoothField::constant(BoxDomain::unbounded(n), e)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    Basic,
    ConstantVertical,
    LinearVertical,
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FieldKind::Basic => "X",
            FieldKind::ConstantVertical => "V",
            FieldKind::LinearVertical => "A",
        })
    }
}

/// Base data of the lifted space at one base point.
#[derive(Clone, Debug)]
pub struct PointJet {
    pub x: Vec<f64>,
    /// `Γ^k_{ij}` as `[k][i][j]`.
    pub gamma: Tensor,
    /// `A_i`.
    pub a: Vec<DMatrix<f64>>,
    /// `da[m][i] = ∂_m A_i`.
    pub da: Vec<Vec<DMatrix<f64>>>,
    /// `Ř` as `[l][k][i][j]`.
    pub curvature: Tensor,
    /// `R̂_{ij}`, row-major.
    pub bundle_curvature: Vec<DMatrix<f64>>,
    /// `Φ̂_{ij}`, row-major.
    pub phi: Vec<DMatrix<f64>>,
    /// `Ψ̂_{ij} = ½R̂_{ij} + Φ̂_{ij}`, row-major.
    pub psi: Vec<DMatrix<f64>>,
}

impl PointJet {
    pub fn n(&self) -> usize {
        self.a.len()
    }

    /// `Σ uⁱ vʲ E_{ij}`.
    pub fn contract(forms: &[DMatrix<f64>], u: &[f64], v: &[f64]) -> DMatrix<f64> {
        let n = u.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let c = u[i] * v[j];
                if c != 0.0 {
                    m += &forms[i * n + j] * c;
                }
            }
        }
        m
    }

    /// `Σ uⁱ A_i`.
    pub fn a_along(&self, u: &[f64]) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(n, n);
        for (i, ai) in self.a.iter().enumerate() {
            m += ai * u[i];
        }
        m
    }
}

/// Which End-valued base tensor field to build with [`LiftedSpace::end_field`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EndForm {
    /// `R̂_{ij}`, shape `[n,n,n,n]` as `[i][j][a][b]`.
    BundleCurvature,
    /// `Φ̂_{ij}`.
    Phi,
    /// `Ψ̂_{ij}`.
    Psi,
    /// `(∇̂_m Ψ̂)_{ij}`, shape `[n,n,n,n,n]` as `[m][i][j][a][b]`.
    NablaPsi,
}

#[derive(Clone, Debug)]
pub struct LiftedSpace {
    bundle: BundleConnection,
    phi: PhiSpec,
}

impl LiftedSpace {
    pub fn new(bundle: BundleConnection, phi: PhiSpec) -> Result<Self> {
        let n = bundle.dim();
        if let Some(s) = &phi.extra_s {
            if s.output_shape() != [n, n, n, n] || s.domain_dim() != n {
                return Err(Error::Invalid(format!(
                    "cubic correction must be a field on ℝ^{n} with shape [{n},{n},{n},{n}]"
                )));
            }
            for x in bundle.base().sample_grid(3) {
                let v = s.eval(&x)?;
                for l in 0..n {
                    let slice = slice_first(&v, l);
                    let res = symmetry_residual(&slice);
                    if res > 1e-9 {
                        return Err(Error::Invalid(format!(
                            "cubic correction is not totally symmetric (residual {res:e})"
                        )));
                    }
                }
            }
        }
        Ok(LiftedSpace { bundle, phi })
    }

    pub fn from_base(base: BaseConnection, flavor: Flavor, phi: PhiSpec) -> Result<Self> {
        LiftedSpace::new(BundleConnection::new(base, flavor), phi)
    }

    pub fn bundle(&self) -> &BundleConnection {
        &self.bundle
    }

    pub fn base(&self) -> &BaseConnection {
        self.bundle.base()
    }

    pub fn flavor(&self) -> Flavor {
        self.bundle.flavor()
    }

    pub fn phi_spec(&self) -> &PhiSpec {
        &self.phi
    }

    pub fn n(&self) -> usize {
        self.bundle.dim()
    }

    pub fn fd_step(&self) -> f64 {
        self.base().fd_step()
    }

    /// Chart box of `M`: base box times an unbounded fiber.
    pub fn domain(&self) -> BoxDomain {
        self.base().domain().product(&BoxDomain::unbounded(self.n()))
    }

    /// Margin one more finite-difference level needs.
    pub fn level_margin(&self) -> f64 {
        2.0 * self.fd_step()
    }

    pub fn point_jet(&self, x: &[f64]) -> Result<PointJet> {
        let base = self.base();
        let n = self.n();
        let gamma = base.christoffels(x)?;
        let dgamma = base.christoffel_jet(x)?;
        let curvature = curvature_from_christoffels(&gamma, &dgamma);
        let a = bundle_coefficients(self.flavor(), &gamma);
        let da = jet_matrices(&fd_jet(self.bundle.coefficient_field(), x, 1)?);
        let bundle_curvature = bundle_curvature_from(&a, &da);
        let gam = gamma_endomorphisms(&gamma_from_curvature(&curvature));
        let cubic = match &self.phi.extra_s {
            Some(s) => Some(s.eval(x)?),
            None => None,
        };
        let t = self.phi.t;
        let mut phi = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let g = &gam[i * n + j];
                let mut m = match self.flavor() {
                    Flavor::Tangent => g * t,
                    // t·Φ̂₁ with (Φ̂₁(X,Y)V)(Z) = V(Γ(X,Y)Z), i.e. −t·Γ*
                    Flavor::Cotangent => g.transpose() * t,
                };
                if let Some(s) = &cubic {
                    // Š_{ij} as the endomorphism Z ↦ Š(∂_i,∂_j)Z, symmetrised in (i,j)
                    let sij = DMatrix::from_fn(n, n, |l, k| 0.5 * (s[[l, i, j, k]] + s[[l, j, i, k]]));
                    match self.flavor() {
                        Flavor::Tangent => m += sij,
                        Flavor::Cotangent => m -= sij.transpose(),
                    }
                }
                phi.push(m);
            }
        }
        let psi = phi.iter().zip(&bundle_curvature).map(|(p, r)| p + r * 0.5).collect();
        Ok(PointJet {
            x: x.to_vec(),
            gamma,
            a,
            da,
            curvature,
            bundle_curvature,
            phi,
            psi,
        })
    }

    pub fn phi_eval(&self, x: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        Ok(self.point_jet(x)?.phi)
    }

    pub fn psi_eval(&self, x: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        Ok(self.point_jet(x)?.psi)
    }

    /// An End-valued base tensor field as a [`SmoothField`] on a shrunk box.
    pub fn end_field(&self, which: EndForm) -> SmoothField {
        let me = Arc::new(self.clone());
        let n = self.n();
        let levels = match which {
            EndForm::NablaPsi => 2.0,
            _ => 1.0,
        };
        let dom = self.base().domain().shrink(levels * self.level_margin());
        let shape: Vec<usize> = match which {
            EndForm::NablaPsi => vec![n; 5],
            _ => vec![n; 4],
        };
        let out_shape = shape.clone();
        SmoothField::new(dom, &shape, move |x| {
            me.end_value(which, x)
                .unwrap_or_else(|_| Tensor::zeros(&out_shape).map(|_| f64::NAN))
        })
        .with_step(self.fd_step())
        .expect("positive step")
    }

    fn end_value(&self, which: EndForm, x: &[f64]) -> Result<Tensor> {
        let n = self.n();
        let pack = |forms: &[DMatrix<f64>]| {
            let mut t = Tensor::zeros(&[n, n, n, n]);
            for i in 0..n {
                for j in 0..n {
                    for a in 0..n {
                        for b in 0..n {
                            t[[i, j, a, b]] = forms[i * n + j][(a, b)];
                        }
                    }
                }
            }
            t
        };
        match which {
            EndForm::BundleCurvature => Ok(pack(&self.point_jet(x)?.bundle_curvature)),
            EndForm::Phi => Ok(pack(&self.point_jet(x)?.phi)),
            EndForm::Psi => Ok(pack(&self.point_jet(x)?.psi)),
            EndForm::NablaPsi => self.nabla_end(EndForm::Psi, x),
        }
    }

    /// Covariant derivative `∇̂` of an End-valued 2-form (`R̂`, `Φ̂`, `Ψ̂`) or of
    /// `∇̂Ψ̂` (giving `∇̂∇̂Ψ̂`, shape `[l][m][i][j][a][b]`).
    pub fn nabla_end(&self, which: EndForm, x: &[f64]) -> Result<Tensor> {
        let field = self.end_field(which);
        let value = field.eval(x)?;
        let jet = fd_jet(&field, x, 1)?;
        let j = self.point_jet(x)?;
        let slots: &[Slot] = match which {
            EndForm::NablaPsi => &[Slot::Down, Slot::Down, Slot::Down, Slot::FiberUp, Slot::FiberDown],
            _ => &[Slot::Down, Slot::Down, Slot::FiberUp, Slot::FiberDown],
        };
        Ok(covariant_derivative(&value, &jet, &j.gamma, &j.a, slots))
    }

    // ---- frame <-> chart ----

    /// Chart components `(yⁱ, vₐ − yⁱ(A_iξ)ₐ)` of a framed vector at `p`.
    pub fn frame_to_chart_with(jet: &PointJet, p: &TotalPoint, w: &FramedVector) -> Vec<f64> {
        let shift = jet.a_along(&w.y) * DVector::from_column_slice(&p.xi);
        let mut z = w.y.clone();
        z.extend(w.v.iter().zip(shift.iter()).map(|(v, s)| v - s));
        z
    }

    pub fn chart_to_frame_with(jet: &PointJet, p: &TotalPoint, z: &[f64]) -> FramedVector {
        let n = p.dim();
        let y = z[..n].to_vec();
        let shift = jet.a_along(&y) * DVector::from_column_slice(&p.xi);
        let v = z[n..].iter().zip(shift.iter()).map(|(u, s)| u + s).collect();
        FramedVector { y, v }
    }

    pub fn frame_to_chart(&self, p: &TotalPoint, w: &FramedVector) -> Result<Vec<f64>> {
        Ok(Self::frame_to_chart_with(&self.point_jet(&p.x)?, p, w))
    }

    pub fn chart_to_frame(&self, p: &TotalPoint, z: &[f64]) -> Result<FramedVector> {
        Ok(Self::chart_to_frame_with(&self.point_jet(&p.x)?, p, z))
    }

    /// Columns are the chart components of `H_1..H_n, ∂/∂ξ_1..∂/∂ξ_n` at `p`.
    pub fn frame_matrix_with(jet: &PointJet, p: &TotalPoint) -> DMatrix<f64> {
        let n = p.dim();
        let mut f = DMatrix::identity(2 * n, 2 * n);
        let xi = DVector::from_column_slice(&p.xi);
        for i in 0..n {
            let s = &jet.a[i] * &xi;
            for a in 0..n {
                f[(n + a, i)] = -s[a];
            }
        }
        f
    }

    pub fn frame_matrix(&self, p: &TotalPoint) -> Result<DMatrix<f64>> {
        Ok(Self::frame_matrix_with(&self.point_jet(&p.x)?, p))
    }

    /// Value of a frame field at `p`, in frame components.
    pub fn frame_value(&self, f: &FrameField, p: &TotalPoint) -> Result<FramedVector> {
        let n = self.n();
        let val = f.field().eval(&p.x)?;
        Ok(match f {
            FrameField::Basic(_) => FramedVector::horizontal(val.data().to_vec()),
            FrameField::ConstantVertical(_) => FramedVector::vertical(val.data().to_vec()),
            FrameField::LinearVertical(_) => {
                let m = val.to_matrix();
                FramedVector::vertical((m * DVector::from_column_slice(&p.xi)).iter().copied().collect())
            }
        })
        .map(|v| {
            debug_assert_eq!(v.y.len(), n);
            v
        })
    }

    /// Chart components of a frame field as a field on `M`.
    pub fn chart_field(&self, f: &FrameField) -> SmoothField {
        let me = Arc::new(self.clone());
        let f = f.clone();
        let n = self.n();
        SmoothField::new(self.domain(), &[2 * n], move |z| {
            let p = TotalPoint::from_chart(z);
            let comps = me
                .point_jet(&p.x)
                .and_then(|j| me.frame_value(&f, &p).map(|w| Self::frame_to_chart_with(&j, &p, &w)));
            match comps {
                Ok(c) => Tensor::from_vec(&[2 * n], c).expect("length 2n"),
                Err(_) => Tensor::zeros(&[2 * n]).map(|_| f64::NAN),
            }
        })
        .with_step(self.fd_step())
        .expect("positive step")
    }

    // ---- frame form of D ----

    /// `D_A B` at `p` from the closed-form case table, as a framed vector.
    pub fn d_frame(&self, a: &FrameField, b: &FrameField, p: &TotalPoint) -> Result<FramedVector> {
        use FrameField::*;
        let n = self.n();
        let j = self.point_jet(&p.x)?;
        let xi = DVector::from_column_slice(&p.xi);
        let vec = |v: DVector<f64>| v.iter().copied().collect::<Vec<f64>>();
        Ok(match (a, b) {
            (ConstantVertical(_) | LinearVertical(_), Basic(_) | ConstantVertical(_)) => FramedVector::zero(n),
            (ConstantVertical(vf), LinearVertical(af)) => {
                let v = DVector::from_column_slice(vf.eval(&p.x)?.data());
                let am = af.eval(&p.x)?.to_matrix();
                FramedVector::vertical(vec(am * v))
            }
            (LinearVertical(af), LinearVertical(bf)) => {
                let am = af.eval(&p.x)?.to_matrix();
                let bm = bf.eval(&p.x)?.to_matrix();
                FramedVector::vertical(vec(bm * am * xi))
            }
            (Basic(xf), Basic(yf)) => {
                let xv = xf.eval(&p.x)?.data().to_vec();
                let yv = yf.eval(&p.x)?.data().to_vec();
                let dy = fd_jet(yf, &p.x, 1)?;
                let mut h = vec![0.0; n];
                for (k, hk) in h.iter_mut().enumerate() {
                    for i in 0..n {
                        *hk += xv[i] * dy[[i, k]];
                        for jj in 0..n {
                            *hk += j.gamma[[k, i, jj]] * xv[i] * yv[jj];
                        }
                    }
                }
                let v = PointJet::contract(&j.psi, &xv, &yv) * xi;
                FramedVector { y: h, v: vec(v) }
            }
            (Basic(xf), ConstantVertical(vf)) => {
                let xv = xf.eval(&p.x)?.data().to_vec();
                let v = DVector::from_column_slice(vf.eval(&p.x)?.data());
                let dv = fd_jet(vf, &p.x, 1)?;
                let mut out = j.a_along(&xv) * &v;
                for i in 0..n {
                    for c in 0..n {
                        out[c] += xv[i] * dv[[i, c]];
                    }
                }
                FramedVector::vertical(vec(out))
            }
            (Basic(xf), LinearVertical(af)) => {
                let xv = xf.eval(&p.x)?.data().to_vec();
                let nabla = self.nabla_endomorphism(&j, af, &xv)?;
                FramedVector::vertical(vec(nabla * xi))
            }
        })
    }

    /// `∇̂_X̌ Â = X̌ⁱ(∂_iÂ + [A_i, Â])` at the jet's point.
    fn nabla_endomorphism(&self, j: &PointJet, af: &SmoothField, xv: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.n();
        let am = af.eval(&j.x)?.to_matrix();
        let da = fd_jet(af, &j.x, 1)?;
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            let di = DMatrix::from_fn(n, n, |r, c| da[[i, r, c]]);
            out += (di + &j.a[i] * &am - &am * &j.a[i]) * xv[i];
        }
        Ok(out)
    }

    /// `[A, B]` at `p` from the closed forms of the bracket table.
    pub fn bracket_frame(&self, a: &FrameField, b: &FrameField, p: &TotalPoint) -> Result<FramedVector> {
        use FrameField::*;
        let n = self.n();
        let j = self.point_jet(&p.x)?;
        let xi = DVector::from_column_slice(&p.xi);
        let vec = |v: DVector<f64>| v.iter().copied().collect::<Vec<f64>>();
        let neg = |w: FramedVector| FramedVector {
            y: w.y.iter().map(|v| -v).collect(),
            v: w.v.iter().map(|v| -v).collect(),
        };
        Ok(match (a, b) {
            (ConstantVertical(_), ConstantVertical(_)) => FramedVector::zero(n),
            (LinearVertical(af), ConstantVertical(vf)) => {
                let am = af.eval(&p.x)?.to_matrix();
                let v = DVector::from_column_slice(vf.eval(&p.x)?.data());
                FramedVector::vertical(vec(-(am * v)))
            }
            (ConstantVertical(_), LinearVertical(_)) => neg(self.bracket_frame(b, a, p)?),
            (LinearVertical(af), LinearVertical(bf)) => {
                let am = af.eval(&p.x)?.to_matrix();
                let bm = bf.eval(&p.x)?.to_matrix();
                FramedVector::vertical(vec(-(&am * &bm - &bm * &am) * xi))
            }
            (Basic(_), ConstantVertical(_)) | (Basic(_), LinearVertical(_)) => self.d_frame(a, b, p)?,
            (ConstantVertical(_), Basic(_)) | (LinearVertical(_), Basic(_)) => neg(self.bracket_frame(b, a, p)?),
            (Basic(xf), Basic(yf)) => {
                let xv = xf.eval(&p.x)?.data().to_vec();
                let yv = yf.eval(&p.x)?.data().to_vec();
                let dx = fd_jet(xf, &p.x, 1)?;
                let dy = fd_jet(yf, &p.x, 1)?;
                let y = (0..n)
                    .map(|k| (0..n).map(|i| xv[i] * dy[[i, k]] - yv[i] * dx[[i, k]]).sum())
                    .collect();
                let v = PointJet::contract(&j.bundle_curvature, &xv, &yv) * xi;
                FramedVector { y, v: vec(v) }
            }
        })
    }

    /// Lie bracket of two frame fields by finite differences of their chart components.
    pub fn bracket_fd(&self, a: &FrameField, b: &FrameField, p: &TotalPoint) -> Result<FramedVector> {
        let fa = self.chart_field(a);
        let fb = self.chart_field(b);
        let z = p.chart();
        let va = fa.eval(&z)?;
        let vb = fb.eval(&z)?;
        let ja = fd_jet(&fa, &z, 1)?;
        let jb = fd_jet(&fb, &z, 1)?;
        let d = z.len();
        let out: Vec<f64> = (0..d)
            .map(|l| (0..d).map(|m| va[[m]] * jb[[m, l]] - vb[[m]] * ja[[m, l]]).sum())
            .collect();
        self.chart_to_frame(p, &out)
    }

    // ---- chart form of D ----

    /// Christoffel symbols of `D` in `(x, ξ)` coordinates, `[λ][μ][ν]`.
    pub fn christoffels(&self, p: &TotalPoint) -> Result<Tensor> {
        self.base().domain().check(&p.x, 0.0)?;
        let j = self.point_jet(&p.x)?;
        Ok(Self::christoffels_with(&j, p))
    }

    pub fn christoffels_with(j: &PointJet, p: &TotalPoint) -> Tensor {
        let n = j.n();
        let d = 2 * n;
        let xi = DVector::from_column_slice(&p.xi);
        let mut c = Tensor::zeros(&[d, d, d]);
        for k in 0..n {
            for i in 0..n {
                for jj in 0..n {
                    c[[k, i, jj]] = j.gamma[[k, i, jj]];
                }
            }
        }
        for i in 0..n {
            for jj in 0..n {
                let mut m = &j.psi[i * n + jj] + &j.da[i][jj] + &j.a[i] * &j.a[jj];
                for k in 0..n {
                    m -= &j.a[k] * j.gamma[[k, i, jj]];
                }
                let v = m * &xi;
                for cc in 0..n {
                    c[[n + cc, i, jj]] = v[cc];
                }
            }
            for cc in 0..n {
                for b in 0..n {
                    c[[n + cc, i, n + b]] = j.a[i][(cc, b)];
                    c[[n + cc, n + b, i]] = j.a[i][(cc, b)];
                }
            }
        }
        c
    }

    /// Christoffel symbols as a field on `M` (shrunk so that one jet is safe).
    pub fn christoffel_field(&self) -> SmoothField {
        let me = Arc::new(self.clone());
        let d = 2 * self.n();
        let dom = self
            .base()
            .domain()
            .shrink(self.level_margin())
            .product(&BoxDomain::unbounded(self.n()));
        SmoothField::new(dom, &[d, d, d], move |z| {
            me.christoffels(&TotalPoint::from_chart(z))
                .unwrap_or_else(|_| Tensor::zeros(&[d, d, d]).map(|_| f64::NAN))
        })
        .with_step(self.fd_step())
        .expect("positive step")
    }

    /// Curvature of `D`, `[l][k][i][j]` over chart indices of `M`.
    pub fn curvature(&self, p: &TotalPoint) -> Result<Tensor> {
        let field = self.christoffel_field();
        let z = p.chart();
        let c = field.eval(&z)?;
        let dc = fd_jet(&field, &z, 1)?;
        Ok(curvature_from_christoffels(&c, &dc))
    }

    pub fn curvature_field(&self) -> SmoothField {
        let me = Arc::new(self.clone());
        let d = 2 * self.n();
        let dom = self
            .base()
            .domain()
            .shrink(2.0 * self.level_margin())
            .product(&BoxDomain::unbounded(self.n()));
        SmoothField::new(dom, &[d, d, d, d], move |z| {
            me.curvature(&TotalPoint::from_chart(z))
                .unwrap_or_else(|_| Tensor::zeros(&[d, d, d, d]).map(|_| f64::NAN))
        })
        .with_step(self.fd_step())
        .expect("positive step")
    }

    /// `DR`, `[m][l][k][i][j]` = component `l` of `(D_{∂_m}R)(∂_i,∂_j)∂_k`.
    pub fn nabla_curvature(&self, p: &TotalPoint) -> Result<Tensor> {
        let field = self.curvature_field();
        let z = p.chart();
        let r = field.eval(&z)?;
        let dr = fd_jet(&field, &z, 1)?;
        let c = self.christoffels(p)?;
        Ok(covariant_derivative(
            &r,
            &dr,
            &c,
            &[],
            &[Slot::Up, Slot::Down, Slot::Down, Slot::Down],
        ))
    }

    /// `D_w W` for a chart vector field `W` on `M`, via Christoffels.
    pub fn chart_derivative(&self, w: &[f64], field: &SmoothField, p: &TotalPoint) -> Result<Vec<f64>> {
        let z = p.chart();
        let d = z.len();
        let val = field.eval(&z)?;
        let jet = fd_jet(field, &z, 1)?;
        let c = self.christoffels(p)?;
        Ok((0..d)
            .map(|l| {
                let mut s = 0.0;
                for m in 0..d {
                    s += w[m] * jet[[m, l]];
                    for nu in 0..d {
                        s += c[[l, m, nu]] * w[m] * val[[nu]];
                    }
                }
                s
            })
            .collect())
    }

    /// `D_A B` at `p` computed through the chart Christoffels.
    pub fn d_chart(&self, a: &FrameField, b: &FrameField, p: &TotalPoint) -> Result<FramedVector> {
        let wa = self.frame_to_chart(p, &self.frame_value(a, p)?)?;
        let out = self.chart_derivative(&wa, &self.chart_field(b), p)?;
        self.chart_to_frame(p, &out)
    }
}

/// Uniform random points of `M` over the base box shrunk by `margin`, with
/// fiber coordinates in `[−xi_scale, xi_scale]`.
pub fn random_points<R: rand::Rng>(
    space: &LiftedSpace,
    count: usize,
    rng: &mut R,
    margin: f64,
    xi_scale: f64,
) -> Vec<TotalPoint> {
    let n = space.n();
    let dom = space.base().domain().shrink(margin);
    (0..count)
        .map(|_| {
            let u: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let xi = (0..n).map(|_| xi_scale * (2.0 * rng.gen::<f64>() - 1.0)).collect();
            TotalPoint::new(dom.lerp(&u, 10.0), xi)
        })
        .collect()
}

fn slice_first(t: &Tensor, l: usize) -> Tensor {
    let s = &t.shape()[1..];
    let block: usize = s.iter().product();
    Tensor::from_vec(s, t.data()[l * block..(l + 1) * block].to_vec()).expect("slice")
}

/// Evaluates a 4-slot chart tensor `T^l_{kij}` as `T(u, w) z` (directions `u`,
/// `w`, argument `z`).
pub fn apply_curvature(r: &Tensor, u: &[f64], w: &[f64], z: &[f64]) -> Vec<f64> {
    let d = u.len();
    (0..d)
        .map(|l| {
            let mut s = 0.0;
            for k in 0..d {
                if z[k] == 0.0 {
                    continue;
                }
                for i in 0..d {
                    if u[i] == 0.0 {
                        continue;
                    }
                    for j in 0..d {
                        s += r[[l, k, i, j]] * z[k] * u[i] * w[j];
                    }
                }
            }
            s
        })
        .collect()
}

/// Evaluates `(D_t R)(u, w) z` from a `[m][l][k][i][j]` tensor.
pub fn apply_nabla_curvature(dr: &Tensor, t: &[f64], u: &[f64], w: &[f64], z: &[f64]) -> Vec<f64> {
    let d = u.len();
    let mut out = vec![0.0; d];
    for m in 0..d {
        if t[m] == 0.0 {
            continue;
        }
        let block = d * d * d * d;
        let slice = Tensor::from_vec(&[d, d, d, d], dr.data()[m * block..(m + 1) * block].to_vec()).expect("slice");
        for (o, v) in out.iter_mut().zip(apply_curvature(&slice, u, w, z)) {
            *o += t[m] * v;
        }
    }
    out
}

/// One named residual of a closed-form check.
#[derive(Clone, Debug, PartialEq)]
pub struct ItemResidual {
    pub item: String,
    pub residual: f64,
}

fn record(items: &mut Vec<ItemResidual>, name: &str, r: f64) {
    if let Some(it) = items.iter_mut().find(|it| it.item == name) {
        it.residual = it.residual.max(r);
    } else {
        items.push(ItemResidual {
            item: name.to_string(),
            residual: r,
        });
    }
}

fn dvec(v: DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

/// Frame evaluation of the chart curvature against the closed-form table of
/// `R` on constant, basic and linear fields (the linear field used is `ξ ↦ Âξ`
/// with `Â = E₁₂ + 0.5·E₂₁`-type test endomorphisms).
///
/// Items: `R(U,V)=0`, `R(X,U)V=0`, `R(X,U)Y=Ψ̂(X,Y)U`, `R(X,Y)U=R̂(X,Y)U`,
/// `H R(X,Y)Z = Ř(X,Y)Z`, `V R(X,Y)Z`, and the linear-field cases.
pub fn curvature_table(space: &LiftedSpace, p: &TotalPoint) -> Result<Vec<ItemResidual>> {
    let n = space.n();
    let r = space.curvature(p)?;
    let j = space.point_jet(&p.x)?;
    let f = LiftedSpace::frame_matrix_with(&j, p);
    let col = |k: usize| f.column(k).iter().copied().collect::<Vec<f64>>();
    let h = |i: usize| col(i);
    let u = |a: usize| col(n + a);
    let to_frame = |z: Vec<f64>| LiftedSpace::chart_to_frame_with(&j, p, &z);
    let xi = DVector::from_column_slice(&p.xi);
    let nabla_rhat = space.nabla_end(EndForm::BundleCurvature, &p.x)?;
    let nabla_phi = space.nabla_end(EndForm::Phi, &p.x)?;
    let end_at = |t: &Tensor, m: usize, i: usize, jj: usize| DMatrix::from_fn(n, n, |a, b| t[[m, i, jj, a, b]]);
    // test endomorphisms for linear fields
    let endos: Vec<DMatrix<f64>> = vec![
        DMatrix::from_fn(n, n, |a, b| if a == 0 && b == n - 1 { 1.0 } else { 0.0 }),
        DMatrix::from_fn(n, n, |a, b| ((a + 2 * b) as f64 * 0.37).sin()),
    ];

    let mut items = Vec::new();
    let all: Vec<Vec<f64>> = (0..2 * n).map(col).collect();
    for a in 0..n {
        for b in 0..n {
            for w in &all {
                let out = apply_curvature(&r, &u(a), &u(b), w);
                record(&mut items, "R(U,V)=0", max_abs(&out));
            }
            for e in &endos {
                let lin = dvec(e * &xi);
                let lin_chart = LiftedSpace::frame_to_chart_with(&j, p, &FramedVector::vertical(lin));
                let out = apply_curvature(&r, &u(a), &u(b), &lin_chart);
                record(&mut items, "R(U,V)A=0", max_abs(&out));
            }
        }
    }
    for i in 0..n {
        for a in 0..n {
            for b in 0..n {
                let out = apply_curvature(&r, &h(i), &u(a), &u(b));
                record(&mut items, "R(X,U)V=0", max_abs(&out));
            }
            for jj in 0..n {
                let got = to_frame(apply_curvature(&r, &h(i), &u(a), &h(jj)));
                let want = FramedVector::vertical(dvec(j.psi[i * n + jj].column(a).into_owned()));
                record(&mut items, "R(X,U)Y=Psi(X,Y)U", got.max_diff(&want));
            }
            for e in &endos {
                let lin = FramedVector::vertical(dvec(e * &xi));
                let lin_chart = LiftedSpace::frame_to_chart_with(&j, p, &lin);
                let out = apply_curvature(&r, &h(i), &u(a), &lin_chart);
                record(&mut items, "R(X,U)A=0", max_abs(&out));
                // R(A,U)Z = 0 and R(A,U)V = 0
                for w in &all {
                    let out = apply_curvature(&r, &lin_chart, &u(a), w);
                    record(&mut items, "R(A,U)=0", max_abs(&out));
                }
                // R(X,A)U = 0, R(X,A)Z = Ψ̂(X,Z)∘Â ξ
                let out = apply_curvature(&r, &h(i), &lin_chart, &u(a));
                record(&mut items, "R(X,A)U=0", max_abs(&out));
                for k in 0..n {
                    let got = to_frame(apply_curvature(&r, &h(i), &lin_chart, &h(k)));
                    let want = FramedVector::vertical(dvec(&j.psi[i * n + k] * e * &xi));
                    record(&mut items, "R(X,A)Z=Psi(X,Z)A", got.max_diff(&want));
                }
            }
        }
        for jj in 0..n {
            for a in 0..n {
                let got = to_frame(apply_curvature(&r, &h(i), &h(jj), &u(a)));
                let want = FramedVector::vertical(dvec(j.bundle_curvature[i * n + jj].column(a).into_owned()));
                record(&mut items, "R(X,Y)U=Rhat(X,Y)U", got.max_diff(&want));
            }
            for e in &endos {
                let lin = FramedVector::vertical(dvec(e * &xi));
                let lin_chart = LiftedSpace::frame_to_chart_with(&j, p, &lin);
                let got = to_frame(apply_curvature(&r, &h(i), &h(jj), &lin_chart));
                let want = FramedVector::vertical(dvec(&j.bundle_curvature[i * n + jj] * e * &xi));
                record(&mut items, "R(X,Y)A=Rhat(X,Y)A", got.max_diff(&want));
            }
            for k in 0..n {
                let got = to_frame(apply_curvature(&r, &h(i), &h(jj), &h(k)));
                let base: Vec<f64> = (0..n).map(|l| j.curvature[[l, k, i, jj]]).collect();
                let hres = max_diff(&got.y, &base);
                record(&mut items, "H R(X,Y)Z=Rcheck(X,Y)Z", hres);
                let e =
                    end_at(&nabla_rhat, k, i, jj) * 0.5 - end_at(&nabla_phi, i, jj, k) + end_at(&nabla_phi, jj, i, k);
                let want = dvec(e * &xi);
                record(&mut items, "V R(X,Y)Z", max_diff(&got.v, &want));
            }
        }
    }
    Ok(items)
}

/// Flavor-specific identity for the metric case on `T*B`:
/// `(R(X,U)Y)(Z) = U(Ř(Y,Z)X)` over coordinate inputs.
pub fn metric_identity_residual(space: &LiftedSpace, p: &TotalPoint) -> Result<f64> {
    if space.flavor() != Flavor::Cotangent {
        return Err(Error::WrongFlavor);
    }
    let n = space.n();
    let r = space.curvature(p)?;
    let j = space.point_jet(&p.x)?;
    let f = LiftedSpace::frame_matrix_with(&j, p);
    let col = |k: usize| f.column(k).iter().copied().collect::<Vec<f64>>();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for a in 0..n {
            for jj in 0..n {
                let got = LiftedSpace::chart_to_frame_with(&j, p, &apply_curvature(&r, &col(i), &col(n + a), &col(jj)));
                for z in 0..n {
                    // U = e^a, so U(Ř(∂_j,∂_z)∂_i) = R^a_{i j z}
                    let want = j.curvature[[a, i, jj, z]];
                    worst = worst.max((got.v[z] - want).abs());
                }
                worst = worst.max(max_abs(&got.y));
            }
        }
    }
    Ok(worst)
}

/// Frame evaluation of `DR` against the closed forms of its six items.
///
/// The vertical part of DR(T,X,Y)Z is also reported term by term (`DR term …`
/// entries hold the size of each term, not residuals).
pub fn dr_table(space: &LiftedSpace, p: &TotalPoint) -> Result<Vec<ItemResidual>> {
    let n = space.n();
    let dr = space.nabla_curvature(p)?;
    let j = space.point_jet(&p.x)?;
    let f = LiftedSpace::frame_matrix_with(&j, p);
    let col = |k: usize| f.column(k).iter().copied().collect::<Vec<f64>>();
    let h = |i: usize| col(i);
    let u = |a: usize| col(n + a);
    let all: Vec<Vec<f64>> = (0..2 * n).map(col).collect();
    let to_frame = |z: Vec<f64>| LiftedSpace::chart_to_frame_with(&j, p, &z);
    let xi = DVector::from_column_slice(&p.xi);
    let nabla_psi = space.nabla_end(EndForm::Psi, &p.x)?;
    let nabla_rhat = space.nabla_end(EndForm::BundleCurvature, &p.x)?;
    let nn_psi = space.nabla_end(EndForm::NablaPsi, &p.x)?;
    let nabla_base = space.base().nabla_curvature(&p.x)?;
    let np = |m: usize, i: usize, jj: usize| DMatrix::from_fn(n, n, |a, b| nabla_psi[[m, i, jj, a, b]]);
    let nr = |m: usize, i: usize, jj: usize| DMatrix::from_fn(n, n, |a, b| nabla_rhat[[m, i, jj, a, b]]);
    let nnp = |l: usize, m: usize, i: usize, jj: usize| DMatrix::from_fn(n, n, |a, b| nn_psi[[l, m, i, jj, a, b]]);
    let psi = |i: usize, jj: usize| &j.psi[i * n + jj];
    let rhat = |i: usize, jj: usize| &j.bundle_curvature[i * n + jj];

    let mut items = Vec::new();
    for w in 0..n {
        for a in 0..n {
            for b in 0..n {
                for z in &all {
                    record(
                        &mut items,
                        "DR(W,U,V)=0",
                        max_abs(&apply_nabla_curvature(&dr, &u(w), &u(a), &u(b), z)),
                    );
                }
            }
        }
    }
    for x in 0..n {
        for a in 0..n {
            for b in 0..n {
                for z in &all {
                    record(
                        &mut items,
                        "DR(X,U,V)=0",
                        max_abs(&apply_nabla_curvature(&dr, &h(x), &u(a), &u(b), z)),
                    );
                }
            }
        }
    }
    for w in 0..n {
        for x in 0..n {
            for a in 0..n {
                for z in &all {
                    record(
                        &mut items,
                        "DR(W,X,U)=0",
                        max_abs(&apply_nabla_curvature(&dr, &u(w), &h(x), &u(a), z)),
                    );
                }
            }
        }
    }
    for x in 0..n {
        for y in 0..n {
            for a in 0..n {
                for b in 0..n {
                    record(
                        &mut items,
                        "DR(X,Y,U)V=0",
                        max_abs(&apply_nabla_curvature(&dr, &h(x), &h(y), &u(a), &u(b))),
                    );
                }
                for z in 0..n {
                    let got = to_frame(apply_nabla_curvature(&dr, &h(x), &h(y), &u(a), &h(z)));
                    let want = FramedVector::vertical(dvec(np(x, y, z).column(a).into_owned()));
                    record(&mut items, "DR(X,Y,U)Z", got.max_diff(&want));
                }
            }
        }
    }
    for w in 0..n {
        for x in 0..n {
            for y in 0..n {
                for b in 0..n {
                    record(
                        &mut items,
                        "DR(W,X,Y)V=0",
                        max_abs(&apply_nabla_curvature(&dr, &u(w), &h(x), &h(y), &u(b))),
                    );
                }
                for z in 0..n {
                    let got = to_frame(apply_nabla_curvature(&dr, &u(w), &h(x), &h(y), &h(z)));
                    let e = -np(x, y, z) + np(y, x, z);
                    let want = FramedVector::vertical(dvec(e.column(w).into_owned()));
                    record(&mut items, "DR(W,X,Y)Z", got.max_diff(&want));
                }
            }
        }
    }
    let term_names = [
        "DR term -nnPsi(T,X,Y,Z)",
        "DR term +nnPsi(T,Y,X,Z)",
        "DR term Psi(T,R(X,Y)Z)",
        "DR term Psi(Y,Z)Psi(T,X)",
        "DR term -Psi(X,Z)Psi(T,Y)",
        "DR term -Rhat(X,Y)Psi(T,Z)",
    ];
    for t in 0..n {
        for x in 0..n {
            for y in 0..n {
                for b in 0..n {
                    let got = to_frame(apply_nabla_curvature(&dr, &h(t), &h(x), &h(y), &u(b)));
                    let want = FramedVector::vertical(dvec(nr(t, x, y).column(b).into_owned()));
                    record(&mut items, "DR(T,X,Y)V", got.max_diff(&want));
                }
                for z in 0..n {
                    let got = to_frame(apply_nabla_curvature(&dr, &h(t), &h(x), &h(y), &h(z)));
                    let base: Vec<f64> = (0..n).map(|l| nabla_base[[t, l, z, x, y]]).collect();
                    record(&mut items, "H DR(T,X,Y)Z", max_diff(&got.y, &base));
                    let mut psi_r = DMatrix::zeros(n, n);
                    for s in 0..n {
                        psi_r += psi(t, s) * j.curvature[[s, z, x, y]];
                    }
                    let terms = [
                        -nnp(t, x, y, z),
                        nnp(t, y, x, z),
                        psi_r,
                        psi(y, z) * psi(t, x),
                        -(psi(x, z) * psi(t, y)),
                        -(rhat(x, y) * psi(t, z)),
                    ];
                    let mut e = DMatrix::zeros(n, n);
                    for (name, term) in term_names.iter().zip(&terms) {
                        e += term;
                        record(&mut items, name, (term * &xi).amax());
                    }
                    let want = dvec(e * &xi);
                    record(&mut items, "V DR(T,X,Y)Z", max_diff(&got.v, &want));
                }
            }
        }
    }
    Ok(items)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::preset;

    fn space(name: &str, flavor: Flavor, t: f64) -> LiftedSpace {
        LiftedSpace::from_base(preset(name).unwrap(), flavor, PhiSpec::new(t)).unwrap()
    }

    #[test]
    fn t_aliases() {
        assert_eq!(parse_t("levi-civita").unwrap(), 1.0);
        assert_eq!(parse_t("1/3").unwrap(), 1.0 / 3.0);
        assert_eq!(parse_t("-0.5").unwrap(), -0.5);
        assert!(parse_t("1/0").is_err());
        assert!(parse_t("abc").is_err());
    }

    #[test]
    fn phi_vanishes_without_t() {
        let s = space("poly22", Flavor::Cotangent, 0.0);
        for m in s.phi_eval(&[0.4, 0.1]).unwrap() {
            assert_eq!(m.amax(), 0.0);
        }
    }

    #[test]
    fn tangent_phi_is_t_gamma() {
        let s = space("poly22", Flavor::Tangent, 1.0);
        let x = [1.0, 0.0];
        let phi = s.phi_eval(&x).unwrap();
        let gam = s.base().gamma_endomorphisms(&x).unwrap();
        for (p, g) in phi.iter().zip(&gam) {
            assert!((p - g).amax() < 1e-12);
        }
    }

    #[test]
    fn psi_splits_into_halved_curvature_and_phi() {
        let s = space("poly22", Flavor::Cotangent, 1.0);
        let j = s.point_jet(&[0.7, -0.3]).unwrap();
        let n = 2;
        for i in 0..n {
            for k in 0..n {
                let anti = (&j.psi[i * n + k] - &j.psi[k * n + i]) * 0.5;
                let sym = (&j.psi[i * n + k] + &j.psi[k * n + i]) * 0.5;
                assert!((anti - &j.bundle_curvature[i * n + k] * 0.5).amax() < 1e-9);
                assert!((sym - &j.phi[i * n + k]).amax() < 1e-9);
            }
        }
    }

    #[test]
    fn poly22_psi12_is_half_bundle_curvature() {
        let s = space("poly22", Flavor::Tangent, 0.0);
        let psi = s.psi_eval(&[1.0, 0.0]).unwrap();
        // R̂₁₂ = Ř₁₂ sends ∂₂ to −∂₁
        assert!((psi[1][(0, 1)] + 0.5).abs() < 1e-9);
        assert!(psi[1][(0, 0)].abs() + psi[1][(1, 0)].abs() + psi[1][(1, 1)].abs() < 1e-9);
    }

    #[test]
    fn d_frame_vertical_vertical_is_zero() {
        let s = space("sphere_stereo", Flavor::Cotangent, 1.0);
        let p = TotalPoint::new(vec![0.2, 0.3], vec![0.5, -1.0]);
        let v = FrameField::coordinate_vertical(2, 0);
        let w = FrameField::coordinate_vertical(2, 1);
        assert_eq!(s.d_frame(&v, &w, &p).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn d_frame_basic_pair_on_flat_base() {
        let s = space("flat_2", Flavor::Tangent, 0.0);
        let p = TotalPoint::new(vec![0.2, 0.3], vec![0.5, -1.0]);
        let x = FrameField::coordinate_basic(2, 0);
        let y = FrameField::coordinate_basic(2, 1);
        assert!(s.d_frame(&x, &y, &p).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn d_frame_linear_pair_composes() {
        let s = space("poly22", Flavor::Cotangent, 1.0);
        let p = TotalPoint::new(vec![0.2, 0.3], vec![0.5, -1.0]);
        let e12 = Tensor::from_vec(&[2, 2], vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        let e21 = Tensor::from_vec(&[2, 2], vec![0.0, 0.0, 1.0, 0.0]).unwrap();
        let dom = BoxDomain::unbounded(2);
        let a = FrameField::LinearVertical(SmoothField::constant(dom.clone(), e12));
        let b = FrameField::LinearVertical(SmoothField::constant(dom, e21));
        // E₂₁E₁₂ = E₂₂, so D_A B = (0, ξ₂)
        let got = s.d_frame(&a, &b, &p).unwrap();
        assert_eq!(got, FramedVector::vertical(vec![0.0, -1.0]));
    }

    #[test]
    fn christoffels_are_symmetric() {
        for flavor in [Flavor::Tangent, Flavor::Cotangent] {
            let s = space("halfplane", flavor, 1.0 / 3.0);
            let c = s
                .christoffels(&TotalPoint::new(vec![0.3, 1.2], vec![0.7, -0.4]))
                .unwrap();
            assert!(c.max_diff(&c.permuted(&[0, 2, 1])) < 1e-12);
        }
    }

    #[test]
    fn flat_christoffels_vanish() {
        let s = space("flat_2", Flavor::Cotangent, 0.0);
        let c = s
            .christoffels(&TotalPoint::new(vec![0.3, 1.2], vec![0.7, -0.4]))
            .unwrap();
        assert_eq!(c.max_abs(), 0.0);
    }

    #[test]
    fn zero_section_christoffels_restrict_to_base() {
        let s = space("poly22", Flavor::Tangent, 0.0);
        let p = TotalPoint::zero_section(vec![1.0, 0.0]);
        let c = s.christoffels(&p).unwrap();
        let g = s.base().christoffels(&p.x).unwrap();
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    assert_eq!(c[[k, i, j]], g[[k, i, j]]);
                    assert_eq!(c[[2 + k, i, j]], 0.0);
                }
            }
        }
    }

    #[test]
    fn out_of_chart_is_an_error() {
        let s = space("poly22", Flavor::Tangent, 0.0);
        let p = TotalPoint::zero_section(vec![3.5, 0.0]);
        assert!(matches!(s.christoffels(&p), Err(Error::OutOfDomain { .. })));
        let edge = TotalPoint::zero_section(vec![2.999, 0.0]);
        assert!(matches!(s.curvature(&edge), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn cubic_must_be_symmetric() {
        let dom = BoxDomain::unbounded(2);
        let mut t = Tensor::zeros(&[2, 2, 2, 2]);
        t[[0, 0, 0, 1]] = 1.0;
        let s = SmoothField::constant(dom, t);
        let r = LiftedSpace::from_base(
            preset("poly22").unwrap(),
            Flavor::Cotangent,
            PhiSpec::with_cubic(0.0, s),
        );
        assert!(r.is_err());
    }
}
