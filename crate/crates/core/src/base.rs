//! Base connections, their bundle connections on `TB` / `T*B`, curvature in
//! the negative sign convention, the Γ-tensor and covariant derivatives.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::tensor::{fd_jet, BoxDomain, SmoothField, Tensor};

/// Curvature components `R^l_{kij}` (stored `[l][k][i][j]`) from Christoffel
/// symbols `C^k_{ij}` (`[k][i][j]`) and their jet `∂_m C^k_{ij}` (`[m][k][i][j]`).
///
/// `R^l_{kij} = −∂_i C^l_{jk} + ∂_j C^l_{ik} − C^l_{im} C^m_{jk} + C^l_{jm} C^m_{ik}`,
/// so that `R(∂_i,∂_j)∂_k = ∇_{[∂_i,∂_j]}∂_k − [∇_i, ∇_j]∂_k`.
pub fn curvature_from_christoffels(c: &Tensor, dc: &Tensor) -> Tensor {
    let d = c.shape()[0];
    let mut r = Tensor::zeros(&[d, d, d, d]);
    for l in 0..d {
        for k in 0..d {
            for i in 0..d {
                for j in 0..d {
                    let mut v = -dc[[i, l, j, k]] + dc[[j, l, i, k]];
                    for m in 0..d {
                        v += -c[[l, i, m]] * c[[m, j, k]] + c[[l, j, m]] * c[[m, i, k]];
                    }
                    r[[l, k, i, j]] = v;
                }
            }
        }
    }
    r
}

/// Kind of a tensor slot for [`covariant_derivative`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    /// Contravariant index of the connection's own tangent bundle.
    Up,
    /// Covariant index of the connection's own tangent bundle.
    Down,
    /// Output index of a fiber endomorphism / fiber vector.
    FiberUp,
    /// Input index of a fiber endomorphism.
    FiberDown,
}

/// Covariant derivative of a tensor field from its value and first jet.
///
/// `christoffels` is `[k][i][j]`; `fiber[m]` is the bundle coefficient matrix
/// `A_m` (ignored when no fiber slots are present). The derivative slot is
/// prepended to the result.
pub fn covariant_derivative(
    value: &Tensor,
    jet: &Tensor,
    christoffels: &Tensor,
    fiber: &[DMatrix<f64>],
    slots: &[Slot],
) -> Tensor {
    assert_eq!(value.rank(), slots.len());
    let d = christoffels.shape()[0];
    let mut out = jet.clone();
    let block = value.len();
    let mut idx = vec![0; value.rank()];
    let mut src = vec![0; value.rank()];
    for m in 0..d {
        for off in 0..block {
            value.unravel(off, &mut idx);
            let mut corr = 0.0;
            for (s, kind) in slots.iter().enumerate() {
                let a = idx[s];
                src.copy_from_slice(&idx);
                let dim = value.shape()[s];
                for r in 0..dim {
                    src[s] = r;
                    let coef = match kind {
                        Slot::Up => christoffels[[a, m, r]],
                        Slot::Down => -christoffels[[r, m, a]],
                        Slot::FiberUp => fiber[m][(a, r)],
                        Slot::FiberDown => -fiber[m][(r, a)],
                    };
                    if coef != 0.0 {
                        corr += coef * value.get(&src);
                    }
                }
            }
            out.data_mut()[m * block + off] += corr;
        }
    }
    out
}

/// A torsion-free affine connection on a chart box of ℝⁿ.
#[derive(Clone, Debug)]
pub struct BaseConnection {
    name: String,
    n: usize,
    christoffels: SmoothField,
}

impl BaseConnection {
    /// Wraps a Christoffel field `x ↦ Γ^k_{ij}(x)` (shape `[n,n,n]`, `[k][i][j]`),
    /// checking torsion-freeness on a `5ⁿ` grid.
    pub fn new(name: impl Into<String>, christoffels: SmoothField) -> Result<Self> {
        let n = christoffels.domain_dim();
        if christoffels.output_shape() != [n, n, n] {
            return Err(Error::Invalid(format!(
                "Christoffel field must have shape [{n},{n},{n}], got {:?}",
                christoffels.output_shape()
            )));
        }
        let conn = BaseConnection {
            name: name.into(),
            n,
            christoffels,
        };
        let torsion = conn.torsion_residual(5)?;
        if torsion > 1e-12 {
            return Err(Error::Invalid(format!(
                "connection has torsion (max |Γᵏᵢⱼ − Γᵏⱼᵢ| = {torsion:e})"
            )));
        }
        Ok(conn)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn domain(&self) -> &BoxDomain {
        self.christoffels.domain()
    }

    pub fn christoffel_field(&self) -> &SmoothField {
        &self.christoffels
    }

    pub fn fd_step(&self) -> f64 {
        self.christoffels.step()
    }

    pub fn christoffels(&self, x: &[f64]) -> Result<Tensor> {
        self.christoffels.eval(x)
    }

    pub fn christoffel_jet(&self, x: &[f64]) -> Result<Tensor> {
        fd_jet(&self.christoffels, x, 1)
    }

    /// Sample points of a `k`-per-axis grid strictly inside the chart box.
    pub fn sample_grid(&self, k: usize) -> Vec<Vec<f64>> {
        let dom = self.domain().shrink(4.0 * self.fd_step());
        let n = self.n;
        let total = k.pow(n as u32);
        (0..total)
            .map(|mut code| {
                let u: Vec<f64> = (0..n)
                    .map(|_| {
                        let c = code % k;
                        code /= k;
                        (c as f64 + 0.5) / k as f64
                    })
                    .collect();
                dom.lerp(&u, 50.0)
            })
            .collect()
    }

    /// Max `|Γ^k_{ij} − Γ^k_{ji}|` over a `k`-per-axis grid.
    pub fn torsion_residual(&self, k: usize) -> Result<f64> {
        let mut worst = 0.0_f64;
        for x in self.sample_grid(k) {
            let g = self.christoffels(&x)?;
            let mut idx = [0usize; 3];
            for off in 0..g.len() {
                g.unravel(off, &mut idx);
                let [a, i, j] = idx;
                if i < j {
                    worst = worst.max((g[[a, i, j]] - g[[a, j, i]]).abs());
                }
            }
        }
        Ok(worst)
    }

    /// `Ř` as `[l][k][i][j]`: component `l` of `Ř(∂_i,∂_j)∂_k`.
    pub fn curvature(&self, x: &[f64]) -> Result<Tensor> {
        let c = self.christoffels(x)?;
        let dc = self.christoffel_jet(x)?;
        Ok(curvature_from_christoffels(&c, &dc))
    }

    /// Curvature as a field on the shrunk box (so that its own jet is safe).
    pub fn curvature_field(&self) -> SmoothField {
        let me = Arc::new(self.clone());
        let n = self.n;
        let dom = self.domain().shrink(self.christoffels.fd_margin(1));
        SmoothField::new(dom, &[n, n, n, n], move |x| {
            me.curvature(x)
                .unwrap_or_else(|_| Tensor::zeros(&[n, n, n, n]).map(|_| f64::NAN))
        })
        .with_step(self.fd_step())
        .expect("positive step")
    }

    /// `Γ(∂_i,∂_j)∂_k` as `[l][i][j][k]`, with
    /// `Γ(X,Y)Z = ½(Ř(X,Z)Y + Ř(Y,Z)X)`.
    pub fn gamma_tensor(&self, x: &[f64]) -> Result<Tensor> {
        Ok(gamma_from_curvature(&self.curvature(x)?))
    }

    /// Endomorphisms `Γ_{ij} : Z ↦ Γ(∂_i,∂_j)Z`, row-major in `(i, j)`.
    pub fn gamma_endomorphisms(&self, x: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        Ok(gamma_endomorphisms(&self.gamma_tensor(x)?))
    }

    /// `Γ*_{ij} = −(Γ_{ij})ᵀ`, so that `(Γ*(X,Y)V)(Z) = −V(Γ(X,Y)Z)`.
    pub fn gamma_dual(&self, x: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        Ok(self
            .gamma_endomorphisms(x)?
            .into_iter()
            .map(|g| -g.transpose())
            .collect())
    }

    /// `∇̌Ř` as `[m][l][k][i][j]`.
    pub fn nabla_curvature(&self, x: &[f64]) -> Result<Tensor> {
        let field = self.curvature_field();
        let jet = fd_jet(&field, x, 1)?;
        let value = field.eval(x)?;
        let c = self.christoffels(x)?;
        Ok(covariant_derivative(
            &value,
            &jet,
            &c,
            &[],
            &[Slot::Up, Slot::Down, Slot::Down, Slot::Down],
        ))
    }
}

pub fn gamma_from_curvature(r: &Tensor) -> Tensor {
    let n = r.shape()[0];
    let mut g = Tensor::zeros(&[n, n, n, n]);
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    // Ř(∂_i,∂_k)∂_j + Ř(∂_j,∂_k)∂_i
                    g[[l, i, j, k]] = 0.5 * (r[[l, j, i, k]] + r[[l, i, j, k]]);
                }
            }
        }
    }
    g
}

pub fn gamma_endomorphisms(g: &Tensor) -> Vec<DMatrix<f64>> {
    let n = g.shape()[0];
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push(DMatrix::from_fn(n, n, |l, k| g[[l, i, j, k]]));
        }
    }
    out
}

/// `(Ř_{ij})_{lk} = R^l_{kij}`, the curvature endomorphisms, row-major in `(i, j)`.
pub fn curvature_endomorphisms(r: &Tensor) -> Vec<DMatrix<f64>> {
    let n = r.shape()[0];
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push(DMatrix::from_fn(n, n, |l, k| r[[l, k, i, j]]));
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Tangent,
    Cotangent,
}

impl Flavor {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "tangent" | "TB" => Ok(Flavor::Tangent),
            "cotangent" | "cotangent-dual" | "T*B" => Ok(Flavor::Cotangent),
            other => Err(Error::Invalid(format!("unknown bundle flavor '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Flavor::Tangent => "tangent",
            Flavor::Cotangent => "cotangent",
        }
    }
}

/// Coefficient matrices `A_i` of `∇̂` from Christoffels `Γ` (`[k][i][j]`):
/// `(∇̂_i s)^a = ∂_i s^a + (A_i s)^a`.
pub fn bundle_coefficients(flavor: Flavor, gamma: &Tensor) -> Vec<DMatrix<f64>> {
    let n = gamma.shape()[0];
    (0..n)
        .map(|i| match flavor {
            Flavor::Tangent => DMatrix::from_fn(n, n, |a, b| gamma[[a, i, b]]),
            Flavor::Cotangent => DMatrix::from_fn(n, n, |a, b| -gamma[[b, i, a]]),
        })
        .collect()
}

/// The induced connection on `M = TB` or `M = T*B`.
#[derive(Clone, Debug)]
pub struct BundleConnection {
    base: BaseConnection,
    flavor: Flavor,
    coeffs: SmoothField,
}

impl BundleConnection {
    pub fn new(base: BaseConnection, flavor: Flavor) -> Self {
        let n = base.dim();
        let gamma = base.christoffel_field().clone();
        let coeffs = SmoothField::new(base.domain().clone(), &[n, n, n], move |x| {
            let g = match gamma.eval(x) {
                Ok(g) => g,
                Err(_) => return Tensor::zeros(&[n, n, n]).map(|_| f64::NAN),
            };
            let mut t = Tensor::zeros(&[n, n, n]);
            for (i, a) in bundle_coefficients(flavor, &g).iter().enumerate() {
                for r in 0..n {
                    for c in 0..n {
                        t[[i, r, c]] = a[(r, c)];
                    }
                }
            }
            t
        })
        .with_step(base.fd_step())
        .expect("positive step");
        BundleConnection { base, flavor, coeffs }
    }

    pub fn base(&self) -> &BaseConnection {
        &self.base
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// Coefficient field, shape `[n,n,n]` as `[i][a][b] = (A_i)_{ab}`.
    pub fn coefficient_field(&self) -> &SmoothField {
        &self.coeffs
    }

    pub fn coefficients(&self, x: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        Ok(split_matrices(&self.coeffs.eval(x)?))
    }

    /// `R̂_{ij} = −(∂_i A_j − ∂_j A_i + [A_i, A_j])`, row-major in `(i, j)`.
    pub fn curvature(&self, x: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        let a = self.coefficients(x)?;
        let da = fd_jet(&self.coeffs, x, 1)?;
        Ok(bundle_curvature_from(&a, &jet_matrices(&da)))
    }
}

/// `[i][a][b]` → `A_i`.
pub fn split_matrices(t: &Tensor) -> Vec<DMatrix<f64>> {
    let s = t.shape();
    let (k, r, c) = (s[0], s[1], s[2]);
    (0..k).map(|i| DMatrix::from_fn(r, c, |a, b| t[[i, a, b]])).collect()
}

/// `[m][i][a][b]` → `out[m][i] = ∂_m A_i`.
pub fn jet_matrices(t: &Tensor) -> Vec<Vec<DMatrix<f64>>> {
    let s = t.shape();
    let (d, k, r, c) = (s[0], s[1], s[2], s[3]);
    (0..d)
        .map(|m| (0..k).map(|i| DMatrix::from_fn(r, c, |a, b| t[[m, i, a, b]])).collect())
        .collect()
}

pub fn bundle_curvature_from(a: &[DMatrix<f64>], da: &[Vec<DMatrix<f64>>]) -> Vec<DMatrix<f64>> {
    let n = a.len();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let m = &da[i][j] - &da[j][i] + &a[i] * &a[j] - &a[j] * &a[i];
            out.push(-m);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn poly22_curvature_by_hand() {
        // ∇₁∇₂∂₂ = ∂₁, ∇₂∇₁∂₂ = 0, so Ř(∂₁,∂₂)∂₂ = −∂₁.
        let b = presets::preset("poly22").unwrap();
        let r = b.curvature(&[0.3, -0.2]).unwrap();
        assert!((r[[0, 1, 0, 1]] + 1.0).abs() < 1e-9);
        assert!((r[[0, 1, 1, 0]] - 1.0).abs() < 1e-9);
        let mut rest = r.clone();
        rest[[0, 1, 0, 1]] = 0.0;
        rest[[0, 1, 1, 0]] = 0.0;
        assert!(rest.max_abs() < 1e-9);
    }

    #[test]
    fn flat_is_flat() {
        let b = presets::preset("flat_3").unwrap();
        let x = [0.1, 0.2, 0.3];
        assert_eq!(b.curvature(&x).unwrap().max_abs(), 0.0);
        assert_eq!(b.gamma_tensor(&x).unwrap().max_abs(), 0.0);
        assert_eq!(b.nabla_curvature(&x).unwrap().max_abs(), 0.0);
        for g in b.gamma_dual(&x).unwrap() {
            assert_eq!(g.amax(), 0.0);
        }
        let bc = BundleConnection::new(b, Flavor::Cotangent);
        for r in bc.curvature(&x).unwrap() {
            assert_eq!(r.amax(), 0.0);
        }
    }

    #[test]
    fn poly22_gamma_at_1_0() {
        let b = presets::preset("poly22").unwrap();
        let g = b.gamma_tensor(&[1.0, 0.0]).unwrap();
        // Γ(∂₂,∂₂)∂₁ = −Ř(∂₁,∂₂)∂₂ = ∂₁
        assert!((g[[0, 1, 1, 0]] - 1.0).abs() < 1e-9);
        assert!((g[[0, 0, 1, 1]] + 0.5).abs() < 1e-9);
        let dual = b.gamma_dual(&[1.0, 0.0]).unwrap();
        let g22 = &b.gamma_endomorphisms(&[1.0, 0.0]).unwrap()[3];
        assert!((&dual[3] + g22.transpose()).amax() < 1e-15);
        assert!((dual[3][(0, 0)] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn poly22_is_locally_symmetric_but_unipotent_is_not() {
        // Ř is constant and every correction term pairs Γ¹₂₂ with a vanishing component
        let b = presets::preset("poly22").unwrap();
        assert!(b.nabla_curvature(&[1.0, 0.5]).unwrap().max_abs() < 1e-8);
        let u = presets::preset("unipotent").unwrap();
        assert!(u.nabla_curvature(&[1.0, 0.5]).unwrap().max_abs() > 0.5);
    }

    #[test]
    fn torsion_is_rejected() {
        let dom = BoxDomain::cube(2, -1.0, 1.0);
        let f = SmoothField::new(dom, &[2, 2, 2], |_| {
            let mut t = Tensor::zeros(&[2, 2, 2]);
            t[[0, 0, 1]] = 1.0;
            t
        });
        assert!(BaseConnection::new("bad", f).is_err());
    }

    #[test]
    fn tangent_coefficients_are_christoffels() {
        let b = presets::preset("sphere_stereo").unwrap();
        let x = [0.2, -0.4];
        let g = b.christoffels(&x).unwrap();
        let tb = BundleConnection::new(b.clone(), Flavor::Tangent);
        let ct = BundleConnection::new(b, Flavor::Cotangent);
        let a = tb.coefficients(&x).unwrap();
        let a_dual = ct.coefficients(&x).unwrap();
        for i in 0..2 {
            for r in 0..2 {
                for c in 0..2 {
                    assert_eq!(a[i][(r, c)], g[[r, i, c]]);
                }
            }
            assert_eq!(a_dual[i], -a[i].transpose());
        }
    }
}
