//! Named base connections.

use crate::base::BaseConnection;
use crate::error::{Error, Result};
use crate::tensor::{BoxDomain, SmoothField, Tensor};

/// `(name, description)` for every preset; `flat_n` stands for any `n ≥ 1`.
pub const CATALOG: &[(&str, &str)] = &[
    ("flat_n", "Γ ≡ 0 on ℝⁿ (write flat_2, flat_3, ...)"),
    (
        "poly22",
        "n = 2, Γ¹₂₂ = x₁; constant nilpotent curvature, locally symmetric",
    ),
    (
        "sphere_stereo",
        "round sphere in stereographic coordinates (Levi-Civita)",
    ),
    ("halfplane", "hyperbolic upper half-plane (Levi-Civita), x₂ > 0"),
    (
        "unipotent",
        "n = 2, Γ¹₂₂ = x₁ + x₁x₂; nilpotent, non-constant curvature",
    ),
];

pub fn names() -> Vec<String> {
    CATALOG.iter().map(|(n, _)| n.to_string()).collect()
}

pub fn preset(name: &str) -> Result<BaseConnection> {
    match name {
        "poly22" => only_gamma122(name, |x| x[0]),
        "unipotent" => only_gamma122(name, |x| x[0] + x[0] * x[1]),
        "sphere_stereo" => sphere_stereo(),
        "halfplane" => halfplane(),
        _ => match name.strip_prefix("flat_").map(str::parse::<usize>) {
            Some(Ok(n)) if n >= 1 => flat(n),
            _ => Err(Error::Invalid(format!("unknown preset '{name}'"))),
        },
    }
}

pub fn flat(n: usize) -> Result<BaseConnection> {
    let field = SmoothField::constant(BoxDomain::cube(n, -5.0, 5.0), Tensor::zeros(&[n, n, n]));
    BaseConnection::new(format!("flat_{n}"), field)
}

fn only_gamma122(name: &str, f: fn(&[f64]) -> f64) -> Result<BaseConnection> {
    let field = SmoothField::new(BoxDomain::cube(2, -3.0, 3.0), &[2, 2, 2], move |x| {
        let mut t = Tensor::zeros(&[2, 2, 2]);
        t[[0, 1, 1]] = f(x);
        t
    });
    BaseConnection::new(name, field)
}

fn sphere_stereo() -> Result<BaseConnection> {
    // Γᵏᵢⱼ = −2(δᵏᵢxⱼ + δᵏⱼxᵢ − δᵢⱼxₖ)/(1 + |x|²)
    let field = SmoothField::new(BoxDomain::cube(2, -2.0, 2.0), &[2, 2, 2], |x| {
        let s = 1.0 + x[0] * x[0] + x[1] * x[1];
        let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        let mut t = Tensor::zeros(&[2, 2, 2]);
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    t[[k, i, j]] = -2.0 * (delta(k, i) * x[j] + delta(k, j) * x[i] - delta(i, j) * x[k]) / s;
                }
            }
        }
        t
    });
    BaseConnection::new("sphere_stereo", field)
}

fn halfplane() -> Result<BaseConnection> {
    // metric (dx₁² + dx₂²)/x₂²
    let dom = BoxDomain::new(vec![-3.0, 0.25], vec![3.0, 4.0])?;
    let field = SmoothField::new(dom, &[2, 2, 2], |x| {
        let y = x[1];
        let mut t = Tensor::zeros(&[2, 2, 2]);
        t[[0, 0, 1]] = -1.0 / y;
        t[[0, 1, 0]] = -1.0 / y;
        t[[1, 0, 0]] = 1.0 / y;
        t[[1, 1, 1]] = -1.0 / y;
        t
    });
    BaseConnection::new("halfplane", field)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_resolves() {
        for name in ["flat_1", "flat_4", "poly22", "sphere_stereo", "halfplane", "unipotent"] {
            assert!(preset(name).is_ok(), "{name}");
        }
        assert!(preset("flat_0").is_err());
        assert!(preset("torus").is_err());
    }

    #[test]
    fn every_preset_is_torsion_free_on_grid() {
        for name in ["flat_3", "poly22", "sphere_stereo", "halfplane", "unipotent"] {
            assert!(preset(name).unwrap().torsion_residual(5).unwrap() < 1e-12);
        }
    }
}
