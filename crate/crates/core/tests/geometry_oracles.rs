//! Base and lifted curvature against closed forms that do not go through the
//! library's curvature code.

mod common;

use common::{points, space, PRESETS};
use lifted_connections::base::gamma_from_curvature;
use lifted_connections::lifted::apply_curvature;
use lifted_connections::{presets, Flavor, TotalPoint};

/// `R(∂ᵢ,∂ⱼ)∂ₖ = −K(g_jk ∂ᵢ − g_ik ∂ⱼ)` for a conformally flat metric
/// `g = λ(x)·δ` of constant curvature `K`, in the sign convention used here.
fn constant_curvature_residual(name: &str, k: f64, lambda: impl Fn(&[f64]) -> f64, xs: &[[f64; 2]]) -> f64 {
    let base = presets::preset(name).unwrap();
    let mut worst = 0.0_f64;
    for x in xs {
        let r = base.curvature(x).unwrap();
        let g = lambda(x);
        let delta = |a: usize, b: usize| if a == b { g } else { 0.0 };
        for l in 0..2 {
            for kk in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        let id = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                        let expect = -k * (delta(j, kk) * id(l, i) - delta(i, kk) * id(l, j));
                        worst = worst.max((r[[l, kk, i, j]] - expect).abs());
                    }
                }
            }
        }
    }
    worst
}

#[test]
fn sphere_has_curvature_one() {
    let xs = [[0.0, 0.0], [0.4, -0.7], [1.1, 0.3], [-1.2, -1.0]];
    let res = constant_curvature_residual(
        "sphere_stereo",
        1.0,
        |x| 4.0 / (1.0 + x[0] * x[0] + x[1] * x[1]).powi(2),
        &xs,
    );
    assert!(res < 1e-7, "{res}");
}

#[test]
fn halfplane_has_curvature_minus_one() {
    let xs = [[0.0, 1.0], [0.4, 0.7], [-1.5, 2.3], [2.0, 3.1]];
    let res = constant_curvature_residual("halfplane", -1.0, |x| 1.0 / (x[1] * x[1]), &xs);
    assert!(res < 1e-6, "{res}");
}

/// Recovering `Ř` from its symmetrisation `Γ(X,Y)Z = ½(Ř(X,Z)Y + Ř(Y,Z)X)`.
/// `literal` selects the ordering `⅔(Γ(X,Y)Z − Γ(X,Z)Y)`; otherwise
/// `⅔(Γ(Z,X)Y − Γ(Z,Y)X)` is used.
fn recovery_residual(name: &str, literal: bool) -> f64 {
    let base = presets::preset(name).unwrap();
    let n = base.dim();
    let mut worst = 0.0_f64;
    for x in base.sample_grid(3) {
        let r = base.curvature(&x).unwrap();
        let g = gamma_from_curvature(&r);
        for l in 0..n {
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let rhs = if literal {
                            2.0 / 3.0 * (g[[l, i, j, k]] - g[[l, i, k, j]])
                        } else {
                            2.0 / 3.0 * (g[[l, k, i, j]] - g[[l, k, j, i]])
                        };
                        worst = worst.max((r[[l, k, i, j]] - rhs).abs());
                    }
                }
            }
        }
    }
    worst
}

#[test]
fn curvature_is_recovered_from_its_symmetrisation() {
    for name in PRESETS {
        assert!(recovery_residual(name, false) < 1e-7, "{name}");
    }
}

#[test]
fn literal_recovery_ordering_fails_on_poly22() {
    assert!(recovery_residual("poly22", true) > 0.1);
}

#[test]
fn gamma_tensor_is_symmetric_and_bianchi() {
    use lifted_connections::tensor::cyclic_sum_residual;
    for name in PRESETS {
        let base = presets::preset(name).unwrap();
        for x in base.sample_grid(2) {
            let g = base.gamma_tensor(&x).unwrap();
            let n = base.dim();
            for l in 0..n {
                let mut slice = lifted_connections::Tensor::zeros(&[n, n, n]);
                for i in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            slice[[i, j, k]] = g[[l, i, j, k]];
                            assert!((g[[l, i, j, k]] - g[[l, j, i, k]]).abs() < 1e-8);
                        }
                    }
                }
                assert!(cyclic_sum_residual(&slice) < 1e-7, "{name}");
            }
        }
    }
}

/// On the zero section of a flat base every curvature of `D` vanishes.
#[test]
fn flat_lift_is_flat() {
    for flavor in [Flavor::Tangent, Flavor::Cotangent] {
        for t in [-1.0, 0.0, 1.0 / 3.0, 1.0] {
            let s = space("flat_3", flavor, t);
            for p in points(&s, 3, 4) {
                assert!(s.curvature(&p).unwrap().max_abs() < 1e-9);
            }
        }
    }
}

/// `R(X,U)Y = Ψ̂(X,Y)U` for coordinate directions, written out against
/// `½R̂ + Φ̂` assembled by hand from `Γ` on the tangent bundle.
#[test]
fn mixed_curvature_matches_hand_assembled_psi() {
    let t = 0.7;
    let s = space("sphere_stereo", Flavor::Tangent, t);
    let base = s.base().clone();
    let p = TotalPoint::new(vec![0.3, -0.5], vec![0.8, 0.1]);
    let r_total = s.curvature(&p).unwrap();
    let rb = base.curvature(&p.x).unwrap();
    let g = base.gamma_tensor(&p.x).unwrap();
    let n = 2;
    // Frame vectors at p in chart coordinates: H_i = ∂_i − (A_i ξ)_a ∂_{ξ_a}, U = ∂_{ξ_b}.
    let c = base.christoffels(&p.x).unwrap();
    let horizontal = |i: usize| {
        let mut v = vec![0.0; 2 * n];
        v[i] = 1.0;
        for a in 0..n {
            v[n + a] = -(0..n).map(|b| c[[a, i, b]] * p.xi[b]).sum::<f64>();
        }
        v
    };
    let vertical = |b: usize| {
        let mut v = vec![0.0; 2 * n];
        v[n + b] = 1.0;
        v
    };
    for i in 0..n {
        for j in 0..n {
            for b in 0..n {
                let out = apply_curvature(&r_total, &horizontal(i), &vertical(b), &horizontal(j));
                // R̂ on the tangent bundle is the base curvature; Φ̂ = tΓ.
                for a in 0..n {
                    let psi = 0.5 * rb[[a, b, i, j]] + t * g[[a, i, j, b]];
                    assert!((out[n + a] - psi).abs() < 1e-6, "i={i} j={j} b={b} a={a}");
                }
                assert!(out[..n].iter().all(|v| v.abs() < 1e-7));
            }
        }
    }
}
