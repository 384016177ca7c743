//! Independent reference computations shared by the integration tests. Only
//! base Christoffel values are taken from the library.
#![allow(dead_code)]

use lifted_connections::lifted::random_points;
use lifted_connections::{
    presets, BaseConnection, BoxDomain, Flavor, LiftedSpace, PhiSpec, SmoothField, Tensor, TotalPoint,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const PRESETS: [&str; 5] = ["flat_3", "poly22", "sphere_stereo", "halfplane", "unipotent"];

pub fn space(name: &str, flavor: Flavor, t: f64) -> LiftedSpace {
    LiftedSpace::from_base(presets::preset(name).unwrap(), flavor, PhiSpec::new(t)).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random points well inside the chart, away from the FD margins.
pub fn points(space: &LiftedSpace, count: usize, seed: u64) -> Vec<TotalPoint> {
    let margin = 0.05 + 8.0 * space.fd_step();
    random_points(space, count, &mut rng(seed), margin, 1.0)
}

/// Random points in the middle half of the chart box, for curves that need room.
pub fn inner_points(space: &LiftedSpace, count: usize, seed: u64) -> Vec<TotalPoint> {
    let mut r = rng(seed);
    let n = space.n();
    (0..count)
        .map(|_| {
            let u: Vec<f64> = (0..n).map(|_| r.gen_range(0.25..0.75)).collect();
            let xi = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
            TotalPoint::new(space.base().domain().lerp(&u, 10.0), xi)
        })
        .collect()
}

pub fn center(base: &BaseConnection) -> Vec<f64> {
    base.domain().lerp(&vec![0.5; base.dim()], 1.0)
}

/// `Γ(u, w)` as a vector, from plain component lookup.
pub fn gamma_uw(base: &BaseConnection, x: &[f64], u: &[f64], w: &[f64]) -> Vec<f64> {
    let g = base.christoffels(x).unwrap();
    let n = u.len();
    (0..n)
        .map(|k| {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += g[[k, i, j]] * u[i] * w[j];
                }
            }
            s
        })
        .collect()
}

fn axpy(a: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(p, q)| a * p + q).collect()
}

/// Classical RK4 for an autonomous system.
pub fn rk4(f: impl Fn(&[f64]) -> Vec<f64>, y0: &[f64], h: f64, steps: usize) -> Vec<f64> {
    let mut y = y0.to_vec();
    for _ in 0..steps {
        let k1 = f(&y);
        let k2 = f(&axpy(h / 2.0, &k1, &y));
        let k3 = f(&axpy(h / 2.0, &k2, &y));
        let k4 = f(&axpy(h, &k3, &y));
        for i in 0..y.len() {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    y
}

/// Base parallel transport `ẏ = −Γ(ẋ, y)` along the straight segment `a → b`.
pub fn base_transport(base: &BaseConnection, a: &[f64], b: &[f64], y0: &[f64], steps: usize) -> Vec<f64> {
    let n = a.len();
    let d: Vec<f64> = a.iter().zip(b).map(|(p, q)| q - p).collect();
    // State (s, y); s is the segment parameter.
    let mut state = vec![0.0];
    state.extend_from_slice(y0);
    let out = rk4(
        |st| {
            let x = axpy(st[0], &d, a);
            let mut r = vec![1.0];
            r.extend(gamma_uw(base, &x, &d, &st[1..=n]).into_iter().map(|v| -v));
            r
        },
        &state,
        1.0 / steps as f64,
        steps,
    );
    out[1..].to_vec()
}

/// Base geodesic `ẍ = −Γ(ẋ, ẋ)` integrated independently.
pub fn base_geodesic(base: &BaseConnection, x0: &[f64], v0: &[f64], tspan: f64, steps: usize) -> Vec<f64> {
    let n = x0.len();
    let mut state = x0.to_vec();
    state.extend_from_slice(v0);
    let out = rk4(
        |st| {
            let (x, v) = st.split_at(n);
            let mut r = v.to_vec();
            r.extend(gamma_uw(base, x, v, v).into_iter().map(|g| -g));
            r
        },
        &state,
        tspan / steps as f64,
        steps,
    );
    out[..n].to_vec()
}

/// A polynomial, totally symmetric `Š^l_{ijk}` field with random coefficients.
pub fn random_cubic(n: usize, seed: u64) -> SmoothField {
    let mut r = rng(seed);
    let mut coeff = Tensor::zeros(&[n, n, n, n, n + 1]);
    for l in 0..n {
        for i in 0..n {
            for j in i..n {
                for k in j..n {
                    for m in 0..=n {
                        let c: f64 = r.gen_range(-1.0..1.0);
                        for [a, b, e] in [[i, j, k], [i, k, j], [j, i, k], [j, k, i], [k, i, j], [k, j, i]] {
                            coeff[[l, a, b, e, m]] = c;
                        }
                    }
                }
            }
        }
    }
    SmoothField::new(BoxDomain::unbounded(n), &[n, n, n, n], move |x| {
        let mut s = Tensor::zeros(&[n, n, n, n]);
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut v = coeff[[l, i, j, k, n]];
                        for (m, xm) in x.iter().enumerate() {
                            v += coeff[[l, i, j, k, m]] * xm;
                        }
                        s[[l, i, j, k]] = v;
                    }
                }
            }
        }
        s
    })
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
