//! Tensor kernel checked against brute-force references.

use lifted_connections::tensor::{bracket, decompose3, fd_jet, lie_closure, span_residual};
use lifted_connections::{BoxDomain, SmoothField, Tensor};
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Matrix of the linear map `T ↦ op(T)` on 3-tensors of side `n`.
fn operator(n: usize, op: impl Fn(&Tensor) -> Tensor) -> DMatrix<f64> {
    let d = n * n * n;
    let mut m = DMatrix::zeros(d, d);
    for c in 0..d {
        let mut e = vec![0.0; d];
        e[c] = 1.0;
        let out = op(&Tensor::from_vec(&[n, n, n], e).unwrap());
        for r in 0..d {
            m[(r, c)] = out.data()[r];
        }
    }
    m
}

fn permute(t: &Tensor, f: impl Fn(usize, usize, usize) -> (usize, usize, usize), sign: f64) -> Tensor {
    let n = t.shape()[0];
    let mut out = Tensor::zeros(&[n, n, n]);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let (a, b, c) = f(i, j, k);
                out[[i, j, k]] = sign * t[[a, b, c]];
            }
        }
    }
    out
}

fn average(t: &Tensor, signed: bool) -> Tensor {
    let s = |odd: bool| if signed && odd { -1.0 } else { 1.0 };
    let parts = [
        permute(t, |i, j, k| (i, j, k), s(false)),
        permute(t, |i, j, k| (j, k, i), s(false)),
        permute(t, |i, j, k| (k, i, j), s(false)),
        permute(t, |i, j, k| (j, i, k), s(true)),
        permute(t, |i, j, k| (i, k, j), s(true)),
        permute(t, |i, j, k| (k, j, i), s(true)),
    ];
    parts
        .iter()
        .skip(1)
        .fold(parts[0].clone(), |acc, p| acc.add(p))
        .scale(1.0 / 6.0)
}

fn cyclic(t: &Tensor) -> Tensor {
    permute(t, |i, j, k| (i, j, k), 1.0)
        .add(&permute(t, |i, j, k| (j, k, i), 1.0))
        .add(&permute(t, |i, j, k| (k, i, j), 1.0))
}

/// Columns spanning the range (`range = true`) or kernel of `m`.
fn subspace(m: &DMatrix<f64>, range: bool) -> Vec<nalgebra::DVector<f64>> {
    let svd = m.clone().svd(true, true);
    let u = svd.u.unwrap();
    let v_t = svd.v_t.unwrap();
    let mut out = Vec::new();
    for (idx, s) in svd.singular_values.iter().enumerate() {
        if range && *s > 1e-8 {
            out.push(u.column(idx).into_owned());
        }
        if !range && *s < 1e-8 {
            out.push(v_t.row(idx).transpose());
        }
    }
    out
}

/// The decomposition obtained by solving `T = a + s + b` in explicit bases of
/// the three subspaces.
fn brute_force_decomposition(t: &Tensor) -> (Tensor, Tensor, Tensor) {
    let n = t.shape()[0];
    let anti = subspace(&operator(n, |x| average(x, true)), true);
    let sym = subspace(&operator(n, |x| average(x, false)), true);
    let bianchi = subspace(&operator(n, cyclic), false);
    let d = n * n * n;
    assert_eq!(
        anti.len() + sym.len() + bianchi.len(),
        d,
        "subspaces must be complementary"
    );
    let cols: Vec<_> = anti.iter().chain(&sym).chain(&bianchi).cloned().collect();
    let basis = DMatrix::from_columns(&cols);
    let coeff = basis
        .clone()
        .lu()
        .solve(&nalgebra::DVector::from_column_slice(t.data()))
        .unwrap();
    let part = |range: std::ops::Range<usize>| {
        let mut v = nalgebra::DVector::zeros(d);
        for c in range {
            v += basis.column(c) * coeff[c];
        }
        Tensor::from_vec(&[n, n, n], v.iter().copied().collect()).unwrap()
    };
    let (na, ns) = (anti.len(), sym.len());
    (part(0..na), part(na..na + ns), part(na + ns..d))
}

fn tensor3(n: usize) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(-3.0..3.0_f64, n * n * n).prop_map(move |v| Tensor::from_vec(&[n, n, n], v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn decompose3_matches_brute_force(t in (2usize..=3).prop_flat_map(tensor3)) {
        let (a, s, b) = decompose3(&t).unwrap();
        let (a0, s0, b0) = brute_force_decomposition(&t);
        prop_assert!(a.max_diff(&a0) < 1e-10);
        prop_assert!(s.max_diff(&s0) < 1e-10);
        prop_assert!(b.max_diff(&b0) < 1e-10);
        prop_assert!(a.add(&s).add(&b).max_diff(&t) < 1e-12);
    }

    #[test]
    fn fd_jet_is_exact_on_quadratics(
        c in prop::collection::vec(-2.0..2.0_f64, 10),
        x in prop::collection::vec(-1.0..1.0_f64, 3),
    ) {
        // f = c0 + Σ c_{1+i} x_i + quadratic terms with symmetric coefficients
        let q = [[c[4], c[5], c[6]], [c[5], c[7], c[8]], [c[6], c[8], c[9]]];
        let lin = [c[1], c[2], c[3]];
        let c0 = c[0];
        let f = SmoothField::new(BoxDomain::cube(3, -5.0, 5.0), &[1], move |x| {
            let mut v = c0;
            for i in 0..3 {
                v += lin[i] * x[i];
                for j in 0..3 {
                    v += 0.5 * q[i][j] * x[i] * x[j];
                }
            }
            Tensor::from_vec(&[1], vec![v]).unwrap()
        });
        let d1 = fd_jet(&f, &x, 1).unwrap();
        let d2 = fd_jet(&f, &x, 2).unwrap();
        for i in 0..3 {
            let grad = lin[i] + (0..3).map(|j| q[i][j] * x[j]).sum::<f64>();
            prop_assert!((d1[[i, 0]] - grad).abs() < 1e-7);
            for j in 0..3 {
                prop_assert!((d2[[i, j, 0]] - q[i][j]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn lie_closure_is_closed_and_idempotent(
        entries in prop::collection::vec(prop::collection::vec(-1.0..1.0_f64, 6), 1..3),
    ) {
        // Upper-triangular 3×3 generators: the closure stays inside that algebra.
        let gens: Vec<DMatrix<f64>> = entries
            .iter()
            .map(|e| DMatrix::from_row_slice(3, 3, &[e[0], e[1], e[2], 0.0, e[3], e[4], 0.0, 0.0, e[5]]))
            .collect();
        let basis = lie_closure(&gens, 1e-9).unwrap();
        prop_assert!(basis.len() <= 6);
        for a in &basis {
            for b in &basis {
                prop_assert!(span_residual(&basis, &bracket(a, b), 1e-9) < 1e-8);
            }
        }
        for g in &gens {
            prop_assert!(span_residual(&basis, g, 1e-9) < 1e-8);
        }
        let again = lie_closure(&basis, 1e-9).unwrap();
        prop_assert_eq!(again.len(), basis.len());
        for m in &again {
            prop_assert!(span_residual(&basis, m, 1e-9) < 1e-8);
        }
    }
}

#[test]
fn closure_of_two_rotations_is_so3() {
    let rx = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0]);
    let ry = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0]);
    let basis = lie_closure(&[rx, ry], 1e-10).unwrap();
    assert_eq!(basis.len(), 3);
    assert!(basis.iter().all(|m| (m + m.transpose()).amax() < 1e-12));
}
