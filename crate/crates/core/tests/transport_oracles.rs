//! Transport and geodesics of `D` compared with base-level integrations.

mod common;

use common::{base_geodesic, base_transport, inner_points, max_abs_diff, points, rng, space};
use lifted_connections::transport::{geodesic, parallel_transport, CurveInM, TransportPath, TransportSettings};
use lifted_connections::{Flavor, FramedVector, TotalPoint};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn horizontal_part_follows_base_transport() {
    for name in ["sphere_stereo", "halfplane", "unipotent"] {
        for flavor in [Flavor::Tangent, Flavor::Cotangent] {
            let s = space(name, flavor, 0.4);
            let pts = points(&s, 2, 21);
            let curve = CurveInM::line(&pts[0], &pts[1]);
            let s0 = FramedVector {
                y: vec![0.6, -0.8],
                v: vec![0.3, 0.2],
            };
            let oracle = base_transport(s.base(), &pts[0].x, &pts[1].x, &s0.y, 2000);
            for path in [TransportPath::Split, TransportPath::Chart] {
                let out = parallel_transport(&s, &curve, &s0, &TransportSettings::default().with_path(path)).unwrap();
                assert!(max_abs_diff(&out.value.y, &oracle) < 1e-8, "{name} {flavor:?} {path:?}");
            }
        }
    }
}

/// Vertical vectors stay vertical and, over a flat base, are transported by
/// the bundle connection alone (constant frame components).
#[test]
fn vertical_vectors_stay_vertical() {
    let s = space("sphere_stereo", Flavor::Cotangent, 1.0);
    let pts = points(&s, 2, 3);
    let curve = CurveInM::line(&pts[0], &pts[1]);
    let out = parallel_transport(
        &s,
        &curve,
        &FramedVector::vertical(vec![1.0, -2.0]),
        &TransportSettings::default(),
    )
    .unwrap();
    assert!(out.value.y.iter().all(|y| y.abs() < 1e-12));

    let flat = space("flat_3", Flavor::Tangent, 1.0);
    let pts = points(&flat, 2, 3);
    let s0 = FramedVector::vertical(vec![1.0, 0.5, -0.2]);
    let out = parallel_transport(
        &flat,
        &CurveInM::line(&pts[0], &pts[1]),
        &s0,
        &TransportSettings::default(),
    )
    .unwrap();
    assert!(out.value.max_diff(&s0) < 1e-12);
}

#[test]
fn geodesics_project_to_base_geodesics() {
    for (name, flavor, t) in [
        ("sphere_stereo", Flavor::Cotangent, 1.0),
        ("halfplane", Flavor::Tangent, -1.0),
        ("unipotent", Flavor::Cotangent, 0.0),
    ] {
        let s = space(name, flavor, t);
        let mut r = rng(8);
        for p in inner_points(&s, 4, 12) {
            let w0 = FramedVector {
                y: (0..2).map(|_| r.gen_range(-0.3..0.3)).collect(),
                v: (0..2).map(|_| r.gen_range(-0.5..0.5)).collect(),
            };
            let tr = geodesic(&s, &p, &w0, 0.5, &TransportSettings::default(), 100).unwrap();
            let (end, _) = tr.last().unwrap();
            let oracle = base_geodesic(s.base(), &p.x, &w0.y, 0.5, 1000);
            assert!(max_abs_diff(&end.x, &oracle) < 1e-9, "{name}");
        }
    }
}

#[test]
fn vertical_geodesics_are_affine() {
    let s = space("halfplane", Flavor::Cotangent, 1.0 / 3.0);
    let p = TotalPoint::new(vec![0.2, 1.4], vec![0.5, -0.1]);
    let w0 = FramedVector::vertical(vec![0.7, 0.3]);
    for path in [TransportPath::Split, TransportPath::Chart] {
        let tr = geodesic(&s, &p, &w0, 1.0, &TransportSettings::default().with_path(path), 100).unwrap();
        for (t, q) in tr.times.iter().zip(&tr.points) {
            assert!(max_abs_diff(&q.x, &p.x) < 1e-12);
            let affine: Vec<f64> = p.xi.iter().zip(&w0.v).map(|(a, b)| a + t * b).collect();
            assert!(max_abs_diff(&q.xi, &affine) < 1e-10);
        }
    }
}

#[test]
fn loop_around_a_flat_base_is_trivial() {
    let s = space("flat_3", Flavor::Cotangent, 1.0);
    let p = TotalPoint::new(vec![0.1, 0.2, 0.3], vec![1.0, 0.0, -1.0]);
    let h = lifted_connections::transport::loop_holonomy(
        &s,
        &CurveInM::rectangle(&p, 0, 2, 0.3),
        &TransportSettings::default(),
    )
    .unwrap();
    assert!((h - nalgebra::DMatrix::identity(6, 6)).amax() < 1e-12);
}

fn framed() -> impl Strategy<Value = FramedVector> {
    (
        prop::collection::vec(-1.0..1.0_f64, 2),
        prop::collection::vec(-1.0..1.0_f64, 2),
    )
        .prop_map(|(y, v)| FramedVector { y, v })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn transport_is_linear(a in framed(), b in framed(), alpha in -2.0..2.0_f64, seed in 0u64..1000) {
        let s = space("sphere_stereo", Flavor::Cotangent, 0.5);
        let pts = points(&s, 2, seed);
        let curve = CurveInM::line(&pts[0], &pts[1]);
        let st = TransportSettings { h_ode: 1e-2, ..TransportSettings::default() };
        let combo = FramedVector::from_stacked(
            &a.stacked().iter().zip(b.stacked()).map(|(x, y)| alpha * x + y).collect::<Vec<_>>(),
        );
        let ta = parallel_transport(&s, &curve, &a, &st).unwrap().value.stacked();
        let tb = parallel_transport(&s, &curve, &b, &st).unwrap().value.stacked();
        let tc = parallel_transport(&s, &curve, &combo, &st).unwrap().value.stacked();
        let expect: Vec<f64> = ta.iter().zip(&tb).map(|(x, y)| alpha * x + y).collect();
        prop_assert!(max_abs_diff(&tc, &expect) < 1e-10);
    }

    #[test]
    fn transport_reverses(a in framed(), seed in 0u64..1000) {
        let s = space("unipotent", Flavor::Tangent, -1.0);
        let pts = points(&s, 3, seed);
        let curve = CurveInM::polyline(&pts).unwrap();
        let st = TransportSettings::default();
        let there = parallel_transport(&s, &curve, &a, &st).unwrap().value;
        let back = parallel_transport(&s, &curve.reversed(), &there, &st).unwrap().value;
        prop_assert!(back.max_diff(&a) < 1e-8);
    }

    #[test]
    fn frame_and_chart_coordinates_round_trip(w in framed(), seed in 0u64..1000) {
        let s = space("halfplane", Flavor::Cotangent, 1.0);
        let p = points(&s, 1, seed).remove(0);
        let z = s.frame_to_chart(&p, &w).unwrap();
        prop_assert!(s.chart_to_frame(&p, &z).unwrap().max_diff(&w) < 1e-12);
        // The horizontal frame part is the base component of the chart vector.
        prop_assert!(max_abs_diff(&z[..2], &w.y) < 1e-15);
    }
}
