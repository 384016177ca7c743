//! Parallel transport along a curve in the total space, integrated in the
//! adapted frame and in chart coordinates.

use lifted_connections::transport::{parallel_transport, CurveInM, TransportPath, TransportSettings};
use lifted_connections::{presets, Flavor, FramedVector, LiftedSpace, PhiSpec, TotalPoint};

fn main() -> lifted_connections::Result<()> {
    let space = LiftedSpace::from_base(presets::preset("sphere_stereo")?, Flavor::Cotangent, PhiSpec::new(1.0))?;
    let a = TotalPoint::new(vec![-0.5, 0.2], vec![0.3, 0.9]);
    let b = TotalPoint::new(vec![0.6, -0.3], vec![-0.2, 0.4]);
    let c = TotalPoint::new(vec![0.1, 0.8], vec![0.0, 0.0]);
    let curve = CurveInM::polyline(&[a.clone(), b, c])?;
    let s0 = FramedVector {
        y: vec![1.0, 0.0],
        v: vec![0.0, 1.0],
    };

    let mut settings = TransportSettings::default();
    settings.estimate_error = true;
    let split = parallel_transport(&space, &curve, &s0, &settings)?;
    let chart = parallel_transport(&space, &curve, &s0, &settings.with_path(TransportPath::Chart))?;
    println!("frame path  y = {:.6?} v = {:.6?}", split.value.y, split.value.v);
    println!("chart path  y = {:.6?} v = {:.6?}", chart.value.y, chart.value.v);
    println!(
        "difference {:.1e}, step error estimate {:.1e}",
        split.value.max_diff(&chart.value),
        split.error_estimate.unwrap_or(f64::NAN)
    );

    let back = parallel_transport(&space, &curve.reversed(), &split.value, &settings)?;
    println!("round trip error {:.1e}", back.value.max_diff(&s0));
    Ok(())
}
