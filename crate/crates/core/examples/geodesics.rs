//! Geodesics of the lifted connection project to geodesics of the base.

use lifted_connections::transport::{geodesic, TransportPath, TransportSettings};
use lifted_connections::{presets, Flavor, FramedVector, LiftedSpace, PhiSpec, TotalPoint};

fn main() -> lifted_connections::Result<()> {
    let p0 = TotalPoint::new(vec![0.2, 0.1], vec![0.5, -0.3]);
    let w0 = FramedVector {
        y: vec![0.4, 0.3],
        v: vec![0.1, 0.2],
    };
    let settings = TransportSettings::default();
    let mut ends = Vec::new();
    for t in [1.0, 0.0, -1.0] {
        let space = LiftedSpace::from_base(presets::preset("sphere_stereo")?, Flavor::Cotangent, PhiSpec::new(t))?;
        let split = geodesic(&space, &p0, &w0, 1.0, &settings, 100)?;
        let chart = geodesic(&space, &p0, &w0, 1.0, &settings.with_path(TransportPath::Chart), 100)?;
        let (pa, _) = split.last().expect("recorded");
        let (pb, _) = chart.last().expect("recorded");
        println!(
            "t = {t:>4}: base end {:.6?}  fiber end {:.6?}  frame/chart gap {:.1e}",
            pa.x,
            pa.xi,
            pa.chart()
                .iter()
                .zip(pb.chart())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        );
        ends.push(pa.x.clone());
    }
    // The base curve is the same for every member of the family.
    let spread = ends
        .iter()
        .flat_map(|e| e.iter().zip(&ends[0]).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max);
    println!("spread of base endpoints across t: {spread:.1e}");
    Ok(())
}
