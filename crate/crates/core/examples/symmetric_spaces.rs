//! Whether a locally symmetric base gives a locally symmetric total space.

use lifted_connections::transport::symmetric_space_report;
use lifted_connections::{presets, Flavor, LiftedSpace, PhiSpec, TotalPoint};

fn main() -> lifted_connections::Result<()> {
    let points = [
        TotalPoint::new(vec![0.3, 0.6], vec![0.5, -0.2]),
        TotalPoint::new(vec![-0.7, 0.9], vec![-1.0, 0.4]),
    ];
    println!(
        "{:14} {:10} {:>6}  {:>10}  {:>10}",
        "base", "bundle", "t", "|∇R base|", "|DR|"
    );
    for name in ["sphere_stereo", "halfplane", "poly22", "unipotent"] {
        for flavor in [Flavor::Tangent, Flavor::Cotangent] {
            for t in [1.0, 0.0] {
                let space = LiftedSpace::from_base(presets::preset(name)?, flavor, PhiSpec::new(t))?;
                let r = symmetric_space_report(&space, &points)?;
                println!(
                    "{name:14} {:10} {t:>6}  {:>10.2e}  {:>10.2e}",
                    flavor.name(),
                    r.max_nabla_base_curvature,
                    r.max_nabla_curvature
                );
            }
        }
    }
    Ok(())
}
