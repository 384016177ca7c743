//! Curvature of the lifted connection on the sphere, checked against the
//! closed-form table on basic, vertical and linear fields.

use lifted_connections::lifted::{curvature_table, dr_table};
use lifted_connections::{presets, Flavor, LiftedSpace, PhiSpec, TotalPoint};

fn main() -> lifted_connections::Result<()> {
    let p = TotalPoint::new(vec![0.3, -0.4], vec![0.7, 0.2]);
    for flavor in [Flavor::Tangent, Flavor::Cotangent] {
        let space = LiftedSpace::from_base(presets::preset("sphere_stereo")?, flavor, PhiSpec::new(1.0))?;
        println!("{} bundle, t = 1", flavor.name());
        for item in curvature_table(&space, &p)? {
            println!("  {:40} {:.2e}", item.item, item.residual);
        }
        println!("  covariant derivative of R:");
        for item in dr_table(&space, &p)? {
            println!("  {:40} {:.2e}", item.item, item.residual);
        }
    }
    Ok(())
}
