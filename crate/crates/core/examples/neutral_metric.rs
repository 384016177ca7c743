//! The neutral metric `g(X, Y) = ξ-pairing` on the cotangent bundle: its
//! signature, and which member of the family preserves it.

use lifted_connections::lifted::t_values;
use lifted_connections::structures::NeutralMetric;
use lifted_connections::{presets, Flavor, LiftedSpace, PhiSpec, TotalPoint};

fn main() -> lifted_connections::Result<()> {
    let points = [
        TotalPoint::new(vec![0.2, 0.9], vec![1.0, -0.3]),
        TotalPoint::new(vec![-0.6, 1.3], vec![0.4, 0.8]),
    ];
    for (label, t) in [
        ("levi-civita", t_values::LEVI_CIVITA),
        ("complete-lift", t_values::COMPLETE_LIFT),
        ("symplectic", t_values::SYMPLECTIC),
    ] {
        let space = LiftedSpace::from_base(presets::preset("halfplane")?, Flavor::Cotangent, PhiSpec::new(t))?;
        let g = NeutralMetric::new(space)?;
        println!(
            "{label:14} signature {:?}  max |Dg| = {:.2e}",
            g.signature(&points[0], 1e-9)?,
            g.compatibility(&points)?
        );
    }
    let tangent = LiftedSpace::from_base(presets::preset("halfplane")?, Flavor::Tangent, PhiSpec::new(1.0))?;
    println!("on the tangent bundle: {}", NeutralMetric::new(tangent).unwrap_err());
    Ok(())
}
