//! The canonical symplectic form on the cotangent bundle, and the cubic
//! freedom left in the compatible members.

use lifted_connections::lifted::t_values;
use lifted_connections::structures::{phi_symplectic_decomposition, CanonicalSymplectic};
use lifted_connections::{presets, BoxDomain, Flavor, LiftedSpace, PhiSpec, SmoothField, Tensor, TotalPoint};

fn main() -> lifted_connections::Result<()> {
    let points = [
        TotalPoint::new(vec![0.5, 0.2], vec![0.3, -1.0]),
        TotalPoint::new(vec![-0.4, -0.8], vec![1.1, 0.6]),
    ];
    let base = presets::preset("sphere_stereo")?;
    for (label, t) in [
        ("symplectic", t_values::SYMPLECTIC),
        ("levi-civita", t_values::LEVI_CIVITA),
    ] {
        let space = LiftedSpace::from_base(base.clone(), Flavor::Cotangent, PhiSpec::new(t))?;
        let omega = CanonicalSymplectic::new(space)?;
        println!(
            "{label:12} dω = {:.1e}  max |Dω| = {:.2e}",
            omega.exterior_derivative(&points[0])?,
            omega.compatibility(&points)?
        );
    }

    // Adding a totally symmetric cubic term keeps ω parallel.
    let cubic = SmoothField::new(BoxDomain::unbounded(2), &[2, 2, 2, 2], |x| {
        let mut s = Tensor::zeros(&[2, 2, 2, 2]);
        for [i, j, k] in [[0, 0, 1], [0, 1, 0], [1, 0, 0]] {
            s[[0, i, j, k]] = 0.5 * x[1];
        }
        s[[1, 1, 1, 1]] = x[0] * x[0];
        s
    });
    let space = LiftedSpace::from_base(
        base,
        Flavor::Cotangent,
        PhiSpec::with_cubic(t_values::SYMPLECTIC, cubic),
    )?;
    let omega = CanonicalSymplectic::new(space.clone())?;
    println!("with cubic term: max |Dω| = {:.2e}", omega.compatibility(&points)?);
    let split = phi_symplectic_decomposition(&space, 3, 1e-9)?;
    println!(
        "recovered as symplectic member + symmetric cubic: {} (asymmetry {:.1e})",
        split.compatible, split.asymmetry
    );
    Ok(())
}
