//! Holonomy: small loops recover the curvature, and the infinitesimal
//! holonomy algebra preserves the vertical distribution.

use lifted_connections::tensor::matrix_log;
use lifted_connections::transport::{
    holonomy_algebra, loop_curvature, loop_holonomy, CurveInM, HolonomySettings, TransportSettings,
};
use lifted_connections::{presets, Flavor, LiftedSpace, PhiSpec, TotalPoint};

fn main() -> lifted_connections::Result<()> {
    let p = TotalPoint::new(vec![0.2, -0.1], vec![0.6, 0.3]);
    let space = LiftedSpace::from_base(presets::preset("sphere_stereo")?, Flavor::Cotangent, PhiSpec::new(1.0))?;
    let settings = TransportSettings {
        h_ode: 1e-3,
        ..TransportSettings::default()
    };
    let r = loop_curvature(&space, &p, 0, 1)?;
    for eps in [0.1, 0.05, 0.025] {
        let h = loop_holonomy(&space, &CurveInM::rectangle(&p, 0, 1, eps), &settings)?;
        let err = (matrix_log(&h)? - &r * (eps * eps)).amax();
        println!("eps = {eps:<6} |log(H) - eps²R| = {err:.2e}");
    }

    for name in ["flat_2", "sphere_stereo", "poly22"] {
        let space = LiftedSpace::from_base(presets::preset(name)?, Flavor::Cotangent, PhiSpec::new(1.0))?;
        let est = holonomy_algebra(&space, &p, &HolonomySettings::for_dim(2))?;
        println!(
            "{name:14} dim {}  vertical preserved {}  horizontal preserved {}",
            est.dimension(),
            est.flags.preserves_vertical,
            est.flags.preserves_horizontal
        );
        if let Some(m) = est.basis.first() {
            println!("  first basis element in (vertical, horizontal) order:{:.3}", m);
        }
    }
    Ok(())
}
