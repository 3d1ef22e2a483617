//! Leaf shape and the divergence theorem on coordinate boxes.

use homog3::invariant::leaf_shape;
use homog3::models::{Matrix2, SemidirectModel};
use homog3::surface::{divergence_balance, surface_geometry, Cuboid, ImmersionGrid, VectorField};

fn main() -> homog3::Result<()> {
    let a = Matrix2::new(1.0, 0.5, -0.25, 0.75);
    let m = SemidirectModel::new(a)?;

    let shape = leaf_shape(&a);
    let mesh = surface_geometry(&m, &ImmersionGrid::horizontal_leaf(0.4, 24))?;
    println!(
        "leaf H = {}, |sigma|^2 = {}, max node error of H {:.1e}",
        shape.mean_curvature,
        shape.norm_squared,
        mesh.max_mean_curvature_error(shape.mean_curvature)
    );

    let b = Cuboid::new([-0.5, 0.0, -0.3], [0.7, 1.1, 0.9])?;
    for (name, field) in [
        ("foliation normal", VectorField::FoliationNormal),
        ("Killing (1,0; 0)", VectorField::Killing { w: [1.0, 0.0], s: 0.0 }),
        ("Killing (0,1; 1)", VectorField::Killing { w: [0.0, 1.0], s: 1.0 }),
    ] {
        let r = divergence_balance(&m, &b, &field, 8)?;
        println!(
            "{name:<18} volume side {:>+.10}  flux {:>+.10}  discrepancy {:.1e}",
            r.volume_integral, r.boundary_flux, r.discrepancy
        );
        if field == VectorField::FoliationNormal {
            println!("{:<18} -tr(A) Vol   {:>+.10}", "", -a.trace() * r.volume);
        }
    }
    Ok(())
}
