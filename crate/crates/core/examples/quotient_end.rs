//! Volume of the end of a quotient and the area of its boundary torus.

use homog3::cheeger::{quotient_end_report, Lattice};
use homog3::models::Matrix2;

fn main() -> homog3::Result<()> {
    let a = Matrix2::new(2.0, 0.0, 2.0, 0.0);
    let lattice = Lattice::new([1.0, 1.0], [0.0, 1.0])?;
    println!("{:>4} {:>16} {:>16} {:>10} {:>10}", "T", "V(T)", "area(T)", "residual", "quadrature");
    for t in [0.0, 0.5, 1.0, 2.0, 5.0] {
        let r = quotient_end_report(a, lattice, t)?;
        println!(
            "{t:>4} {:>16.8e} {:>16.8e} {:>10.1e} {:>10.1e}",
            r.end_volume, r.torus_area, r.residual, r.quadrature_residual
        );
    }
    Ok(())
}
