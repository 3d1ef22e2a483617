//! Kernel of the Jacobi operator on quotient tori of the leaves.

use homog3::cheeger::Lattice;
use homog3::jacobi::{kernel_basis, JacobiOperator, TorusGrid, KERNEL_TOL};
use homog3::models::Matrix2;

fn main() -> homog3::Result<()> {
    let skew = Lattice::new([1.0, 0.0], [0.5, 0.8])?;
    for (name, a, lattice) in [
        ("diag(1,1), square", Matrix2::IDENTITY, Lattice::UNIT_SQUARE),
        ("[[2,0],[2,0]], square", Matrix2::new(2.0, 0.0, 2.0, 0.0), Lattice::UNIT_SQUARE),
        ("diag(1,1), skew", Matrix2::IDENTITY, skew),
    ] {
        for n in [16, 32, 64] {
            let grid = TorusGrid::new(a, lattice, 0.0, n, n)?;
            let k = kernel_basis(&JacobiOperator::leaf(&grid), KERNEL_TOL)?;
            println!(
                "{name:<22} {n:>3}x{n:<3} kernel dim {}  mean {:.6}  next eigenvalue {:.4}",
                k.dimension(),
                k.means.first().copied().unwrap_or(f64::NAN),
                k.next_eigenvalue.unwrap_or(f64::NAN),
            );
        }
    }
    Ok(())
}
