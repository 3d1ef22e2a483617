//! Isoperimetric ratios of the boxes B(n, t0) against tr(A).

use homog3::cheeger::{box_ratio_sweep, Lattice};
use homog3::models::Matrix2;

fn main() -> homog3::Result<()> {
    let ns = [4, 8, 16, 32, 64, 256, 1024];
    let t0s = [1.0, 2.0, 4.0, 8.0];
    for (name, a) in [
        ("diag(1,1)", Matrix2::IDENTITY),
        ("[[2,0],[2,0]]", Matrix2::new(2.0, 0.0, 2.0, 0.0)),
        ("diag(2,1)", Matrix2::diag(2.0, 1.0)),
    ] {
        println!("A = {name}, tr A = {}", a.trace());
        print!("{:>6}", "n");
        for t0 in t0s {
            print!(" {:>10}", format!("t0={t0}"));
        }
        println!();
        let rows = box_ratio_sweep(a, Lattice::UNIT_SQUARE, &ns, &t0s)?;
        for chunk in rows.chunks(t0s.len()) {
            print!("{:>6}", chunk[0].n);
            for r in chunk {
                print!(" {:>10.5}", r.ratio);
            }
            println!();
        }
        println!();
    }
    Ok(())
}
