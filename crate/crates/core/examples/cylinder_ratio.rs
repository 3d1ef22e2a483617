//! Area over volume of the slabs S^2 x [0, R].

use homog3::geodesic::cylinder_ratio;
use homog3::models::ProductS2R;

fn main() -> homog3::Result<()> {
    let p = ProductS2R::new(1.0)?;
    for r in [1.0, 10.0, 1e3, 1e6] {
        println!("R = {r:>9e}  ratio = {:e}", cylinder_ratio(&p, r)?);
    }
    Ok(())
}
