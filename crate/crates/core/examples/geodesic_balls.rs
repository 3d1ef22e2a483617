//! Normalized isoperimetric ratio of small geodesic balls.

use homog3::geodesic::{geodesic_ball, BallMesh};
use homog3::models::{Matrix2, Point, SemidirectModel, SL2_SEMIDIRECT_A};

fn main() -> homog3::Result<()> {
    let mesh = BallMesh::new(16, 32, 12);
    println!("{:>16} {:>6} {:>14} {:>14} {:>12}", "A", "r", "volume", "area", "ratio");
    for (name, a) in [
        ("0", Matrix2::ZERO),
        ("diag(1,1)", Matrix2::IDENTITY),
        ("[[2,0],[2,0]]", SL2_SEMIDIRECT_A),
    ] {
        let m = SemidirectModel::new(a)?;
        for r in [0.2, 0.1, 0.05] {
            let b = geodesic_ball(&m, Point::ORIGIN, r, mesh)?;
            println!("{name:>16} {r:>6} {:>14.6e} {:>14.6e} {:>12.8}", b.volume, b.area, b.ratio);
        }
    }
    Ok(())
}
