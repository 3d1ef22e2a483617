//! Newton continuation of a constant mean curvature torus under a periodic
//! conformal perturbation of the hyperbolic metric.

use homog3::cheeger::Lattice;
use homog3::jacobi::{CmcProblem, PeriodicFactor, TorusGrid, MAX_NEWTON_STEPS};
use homog3::models::Matrix2;

fn main() -> homog3::Result<()> {
    let grid = TorusGrid::new(Matrix2::IDENTITY, Lattice::UNIT_SQUARE, 0.0, 32, 32)?;
    let problem = CmcProblem::new(grid, PeriodicFactor::Cos, 0.01, 0.0)?;
    let state = problem.solve(1e-8, MAX_NEWTON_STEPS)?;
    for s in &state.history {
        println!("step {:>2}  residual {:.3e}  c {:.12}", s.step, s.residual, s.c);
    }
    let oracle = problem.oracle_mean_curvature(&state.u)?;
    let worst = oracle.iter().map(|h| (h - state.c).abs()).fold(0.0, f64::max);
    println!("oracle max |H - c| = {worst:.3e}");
    let umax = state.u.iter().fold(0.0f64, |m, u| m.max(u.abs()));
    println!("c = {:.10}, max |u| = {umax:.4e}", state.c);
    Ok(())
}
