//! Ricci spectra of a few metric Lie groups.

use homog3::invariant::{cheeger_report, model_curvature};
use homog3::models::{Matrix2, MetricModel, SemidirectModel, Sl2FrameMetric};

fn semidirect(a: Matrix2) -> homog3::Result<MetricModel> {
    Ok(MetricModel::Semidirect(SemidirectModel::new(a)?))
}

fn main() -> homog3::Result<()> {
    let models = [
        ("R^3", semidirect(Matrix2::ZERO)?),
        ("H^3", semidirect(Matrix2::IDENTITY)?),
        ("Sol3", semidirect(Matrix2::diag(1.0, -1.0))?),
        ("Nil3", semidirect(Matrix2::new(0.0, 1.0, 0.0, 0.0))?),
        ("A=[[2,0],[2,0]]", semidirect(Matrix2::new(2.0, 0.0, 2.0, 0.0))?),
        ("SL2~ (1,1,1)", MetricModel::Sl2(Sl2FrameMetric::new([1.0, 1.0, 1.0])?)),
        ("SL2~ (1,1,2)", MetricModel::Sl2(Sl2FrameMetric::new([1.0, 1.0, 2.0])?)),
    ];
    for (name, model) in models {
        let c = model_curvature(&model)?;
        let ch = cheeger_report(&model).map(|r| r.cheeger.to_string()).unwrap_or_else(|_| "-".into());
        let [e0, e1, e2] = c.ricci_eigenvalues;
        println!("{name:<16} Ricci {e0:>9.4} {e1:>9.4} {e2:>9.4}   scalar {:>9.4}   Ch {ch}", c.scalar);
    }
    Ok(())
}
