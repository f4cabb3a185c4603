//! Accuracy of the best fair classifier as each budget loosens, with and
//! without access to the sensitive attribute.

use fairbayes::fairlp::{pareto_sweep, Awareness, FairnessBudget, NeighborMatrix};
use fairbayes::quantizer::views;
use fairbayes::synthetic::SyntheticJoint;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let joint = SyntheticJoint::new(32, 0.7, 3).build()?;
    let v = views(&joint)?;
    let w = NeighborMatrix::empty(32);
    let grid: Vec<f64> = (0..=6).map(|k| 0.05 * k as f64).collect();
    for label in ["DP", "EOd", "EA", "DP+EA"] {
        for awareness in [Awareness::Unaware, Awareness::Aware] {
            let budgets = grid
                .iter()
                .map(|&eps| FairnessBudget::from_label(label, eps))
                .collect::<Result<Vec<_>, _>>()?;
            let points = pareto_sweep(&v, &budgets, awareness, &w);
            let accs: Vec<String> = points
                .iter()
                .map(|p| p.acc_fair.map_or("  -   ".into(), |a| format!("{a:.4}")))
                .collect();
            println!("{label:>6} {:>8}: {}", awareness.label(), accs.join(" "));
        }
    }
    Ok(())
}
