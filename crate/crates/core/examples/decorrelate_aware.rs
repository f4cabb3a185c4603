//! Fair group-aware classifier on a synthetic joint, then a pair of
//! per-group transfers that remove the group signal from the cells.

use std::time::Instant;

use fairbayes::decorrelate::{solve_decorrelation_aware, DecorrelationConfig};
use fairbayes::fairlp::{fair_solution, Awareness, FairnessBudget, NeighborMatrix};
use fairbayes::quantizer::views;
use fairbayes::synthetic::SyntheticJoint;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let joint = SyntheticJoint::new(16, 0.8, 7).build()?;
    let v = views(&joint)?;
    let w = NeighborMatrix::empty(16);
    let budget = FairnessBudget::inactive().with_dp(0.05).with_ea(0.05);
    let fair = fair_solution(&v, &budget, Awareness::Aware, &w)?;
    println!("acc* = {:.4}, acc_fair = {:.4}", fair.acc_star, fair.acc_fair);

    let config = DecorrelationConfig {
        budget,
        ..DecorrelationConfig::default()
    };
    let start = Instant::now();
    let out = solve_decorrelation_aware(&fair.s_fair, &v, &w, &config)?;
    let r = &out.report;
    println!(
        "correlation {:.4} -> {:.4} ({:.1}% removed)",
        r.baseline_correlation,
        r.final_correlation,
        100.0 * r.correlation_reduction / r.baseline_correlation
    );
    println!("accuracy {:.4} -> {:.4}", r.acc_before, r.acc_after);
    println!(
        "max violation {:.2e}, converged {}, outer iterations {}, {:.1?}",
        r.max_violation,
        r.converged,
        out.multipliers.outer_iterations,
        start.elapsed()
    );
    Ok(())
}
