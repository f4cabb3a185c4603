//! Local individual fairness: nearby centroids must receive similar scores.

use fairbayes::dataset::MixedMetric;
use fairbayes::fairlp::{build_neighbor_matrix, fair_solution, Awareness, FairnessBudget};
use fairbayes::quantizer::{views, Codebook};
use fairbayes::synthetic::SyntheticJoint;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 24;
    // centroids on a line so cell order matches feature order
    let centroids = (0..n).map(|i| vec![i as f64 / n as f64]).collect();
    let codebook = Codebook::from_centroids(centroids, MixedMetric::continuous(1))?;
    let w = build_neighbor_matrix(&codebook, 10.0, 1.0)?;
    println!("radius {:.4}, {} neighbor pairs", w.eta, w.rows());

    let v = views(&SyntheticJoint::new(n, 0.5, 11).build()?)?;
    for eps in [1.0, 0.5, 0.2, 0.0] {
        let r = fair_solution(&v, &FairnessBudget::inactive().with_ind(eps), Awareness::Unaware, &w)?;
        let scores: String = r
            .s_fair
            .values
            .iter()
            .map(|s| if *s > 0.99 { '1' } else if *s < 0.01 { '0' } else { '~' })
            .collect();
        println!("eps {eps:.1}: acc {:.4}  scores {scores}", r.acc_fair);
    }
    Ok(())
}
