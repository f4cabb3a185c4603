//! Rebuilds a known joint from PAC-sized samples and compares the per-(group,
//! label) conditionals with TV distance and Pearson correlation.

use fairbayes::dataset::Group;
use fairbayes::quantizer::{build_joint, pac_sample_bound, pcc, train_codebook, tv_distance};
use fairbayes::synthetic::{sample_table, SyntheticJoint};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cells = 20;
    let truth = SyntheticJoint::new(cells, 0.5, 4).build()?;
    let samples = pac_sample_bound(cells as u64, 0.05, 0.95)? as usize;
    let table = sample_table(&truth, samples, 8);
    let codebook = train_codebook(&table, cells, 0.01, 0)?;
    let built = build_joint(&table, &codebook)?;

    // the synthetic feature is the cell index; line the rebuilt cells up with it
    let mut order: Vec<usize> = (0..codebook.cells()).collect();
    order.sort_by(|&a, &b| codebook.centroids[a][0].total_cmp(&codebook.centroids[b][0]));
    println!("{samples} samples over {cells} cells");
    for g in Group::BOTH {
        for y in 0..2u8 {
            let p = truth.conditional(g, y).ok_or("empty event")?;
            let q = built.conditional(g, y).ok_or("empty event")?;
            let q: Vec<f64> = order.iter().map(|&k| q[k]).collect();
            println!(
                "{g:?}, y={y}: TV {:.4}, PCC {:.4}",
                tv_distance(&p, &q)?,
                pcc(&p, &q)?
            );
        }
    }
    Ok(())
}
