//! Mixed categorical/continuous samples, normalized and quantized with
//! Lloyd's algorithm, then tabulated into a discrete joint.

use fairbayes::dataset::{fit_normalization, ColumnSpec, FeatureSchema, Group, Sample, SampleTable};
use fairbayes::quantizer::{build_joint, pac_max_cells, train_codebook, views};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let schema = FeatureSchema::new(
        vec![
            ColumnSpec::continuous("age"),
            ColumnSpec::categorical("sector", ["public", "private", "self"]),
            ColumnSpec::continuous("hours"),
        ],
        "sex",
        ["female", "male"],
        "income",
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rows = (0..20_000)
        .map(|_| {
            let group = if rng.random_bool(0.5) { Group::A } else { Group::B };
            let shift: f64 = if group == Group::A { 0.0 } else { 6.0 };
            let age = rng.random_range(20.0..60.0) + shift;
            let hours = rng.random_range(20.0..50.0) - shift;
            let sector = rng.random_range(0..3) as f64;
            let p = ((age - 20.0) / 60.0 + (hours - 20.0) / 60.0).clamp(0.05, 0.95);
            Sample {
                features: vec![age, sector, hours],
                group,
                label: rng.random_bool(p) as u8,
            }
        })
        .collect();
    let raw = SampleTable::new(schema, rows)?;
    let table = fit_normalization(&raw)?.apply(&raw)?;

    let cells = pac_max_cells(table.count() as u64, 0.05, 0.95)? as usize;
    let codebook = train_codebook(&table, cells, 0.01, 7)?;
    println!(
        "{} cells, distortion {:.4} after {} Lloyd iterations",
        codebook.cells(),
        codebook.distortion,
        codebook.iterations
    );
    let joint = build_joint(&table, &codebook)?;
    let v = views(&joint)?;
    println!("P(A=a) = {:.3}, P(Y=1) = {:.3}", v.group_priors[0], v.label_priors[1]);
    for (i, (pa, pb)) in v.given_group(Group::A)?.iter().zip(v.given_group(Group::B)?).enumerate().take(5) {
        println!("cell {i}: p_a = {pa:.4}, p_b = {pb:.4}");
    }
    Ok(())
}
