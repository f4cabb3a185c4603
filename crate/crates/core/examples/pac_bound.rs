//! Sample sizes needed for a cell count, and the finest decomposition a
//! dataset of a given size supports.

use fairbayes::quantizer::{pac_max_cells, pac_sample_bound};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (error, confidence) = (0.05, 0.95);
    for cells in [16, 64, 256] {
        println!("{cells:>4} cells need {} samples", pac_sample_bound(cells, error, confidence)?);
    }
    for (name, samples) in [("adult", 48_842), ("law", 20_798), ("dutch", 60_420)] {
        println!("{name:>6}: {samples} samples support {} cells", pac_max_cells(samples, error, confidence)?);
    }
    Ok(())
}
