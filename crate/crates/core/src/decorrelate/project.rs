/// Euclidean projection onto the probability simplex `{w ≥ 0, Σw = 1}`.
///
/// Sort-threshold algorithm: find the largest `k` such that the `k` largest
/// entries stay positive after a common shift, then clip.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &x) in sorted.iter().enumerate() {
        cumulative += x;
        let t = (cumulative - 1.0) / (k + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Projects `col` in place.
pub(crate) fn project_in_place(col: &mut [f64]) {
    let p = project_simplex(col);
    col.copy_from_slice(&p);
}
