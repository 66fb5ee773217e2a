//! Agglomerative hierarchical clustering with complete linkage.

use crate::scalar::Real;

/// Groups `n` items so that every cluster's diameter (largest pairwise
/// distance) is at most `cutoff`.
///
/// Repeatedly merges the pair of clusters with the smallest complete-linkage
/// distance while that distance is `<= cutoff`; ties go to the lowest index
/// pair. Clusters come back ordered by their smallest member, members sorted.
pub fn complete_linkage<T: Real>(n: usize, dist: impl Fn(usize, usize) -> T, cutoff: T) -> Vec<Vec<usize>> {
    let mut clusters: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
    let mut d = vec![T::zero(); n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = dist(i, j);
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    loop {
        let mut best: Option<(usize, usize, T)> = None;
        for i in 0..n {
            if clusters[i].is_none() {
                continue;
            }
            for j in (i + 1)..n {
                if clusters[j].is_none() {
                    continue;
                }
                let v = d[i * n + j];
                if best.is_none_or(|(_, _, b)| v < b) {
                    best = Some((i, j, v));
                }
            }
        }
        let Some((i, j, v)) = best else { break };
        if !(v <= cutoff) {
            break;
        }
        let absorbed = clusters[j].take().unwrap_or_default();
        if let Some(c) = clusters[i].as_mut() {
            c.extend(absorbed);
            c.sort_unstable();
        }
        // Lance-Williams update for complete linkage.
        for k in 0..n {
            if k == i || clusters[k].is_none() {
                continue;
            }
            let m = d[i * n + k].max(d[j * n + k]);
            d[i * n + k] = m;
            d[k * n + i] = m;
        }
    }
    clusters.into_iter().flatten().collect()
}
