//! Distance-based clustering baselines on complete data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{ClamrError, Result};
use crate::partition::Partition;

fn require_complete(data: &Dataset, method: &'static str) -> Result<()> {
    if data.has_missing() {
        Err(ClamrError::MissingData(method))
    } else {
        Ok(())
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

const LLOYD_MAX_ITER: usize = 300;

/// One Lloyd run from a k-means++ seeding; returns labels and the
/// within-cluster sum of squares.
fn lloyd(data: &Dataset, k: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, f64) {
    let (n, p) = (data.n(), data.p());
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(data.row(rng.random_range(0..n)).to_vec());
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(data.row(i), &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if u < w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        let c = data.row(next).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(data.row(i), &c));
        }
        centers.push(c);
    }

    let mut labels = vec![usize::MAX; n];
    for _ in 0..LLOYD_MAX_ITER {
        let mut changed = false;
        for (i, label) in labels.iter_mut().enumerate() {
            let row = data.row(i);
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let d = sq_dist(row, center);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if *label != best {
                *label = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; p]; k];
        let mut counts = vec![0usize; k];
        for (i, &c) in labels.iter().enumerate() {
            counts[c] += 1;
            for (s, &v) in sums[c].iter_mut().zip(data.row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            // An emptied cluster keeps its previous center.
            if counts[c] > 0 {
                for (dst, s) in centers[c].iter_mut().zip(&sums[c]) {
                    *dst = s / counts[c] as f64;
                }
            }
        }
    }
    let wcss = labels
        .iter()
        .enumerate()
        .map(|(i, &c)| sq_dist(data.row(i), &centers[c]))
        .sum();
    (labels, wcss)
}

/// Lloyd's algorithm from k-means++ seedings on the raw features, keeping
/// the run with the smallest within-cluster sum of squares.
pub fn kmeans(data: &Dataset, k: usize, seed: u64, restarts: usize) -> Result<Partition> {
    require_complete(data, "k-means")?;
    if k == 0 || k > data.n() {
        return Err(ClamrError::Config(format!("k = {k} must lie in [1, {}]", data.n())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..restarts.max(1) {
        let run = lloyd(data, k, &mut rng);
        if best.as_ref().is_none_or(|b| run.1 < b.1) {
            best = Some(run);
        }
    }
    Ok(Partition::from_labels(&best.expect("at least one run").0))
}

/// Agglomerative clustering with complete linkage on Euclidean distances,
/// cut at `k` clusters. Among equally close pairs the one with the smallest
/// indices merges first.
pub fn hca_complete(data: &Dataset, k: usize) -> Result<Partition> {
    require_complete(data, "hierarchical clustering")?;
    let n = data.n();
    if k == 0 || k > n {
        return Err(ClamrError::Config(format!("k = {k} must lie in [1, {n}]")));
    }
    // Squared distances preserve the ordering of complete-linkage heights.
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = sq_dist(data.row(i), data.row(j));
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    // Each cluster is represented by its smallest member index.
    let mut active = vec![true; n];
    let mut owner: Vec<usize> = (0..n).collect();
    let mut clusters = n;
    while clusters > k {
        let mut best = (usize::MAX, usize::MAX);
        let mut best_d = f64::INFINITY;
        for i in (0..n).filter(|&i| active[i]) {
            for j in (i + 1..n).filter(|&j| active[j]) {
                if dist[i * n + j] < best_d {
                    best_d = dist[i * n + j];
                    best = (i, j);
                }
            }
        }
        let (a, b) = best;
        active[b] = false;
        for x in (0..n).filter(|&x| active[x] && x != a) {
            let d = dist[a * n + x].max(dist[b * n + x]);
            dist[a * n + x] = d;
            dist[x * n + a] = d;
        }
        for o in owner.iter_mut().filter(|o| **o == b) {
            *o = a;
        }
        clusters -= 1;
    }
    Ok(Partition::from_labels(&owner))
}
