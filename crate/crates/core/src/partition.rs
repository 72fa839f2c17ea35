//! Set partitions, pair-counting and information-theoretic distances between
//! them, the posterior similarity matrix, and expected-loss point estimates.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ClamrError, Result};

/// Largest item count accepted by the exhaustive candidate search
/// (Bell(10) = 115975 set partitions).
pub const EXHAUSTIVE_LIMIT: usize = 10;

/// Losses are considered tied when they differ by at most this much.
const TIE_TOLERANCE: f64 = 1e-12;

/// A partition of `m` items stored in canonical form: block labels
/// `0, 1, 2, ...` in order of first appearance.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    labels: Vec<usize>,
    n_blocks: usize,
}

impl Partition {
    /// Canonicalizes an arbitrary labelling.
    pub fn from_labels(raw: &[usize]) -> Self {
        let mut seen: HashMap<usize, usize> = HashMap::new();
        let labels = raw
            .iter()
            .map(|&l| {
                let next = seen.len();
                *seen.entry(l).or_insert(next)
            })
            .collect();
        Self {
            labels,
            n_blocks: seen.len(),
        }
    }

    pub fn one_block(m: usize) -> Self {
        Self {
            labels: vec![0; m],
            n_blocks: usize::from(m > 0),
        }
    }

    pub fn singletons(m: usize) -> Self {
        Self {
            labels: (0..m).collect(),
            n_blocks: m,
        }
    }

    /// Canonical 0-based block labels.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Canonical labels starting at 1, as written to output files.
    pub fn one_based(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l + 1).collect()
    }

    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_blocks];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Members of each block, in item order.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut blocks = vec![Vec::new(); self.n_blocks];
        for (i, &l) in self.labels.iter().enumerate() {
            blocks[l].push(i);
        }
        blocks
    }
}

fn check_lengths(a: &Partition, b: &Partition) -> Result<()> {
    if a.len() != b.len() {
        Err(ClamrError::LengthMismatch(a.len(), b.len()))
    } else {
        Ok(())
    }
}

/// Non-zero cell counts of the contingency table of two equal-length partitions.
fn cell_counts(a: &Partition, b: &Partition) -> Vec<usize> {
    let (ka, kb) = (a.n_blocks, b.n_blocks);
    if ka.saturating_mul(kb) <= 1 << 16 {
        let mut table = vec![0usize; ka * kb];
        for (&x, &y) in a.labels.iter().zip(&b.labels) {
            table[x * kb + y] += 1;
        }
        table.retain(|&c| c > 0);
        table
    } else {
        let mut table: HashMap<(usize, usize), usize> = HashMap::new();
        for (&x, &y) in a.labels.iter().zip(&b.labels) {
            *table.entry((x, y)).or_insert(0) += 1;
        }
        table.into_values().collect()
    }
}

#[inline]
fn choose2(k: usize) -> u64 {
    let k = k as u64;
    k * k.saturating_sub(1) / 2
}

/// Pair counts: co-clustered pairs in `a`, in `b`, in both, and all pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct PairCounts {
    in_a: u64,
    in_b: u64,
    in_both: u64,
    total: u64,
}

impl PairCounts {
    fn new(a: &Partition, b: &Partition) -> Self {
        Self {
            in_a: a.block_sizes().into_iter().map(choose2).sum(),
            in_b: b.block_sizes().into_iter().map(choose2).sum(),
            in_both: cell_counts(a, b).into_iter().map(choose2).sum(),
            total: choose2(a.len()),
        }
    }

    fn disagreements(&self) -> u64 {
        self.in_a + self.in_b - 2 * self.in_both
    }
}

/// Fraction of item pairs on which the two partitions disagree about
/// co-membership. Zero when there are no pairs.
pub fn binder_distance(a: &Partition, b: &Partition) -> Result<f64> {
    check_lengths(a, b)?;
    let pc = PairCounts::new(a, b);
    if pc.total == 0 {
        return Ok(0.0);
    }
    Ok(pc.disagreements() as f64 / pc.total as f64)
}

/// Fraction of item pairs on which the partitions agree; 1 when `m = 1`.
pub fn rand_index(a: &Partition, b: &Partition) -> Result<f64> {
    check_lengths(a, b)?;
    let pc = PairCounts::new(a, b);
    if pc.total == 0 {
        return Ok(1.0);
    }
    Ok((pc.total - pc.disagreements()) as f64 / pc.total as f64)
}

/// Hubert-Arabie adjusted Rand index. Returns 1 when the expected-index
/// correction is degenerate and the partitions coincide.
pub fn adjusted_rand(a: &Partition, b: &Partition) -> Result<f64> {
    check_lengths(a, b)?;
    let pc = PairCounts::new(a, b);
    if pc.total == 0 {
        return Ok(1.0);
    }
    let (sa, sb, sab, t) = (
        pc.in_a as f64,
        pc.in_b as f64,
        pc.in_both as f64,
        pc.total as f64,
    );
    let expected = sa * sb / t;
    let max_index = 0.5 * (sa + sb);
    let denom = max_index - expected;
    if denom == 0.0 {
        return Ok(if pc.in_a == pc.in_b && pc.in_both == pc.in_a {
            1.0
        } else {
            0.0
        });
    }
    Ok((sab - expected) / denom)
}

fn sum_n_ln_n(counts: impl IntoIterator<Item = usize>) -> f64 {
    counts
        .into_iter()
        .filter(|&c| c > 1)
        .map(|c| {
            let c = c as f64;
            c * c.ln()
        })
        .sum()
}

/// Variation of information with natural-log entropies.
pub fn vi_distance(a: &Partition, b: &Partition) -> Result<f64> {
    check_lengths(a, b)?;
    if a == b || a.is_empty() {
        return Ok(0.0);
    }
    let pa = Prepared::new(a);
    let pb = Prepared::new(b);
    Ok(pa.vi(&pb))
}

/// A partition with its entropy term cached, for repeated loss evaluation.
struct Prepared<'a> {
    partition: &'a Partition,
    n_ln_n: f64,
}

impl<'a> Prepared<'a> {
    fn new(partition: &'a Partition) -> Self {
        Self {
            partition,
            n_ln_n: sum_n_ln_n(partition.block_sizes()),
        }
    }

    // VI = (1/m) [ sum_a a ln a + sum_b b ln b - 2 sum_ab n_ab ln n_ab ]
    fn vi(&self, other: &Prepared<'_>) -> f64 {
        if self.partition == other.partition {
            return 0.0;
        }
        let m = self.partition.len() as f64;
        let joint = sum_n_ln_n(cell_counts(self.partition, other.partition));
        ((self.n_ln_n + other.n_ln_n - 2.0 * joint) / m).max(0.0)
    }

    fn binder(&self, other: &Prepared<'_>) -> f64 {
        let pc = PairCounts::new(self.partition, other.partition);
        if pc.total == 0 {
            0.0
        } else {
            pc.disagreements() as f64 / pc.total as f64
        }
    }
}

/// Posterior similarity matrix: co-clustering frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct Psm {
    n: usize,
    values: Vec<f64>,
}

impl Psm {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut row = Vec::with_capacity(self.n);
        for i in 0..self.n {
            row.clear();
            row.extend((0..self.n).map(|j| self.get(i, j).to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn compute_psm(draws: &[Partition]) -> Result<Psm> {
    let first = draws.first().ok_or(ClamrError::EmptyDraws)?;
    let n = first.len();
    if let Some(bad) = draws.iter().find(|d| d.len() != n) {
        return Err(ClamrError::LengthMismatch(n, bad.len()));
    }
    let mut counts = vec![0u32; n * n];
    for d in draws {
        let l = d.labels();
        for i in 0..n {
            for j in (i + 1)..n {
                if l[i] == l[j] {
                    counts[i * n + j] += 1;
                }
            }
        }
    }
    let t = draws.len() as f64;
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        values[i * n + i] = 1.0;
        for j in (i + 1)..n {
            let v = f64::from(counts[i * n + j]) / t;
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    Ok(Psm { n, values })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    #[default]
    Vi,
    Binder,
}

impl std::str::FromStr for Loss {
    type Err = ClamrError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vi" => Ok(Self::Vi),
            "binder" => Ok(Self::Binder),
            other => Err(ClamrError::Config(format!("unknown loss `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CandidateSet {
    /// The distinct sampled partitions.
    #[default]
    Draws,
    /// Every set partition of the items.
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointEstimate {
    pub partition: Partition,
    pub expected_loss: f64,
}

/// Distinct draws in first-occurrence order with their multiplicities.
fn dedup_draws(draws: &[Partition]) -> Vec<(&Partition, usize)> {
    let mut index: HashMap<&Partition, usize> = HashMap::new();
    let mut unique: Vec<(&Partition, usize)> = Vec::new();
    for d in draws {
        match index.get(d) {
            Some(&u) => unique[u].1 += 1,
            None => {
                index.insert(d, unique.len());
                unique.push((d, 1));
            }
        }
    }
    unique
}

/// Posterior expected loss of `candidate` under the empirical distribution
/// of `draws`.
pub fn expected_loss(candidate: &Partition, draws: &[Partition], loss: Loss) -> Result<f64> {
    if draws.is_empty() {
        return Err(ClamrError::EmptyDraws);
    }
    for d in draws {
        check_lengths(candidate, d)?;
    }
    let unique = dedup_draws(draws);
    let prepared: Vec<(Prepared<'_>, usize)> =
        unique.iter().map(|&(p, w)| (Prepared::new(p), w)).collect();
    Ok(expected_loss_prepared(
        &Prepared::new(candidate),
        &prepared,
        draws.len(),
        loss,
    ))
}

fn expected_loss_prepared(
    candidate: &Prepared<'_>,
    draws: &[(Prepared<'_>, usize)],
    total: usize,
    loss: Loss,
) -> f64 {
    let sum: f64 = draws
        .iter()
        .map(|(d, w)| {
            let l = match loss {
                Loss::Vi => candidate.vi(d),
                Loss::Binder => candidate.binder(d),
            };
            l * *w as f64
        })
        .sum();
    sum / total as f64
}

/// Minimizes posterior expected loss over a candidate set. Ties go to the
/// candidate with fewest blocks, then to the earliest candidate.
pub fn point_estimate(
    draws: &[Partition],
    loss: Loss,
    candidates: CandidateSet,
) -> Result<PointEstimate> {
    let first = draws.first().ok_or(ClamrError::EmptyDraws)?;
    let m = first.len();
    if let Some(bad) = draws.iter().find(|d| d.len() != m) {
        return Err(ClamrError::LengthMismatch(m, bad.len()));
    }
    let unique = dedup_draws(draws);
    let prepared: Vec<(Prepared<'_>, usize)> =
        unique.iter().map(|&(p, w)| (Prepared::new(p), w)).collect();

    let mut pool: Vec<Partition> = match candidates {
        CandidateSet::Draws => unique.iter().map(|(p, _)| (*p).clone()).collect(),
        CandidateSet::Exhaustive => {
            if m > EXHAUSTIVE_LIMIT {
                return Err(ClamrError::CandidateSpaceTooLarge(m, EXHAUSTIVE_LIMIT));
            }
            set_partitions(m).collect()
        }
    };
    let losses: Vec<f64> = pool
        .par_iter()
        .map(|c| expected_loss_prepared(&Prepared::new(c), &prepared, draws.len(), loss))
        .collect();

    let mut best = 0;
    for (idx, &l) in losses.iter().enumerate().skip(1) {
        let b = losses[best];
        if l < b - TIE_TOLERANCE
            || ((l - b).abs() <= TIE_TOLERANCE && pool[idx].n_blocks() < pool[best].n_blocks())
        {
            best = idx;
        }
    }
    Ok(PointEstimate {
        expected_loss: losses[best],
        partition: pool.swap_remove(best),
    })
}

/// Iterator over all set partitions of `m` items, as restricted growth
/// strings in lexicographic order.
pub fn set_partitions(m: usize) -> SetPartitions {
    SetPartitions {
        current: vec![0; m],
        maxima: vec![0; m],
        done: false,
    }
}

pub struct SetPartitions {
    current: Vec<usize>,
    // maxima[i] = max(current[..i]) + 1 bound helper: largest label used before i
    maxima: Vec<usize>,
    done: bool,
}

impl Iterator for SetPartitions {
    type Item = Partition;

    fn next(&mut self) -> Option<Partition> {
        if self.done {
            return None;
        }
        let m = self.current.len();
        let out = Partition {
            labels: self.current.clone(),
            n_blocks: if m == 0 {
                0
            } else {
                self.current.iter().max().copied().unwrap_or(0) + 1
            },
        };
        // Advance: find the rightmost position that can be incremented.
        let mut advanced = false;
        for i in (1..m).rev() {
            if self.current[i] <= self.maxima[i] {
                self.current[i] += 1;
                for k in (i + 1)..m {
                    self.current[k] = 0;
                    self.maxima[k] = self.maxima[k - 1].max(self.current[k - 1]);
                }
                advanced = true;
                break;
            }
        }
        if !advanced {
            self.done = true;
        }
        Some(out)
    }
}

/// Relabels component allocations to the occupied components only.
///
/// Returns the canonical partition over items together with, for each of its
/// blocks, the original component index.
pub fn nonempty_projection(c: &[usize]) -> (Partition, Vec<usize>) {
    let partition = Partition::from_labels(c);
    let mut map = vec![usize::MAX; partition.n_blocks()];
    for (&orig, &block) in c.iter().zip(partition.labels()) {
        if map[block] == usize::MAX {
            map[block] = orig;
        }
    }
    (partition, map)
}
