//! Partition agreement scores (Rand Index, Adjusted Rand Index) and rank
//! aggregation of experiment results across datasets.
//!
//! ARI is computed from the contingency table in O(n + k^2); an exhaustive
//! pair-counting oracle in the tests guards the algebra. Rank aggregation
//! follows the Friedman convention: within each dataset options are ranked by
//! score descending, ties receive the average of the positions they span, and
//! failed cells rank below every scored one.

use crate::kernels::ProximityMeasure;
use crate::similarity::SimilarityMeasure;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error("partitions have different lengths: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least two elements, got {0}")]
    TooFewElements(usize),
    #[error("score table has no datasets")]
    EmptyTable,
    #[error("score table is missing cell ({dataset}, {method})")]
    MissingCell { dataset: String, method: String },
}

fn comb2(x: u64) -> u64 {
    x * x.saturating_sub(1) / 2
}

struct PairCounts {
    /// Sum over contingency cells of C(n_ij, 2): pairs together in both.
    together_both: u64,
    /// Sum over first-partition clusters of C(a_i, 2).
    together_first: u64,
    /// Sum over second-partition clusters of C(b_j, 2).
    together_second: u64,
    /// C(n, 2).
    total: u64,
}

fn pair_counts(a: &[usize], b: &[usize]) -> Result<PairCounts, EvaluationError> {
    if a.len() != b.len() {
        return Err(EvaluationError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(EvaluationError::TooFewElements(a.len()));
    }
    let mut contingency: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b.iter()) {
        *contingency.entry((x, y)).or_insert(0) += 1;
        *rows.entry(x).or_insert(0) += 1;
        *cols.entry(y).or_insert(0) += 1;
    }
    Ok(PairCounts {
        together_both: contingency.values().map(|&c| comb2(c)).sum(),
        together_first: rows.values().map(|&c| comb2(c)).sum(),
        together_second: cols.values().map(|&c| comb2(c)).sum(),
        total: comb2(a.len() as u64),
    })
}

/// Rand Index: the fraction of element pairs on which two partitions agree
/// (together in both, or apart in both).
pub fn rand_index(a: &[usize], b: &[usize]) -> Result<f64, EvaluationError> {
    let c = pair_counts(a, b)?;
    // Pairs apart in both, by inclusion-exclusion (sum before subtracting to
    // stay in unsigned range).
    let apart_both = (c.total + c.together_both) - c.together_first - c.together_second;
    Ok((c.together_both + apart_both) as f64 / c.total as f64)
}

/// Adjusted Rand Index: the Rand Index recentered so that its expected value
/// under random labelings is 0 and its maximum is 1.
///
/// When both partitions are trivial (a single cluster, or all singletons) the
/// standard formula is 0/0; by the usual convention that case scores 1 if the
/// partitions are equal up to relabeling and 0 otherwise.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64, EvaluationError> {
    let c = pair_counts(a, b)?;
    let index = c.together_both as f64;
    let expected = (c.together_first as f64) * (c.together_second as f64) / (c.total as f64);
    let maximum = 0.5 * (c.together_first + c.together_second) as f64;
    let denominator = maximum - expected;
    if denominator == 0.0 {
        return Ok(if partitions_equivalent(a, b) {
            1.0
        } else {
            0.0
        });
    }
    Ok((index - expected) / denominator)
}

/// Whether two labelings describe the same partition up to a relabeling.
pub fn partitions_equivalent(a: &[usize], b: &[usize]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut forward: HashMap<usize, usize> = HashMap::new();
    let mut backward: HashMap<usize, usize> = HashMap::new();
    for (&x, &y) in a.iter().zip(b.iter()) {
        if *forward.entry(x).or_insert(y) != y {
            return false;
        }
        if *backward.entry(y).or_insert(x) != x {
            return false;
        }
    }
    true
}

/// A similarity column of the experiment table: one of the five attribute
/// measures, or the plain-kernel "No" column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AttributeOption {
    Measure(SimilarityMeasure),
    None,
}

impl AttributeOption {
    pub const ALL: [AttributeOption; 6] = [
        AttributeOption::Measure(SimilarityMeasure::MatchingCoefficient),
        AttributeOption::Measure(SimilarityMeasure::Cosine),
        AttributeOption::Measure(SimilarityMeasure::ExtendedJaccard),
        AttributeOption::Measure(SimilarityMeasure::Manhattan),
        AttributeOption::Measure(SimilarityMeasure::Euclidean),
        AttributeOption::None,
    ];

    pub fn code(&self) -> &'static str {
        match self {
            AttributeOption::Measure(m) => m.code(),
            AttributeOption::None => "No",
        }
    }
}

impl fmt::Display for AttributeOption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Outcome of one experiment cell: the best score over the parameter grid,
/// or nothing if every grid point failed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CellScore {
    pub ari: Option<f64>,
    pub alpha: Option<f64>,
    pub note: Option<String>,
}

impl CellScore {
    pub fn scored(ari: f64, alpha: f64) -> Self {
        Self {
            ari: Some(ari),
            alpha: Some(alpha),
            note: None,
        }
    }

    pub fn failed(note: impl Into<String>) -> Self {
        Self {
            ari: None,
            alpha: None,
            note: Some(note.into()),
        }
    }
}

/// Grid of best scores: (dataset, proximity measure, similarity option) cells
/// plus one attribute-only k-means cell per dataset.
#[derive(Debug, Clone, Default)]
pub struct ScoreTable {
    kernel_cells: BTreeMap<(String, ProximityMeasure, AttributeOption), CellScore>,
    kmeans_cells: BTreeMap<String, CellScore>,
}

impl ScoreTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_kernel_cell(
        &mut self,
        dataset: impl Into<String>,
        measure: ProximityMeasure,
        option: AttributeOption,
        score: CellScore,
    ) {
        self.kernel_cells
            .insert((dataset.into(), measure, option), score);
    }

    pub fn insert_kmeans_cell(&mut self, dataset: impl Into<String>, score: CellScore) {
        self.kmeans_cells.insert(dataset.into(), score);
    }

    pub fn kernel_cell(
        &self,
        dataset: &str,
        measure: ProximityMeasure,
        option: AttributeOption,
    ) -> Option<&CellScore> {
        self.kernel_cells
            .get(&(dataset.to_string(), measure, option))
    }

    pub fn kmeans_cell(&self, dataset: &str) -> Option<&CellScore> {
        self.kmeans_cells.get(dataset)
    }

    /// Datasets present in the table, sorted.
    pub fn datasets(&self) -> Vec<String> {
        let mut names: BTreeSet<String> = BTreeSet::new();
        for (dataset, _, _) in self.kernel_cells.keys() {
            names.insert(dataset.clone());
        }
        for dataset in self.kmeans_cells.keys() {
            names.insert(dataset.clone());
        }
        names.into_iter().collect()
    }

    /// Proximity measures present, in enum order.
    pub fn measures(&self) -> Vec<ProximityMeasure> {
        let mut set: BTreeSet<ProximityMeasure> = BTreeSet::new();
        for (_, measure, _) in self.kernel_cells.keys() {
            set.insert(*measure);
        }
        set.into_iter().collect()
    }

    /// Attribute options present, in enum order.
    pub fn options(&self) -> Vec<AttributeOption> {
        let mut set: BTreeSet<AttributeOption> = BTreeSet::new();
        for (_, _, option) in self.kernel_cells.keys() {
            set.insert(*option);
        }
        set.into_iter().collect()
    }

    pub fn has_kmeans(&self) -> bool {
        !self.kmeans_cells.is_empty()
    }
}

/// An option as it appears in a ranking: a similarity column of some kernel,
/// the kernel's plain "No" column, or the k-means baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RankedOption {
    Attribute(AttributeOption),
    KMeans,
}

impl RankedOption {
    pub fn code(&self) -> &'static str {
        match self {
            RankedOption::Attribute(opt) => opt.code(),
            RankedOption::KMeans => "k-means",
        }
    }
}

impl fmt::Display for RankedOption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Mean and standard deviation of one option's rank across datasets.
#[derive(Debug, Clone, PartialEq)]
pub struct OptionRank {
    pub option: RankedOption,
    pub mean: f64,
    pub std: f64,
}

/// Per-kernel ranking of similarity options (the per-measure panels).
#[derive(Debug, Clone, PartialEq)]
pub struct KernelRanking {
    pub measure: ProximityMeasure,
    pub options: Vec<OptionRank>,
}

/// A (proximity measure, similarity measure) pair with its average rank in
/// the global per-dataset ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct PairRank {
    pub measure: ProximityMeasure,
    pub similarity: SimilarityMeasure,
    pub mean_rank: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankSummary {
    pub per_kernel: Vec<KernelRanking>,
    /// Pairs sorted by average rank ascending (best first).
    pub pairs: Vec<PairRank>,
}

/// Which baseline columns participate in the rankings.
#[derive(Debug, Clone, Copy)]
pub struct RankConfig {
    pub include_no: bool,
    pub include_kmeans: bool,
}

impl Default for RankConfig {
    fn default() -> Self {
        Self {
            include_no: true,
            include_kmeans: true,
        }
    }
}

/// Average ranks (1 = best) for scores sorted descending. `None` entries
/// (failed cells) rank below every scored entry; equal values share the
/// average of the positions they span.
fn average_ranks(values: &[Option<f64>]) -> Vec<f64> {
    let m = values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&p, &q| match (values[p], values[q]) {
        (Some(a), Some(b)) => b.total_cmp(&a).then(p.cmp(&q)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => p.cmp(&q),
    });
    let mut ranks = vec![0.0; m];
    let mut start = 0;
    while start < m {
        let mut end = start + 1;
        while end < m && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start+1 ..= end share their average.
        let average = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = average;
        }
        start = end;
    }
    ranks
}

fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m;
    (mean, variance.sqrt())
}

fn cell_value(
    table: &ScoreTable,
    dataset: &str,
    measure: ProximityMeasure,
    option: RankedOption,
) -> Result<Option<f64>, EvaluationError> {
    match option {
        RankedOption::Attribute(attr) => table
            .kernel_cell(dataset, measure, attr)
            .map(|c| c.ari)
            .ok_or_else(|| EvaluationError::MissingCell {
                dataset: dataset.to_string(),
                method: format!("{} + {}", measure, attr),
            }),
        RankedOption::KMeans => {
            table
                .kmeans_cell(dataset)
                .map(|c| c.ari)
                .ok_or_else(|| EvaluationError::MissingCell {
                    dataset: dataset.to_string(),
                    method: "k-means".to_string(),
                })
        }
    }
}

/// Rank the similarity options of every proximity measure across datasets and
/// rank (measure, similarity) pairs globally.
///
/// Per-kernel rankings compare that kernel's similarity columns (plus the
/// baselines, per `config`) within each dataset. The global pair ranking
/// pools every (kernel, option) combination of a dataset into one list — the
/// k-means baseline enters once per kernel so each kernel's panel competes on
/// the same footing — and averages each pair's rank over datasets.
pub fn rank_options(
    table: &ScoreTable,
    config: RankConfig,
) -> Result<RankSummary, EvaluationError> {
    let datasets = table.datasets();
    if datasets.is_empty() {
        return Err(EvaluationError::EmptyTable);
    }
    let measures = table.measures();
    let sim_options = table.options();

    let mut ranked_options: Vec<RankedOption> = sim_options
        .iter()
        .filter(|opt| config.include_no || **opt != AttributeOption::None)
        .map(|opt| RankedOption::Attribute(*opt))
        .collect();
    if config.include_kmeans && table.has_kmeans() {
        ranked_options.push(RankedOption::KMeans);
    }

    // Per-kernel rankings.
    let mut per_kernel = Vec::new();
    for &measure in &measures {
        let mut rank_rows: Vec<Vec<f64>> = Vec::new();
        for dataset in &datasets {
            let values: Vec<Option<f64>> = ranked_options
                .iter()
                .map(|&opt| cell_value(table, dataset, measure, opt))
                .collect::<Result<_, _>>()?;
            rank_rows.push(average_ranks(&values));
        }
        let options = ranked_options
            .iter()
            .enumerate()
            .map(|(idx, &option)| {
                let ranks: Vec<f64> = rank_rows.iter().map(|row| row[idx]).collect();
                let (mean, std) = mean_and_std(&ranks);
                OptionRank { option, mean, std }
            })
            .collect();
        per_kernel.push(KernelRanking { measure, options });
    }

    // Global pair ranking: every (kernel, option) combination competes within
    // each dataset.
    let mut combos: Vec<(ProximityMeasure, RankedOption)> = Vec::new();
    for &measure in &measures {
        for &option in &ranked_options {
            combos.push((measure, option));
        }
    }
    let mut combo_ranks: Vec<Vec<f64>> = vec![Vec::new(); combos.len()];
    for dataset in &datasets {
        let values: Vec<Option<f64>> = combos
            .iter()
            .map(|&(measure, option)| cell_value(table, dataset, measure, option))
            .collect::<Result<_, _>>()?;
        let ranks = average_ranks(&values);
        for (idx, rank) in ranks.into_iter().enumerate() {
            combo_ranks[idx].push(rank);
        }
    }
    let mut pairs: Vec<PairRank> = combos
        .iter()
        .enumerate()
        .filter_map(|(idx, &(measure, option))| match option {
            RankedOption::Attribute(AttributeOption::Measure(similarity)) => {
                let (mean, _) = mean_and_std(&combo_ranks[idx]);
                Some(PairRank {
                    measure,
                    similarity,
                    mean_rank: mean,
                })
            }
            _ => None,
        })
        .collect();
    pairs.sort_by(|a, b| {
        a.mean_rank
            .total_cmp(&b.mean_rank)
            .then(a.measure.cmp(&b.measure))
            .then(a.similarity.cmp(&b.similarity))
    });

    Ok(RankSummary { per_kernel, pairs })
}
