//! Grid execution: one cell per (dataset, kernel, similarity option), each
//! cell sweeping the kernel's alpha grid, plus the per-dataset k-means
//! baseline.
//!
//! Cells are independent and run in parallel; every randomized step derives
//! its seed from the master seed and the cell's key, so results do not depend
//! on scheduling or dataset order.

use crate::config::{log_space, DatasetSource, DatasetSpec, ExperimentConfig};
use crate::CliError;
use attrikernel::clustering::{self, Partition};
use attrikernel::datasets;
use attrikernel::evaluation::{self, AttributeOption, CellScore, RankSummary, ScoreTable};
use attrikernel::graph::Graph;
use attrikernel::kernels::{PreparedKernel, ProximityMeasure};
use attrikernel::similarity;
use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

/// One evaluated grid point.
#[derive(Debug, Clone, Serialize)]
pub struct GridPoint {
    pub alpha: f64,
    pub ari: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Amount by which negative kernel entries were lifted before spectral
    /// clustering, when that policy triggered.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub affinity_shift: Option<f64>,
}

/// Outcome of one cell: the best grid point, or a failure summary when every
/// grid point failed.
#[derive(Debug, Clone, Serialize)]
pub struct CellReport {
    pub dataset: String,
    pub measure: Option<String>,
    pub similarity: Option<String>,
    pub kmeans: bool,
    pub best_ari: Option<f64>,
    pub best_alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    pub seed: u64,
    pub grid: Vec<GridPoint>,
}

#[derive(Debug)]
pub struct ExperimentOutput {
    pub table: ScoreTable,
    pub ranks: RankSummary,
    pub cells: Vec<CellReport>,
    pub dataset_notes: Vec<String>,
    pub failed_cells: usize,
}

fn fnv1a(text: &str) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for byte in text.bytes() {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(0x100_0000_01b3);
    }
    hash
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn cell_seed(master: u64, key: &str) -> u64 {
    splitmix(master ^ fnv1a(key))
}

/// Load one dataset according to its source, enforcing registered descriptor
/// counts when the name is a known corpus.
pub fn load_dataset(spec: &DatasetSpec) -> Result<(Graph, Vec<String>), CliError> {
    let mut notes = Vec::new();
    let data_err = |e: datasets::DatasetError| CliError::Data(format!("{}: {e}", spec.name));
    let graph = match &spec.source {
        DatasetSource::WebKb { dir } => {
            let university: datasets::University = spec.name.parse().map_err(data_err)?;
            let loaded = datasets::load_webkb(dir, university).map_err(data_err)?;
            note_stats(&spec.name, &loaded, &mut notes);
            loaded.graph
        }
        DatasetSource::Citation { content, cites } => {
            let loaded = datasets::load_citation(content, cites).map_err(data_err)?;
            if let Some(descriptor) = datasets::descriptor(&spec.name) {
                datasets::enforce_descriptor(&loaded, descriptor).map_err(data_err)?;
            }
            note_stats(&spec.name, &loaded, &mut notes);
            loaded.graph
        }
        DatasetSource::Canonical { path } => datasets::load_canonical(path).map_err(data_err)?,
    };
    Ok((graph, notes))
}

fn note_stats(name: &str, loaded: &datasets::LoadedGraph, notes: &mut Vec<String>) {
    let stats = &loaded.stats;
    notes.push(format!(
        "{name}: {} directed citations ({} dangling dropped, {} self-citations) -> {} undirected edges",
        stats.directed_citations, stats.dangling_citations, stats.self_citations,
        stats.undirected_edges
    ));
}

/// Default alpha grid for a kernel, given its prepared state (the
/// communicability ceiling depends on the spectral norm of the matrix at
/// hand).
pub fn default_alpha_grid(measure: ProximityMeasure, prepared: &PreparedKernel) -> Vec<f64> {
    match measure {
        ProximityMeasure::Communicability => {
            let ceiling = prepared
                .alpha_ceiling()
                .map(|c| c * 0.999)
                .unwrap_or(30.0)
                .min(30.0);
            log_space(0.01f64.min(ceiling), ceiling, 12)
        }
        ProximityMeasure::Heat => log_space(0.01, 30.0, 12),
        ProximityMeasure::PageRank => (0..10).map(|i| 0.05 + 0.1 * i as f64).collect(),
        ProximityMeasure::FreeEnergy => log_space(0.01, 20.0, 10),
        ProximityMeasure::Scct => log_space(0.1, 30.0, 8),
    }
}

struct CellContext<'a> {
    dataset: &'a str,
    labels: &'a [usize],
    classes: usize,
    restarts: usize,
    master_seed: u64,
    fe_diagonal_correction: bool,
}

fn run_kernel_cell(
    ctx: &CellContext<'_>,
    measure: ProximityMeasure,
    option: AttributeOption,
    adjacency: &Array2<f64>,
    alpha_override: Option<&Vec<f64>>,
) -> CellReport {
    let key = format!("{}|{}|{}", ctx.dataset, measure.code(), option.code());
    let seed = cell_seed(ctx.master_seed, &key);
    let mut report = CellReport {
        dataset: ctx.dataset.to_string(),
        measure: Some(measure.code().to_string()),
        similarity: Some(option.code().to_string()),
        kmeans: false,
        best_ari: None,
        best_alpha: None,
        failure: None,
        seed,
        grid: Vec::new(),
    };

    let prepared =
        match PreparedKernel::with_options(measure, adjacency, ctx.fe_diagonal_correction) {
            Ok(prepared) => prepared,
            Err(e) => {
                report.failure = Some(format!("kernel preparation failed: {e}"));
                return report;
            }
        };
    let grid = alpha_override
        .cloned()
        .unwrap_or_else(|| default_alpha_grid(measure, &prepared));

    for &alpha in &grid {
        let point = evaluate_grid_point(ctx, &prepared, alpha, seed);
        report.grid.push(point);
    }

    // Best ARI, smallest alpha breaking ties (override grids may be listed
    // in any order). An audit below re-checks that the reported best really
    // is the grid maximum.
    let mut best: Option<(f64, f64)> = None;
    for point in &report.grid {
        if let Some(ari) = point.ari {
            let better = match best {
                None => true,
                Some((best_ari, best_alpha)) => {
                    ari > best_ari || (ari == best_ari && point.alpha < best_alpha)
                }
            };
            if better {
                best = Some((ari, point.alpha));
            }
        }
    }
    match best {
        Some((ari, alpha)) => {
            report.best_ari = Some(ari);
            report.best_alpha = Some(alpha);
            let max = report
                .grid
                .iter()
                .filter_map(|p| p.ari)
                .fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(ari, max, "best ARI must equal the grid maximum");
        }
        None => {
            let reasons: Vec<&str> = report
                .grid
                .iter()
                .filter_map(|p| p.error.as_deref())
                .collect();
            let summary = reasons.first().copied().unwrap_or("no grid points");
            report.failure = Some(format!(
                "all {} grid points failed; first error: {summary}",
                report.grid.len()
            ));
        }
    }
    report
}

fn evaluate_grid_point(
    ctx: &CellContext<'_>,
    prepared: &PreparedKernel,
    alpha: f64,
    seed: u64,
) -> GridPoint {
    let kernel = match prepared.compute(alpha) {
        Ok(kernel) => kernel,
        Err(e) => {
            return GridPoint {
                alpha,
                ari: None,
                error: Some(format!("kernel: {e}")),
                affinity_shift: None,
            };
        }
    };
    let shift = clustering::affinity_shift(&kernel);
    match clustering::spectral_partition(&kernel, ctx.classes, seed, ctx.restarts) {
        Ok(partition) => {
            match evaluation::adjusted_rand_index(partition.assignment(), ctx.labels) {
                Ok(ari) => GridPoint {
                    alpha,
                    ari: Some(ari),
                    error: None,
                    affinity_shift: (shift > 0.0).then_some(shift),
                },
                Err(e) => GridPoint {
                    alpha,
                    ari: None,
                    error: Some(format!("scoring: {e}")),
                    affinity_shift: (shift > 0.0).then_some(shift),
                },
            }
        }
        Err(e) => GridPoint {
            alpha,
            ari: None,
            error: Some(format!("spectral: {e}")),
            affinity_shift: (shift > 0.0).then_some(shift),
        },
    }
}

fn run_kmeans_cell(ctx: &CellContext<'_>, attributes: &Array2<f64>) -> CellReport {
    let key = format!("{}|kmeans", ctx.dataset);
    let seed = cell_seed(ctx.master_seed, &key);
    let mut report = CellReport {
        dataset: ctx.dataset.to_string(),
        measure: None,
        similarity: None,
        kmeans: true,
        best_ari: None,
        best_alpha: None,
        failure: None,
        seed,
        grid: Vec::new(),
    };
    match clustering::kmeans(attributes, ctx.classes, seed, ctx.restarts) {
        Ok(partition) => {
            match evaluation::adjusted_rand_index(partition.assignment(), ctx.labels) {
                Ok(ari) => report.best_ari = Some(ari),
                Err(e) => report.failure = Some(format!("scoring: {e}")),
            }
        }
        Err(e) => report.failure = Some(format!("k-means: {e}")),
    }
    report
}

/// Evaluate the full (dataset x kernel x similarity option) grid plus the
/// k-means baselines, then aggregate ranks.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput, CliError> {
    let needs_attributes = config.run_kmeans
        || config
            .attribute_options
            .iter()
            .any(|opt| matches!(opt, AttributeOption::Measure(_)));

    let mut cells: Vec<CellReport> = Vec::new();
    let mut dataset_notes = Vec::new();

    for spec in &config.datasets {
        let (graph, notes) = load_dataset(spec)?;
        dataset_notes.extend(notes);
        let labels = graph
            .labels()
            .ok_or_else(|| {
                CliError::Data(format!("{}: ground-truth labels are required", spec.name))
            })?
            .to_vec();
        let classes = graph.class_count().unwrap_or(0);
        if classes < 2 {
            return Err(CliError::Data(format!(
                "{}: need at least two classes, found {classes}",
                spec.name
            )));
        }
        if needs_attributes && graph.attributes().is_none() {
            return Err(CliError::Data(format!(
                "{}: node attributes are required for similarity options and k-means",
                spec.name
            )));
        }

        let ctx = CellContext {
            dataset: &spec.name,
            labels: &labels,
            classes,
            restarts: config.restarts,
            master_seed: config.seed,
            fe_diagonal_correction: config.fe_diagonal_correction,
        };

        // One fused adjacency per similarity option, shared by all kernels.
        // The intermediate similarity matrix is dropped right after fusing.
        let mut fused: Vec<(AttributeOption, Array2<f64>)> = Vec::new();
        for &option in &config.attribute_options {
            let matrix = match option {
                AttributeOption::None => graph.adjacency().clone(),
                AttributeOption::Measure(measure) => {
                    let attributes = graph.attributes().expect("checked above");
                    let s = similarity::similarity_matrix(attributes, measure)
                        .map_err(|e| CliError::Data(format!("{}: {e}", spec.name)))?;
                    similarity::fuse(graph.adjacency(), &s, config.beta)
                        .map_err(|e| CliError::Data(format!("{}: {e}", spec.name)))?
                }
            };
            fused.push((option, matrix));
        }

        let mut jobs: Vec<(ProximityMeasure, AttributeOption, &Array2<f64>)> = Vec::new();
        for &measure in &config.kernels {
            for (option, matrix) in &fused {
                jobs.push((measure, *option, matrix));
            }
        }
        let mut dataset_cells: Vec<CellReport> = jobs
            .par_iter()
            .map(|&(measure, option, matrix)| {
                run_kernel_cell(
                    &ctx,
                    measure,
                    option,
                    matrix,
                    config.alpha_overrides.get(&measure),
                )
            })
            .collect();
        if config.run_kmeans {
            let attributes = graph.attributes().expect("checked above");
            dataset_cells.push(run_kmeans_cell(&ctx, attributes));
        }
        cells.extend(dataset_cells);
    }

    let mut table = ScoreTable::new();
    let mut failed_cells = 0usize;
    for cell in &cells {
        let score = match (cell.best_ari, &cell.failure) {
            (Some(ari), _) => CellScore::scored(ari, cell.best_alpha.unwrap_or(f64::NAN)),
            (None, Some(reason)) => {
                failed_cells += 1;
                CellScore::failed(reason.clone())
            }
            (None, None) => {
                failed_cells += 1;
                CellScore::failed("no result")
            }
        };
        if cell.kmeans {
            table.insert_kmeans_cell(&cell.dataset, score);
        } else {
            let measure: ProximityMeasure = cell
                .measure
                .as_deref()
                .expect("kernel cell has a measure")
                .parse()
                .expect("cell measure code round-trips");
            let option = parse_option(cell.similarity.as_deref().expect("kernel cell option"));
            table.insert_kernel_cell(&cell.dataset, measure, option, score);
        }
    }

    let ranks =
        evaluation::rank_options(&table, config.rank).map_err(|e| CliError::Data(e.to_string()))?;

    Ok(ExperimentOutput {
        table,
        ranks,
        cells,
        dataset_notes,
        failed_cells,
    })
}

fn parse_option(code: &str) -> AttributeOption {
    if code.eq_ignore_ascii_case("no") {
        AttributeOption::None
    } else {
        AttributeOption::Measure(code.parse().expect("cell option code round-trips"))
    }
}

/// Single clustering run for the `cluster` subcommand.
pub struct SingleRun {
    pub partition: Partition,
    pub ari: Option<f64>,
    pub affinity_shift: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn run_single(
    graph: &Graph,
    measure: ProximityMeasure,
    option: AttributeOption,
    beta: f64,
    alpha: f64,
    k: usize,
    seed: u64,
    restarts: usize,
    fe_diagonal_correction: bool,
) -> Result<SingleRun, CliError> {
    let adjacency = match option {
        AttributeOption::None => graph.adjacency().clone(),
        AttributeOption::Measure(sim) => {
            let attributes = graph.attributes().ok_or_else(|| {
                CliError::Data("graph has no attributes; use --similarity no".into())
            })?;
            let s = similarity::similarity_matrix(attributes, sim)
                .map_err(|e| CliError::Data(e.to_string()))?;
            similarity::fuse(graph.adjacency(), &s, beta)
                .map_err(|e| CliError::Data(e.to_string()))?
        }
    };
    let prepared = PreparedKernel::with_options(measure, &adjacency, fe_diagonal_correction)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let kernel = prepared
        .compute(alpha)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let affinity_shift = clustering::affinity_shift(&kernel);
    let partition = clustering::spectral_partition(&kernel, k, seed, restarts)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let ari = graph
        .labels()
        .map(|labels| evaluation::adjusted_rand_index(partition.assignment(), labels))
        .transpose()
        .map_err(|e| CliError::Data(e.to_string()))?;
    Ok(SingleRun {
        partition,
        ari,
        affinity_shift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::DatasetSource;
    use attrikernel::datasets::{save_canonical, sbm_generate, SbmAttributeModel};
    use std::path::PathBuf;

    fn synthetic_dataset(dir: &std::path::Path, seed: u64) -> DatasetSpec {
        let graph = sbm_generate(
            &[15, 15],
            0.6,
            0.05,
            seed,
            Some(&SbmAttributeModel {
                dimension: 24,
                flip_probability: 0.1,
            }),
        )
        .unwrap();
        let path = dir.join(format!("sbm{seed}.graph"));
        save_canonical(&graph, &path).unwrap();
        DatasetSpec {
            name: format!("sbm{seed}"),
            source: DatasetSource::Canonical { path },
        }
    }

    fn quick_config(datasets: Vec<DatasetSpec>) -> ExperimentConfig {
        let mut config = ExperimentConfig {
            datasets,
            restarts: 4,
            ..ExperimentConfig::default()
        };
        for measure in ProximityMeasure::ALL {
            let grid = match measure {
                ProximityMeasure::PageRank => vec![0.3, 0.8],
                _ => vec![0.5, 2.0],
            };
            config.alpha_overrides.insert(measure, grid);
        }
        config
    }

    #[test]
    fn two_clique_sbm_is_fully_recovered_without_attributes() {
        // Two cliques joined by one bridge keep every kernel well defined
        // (FE and SCCT need a connected graph with positive degrees).
        let mut graph = sbm_generate(&[8, 8], 1.0, 0.0, 3, None).unwrap();
        let mut edges: Vec<(usize, usize, f64)> = Vec::new();
        let a = graph.adjacency();
        for i in 0..16 {
            for j in (i + 1)..16 {
                if a[[i, j]] > 0.0 {
                    edges.push((i, j, 1.0));
                }
            }
        }
        edges.push((7, 8, 1.0));
        let labels = graph.labels().unwrap().to_vec();
        graph = Graph::from_edges(16, &edges)
            .unwrap()
            .with_labels(labels.clone())
            .unwrap();

        for measure in ProximityMeasure::ALL {
            let alpha = match measure {
                ProximityMeasure::PageRank => 0.5,
                _ => 1.0,
            };
            let run = run_single(
                &graph,
                measure,
                AttributeOption::None,
                0.5,
                alpha,
                2,
                7,
                5,
                true,
            )
            .unwrap();
            assert_eq!(
                run.ari,
                Some(1.0),
                "{measure} should split the bridged cliques exactly"
            );
        }
    }

    #[test]
    fn disconnected_cliques_recovered_by_spectral_kernels() {
        // Fully separ---two disjoint cliques. FE and SCCT are structurally
        // undefined here; the exponential and resolvent kernels handle it.
        let graph = sbm_generate(&[6, 6], 1.0, 0.0, 5, None).unwrap();
        for measure in [
            ProximityMeasure::Communicability,
            ProximityMeasure::Heat,
            ProximityMeasure::PageRank,
        ] {
            let alpha = if measure == ProximityMeasure::PageRank {
                0.5
            } else {
                1.0
            };
            let run = run_single(
                &graph,
                measure,
                AttributeOption::None,
                0.5,
                alpha,
                2,
                11,
                5,
                true,
            )
            .unwrap();
            assert_eq!(run.ari, Some(1.0), "{measure} on disjoint cliques");
        }
    }

    #[test]
    fn experiment_covers_full_grid() {
        let dir = tempfile::tempdir().unwrap();
        let config = quick_config(vec![synthetic_dataset(dir.path(), 1)]);
        let output = run_experiment(&config).unwrap();
        // 5 kernels x 6 options + k-means.
        assert_eq!(output.cells.len(), 31);
        assert_eq!(output.failed_cells, 0);
        let datasets = output.table.datasets();
        assert_eq!(datasets, vec!["sbm1".to_string()]);
        // Every kernel cell carries its grid.
        for cell in &output.cells {
            if !cell.kmeans {
                assert_eq!(cell.grid.len(), 2);
                let best = cell.best_ari.unwrap();
                let max = cell
                    .grid
                    .iter()
                    .filter_map(|p| p.ari)
                    .fold(f64::NEG_INFINITY, f64::max);
                assert_eq!(best, max);
            }
        }
        assert_eq!(output.ranks.pairs.len(), 25);
    }

    #[test]
    fn fusion_beats_plain_structure_on_weak_sbm() {
        // Weak community structure, moderately noisy attributes: every
        // kernel should gain a lot from fusion under the default protocol.
        let dir = tempfile::tempdir().unwrap();
        let graph = sbm_generate(
            &[30, 30],
            0.15,
            0.08,
            3,
            Some(&SbmAttributeModel {
                dimension: 48,
                flip_probability: 0.25,
            }),
        )
        .unwrap();
        let path = dir.path().join("weak.graph");
        save_canonical(&graph, &path).unwrap();
        let config = ExperimentConfig {
            datasets: vec![DatasetSpec {
                name: "weak".into(),
                source: DatasetSource::Canonical { path },
            }],
            restarts: 5,
            attribute_options: vec![
                AttributeOption::Measure(attrikernel::similarity::SimilarityMeasure::Cosine),
                AttributeOption::None,
            ],
            ..ExperimentConfig::default()
        };
        let output = run_experiment(&config).unwrap();
        let cosine = AttributeOption::Measure(attrikernel::similarity::SimilarityMeasure::Cosine);
        let kmeans_ari = output.table.kmeans_cell("weak").unwrap().ari.unwrap();
        for measure in ProximityMeasure::ALL {
            let fused = output
                .table
                .kernel_cell("weak", measure, cosine)
                .unwrap()
                .ari
                .unwrap();
            let plain = output
                .table
                .kernel_cell("weak", measure, AttributeOption::None)
                .unwrap()
                .ari
                .unwrap();
            assert!(
                fused - plain >= 0.5,
                "{measure}: fused {fused:.3} vs plain {plain:.3}"
            );
            assert!(
                fused >= kmeans_ari,
                "{measure}: fused {fused:.3} below k-means {kmeans_ari:.3}"
            );
        }
    }

    #[test]
    fn ties_resolve_to_smallest_alpha_even_in_unsorted_grids() {
        // Two well-separated cliques tied together: every alpha recovers the
        // split perfectly, so the tie must fall to the smallest alpha no
        // matter how the override grid is ordered.
        let dir = tempfile::tempdir().unwrap();
        let graph = sbm_generate(&[10, 10], 1.0, 0.02, 21, None).unwrap();
        let path = dir.path().join("cliques.graph");
        save_canonical(&graph, &path).unwrap();
        let mut config = ExperimentConfig {
            datasets: vec![DatasetSpec {
                name: "cliques".into(),
                source: DatasetSource::Canonical { path },
            }],
            restarts: 3,
            kernels: vec![ProximityMeasure::Heat],
            attribute_options: vec![AttributeOption::None],
            run_kmeans: false,
            ..ExperimentConfig::default()
        };
        config.rank.include_kmeans = false;
        config
            .alpha_overrides
            .insert(ProximityMeasure::Heat, vec![2.0, 0.25, 1.0]);
        let output = run_experiment(&config).unwrap();
        let cell = &output.cells[0];
        assert_eq!(cell.best_ari, Some(1.0));
        assert_eq!(cell.best_alpha, Some(0.25));
    }

    #[test]
    fn no_option_ignores_beta() {
        let dir = tempfile::tempdir().unwrap();
        let spec = synthetic_dataset(dir.path(), 9);
        let mut config = quick_config(vec![spec]);
        config.attribute_options = vec![AttributeOption::None];
        config.run_kmeans = false;
        config.rank.include_kmeans = false;

        config.beta = 0.1;
        let low = run_experiment(&config).unwrap();
        config.beta = 0.9;
        let high = run_experiment(&config).unwrap();
        for (a, b) in low.cells.iter().zip(high.cells.iter()) {
            assert_eq!(a.best_ari, b.best_ari);
            assert_eq!(a.best_alpha, b.best_alpha);
        }
    }

    #[test]
    fn determinism_across_runs() {
        let dir = tempfile::tempdir().unwrap();
        let config = quick_config(vec![synthetic_dataset(dir.path(), 2)]);
        let first = run_experiment(&config).unwrap();
        let second = run_experiment(&config).unwrap();
        for (a, b) in first.cells.iter().zip(second.cells.iter()) {
            assert_eq!(a.best_ari, b.best_ari);
            assert_eq!(a.best_alpha, b.best_alpha);
            assert_eq!(a.seed, b.seed);
        }
    }

    #[test]
    fn missing_dataset_is_a_data_error() {
        let spec = DatasetSpec {
            name: "ghost".into(),
            source: DatasetSource::Canonical {
                path: PathBuf::from("/nonexistent/ghost.graph"),
            },
        };
        let config = quick_config(vec![spec]);
        assert!(matches!(run_experiment(&config), Err(CliError::Data(_))));
    }
}
