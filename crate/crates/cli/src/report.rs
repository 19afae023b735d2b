//! Report artifacts: the score table as CSV and Markdown, per-kernel rank
//! series, the top-pairs table, and a machine-readable run manifest.
//!
//! All output is deterministic for a fixed experiment output: fixed float
//! formats, fixed iteration orders, no timestamps.

use crate::config::ExperimentConfig;
use crate::experiment::{CellReport, ExperimentOutput};
use crate::CliError;
use attrikernel::evaluation::{AttributeOption, CellScore, RankSummary, ScoreTable};
use attrikernel::kernels::ProximityMeasure;
use serde::Serialize;
use std::fs;
use std::path::Path;

fn fmt_f64(value: f64) -> String {
    format!("{value:.6}")
}

/// Write `table1.csv`: one row per cell with its best score.
pub fn write_table_csv(
    table: &ScoreTable,
    dataset_order: &[String],
    path: &Path,
) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    writer
        .write_record([
            "dataset",
            "measure",
            "similarity",
            "best_ari",
            "best_alpha",
            "status",
        ])
        .map_err(|e| CliError::Data(e.to_string()))?;
    let mut write_cell = |dataset: &str,
                          measure: &str,
                          similarity: &str,
                          score: &CellScore|
     -> Result<(), CliError> {
        let (ari, alpha, status) = match score.ari {
            Some(ari) => (
                fmt_f64(ari),
                score.alpha.map(fmt_f64).unwrap_or_default(),
                "ok".to_string(),
            ),
            None => (
                String::new(),
                String::new(),
                format!("failed: {}", score.note.as_deref().unwrap_or("unknown")),
            ),
        };
        writer
            .write_record([dataset, measure, similarity, &ari, &alpha, &status])
            .map_err(|e| CliError::Data(e.to_string()))
    };

    for dataset in dataset_order {
        for measure in table.measures() {
            for option in table.options() {
                if let Some(score) = table.kernel_cell(dataset, measure, option) {
                    write_cell(dataset, measure.code(), option.code(), score)?;
                }
            }
        }
        if let Some(score) = table.kmeans_cell(dataset) {
            write_cell(dataset, "k-means", "", score)?;
        }
    }
    Ok(())
}

/// Write `table1.md`: one Markdown table per dataset, kernels as rows and
/// similarity options as columns, with the k-means baseline underneath.
pub fn write_table_markdown(
    table: &ScoreTable,
    dataset_order: &[String],
    path: &Path,
) -> Result<(), CliError> {
    let options = table.options();
    let mut out = String::from("# Clustering quality (best ARI per cell)\n");
    for dataset in dataset_order {
        out.push_str(&format!("\n## {dataset}\n\n"));
        out.push_str("| Measure |");
        for option in &options {
            out.push_str(&format!(" {} |", option.code()));
        }
        out.push('\n');
        out.push_str("|---|");
        for _ in &options {
            out.push_str("---|");
        }
        out.push('\n');
        for measure in table.measures() {
            out.push_str(&format!("| {} |", measure.code()));
            for option in &options {
                let text = match table.kernel_cell(dataset, measure, *option) {
                    Some(CellScore { ari: Some(ari), .. }) => format!("{ari:.3}"),
                    Some(_) => "failed".to_string(),
                    None => "-".to_string(),
                };
                out.push_str(&format!(" {text} |"));
            }
            out.push('\n');
        }
        if let Some(score) = table.kmeans_cell(dataset) {
            let text = match score.ari {
                Some(ari) => format!("{ari:.3}"),
                None => "failed".to_string(),
            };
            out.push_str(&format!("\nk-means (attributes only): {text}\n"));
        }
    }
    fs::write(path, out).map_err(CliError::Io)
}

/// Write one `fig1_<kernel>.csv` per proximity measure: the mean and standard
/// deviation of each option's rank across datasets.
pub fn write_rank_series(ranks: &RankSummary, dir: &Path) -> Result<(), CliError> {
    for kernel_ranking in &ranks.per_kernel {
        let path = dir.join(format!("fig1_{}.csv", kernel_ranking.measure.name()));
        let mut writer = csv::Writer::from_path(&path)
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
        writer
            .write_record(["option", "mean_rank", "std_rank"])
            .map_err(|e| CliError::Data(e.to_string()))?;
        for option in &kernel_ranking.options {
            writer
                .write_record([
                    option.option.code(),
                    &fmt_f64(option.mean),
                    &fmt_f64(option.std),
                ])
                .map_err(|e| CliError::Data(e.to_string()))?;
        }
    }
    Ok(())
}

/// Write `table2.csv`: (kernel, similarity) pairs sorted by average rank.
pub fn write_top_pairs(ranks: &RankSummary, path: &Path) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    writer
        .write_record(["rank", "measure", "similarity", "avg_rank"])
        .map_err(|e| CliError::Data(e.to_string()))?;
    for (idx, pair) in ranks.pairs.iter().enumerate() {
        writer
            .write_record([
                &(idx + 1).to_string(),
                pair.measure.code(),
                pair.similarity.code(),
                &fmt_f64(pair.mean_rank),
            ])
            .map_err(|e| CliError::Data(e.to_string()))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'static str,
    seed: u64,
    beta: f64,
    restarts: usize,
    kernels: Vec<&'static str>,
    similarities: Vec<&'static str>,
    run_kmeans: bool,
    fe_diagonal_correction: bool,
    rank_include_no: bool,
    rank_include_kmeans: bool,
    datasets: Vec<ManifestDataset>,
    dataset_notes: &'a [String],
    failed_cells: usize,
    cells: &'a [CellReport],
}

#[derive(Serialize)]
struct ManifestDataset {
    name: String,
    source: String,
}

/// Write `run.json`: the configuration, versions and seeds that produced the
/// artifacts plus the full per-cell grid, enough to audit any number in the
/// tables.
pub fn write_manifest(
    config: &ExperimentConfig,
    output: &ExperimentOutput,
    path: &Path,
) -> Result<(), CliError> {
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        seed: config.seed,
        beta: config.beta,
        restarts: config.restarts,
        kernels: config.kernels.iter().map(|k| k.code()).collect(),
        similarities: config.attribute_options.iter().map(|o| o.code()).collect(),
        run_kmeans: config.run_kmeans,
        fe_diagonal_correction: config.fe_diagonal_correction,
        rank_include_no: config.rank.include_no,
        rank_include_kmeans: config.rank.include_kmeans,
        datasets: config
            .datasets
            .iter()
            .map(|spec| ManifestDataset {
                name: spec.name.clone(),
                source: format!("{:?}", spec.source),
            })
            .collect(),
        dataset_notes: &output.dataset_notes,
        failed_cells: output.failed_cells,
        cells: &output.cells,
    };
    let json =
        serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Data(e.to_string()))?;
    fs::write(path, json + "\n").map_err(CliError::Io)
}

/// Emit every artifact of an experiment run into `config.output_dir`.
pub fn write_all(config: &ExperimentConfig, output: &ExperimentOutput) -> Result<(), CliError> {
    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(CliError::Io)?;
    let dataset_order: Vec<String> = config.datasets.iter().map(|d| d.name.clone()).collect();
    write_table_csv(&output.table, &dataset_order, &dir.join("table1.csv"))?;
    write_table_markdown(&output.table, &dataset_order, &dir.join("table1.md"))?;
    write_rank_series(&output.ranks, dir)?;
    write_top_pairs(&output.ranks, &dir.join("table2.csv"))?;
    write_manifest(config, output, &dir.join("run.json"))?;
    Ok(())
}

/// Read a score table from CSV. Accepts the `table1.csv` schema; the score
/// column may be named `best_ari` or `ari`, and rows with `measure` equal to
/// `k-means` feed the baseline cells.
pub fn read_score_table(path: &Path) -> Result<ScoreTable, CliError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Data(e.to_string()))?
        .clone();
    let find = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let dataset_col =
        find("dataset").ok_or_else(|| CliError::Data("missing `dataset` column".into()))?;
    let measure_col =
        find("measure").ok_or_else(|| CliError::Data("missing `measure` column".into()))?;
    let similarity_col =
        find("similarity").ok_or_else(|| CliError::Data("missing `similarity` column".into()))?;
    let ari_col = find("best_ari")
        .or_else(|| find("ari"))
        .ok_or_else(|| CliError::Data("missing `best_ari`/`ari` column".into()))?;
    let alpha_col = find("best_alpha").or_else(|| find("alpha"));

    let mut table = ScoreTable::new();
    for (row_no, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Data(e.to_string()))?;
        let context = |what: &str| format!("{}:{}: {what}", path.display(), row_no + 2);
        let dataset = record
            .get(dataset_col)
            .ok_or_else(|| CliError::Data(context("missing dataset")))?
            .to_string();
        let measure_text = record
            .get(measure_col)
            .ok_or_else(|| CliError::Data(context("missing measure")))?;
        let ari_text = record.get(ari_col).unwrap_or("").trim();
        let alpha_text = alpha_col.and_then(|c| record.get(c)).unwrap_or("").trim();
        let score = if ari_text.is_empty() {
            CellScore::failed("no score recorded")
        } else {
            let ari: f64 = ari_text
                .parse()
                .map_err(|_| CliError::Data(context("bad ARI value")))?;
            if !(-1.0..=1.0).contains(&ari) {
                return Err(CliError::Data(context(&format!(
                    "ARI {ari} outside [-1, 1]"
                ))));
            }
            let alpha: f64 = alpha_text.parse().unwrap_or(f64::NAN);
            CellScore::scored(ari, alpha)
        };
        if measure_text.eq_ignore_ascii_case("k-means")
            || measure_text.eq_ignore_ascii_case("kmeans")
        {
            table.insert_kmeans_cell(dataset, score);
            continue;
        }
        let measure: ProximityMeasure = measure_text
            .parse()
            .map_err(|e: String| CliError::Data(context(&e)))?;
        let similarity_text = record
            .get(similarity_col)
            .ok_or_else(|| CliError::Data(context("missing similarity")))?;
        let option = if similarity_text.is_empty() || similarity_text.eq_ignore_ascii_case("no") {
            AttributeOption::None
        } else {
            AttributeOption::Measure(
                similarity_text
                    .parse()
                    .map_err(|e| CliError::Data(context(&format!("{e}"))))?,
            )
        };
        table.insert_kernel_cell(dataset, measure, option, score);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use attrikernel::similarity::SimilarityMeasure;

    #[test]
    fn score_table_round_trips_through_csv() {
        let dir = tempfile::tempdir().unwrap();
        let mut table = ScoreTable::new();
        table.insert_kernel_cell(
            "d1",
            ProximityMeasure::Heat,
            AttributeOption::Measure(SimilarityMeasure::Cosine),
            CellScore::scored(0.472, 1.25),
        );
        table.insert_kernel_cell(
            "d1",
            ProximityMeasure::Heat,
            AttributeOption::None,
            CellScore::failed("kernel blew up"),
        );
        table.insert_kmeans_cell("d1", CellScore::scored(0.364, f64::NAN));
        let path = dir.path().join("t.csv");
        write_table_csv(&table, &["d1".to_string()], &path).unwrap();

        let restored = read_score_table(&path).unwrap();
        let cs = restored
            .kernel_cell(
                "d1",
                ProximityMeasure::Heat,
                AttributeOption::Measure(SimilarityMeasure::Cosine),
            )
            .unwrap();
        assert_eq!(cs.ari, Some(0.472));
        let no = restored
            .kernel_cell("d1", ProximityMeasure::Heat, AttributeOption::None)
            .unwrap();
        assert_eq!(no.ari, None);
        assert_eq!(restored.kmeans_cell("d1").unwrap().ari, Some(0.364));
    }

    #[test]
    fn read_rejects_missing_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(read_score_table(&path).is_err());
    }

    #[test]
    fn read_rejects_out_of_range_scores() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("range.csv");
        std::fs::write(&path, "dataset,measure,similarity,ari\nd1,Heat,CS,1.7\n").unwrap();
        assert!(read_score_table(&path).is_err());
    }
}
