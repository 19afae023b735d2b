//! Dataset loaders (citation-style content/cites files, the crate's own
//! canonical graph format) and a stochastic-block-model generator used as
//! test plumbing.

use crate::graph::{Graph, GraphError};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{path}:{line}: node has {found} features, expected {expected}")]
    InconsistentFeatureCount {
        path: PathBuf,
        line: usize,
        found: usize,
        expected: usize,
    },
    #[error("unknown university: {0:?} (expected washington, wisconsin, cornell or texas)")]
    UnknownUniversity(String),
    #[error("{dataset}: {what} is {actual}, expected {expected}")]
    CountMismatch {
        dataset: String,
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("unsupported format version: {0:?}")]
    VersionMismatch(String),
    #[error("canonical file declares {what} = {declared} but contains {actual}")]
    IntegrityFailure {
        what: &'static str,
        declared: usize,
        actual: usize,
    },
    #[error("dataset contains no nodes")]
    EmptyGraph,
    #[error("edge probabilities must satisfy 0 <= p_out <= p_in <= 1, got p_in = {p_in}, p_out = {p_out}")]
    InvalidProbability { p_in: f64, p_out: f64 },
    #[error("block sizes must all be positive")]
    EmptyBlock,
    #[error("attribute flip probability must lie in [0, 1], got {0}")]
    InvalidFlipProbability(f64),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Expected shape of a known benchmark corpus. Loaders check their output
/// against these counts and fail loudly on a mismatch (edge counts are only
/// warned about: standard distributions count directed citations before
/// symmetrization collapses reciprocal pairs).
#[derive(Debug, Clone, Copy)]
pub struct DatasetDescriptor {
    pub name: &'static str,
    pub nodes: usize,
    pub edges: usize,
    pub attributes: usize,
    pub classes: usize,
}

const DESCRIPTORS: [DatasetDescriptor; 6] = [
    DatasetDescriptor {
        name: "washington",
        nodes: 230,
        edges: 446,
        attributes: 1703,
        classes: 5,
    },
    DatasetDescriptor {
        name: "wisconsin",
        nodes: 265,
        edges: 530,
        attributes: 1703,
        classes: 5,
    },
    DatasetDescriptor {
        name: "cornell",
        nodes: 195,
        edges: 304,
        attributes: 1703,
        classes: 5,
    },
    DatasetDescriptor {
        name: "texas",
        nodes: 187,
        edges: 328,
        attributes: 1703,
        classes: 5,
    },
    DatasetDescriptor {
        name: "citeseer",
        nodes: 3312,
        edges: 4732,
        attributes: 3703,
        classes: 6,
    },
    DatasetDescriptor {
        name: "cora",
        nodes: 2708,
        edges: 5429,
        attributes: 1433,
        classes: 7,
    },
];

pub fn descriptor(name: &str) -> Option<&'static DatasetDescriptor> {
    DESCRIPTORS.iter().find(|d| d.name == name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum University {
    Washington,
    Wisconsin,
    Cornell,
    Texas,
}

impl University {
    pub fn name(&self) -> &'static str {
        match self {
            University::Washington => "washington",
            University::Wisconsin => "wisconsin",
            University::Cornell => "cornell",
            University::Texas => "texas",
        }
    }
}

impl fmt::Display for University {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for University {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "washington" => Ok(University::Washington),
            "wisconsin" => Ok(University::Wisconsin),
            "cornell" => Ok(University::Cornell),
            "texas" => Ok(University::Texas),
            other => Err(DatasetError::UnknownUniversity(other.to_string())),
        }
    }
}

/// Bookkeeping from a citation load: what the raw files contained and what
/// was dropped or collapsed on the way to an undirected graph.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadStats {
    /// Citation lines referencing ids absent from the content file.
    pub dangling_citations: usize,
    /// Self-citations dropped.
    pub self_citations: usize,
    /// Directed citation lines kept (after dropping dangling and self).
    pub directed_citations: usize,
    /// Undirected edges after symmetrization.
    pub undirected_edges: usize,
}

#[derive(Debug, Clone)]
pub struct LoadedGraph {
    pub graph: Graph,
    pub stats: LoadStats,
}

fn read_lines(path: &Path) -> Result<Vec<String>, DatasetError> {
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(text.lines().map(|l| l.to_string()).collect())
}

/// Load a citation-style dataset.
///
/// The content file carries one node per line: `<id> <d feature values>
/// <class label>`, whitespace-delimited. The cites file carries one directed
/// citation per line: `<cited id> <citing id>`. Node order follows the
/// content file; labels map to dense ids in order of first appearance;
/// citations mentioning unknown ids are dropped and counted.
pub fn load_citation(content_path: &Path, cites_path: &Path) -> Result<LoadedGraph, DatasetError> {
    let content_lines = read_lines(content_path)?;
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut feature_rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut label_ids: HashMap<String, usize> = HashMap::new();
    let mut dimension: Option<usize> = None;

    for (line_no, line) in content_lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 3 {
            return Err(DatasetError::MalformedLine {
                path: content_path.to_path_buf(),
                line: line_no + 1,
                reason: format!(
                    "expected id, features and label, found {} fields",
                    fields.len()
                ),
            });
        }
        let id = fields[0];
        let label = fields[fields.len() - 1];
        let features = &fields[1..fields.len() - 1];
        match dimension {
            None => dimension = Some(features.len()),
            Some(d) if d != features.len() => {
                return Err(DatasetError::InconsistentFeatureCount {
                    path: content_path.to_path_buf(),
                    line: line_no + 1,
                    found: features.len(),
                    expected: d,
                });
            }
            _ => {}
        }
        let mut row = Vec::with_capacity(features.len());
        for value in features {
            let parsed: f64 = value.parse().map_err(|_| DatasetError::MalformedLine {
                path: content_path.to_path_buf(),
                line: line_no + 1,
                reason: format!("feature value {value:?} is not a number"),
            })?;
            row.push(parsed);
        }
        if ids.insert(id.to_string(), feature_rows.len()).is_some() {
            return Err(DatasetError::MalformedLine {
                path: content_path.to_path_buf(),
                line: line_no + 1,
                reason: format!("duplicate node id {id:?}"),
            });
        }
        feature_rows.push(row);
        let next_label = label_ids.len();
        labels.push(*label_ids.entry(label.to_string()).or_insert(next_label));
    }

    let n = feature_rows.len();
    if n == 0 {
        return Err(DatasetError::EmptyGraph);
    }
    let d = dimension.unwrap_or(0);

    let cites_lines = read_lines(cites_path)?;
    let mut stats = LoadStats::default();
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for (line_no, line) in cites_lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(DatasetError::MalformedLine {
                path: cites_path.to_path_buf(),
                line: line_no + 1,
                reason: format!("expected two ids, found {} fields", fields.len()),
            });
        }
        let (cited, citing) = (fields[0], fields[1]);
        match (ids.get(cited), ids.get(citing)) {
            (Some(&target), Some(&source)) => {
                if target == source {
                    stats.self_citations += 1;
                } else {
                    stats.directed_citations += 1;
                    edges.push((source, target, 1.0));
                }
            }
            _ => stats.dangling_citations += 1,
        }
    }

    let mut attributes = Array2::<f64>::zeros((n, d));
    for (i, row) in feature_rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            attributes[[i, j]] = v;
        }
    }

    let graph = Graph::from_edges(n, &edges)?
        .with_attributes(attributes)?
        .with_labels(labels)?;
    stats.undirected_edges = graph.edge_count();
    if stats.dangling_citations > 0 {
        log::warn!(
            "{}: dropped {} citations referencing unknown ids",
            cites_path.display(),
            stats.dangling_citations
        );
    }
    Ok(LoadedGraph { graph, stats })
}

/// Load one university graph of a WebKB-style distribution laid out as
/// `<dir>/<university>.content` and `<dir>/<university>.cites`.
///
/// Node, attribute and class counts are enforced against the registered
/// descriptor; the edge count is only compared and logged because published
/// figures count citations before symmetrization.
pub fn load_webkb(dir: &Path, university: University) -> Result<LoadedGraph, DatasetError> {
    let content = dir.join(format!("{}.content", university.name()));
    let cites = dir.join(format!("{}.cites", university.name()));
    let loaded = load_citation(&content, &cites)?;
    let descriptor = descriptor(university.name()).expect("registered university");
    enforce_descriptor(&loaded, descriptor)?;
    Ok(loaded)
}

/// Check a loaded graph against its descriptor: n, d and class count must
/// match exactly; m gets a warning when it differs.
pub fn enforce_descriptor(
    loaded: &LoadedGraph,
    descriptor: &DatasetDescriptor,
) -> Result<(), DatasetError> {
    let graph = &loaded.graph;
    if graph.node_count() != descriptor.nodes {
        return Err(DatasetError::CountMismatch {
            dataset: descriptor.name.to_string(),
            what: "node count",
            expected: descriptor.nodes,
            actual: graph.node_count(),
        });
    }
    let d = graph.attributes().map(|a| a.ncols()).unwrap_or(0);
    if d != descriptor.attributes {
        return Err(DatasetError::CountMismatch {
            dataset: descriptor.name.to_string(),
            what: "attribute dimension",
            expected: descriptor.attributes,
            actual: d,
        });
    }
    let classes = graph.class_count().unwrap_or(0);
    if classes != descriptor.classes {
        return Err(DatasetError::CountMismatch {
            dataset: descriptor.name.to_string(),
            what: "class count",
            expected: descriptor.classes,
            actual: classes,
        });
    }
    if graph.edge_count() != descriptor.edges {
        log::warn!(
            "{}: {} undirected edges after symmetrization (distribution reports {})",
            descriptor.name,
            graph.edge_count(),
            descriptor.edges
        );
    }
    Ok(())
}

const CANONICAL_MAGIC: &str = "attrikernel-graph";
const CANONICAL_VERSION: &str = "v1";

/// Write a graph in the canonical text format:
///
/// ```text
/// attrikernel-graph v1 n=<n> m=<m> d=<d>
/// E <i> <j> <w>      one line per undirected edge, i < j
/// F <i> <d values>   one line per node, when attributes are present
/// L <i> <label>      one line per node, when labels are present
/// ```
///
/// Weights and attribute values use the shortest decimal form that parses
/// back to the same f64, so save followed by load is bit-exact.
pub fn save_canonical(graph: &Graph, path: &Path) -> Result<(), DatasetError> {
    let n = graph.node_count();
    let m = graph.edge_count();
    let d = graph.attributes().map(|a| a.ncols()).unwrap_or(0);
    let mut out = String::new();
    out.push_str(&format!(
        "{CANONICAL_MAGIC} {CANONICAL_VERSION} n={n} m={m} d={d}\n"
    ));
    let a = graph.adjacency();
    for i in 0..n {
        for j in (i + 1)..n {
            if a[[i, j]] > 0.0 {
                out.push_str(&format!("E {i} {j} {}\n", a[[i, j]]));
            }
        }
    }
    if let Some(attributes) = graph.attributes() {
        for i in 0..n {
            out.push_str(&format!("F {i}"));
            for v in attributes.row(i).iter() {
                out.push_str(&format!(" {v}"));
            }
            out.push('\n');
        }
    }
    if let Some(labels) = graph.labels() {
        for (i, label) in labels.iter().enumerate() {
            out.push_str(&format!("L {i} {label}\n"));
        }
    }
    let mut file = fs::File::create(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    file.write_all(out.as_bytes())
        .map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    Ok(())
}

/// Load a graph saved by [`save_canonical`]. The header counts double as an
/// integrity check: a file whose body disagrees with its declared n/m/d is
/// rejected.
pub fn load_canonical(path: &Path) -> Result<Graph, DatasetError> {
    let lines = read_lines(path)?;
    let malformed = |line: usize, reason: String| DatasetError::MalformedLine {
        path: path.to_path_buf(),
        line,
        reason,
    };

    let header = lines
        .first()
        .ok_or_else(|| malformed(1, "empty file".to_string()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != CANONICAL_MAGIC {
        return Err(malformed(1, format!("bad header {header:?}")));
    }
    if fields[1] != CANONICAL_VERSION {
        return Err(DatasetError::VersionMismatch(fields[1].to_string()));
    }
    let parse_count = |field: &str, key: &str| -> Result<usize, DatasetError> {
        field
            .strip_prefix(&format!("{key}="))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| malformed(1, format!("bad header field {field:?}")))
    };
    let n = parse_count(fields[2], "n")?;
    let m = parse_count(fields[3], "m")?;
    let d = parse_count(fields[4], "d")?;
    if n == 0 {
        return Err(DatasetError::EmptyGraph);
    }

    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    let mut attributes: Option<Array2<f64>> = if d > 0 {
        Some(Array2::zeros((n, d)))
    } else {
        None
    };
    let mut attribute_rows = 0usize;
    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut label_count = 0usize;

    for (idx, line) in lines.iter().enumerate().skip(1) {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields[0] {
            "E" => {
                if fields.len() != 4 {
                    return Err(malformed(line_no, "edge line needs i j w".to_string()));
                }
                let i: usize = fields[1]
                    .parse()
                    .map_err(|_| malformed(line_no, "bad edge index".to_string()))?;
                let j: usize = fields[2]
                    .parse()
                    .map_err(|_| malformed(line_no, "bad edge index".to_string()))?;
                let w: f64 = fields[3]
                    .parse()
                    .map_err(|_| malformed(line_no, "bad edge weight".to_string()))?;
                edges.push((i, j, w));
            }
            "F" => {
                if fields.len() != d + 2 {
                    return Err(malformed(
                        line_no,
                        format!("attribute line needs {} values", d),
                    ));
                }
                let i: usize = fields[1]
                    .parse()
                    .map_err(|_| malformed(line_no, "bad node index".to_string()))?;
                let target = attributes
                    .as_mut()
                    .ok_or_else(|| malformed(line_no, "attributes not declared".to_string()))?;
                if i >= n {
                    return Err(malformed(line_no, "node index out of range".to_string()));
                }
                for (j, value) in fields[2..].iter().enumerate() {
                    target[[i, j]] = value
                        .parse()
                        .map_err(|_| malformed(line_no, "bad attribute value".to_string()))?;
                }
                attribute_rows += 1;
            }
            "L" => {
                if fields.len() != 3 {
                    return Err(malformed(line_no, "label line needs i label".to_string()));
                }
                let i: usize = fields[1]
                    .parse()
                    .map_err(|_| malformed(line_no, "bad node index".to_string()))?;
                if i >= n {
                    return Err(malformed(line_no, "node index out of range".to_string()));
                }
                labels[i] = Some(
                    fields[2]
                        .parse()
                        .map_err(|_| malformed(line_no, "bad label".to_string()))?,
                );
                label_count += 1;
            }
            other => {
                return Err(malformed(line_no, format!("unknown record kind {other:?}")));
            }
        }
    }

    if edges.len() != m {
        return Err(DatasetError::IntegrityFailure {
            what: "edge count",
            declared: m,
            actual: edges.len(),
        });
    }
    if d > 0 && attribute_rows != n {
        return Err(DatasetError::IntegrityFailure {
            what: "attribute rows",
            declared: n,
            actual: attribute_rows,
        });
    }
    if label_count > 0 && label_count != n {
        return Err(DatasetError::IntegrityFailure {
            what: "label count",
            declared: n,
            actual: label_count,
        });
    }

    let mut graph = Graph::from_edges(n, &edges)?;
    if graph.edge_count() != m {
        return Err(DatasetError::IntegrityFailure {
            what: "edge count",
            declared: m,
            actual: graph.edge_count(),
        });
    }
    if let Some(attributes) = attributes {
        graph = graph.with_attributes(attributes)?;
    }
    if label_count > 0 {
        let labels: Vec<usize> = labels.into_iter().map(|l| l.unwrap()).collect();
        graph = graph.with_labels(labels)?;
    }
    Ok(graph)
}

/// Per-block binary attribute prototypes with bit-flip noise for the SBM
/// generator.
#[derive(Debug, Clone, Copy)]
pub struct SbmAttributeModel {
    pub dimension: usize,
    pub flip_probability: f64,
}

/// Stochastic block model: nodes partitioned into blocks, an edge between two
/// nodes appears with probability `p_in` inside a block and `p_out` across
/// blocks. Labels are the block ids. When an attribute model is given, each
/// block draws a random binary prototype and each node copies it with
/// independent per-bit flips.
///
/// Deterministic for a fixed seed.
pub fn sbm_generate(
    block_sizes: &[usize],
    p_in: f64,
    p_out: f64,
    seed: u64,
    attribute_model: Option<&SbmAttributeModel>,
) -> Result<Graph, DatasetError> {
    if !(0.0..=1.0).contains(&p_in) || !(0.0..=1.0).contains(&p_out) || p_out > p_in {
        return Err(DatasetError::InvalidProbability { p_in, p_out });
    }
    if block_sizes.is_empty() || block_sizes.contains(&0) {
        return Err(DatasetError::EmptyBlock);
    }
    if let Some(model) = attribute_model {
        if !(0.0..=1.0).contains(&model.flip_probability) {
            return Err(DatasetError::InvalidFlipProbability(model.flip_probability));
        }
    }

    let n: usize = block_sizes.iter().sum();
    let mut labels = Vec::with_capacity(n);
    for (block, &size) in block_sizes.iter().enumerate() {
        labels.extend(std::iter::repeat_n(block, size));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Draw order is fixed (prototypes, attributes, edges) so a seed pins the
    // whole graph.
    let attributes = attribute_model.map(|model| {
        let k = block_sizes.len();
        let mut prototypes = Array2::<f64>::zeros((k, model.dimension));
        for v in prototypes.iter_mut() {
            if rng.random_bool(0.5) {
                *v = 1.0;
            }
        }
        let mut f = Array2::<f64>::zeros((n, model.dimension));
        for i in 0..n {
            let block = labels[i];
            for j in 0..model.dimension {
                let mut bit = prototypes[[block, j]];
                if model.flip_probability > 0.0 && rng.random_bool(model.flip_probability) {
                    bit = 1.0 - bit;
                }
                f[[i, j]] = bit;
            }
        }
        f
    });

    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if labels[i] == labels[j] { p_in } else { p_out };
            if p > 0.0 && rng.random::<f64>() < p {
                edges.push((i, j, 1.0));
            }
        }
    }

    let mut graph = Graph::from_edges(n, &edges)?;
    if let Some(attributes) = attributes {
        graph = graph.with_attributes(attributes)?;
    }
    graph = graph.with_labels(labels)?;
    Ok(graph)
}
