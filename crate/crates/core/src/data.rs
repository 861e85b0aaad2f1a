//! Labeled datasets: synthetic construction, TU-format ingestion,
//! preprocessing, splitting and on-disk storage.
//!
//! A stored dataset is a directory with
//!
//! ```text
//! manifest.json        format tag, version, build spec, one entry per graph
//! targets.csv          id,target,family,n
//! graphs/<id>.edges    edge list ("n m" header, then "i j" per edge)
//! ```
//!
//! Node features and the normalized adjacency are recomputed on load.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{build_feature_matrix, FeatureMatrix};
use crate::graph::{is_connected, ErDensity, Graph, GraphFamily};
use crate::kernels::{normalized_adjacency_sparse, SparseMatrix};
use crate::rng::Rng64;
use crate::spectral::{classify_region, label_graph_with, RegionLabel, RegionThresholds, SpectralConfig};

/// A graph with its model inputs and exact IPR target.
#[derive(Debug, Clone)]
pub struct LabeledGraph {
    pub id: String,
    pub graph: Graph,
    pub features: FeatureMatrix,
    /// Normalized adjacency `D̃^{-1/2}(A+I)D̃^{-1/2}`.
    pub ahat: SparseMatrix,
    pub target: f64,
    /// Family tag for synthetic graphs, dataset name for ingested ones.
    pub source: String,
    pub seed: u64,
}

impl PartialEq for LabeledGraph {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
            && self.graph == other.graph
            && self.target.to_bits() == other.target.to_bits()
            && self.source == other.source
            && self.seed == other.seed
    }
}

impl LabeledGraph {
    /// Label `graph` with the spectral oracle and compute its inputs.
    pub fn label(
        id: impl Into<String>,
        graph: Graph,
        source: impl Into<String>,
        seed: u64,
        cfg: &SpectralConfig,
    ) -> Result<Self> {
        let target = label_graph_with(&graph, cfg)?;
        Self::with_target(id, graph, source, seed, target)
    }

    /// Build from a known target, recomputing features.
    pub fn with_target(
        id: impl Into<String>,
        graph: Graph,
        source: impl Into<String>,
        seed: u64,
        target: f64,
    ) -> Result<Self> {
        let features = build_feature_matrix(&graph)?;
        let ahat = normalized_adjacency_sparse(&graph);
        Ok(Self {
            id: id.into(),
            graph,
            features,
            ahat,
            target,
            source: source.into(),
            seed,
        })
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn region(&self, th: &RegionThresholds) -> RegionLabel {
        classify_region(self.target, th)
    }

    /// Drop the label, keeping identity and structure.
    pub fn to_raw(&self) -> RawGraph {
        RawGraph {
            id: self.id.clone(),
            graph: self.graph.clone(),
            source: self.source.clone(),
        }
    }
}

/// An unlabeled graph read from an external dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct RawGraph {
    pub id: String,
    pub graph: Graph,
    pub source: String,
}

/// Size range and count of one split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub n_min: usize,
    pub n_max: usize,
    pub count: usize,
}

/// Recipe for a synthetic train/test dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub families: Vec<GraphFamily>,
    pub train: SplitSpec,
    pub test: SplitSpec,
    pub seed: u64,
    #[serde(default)]
    pub thresholds: RegionThresholds,
    #[serde(default)]
    pub spectral: SpectralConfig,
}

/// Default ER mean degree.
pub const DEFAULT_ER_MEAN_DEGREE: f64 = 8.0;

impl DatasetSpec {
    /// Cycle and star graphs, train n ∈ [50, 80] × 200, test n ∈ [100, 150] × 100.
    pub fn cycle_star_desk(seed: u64) -> Self {
        Self::desk(vec![GraphFamily::Cycle, GraphFamily::Star], seed)
    }

    /// Cycle, star, path and wheel at desk scale.
    pub fn four_family_desk(seed: u64) -> Self {
        Self::desk(
            vec![
                GraphFamily::Cycle,
                GraphFamily::Star,
                GraphFamily::Path,
                GraphFamily::Wheel,
            ],
            seed,
        )
    }

    /// ER (mean degree 8) and Barabási–Albert (m = 2) graphs at desk scale.
    pub fn er_sf_desk(seed: u64) -> Self {
        Self::desk(
            vec![
                GraphFamily::Er {
                    density: ErDensity::MeanDegree(DEFAULT_ER_MEAN_DEGREE),
                },
                GraphFamily::ScaleFree { m: 2 },
            ],
            seed,
        )
    }

    fn desk(families: Vec<GraphFamily>, seed: u64) -> Self {
        Self {
            families,
            train: SplitSpec {
                n_min: 50,
                n_max: 80,
                count: 200,
            },
            test: SplitSpec {
                n_min: 100,
                n_max: 150,
                count: 100,
            },
            seed,
            thresholds: RegionThresholds::default(),
            spectral: SpectralConfig::default(),
        }
    }

    /// Same families at full size: train n ∈ [200, 300] × 1000, test
    /// n ∈ [400, 500] × 500.
    pub fn paper_scale(mut self) -> Self {
        self.train = SplitSpec {
            n_min: 200,
            n_max: 300,
            count: 1000,
        };
        self.test = SplitSpec {
            n_min: 400,
            n_max: 500,
            count: 500,
        };
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.families.is_empty() {
            return Err(Error::InvalidParams("dataset needs at least one family".into()));
        }
        for f in &self.families {
            f.validate()?;
        }
        for (name, s) in [("train", &self.train), ("test", &self.test)] {
            if s.count == 0 {
                return Err(Error::InvalidSize(format!("{name} split needs at least one graph")));
            }
            if s.n_min > s.n_max {
                return Err(Error::InvalidSize(format!(
                    "{name} size range [{}, {}] is empty",
                    s.n_min, s.n_max
                )));
            }
            for f in &self.families {
                if s.n_min < f.min_size() {
                    return Err(Error::InvalidSize(format!(
                        "{name} sizes start at {} but {} graphs need n >= {}",
                        s.n_min,
                        f.tag(),
                        f.min_size()
                    )));
                }
            }
        }
        self.thresholds.validate()
    }
}

const MAX_RESAMPLES: u64 = 10_000;

/// Generate one split. Item `i` uses family `i mod |families|`, a size
/// drawn uniformly from the range, and for random families the first
/// connected instance among seeds derived from the item seed.
fn build_split(spec: &DatasetSpec, split: &SplitSpec, split_id: u64, prefix: &str) -> Result<Vec<LabeledGraph>> {
    let mut raw = Vec::with_capacity(split.count);
    for i in 0..split.count {
        let family = spec.families[i % spec.families.len()];
        let item_seed = Rng64::derive_seed(spec.seed, &[split_id, i as u64]);
        let mut rng = Rng64::new(item_seed);
        let n = rng.range_inclusive(split.n_min, split.n_max);
        let mut attempt = 0;
        let (graph, seed) = loop {
            let seed = Rng64::derive_seed(item_seed, &[attempt]);
            let g = family.generate(n, seed)?;
            if is_connected(&g) {
                break (g, seed);
            }
            attempt += 1;
            if attempt == MAX_RESAMPLES {
                return Err(Error::InvalidParams(format!(
                    "no connected {} graph on {n} nodes after {MAX_RESAMPLES} draws",
                    family.tag()
                )));
            }
        };
        raw.push((format!("{prefix}-{i:05}"), graph, family.tag(), seed));
    }
    raw.into_par_iter()
        .map(|(id, graph, tag, seed)| LabeledGraph::label(id, graph, tag, seed, &spec.spectral))
        .collect()
}

/// Build the train and test splits of `spec`. Deterministic in the seed.
pub fn build_synthetic(spec: &DatasetSpec) -> Result<(Vec<LabeledGraph>, Vec<LabeledGraph>)> {
    spec.validate()?;
    let train = build_split(spec, &spec.train, 0, "train")?;
    let test = build_split(spec, &spec.test, 1, "test")?;
    Ok((train, test))
}

fn find_with_suffix(dir: &Path, suffix: &str) -> Result<PathBuf> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut hits: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|s| s.to_str())
                .is_some_and(|s| s.ends_with(suffix))
        })
        .collect();
    hits.sort();
    match hits.len() {
        1 => Ok(hits.pop().unwrap_or_default()),
        0 => Err(Error::io(
            dir.join(format!("*{suffix}")),
            std::io::Error::new(std::io::ErrorKind::NotFound, "no matching file"),
        )),
        _ => Err(Error::InvalidInput(format!(
            "several *{suffix} files in {}",
            dir.display()
        ))),
    }
}

/// Split a line on commas and/or whitespace into integers.
fn parse_ints(line: &str, path: &Path, lineno: usize, expect: usize) -> Result<Vec<usize>> {
    let fields: Vec<&str> = line
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .collect();
    if fields.len() != expect {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: lineno,
            message: format!("expected {expect} integers, found {}", fields.len()),
        });
    }
    fields
        .iter()
        .map(|f| {
            f.parse::<usize>().map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                message: format!("{f:?}: {e}"),
            })
        })
        .collect()
}

/// Read a TU-format directory (`<DS>_A.txt`, `<DS>_graph_indicator.txt`,
/// 1-indexed). Self-loops are dropped and both edge orientations merged.
/// Node attributes and labels in other files are ignored.
pub fn ingest_tu_dataset(dir: impl AsRef<Path>) -> Result<Vec<RawGraph>> {
    let dir = dir.as_ref();
    let a_path = find_with_suffix(dir, "_A.txt")?;
    let ind_path = find_with_suffix(dir, "_graph_indicator.txt")?;
    let name = a_path
        .file_name()
        .and_then(|s| s.to_str())
        .and_then(|s| s.strip_suffix("_A.txt"))
        .unwrap_or("tu")
        .to_string();

    let ind_text = fs::read_to_string(&ind_path).map_err(|e| Error::io(&ind_path, e))?;
    // node (0-based) -> (graph id, local index)
    let mut node_graph: Vec<(usize, usize)> = Vec::new();
    let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
    for (k, line) in ind_text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let gid = parse_ints(line, &ind_path, k + 1, 1)?[0];
        let slot = sizes.entry(gid).or_insert(0);
        node_graph.push((gid, *slot));
        *slot += 1;
    }

    let a_text = fs::read_to_string(&a_path).map_err(|e| Error::io(&a_path, e))?;
    let mut edges: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for (k, line) in a_text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let pair = parse_ints(line, &a_path, k + 1, 2)?;
        let mut local = [(0usize, 0usize); 2];
        for (slot, &v) in local.iter_mut().zip(&pair) {
            if v == 0 || v > node_graph.len() {
                return Err(Error::Parse {
                    path: a_path.clone(),
                    line: k + 1,
                    message: format!("node {v} outside 1..={}", node_graph.len()),
                });
            }
            *slot = node_graph[v - 1];
        }
        let [(ga, a), (gb, b)] = local;
        if ga != gb {
            return Err(Error::Parse {
                path: a_path.clone(),
                line: k + 1,
                message: format!("edge joins graphs {ga} and {gb}"),
            });
        }
        if a != b {
            edges.entry(ga).or_default().push((a.min(b), a.max(b)));
        }
    }

    sizes
        .into_iter()
        .map(|(gid, n)| {
            let mut list = edges.remove(&gid).unwrap_or_default();
            list.sort_unstable();
            list.dedup();
            Ok(RawGraph {
                id: format!("{name}-{gid}"),
                graph: Graph::new(n, list)?,
                source: name.clone(),
            })
        })
        .collect()
}

/// Smallest graph kept by [`preprocess`].
pub const MIN_REAL_NODES: usize = 10;

/// Whether a raw graph survives preprocessing.
pub fn admissible(g: &Graph) -> bool {
    g.n() >= MIN_REAL_NODES && is_connected(g)
}

/// Keep connected graphs with at least ten nodes and label them.
pub fn preprocess(graphs: Vec<RawGraph>, cfg: &SpectralConfig) -> Result<Vec<LabeledGraph>> {
    graphs
        .into_par_iter()
        .filter(|r| admissible(&r.graph))
        .map(|r| LabeledGraph::label(r.id, r.graph, r.source, 0, cfg))
        .collect()
}

/// Seeded shuffle, then the first `round(fraction · N)` items go to train.
pub fn split<T>(mut items: Vec<T>, fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if items.is_empty() {
        return Err(Error::InvalidInput("cannot split an empty dataset".into()));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidParams(format!(
            "split fraction must lie in (0, 1), got {fraction}"
        )));
    }
    Rng64::new(seed).shuffle(&mut items);
    let cut = (fraction * items.len() as f64).round() as usize;
    let test = items.split_off(cut);
    Ok((items, test))
}

pub const DATASET_FORMAT: &str = "netloc-dataset";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub file: String,
    pub source: String,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    /// Build recipe, for synthetic datasets.
    #[serde(default)]
    pub spec: Option<DatasetSpec>,
    #[serde(default)]
    pub spectral: SpectralConfig,
    pub items: Vec<ManifestEntry>,
}

fn check_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        && !id.starts_with('.');
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("graph id {id:?} is not a safe file name")))
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Write `items` as a dataset directory, creating it if needed.
pub fn save_dataset(
    dir: impl AsRef<Path>,
    items: &[LabeledGraph],
    spec: Option<&DatasetSpec>,
) -> Result<()> {
    let dir = dir.as_ref();
    let graphs_dir = dir.join("graphs");
    fs::create_dir_all(&graphs_dir).map_err(|e| Error::io(&graphs_dir, e))?;
    let mut entries = Vec::with_capacity(items.len());
    let mut csv = String::from("id,target,family,n\n");
    for item in items {
        check_id(&item.id)?;
        let file = format!("graphs/{}.edges", item.id);
        write_file(&dir.join(&file), &item.graph.to_edge_list())?;
        let _ = writeln!(csv, "{},{},{},{}", item.id, item.target, item.source, item.n());
        entries.push(ManifestEntry {
            id: item.id.clone(),
            file,
            source: item.source.clone(),
            n: item.n(),
            m: item.graph.edge_count(),
            seed: item.seed,
            target: item.target,
        });
    }
    let manifest = Manifest {
        format: DATASET_FORMAT.into(),
        version: DATASET_VERSION,
        spec: spec.cloned(),
        spectral: spec.map(|s| s.spectral).unwrap_or_default(),
        items: entries,
    };
    write_file(&dir.join("targets.csv"), &csv)?;
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    write_file(&dir.join("manifest.json"), &json)
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<Manifest> {
    let path = dir.as_ref().join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::corrupt(&path, e.to_string()))?;
    if value.get("format").and_then(|v| v.as_str()) != Some(DATASET_FORMAT) {
        return Err(Error::corrupt(&path, "not a dataset manifest"));
    }
    let version = value
        .get("version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::corrupt(&path, "missing version"))?;
    if version != u64::from(DATASET_VERSION) {
        return Err(Error::VersionMismatch {
            found: u32::try_from(version).unwrap_or(u32::MAX),
            expected: DATASET_VERSION,
        });
    }
    serde_json::from_value(value).map_err(|e| Error::corrupt(&path, e.to_string()))
}

/// Fraction of items re-labeled and checked on load.
pub const VERIFY_FRACTION: f64 = 0.05;
/// Allowed difference between a stored and recomputed target.
pub const VERIFY_TOL: f64 = 1e-9;

/// Load a dataset directory. Every 20th item (at least one) is re-labeled
/// and must match its stored target within `1e-9`.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Vec<LabeledGraph>> {
    let dir = dir.as_ref();
    let manifest = read_manifest(dir)?;
    let csv_path = dir.join("targets.csv");
    let csv = fs::read_to_string(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    let rows: Vec<&str> = csv.lines().skip(1).filter(|l| !l.is_empty()).collect();
    if rows.len() != manifest.items.len() {
        return Err(Error::corrupt(
            &csv_path,
            format!("{} rows for {} manifest items", rows.len(), manifest.items.len()),
        ));
    }
    for (k, (row, entry)) in rows.iter().zip(&manifest.items).enumerate() {
        let fields: Vec<&str> = row.split(',').collect();
        let target: Option<f64> = fields.get(1).and_then(|t| t.parse().ok());
        if fields.len() != 4 || fields[0] != entry.id || target.map(f64::to_bits) != Some(entry.target.to_bits()) {
            return Err(Error::Parse {
                path: csv_path.clone(),
                line: k + 2,
                message: format!("row does not match manifest entry {:?}", entry.id),
            });
        }
    }
    let stride = (1.0 / VERIFY_FRACTION).round() as usize;
    let spectral = manifest.spectral;
    manifest
        .items
        .into_par_iter()
        .enumerate()
        .map(|(k, e)| {
            check_id(&e.id)?;
            let path = dir.join(&e.file);
            let graph = Graph::read_edge_list(&path)?;
            if graph.n() != e.n || graph.edge_count() != e.m {
                return Err(Error::corrupt(&path, "size differs from manifest"));
            }
            if k % stride == 0 {
                let fresh = label_graph_with(&graph, &spectral)?;
                if !((fresh - e.target).abs() <= VERIFY_TOL) {
                    return Err(Error::corrupt(
                        &path,
                        format!("stored target {} but oracle gives {fresh}", e.target),
                    ));
                }
            }
            LabeledGraph::with_target(e.id, graph, e.source, e.seed, e.target)
        })
        .collect()
}
