//! Attributed graphs: the in-memory [`Graph`] type, dataset readers/writers and
//! the attribute/adjacency preprocessing applied before training.
//!
//! Attributes are stored node-major (`N x d`, one row per node). Datasets that
//! publish a feature-major matrix are transposed once when they are read.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use log::warn;
use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PACKED_MAGIC: &[u8; 8] = b"NCAGCPK\x01";

/// File extension used for packed-archive datasets.
pub const PACKED_EXTENSION: &str = "ncagc";

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    pub name: String,
    /// `N x d`, one row per node.
    pub attributes: Array2<f64>,
    /// `N x N`, symmetric, entries in {0, 1}.
    pub adjacency: Array2<u8>,
    pub labels: Option<Vec<usize>>,
    pub num_clusters: usize,
}

impl Graph {
    /// Builds a graph and checks every invariant.
    pub fn new(
        name: impl Into<String>,
        attributes: Array2<f64>,
        adjacency: Array2<u8>,
        labels: Option<Vec<usize>>,
        num_clusters: usize,
    ) -> Result<Self> {
        let graph = Graph {
            name: name.into(),
            attributes,
            adjacency,
            labels,
            num_clusters,
        };
        graph.validate()?;
        Ok(graph)
    }

    /// Builds a graph from an undirected edge list. Edges are symmetrized.
    pub fn from_edges(
        name: impl Into<String>,
        attributes: Array2<f64>,
        edges: &[(usize, usize)],
        labels: Option<Vec<usize>>,
        num_clusters: usize,
    ) -> Result<Self> {
        let n = attributes.nrows();
        let mut adjacency = Array2::<u8>::zeros((n, n));
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::Validation(format!(
                    "edge ({a}, {b}) references a node outside 0..{n}"
                )));
            }
            adjacency[[a, b]] = 1;
            adjacency[[b, a]] = 1;
        }
        Graph::new(name, attributes, adjacency, labels, num_clusters)
    }

    pub fn num_nodes(&self) -> usize {
        self.attributes.nrows()
    }

    pub fn num_features(&self) -> usize {
        self.attributes.ncols()
    }

    /// Number of undirected edges, self-loops excluded.
    pub fn num_edges(&self) -> usize {
        let n = self.num_nodes();
        let mut count = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                if self.adjacency[[i, j]] != 0 {
                    count += 1;
                }
            }
        }
        count
    }

    /// Undirected edge list with `i < j`, in row-major order.
    pub fn edge_list(&self) -> Vec<(usize, usize)> {
        let n = self.num_nodes();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i..n {
                if self.adjacency[[i, j]] != 0 {
                    edges.push((i, j));
                }
            }
        }
        edges
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.attributes.nrows();
        if self.adjacency.dim() != (n, n) {
            return Err(Error::Validation(format!(
                "adjacency is {:?} but there are {n} nodes",
                self.adjacency.dim()
            )));
        }
        if self.num_clusters < 2 {
            return Err(Error::Validation(format!(
                "num_clusters must be at least 2, got {}",
                self.num_clusters
            )));
        }
        if n < self.num_clusters {
            return Err(Error::Validation(format!(
                "{n} nodes cannot hold {} clusters",
                self.num_clusters
            )));
        }
        if let Some(pos) = self.attributes.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite attribute at node {}",
                pos / self.attributes.ncols().max(1)
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let v = self.adjacency[[i, j]];
                if v > 1 {
                    return Err(Error::Validation(format!(
                        "adjacency entry ({i}, {j}) = {v} is not binary"
                    )));
                }
                if j > i && v != self.adjacency[[j, i]] {
                    return Err(Error::Validation(format!(
                        "adjacency is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        if let Some(labels) = &self.labels {
            if labels.len() != n {
                return Err(Error::Validation(format!(
                    "{} labels for {n} nodes",
                    labels.len()
                )));
            }
            if let Some((node, &label)) = labels
                .iter()
                .enumerate()
                .find(|(_, &l)| l >= self.num_clusters)
            {
                return Err(Error::Validation(format!(
                    "label {label} of node {node} is outside [0, {})",
                    self.num_clusters
                )));
            }
        }
        Ok(())
    }

    /// Applies a node permutation: node `i` of the result is node `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Graph {
        let n = self.num_nodes();
        assert_eq!(perm.len(), n, "permutation length must equal node count");
        let attributes = self.attributes.select(Axis(0), perm);
        let adjacency = Array2::from_shape_fn((n, n), |(i, j)| self.adjacency[[perm[i], perm[j]]]);
        let labels = self
            .labels
            .as_ref()
            .map(|l| perm.iter().map(|&p| l[p]).collect());
        Graph {
            name: self.name.clone(),
            attributes,
            adjacency,
            labels,
            num_clusters: self.num_clusters,
        }
    }

    /// A planted-partition attributed graph: `k` equal clusters, intra-cluster
    /// edge probability `p_in`, inter-cluster `p_out`, and binary bag-of-words
    /// style attributes where each cluster favours its own block of features.
    pub fn planted_partition(
        nodes_per_cluster: usize,
        k: usize,
        num_features: usize,
        p_in: f64,
        p_out: f64,
        seed: u64,
    ) -> Result<Graph> {
        let n = nodes_per_cluster * k;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<usize> = (0..n).map(|i| i / nodes_per_cluster).collect();
        let block = (num_features / k).max(1);
        let attributes = Array2::from_shape_fn((n, num_features), |(i, f)| {
            let own = f / block == labels[i];
            let p = if own { 0.5 } else { 0.05 };
            if rng.gen::<f64>() < p {
                1.0
            } else {
                0.0
            }
        });
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let p = if labels[i] == labels[j] { p_in } else { p_out };
                if rng.gen::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        Graph::from_edges(
            format!("planted-{k}x{nodes_per_cluster}"),
            attributes,
            &edges,
            Some(labels),
            k,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetFormat {
    /// `<name>.cites` edge list next to a `<name>.content` feature table.
    EdgeListFeatureTable,
    /// Single gzip-compressed container, see [`save_packed`].
    PackedArchive,
}

impl DatasetFormat {
    /// Guesses the format from a path: files with the packed extension are
    /// archives, anything else is read as an edge-list/feature-table pair.
    pub fn detect(path: &Path) -> DatasetFormat {
        if path.extension().is_some_and(|e| e == PACKED_EXTENSION) {
            DatasetFormat::PackedArchive
        } else {
            DatasetFormat::EdgeListFeatureTable
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizeMode {
    #[default]
    None,
    RowL1,
    RowL2,
}

impl std::str::FromStr for NormalizeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(NormalizeMode::None),
            "row-l1" | "l1" => Ok(NormalizeMode::RowL1),
            "row-l2" | "l2" => Ok(NormalizeMode::RowL2),
            other => Err(Error::Config(format!("unknown normalization mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for NormalizeMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NormalizeMode::None => "none",
            NormalizeMode::RowL1 => "row-l1",
            NormalizeMode::RowL2 => "row-l2",
        })
    }
}

/// Reads a dataset from disk.
///
/// For [`DatasetFormat::EdgeListFeatureTable`], `path` is either a directory
/// containing one `*.content` file, or the shared path prefix of the pair
/// (`data/cora/cora` for `cora.cites` + `cora.content`).
pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<Graph> {
    match format {
        DatasetFormat::EdgeListFeatureTable => load_edge_list(path),
        DatasetFormat::PackedArchive => load_packed(path),
    }
}

/// Finds a dataset by name under `data_dir`: `<name>.ncagc`, `<name>/<name>.ncagc`,
/// or an edge-list pair under `<name>/`.
pub fn resolve_dataset(data_dir: &Path, name: &str) -> Result<(PathBuf, DatasetFormat)> {
    let candidates = [
        data_dir.join(format!("{name}.{PACKED_EXTENSION}")),
        data_dir.join(name).join(format!("{name}.{PACKED_EXTENSION}")),
    ];
    for c in candidates {
        if c.is_file() {
            return Ok((c, DatasetFormat::PackedArchive));
        }
    }
    let dir = data_dir.join(name);
    if dir.join(format!("{name}.content")).is_file() {
        return Ok((dir.join(name), DatasetFormat::EdgeListFeatureTable));
    }
    if dir.is_dir() {
        return Ok((dir, DatasetFormat::EdgeListFeatureTable));
    }
    Err(Error::io(
        data_dir.join(name),
        std::io::Error::new(std::io::ErrorKind::NotFound, "dataset not found"),
    ))
}

fn edge_list_paths(path: &Path) -> Result<(PathBuf, PathBuf, String)> {
    if path.is_dir() {
        let entries = fs::read_dir(path).map_err(|e| Error::io(path, e))?;
        let mut contents: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "content"))
            .collect();
        contents.sort();
        let content = contents.into_iter().next().ok_or_else(|| {
            Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "no .content file in directory"),
            )
        })?;
        let stem = content
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok((content.with_extension("cites"), content, stem))
    } else {
        let stem = path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let cites = PathBuf::from(format!("{}.cites", path.display()));
        let content = PathBuf::from(format!("{}.content", path.display()));
        Ok((cites, content, stem))
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn load_edge_list(path: &Path) -> Result<Graph> {
    let (cites_path, content_path, name) = edge_list_paths(path)?;

    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();
    let mut width: Option<usize> = None;

    for (lineno, line) in BufReader::new(open(&content_path)?).lines().enumerate() {
        let line = line.map_err(|e| Error::io(&content_path, e))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() < 3 {
            return Err(Error::Parse(format!(
                "{}:{}: expected node id, features and a label",
                content_path.display(),
                lineno + 1
            )));
        }
        let d = fields.len() - 2;
        match width {
            None => width = Some(d),
            Some(w) if w != d => {
                return Err(Error::Parse(format!(
                    "{}:{}: {d} features, previous rows had {w}",
                    content_path.display(),
                    lineno + 1
                )))
            }
            _ => {}
        }
        let values = fields[1..fields.len() - 1]
            .iter()
            .map(|v| {
                v.parse::<f64>().map_err(|_| {
                    Error::Parse(format!(
                        "{}:{}: bad feature value {v:?}",
                        content_path.display(),
                        lineno + 1
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if ids.insert(fields[0].to_string(), rows.len()).is_some() {
            return Err(Error::Parse(format!(
                "{}:{}: duplicate node id {}",
                content_path.display(),
                lineno + 1,
                fields[0]
            )));
        }
        rows.push(values);
        raw_labels.push(fields[fields.len() - 1].to_string());
    }

    let n = rows.len();
    let d = width.unwrap_or(0);
    let mut attributes = Array2::<f64>::zeros((n, d));
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            attributes[[i, j]] = *v;
        }
    }

    let classes: BTreeSet<&str> = raw_labels.iter().map(String::as_str).collect();
    let class_ids: BTreeMap<&str, usize> = classes.iter().enumerate().map(|(i, c)| (*c, i)).collect();
    let labels: Vec<usize> = raw_labels.iter().map(|l| class_ids[l.as_str()]).collect();

    let mut adjacency = Array2::<u8>::zeros((n, n));
    let mut unknown = 0usize;
    let mut asymmetric = 0usize;
    let mut directed: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (lineno, line) in BufReader::new(open(&cites_path)?).lines().enumerate() {
        let line = line.map_err(|e| Error::io(&cites_path, e))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 2 {
            return Err(Error::Parse(format!(
                "{}:{}: expected two node ids",
                cites_path.display(),
                lineno + 1
            )));
        }
        match (ids.get(fields[0]), ids.get(fields[1])) {
            (Some(&a), Some(&b)) => {
                directed.insert((a, b));
                adjacency[[a, b]] = 1;
                adjacency[[b, a]] = 1;
            }
            _ => unknown += 1,
        }
    }
    for &(a, b) in &directed {
        if a != b && !directed.contains(&(b, a)) {
            asymmetric += 1;
        }
    }
    if unknown > 0 {
        warn!("{name}: skipped {unknown} edges that reference nodes without features");
    }
    if asymmetric > 0 {
        warn!("{name}: symmetrized {asymmetric} one-directional edges");
    }

    Graph::new(name, attributes, adjacency, Some(labels), classes.len())
}

#[derive(Debug, Serialize, Deserialize)]
enum PackedAttributes {
    Dense(Vec<f64>),
    Sparse {
        rows: Vec<u32>,
        cols: Vec<u32>,
        values: Vec<f64>,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct PackedGraph {
    name: String,
    num_nodes: u64,
    num_features: u64,
    num_clusters: u64,
    attributes: PackedAttributes,
    edges: Vec<(u32, u32)>,
    labels: Option<Vec<u32>>,
}

/// Writes `graph` as a packed archive: an 8-byte magic header followed by a
/// gzip stream of the bincode-encoded graph. Attributes are stored in COO form
/// when fewer than a quarter of the entries are nonzero.
pub fn save_packed(graph: &Graph, path: &Path) -> Result<()> {
    let (n, d) = graph.attributes.dim();
    let nnz = graph.attributes.iter().filter(|v| **v != 0.0).count();
    let attributes = if nnz * 4 < n * d {
        let mut rows = Vec::with_capacity(nnz);
        let mut cols = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for ((i, j), v) in graph.attributes.indexed_iter() {
            if *v != 0.0 {
                rows.push(i as u32);
                cols.push(j as u32);
                values.push(*v);
            }
        }
        PackedAttributes::Sparse { rows, cols, values }
    } else {
        PackedAttributes::Dense(graph.attributes.iter().copied().collect())
    };
    let packed = PackedGraph {
        name: graph.name.clone(),
        num_nodes: n as u64,
        num_features: d as u64,
        num_clusters: graph.num_clusters as u64,
        attributes,
        edges: graph
            .edge_list()
            .into_iter()
            .map(|(a, b)| (a as u32, b as u32))
            .collect(),
        labels: graph
            .labels
            .as_ref()
            .map(|l| l.iter().map(|&x| x as u32).collect()),
    };
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    writer.write_all(PACKED_MAGIC).map_err(|e| Error::io(path, e))?;
    let mut encoder = GzEncoder::new(writer, Compression::default());
    bincode::serialize_into(&mut encoder, &packed).map_err(|e| Error::Serde(e.to_string()))?;
    encoder
        .finish()
        .and_then(|mut w| w.flush())
        .map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn load_packed(path: &Path) -> Result<Graph> {
    let mut reader = BufReader::new(open(path)?);
    let mut magic = [0u8; 8];
    reader
        .read_exact(&mut magic)
        .map_err(|e| Error::io(path, e))?;
    if &magic != PACKED_MAGIC {
        return Err(Error::Parse(format!(
            "{} is not a packed graph archive",
            path.display()
        )));
    }
    let packed: PackedGraph = bincode::deserialize_from(GzDecoder::new(reader))
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;

    let n = packed.num_nodes as usize;
    let d = packed.num_features as usize;
    let attributes = match packed.attributes {
        PackedAttributes::Dense(values) => Array2::from_shape_vec((n, d), values)
            .map_err(|e| Error::Parse(format!("attribute block: {e}")))?,
        PackedAttributes::Sparse { rows, cols, values } => {
            let mut a = Array2::zeros((n, d));
            for ((r, c), v) in rows.iter().zip(&cols).zip(&values) {
                let (r, c) = (*r as usize, *c as usize);
                if r >= n || c >= d {
                    return Err(Error::Parse(format!(
                        "attribute entry ({r}, {c}) outside {n}x{d}"
                    )));
                }
                a[[r, c]] = *v;
            }
            a
        }
    };
    let edges: Vec<(usize, usize)> = packed
        .edges
        .iter()
        .map(|&(a, b)| (a as usize, b as usize))
        .collect();
    let labels = packed
        .labels
        .map(|l| l.into_iter().map(|x| x as usize).collect());
    Graph::from_edges(
        packed.name,
        attributes,
        &edges,
        labels,
        packed.num_clusters as usize,
    )
}

pub fn normalize_attributes(graph: &Graph, mode: NormalizeMode) -> Graph {
    let mut out = graph.clone();
    for mut row in out.attributes.rows_mut() {
        let norm = match mode {
            NormalizeMode::None => continue,
            NormalizeMode::RowL1 => row.iter().map(|v| v.abs()).sum::<f64>(),
            NormalizeMode::RowL2 => row.iter().map(|v| v * v).sum::<f64>().sqrt(),
        };
        if norm > 0.0 {
            row.mapv_inplace(|v| v / norm);
        }
    }
    out
}

/// Returns `adjacency` with its diagonal set to 1.
pub fn add_self_loops(adjacency: &Array2<u8>) -> Array2<u8> {
    let mut out = adjacency.clone();
    out.diag_mut().fill(1);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn write(dir: &Path, name: &str, body: &str) {
        fs::write(dir.join(name), body).unwrap();
    }

    #[test]
    fn two_node_toy_file() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "toy.content", "a 1 0 x\nb 0 1 y\n");
        write(dir.path(), "toy.cites", "a b\n");
        let g = load_dataset(dir.path(), DatasetFormat::EdgeListFeatureTable).unwrap();
        assert_eq!(g.adjacency, array![[0u8, 1], [1, 0]]);
        assert_eq!(g.num_clusters, 2);
        assert_eq!(g.labels, Some(vec![0, 1]));
        assert_eq!(g.name, "toy");

        let by_prefix = load_dataset(&dir.path().join("toy"), DatasetFormat::EdgeListFeatureTable).unwrap();
        assert_eq!(by_prefix, g);
    }

    #[test]
    fn directed_edges_are_symmetrized() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "g.content", "1 1 a\n2 1 a\n3 1 b\n");
        write(dir.path(), "g.cites", "1 2\n3 2\n2 3\n9 1\n");
        let g = load_dataset(dir.path(), DatasetFormat::EdgeListFeatureTable).unwrap();
        assert_eq!(g.num_edges(), 2);
        assert_eq!(g.adjacency[[1, 0]], 1);
        g.validate().unwrap();
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let err = load_dataset(Path::new("/nonexistent/cora"), DatasetFormat::EdgeListFeatureTable)
            .unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        let err = load_dataset(Path::new("/nonexistent/cora.ncagc"), DatasetFormat::PackedArchive)
            .unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn out_of_range_label_is_rejected() {
        let err = Graph::new(
            "bad",
            Array2::zeros((3, 2)),
            Array2::zeros((3, 3)),
            Some(vec![0, 1, 2]),
            2,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn invariants_are_checked() {
        let asym = array![[0u8, 1], [0, 0]];
        assert!(Graph::new("a", Array2::zeros((2, 1)), asym, None, 2).is_err());
        let nan = array![[f64::NAN], [0.0]];
        assert!(Graph::new("n", nan, Array2::zeros((2, 2)), None, 2).is_err());
        assert!(Graph::new("k", Array2::zeros((2, 1)), Array2::zeros((2, 2)), None, 3).is_err());
        assert!(Graph::new("k1", Array2::zeros((2, 1)), Array2::zeros((2, 2)), None, 1).is_err());
    }

    #[test]
    fn packed_round_trip_is_exact() {
        let g = Graph::planted_partition(6, 3, 12, 0.5, 0.05, 7).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.ncagc");
        save_packed(&g, &path).unwrap();
        let back = load_dataset(&path, DatasetFormat::PackedArchive).unwrap();
        assert_eq!(back, g);

        // dense attribute branch
        let mut dense = g.clone();
        dense.attributes.mapv_inplace(|v| v + 0.125);
        save_packed(&dense, &path).unwrap();
        assert_eq!(load_dataset(&path, DatasetFormat::PackedArchive).unwrap(), dense);
    }

    #[test]
    fn packed_rejects_foreign_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.ncagc");
        fs::write(&path, b"definitely not an archive").unwrap();
        assert!(matches!(
            load_dataset(&path, DatasetFormat::PackedArchive),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn normalization_modes() {
        let g = Graph::new(
            "n",
            array![[2.0, 2.0], [3.0, 4.0], [0.0, 0.0]],
            Array2::zeros((3, 3)),
            None,
            2,
        )
        .unwrap();
        let l1 = normalize_attributes(&g, NormalizeMode::RowL1);
        assert_eq!(l1.attributes.row(0).to_vec(), vec![0.5, 0.5]);
        assert_eq!(l1.attributes.row(2).to_vec(), vec![0.0, 0.0]);
        let l2 = normalize_attributes(&g, NormalizeMode::RowL2);
        assert!((l2.attributes[[1, 0]] - 0.6).abs() < 1e-15);
        assert!((l2.attributes[[1, 1]] - 0.8).abs() < 1e-15);
        assert_eq!(l2.attributes.row(2).to_vec(), vec![0.0, 0.0]);
        assert_eq!(normalize_attributes(&g, NormalizeMode::None), g);
    }

    #[test]
    fn self_loops() {
        assert_eq!(
            add_self_loops(&array![[0u8, 1], [1, 0]]),
            array![[1u8, 1], [1, 1]]
        );
        let eye = Array2::<u8>::eye(3);
        assert_eq!(add_self_loops(&eye), eye);
        let path = array![[0u8, 1, 0], [1, 0, 1], [0, 1, 0]];
        assert_eq!(
            add_self_loops(&path),
            array![[1u8, 1, 0], [1, 1, 1], [0, 1, 1]]
        );
    }

    #[test]
    fn preprocessing_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let g = Graph::planted_partition(5, 2, 8, 0.6, 0.1, 3).unwrap();
        let path = dir.path().join("g.ncagc");
        save_packed(&g, &path).unwrap();
        let run = || {
            let g = load_dataset(&path, DatasetFormat::PackedArchive).unwrap();
            let g = normalize_attributes(&g, NormalizeMode::RowL1);
            (g.clone(), add_self_loops(&g.adjacency))
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn resolve_finds_both_layouts() {
        let dir = tempfile::tempdir().unwrap();
        let g = Graph::planted_partition(3, 2, 4, 0.6, 0.1, 1).unwrap();
        save_packed(&g, &dir.path().join("toy.ncagc")).unwrap();
        let (p, f) = resolve_dataset(dir.path(), "toy").unwrap();
        assert_eq!(f, DatasetFormat::PackedArchive);
        assert_eq!(load_dataset(&p, f).unwrap(), g);

        fs::create_dir(dir.path().join("cora")).unwrap();
        write(&dir.path().join("cora"), "cora.content", "1 1 a\n2 0 b\n");
        write(&dir.path().join("cora"), "cora.cites", "1 2\n");
        let (p, f) = resolve_dataset(dir.path(), "cora").unwrap();
        assert_eq!(f, DatasetFormat::EdgeListFeatureTable);
        assert_eq!(load_dataset(&p, f).unwrap().num_nodes(), 2);

        assert!(resolve_dataset(dir.path(), "citeseer").is_err());
    }
}
