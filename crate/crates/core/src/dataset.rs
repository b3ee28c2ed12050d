//! Node datasets and their on-disk formats.
//!
//! Five plain-text files describe a dataset:
//!
//! ```text
//! graph      # comments allowed, first line "n <count>", then "u v" per edge
//! features   "n f" followed by n rows of f reals
//! labels     "node_id class_name" per line
//! grouping   {"class_name": +1 | -1, ...}
//! split      {"train": [ids], "test": [ids]}
//! ```
//!
//! Multi-class labels are collapsed to `±1` through the grouping map.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{Error, Graph, Matrix, Result};

/// Mapping from raw class name to its binary label.
pub type Grouping = BTreeMap<String, i8>;

/// Train/test node ids, in file order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeDataset {
    features: Matrix,
    labels: Vec<Option<f64>>,
    raw_classes: Vec<Option<String>>,
    split: Split,
    grouping: Grouping,
    normalized: bool,
}

impl NodeDataset {
    /// Builds a dataset from binary labels directly. Every train and test node
    /// must carry a label.
    pub fn new(features: Matrix, labels: Vec<Option<f64>>, split: Split) -> Result<Self> {
        let raw = labels
            .iter()
            .map(|l| {
                l.map(|v| {
                    if v > 0.0 {
                        "+1".to_string()
                    } else {
                        "-1".to_string()
                    }
                })
            })
            .collect();
        let grouping = Grouping::from([("+1".to_string(), 1), ("-1".to_string(), -1)]);
        Self::assemble(features, labels, raw, split, grouping, false)
    }

    fn assemble(
        features: Matrix,
        labels: Vec<Option<f64>>,
        raw_classes: Vec<Option<String>>,
        split: Split,
        grouping: Grouping,
        normalized: bool,
    ) -> Result<Self> {
        let n = features.nrows();
        if labels.len() != n {
            return Err(Error::LengthMismatch {
                left: labels.len(),
                right: n,
            });
        }
        for l in labels.iter().flatten() {
            if *l != 1.0 && *l != -1.0 {
                return Err(Error::InvalidLabel(*l));
            }
        }
        validate_split(&split, n)?;
        for &id in split.train.iter().chain(&split.test) {
            if labels[id].is_none() {
                return Err(Error::InvalidArgument(format!(
                    "node {id} is in the split but has no label"
                )));
            }
        }
        Ok(Self {
            features,
            labels,
            raw_classes,
            split,
            grouping,
            normalized,
        })
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn train_ids(&self) -> &[usize] {
        &self.split.train
    }

    pub fn test_ids(&self) -> &[usize] {
        &self.split.test
    }

    pub fn split(&self) -> &Split {
        &self.split
    }

    pub fn grouping(&self) -> &Grouping {
        &self.grouping
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Binary label of every node, `None` when unlabeled.
    pub fn labels(&self) -> &[Option<f64>] {
        &self.labels
    }

    pub fn raw_classes(&self) -> &[Option<String>] {
        &self.raw_classes
    }

    /// Observed labels of the training nodes, in split order.
    pub fn y_obs(&self) -> Vec<f64> {
        self.split
            .train
            .iter()
            .map(|&i| self.labels[i].expect("validated"))
            .collect()
    }

    /// Held-out labels of the test nodes, in split order.
    pub fn y_test(&self) -> Vec<f64> {
        self.split
            .test
            .iter()
            .map(|&i| self.labels[i].expect("validated"))
            .collect()
    }

    /// Number of labeled nodes in the `+1` and `-1` groups.
    pub fn class_sizes(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|l| **l == Some(1.0)).count();
        let neg = self.labels.iter().filter(|l| **l == Some(-1.0)).count();
        (pos, neg)
    }

    /// Same dataset with L2-normalized feature rows; zero rows stay zero.
    pub fn normalized(mut self) -> Self {
        normalize_rows(&mut self.features);
        self.normalized = true;
        self
    }
}

/// Scales each nonzero row of `x` to unit L2 norm.
pub fn normalize_rows(x: &mut Matrix) {
    for mut row in x.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
}

fn validate_split(split: &Split, n: usize) -> Result<()> {
    let mut train = BTreeSet::new();
    for &id in &split.train {
        if id >= n {
            return Err(Error::IdOutOfRange {
                id,
                n,
                context: "train split",
            });
        }
        if !train.insert(id) {
            return Err(Error::DuplicateSplitId(id, "train"));
        }
    }
    let mut test = BTreeSet::new();
    for &id in &split.test {
        if id >= n {
            return Err(Error::IdOutOfRange {
                id,
                n,
                context: "test split",
            });
        }
        if train.contains(&id) {
            return Err(Error::OverlappingSplit(id));
        }
        if !test.insert(id) {
            return Err(Error::DuplicateSplitId(id, "test"));
        }
    }
    Ok(())
}

/// Locations of the five dataset files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DatasetPaths {
    pub graph: PathBuf,
    pub features: PathBuf,
    pub labels: PathBuf,
    pub grouping: PathBuf,
    pub split: PathBuf,
}

impl DatasetPaths {
    /// Conventional file names inside one directory.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        Self {
            graph: dir.join("graph.txt"),
            features: dir.join("features.txt"),
            labels: dir.join("labels.txt"),
            grouping: dir.join("grouping.json"),
            split: dir.join("split.json"),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Path> {
        [
            &self.graph,
            &self.features,
            &self.labels,
            &self.grouping,
            &self.split,
        ]
        .into_iter()
        .map(PathBuf::as_path)
    }
}

/// Reads all dataset files and maps raw classes to `±1` labels.
pub fn load_dataset(paths: &DatasetPaths, normalize: bool) -> Result<(Graph, NodeDataset)> {
    let graph = read_graph(&paths.graph)?;
    let mut features = read_features(&paths.features)?;
    if features.nrows() != graph.n() {
        return Err(Error::dims(
            format!("features file {}", paths.features.display()),
            format!("{} rows (graph nodes)", graph.n()),
            features.nrows(),
        ));
    }
    let grouping = read_grouping(&paths.grouping)?;
    let raw = read_labels(&paths.labels, graph.n())?;
    let mut labels = vec![None; graph.n()];
    let mut raw_classes = vec![None; graph.n()];
    for (line, id, class) in raw {
        let label = *grouping.get(&class).ok_or_else(|| Error::UnknownClass {
            path: paths.labels.clone(),
            line,
            class: class.clone(),
        })?;
        labels[id] = Some(f64::from(label));
        raw_classes[id] = Some(class);
    }
    let split = read_split(&paths.split)?;
    if normalize {
        normalize_rows(&mut features);
    }
    let dataset = NodeDataset::assemble(features, labels, raw_classes, split, grouping, normalize)?;
    Ok((graph, dataset))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_usize(path: &Path, line: usize, token: &str, what: &str) -> Result<usize> {
    token
        .parse()
        .map_err(|_| parse_err(path, line, format!("invalid {what} `{token}`")))
}

pub fn read_graph(path: &Path) -> Result<Graph> {
    let text = read_text(path)?;
    let mut n = None;
    let mut edges = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        match n {
            None => {
                if tokens.len() != 2 || tokens[0] != "n" {
                    return Err(parse_err(path, line, "expected header `n <count>`"));
                }
                n = Some(parse_usize(path, line, tokens[1], "node count")?);
            }
            Some(count) => {
                if tokens.len() != 2 {
                    return Err(parse_err(path, line, "expected `u v`"));
                }
                let u = parse_usize(path, line, tokens[0], "node id")?;
                let v = parse_usize(path, line, tokens[1], "node id")?;
                if u >= count || v >= count {
                    return Err(parse_err(
                        path,
                        line,
                        format!("edge ({u}, {v}) references a node outside 0..{count}"),
                    ));
                }
                if u == v {
                    return Err(parse_err(path, line, format!("self-loop on node {u}")));
                }
                edges.push((u, v));
            }
        }
    }
    let n = n.ok_or_else(|| parse_err(path, 1, "missing header `n <count>`"))?;
    Graph::new(n, edges)
}

pub fn write_graph(path: &Path, graph: &Graph) -> Result<()> {
    let mut out = format!("n {}\n", graph.n());
    for (u, v) in graph.edges() {
        writeln!(out, "{u} {v}").unwrap();
    }
    write_text(path, &out)
}

pub fn read_features(path: &Path) -> Result<Matrix> {
    let text = read_text(path)?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (line, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "missing header `n f`"))?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    if dims.len() != 2 {
        return Err(parse_err(path, line, "expected header `n f`"));
    }
    let n = parse_usize(path, line, dims[0], "row count")?;
    let f = parse_usize(path, line, dims[1], "column count")?;
    let mut data = Vec::with_capacity(n * f);
    let mut rows = 0;
    for (line, content) in lines {
        if rows == n {
            return Err(parse_err(path, line, format!("more than {n} feature rows")));
        }
        let before = data.len();
        for token in content.split_whitespace() {
            let v: f64 = token
                .parse()
                .map_err(|_| parse_err(path, line, format!("invalid real `{token}`")))?;
            data.push(v);
        }
        if data.len() - before != f {
            return Err(parse_err(
                path,
                line,
                format!("expected {f} values, found {}", data.len() - before),
            ));
        }
        rows += 1;
    }
    if rows != n {
        return Err(parse_err(
            path,
            text.lines().count(),
            format!("expected {n} feature rows, found {rows}"),
        ));
    }
    Ok(Matrix::from_row_slice(n, f, &data))
}

pub fn write_features(path: &Path, x: &Matrix) -> Result<()> {
    let mut out = format!("{} {}\n", x.nrows(), x.ncols());
    for row in x.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    write_text(path, &out)
}

/// Returns `(line, node_id, class_name)` triples.
pub fn read_labels(path: &Path, n: usize) -> Result<Vec<(usize, usize, String)>> {
    let text = read_text(path)?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.trim();
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(parse_err(path, line, "expected `node_id class_name`"));
        }
        let id = parse_usize(path, line, tokens[0], "node id")?;
        if id >= n {
            return Err(parse_err(
                path,
                line,
                format!("node id {id} outside 0..{n}"),
            ));
        }
        if !seen.insert(id) {
            return Err(parse_err(path, line, format!("node {id} labeled twice")));
        }
        out.push((line, id, tokens[1].to_string()));
    }
    Ok(out)
}

pub fn write_labels(path: &Path, raw_classes: &[Option<String>]) -> Result<()> {
    let mut out = String::new();
    for (id, class) in raw_classes.iter().enumerate() {
        if let Some(class) = class {
            writeln!(out, "{id} {class}").unwrap();
        }
    }
    write_text(path, &out)
}

/// Drops `+` signs in front of numbers outside string literals so that
/// `{"a": +1}` parses as JSON.
fn strip_plus_signs(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut in_string = false;
    let mut escaped = false;
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        if in_string {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
        } else if c == '"' {
            in_string = true;
        } else if c == '+' && chars.peek().is_some_and(|n| n.is_ascii_digit()) {
            continue;
        }
        out.push(c);
    }
    out
}

fn json_err(path: &Path, e: serde_json::Error) -> Error {
    parse_err(path, e.line().max(1), e.to_string())
}

pub fn read_grouping(path: &Path) -> Result<Grouping> {
    let text = strip_plus_signs(&read_text(path)?);
    let raw: BTreeMap<String, i64> = serde_json::from_str(&text).map_err(|e| json_err(path, e))?;
    raw.into_iter()
        .map(|(class, v)| match v {
            1 | -1 => Ok((class, v as i8)),
            other => Err(parse_err(
                path,
                1,
                format!("class `{class}` maps to {other}, expected +1 or -1"),
            )),
        })
        .collect()
}

pub fn write_grouping(path: &Path, grouping: &Grouping) -> Result<()> {
    let mut out = String::from("{\n");
    let entries: Vec<String> = grouping
        .iter()
        .map(|(class, v)| {
            let name = serde_json::to_string(class).expect("string serializes");
            format!("  {name}: {}", if *v > 0 { "+1" } else { "-1" })
        })
        .collect();
    out.push_str(&entries.join(",\n"));
    out.push_str("\n}\n");
    write_text(path, &out)
}

pub fn read_split(path: &Path) -> Result<Split> {
    serde_json::from_str(&read_text(path)?).map_err(|e| json_err(path, e))
}

pub fn write_split(path: &Path, split: &Split) -> Result<()> {
    let text = serde_json::to_string(split).expect("split serializes");
    write_text(path, &(text + "\n"))
}

/// Writes every file of `dataset` to `paths`, the inverse of [`load_dataset`].
pub fn save_dataset(paths: &DatasetPaths, graph: &Graph, dataset: &NodeDataset) -> Result<()> {
    write_graph(&paths.graph, graph)?;
    write_features(&paths.features, dataset.features())?;
    write_labels(&paths.labels, dataset.raw_classes())?;
    write_grouping(&paths.grouping, dataset.grouping())?;
    write_split(&paths.split, dataset.split())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    fn toy(dir: &Path) -> DatasetPaths {
        let paths = DatasetPaths::in_dir(dir);
        write(dir, "graph.txt", "# toy\nn 2\n0 1\n");
        write(dir, "features.txt", "2 2\n3 4\n1 0\n");
        write(dir, "labels.txt", "0 a\n1 b\n");
        write(dir, "grouping.json", "{\"a\": +1, \"b\": -1}\n");
        write(dir, "split.json", "{\"train\": [0], \"test\": [1]}\n");
        paths
    }

    #[test]
    fn loads_toy_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let paths = toy(dir.path());
        let (g, ds) = load_dataset(&paths, false).unwrap();
        assert_eq!(g.n(), 2);
        assert_eq!(ds.labels(), &[Some(1.0), Some(-1.0)]);
        assert_eq!(ds.y_obs(), vec![1.0]);
        assert_eq!(ds.y_test(), vec![-1.0]);
        assert_eq!(ds.features()[(0, 0)], 3.0);
        assert!(!ds.is_normalized());
    }

    #[test]
    fn normalizes_rows() {
        let dir = tempfile::tempdir().unwrap();
        let paths = toy(dir.path());
        let (_, ds) = load_dataset(&paths, true).unwrap();
        assert!((ds.features()[(0, 0)] - 0.6).abs() < 1e-15);
        assert!((ds.features()[(0, 1)] - 0.8).abs() < 1e-15);
        assert!(ds.is_normalized());
        let mut zero = Matrix::zeros(2, 3);
        zero[(1, 2)] = 2.0;
        normalize_rows(&mut zero);
        assert_eq!(zero.row(0).norm(), 0.0);
        assert!((zero.row(1).norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let paths = toy(dir.path());
        write(dir.path(), "graph.txt", "n 3\n0 1\n1 x\n");
        match load_dataset(&paths, false) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        write(dir.path(), "graph.txt", "0 1\n");
        assert!(matches!(
            load_dataset(&paths, false),
            Err(Error::Parse { line: 1, .. })
        ));
        write(dir.path(), "graph.txt", "n 2\n1 1\n");
        assert!(matches!(
            load_dataset(&paths, false),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn unknown_class_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let paths = toy(dir.path());
        write(dir.path(), "labels.txt", "0 a\n1 c\n");
        match load_dataset(&paths, false) {
            Err(Error::UnknownClass { class, line, .. }) => {
                assert_eq!(class, "c");
                assert_eq!(line, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn split_errors() {
        let dir = tempfile::tempdir().unwrap();
        let paths = toy(dir.path());
        write(dir.path(), "split.json", "{\"train\": [0], \"test\": [2]}");
        assert!(matches!(
            load_dataset(&paths, false),
            Err(Error::IdOutOfRange { id: 2, .. })
        ));
        write(
            dir.path(),
            "split.json",
            "{\"train\": [0, 1], \"test\": [1]}",
        );
        assert!(matches!(
            load_dataset(&paths, false),
            Err(Error::OverlappingSplit(1))
        ));
    }

    #[test]
    fn grouping_accepts_signed_values() {
        assert_eq!(strip_plus_signs("{\"a+1\": +1}"), "{\"a+1\": 1}");
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "g.json", "{\"x\": 2}");
        assert!(read_grouping(&p).is_err());
    }

    #[test]
    fn round_trips_bit_identically() {
        let dir = tempfile::tempdir().unwrap();
        let paths = toy(dir.path());
        write(
            dir.path(),
            "features.txt",
            "2 3\n0.1 -2.5e-300 3.141592653589793\n1e300 0 -0.3333333333333333\n",
        );
        let (g, ds) = load_dataset(&paths, false).unwrap();
        let out = tempfile::tempdir().unwrap();
        let paths2 = DatasetPaths::in_dir(out.path());
        save_dataset(&paths2, &g, &ds).unwrap();
        let (g2, ds2) = load_dataset(&paths2, false).unwrap();
        assert_eq!(g, g2);
        assert_eq!(ds, ds2);
        for (a, b) in ds.features().iter().zip(ds2.features().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let out3 = tempfile::tempdir().unwrap();
        let paths3 = DatasetPaths::in_dir(out3.path());
        save_dataset(&paths3, &g2, &ds2).unwrap();
        for (a, b) in paths2.iter().zip(paths3.iter()) {
            assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
        }
    }
}
