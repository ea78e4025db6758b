//! Dataset type and the plain-text dataset directory format.
//!
//! A dataset directory holds:
//!
//! * `graph.tsv`: one edge per line, `u<TAB>v`, 0-based node ids
//! * `features.tsv`: `node<TAB>feature` for every attribute equal to one
//!   (optional; when absent every node gets a single constant feature)
//! * `labels.tsv`: `node<TAB>class`
//! * `meta.json`: `{"n_nodes":N,"n_features":d,"n_classes":C,"name":"..."}`
//!
//! Blank lines and lines starting with `#` are ignored.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub name: String,
    pub graph: Graph,
    pub features: FeatureMatrix,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        graph: Graph,
        features: FeatureMatrix,
        labels: Vec<usize>,
        n_classes: usize,
    ) -> Result<Self> {
        let n = graph.n_nodes();
        if features.n_rows() != n || labels.len() != n {
            return Err(Error::dims(format!(
                "graph has {n} nodes, features {} rows, labels {}",
                features.n_rows(),
                labels.len()
            )));
        }
        if n_classes < 2 {
            return Err(Error::invalid("a dataset needs at least two classes"));
        }
        if let Some((i, &c)) = labels.iter().enumerate().find(|(_, &c)| c >= n_classes) {
            return Err(Error::invalid(format!(
                "node {i} has label {c} but there are {n_classes} classes"
            )));
        }
        Ok(Dataset {
            name: name.into(),
            graph,
            features,
            labels,
            n_classes,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.graph.n_nodes()
    }

    pub fn n_features(&self) -> usize {
        self.features.n_cols()
    }

    /// Node ids of each class, ascending.
    pub fn class_members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_classes];
        for (i, &c) in self.labels.iter().enumerate() {
            out[c].push(i);
        }
        out
    }

    pub fn with_graph(&self, graph: Graph) -> Dataset {
        Dataset {
            graph,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Meta {
    n_nodes: usize,
    n_features: usize,
    n_classes: usize,
    name: String,
}

fn parse_pairs(path: &Path) -> Result<Vec<(usize, (usize, usize))>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            msg,
        };
        let mut fields = line.split_whitespace();
        let mut next = || -> Result<usize> {
            let f = fields
                .next()
                .ok_or_else(|| parse_err("expected two integer fields".into()))?;
            f.parse()
                .map_err(|_| parse_err(format!("'{f}' is not a non-negative integer")))
        };
        let a = next()?;
        let b = next()?;
        if fields.next().is_some() {
            return Err(parse_err("expected exactly two fields".into()));
        }
        out.push((line_no, (a, b)));
    }
    Ok(out)
}

fn check(path: &Path, line: usize, ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: msg(),
        })
    }
}

/// Reads a dataset directory. Edges are symmetrized and deduplicated and
/// self-loops dropped.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let meta_path = dir.join("meta.json");
    let meta_text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: Meta = serde_json::from_str(&meta_text).map_err(|source| Error::Json {
        path: meta_path.clone(),
        source,
    })?;
    let n = meta.n_nodes;

    let graph_path = dir.join("graph.tsv");
    let mut edges = Vec::new();
    for (line, (u, v)) in parse_pairs(&graph_path)? {
        check(&graph_path, line, u < n && v < n, || {
            format!("node index out of range (n_nodes = {n})")
        })?;
        edges.push((u, v));
    }
    let graph = Graph::from_edges(n, edges)?;

    let feat_path = dir.join("features.tsv");
    let features = if feat_path.exists() {
        let d = meta.n_features;
        let mut entries = Vec::new();
        for (line, (i, f)) in parse_pairs(&feat_path)? {
            check(&feat_path, line, i < n, || {
                format!("node {i} out of range (n_nodes = {n})")
            })?;
            check(&feat_path, line, f < d, || {
                format!("feature {f} out of range (n_features = {d})")
            })?;
            entries.push((i, f));
        }
        FeatureMatrix::from_entries(n, d, entries)?
    } else {
        if meta.n_features > 1 {
            log::warn!(
                "{}: no features.tsv; using a constant feature instead of the {} declared",
                dir.display(),
                meta.n_features
            );
        }
        FeatureMatrix::ones(n, 1)
    };

    let labels_path = dir.join("labels.tsv");
    let mut labels: Vec<Option<usize>> = vec![None; n];
    let c = meta.n_classes;
    for (line, (i, class)) in parse_pairs(&labels_path)? {
        check(&labels_path, line, i < n, || {
            format!("node {i} out of range (n_nodes = {n})")
        })?;
        check(&labels_path, line, class < c, || {
            format!("class {class} out of range (n_classes = {c})")
        })?;
        check(
            &labels_path,
            line,
            labels[i].is_none_or(|old| old == class),
            || format!("node {i} given two different labels"),
        )?;
        labels[i] = Some(class);
    }
    let labels = labels
        .into_iter()
        .enumerate()
        .map(|(i, l)| {
            l.ok_or_else(|| Error::Parse {
                path: labels_path.clone(),
                line: 0,
                msg: format!("node {i} has no label"),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Dataset::new(meta.name, graph, features, labels, c)
}

fn create(path: PathBuf) -> Result<(PathBuf, BufWriter<fs::File>)> {
    let f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    Ok((path, BufWriter::new(f)))
}

/// Writes a dataset directory readable by [`load_dataset`].
pub fn save_dataset(ds: &Dataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let write_all = |name: &str, rows: &mut dyn Iterator<Item = (usize, usize)>| -> Result<()> {
        let (path, mut w) = create(dir.join(name))?;
        for (a, b) in rows {
            writeln!(w, "{a}\t{b}").map_err(|e| Error::io(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))
    };
    write_all("graph.tsv", &mut ds.graph.edges())?;
    write_all("features.tsv", &mut ds.features.entries())?;
    write_all("labels.tsv", &mut ds.labels.iter().copied().enumerate())?;

    let meta = Meta {
        n_nodes: ds.n_nodes(),
        n_features: ds.n_features(),
        n_classes: ds.n_classes,
        name: ds.name.clone(),
    };
    let path = dir.join("meta.json");
    let text = serde_json::to_string_pretty(&meta).map_err(|source| Error::Json {
        path: path.clone(),
        source,
    })?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_fixture(dir: &Path, graph: &str, features: Option<&str>, labels: &str, meta: &str) {
        fs::write(dir.join("graph.tsv"), graph).unwrap();
        if let Some(f) = features {
            fs::write(dir.join("features.tsv"), f).unwrap();
        }
        fs::write(dir.join("labels.tsv"), labels).unwrap();
        fs::write(dir.join("meta.json"), meta).unwrap();
    }

    const META2: &str = r#"{"n_nodes":2,"n_features":1,"n_classes":2,"name":"tiny"}"#;

    #[test]
    fn loads_tiny_fixture() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path(), "0\t1\n", Some("0\t0\n"), "0\t0\n1\t1\n", META2);
        let ds = load_dataset(dir.path()).unwrap();
        assert_eq!(
            (
                ds.n_nodes(),
                ds.graph.n_edges(),
                ds.n_features(),
                ds.n_classes
            ),
            (2, 1, 1, 2)
        );
        assert_eq!(ds.name, "tiny");
    }

    #[test]
    fn symmetrizes_duplicate_directions() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(
            dir.path(),
            "0\t1\n1\t0\n0\t0\n",
            Some(""),
            "0\t0\n1\t1\n",
            META2,
        );
        let ds = load_dataset(dir.path()).unwrap();
        assert_eq!(ds.graph.n_edges(), 1);
    }

    #[test]
    fn reports_bad_label_with_line() {
        let dir = tempfile::tempdir().unwrap();
        let meta = r#"{"n_nodes":2,"n_features":1,"n_classes":6,"name":"x"}"#;
        write_fixture(dir.path(), "0\t1\n", None, "0\t0\n1\t7\n", meta);
        match load_dataset(dir.path()) {
            Err(Error::Parse { path, line, .. }) => {
                assert!(path.ends_with("labels.tsv"));
                assert_eq!(line, 2);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn reports_other_errors() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path(), "0\t2\n", None, "0\t0\n1\t1\n", META2);
        assert!(matches!(
            load_dataset(dir.path()),
            Err(Error::Parse { line: 1, .. })
        ));
        write_fixture(dir.path(), "0\t1\n", Some("1\t3\n"), "0\t0\n1\t1\n", META2);
        assert!(matches!(
            load_dataset(dir.path()),
            Err(Error::Parse { line: 1, .. })
        ));
        fs::write(dir.path().join("features.tsv"), "1\t0\n").unwrap();
        fs::remove_file(dir.path().join("labels.tsv")).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::Io { .. })));
    }

    #[test]
    fn missing_features_become_constant() {
        let dir = tempfile::tempdir().unwrap();
        let meta = r#"{"n_nodes":3,"n_features":0,"n_classes":2,"name":"blogs"}"#;
        write_fixture(dir.path(), "0\t1\n2\t1\n", None, "0\t0\n1\t1\n2\t1\n", meta);
        let ds = load_dataset(dir.path()).unwrap();
        assert_eq!(ds.features, FeatureMatrix::ones(3, 1));
    }

    #[test]
    fn save_then_load_is_identity() {
        let g = Graph::from_edges(4, [(0, 1), (2, 3), (1, 3)]).unwrap();
        let x = FeatureMatrix::from_entries(4, 3, [(0, 0), (1, 2), (3, 1), (3, 2)]).unwrap();
        let ds = Dataset::new("rt", g, x, vec![0, 1, 1, 0], 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&ds, dir.path()).unwrap();
        assert_eq!(load_dataset(dir.path()).unwrap(), ds);
    }
}
