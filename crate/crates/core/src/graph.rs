//! Attributed networks: validated construction, file loading and edge splits.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::Csr;
use crate::rng::{self, Stream};

/// Per-node class assignment. Nodes may be unlabeled.
#[derive(Debug, Clone, PartialEq)]
pub struct Labels {
    pub classes: Vec<String>,
    pub of_node: Vec<Option<usize>>,
}

impl Labels {
    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// Builds labels from integer class ids; classes are named by their id.
    pub fn from_ids(ids: &[usize]) -> Self {
        let k = ids.iter().copied().max().map_or(0, |x| x + 1);
        Labels {
            classes: (0..k).map(|c| c.to_string()).collect(),
            of_node: ids.iter().map(|&c| Some(c)).collect(),
        }
    }
}

/// Undirected binary network plus a sparse, signed node-by-attribute matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributedGraph {
    n: usize,
    m: usize,
    adjacency: Csr,
    features: Csr,
    labels: Option<Labels>,
}

impl AttributedGraph {
    /// Validates and assembles a graph. Edges may be listed in either or both
    /// directions; duplicates collapse. Zero-valued feature entries are dropped.
    pub fn new(
        n: usize,
        m: usize,
        edges: &[(usize, usize)],
        features: &[(usize, usize, f64)],
        labels: Option<Labels>,
    ) -> Result<Self> {
        let mut canon = BTreeSet::new();
        for &(u, v) in edges {
            if u >= n {
                return Err(Error::bounds("node", u, n));
            }
            if v >= n {
                return Err(Error::bounds("node", v, n));
            }
            if u == v {
                return Err(Error::Config(format!("self-loop on node {u}")));
            }
            canon.insert((u.min(v), u.max(v)));
        }
        let mut trip = Vec::with_capacity(canon.len() * 2);
        for &(u, v) in &canon {
            trip.push((u, v, 1.0));
            trip.push((v, u, 1.0));
        }
        let adjacency = Csr::from_triplets(n, n, &trip)?;

        let mut seen = HashSet::with_capacity(features.len());
        let mut ftrip = Vec::with_capacity(features.len());
        for &(v, j, x) in features {
            if v >= n {
                return Err(Error::bounds("node", v, n));
            }
            if j >= m {
                return Err(Error::bounds("attribute", j, m));
            }
            if !x.is_finite() {
                return Err(Error::Config(format!("non-finite feature value at ({v}, {j})")));
            }
            if !seen.insert((v, j)) {
                return Err(Error::Config(format!("duplicate feature entry ({v}, {j})")));
            }
            if x != 0.0 {
                ftrip.push((v, j, x));
            }
        }
        let features = Csr::from_triplets(n, m, &ftrip)?;

        if let Some(l) = &labels {
            if l.of_node.len() != n {
                return Err(Error::Dimension(format!(
                    "{} labels for {n} nodes",
                    l.of_node.len()
                )));
            }
            if let Some(c) = l.of_node.iter().flatten().find(|&&c| c >= l.classes.len()) {
                return Err(Error::bounds("class", *c, l.classes.len()));
            }
        }

        Ok(AttributedGraph {
            n,
            m,
            adjacency,
            features,
            labels,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn num_attributes(&self) -> usize {
        self.m
    }

    pub fn adjacency(&self) -> &Csr {
        &self.adjacency
    }

    pub fn features(&self) -> &Csr {
        &self.features
    }

    pub fn labels(&self) -> Option<&Labels> {
        self.labels.as_ref()
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.nnz() / 2
    }

    /// Undirected edges as `(min, max)` pairs, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.adjacency
            .triplets()
            .filter(|&(u, v, _)| u < v)
            .map(|(u, v, _)| (u, v))
            .collect()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n && v < self.n && self.adjacency.contains(u, v)
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        self.adjacency.row_indices(v)
    }

    pub fn degree(&self, v: usize) -> Result<usize> {
        if v >= self.n {
            return Err(Error::bounds("node", v, self.n));
        }
        Ok(self.adjacency.row_nnz(v))
    }

    /// Same nodes, features and labels with a different edge set.
    pub fn with_edges(&self, edges: &[(usize, usize)]) -> Result<Self> {
        let features: Vec<_> = self.features.triplets().collect();
        AttributedGraph::new(self.n, self.m, edges, &features, self.labels.clone())
    }

    /// Same nodes, edges and labels with a replacement feature matrix.
    pub fn with_features(&self, m: usize, features: &[(usize, usize, f64)]) -> Result<Self> {
        AttributedGraph::new(self.n, m, &self.edges(), features, self.labels.clone())
    }

    pub fn with_labels(mut self, labels: Option<Labels>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.of_node.len() != self.n {
                return Err(Error::Dimension(format!(
                    "{} labels for {} nodes",
                    l.of_node.len(),
                    self.n
                )));
            }
        }
        self.labels = labels;
        Ok(self)
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_index(path: &Path, line: usize, tok: &str, what: &str) -> Result<usize> {
    tok.parse::<usize>()
        .map_err(|_| parse_err(path, line, format!("invalid {what} index {tok:?}")))
}

fn parse_header(path: &Path, text: &str) -> Result<(Option<usize>, Option<usize>)> {
    let (mut n, mut m) = (None, None);
    for tok in text.trim_start_matches('#').split_whitespace() {
        let (key, val) = tok
            .split_once('=')
            .ok_or_else(|| parse_err(path, 1, format!("bad header token {tok:?}")))?;
        let val: usize = val
            .parse()
            .map_err(|_| parse_err(path, 1, format!("bad header value {val:?}")))?;
        match key {
            "n" => n = Some(val),
            "m" => m = Some(val),
            _ => return Err(parse_err(path, 1, format!("unknown header key {key:?}"))),
        }
    }
    Ok((n, m))
}

struct EdgeFile {
    n: Option<usize>,
    m: Option<usize>,
    edges: Vec<(usize, usize)>,
}

fn read_edges(path: &Path) -> Result<EdgeFile> {
    let text = read(path)?;
    let mut out = EdgeFile {
        n: None,
        m: None,
        edges: Vec::new(),
    };
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if lineno == 1 && rest.contains('=') {
                (out.n, out.m) = parse_header(path, line)?;
            }
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(parse_err(path, lineno, "expected \"src<TAB>dst\""));
        }
        let u = parse_index(path, lineno, toks[0], "node")?;
        let v = parse_index(path, lineno, toks[1], "node")?;
        if u == v {
            return Err(parse_err(path, lineno, format!("self-loop {u} {v}")));
        }
        out.edges.push((u, v));
    }
    Ok(out)
}

struct FeatureFile {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

fn read_features(path: &Path) -> Result<FeatureFile> {
    let text = read(path)?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hline, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty feature file"))?;
    let mut out = FeatureFile {
        rows: 0,
        cols: 0,
        entries: Vec::new(),
    };
    match header {
        "sparse" => {
            for (lineno, line) in lines {
                let toks: Vec<&str> = line.split_whitespace().collect();
                if toks.len() != 3 {
                    return Err(parse_err(path, lineno, "expected \"node<TAB>attr<TAB>value\""));
                }
                let v = parse_index(path, lineno, toks[0], "node")?;
                let j = parse_index(path, lineno, toks[1], "attribute")?;
                let x: f64 = toks[2]
                    .parse()
                    .map_err(|_| parse_err(path, lineno, format!("invalid value {:?}", toks[2])))?;
                if !x.is_finite() {
                    return Err(parse_err(path, lineno, "non-finite value"));
                }
                out.rows = out.rows.max(v + 1);
                out.cols = out.cols.max(j + 1);
                out.entries.push((v, j, x));
            }
        }
        "dense" => {
            let mut width = None;
            for (row, (lineno, line)) in lines.enumerate() {
                let vals = line
                    .split(',')
                    .map(|t| {
                        t.trim()
                            .parse::<f64>()
                            .ok()
                            .filter(|x| x.is_finite())
                            .ok_or_else(|| parse_err(path, lineno, format!("invalid value {t:?}")))
                    })
                    .collect::<Result<Vec<f64>>>()?;
                match width {
                    None => width = Some(vals.len()),
                    Some(w) if w != vals.len() => {
                        return Err(parse_err(
                            path,
                            lineno,
                            format!("expected {w} columns, found {}", vals.len()),
                        ))
                    }
                    _ => {}
                }
                for (j, x) in vals.into_iter().enumerate() {
                    if x != 0.0 {
                        out.entries.push((row, j, x));
                    }
                }
                out.rows = row + 1;
            }
            out.cols = width.unwrap_or(0);
        }
        other => {
            return Err(parse_err(
                path,
                hline,
                format!("expected header \"sparse\" or \"dense\", found {other:?}"),
            ))
        }
    }
    Ok(out)
}

fn read_labels(path: &Path) -> Result<Vec<(usize, String, usize)>> {
    let text = read(path)?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(parse_err(path, lineno, "expected \"node<TAB>label\""));
        }
        let v = parse_index(path, lineno, toks[0], "node")?;
        out.push((v, toks[1].to_string(), lineno));
    }
    Ok(out)
}

/// Loads an attributed graph from an edge file, a feature file and an
/// optional label file. Node and attribute counts come from the edge-file
/// header when present, otherwise from the largest index seen.
pub fn load_graph(
    edge_path: &Path,
    feature_path: &Path,
    label_path: Option<&Path>,
) -> Result<AttributedGraph> {
    let ef = read_edges(edge_path)?;
    let ff = read_features(feature_path)?;
    let lf = label_path.map(read_labels).transpose()?;

    let seen_n = ef
        .edges
        .iter()
        .map(|&(u, v)| u.max(v) + 1)
        .chain(std::iter::once(ff.rows))
        .chain(lf.iter().flatten().map(|(v, _, _)| v + 1))
        .max()
        .unwrap_or(0);
    let n = ef.n.unwrap_or(seen_n);
    let m = ef.m.unwrap_or(ff.cols);
    if ff.cols > m {
        return Err(Error::bounds("attribute", ff.cols - 1, m));
    }
    if let Some(&(u, v)) = ef.edges.iter().find(|&&(u, v)| u.max(v) >= n) {
        return Err(Error::bounds("node", u.max(v), n));
    }
    if ff.rows > n {
        return Err(Error::bounds("node", ff.rows - 1, n));
    }

    let labels = match lf {
        None => None,
        Some(rows) => {
            let names: BTreeSet<&str> = rows.iter().map(|(_, s, _)| s.as_str()).collect();
            let ids: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, s)| (*s, i)).collect();
            let mut of_node = vec![None; n];
            for (v, s, lineno) in &rows {
                if *v >= n {
                    return Err(Error::bounds("node", *v, n));
                }
                if of_node[*v].is_some() {
                    return Err(parse_err(
                        label_path.expect("labels read"),
                        *lineno,
                        format!("node {v} labeled twice"),
                    ));
                }
                of_node[*v] = Some(ids[s.as_str()]);
            }
            Some(Labels {
                classes: names.into_iter().map(str::to_string).collect(),
                of_node,
            })
        }
    };
    AttributedGraph::new(n, m, &ef.edges, &ff.entries, labels)
}

/// Fractions of undirected edges assigned to each split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitFractions {
    pub train: f64,
    pub test: f64,
    pub val: f64,
}

impl SplitFractions {
    /// 85/10/5 train/test/val.
    pub const LINK_PREDICTION: SplitFractions = SplitFractions {
        train: 0.85,
        test: 0.10,
        val: 0.05,
    };
    /// 95/5 train/val with no test edges.
    pub const CLASSIFICATION: SplitFractions = SplitFractions {
        train: 0.95,
        test: 0.0,
        val: 0.05,
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSplit {
    pub train_graph: AttributedGraph,
    pub val_pos: Vec<(usize, usize)>,
    pub val_neg: Vec<(usize, usize)>,
    pub test_pos: Vec<(usize, usize)>,
    pub test_neg: Vec<(usize, usize)>,
}

impl EdgeSplit {
    pub fn train_edges(&self) -> Vec<(usize, usize)> {
        self.train_graph.edges()
    }

    /// Replaces the training graph, keeping the held-out sets.
    pub fn with_train_graph(&self, train_graph: AttributedGraph) -> Self {
        EdgeSplit {
            train_graph,
            ..self.clone()
        }
    }
}

const MIN_SPLIT_EDGES: usize = 20;

fn portion(total: usize, frac: f64) -> usize {
    (total as f64 * frac + 1e-9).floor() as usize
}

/// Randomly partitions the undirected edges into train/test/val and samples
/// an equal number of non-edges for each held-out set.
pub fn split_edges(graph: &AttributedGraph, fr: SplitFractions, seed: u64) -> Result<EdgeSplit> {
    if [fr.train, fr.test, fr.val].iter().any(|f| !(0.0..=1.0).contains(f)) {
        return Err(Error::Config(format!("split fractions out of range: {fr:?}")));
    }
    if (fr.train + fr.test + fr.val - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split fractions do not sum to 1: {fr:?}")));
    }
    let mut edges = graph.edges();
    let total = edges.len();
    if total < MIN_SPLIT_EDGES {
        return Err(Error::Config(format!(
            "{total} edges; splitting needs at least {MIN_SPLIT_EDGES}"
        )));
    }
    let n_test = portion(total, fr.test);
    let n_val = portion(total, fr.val);
    if (fr.test > 0.0 && n_test == 0) || (fr.val > 0.0 && n_val == 0) || n_test + n_val >= total {
        return Err(Error::Config(format!(
            "{total} edges cannot fill a non-empty split {fr:?}"
        )));
    }

    let mut rng = rng::stream(seed, Stream::Split);
    edges.shuffle(&mut rng);
    let test_pos = edges[..n_test].to_vec();
    let val_pos = edges[n_test..n_test + n_val].to_vec();
    let train = &edges[n_test + n_val..];

    let negs = sample_non_edges(graph, n_test + n_val, &mut rng)?;
    let test_neg = negs[..n_test].to_vec();
    let val_neg = negs[n_test..].to_vec();

    Ok(EdgeSplit {
        train_graph: graph.with_edges(train)?,
        val_pos,
        val_neg,
        test_pos,
        test_neg,
    })
}

/// Distinct node pairs `(u, v)`, `u < v`, absent from the graph.
pub fn sample_non_edges<R: Rng>(
    graph: &AttributedGraph,
    count: usize,
    rng: &mut R,
) -> Result<Vec<(usize, usize)>> {
    let n = graph.num_nodes();
    let pairs = n * n.saturating_sub(1) / 2;
    let available = pairs - graph.num_edges();
    if available < count {
        return Err(Error::Config(format!(
            "requested {count} non-edges but only {available} exist"
        )));
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    if available < 4 * count {
        let mut all: Vec<(usize, usize)> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .filter(|&(u, v)| !graph.has_edge(u, v))
            .collect();
        all.shuffle(rng);
        all.truncate(count);
        return Ok(all);
    }
    let mut chosen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u == v || graph.has_edge(u, v) {
            continue;
        }
        let pair = (u.min(v), u.max(v));
        if chosen.insert(pair) {
            out.push(pair);
        }
    }
    Ok(out)
}
