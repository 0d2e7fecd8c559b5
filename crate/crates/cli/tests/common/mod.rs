#![allow(dead_code)]

use std::ffi::OsStr;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use attrgraph::AttributedGraph;

pub struct GraphFiles {
    pub edges: PathBuf,
    pub features: PathBuf,
    pub labels: PathBuf,
}

pub fn write_graph(dir: &Path, g: &AttributedGraph) -> GraphFiles {
    let mut edges = format!("# n={} m={}\n", g.num_nodes(), g.num_attributes());
    for (u, v) in g.edges() {
        let _ = writeln!(edges, "{u}\t{v}");
    }
    let mut features = String::from("sparse\n");
    for (v, j, x) in g.features().triplets() {
        let _ = writeln!(features, "{v}\t{j}\t{x}");
    }
    let mut labels = String::new();
    if let Some(l) = g.labels() {
        for (v, c) in l.of_node.iter().enumerate() {
            if let Some(c) = c {
                let _ = writeln!(labels, "{v}\t{}", l.classes[*c]);
            }
        }
    }
    let files = GraphFiles {
        edges: dir.join("edges.tsv"),
        features: dir.join("features.tsv"),
        labels: dir.join("labels.tsv"),
    };
    fs::write(&files.edges, edges).unwrap();
    fs::write(&files.features, features).unwrap();
    fs::write(&files.labels, labels).unwrap();
    files
}

pub fn attrgraph<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_attrgraph"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// `--edges E --features F` as owned arguments.
pub fn data_args(f: &GraphFiles) -> Vec<String> {
    vec![
        "--edges".into(),
        f.edges.display().to_string(),
        "--features".into(),
        f.features.display().to_string(),
    ]
}

pub fn train_args(f: &GraphFiles, out: &Path, extra: &[&str]) -> Vec<String> {
    let mut a = vec!["train".to_string()];
    a.extend(data_args(f));
    a.extend(["--out-dir".to_string(), out.display().to_string()]);
    a.extend(extra.iter().map(|s| s.to_string()));
    a
}
