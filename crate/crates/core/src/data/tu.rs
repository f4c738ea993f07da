//! Reader for the TU benchmark text layout.
//!
//! A dataset `NAME` lives in one directory as:
//!
//! * `NAME_A.txt`: one edge `u, v` per line, node ids 1-based and global
//!   across the whole dataset;
//! * `NAME_graph_indicator.txt`: line `i` holds the 1-based graph id of node `i`;
//! * `NAME_graph_labels.txt`: one integer class label per graph;
//! * `NAME_node_labels.txt` (optional): one integer label per node;
//! * `NAME_node_attributes.txt` (optional): comma-separated floats per node.
//!
//! Both edge directions usually appear; duplicates collapse and self-loops
//! are dropped.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use super::{featurize, Dataset};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::matrix::Matrix;

fn file(dir: &Path, name: &str, suffix: &str) -> PathBuf {
    dir.join(format!("{name}_{suffix}.txt"))
}

fn read_required(path: &Path) -> Result<String> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    Ok(fs::read_to_string(path)?)
}

fn read_optional(path: &Path) -> Result<Option<String>> {
    if path.is_file() {
        Ok(Some(fs::read_to_string(path)?))
    } else {
        Ok(None)
    }
}

/// Non-empty lines with their 1-based line numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_err(path: &Path, line: usize, message: impl std::fmt::Display) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: format!("line {line}: {message}"),
    }
}

fn parse_fields<T: std::str::FromStr>(path: &Path, line: usize, text: &str) -> Result<Vec<T>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| parse_err(path, line, format!("cannot parse {s:?}")))
        })
        .collect()
}

fn parse_ints(path: &Path, text: &str) -> Result<Vec<i64>> {
    lines(text)
        .map(|(ln, l)| {
            let v: Vec<i64> = parse_fields(path, ln, l)?;
            match v.as_slice() {
                [x] => Ok(*x),
                _ => Err(parse_err(path, ln, "expected one integer")),
            }
        })
        .collect()
}

/// Loads dataset `name` from `dir`.
pub fn load_tu(dir: &Path, name: &str) -> Result<Dataset> {
    let a_path = file(dir, name, "A");
    let ind_path = file(dir, name, "graph_indicator");
    let lab_path = file(dir, name, "graph_labels");
    let a_text = read_required(&a_path)?;
    let ind_text = read_required(&ind_path)?;
    let lab_text = read_required(&lab_path)?;

    let indicator = parse_ints(&ind_path, &ind_text)?;
    let raw_labels = parse_ints(&lab_path, &lab_text)?;
    let num_graphs = raw_labels.len();

    // Graph of each node (0-based) and the node's index inside its graph.
    let mut graph_of = Vec::with_capacity(indicator.len());
    let mut local = Vec::with_capacity(indicator.len());
    let mut sizes = vec![0usize; num_graphs];
    for (node, &gid) in indicator.iter().enumerate() {
        if gid < 1 || gid as usize > num_graphs {
            return Err(parse_err(
                &ind_path,
                node + 1,
                format!("graph id {gid} outside 1..={num_graphs}"),
            ));
        }
        let g = gid as usize - 1;
        graph_of.push(g);
        local.push(sizes[g]);
        sizes[g] += 1;
    }

    let mut edges: Vec<BTreeSet<(usize, usize)>> = vec![BTreeSet::new(); num_graphs];
    for (ln, l) in lines(&a_text) {
        let ends: Vec<i64> = parse_fields(&a_path, ln, l)?;
        let [u, v] = ends[..] else {
            return Err(parse_err(&a_path, ln, "expected two node ids"));
        };
        let node = |x: i64| -> Result<usize> {
            if x < 1 || x as usize > indicator.len() {
                return Err(parse_err(
                    &a_path,
                    ln,
                    format!("node {x} outside 1..={}", indicator.len()),
                ));
            }
            Ok(x as usize - 1)
        };
        let (u, v) = (node(u)?, node(v)?);
        if graph_of[u] != graph_of[v] {
            return Err(parse_err(
                &a_path,
                ln,
                format!(
                    "edge {} {} joins graphs {} and {}",
                    u + 1,
                    v + 1,
                    graph_of[u] + 1,
                    graph_of[v] + 1
                ),
            ));
        }
        if u == v {
            continue;
        }
        let (a, b) = (local[u].min(local[v]), local[u].max(local[v]));
        edges[graph_of[u]].insert((a, b));
    }

    let node_labels = match read_optional(&file(dir, name, "node_labels"))? {
        Some(text) => {
            let path = file(dir, name, "node_labels");
            let l = parse_ints(&path, &text)?;
            if l.len() != indicator.len() {
                return Err(parse_err(
                    &path,
                    l.len(),
                    format!("{} labels for {} nodes", l.len(), indicator.len()),
                ));
            }
            Some(l)
        }
        None => None,
    };
    let attributes = match read_optional(&file(dir, name, "node_attributes"))? {
        Some(text) => {
            let path = file(dir, name, "node_attributes");
            let rows: Vec<Vec<f64>> = lines(&text)
                .map(|(ln, l)| parse_fields(&path, ln, l))
                .collect::<Result<_>>()?;
            if rows.len() != indicator.len() {
                return Err(parse_err(
                    &path,
                    rows.len(),
                    format!("{} rows for {} nodes", rows.len(), indicator.len()),
                ));
            }
            let width = rows.first().map_or(0, Vec::len);
            if let Some(i) = rows.iter().position(|r| r.len() != width) {
                return Err(parse_err(&path, i + 1, format!("expected {width} values")));
            }
            Some((rows, width))
        }
        None => None,
    };

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); num_graphs];
    for (node, &g) in graph_of.iter().enumerate() {
        members[g].push(node);
    }
    let mut graphs = Vec::with_capacity(num_graphs);
    let mut attr_mats = Vec::with_capacity(num_graphs);
    for (g, nodes) in members.iter().enumerate() {
        let mut graph = Graph::new(sizes[g], std::mem::take(&mut edges[g]))?;
        if let Some(l) = &node_labels {
            graph = graph.with_node_labels(nodes.iter().map(|&v| l[v]).collect())?;
        }
        if let Some((rows, width)) = &attributes {
            let data = nodes.iter().flat_map(|&v| rows[v].iter().copied()).collect();
            attr_mats.push(Matrix::from_vec(nodes.len(), *width, data)?);
        }
        graphs.push(graph);
    }
    let graphs = featurize(graphs, attributes.map(|_| attr_mats))?;
    let ds = Dataset::from_raw_labels(name, graphs, &raw_labels)?;
    log::info!(
        "loaded {name}: {} graphs, {} classes, d = {}",
        ds.len(),
        ds.num_classes,
        ds.feature_dim
    );
    Ok(ds)
}
