//! Knowledge arguments given on the command line.
//!
//! ```text
//! none | ones
//! matrix:PATH                      CSV knowledge matrix, used for every part
//! file:PATH                        JSON weight container (K individual + shared)
//! cohub:hubs=1,2[:gamma=4]         hubs=truth takes the hubs from the ground truth
//! perturbed:hubs=1,2[:gamma=4]
//! group:nodes=1,2,3[:gamma=4]
//! group:edges=1-2,3-4[:gamma=4]
//! ```
//!
//! Node numbers are 1-based.

use std::collections::BTreeSet;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use jeek::io::{read_csv_matrix, read_json, weights_from_container, MatrixContainer};
use jeek::kw_norm::{
    build_cohub_weights, build_group_weights, build_matrix_weights, build_perturbed_weights, group_edges,
};
use jeek::KnowledgeWeights;

#[derive(Debug, Clone, PartialEq)]
pub enum Nodes {
    Listed(BTreeSet<usize>),
    FromTruth,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Knowledge {
    Ones,
    Matrix(PathBuf),
    File(PathBuf),
    Cohub { hubs: Nodes, gamma: f64 },
    Perturbed { hubs: Nodes, gamma: f64 },
    Group { edges: Vec<(usize, usize)>, gamma: f64 },
}

fn parse_node(s: &str) -> Result<usize> {
    let n: usize = s.trim().parse().with_context(|| format!("bad node number {:?}", s))?;
    if n == 0 {
        bail!("node numbers are 1-based, got 0");
    }
    Ok(n - 1)
}

fn parse_nodes(s: &str) -> Result<Nodes> {
    if s == "truth" {
        return Ok(Nodes::FromTruth);
    }
    Ok(Nodes::Listed(s.split(',').map(parse_node).collect::<Result<_>>()?))
}

fn parse_edges(s: &str) -> Result<Vec<(usize, usize)>> {
    s.split(',')
        .map(|pair| {
            let (a, b) = pair.split_once('-').ok_or_else(|| anyhow!("edge {:?} is not of the form A-B", pair))?;
            Ok((parse_node(a)?, parse_node(b)?))
        })
        .collect()
}

impl Knowledge {
    /// Parses a spec; `gamma` applies when the spec does not set one.
    pub fn parse(spec: &str, gamma: f64) -> Result<Self> {
        let spec = spec.trim();
        match spec {
            "none" | "ones" => return Ok(Self::Ones),
            _ => {}
        }
        let (kind, rest) = spec.split_once(':').ok_or_else(|| anyhow!("unknown knowledge spec {:?}", spec))?;
        match kind {
            "matrix" => return Ok(Self::Matrix(PathBuf::from(rest))),
            "file" => return Ok(Self::File(PathBuf::from(rest))),
            _ => {}
        }
        let mut gamma = gamma;
        let mut nodes = None;
        let mut edges = None;
        for field in rest.split(':') {
            let (key, value) =
                field.split_once('=').ok_or_else(|| anyhow!("expected key=value in {:?}, got {:?}", spec, field))?;
            match key {
                "gamma" => gamma = value.parse().with_context(|| format!("bad gamma {:?}", value))?,
                "hubs" | "nodes" => nodes = Some(parse_nodes(value)?),
                "edges" => edges = Some(parse_edges(value)?),
                _ => bail!("unknown key {:?} in knowledge spec {:?}", key, spec),
            }
        }
        if !(gamma > 1.0) {
            bail!("gamma must be > 1, got {}", gamma);
        }
        let need_nodes = |nodes: Option<Nodes>| nodes.ok_or_else(|| anyhow!("{} knowledge needs hubs=...", kind));
        match kind {
            "cohub" => Ok(Self::Cohub { hubs: need_nodes(nodes)?, gamma }),
            "perturbed" => Ok(Self::Perturbed { hubs: need_nodes(nodes)?, gamma }),
            "group" => {
                let edges = match (nodes, edges) {
                    (_, Some(e)) => e,
                    (Some(Nodes::Listed(n)), None) => group_edges(&n),
                    _ => bail!("group knowledge needs nodes=... or edges=..."),
                };
                Ok(Self::Group { edges, gamma })
            }
            _ => bail!("unknown knowledge kind {:?}", kind),
        }
    }

    /// Builds the weights; `truth_hubs` (0-based) resolves `hubs=truth`.
    pub fn build(&self, p: usize, k: usize, truth_hubs: Option<&BTreeSet<usize>>) -> Result<KnowledgeWeights> {
        let resolve = |nodes: &Nodes| -> Result<BTreeSet<usize>> {
            match nodes {
                Nodes::Listed(n) => Ok(n.clone()),
                Nodes::FromTruth => truth_hubs.cloned().ok_or_else(|| anyhow!("hubs=truth needs a ground truth")),
            }
        };
        let w = match self {
            Self::Ones => KnowledgeWeights::ones(p, k),
            Self::Matrix(path) => {
                let (m, _) = read_csv_matrix(path).with_context(|| format!("reading {}", path.display()))?;
                build_matrix_weights(&m, k)?
            }
            Self::File(path) => {
                let c: MatrixContainer = read_json(path).with_context(|| format!("reading {}", path.display()))?;
                weights_from_container(&c)?
            }
            Self::Cohub { hubs, gamma } => build_cohub_weights(p, k, &resolve(hubs)?, *gamma)?,
            Self::Perturbed { hubs, gamma } => build_perturbed_weights(p, k, &resolve(hubs)?, *gamma)?,
            Self::Group { edges, gamma } => build_group_weights(p, k, edges, *gamma)?,
        };
        if w.p() != p || w.k() != k {
            bail!("knowledge weights are for p={}, K={} but the data has p={}, K={}", w.p(), w.k(), p, k);
        }
        Ok(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: &[usize]) -> BTreeSet<usize> {
        v.iter().copied().collect()
    }

    #[test]
    fn parses_specs() {
        assert_eq!(Knowledge::parse("none", 2.0).unwrap(), Knowledge::Ones);
        assert_eq!(
            Knowledge::parse("cohub:hubs=1,2:gamma=4", 2.0).unwrap(),
            Knowledge::Cohub { hubs: Nodes::Listed(set(&[0, 1])), gamma: 4.0 }
        );
        assert_eq!(
            Knowledge::parse("perturbed:hubs=truth", 10.0).unwrap(),
            Knowledge::Perturbed { hubs: Nodes::FromTruth, gamma: 10.0 }
        );
        assert_eq!(
            Knowledge::parse("group:edges=1-2,3-4:gamma=3", 2.0).unwrap(),
            Knowledge::Group { edges: vec![(0, 1), (2, 3)], gamma: 3.0 }
        );
        assert_eq!(
            Knowledge::parse("group:nodes=1,2,3", 2.0).unwrap(),
            Knowledge::Group { edges: vec![(0, 1), (0, 2), (1, 2)], gamma: 2.0 }
        );
        assert_eq!(Knowledge::parse("matrix:/tmp/w.csv", 2.0).unwrap(), Knowledge::Matrix("/tmp/w.csv".into()));
    }

    #[test]
    fn rejects_bad_specs() {
        for bad in ["cohub", "cohub:gamma=4", "cohub:hubs=0", "cohub:hubs=1:gamma=1", "bogus:x=1", "group:edges=1"] {
            assert!(Knowledge::parse(bad, 2.0).is_err(), "{}", bad);
        }
    }

    #[test]
    fn builds_cohub_like_library() {
        let w = Knowledge::parse("cohub:hubs=1,2:gamma=4", 2.0).unwrap().build(5, 2, None).unwrap();
        assert_eq!(w, build_cohub_weights(5, 2, &set(&[0, 1]), 4.0).unwrap());
        let from_truth = Knowledge::parse("cohub:hubs=truth", 4.0).unwrap();
        assert!(from_truth.build(5, 2, None).is_err());
        assert_eq!(from_truth.build(5, 2, Some(&set(&[0, 1]))).unwrap(), w);
    }
}
