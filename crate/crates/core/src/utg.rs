//! UI transition graph: manifest format, validation and acyclic path
//! enumeration from the launch node.
//!
//! Manifest layout:
//!
//! ```json
//! {"launch": "A",
//!  "nodes": [{"id": "A", "screenshot": "shots/A.png", "label": "Home"}],
//!  "edges": [{"from": "A", "to": "B", "action": "tap:menu"}]}
//! ```

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtgNode {
    pub id: String,
    #[serde(rename = "screenshot")]
    pub screenshot_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtgEdge {
    pub from: String,
    pub to: String,
    pub action: String,
}

/// Serialized form of a [`Utg`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtgManifest {
    pub launch: String,
    pub nodes: Vec<UtgNode>,
    pub edges: Vec<UtgEdge>,
}

impl UtgManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathLimits {
    pub max_paths: usize,
    /// Maximum number of hops in an enumerated path.
    pub max_depth: usize,
}

impl Default for PathLimits {
    fn default() -> Self {
        Self {
            max_paths: 100_000,
            max_depth: 64,
        }
    }
}

/// An acyclic path together with the edge taken at every hop.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodePath {
    pub nodes: Vec<String>,
    pub edges: Vec<UtgEdge>,
}

impl NodePath {
    pub fn actions(&self) -> Vec<String> {
        self.edges.iter().map(|e| e.action.clone()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Utg {
    nodes: Vec<UtgNode>,
    edges: Vec<UtgEdge>,
    launch: usize,
    by_id: HashMap<String, usize>,
    /// `adjacency[u]` lists `(v, witnessing edge)` sorted by `v`'s id, one
    /// entry per distinct successor, self-loops dropped.
    adjacency: Vec<Vec<(usize, usize)>>,
    base_dir: PathBuf,
}

impl Utg {
    /// Validates the graph structure. Screenshot paths are resolved against
    /// `base_dir` but not opened.
    pub fn from_manifest(manifest: UtgManifest, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut problems = Vec::new();
        let mut by_id = HashMap::new();
        for (i, node) in manifest.nodes.iter().enumerate() {
            if by_id.insert(node.id.clone(), i).is_some() {
                problems.push(format!("duplicate node id {:?}", node.id));
            }
        }
        if !by_id.contains_key(&manifest.launch) {
            problems.push(format!("launch node {:?} is not a node", manifest.launch));
        }
        for (k, e) in manifest.edges.iter().enumerate() {
            for end in [&e.from, &e.to] {
                if !by_id.contains_key(end) {
                    problems.push(format!("edge #{k} references unknown node {end:?}"));
                }
            }
        }
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }

        let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); manifest.nodes.len()];
        for (k, e) in manifest.edges.iter().enumerate() {
            let (u, v) = (by_id[&e.from], by_id[&e.to]);
            if u != v && !adjacency[u].iter().any(|&(w, _)| w == v) {
                adjacency[u].push((v, k));
            }
        }
        for list in &mut adjacency {
            list.sort_by(|a, b| manifest.nodes[a.0].id.cmp(&manifest.nodes[b.0].id));
        }

        Ok(Self {
            launch: by_id[&manifest.launch],
            nodes: manifest.nodes,
            edges: manifest.edges,
            by_id,
            adjacency,
            base_dir: base_dir.into(),
        })
    }

    pub fn launch(&self) -> &str {
        &self.nodes[self.launch].id
    }

    pub fn nodes(&self) -> &[UtgNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[UtgEdge] {
        &self.edges
    }

    pub fn node(&self, id: &str) -> Option<&UtgNode> {
        self.by_id.get(id).map(|&i| &self.nodes[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.by_id.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Successor ids of `id` in enumeration order.
    pub fn successors(&self, id: &str) -> Vec<&str> {
        self.by_id
            .get(id)
            .map(|&u| {
                self.adjacency[u]
                    .iter()
                    .map(|&(v, _)| self.nodes[v].id.as_str())
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn screenshot_path(&self, node: &UtgNode) -> PathBuf {
        self.base_dir.join(&node.screenshot_path)
    }

    pub fn manifest(&self) -> UtgManifest {
        UtgManifest {
            launch: self.launch().to_string(),
            nodes: self.nodes.clone(),
            edges: self.edges.clone(),
        }
    }

    fn index(&self, id: &str) -> Result<usize> {
        self.by_id
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownNode(id.to_string()))
    }

    pub(crate) fn to_node_path(&self, path: &[usize]) -> NodePath {
        let edges = path
            .windows(2)
            .map(|hop| {
                let (_, k) = self.adjacency[hop[0]]
                    .iter()
                    .find(|&&(v, _)| v == hop[1])
                    .expect("hop follows adjacency");
                self.edges[*k].clone()
            })
            .collect();
        NodePath {
            nodes: path.iter().map(|&i| self.nodes[i].id.clone()).collect(),
            edges,
        }
    }
}

/// Reads and validates a manifest, checking that every screenshot exists and
/// has a decodable image header. All problems are reported together.
pub fn load_utg(manifest_path: &Path) -> Result<Utg> {
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: UtgManifest = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: manifest_path.to_path_buf(),
        source,
    })?;
    let base = manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();

    let mut problems: Vec<String> = match Utg::from_manifest(manifest.clone(), &base) {
        Ok(_) => Vec::new(),
        Err(Error::Validation(p)) => p,
        Err(e) => return Err(e),
    };
    for node in &manifest.nodes {
        let path = base.join(&node.screenshot_path);
        if let Err(e) = image::image_dimensions(&path) {
            problems.push(format!(
                "screenshot of node {:?} ({}) is unreadable: {e}",
                node.id,
                path.display()
            ));
        }
    }
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    Utg::from_manifest(manifest, base)
}

/// Every simple path from `start` to `target`, by depth-first search with
/// backtracking. Successors are expanded in id order, so the output order is
/// a function of the manifest alone.
pub fn enumerate_acyclic_paths(
    g: &Utg,
    start: &str,
    target: &str,
    limits: PathLimits,
) -> Result<Vec<NodePath>> {
    let paths = enumerate_index_paths(g, g.index(start)?, g.index(target)?, limits)?;
    Ok(paths.iter().map(|p| g.to_node_path(p)).collect())
}

pub(crate) fn enumerate_index_paths(
    g: &Utg,
    start: usize,
    target: usize,
    limits: PathLimits,
) -> Result<Vec<Vec<usize>>> {
    struct Search<'a> {
        g: &'a Utg,
        target: usize,
        limits: PathLimits,
        visited: Vec<bool>,
        path: Vec<usize>,
        found: Vec<Vec<usize>>,
    }

    impl Search<'_> {
        fn visit(&mut self, s: usize) -> Result<()> {
            if self.path.len() > self.limits.max_depth {
                return Err(Error::PathExplosion {
                    limit: "max_depth",
                    value: self.limits.max_depth,
                });
            }
            self.visited[s] = true;
            self.path.push(s);
            if s == self.target {
                if self.found.len() == self.limits.max_paths {
                    return Err(Error::PathExplosion {
                        limit: "max_paths",
                        value: self.limits.max_paths,
                    });
                }
                self.found.push(self.path.clone());
            } else {
                for k in 0..self.g.adjacency[s].len() {
                    let v = self.g.adjacency[s][k].0;
                    if !self.visited[v] {
                        self.visit(v)?;
                    }
                }
            }
            self.path.pop();
            self.visited[s] = false;
            Ok(())
        }
    }

    let mut search = Search {
        g,
        target,
        limits,
        visited: vec![false; g.len()],
        path: Vec::new(),
        found: Vec::new(),
    };
    search.visit(start)?;
    Ok(search.found)
}

/// Ids reachable from `start`, including itself.
pub fn reachable(g: &Utg, start: &str) -> Result<HashSet<String>> {
    let s = g.index(start)?;
    let mut seen = vec![false; g.len()];
    let mut stack = vec![s];
    seen[s] = true;
    while let Some(u) = stack.pop() {
        for &(v, _) in &g.adjacency[u] {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    Ok(seen
        .iter()
        .enumerate()
        .filter(|(_, &s)| s)
        .map(|(i, _)| g.nodes[i].id.clone())
        .collect())
}
