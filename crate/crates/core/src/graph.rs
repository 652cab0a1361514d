//! Per-coordinate baseline networks: ingestion, validation, orientation and
//! spanning-tree gauge fixing.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised while reading or validating a network.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: self-loop on vertex {vertex}")]
    SelfLoop { line: u64, vertex: String },
    #[error("line {line}: duplicate baseline between {a} and {b}")]
    DuplicateArc { line: u64, a: String, b: String },
    #[error("empty vertex label")]
    EmptyLabel,
    #[error("non-finite weight on arc {tail}->{head}")]
    NonFiniteWeight { tail: String, head: String },
    #[error("arc references unknown vertex {0}")]
    UnknownVertex(String),
    #[error("duplicate vertex {0}")]
    DuplicateVertex(String),
    #[error("network is not weakly connected; unreachable from {root}: {}", unreachable.join(", "))]
    Disconnected {
        root: String,
        unreachable: Vec<String>,
    },
    #[error("network has no vertices")]
    Empty,
}

/// Label of a survey point.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexId(String);

impl VertexId {
    pub fn new(label: impl Into<String>) -> Result<Self, GraphError> {
        let label = label.into();
        if label.is_empty() {
            return Err(GraphError::EmptyLabel);
        }
        Ok(Self(label))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A measured baseline component from `tail` to `head`, in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub tail: VertexId,
    pub head: VertexId,
    pub weight: f64,
}

impl Arc {
    pub fn new(tail: VertexId, head: VertexId, weight: f64) -> Self {
        Self { tail, head, weight }
    }

    /// True when the arc joins `a` and `b` in either direction.
    pub fn joins(&self, a: &str, b: &str) -> bool {
        (self.tail.as_str() == a && self.head.as_str() == b)
            || (self.tail.as_str() == b && self.head.as_str() == a)
    }
}

/// Coordinate axis of a baseline file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coordinate {
    X,
    Y,
    Z,
}

impl Coordinate {
    pub const ALL: [Coordinate; 3] = [Coordinate::X, Coordinate::Y, Coordinate::Z];

    fn column(self) -> usize {
        match self {
            Coordinate::X => 0,
            Coordinate::Y => 1,
            Coordinate::Z => 2,
        }
    }
}

impl fmt::Display for Coordinate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Coordinate::X => "x",
            Coordinate::Y => "y",
            Coordinate::Z => "z",
        })
    }
}

impl FromStr for Coordinate {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "x" => Ok(Coordinate::X),
            "y" => Ok(Coordinate::Y),
            "z" => Ok(Coordinate::Z),
            other => Err(format!("unknown coordinate '{other}' (expected x, y or z)")),
        }
    }
}

/// One row of a baseline file.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRow {
    pub line: u64,
    pub from: VertexId,
    pub to: VertexId,
    /// One delta for single-coordinate files, three for `dx,dy,dz` files.
    pub deltas: Vec<f64>,
}

/// A parsed baseline file before projection onto one coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineTable {
    pub rows: Vec<BaselineRow>,
    /// True for `from,to,w` files.
    pub single_coordinate: bool,
}

impl BaselineTable {
    /// Parses the CSV text. Header is `from,to,dx,dy,dz` or `from,to,w`;
    /// lines starting with `#` are comments.
    pub fn parse(text: &str) -> Result<Self, GraphError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(text.as_bytes());

        let mut records = reader.records();
        let header = loop {
            match records.next() {
                None => {
                    return Err(GraphError::Parse {
                        line: 1,
                        message: "missing header".into(),
                    })
                }
                Some(rec) => {
                    let rec = rec.map_err(csv_error)?;
                    if rec.iter().all(str::is_empty) {
                        continue;
                    }
                    break rec;
                }
            }
        };
        let header_line = header.position().map_or(1, |p| p.line());
        let names: Vec<String> = header.iter().map(|s| s.to_ascii_lowercase()).collect();
        let single_coordinate = match names.iter().map(String::as_str).collect::<Vec<_>>()[..] {
            ["from", "to", "dx", "dy", "dz"] => false,
            ["from", "to", "w"] => true,
            _ => {
                return Err(GraphError::Parse {
                    line: header_line,
                    message: format!(
                        "unrecognized header '{}' (expected from,to,dx,dy,dz or from,to,w)",
                        names.join(",")
                    ),
                })
            }
        };
        let width = names.len();

        let mut rows = Vec::new();
        let mut seen: HashMap<(String, String), u64> = HashMap::new();
        for rec in records {
            let rec = rec.map_err(csv_error)?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.iter().all(str::is_empty) {
                continue;
            }
            if rec.len() != width {
                return Err(GraphError::Parse {
                    line,
                    message: format!("expected {width} fields, found {}", rec.len()),
                });
            }
            let from = VertexId::new(&rec[0]).map_err(|_| GraphError::Parse {
                line,
                message: "empty 'from' label".into(),
            })?;
            let to = VertexId::new(&rec[1]).map_err(|_| GraphError::Parse {
                line,
                message: "empty 'to' label".into(),
            })?;
            if from == to {
                return Err(GraphError::SelfLoop {
                    line,
                    vertex: from.0,
                });
            }
            let deltas = rec
                .iter()
                .skip(2)
                .map(|field| {
                    field
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| GraphError::Parse {
                            line,
                            message: format!("invalid number '{field}'"),
                        })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let key = unordered_key(from.as_str(), to.as_str());
            if seen.insert(key, line).is_some() {
                return Err(GraphError::DuplicateArc {
                    line,
                    a: from.0,
                    b: to.0,
                });
            }
            rows.push(BaselineRow {
                line,
                from,
                to,
                deltas,
            });
        }
        Ok(Self {
            rows,
            single_coordinate,
        })
    }

    /// Builds the digraph for one coordinate. Single-coordinate files ignore
    /// the selector.
    pub fn project(&self, coordinate: Coordinate) -> Result<WeightedDigraph, GraphError> {
        let column = if self.single_coordinate {
            0
        } else {
            coordinate.column()
        };
        let mut vertices = Vec::new();
        let mut known = HashSet::new();
        let mut arcs = Vec::with_capacity(self.rows.len());
        for row in &self.rows {
            for v in [&row.from, &row.to] {
                if known.insert(v.clone()) {
                    vertices.push(v.clone());
                }
            }
            arcs.push(Arc::new(row.from.clone(), row.to.clone(), row.deltas[column]));
        }
        WeightedDigraph::new(vertices, arcs)
    }
}

fn csv_error(err: csv::Error) -> GraphError {
    let line = err.position().map_or(0, |p| p.line());
    GraphError::Parse {
        line,
        message: err.to_string(),
    }
}

fn unordered_key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_owned(), b.to_owned())
    } else {
        (b.to_owned(), a.to_owned())
    }
}

/// Parses a baseline file and projects the chosen coordinate.
pub fn load_network(text: &str, coordinate: Coordinate) -> Result<WeightedDigraph, GraphError> {
    BaselineTable::parse(text)?.project(coordinate)
}

/// Weighted digraph for a single coordinate. Vertices keep input order; at
/// most one arc joins any unordered pair.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDigraph {
    vertices: Vec<VertexId>,
    arcs: Vec<Arc>,
    index: HashMap<VertexId, usize>,
}

impl WeightedDigraph {
    pub fn new(vertices: Vec<VertexId>, arcs: Vec<Arc>) -> Result<Self, GraphError> {
        let mut index = HashMap::with_capacity(vertices.len());
        for (i, v) in vertices.iter().enumerate() {
            if index.insert(v.clone(), i).is_some() {
                return Err(GraphError::DuplicateVertex(v.0.clone()));
            }
        }
        let mut pairs = HashSet::new();
        for (i, arc) in arcs.iter().enumerate() {
            for v in [&arc.tail, &arc.head] {
                if !index.contains_key(v) {
                    return Err(GraphError::UnknownVertex(v.0.clone()));
                }
            }
            if arc.tail == arc.head {
                return Err(GraphError::SelfLoop {
                    line: i as u64 + 1,
                    vertex: arc.tail.0.clone(),
                });
            }
            if !arc.weight.is_finite() {
                return Err(GraphError::NonFiniteWeight {
                    tail: arc.tail.0.clone(),
                    head: arc.head.0.clone(),
                });
            }
            if !pairs.insert(unordered_key(arc.tail.as_str(), arc.head.as_str())) {
                return Err(GraphError::DuplicateArc {
                    line: i as u64 + 1,
                    a: arc.tail.0.clone(),
                    b: arc.head.0.clone(),
                });
            }
        }
        Ok(Self {
            vertices,
            arcs,
            index,
        })
    }

    /// Convenience constructor from `(tail, head, weight)` label triples;
    /// vertices are taken in order of first appearance.
    pub fn from_triples<S: AsRef<str>>(triples: &[(S, S, f64)]) -> Result<Self, GraphError> {
        let mut vertices = Vec::new();
        let mut known = HashSet::new();
        let mut arcs = Vec::with_capacity(triples.len());
        for (t, h, w) in triples {
            let t = VertexId::new(t.as_ref())?;
            let h = VertexId::new(h.as_ref())?;
            for v in [&t, &h] {
                if known.insert(v.clone()) {
                    vertices.push(v.clone());
                }
            }
            arcs.push(Arc::new(t, h, *w));
        }
        Self::new(vertices, arcs)
    }

    pub fn order(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn vertex_index(&self, v: &VertexId) -> Option<usize> {
        self.index.get(v).copied()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v.as_str() == label)
    }

    /// `(tail, head)` vertex indices of arc `i`.
    pub fn endpoints(&self, i: usize) -> (usize, usize) {
        let arc = &self.arcs[i];
        (self.index[&arc.tail], self.index[&arc.head])
    }

    /// Index of the arc joining `a` and `b` in either direction.
    pub fn find_arc(&self, a: &str, b: &str) -> Option<usize> {
        self.arcs.iter().position(|arc| arc.joins(a, b))
    }

    /// Copy of the network with different arc weights, same order.
    pub fn with_weights(&self, weights: &[f64]) -> Self {
        assert_eq!(weights.len(), self.arcs.len());
        let arcs = self
            .arcs
            .iter()
            .zip(weights)
            .map(|(a, &w)| Arc::new(a.tail.clone(), a.head.clone(), w))
            .collect();
        Self {
            vertices: self.vertices.clone(),
            arcs,
            index: self.index.clone(),
        }
    }

    /// Neighbour lists of the underlying graph as `(neighbour, arc index)`,
    /// in arc input order.
    pub fn undirected_adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.order()];
        for i in 0..self.arcs.len() {
            let (t, h) = self.endpoints(i);
            adj[t].push((h, i));
            adj[h].push((t, i));
        }
        adj
    }

    /// Weakly connected components as sorted vertex-index lists, ordered by
    /// their first vertex.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let adj = self.undirected_adjacency();
        let mut label = vec![usize::MAX; self.order()];
        let mut comps = Vec::new();
        for start in 0..self.order() {
            if label[start] != usize::MAX {
                continue;
            }
            let id = comps.len();
            let mut members = vec![start];
            label[start] = id;
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for &(v, _) in &adj[u] {
                    if label[v] == usize::MAX {
                        label[v] = id;
                        members.push(v);
                        queue.push_back(v);
                    }
                }
            }
            members.sort_unstable();
            comps.push(members);
        }
        comps
    }

    pub fn is_weakly_connected(&self) -> bool {
        self.components().len() <= 1
    }

    /// Sub-network induced by `members`, plus the original index of each
    /// retained arc.
    pub fn subgraph(&self, members: &[usize]) -> (Self, Vec<usize>) {
        let keep: HashSet<usize> = members.iter().copied().collect();
        let vertices: Vec<VertexId> = members.iter().map(|&i| self.vertices[i].clone()).collect();
        let mut arcs = Vec::new();
        let mut map = Vec::new();
        for (i, arc) in self.arcs.iter().enumerate() {
            let (t, h) = self.endpoints(i);
            if keep.contains(&t) && keep.contains(&h) {
                arcs.push(arc.clone());
                map.push(i);
            }
        }
        let g = Self::new(vertices, arcs).expect("subgraph of a valid network is valid");
        (g, map)
    }

    /// Copy without the given arcs.
    pub fn without_arcs(&self, removed: &[usize]) -> Self {
        let drop: HashSet<usize> = removed.iter().copied().collect();
        let arcs = self
            .arcs
            .iter()
            .enumerate()
            .filter(|(i, _)| !drop.contains(i))
            .map(|(_, a)| a.clone())
            .collect();
        Self {
            vertices: self.vertices.clone(),
            arcs,
            index: self.index.clone(),
        }
    }

    fn disconnected_error(&self, reached: &[bool]) -> GraphError {
        GraphError::Disconnected {
            root: self.vertices[0].0.clone(),
            unreachable: self
                .vertices
                .iter()
                .zip(reached)
                .filter(|(_, &r)| !r)
                .map(|(v, _)| v.0.clone())
                .collect(),
        }
    }
}

/// Replaces every negative-weight arc by its reverse with the negated weight.
pub fn normalize_orientation(g: &WeightedDigraph) -> WeightedDigraph {
    let arcs = g
        .arcs
        .iter()
        .map(|a| {
            if a.weight < 0.0 {
                Arc::new(a.head.clone(), a.tail.clone(), -a.weight)
            } else {
                a.clone()
            }
        })
        .collect();
    WeightedDigraph {
        vertices: g.vertices.clone(),
        arcs,
        index: g.index.clone(),
    }
}

/// Breadth-first spanning tree of the underlying graph rooted at the first
/// vertex; neighbours are visited in arc input order. Returns arc indices in
/// discovery order.
pub fn spanning_tree(g: &WeightedDigraph) -> Result<Vec<usize>, GraphError> {
    if g.order() == 0 {
        return Err(GraphError::Empty);
    }
    let adj = g.undirected_adjacency();
    let mut reached = vec![false; g.order()];
    reached[0] = true;
    let mut tree = Vec::with_capacity(g.order() - 1);
    let mut queue = VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        for &(v, arc) in &adj[u] {
            if !reached[v] {
                reached[v] = true;
                tree.push(arc);
                queue.push_back(v);
            }
        }
    }
    if tree.len() + 1 != g.order() {
        return Err(g.disconnected_error(&reached));
    }
    Ok(tree)
}

/// Node potential propagated along the spanning tree, zero at the root.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaugePotential {
    pub root: VertexId,
    /// Indexed like the network's vertices.
    pub values: Vec<f64>,
}

impl GaugePotential {
    pub fn get(&self, g: &WeightedDigraph, v: &VertexId) -> Option<f64> {
        g.vertex_index(v).map(|i| self.values[i])
    }
}

/// Subtracts the tree potential difference from every arc weight. Tree arcs
/// become exactly zero and each non-tree arc carries the closure error of its
/// fundamental cycle.
pub fn gauge_fix(g: &WeightedDigraph) -> Result<(WeightedDigraph, GaugePotential), GraphError> {
    let tree = spanning_tree(g)?;
    let mut phi = vec![0.0; g.order()];
    // Tree arcs come out of the BFS in discovery order, so the tail or head
    // closer to the root is always already assigned.
    let mut assigned = vec![false; g.order()];
    assigned[0] = true;
    for &i in &tree {
        let (t, h) = g.endpoints(i);
        let w = g.arcs[i].weight;
        if assigned[t] {
            phi[h] = phi[t] + w;
            assigned[h] = true;
        } else {
            phi[t] = phi[h] - w;
            assigned[t] = true;
        }
    }
    let in_tree: HashSet<usize> = tree.into_iter().collect();
    let weights: Vec<f64> = (0..g.arcs.len())
        .map(|i| {
            if in_tree.contains(&i) {
                0.0
            } else {
                let (t, h) = g.endpoints(i);
                g.arcs[i].weight - (phi[h] - phi[t])
            }
        })
        .collect();
    Ok((
        g.with_weights(&weights),
        GaugePotential {
            root: g.vertices[0].clone(),
            values: phi,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle(w13: f64) -> WeightedDigraph {
        WeightedDigraph::from_triples(&[("1", "2", 1.0), ("2", "3", 2.0), ("1", "3", w13)]).unwrap()
    }

    #[test]
    fn loads_selected_coordinate() {
        let text = "from,to,dx,dy,dz\n1,2,3.0,0.5,0.1\n1,3,2.0,0.7,0.2\n";
        let g = load_network(text, Coordinate::X).unwrap();
        assert_eq!(g.order(), 3);
        assert_eq!(g.arcs()[0], Arc::new(VertexId::new("1").unwrap(), VertexId::new("2").unwrap(), 3.0));
        assert_eq!(g.arcs()[1].weight, 2.0);
        let gy = load_network(text, Coordinate::Y).unwrap();
        assert_eq!(gy.arcs()[1].weight, 0.7);
    }

    #[test]
    fn single_coordinate_files_and_comments() {
        let text = "# header comment\nfrom,to,w\n# a comment\nA,B,1.5\n\nB,C,-2\n";
        let g = load_network(text, Coordinate::Z).unwrap();
        assert_eq!(g.order(), 3);
        assert_eq!(g.arcs()[1].weight, -2.0);
    }

    #[test]
    fn self_loop_rejected() {
        let err = load_network("from,to,dx,dy,dz\n1,2,1,1,1\n4,4,1.0,0,0\n", Coordinate::X).unwrap_err();
        assert!(matches!(err, GraphError::SelfLoop { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn duplicate_pair_rejected_in_either_direction() {
        let err = load_network("from,to,w\n1,2,1\n2,1,-1\n", Coordinate::X).unwrap_err();
        assert!(matches!(err, GraphError::DuplicateArc { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn malformed_rows_report_line() {
        let err = load_network("from,to,w\n1,2,1\n2,3,abc\n", Coordinate::X).unwrap_err();
        assert!(matches!(err, GraphError::Parse { line: 3, .. }), "{err:?}");
        let err = load_network("from,to,w\n1,2\n", Coordinate::X).unwrap_err();
        assert!(matches!(err, GraphError::Parse { line: 2, .. }), "{err:?}");
        let err = load_network("a,b,c\n", Coordinate::X).unwrap_err();
        assert!(matches!(err, GraphError::Parse { line: 1, .. }), "{err:?}");
        let err = load_network("from,to,w\n1,2,inf\n", Coordinate::X).unwrap_err();
        assert!(matches!(err, GraphError::Parse { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn orientation_flips_only_negative_arcs() {
        let g = WeightedDigraph::from_triples(&[("2", "1", -3.0)]).unwrap();
        let n = normalize_orientation(&g);
        assert_eq!(n.arcs()[0].tail.as_str(), "1");
        assert_eq!(n.arcs()[0].weight, 3.0);

        let g = WeightedDigraph::from_triples(&[("1", "2", -1.0), ("3", "2", 2.0), ("3", "4", 0.0)]).unwrap();
        let n = normalize_orientation(&g);
        assert!(n.arcs()[0].joins("2", "1") && n.arcs()[0].tail.as_str() == "2");
        assert_eq!(n.arcs()[0].weight, 1.0);
        assert_eq!(n.arcs()[1], g.arcs()[1]);
        assert_eq!(n.arcs()[2], g.arcs()[2]);

        let pos = triangle(3.0);
        assert_eq!(normalize_orientation(&pos), pos);
    }

    #[test]
    fn bfs_tree_from_first_vertex() {
        let g = triangle(3.0);
        let tree = spanning_tree(&g).unwrap();
        assert_eq!(tree, vec![0, 2]);

        let path = WeightedDigraph::from_triples(&[("a", "b", 1.0), ("c", "b", 1.0), ("c", "d", 1.0)]).unwrap();
        let mut t = spanning_tree(&path).unwrap();
        t.sort_unstable();
        assert_eq!(t, vec![0, 1, 2]);
    }

    #[test]
    fn disconnected_tree_names_unreachable() {
        let g = WeightedDigraph::from_triples(&[("1", "2", 1.0), ("3", "4", 1.0)]).unwrap();
        match spanning_tree(&g).unwrap_err() {
            GraphError::Disconnected { unreachable, .. } => assert_eq!(unreachable, vec!["3", "4"]),
            e => panic!("{e:?}"),
        }
        assert_eq!(g.components(), vec![vec![0, 1], vec![2, 3]]);
    }

    #[test]
    fn gauge_consistent_triangle_is_zero() {
        let (g, phi) = gauge_fix(&triangle(3.0)).unwrap();
        assert!(g.arcs().iter().all(|a| a.weight == 0.0));
        assert_eq!(phi.values, vec![0.0, 1.0, 3.0]);
    }

    #[test]
    fn gauge_inconsistent_triangle_carries_closure_error() {
        let (g, phi) = gauge_fix(&triangle(4.0)).unwrap();
        // tree {1->2, 1->3}; phi = (0, 1, 4); arc 2->3 keeps 2 - 3 = -1
        assert_eq!(phi.values, vec![0.0, 1.0, 4.0]);
        assert_eq!(g.arcs()[0].weight, 0.0);
        assert_eq!(g.arcs()[2].weight, 0.0);
        assert_eq!(g.arcs()[1].weight.abs(), 1.0);
    }

    #[test]
    fn subgraph_keeps_arc_map() {
        let g = WeightedDigraph::from_triples(&[("1", "2", 1.0), ("3", "4", 2.0), ("4", "5", 3.0)]).unwrap();
        let comps = g.components();
        let (sub, map) = g.subgraph(&comps[1]);
        assert_eq!(sub.order(), 3);
        assert_eq!(map, vec![1, 2]);
    }
}
