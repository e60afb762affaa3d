//! Compact metric graphs: construction, validation, classification, 1-sums,
//! canonical test graphs and meshing.
//!
//! A [`MetricGraph`] is immutable once built. Shortest-path distances between
//! vertices are computed at construction and reused by every distance query.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;
use std::hash::{DefaultHasher, Hash, Hasher};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when comparing lengths and distances.
pub(crate) const LENGTH_RTOL: f64 = 1e-12;

/// Serialized form of a graph: `{"vertices": N, "edges": [{"id", "u", "v", "length"}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub vertices: usize,
    pub edges: Vec<EdgeSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub id: String,
    pub u: usize,
    pub v: usize,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: String,
    /// Vertex at arclength 0.
    pub u: usize,
    /// Vertex at arclength `length`.
    pub v: usize,
    pub length: f64,
}

impl Edge {
    pub fn is_loop(&self) -> bool {
        self.u == self.v
    }
}

/// Which end of an edge touches a vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum End {
    Start,
    Finish,
}

/// One edge end incident to a vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EdgeEnd {
    pub edge: usize,
    pub end: End,
}

impl EdgeEnd {
    /// Index of this end in the per-edge endpoint ordering `(e0(0), e0(l), e1(0), ...)`.
    pub fn slot(&self) -> usize {
        2 * self.edge
            + match self.end {
                End::Start => 0,
                End::Finish => 1,
            }
    }
}

/// A location `(edge, t)` with `0 <= t <= length(edge)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointOnGraph {
    pub edge: usize,
    pub t: f64,
}

impl PointOnGraph {
    pub fn new(edge: usize, t: f64) -> Self {
        Self { edge, t }
    }
}

/// Structural flags of a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GraphClass {
    pub euclidean_edges: bool,
    pub tree: bool,
    pub euclidean_cycle: bool,
    pub has_loops: bool,
    pub has_multi_edges: bool,
}

/// A validated, connected compact metric graph.
#[derive(Debug, Clone)]
pub struct MetricGraph {
    vertex_count: usize,
    edges: Vec<Edge>,
    ids: HashMap<String, usize>,
    incidence: Vec<Vec<EdgeEnd>>,
    /// Row-major all-pairs vertex distances.
    vertex_dist: Vec<f64>,
    hash: u64,
}

impl MetricGraph {
    pub fn from_spec(spec: &GraphSpec) -> Result<Self> {
        build_graph(spec)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: GraphSpec = serde_json::from_str(text)?;
        build_graph(&spec)
    }

    pub fn to_spec(&self) -> GraphSpec {
        GraphSpec {
            vertices: self.vertex_count,
            edges: self
                .edges
                .iter()
                .map(|e| EdgeSpec {
                    id: e.id.clone(),
                    u: e.u,
                    v: e.v,
                    length: e.length,
                })
                .collect(),
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, index: usize) -> &Edge {
        &self.edges[index]
    }

    pub fn edge_index(&self, id: &str) -> Result<usize> {
        self.ids
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownEdge(id.to_string()))
    }

    /// Edge ends incident to `vertex`, in edge order (a loop contributes both ends).
    pub fn incident(&self, vertex: usize) -> &[EdgeEnd] {
        &self.incidence[vertex]
    }

    pub fn degree(&self, vertex: usize) -> usize {
        self.incidence[vertex].len()
    }

    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }

    /// Shortest-path distance between two vertices.
    pub fn vertex_distance(&self, a: usize, b: usize) -> f64 {
        self.vertex_dist[a * self.vertex_count + b]
    }

    /// Content hash of the vertex count and edge list; derived structures record it.
    pub fn content_hash(&self) -> u64 {
        self.hash
    }

    /// Vertex at an edge end.
    pub fn end_vertex(&self, end: EdgeEnd) -> usize {
        let e = &self.edges[end.edge];
        match end.end {
            End::Start => e.u,
            End::Finish => e.v,
        }
    }

    /// Validate a point, snapping arclengths within rounding of an endpoint onto it.
    pub fn point(&self, edge: usize, t: f64) -> Result<PointOnGraph> {
        let Some(e) = self.edges.get(edge) else {
            return Err(Error::PointOffEdge { edge, t });
        };
        let slack = LENGTH_RTOL * e.length;
        if !t.is_finite() || t < -slack || t > e.length + slack {
            return Err(Error::PointOffEdge { edge, t });
        }
        let t = if t <= slack {
            0.0
        } else if t >= e.length - slack {
            e.length
        } else {
            t
        };
        Ok(PointOnGraph { edge, t })
    }

    /// Point addressed by edge id.
    pub fn point_by_id(&self, id: &str, t: f64) -> Result<PointOnGraph> {
        self.point(self.edge_index(id)?, t)
    }

    /// A point located at `vertex`, expressed on its first incident edge.
    pub fn vertex_point(&self, vertex: usize) -> PointOnGraph {
        let end = self.incidence[vertex][0];
        match end.end {
            End::Start => PointOnGraph::new(end.edge, 0.0),
            End::Finish => PointOnGraph::new(end.edge, self.edges[end.edge].length),
        }
    }

    /// The vertex a point sits on, if it is an edge endpoint.
    pub fn vertex_at(&self, p: PointOnGraph) -> Option<usize> {
        let e = &self.edges[p.edge];
        if p.t == 0.0 {
            Some(e.u)
        } else if p.t == e.length {
            Some(e.v)
        } else {
            None
        }
    }

    /// Number of independent cycles `|E| - |V| + 1`.
    pub fn cycle_rank(&self) -> usize {
        self.edges.len() + 1 - self.vertex_count
    }
}

impl fmt::Display for MetricGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "MetricGraph(|V|={}, |E|={}, length={})",
            self.vertex_count,
            self.edges.len(),
            self.total_length()
        )
    }
}

/// Validate a graph description and build the immutable graph.
pub fn build_graph(spec: &GraphSpec) -> Result<MetricGraph> {
    if spec.edges.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let n = spec.vertices;
    let mut ids = HashMap::with_capacity(spec.edges.len());
    let mut edges = Vec::with_capacity(spec.edges.len());
    for (index, e) in spec.edges.iter().enumerate() {
        if !(e.length.is_finite() && e.length > 0.0) {
            return Err(Error::NonPositiveLength {
                edge: e.id.clone(),
                length: e.length,
            });
        }
        for vertex in [e.u, e.v] {
            if vertex >= n {
                return Err(Error::DanglingEndpoint {
                    edge: e.id.clone(),
                    vertex,
                    vertex_count: n,
                });
            }
        }
        if ids.insert(e.id.clone(), index).is_some() {
            return Err(Error::DuplicateEdgeId(e.id.clone()));
        }
        edges.push(Edge {
            id: e.id.clone(),
            u: e.u,
            v: e.v,
            length: e.length,
        });
    }

    let mut incidence = vec![Vec::new(); n];
    for (index, e) in edges.iter().enumerate() {
        incidence[e.u].push(EdgeEnd {
            edge: index,
            end: End::Start,
        });
        incidence[e.v].push(EdgeEnd {
            edge: index,
            end: End::Finish,
        });
    }

    let vertex_dist = all_pairs_vertex_distances(n, &edges, &incidence);
    if let Some(vertex) = (0..n).find(|&v| vertex_dist[v].is_infinite()) {
        return Err(Error::Disconnected { vertex });
    }

    let mut hasher = DefaultHasher::new();
    n.hash(&mut hasher);
    for e in &edges {
        e.id.hash(&mut hasher);
        e.u.hash(&mut hasher);
        e.v.hash(&mut hasher);
        e.length.to_bits().hash(&mut hasher);
    }

    Ok(MetricGraph {
        vertex_count: n,
        edges,
        ids,
        incidence,
        vertex_dist,
        hash: hasher.finish(),
    })
}

#[derive(PartialEq)]
struct Frontier {
    dist: f64,
    vertex: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| self.vertex.cmp(&other.vertex))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra(source: usize, edges: &[Edge], incidence: &[Vec<EdgeEnd>], out: &mut [f64]) {
    out.fill(f64::INFINITY);
    out[source] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Frontier {
        dist: 0.0,
        vertex: source,
    });
    while let Some(Frontier { dist, vertex }) = heap.pop() {
        if dist > out[vertex] {
            continue;
        }
        for end in &incidence[vertex] {
            let e = &edges[end.edge];
            let next = match end.end {
                End::Start => e.v,
                End::Finish => e.u,
            };
            let candidate = dist + e.length;
            if candidate < out[next] {
                out[next] = candidate;
                heap.push(Frontier {
                    dist: candidate,
                    vertex: next,
                });
            }
        }
    }
}

fn all_pairs_vertex_distances(n: usize, edges: &[Edge], incidence: &[Vec<EdgeEnd>]) -> Vec<f64> {
    let mut dist = vec![0.0; n * n];
    for source in 0..n {
        dijkstra(source, edges, incidence, &mut dist[source * n..(source + 1) * n]);
    }
    dist
}

/// Compute structural flags; `euclidean_edges` also requires `d(u, v) = length` for every edge.
pub fn classify(g: &MetricGraph) -> GraphClass {
    let has_loops = g.edges.iter().any(Edge::is_loop);
    let mut seen = std::collections::HashSet::new();
    let has_multi_edges = g
        .edges
        .iter()
        .filter(|e| !e.is_loop())
        .any(|e| !seen.insert((e.u.min(e.v), e.u.max(e.v))));
    let consistent = g.edges.iter().all(|e| {
        let d = g.vertex_distance(e.u, e.v);
        (d - e.length).abs() <= LENGTH_RTOL * e.length
    });
    let euclidean_edges = !has_loops && !has_multi_edges && consistent;
    let tree = !has_loops && g.edges.len() + 1 == g.vertex_count;
    let euclidean_cycle = euclidean_edges
        && g.vertex_count >= 3
        && g.edges.len() == g.vertex_count
        && (0..g.vertex_count).all(|v| g.degree(v) == 2);
    GraphClass {
        euclidean_edges,
        tree,
        euclidean_cycle,
        has_loops,
        has_multi_edges,
    }
}

/// Iterated 1-sum. `joins[k]` identifies a vertex of the sum of `parts[..=k]`
/// with a vertex of `parts[k + 1]`. Vertices of each new part are appended in
/// order, skipping the identified one; edge ids become `"{part}.{id}"`.
pub fn one_sum(parts: &[&MetricGraph], joins: &[(usize, usize)]) -> Result<MetricGraph> {
    let Some((first, rest)) = parts.split_first() else {
        return Err(Error::InvalidParameter("1-sum needs at least one part".into()));
    };
    if joins.len() != rest.len() {
        return Err(Error::InvalidParameter(format!(
            "1-sum of {} parts needs {} joins, got {}",
            parts.len(),
            rest.len(),
            joins.len()
        )));
    }
    let relabel = |k: usize, id: &str| format!("{k}.{id}");
    let mut vertices = first.vertex_count;
    let mut edges: Vec<EdgeSpec> = first
        .edges
        .iter()
        .map(|e| EdgeSpec {
            id: relabel(0, &e.id),
            u: e.u,
            v: e.v,
            length: e.length,
        })
        .collect();
    for (k, (part, &(acc_vertex, part_vertex))) in rest.iter().zip(joins).enumerate() {
        if acc_vertex >= vertices {
            return Err(Error::MissingJoinVertex {
                vertex: acc_vertex,
                vertex_count: vertices,
            });
        }
        if part_vertex >= part.vertex_count {
            return Err(Error::MissingJoinVertex {
                vertex: part_vertex,
                vertex_count: part.vertex_count,
            });
        }
        let map = |v: usize| match v.cmp(&part_vertex) {
            Ordering::Equal => acc_vertex,
            Ordering::Less => vertices + v,
            Ordering::Greater => vertices + v - 1,
        };
        edges.extend(part.edges.iter().map(|e| EdgeSpec {
            id: relabel(k + 1, &e.id),
            u: map(e.u),
            v: map(e.v),
            length: e.length,
        }));
        vertices += part.vertex_count - 1;
    }
    build_graph(&GraphSpec { vertices, edges })
}

/// Canonical test graphs.
#[derive(Debug, Clone, PartialEq)]
pub enum Canonical {
    Interval(f64),
    /// Circle of total length `length` subdivided into `n` equal edges.
    Circle { length: f64, n: usize },
    /// Star whose edge `i` runs from leaf `i` to the center (the last vertex).
    Star(Vec<f64>),
    /// 1-sum of two 3-edge Euclidean cycles at their vertex 0.
    FigureEight(f64, f64),
    /// 1-sum of a 3-edge Euclidean cycle and a pendant edge at vertex 0.
    Tadpole { cycle: f64, edge: f64 },
}

fn check_lengths(lengths: &[f64]) -> Result<()> {
    match lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
        Some(l) => Err(Error::InvalidParameter(format!(
            "lengths must be positive, got {l}"
        ))),
        None => Ok(()),
    }
}

/// Build a canonical graph.
pub fn canonical(kind: &Canonical) -> Result<MetricGraph> {
    match kind {
        Canonical::Interval(length) => {
            check_lengths(&[*length])?;
            build_graph(&GraphSpec {
                vertices: 2,
                edges: vec![EdgeSpec {
                    id: "e0".into(),
                    u: 0,
                    v: 1,
                    length: *length,
                }],
            })
        }
        Canonical::Circle { length, n } => {
            check_lengths(&[*length])?;
            if *n == 0 {
                return Err(Error::InvalidParameter(
                    "circle needs at least one vertex".into(),
                ));
            }
            let edges = (0..*n)
                .map(|i| EdgeSpec {
                    id: format!("e{i}"),
                    u: i,
                    v: (i + 1) % n,
                    length: length / *n as f64,
                })
                .collect();
            build_graph(&GraphSpec { vertices: *n, edges })
        }
        Canonical::Star(lengths) => {
            if lengths.is_empty() {
                return Err(Error::InvalidParameter("star needs at least one edge".into()));
            }
            check_lengths(lengths)?;
            let center = lengths.len();
            let edges = lengths
                .iter()
                .enumerate()
                .map(|(i, &length)| EdgeSpec {
                    id: format!("e{i}"),
                    u: i,
                    v: center,
                    length,
                })
                .collect();
            build_graph(&GraphSpec {
                vertices: center + 1,
                edges,
            })
        }
        Canonical::FigureEight(first, second) => {
            let a = canonical(&Canonical::Circle { length: *first, n: 3 })?;
            let b = canonical(&Canonical::Circle { length: *second, n: 3 })?;
            one_sum(&[&a, &b], &[(0, 0)])
        }
        Canonical::Tadpole { cycle, edge } => {
            let a = canonical(&Canonical::Circle { length: *cycle, n: 3 })?;
            let b = canonical(&Canonical::Interval(*edge))?;
            one_sum(&[&a, &b], &[(0, 0)])
        }
    }
}

impl FromStr for Canonical {
    type Err = Error;

    /// Parses `interval:L`, `circle:L,N`, `star:L1,L2,...`, `figure-eight:L1,L2`, `tadpole:LC,LE`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("expected KIND:ARGS, got `{s}`")))?;
        let nums: Vec<f64> = args
            .split(',')
            .map(|a| {
                a.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad number `{a}` in `{s}`")))
            })
            .collect::<Result<_>>()?;
        let arity = |n: usize| {
            if nums.len() == n {
                Ok(())
            } else {
                Err(Error::Parse(format!("`{kind}` takes {n} arguments, got {}", nums.len())))
            }
        };
        match kind {
            "interval" => {
                arity(1)?;
                Ok(Canonical::Interval(nums[0]))
            }
            "circle" => {
                arity(2)?;
                if nums[1] < 1.0 || nums[1].fract() != 0.0 {
                    return Err(Error::Parse(format!("circle vertex count must be a positive integer, got {}", nums[1])));
                }
                Ok(Canonical::Circle {
                    length: nums[0],
                    n: nums[1] as usize,
                })
            }
            "star" => Ok(Canonical::Star(nums)),
            "figure-eight" | "figure_eight" => {
                arity(2)?;
                Ok(Canonical::FigureEight(nums[0], nums[1]))
            }
            "tadpole" => {
                arity(2)?;
                Ok(Canonical::Tadpole {
                    cycle: nums[0],
                    edge: nums[1],
                })
            }
            other => Err(Error::Parse(format!("unknown canonical graph `{other}`"))),
        }
    }
}

/// Number of elements used on an edge of length `length` at target spacing `h`.
pub(crate) fn element_count(length: f64, h: f64) -> usize {
    // The relative slack keeps e.g. 1 / 0.04 from rounding up to 26.
    ((length / h) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

/// Per-edge points at spacing `<= h`, both endpoints included; edge order, then `t` ascending.
/// Vertices shared between edges appear once per incident edge end.
pub fn mesh(g: &MetricGraph, h: f64) -> Result<Vec<PointOnGraph>> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidParameter(format!("mesh spacing must be positive, got {h}")));
    }
    let mut points = Vec::new();
    for (index, e) in g.edges.iter().enumerate() {
        let n = element_count(e.length, h);
        points.extend((0..=n).map(|i| {
            let t = if i == n { e.length } else { e.length * i as f64 / n as f64 };
            PointOnGraph::new(index, t)
        }));
    }
    Ok(points)
}

/// Deduplicated mesh: one node per graph vertex followed by the interior nodes of each edge.
#[derive(Debug, Clone)]
pub struct GraphMesh {
    /// One representative point per node.
    pub nodes: Vec<PointOnGraph>,
    /// For each edge, the node index of every mesh point along it (`t` ascending).
    pub edge_nodes: Vec<Vec<usize>>,
    /// For each edge, the element count.
    pub edge_elements: Vec<usize>,
    pub spacing: f64,
}

impl GraphMesh {
    pub fn new(g: &MetricGraph, h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidParameter(format!("mesh spacing must be positive, got {h}")));
        }
        let mut nodes: Vec<PointOnGraph> = (0..g.vertex_count()).map(|v| g.vertex_point(v)).collect();
        let mut edge_nodes = Vec::with_capacity(g.edge_count());
        let mut edge_elements = Vec::with_capacity(g.edge_count());
        for (index, e) in g.edges().iter().enumerate() {
            let n = element_count(e.length, h);
            let mut along = Vec::with_capacity(n + 1);
            along.push(e.u);
            for i in 1..n {
                along.push(nodes.len());
                nodes.push(PointOnGraph::new(index, e.length * i as f64 / n as f64));
            }
            along.push(e.v);
            edge_nodes.push(along);
            edge_elements.push(n);
        }
        Ok(Self {
            nodes,
            edge_nodes,
            edge_elements,
            spacing: h,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and hat-function weights whose combination is the linear interpolant at `p`.
    pub fn interpolation(&self, g: &MetricGraph, p: PointOnGraph) -> [(usize, f64); 2] {
        let n = self.edge_elements[p.edge];
        let scaled = p.t / g.edge(p.edge).length * n as f64;
        let i = (scaled.floor() as usize).min(n - 1);
        let w = (scaled - i as f64).clamp(0.0, 1.0);
        let along = &self.edge_nodes[p.edge];
        [(along[i], 1.0 - w), (along[i + 1], w)]
    }

    /// Node index of `p` when it coincides with a mesh node.
    pub fn node_of(&self, g: &MetricGraph, p: PointOnGraph) -> Option<usize> {
        let weights = self.interpolation(g, p);
        weights
            .iter()
            .find(|(_, w)| (w - 1.0).abs() <= 1e-9)
            .map(|(node, _)| *node)
    }
}
