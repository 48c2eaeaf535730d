use super::{Route, RouteError, RouteRequest, RoutingBackend};
use crate::geo::{haversine_distance, EarthModel, GeoPoint};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("invalid street graph JSON: {0}")]
    Json(String),
    #[error("node {0} has an invalid coordinate")]
    BadNode(usize),
    #[error("edge ({0}, {1}) references a node that does not exist")]
    UnknownNode(usize, usize),
    #[error("edge ({0}, {1}) has zero length")]
    ZeroLength(usize, usize),
    #[error("removed edge ({0}, {1}) is not an edge of the graph")]
    NotAnEdge(usize, usize),
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    nodes: Vec<[f64; 2]>,
    edges: Vec<[usize; 2]>,
    #[serde(default)]
    removed: Vec<[usize; 2]>,
}

/// Undirected street network. Edge weights are the haversine length of the
/// segment; removed edges act as barriers and are skipped by the router.
#[derive(Debug, Clone, PartialEq)]
pub struct StreetGraph {
    nodes: Vec<GeoPoint>,
    edges: BTreeSet<(usize, usize)>,
    removed: BTreeSet<(usize, usize)>,
    adjacency: Vec<Vec<(usize, f64)>>,
    earth: EarthModel,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

impl StreetGraph {
    pub fn new(nodes: Vec<GeoPoint>) -> Self {
        let n = nodes.len();
        Self {
            nodes,
            edges: BTreeSet::new(),
            removed: BTreeSet::new(),
            adjacency: vec![Vec::new(); n],
            earth: EarthModel::default(),
        }
    }

    /// `rows` x `cols` lattice whose south-west node is `south_west`, with
    /// neighbouring nodes `spacing_km` apart along the meridian and along the
    /// parallel through `south_west`. Node id = row * cols + col.
    pub fn lattice(south_west: GeoPoint, rows: usize, cols: usize, spacing_km: f64) -> Self {
        let earth = EarthModel::default();
        let dlat = (spacing_km / earth.radius_km()).to_degrees();
        let dlon = dlat / south_west.lat().to_radians().cos();
        let nodes = (0..rows)
            .flat_map(|r| (0..cols).map(move |c| (r, c)))
            .map(|(r, c)| {
                GeoPoint::new(south_west.lat() + r as f64 * dlat, south_west.lon() + c as f64 * dlon)
                    .expect("lattice leaves the valid coordinate range")
            })
            .collect();
        let mut g = Self::new(nodes);
        for r in 0..rows {
            for c in 0..cols {
                let id = r * cols + c;
                if c + 1 < cols {
                    g.edges.insert((id, id + 1));
                }
                if r + 1 < rows {
                    g.edges.insert((id, id + cols));
                }
            }
        }
        g.rebuild_adjacency();
        g
    }

    pub fn add_edge(&mut self, a: usize, b: usize) -> Result<(), GraphError> {
        if a >= self.nodes.len() || b >= self.nodes.len() {
            return Err(GraphError::UnknownNode(a, b));
        }
        let w = haversine_distance(&self.nodes[a], &self.nodes[b], &self.earth);
        if a == b || w <= 0.0 {
            return Err(GraphError::ZeroLength(a, b));
        }
        if self.edges.insert(key(a, b)) {
            self.rebuild_adjacency();
        }
        Ok(())
    }

    /// Marks an edge as a barrier.
    pub fn remove_edge(&mut self, a: usize, b: usize) -> Result<(), GraphError> {
        let k = key(a, b);
        if !self.edges.contains(&k) {
            return Err(GraphError::NotAnEdge(a, b));
        }
        if self.removed.insert(k) {
            self.rebuild_adjacency();
        }
        Ok(())
    }

    /// Removes `count` distinct open edges chosen by a seeded shuffle.
    pub fn with_random_barriers(mut self, count: usize, seed: u64) -> Self {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut open: Vec<_> = self.edges.difference(&self.removed).copied().collect();
        open.shuffle(&mut rng);
        for (a, b) in open.into_iter().take(count) {
            self.removed.insert((a, b));
        }
        self.rebuild_adjacency();
        self
    }

    fn rebuild_adjacency(&mut self) {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for &(a, b) in self.edges.difference(&self.removed) {
            let w = haversine_distance(&self.nodes[a], &self.nodes[b], &self.earth);
            adj[a].push((b, w));
            adj[b].push((a, w));
        }
        for list in &mut adj {
            list.sort_by_key(|&(v, _)| v);
        }
        self.adjacency = adj;
    }

    pub fn nodes(&self) -> &[GeoPoint] {
        &self.nodes
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn removed_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.removed.iter().copied()
    }

    /// Open neighbours of `node` in ascending id order, with edge lengths.
    pub fn neighbours(&self, node: usize) -> &[(usize, f64)] {
        &self.adjacency[node]
    }

    /// Nearest node by haversine distance; ties go to the lowest id.
    pub fn snap(&self, p: &GeoPoint) -> Option<usize> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (i, haversine_distance(p, n, &self.earth)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .map(|(i, _)| i)
    }

    /// Parses `{nodes: [[lat,lon],...], edges: [[i,j],...], removed: [[i,j],...]}`.
    pub fn from_json(input: &[u8]) -> Result<Self, GraphError> {
        let file: GraphFile = serde_json::from_slice(input).map_err(|e| GraphError::Json(e.to_string()))?;
        let nodes = file
            .nodes
            .iter()
            .enumerate()
            .map(|(i, &[lat, lon])| GeoPoint::new(lat, lon).map_err(|_| GraphError::BadNode(i)))
            .collect::<Result<Vec<_>, _>>()?;
        let mut g = Self::new(nodes);
        for [a, b] in file.edges {
            if a >= g.nodes.len() || b >= g.nodes.len() {
                return Err(GraphError::UnknownNode(a, b));
            }
            if a == b || haversine_distance(&g.nodes[a], &g.nodes[b], &g.earth) <= 0.0 {
                return Err(GraphError::ZeroLength(a, b));
            }
            g.edges.insert(key(a, b));
        }
        for [a, b] in file.removed {
            if !g.edges.contains(&key(a, b)) {
                return Err(GraphError::NotAnEdge(a, b));
            }
            g.removed.insert(key(a, b));
        }
        g.rebuild_adjacency();
        Ok(g)
    }

    pub fn to_json(&self) -> String {
        let file = GraphFile {
            nodes: self.nodes.iter().map(|p| [p.lat(), p.lon()]).collect(),
            edges: self.edges.iter().map(|&(a, b)| [a, b]).collect(),
            removed: self.removed.iter().map(|&(a, b)| [a, b]).collect(),
        };
        serde_json::to_string(&file).expect("graph serializes")
    }

    /// Distance from every node to `target` over open edges.
    fn distances_to(&self, target: usize) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.nodes.len()];
        let mut heap = BinaryHeap::new();
        dist[target] = 0.0;
        heap.push(Entry {
            dist: 0.0,
            node: target,
        });
        while let Some(Entry { dist: d, node: u }) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &(v, w) in &self.adjacency[u] {
                let nd = d + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Entry { dist: nd, node: v });
                }
            }
        }
        dist
    }
}

#[derive(PartialEq)]
struct Entry {
    dist: f64,
    node: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    // min-heap on distance, then node id
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest walk between two arbitrary points on `graph`.
///
/// Both endpoints snap to their nearest node. The returned length includes
/// the straight access legs from `origin` to its node and from the last node
/// to `destination`, so it is never shorter than the great-circle distance.
/// Among equal-length node paths the lexicographically smallest id sequence
/// wins.
pub fn shortest_path(graph: &StreetGraph, origin: &GeoPoint, destination: &GeoPoint) -> Result<Route, RouteError> {
    let earth = graph.earth;
    let start = graph
        .snap(origin)
        .ok_or_else(|| RouteError::NoRoute("street graph has no nodes".into()))?;
    let end = graph.snap(destination).expect("graph is nonempty");
    let dist = graph.distances_to(end);
    if !dist[start].is_finite() {
        return Err(RouteError::NoRoute(format!("node {start} cannot reach node {end}")));
    }

    // Walk forward choosing the smallest-id neighbour that stays on a
    // shortest path; this yields the lexicographically smallest sequence.
    let mut path = vec![start];
    let mut u = start;
    while u != end {
        let tol = 1e-10 * (1.0 + dist[u]);
        let next = graph.adjacency[u]
            .iter()
            .find(|&&(v, w)| dist[v] < dist[u] && (w + dist[v] - dist[u]).abs() <= tol)
            .map(|&(v, _)| v)
            .expect("a shortest-path successor exists for every reachable node");
        path.push(next);
        u = next;
    }

    let network: f64 = path
        .windows(2)
        .map(|w| haversine_distance(&graph.nodes[w[0]], &graph.nodes[w[1]], &earth))
        .sum();
    let access_in = haversine_distance(origin, &graph.nodes[start], &earth);
    let access_out = haversine_distance(&graph.nodes[end], destination, &earth);

    let mut points: Vec<GeoPoint> = Vec::with_capacity(path.len() + 2);
    for p in std::iter::once(*origin)
        .chain(path.iter().map(|&i| graph.nodes[i]))
        .chain(std::iter::once(*destination))
    {
        if points.last() != Some(&p) {
            points.push(p);
        }
    }
    Ok(Route::from_points(access_in + network + access_out, points))
}

/// Offline backend routing over a fixed [`StreetGraph`].
#[derive(Debug, Clone)]
pub struct SyntheticBackend {
    graph: StreetGraph,
}

impl SyntheticBackend {
    pub fn new(graph: StreetGraph) -> Self {
        Self { graph }
    }

    pub fn graph(&self) -> &StreetGraph {
        &self.graph
    }
}

impl RoutingBackend for SyntheticBackend {
    fn route(&self, request: &RouteRequest) -> Result<Route, RouteError> {
        shortest_path(&self.graph, &request.origin, &request.destination)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    fn equator_lattice(rows: usize, cols: usize) -> StreetGraph {
        StreetGraph::lattice(p(0.0, 0.0), rows, cols, 0.5)
    }

    /// Bellman-Ford over the open edges; independent of the Dijkstra path.
    fn bellman_ford(g: &StreetGraph, src: usize) -> Vec<f64> {
        let e = EarthModel::default();
        let mut d = vec![f64::INFINITY; g.nodes().len()];
        d[src] = 0.0;
        let open: Vec<_> = g.edges().filter(|k| !g.removed.contains(k)).collect();
        for _ in 0..g.nodes().len() {
            let mut changed = false;
            for &(a, b) in &open {
                let w = haversine_distance(&g.nodes()[a], &g.nodes()[b], &e);
                if d[a] + w < d[b] {
                    d[b] = d[a] + w;
                    changed = true;
                }
                if d[b] + w < d[a] {
                    d[a] = d[b] + w;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        d
    }

    #[test]
    fn adjacent_nodes_single_edge() {
        let g = equator_lattice(3, 3);
        let r = shortest_path(&g, &g.nodes()[0], &g.nodes()[1]).unwrap();
        assert!((r.total_km - 0.5).abs() < 1e-9);
        assert_eq!(r.waypoints.len(), 2);
    }

    #[test]
    fn identity_route() {
        let g = equator_lattice(3, 3);
        let n = g.nodes()[4];
        let r = shortest_path(&g, &n, &n).unwrap();
        assert_eq!(r.total_km, 0.0);
        assert_eq!(r.waypoints.len(), 1);
    }

    #[test]
    fn two_node_graph() {
        let mut g = StreetGraph::new(vec![p(53.3, -6.3), p(53.31, -6.29)]);
        g.add_edge(0, 1).unwrap();
        let len = haversine_distance(&g.nodes()[0], &g.nodes()[1], &EarthModel::default());
        let r = shortest_path(&g, &g.nodes()[0], &g.nodes()[1]).unwrap();
        assert_eq!(r.total_km, len);
    }

    #[test]
    fn wall_between_halves_is_no_route() {
        let mut g = equator_lattice(3, 4);
        for r in 0..3 {
            g.remove_edge(r * 4 + 1, r * 4 + 2).unwrap();
        }
        let res = shortest_path(&g, &g.nodes()[0], &g.nodes()[3]);
        assert!(matches!(res, Err(RouteError::NoRoute(_))));
    }

    #[test]
    fn opposite_corners_match_oracle() {
        let g = equator_lattice(5, 5);
        let r = shortest_path(&g, &g.nodes()[0], &g.nodes()[24]).unwrap();
        let oracle = bellman_ford(&g, 0)[24];
        assert!((r.total_km - oracle).abs() < 1e-9);
        assert!((r.total_km - 4.0).abs() < 1e-6);
    }

    #[test]
    fn equal_length_paths_take_smallest_ids() {
        // diamond symmetric about the equator: 0 -> {1 south, 2 north} -> 3
        let mut g = StreetGraph::new(vec![p(0.0, 0.0), p(-0.01, 0.01), p(0.01, 0.01), p(0.0, 0.02)]);
        for (a, b) in [(0, 2), (2, 3), (0, 1), (1, 3)] {
            g.add_edge(a, b).unwrap();
        }
        let r = shortest_path(&g, &g.nodes()[0], &g.nodes()[3]).unwrap();
        assert_eq!(r.waypoints[1].point, g.nodes()[1]);
        let back = shortest_path(&g, &g.nodes()[3], &g.nodes()[0]).unwrap();
        assert_eq!(back.waypoints[1].point, g.nodes()[1]);
    }

    #[test]
    fn random_barriers_match_bellman_ford() {
        let g = equator_lattice(6, 6).with_random_barriers(10, 42);
        assert_eq!(g.removed_edges().count(), 10);
        let oracle = bellman_ford(&g, 7);
        for (t, want) in oracle.iter().enumerate() {
            match shortest_path(&g, &g.nodes()[7], &g.nodes()[t]) {
                Ok(r) => assert!((r.total_km - want).abs() < 1e-9, "node {t}"),
                Err(RouteError::NoRoute(_)) => assert!(want.is_infinite()),
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn off_node_endpoints_include_access_legs() {
        let g = equator_lattice(3, 3);
        let e = EarthModel::default();
        let o = p(0.0001, 0.0001);
        let d = p(0.0089, 0.0091);
        let r = shortest_path(&g, &o, &d).unwrap();
        assert_eq!(r.waypoints[0].point, o);
        assert_eq!(r.waypoints.last().unwrap().point, d);
        assert!(r.total_km >= haversine_distance(&o, &d, &e) - 1e-6);
    }

    #[test]
    fn removing_edges_never_shortens_routes() {
        let base = equator_lattice(5, 5);
        for seed in 0..10 {
            let fewer = base.clone().with_random_barriers(6, seed);
            for t in 0..25 {
                let a = shortest_path(&base, &base.nodes()[0], &base.nodes()[t])
                    .unwrap()
                    .total_km;
                if let Ok(b) = shortest_path(&fewer, &base.nodes()[0], &base.nodes()[t]) {
                    assert!(b.total_km >= a - 1e-12);
                }
            }
        }
    }

    #[test]
    fn json_round_trip_and_validation() {
        let g = equator_lattice(3, 3).with_random_barriers(2, 1);
        let back = StreetGraph::from_json(g.to_json().as_bytes()).unwrap();
        assert_eq!(back, g);
        assert!(matches!(
            StreetGraph::from_json(br#"{"nodes":[[0,0]],"edges":[[0,1]]}"#),
            Err(GraphError::UnknownNode(0, 1))
        ));
        assert!(matches!(
            StreetGraph::from_json(br#"{"nodes":[[0,0],[0,0]],"edges":[[0,1]]}"#),
            Err(GraphError::ZeroLength(0, 1))
        ));
        assert!(matches!(
            StreetGraph::from_json(br#"{"nodes":[[0,0],[0,1]],"edges":[],"removed":[[0,1]]}"#),
            Err(GraphError::NotAnEdge(0, 1))
        ));
        assert!(matches!(
            StreetGraph::from_json(br#"{"nodes":[[95,0]],"edges":[]}"#),
            Err(GraphError::BadNode(0))
        ));
    }

    #[test]
    fn snapping_ties_go_to_lowest_id() {
        let g = StreetGraph::new(vec![p(0.0, -0.01), p(0.0, 0.01)]);
        assert_eq!(g.snap(&p(0.0, 0.0)), Some(0));
        assert_eq!(StreetGraph::new(vec![]).snap(&p(0.0, 0.0)), None);
    }
}
