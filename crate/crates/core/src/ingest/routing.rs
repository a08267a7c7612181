//! Street graph and bicycle routing for reconstructed trips.

use std::cmp::Ordering;
use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use crate::geo::{haversine_m, GeoPoint, StreetSegment};
use crate::ingest::snapshots::Trip;
use crate::util::par_map;

/// One street in the routing graph.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StreetEdge {
    pub segment: StreetSegment,
    /// Whether bicycles may use this street.
    pub bicycle: bool,
    /// Posted speed limit in km/h, when known.
    pub maxspeed: Option<f64>,
}

/// Undirected street graph. Nodes are segment endpoints, deduplicated by
/// exact coordinate so shared intersections connect.
#[derive(Debug, Clone)]
pub struct StreetGraph {
    edges: Vec<StreetEdge>,
    nodes: Vec<GeoPoint>,
    /// node -> (neighbour node, edge index), over all edges
    adjacency: Vec<Vec<(usize, usize)>>,
    /// whether the node touches at least one bicycle-permitted edge
    bike_node: Vec<bool>,
}

/// Result of routing one trip.
pub enum RouteOutcome {
    Routed(Trip),
    /// The endpoints cannot be connected over bicycle-permitted streets.
    Unroutable(Trip),
}

/// Batch routing result, keeping unroutable trips separate so cleaning can
/// account for them in their own removal bucket.
#[derive(Debug, Clone, Default)]
pub struct RoutingOutcome {
    pub routed: Vec<Trip>,
    pub unroutable: Vec<Trip>,
}

#[derive(PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl StreetGraph {
    pub fn new(edges: Vec<StreetEdge>) -> Self {
        let mut keys: HashMap<(u64, u64), usize> = HashMap::new();
        let mut nodes: Vec<GeoPoint> = Vec::new();
        let mut adjacency: Vec<Vec<(usize, usize)>> = Vec::new();
        let mut intern = |p: GeoPoint, nodes: &mut Vec<GeoPoint>| {
            *keys.entry((p.lat.to_bits(), p.lon.to_bits())).or_insert_with(|| {
                nodes.push(p);
                nodes.len() - 1
            })
        };
        let mut endpoints = Vec::with_capacity(edges.len());
        for edge in &edges {
            let a = intern(edge.segment.polyline[0], &mut nodes);
            let b = intern(*edge.segment.polyline.last().unwrap(), &mut nodes);
            endpoints.push((a, b));
        }
        adjacency.resize(nodes.len(), Vec::new());
        let mut bike_node = vec![false; nodes.len()];
        for (e, &(a, b)) in endpoints.iter().enumerate() {
            adjacency[a].push((b, e));
            if b != a {
                adjacency[b].push((a, e));
            }
            if edges[e].bicycle {
                bike_node[a] = true;
                bike_node[b] = true;
            }
        }
        StreetGraph { edges, nodes, adjacency, bike_node }
    }

    pub fn edges(&self) -> &[StreetEdge] {
        &self.edges
    }

    pub fn nodes(&self) -> &[GeoPoint] {
        &self.nodes
    }

    /// Nearest node that touches a bicycle-permitted edge; ties go to the
    /// lowest node index. `None` when no street permits bicycles.
    pub fn nearest_bicycle_node(&self, p: &GeoPoint) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for (i, node) in self.nodes.iter().enumerate() {
            if !self.bike_node[i] {
                continue;
            }
            let d = haversine_m(*p, *node);
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, i));
            }
        }
        best.map(|(_, i)| i)
    }

    /// Minimum-length path over bicycle-permitted edges. Returns the node
    /// sequence, the edge indices between them, and the total edge length.
    pub fn shortest_bicycle_path(
        &self,
        from: usize,
        to: usize,
    ) -> Option<(Vec<usize>, Vec<usize>, f64)> {
        let n = self.nodes.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut pred: Vec<Option<(usize, usize)>> = vec![None; n];
        let mut heap = BinaryHeap::new();
        dist[from] = 0.0;
        heap.push(Reverse((OrdF64(0.0), from)));
        while let Some(Reverse((OrdF64(d), u))) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            if u == to {
                break;
            }
            for &(v, e) in &self.adjacency[u] {
                if !self.edges[e].bicycle {
                    continue;
                }
                let nd = d + self.edges[e].segment.length_m;
                if nd < dist[v] {
                    dist[v] = nd;
                    pred[v] = Some((u, e));
                    heap.push(Reverse((OrdF64(nd), v)));
                }
            }
        }
        if !dist[to].is_finite() {
            return None;
        }
        let mut node_path = vec![to];
        let mut edge_path = Vec::new();
        let mut cur = to;
        while let Some((p, e)) = pred[cur] {
            node_path.push(p);
            edge_path.push(e);
            cur = p;
        }
        node_path.reverse();
        edge_path.reverse();
        Some((node_path, edge_path, dist[to]))
    }
}

/// Fill in `route`, `routed_distance`, and `mean_speed` for one trip, or flag
/// it unroutable when its endpoints sit in disconnected bicycle components.
pub fn route_trip(graph: &StreetGraph, mut trip: Trip) -> RouteOutcome {
    let (Some(from), Some(to)) = (
        graph.nearest_bicycle_node(&trip.origin),
        graph.nearest_bicycle_node(&trip.destination),
    ) else {
        return RouteOutcome::Unroutable(trip);
    };
    let Some((node_path, edge_path, path_len)) = graph.shortest_bicycle_path(from, to) else {
        return RouteOutcome::Unroutable(trip);
    };
    let snap_from = haversine_m(trip.origin, graph.nodes[from]);
    let snap_to = haversine_m(trip.destination, graph.nodes[to]);
    let mut route = vec![trip.origin, graph.nodes[node_path[0]]];
    for (i, &e) in edge_path.iter().enumerate() {
        let seg = &graph.edges[e].segment;
        let u = graph.nodes[node_path[i]];
        let forward = seg.polyline[0].lat.to_bits() == u.lat.to_bits()
            && seg.polyline[0].lon.to_bits() == u.lon.to_bits();
        if forward {
            route.extend(seg.polyline.iter().skip(1));
        } else {
            route.extend(seg.polyline.iter().rev().skip(1));
        }
    }
    route.push(trip.destination);
    let routed = snap_from + path_len + snap_to;
    trip.mean_speed = Some(routed / trip.duration * 3.6);
    trip.routed_distance = Some(routed);
    trip.route = Some(route);
    RouteOutcome::Routed(trip)
}

/// Route a batch of trips in parallel, partitioning them into routed and
/// unroutable.
pub fn route_trips(graph: &StreetGraph, trips: Vec<Trip>) -> RoutingOutcome {
    let results = par_map(trips.len(), |i| route_trip(graph, trips[i].clone()));
    let mut outcome = RoutingOutcome::default();
    for r in results {
        match r {
            RouteOutcome::Routed(t) => outcome.routed.push(t),
            RouteOutcome::Unroutable(t) => outcome.unroutable.push(t),
        }
    }
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::polyline_length_m;
    use chrono::NaiveDate;
    use rand::Rng;

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint { lat, lon }
    }

    fn edge(id: &str, pts: &[GeoPoint], bicycle: bool) -> StreetEdge {
        StreetEdge {
            segment: StreetSegment::new(id.to_string(), pts.to_vec()).unwrap(),
            bicycle,
            maxspeed: Some(30.0),
        }
    }

    fn trip(origin: GeoPoint, destination: GeoPoint) -> Trip {
        let day = NaiveDate::from_ymd_opt(2022, 6, 1).unwrap();
        Trip::new(
            "b1".to_string(),
            origin,
            destination,
            day.and_hms_opt(9, 0, 0).unwrap(),
            day.and_hms_opt(9, 10, 0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn line_graph_routes_through_the_middle() {
        let a = pt(52.500, 13.400);
        let b = pt(52.505, 13.400);
        let c = pt(52.510, 13.400);
        let graph = StreetGraph::new(vec![edge("ab", &[a, b], true), edge("bc", &[b, c], true)]);
        let RouteOutcome::Routed(t) = route_trip(&graph, trip(a, c)) else {
            panic!("expected a route")
        };
        let expect = haversine_m(a, b) + haversine_m(b, c);
        let got = t.routed_distance.unwrap();
        assert!((got - expect).abs() / expect < 1e-9, "{got} vs {expect}");
        assert_eq!(t.route.as_ref().unwrap().len(), 5); // origin, a, b, c, destination
        // The traveled polyline measures exactly what the distance claims.
        let poly = polyline_length_m(t.route.as_ref().unwrap());
        assert!((poly - got).abs() / got < 1e-9);
        // km/h over 600 s
        let speed = t.mean_speed.unwrap();
        assert!((speed - got / 600.0 * 3.6).abs() < 1e-12);
    }

    #[test]
    fn forbidden_edge_forces_the_detour() {
        // Square q0-q1-q2-q3 with the direct q0-q1 side closed to bikes.
        let q0 = pt(52.500, 13.400);
        let q1 = pt(52.500, 13.410);
        let q2 = pt(52.506, 13.410);
        let q3 = pt(52.506, 13.400);
        let graph = StreetGraph::new(vec![
            edge("s01", &[q0, q1], false),
            edge("s12", &[q1, q2], true),
            edge("s23", &[q2, q3], true),
            edge("s30", &[q3, q0], true),
        ]);
        let RouteOutcome::Routed(t) = route_trip(&graph, trip(q0, q1)) else {
            panic!("expected a route")
        };
        let detour =
            haversine_m(q0, q3) + haversine_m(q3, q2) + haversine_m(q2, q1);
        let got = t.routed_distance.unwrap();
        assert!((got - detour).abs() / detour < 1e-9, "{got} vs {detour}");
    }

    #[test]
    fn same_snap_node_gives_twice_the_snap_distance() {
        let a = pt(52.500, 13.400);
        let b = pt(52.505, 13.400);
        let graph = StreetGraph::new(vec![edge("ab", &[a, b], true)]);
        let near_a = pt(52.5001, 13.4);
        let RouteOutcome::Routed(t) = route_trip(&graph, trip(near_a, near_a)) else {
            panic!("expected a route")
        };
        let snap = haversine_m(near_a, a);
        let got = t.routed_distance.unwrap();
        assert!((got - 2.0 * snap).abs() < 1e-9, "{got} vs {}", 2.0 * snap);
        assert_eq!(t.route.as_ref().unwrap().len(), 3);
    }

    #[test]
    fn disconnected_components_flag_the_trip_unroutable() {
        let a = pt(52.500, 13.400);
        let b = pt(52.505, 13.400);
        let c = pt(52.600, 13.600);
        let d = pt(52.605, 13.600);
        let graph = StreetGraph::new(vec![edge("ab", &[a, b], true), edge("cd", &[c, d], true)]);
        match route_trip(&graph, trip(a, c)) {
            RouteOutcome::Unroutable(t) => assert!(t.route.is_none()),
            RouteOutcome::Routed(_) => panic!("should be unroutable"),
        }
    }

    /// Shortest simple path over permitted edges by exhaustive DFS.
    fn brute_force(graph: &StreetGraph, from: usize, to: usize) -> Option<f64> {
        fn dfs(
            graph: &StreetGraph,
            u: usize,
            to: usize,
            visited: &mut Vec<bool>,
            len: f64,
            best: &mut Option<f64>,
        ) {
            if u == to {
                if best.map_or(true, |b| len < b) {
                    *best = Some(len);
                }
                return;
            }
            for &(v, e) in &graph.adjacency[u] {
                if !graph.edges[e].bicycle || visited[v] {
                    continue;
                }
                visited[v] = true;
                dfs(graph, v, to, visited, len + graph.edges[e].segment.length_m, best);
                visited[v] = false;
            }
        }
        let mut visited = vec![false; graph.nodes.len()];
        visited[from] = true;
        let mut best = None;
        dfs(graph, from, to, &mut visited, 0.0, &mut best);
        best
    }

    #[test]
    fn dijkstra_matches_brute_force_on_small_random_graphs() {
        let mut rng = crate::util::rng_from(17, &[0x726f7574]);
        for _ in 0..120 {
            let n = rng.gen_range(2..=8);
            let nodes: Vec<GeoPoint> = (0..n)
                .map(|_| pt(52.5 + rng.gen::<f64>() * 0.05, 13.4 + rng.gen::<f64>() * 0.05))
                .collect();
            let n_edges = rng.gen_range(1..=2 * n);
            let mut edges = Vec::new();
            for e in 0..n_edges {
                let i = rng.gen_range(0..n);
                let j = rng.gen_range(0..n);
                if i == j {
                    continue;
                }
                edges.push(edge(&format!("e{e}"), &[nodes[i], nodes[j]], rng.gen_bool(0.8)));
            }
            if edges.is_empty() {
                continue;
            }
            let graph = StreetGraph::new(edges);
            let origin = pt(52.5 + rng.gen::<f64>() * 0.05, 13.4 + rng.gen::<f64>() * 0.05);
            let dest = pt(52.5 + rng.gen::<f64>() * 0.05, 13.4 + rng.gen::<f64>() * 0.05);
            let (Some(from), Some(to)) = (
                graph.nearest_bicycle_node(&origin),
                graph.nearest_bicycle_node(&dest),
            ) else {
                continue;
            };
            let oracle = brute_force(&graph, from, to);
            match graph.shortest_bicycle_path(from, to) {
                None => assert!(oracle.is_none()),
                Some((_, _, len)) => {
                    let want = oracle.expect("dijkstra found a path the oracle missed");
                    assert!(
                        (len - want).abs() <= 1e-9 * want.max(1.0),
                        "{len} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn batch_routing_partitions_routed_and_unroutable() {
        let a = pt(52.500, 13.400);
        let b = pt(52.505, 13.400);
        let c = pt(52.600, 13.600);
        let d = pt(52.605, 13.600);
        let graph = StreetGraph::new(vec![edge("ab", &[a, b], true), edge("cd", &[c, d], true)]);
        let outcome = route_trips(&graph, vec![trip(a, b), trip(a, c), trip(c, d)]);
        assert_eq!(outcome.routed.len(), 2);
        assert_eq!(outcome.unroutable.len(), 1);
    }
}
