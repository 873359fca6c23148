//! The overlay graph and its routing tables.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap, VecDeque};

use keymesh_core::SaeId;

use crate::config::{AttachedKme, Bundle};
use crate::RoutingError;

// Tolerance when matching alternative shortest paths; weights are exact in
// practice (integers or few decimal places) so this only absorbs float
// association noise.
const COST_EPS: f64 = 1e-9;

/// A trusted node as seen by routing.
#[derive(Debug, Clone)]
pub struct KmsNode {
    pub kmstn_id: String,
    pub host: String,
    pub port: u16,
    pub pqc_port: u16,
    pub attached_kmes: Vec<AttachedKme>,
    pub bound_master_saes: Vec<SaeId>,
}

impl KmsNode {
    pub fn service_endpoint(&self) -> (String, u16) {
        (self.host.clone(), self.port)
    }

    pub fn pqc_endpoint(&self) -> (String, u16) {
        (self.host.clone(), self.pqc_port)
    }
}

/// One undirected overlay link; `a < b` after normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct KmsEdge {
    pub a: String,
    pub b: String,
    pub qkd_link: bool,
    pub weight: f64,
}

/// Validated overlay topology with the next-hop table computed at startup.
#[derive(Debug, Clone)]
pub struct KmsGraph {
    nodes: BTreeMap<String, KmsNode>,
    edges: Vec<KmsEdge>,
    adjacency: BTreeMap<String, Vec<(String, f64)>>,
    next_hop: BTreeMap<(String, String), String>,
}

impl KmsGraph {
    /// Builds and validates the graph from a configuration bundle, then
    /// precomputes shortest-path next hops for every connected pair.
    pub fn from_bundle(bundle: &Bundle) -> Result<Self, RoutingError> {
        let mut nodes = BTreeMap::new();
        for config in &bundle.kmstns {
            let node = KmsNode {
                kmstn_id: config.kmstn_id.clone(),
                host: config.host.clone(),
                port: config.port,
                pqc_port: config.pqc_port,
                attached_kmes: config.attached_kmes.clone(),
                bound_master_saes: config.bound_master_saes.clone(),
            };
            for kme in &node.attached_kmes {
                url::Url::parse(&kme.endpoint).map_err(|e| {
                    RoutingError::Config(format!(
                        "node {}: KME endpoint {:?}: {e}",
                        node.kmstn_id, kme.endpoint
                    ))
                })?;
            }
            if nodes.insert(config.kmstn_id.clone(), node).is_some() {
                return Err(RoutingError::Config(format!(
                    "duplicate kmstn_id {:?}",
                    config.kmstn_id
                )));
            }
        }

        let mut edges = Vec::new();
        for edge in &bundle.edges {
            let (a, b) = if edge.a <= edge.b {
                (edge.a.clone(), edge.b.clone())
            } else {
                (edge.b.clone(), edge.a.clone())
            };
            if a == b {
                return Err(RoutingError::Config(format!("self edge at {a:?}")));
            }
            for end in [&a, &b] {
                if !nodes.contains_key(end) {
                    return Err(RoutingError::Config(format!(
                        "edge {a:?}-{b:?} references unknown node {end:?}"
                    )));
                }
            }
            if edges.iter().any(|e: &KmsEdge| e.a == a && e.b == b) {
                return Err(RoutingError::Config(format!("duplicate edge {a:?}-{b:?}")));
            }
            if !(edge.weight > 0.0) || !edge.weight.is_finite() {
                return Err(RoutingError::Config(format!(
                    "edge {a:?}-{b:?} has non-positive weight {}",
                    edge.weight
                )));
            }
            edges.push(KmsEdge {
                a,
                b,
                qkd_link: edge.qkd_link,
                weight: edge.weight,
            });
        }

        for sae in &bundle.saes {
            if !nodes.contains_key(&sae.kmstn_id) {
                return Err(RoutingError::Config(format!(
                    "SAE {:?} bound to unknown node {:?}",
                    sae.sae_id, sae.kmstn_id
                )));
            }
        }

        // Every QKD-flagged edge needs a transport pair usable in both
        // directions: each end must attach a side whose SAE ids mirror the
        // other's.
        for edge in edges.iter().filter(|e| e.qkd_link) {
            for (src, dst) in [(&edge.a, &edge.b), (&edge.b, &edge.a)] {
                if transport_pair(&nodes[src.as_str()], &nodes[dst.as_str()]).is_none() {
                    return Err(RoutingError::Config(format!(
                        "QKD edge {:?}-{:?} has no usable pair in direction {src} -> {dst}",
                        edge.a, edge.b
                    )));
                }
            }
        }

        let mut graph = Self {
            nodes,
            edges,
            adjacency: BTreeMap::new(),
            next_hop: BTreeMap::new(),
        };
        graph.rebuild_adjacency();
        graph.compute_routes();
        Ok(graph)
    }

    fn rebuild_adjacency(&mut self) {
        let mut adjacency: BTreeMap<String, Vec<(String, f64)>> = self
            .nodes
            .keys()
            .map(|id| (id.clone(), Vec::new()))
            .collect();
        for edge in &self.edges {
            adjacency
                .get_mut(&edge.a)
                .expect("validated endpoint")
                .push((edge.b.clone(), edge.weight));
            adjacency
                .get_mut(&edge.b)
                .expect("validated endpoint")
                .push((edge.a.clone(), edge.weight));
        }
        for neighbors in adjacency.values_mut() {
            neighbors.sort_by(|x, y| x.0.cmp(&y.0));
        }
        self.adjacency = adjacency;
    }

    /// Fills the next-hop table. For each destination one Dijkstra pass
    /// yields distances; the next hop from `src` is then the
    /// lexicographically smallest neighbor lying on some minimum-weight
    /// path, which makes the table deterministic.
    fn compute_routes(&mut self) {
        let mut table = BTreeMap::new();
        for dst in self.nodes.keys() {
            let dist = self.dijkstra(dst);
            for src in self.nodes.keys() {
                if src == dst {
                    continue;
                }
                let Some(&src_dist) = dist.get(src.as_str()) else {
                    continue; // disconnected
                };
                let next = self.adjacency[src.as_str()]
                    .iter()
                    .find(|(neighbor, weight)| {
                        dist.get(neighbor.as_str())
                            .is_some_and(|&d| close(d + weight, src_dist))
                    })
                    .map(|(neighbor, _)| neighbor.clone())
                    .expect("a finite distance implies a consistent neighbor");
                table.insert((src.clone(), dst.clone()), next);
            }
        }
        self.next_hop = table;
    }

    fn dijkstra(&self, source: &str) -> HashMap<String, f64> {
        #[derive(PartialEq)]
        struct Entry(f64, String);
        impl Eq for Entry {}
        impl PartialOrd for Entry {
            fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
                Some(self.cmp(other))
            }
        }
        impl Ord for Entry {
            fn cmp(&self, other: &Self) -> Ordering {
                // Min-heap on (distance, id).
                other
                    .0
                    .partial_cmp(&self.0)
                    .expect("distances are finite")
                    .then_with(|| other.1.cmp(&self.1))
            }
        }

        let mut dist: HashMap<String, f64> = HashMap::new();
        let mut heap = BinaryHeap::new();
        dist.insert(source.to_string(), 0.0);
        heap.push(Entry(0.0, source.to_string()));

        while let Some(Entry(d, node)) = heap.pop() {
            if d > dist[&node] + COST_EPS {
                continue; // stale entry
            }
            for (neighbor, weight) in &self.adjacency[&node] {
                let candidate = d + weight;
                if dist
                    .get(neighbor)
                    .map_or(true, |&known| candidate < known - COST_EPS)
                {
                    dist.insert(neighbor.clone(), candidate);
                    heap.push(Entry(candidate, neighbor.clone()));
                }
            }
        }
        dist
    }

    /// On-demand route query: A* with an admissible, consistent heuristic
    /// (hop count toward the destination scaled by the minimum edge weight),
    /// so its cost always equals Dijkstra's.
    pub fn route_fallback(&self, src: &str, dst: &str) -> Result<Vec<String>, RoutingError> {
        if !self.nodes.contains_key(src) {
            return Err(RoutingError::UnknownNode(src.to_string()));
        }
        if !self.nodes.contains_key(dst) {
            return Err(RoutingError::UnknownNode(dst.to_string()));
        }
        if src == dst {
            return Ok(vec![src.to_string()]);
        }

        let min_weight = self
            .edges
            .iter()
            .map(|e| e.weight)
            .fold(f64::INFINITY, f64::min);
        let hops = self.bfs_hops(dst);
        let h = |node: &str| -> f64 {
            hops.get(node)
                .map(|&steps| steps as f64 * min_weight)
                .unwrap_or(f64::INFINITY)
        };

        #[derive(PartialEq)]
        struct Entry(f64, String);
        impl Eq for Entry {}
        impl PartialOrd for Entry {
            fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
                Some(self.cmp(other))
            }
        }
        impl Ord for Entry {
            fn cmp(&self, other: &Self) -> Ordering {
                other
                    .0
                    .partial_cmp(&self.0)
                    .expect("f-scores are finite")
                    .then_with(|| other.1.cmp(&self.1))
            }
        }

        let mut g_score: HashMap<String, f64> = HashMap::new();
        let mut parent: HashMap<String, String> = HashMap::new();
        let mut open = BinaryHeap::new();
        g_score.insert(src.to_string(), 0.0);
        if h(src).is_finite() {
            open.push(Entry(h(src), src.to_string()));
        }

        while let Some(Entry(_, node)) = open.pop() {
            if node == dst {
                let mut path = vec![dst.to_string()];
                let mut cursor = dst;
                while let Some(prev) = parent.get(cursor) {
                    path.push(prev.clone());
                    cursor = prev;
                }
                path.reverse();
                return Ok(path);
            }
            let node_g = g_score[&node];
            for (neighbor, weight) in &self.adjacency[&node] {
                let candidate = node_g + weight;
                if g_score
                    .get(neighbor)
                    .map_or(true, |&known| candidate < known - COST_EPS)
                {
                    g_score.insert(neighbor.clone(), candidate);
                    parent.insert(neighbor.clone(), node.clone());
                    open.push(Entry(candidate + h(neighbor), neighbor.clone()));
                }
            }
        }
        Err(RoutingError::Unreachable {
            src: src.to_string(),
            dst: dst.to_string(),
        })
    }

    fn bfs_hops(&self, from: &str) -> HashMap<String, usize> {
        let mut hops = HashMap::new();
        let mut queue = VecDeque::new();
        hops.insert(from.to_string(), 0);
        queue.push_back(from.to_string());
        while let Some(node) = queue.pop_front() {
            let depth = hops[&node];
            for (neighbor, _) in &self.adjacency[&node] {
                if !hops.contains_key(neighbor) {
                    hops.insert(neighbor.clone(), depth + 1);
                    queue.push_back(neighbor.clone());
                }
            }
        }
        hops
    }

    /// The unique node binding `sae` as a master SAE.
    pub fn resolve_destination(&self, sae: &SaeId) -> Result<&str, RoutingError> {
        let homes: Vec<&str> = self
            .nodes
            .values()
            .filter(|node| node.bound_master_saes.contains(sae))
            .map(|node| node.kmstn_id.as_str())
            .collect();
        match homes.as_slice() {
            [] => Err(RoutingError::UnknownSae(sae.to_string())),
            [home] => Ok(home),
            _ => Err(RoutingError::AmbiguousBinding(
                sae.to_string(),
                homes.iter().map(|s| s.to_string()).collect(),
            )),
        }
    }

    pub fn next_hop(&self, src: &str, dst: &str) -> Option<&str> {
        self.next_hop
            .get(&(src.to_string(), dst.to_string()))
            .map(String::as_str)
    }

    /// The full precomputed next-hop table, keyed by (src, dst).
    pub fn next_hop_table(&self) -> &BTreeMap<(String, String), String> {
        &self.next_hop
    }

    /// Walks the next-hop table from `src` to `dst`, returning the full path
    /// and its cost.
    pub fn path_via_next_hops(&self, src: &str, dst: &str) -> Option<(Vec<String>, f64)> {
        if src == dst {
            return Some((vec![src.to_string()], 0.0));
        }
        let mut path = vec![src.to_string()];
        let mut cost = 0.0;
        let mut cursor = src.to_string();
        // Positive weights make the remaining distance strictly decrease, so
        // |nodes| steps suffice for any loop-free table.
        for _ in 0..self.nodes.len() {
            let next = self.next_hop(&cursor, dst)?.to_string();
            cost += self.edge_weight(&cursor, &next)?;
            path.push(next.clone());
            if next == dst {
                return Some((path, cost));
            }
            cursor = next;
        }
        None
    }

    pub fn edge(&self, a: &str, b: &str) -> Option<&KmsEdge> {
        let (x, y) = if a <= b { (a, b) } else { (b, a) };
        self.edges.iter().find(|e| e.a == x && e.b == y)
    }

    fn edge_weight(&self, a: &str, b: &str) -> Option<f64> {
        self.edge(a, b).map(|e| e.weight)
    }

    pub fn is_qkd_edge(&self, a: &str, b: &str) -> bool {
        self.edge(a, b).is_some_and(|e| e.qkd_link)
    }

    pub fn node(&self, id: &str) -> Option<&KmsNode> {
        self.nodes.get(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &KmsNode> {
        self.nodes.values()
    }

    pub fn edges(&self) -> &[KmsEdge] {
        &self.edges
    }

    /// Finds the node that serves `host:port` as its key-delivery endpoint.
    pub fn node_by_service_endpoint(&self, host: &str, port: u16) -> Option<&KmsNode> {
        self.nodes
            .values()
            .find(|node| node.host == host && node.port == port)
    }
}

/// The transport pair for a hop `src -> dst`: an attachment at `src` whose
/// (master, slave) SAE ids appear mirrored at `dst`. Keys popped at the
/// `src` side are retrievable at the `dst` side by id.
pub fn transport_pair<'a>(src: &'a KmsNode, dst: &KmsNode) -> Option<&'a AttachedKme> {
    src.attached_kmes.iter().find(|mine| {
        dst.attached_kmes.iter().any(|theirs| {
            theirs.master_sae_id == mine.slave_sae_id && theirs.slave_sae_id == mine.master_sae_id
        })
    })
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= COST_EPS * b.abs().max(1.0)
}
