//! Builds the graph representation of a farm scenario: upstream-neighbour
//! geometry, directed wind graphs, the edge-graph transform and the
//! per-turbine upstream sequences consumed by the MLP/BLSTM baselines.

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::wake::{downwind_unit, NormStats, ScenarioRecord};

/// Upstream criterion half-angle in degrees; strict inequality.
pub const UPSTREAM_HALF_ANGLE: f64 = 30.0;

/// Signed angle in degrees, in (-180, 180], between the downwind direction
/// and the displacement from candidate `j` to target `i`. Zero means `j` is
/// directly upwind of `i`.
pub fn upstream_angle(
    positions: &[(f64, f64)],
    target: usize,
    candidate: usize,
    wind_direction: f64,
) -> Result<f64> {
    assert_ne!(target, candidate, "a turbine cannot be its own neighbour");
    let (ux, uy) = downwind_unit(wind_direction);
    let dx = positions[target].0 - positions[candidate].0;
    let dy = positions[target].1 - positions[candidate].1;
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::CoincidentTurbines {
            i: target,
            j: candidate,
        });
    }
    let cross = ux * dy - uy * dx;
    let dot = ux * dx + uy * dy;
    let mut deg = cross.atan2(dot).to_degrees();
    if deg <= -180.0 {
        deg += 360.0;
    }
    Ok(deg)
}

/// Distance from candidate to target projected on the downwind axis.
pub fn downwind_distance(
    positions: &[(f64, f64)],
    target: usize,
    candidate: usize,
    wind_direction: f64,
) -> f64 {
    let (ux, uy) = downwind_unit(wind_direction);
    let dx = positions[target].0 - positions[candidate].0;
    let dy = positions[target].1 - positions[candidate].1;
    ux * dx + uy * dy
}

pub fn euclidean_distance(positions: &[(f64, f64)], i: usize, j: usize) -> f64 {
    ((positions[i].0 - positions[j].0).powi(2) + (positions[i].1 - positions[j].1).powi(2)).sqrt()
}

/// Indices of all turbines strictly within the upstream cone of `target`,
/// optionally capped at `max_distance` (euclidean). Sorted by ascending
/// downwind distance.
pub fn upstream_neighbors(
    positions: &[(f64, f64)],
    target: usize,
    wind_direction: f64,
    max_distance: Option<f64>,
) -> Result<Vec<usize>> {
    let mut found: Vec<(f64, usize)> = Vec::new();
    for j in 0..positions.len() {
        if j == target {
            continue;
        }
        let alpha = upstream_angle(positions, target, j, wind_direction)?;
        if alpha.abs() >= UPSTREAM_HALF_ANGLE {
            continue;
        }
        if let Some(cap) = max_distance {
            if euclidean_distance(positions, target, j) > cap {
                continue;
            }
        }
        found.push((downwind_distance(positions, target, j, wind_direction), j));
    }
    found.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    Ok(found.into_iter().map(|(_, j)| j).collect())
}

/// The farm graph over one or more scenarios. Multiple scenarios can
/// be merged into a disjoint union; `node_graph`/`edge_graph` map every node
/// and edge back to its scenario and `u` holds one global row per scenario.
#[derive(Debug, Clone)]
pub struct WindGraph {
    /// Global features, one row per scenario.
    pub u: Tensor,
    /// Node features [n_nodes x d_v].
    pub v: Tensor,
    /// Edge features [n_edges x d_e].
    pub e: Tensor,
    pub senders: Vec<usize>,
    pub receivers: Vec<usize>,
    pub node_graph: Vec<usize>,
    pub edge_graph: Vec<usize>,
    pub n_graphs: usize,
    /// Normalised per-turbine power targets [n_nodes x 1].
    pub node_targets: Option<Tensor>,
    /// Normalised farm power targets [n_graphs x 1].
    pub global_targets: Option<Tensor>,
}

impl WindGraph {
    pub fn n_nodes(&self) -> usize {
        self.v.rows()
    }

    pub fn n_edges(&self) -> usize {
        self.senders.len()
    }

    /// Disjoint union of several graphs, with node/edge indices offset.
    pub fn merge(graphs: &[WindGraph]) -> WindGraph {
        assert!(!graphs.is_empty());
        let dv = graphs[0].v.cols();
        let de = graphs[0].e.cols();
        let du = graphs[0].u.cols();
        let mut v_rows = Vec::new();
        let mut e_rows = Vec::new();
        let mut u_rows = Vec::new();
        let mut senders = Vec::new();
        let mut receivers = Vec::new();
        let mut node_graph = Vec::new();
        let mut edge_graph = Vec::new();
        let mut node_t = Vec::new();
        let mut glob_t = Vec::new();
        let has_targets = graphs.iter().all(|g| g.node_targets.is_some());
        let mut node_offset = 0;
        let mut graph_offset = 0;
        for g in graphs {
            for r in 0..g.v.rows() {
                v_rows.push(g.v.row_slice(r).to_vec());
            }
            for r in 0..g.e.rows() {
                e_rows.push(g.e.row_slice(r).to_vec());
            }
            for r in 0..g.u.rows() {
                u_rows.push(g.u.row_slice(r).to_vec());
            }
            senders.extend(g.senders.iter().map(|&s| s + node_offset));
            receivers.extend(g.receivers.iter().map(|&r| r + node_offset));
            node_graph.extend(g.node_graph.iter().map(|&i| i + graph_offset));
            edge_graph.extend(g.edge_graph.iter().map(|&i| i + graph_offset));
            if has_targets {
                node_t.extend_from_slice(g.node_targets.as_ref().unwrap().data());
                glob_t.extend_from_slice(g.global_targets.as_ref().unwrap().data());
            }
            node_offset += g.v.rows();
            graph_offset += g.n_graphs;
        }
        WindGraph {
            u: Tensor::from_rows(&u_rows, du),
            v: Tensor::from_rows(&v_rows, dv),
            e: Tensor::from_rows(&e_rows, de),
            senders,
            receivers,
            node_graph,
            edge_graph,
            n_graphs: graph_offset,
            node_targets: has_targets.then(|| Tensor::column(node_t)),
            global_targets: has_targets.then(|| Tensor::column(glob_t)),
        }
    }
}

/// Build the directed wind graph of one scenario. Edge `i -> j` exists when
/// turbine `i` is an upstream neighbour of `j`; edge features are the scaled
/// distance and the sine/cosine of the upstream angle.
pub fn build_graph(record: &ScenarioRecord, norm: &NormStats) -> Result<WindGraph> {
    let positions = record.positions();
    let n = positions.len();
    let ws_scaled = norm.ws.scale(record.ws);
    let mut senders = Vec::new();
    let mut receivers = Vec::new();
    let mut e_rows: Vec<Vec<f64>> = Vec::new();
    for j in 0..n {
        for i in upstream_neighbors(&positions, j, record.theta, None)? {
            let alpha = upstream_angle(&positions, j, i, record.theta)?.to_radians();
            let dist = euclidean_distance(&positions, j, i);
            senders.push(i);
            receivers.push(j);
            e_rows.push(vec![norm.dist.scale(dist), alpha.sin(), alpha.cos()]);
        }
    }
    let v = Tensor::from_rows(&vec![vec![ws_scaled]; n], 1);
    let node_targets = Tensor::column(
        record
            .powers
            .iter()
            .map(|&p| norm.turbine_power.scale(p))
            .collect(),
    );
    let global_targets = Tensor::column(vec![norm.farm_power.scale(record.farm_power)]);
    let n_edges = senders.len();
    Ok(WindGraph {
        u: Tensor::matrix(1, 1, vec![ws_scaled])?,
        v,
        e: Tensor::from_rows(&e_rows, 3),
        senders,
        receivers,
        node_graph: vec![0; n],
        edge_graph: vec![0; n_edges],
        n_graphs: 1,
        node_targets: Some(node_targets),
        global_targets: Some(global_targets),
    })
}

/// The derived graph whose nodes are the parent graph's edges. An edge-graph
/// edge `a -> b` exists when the receiver of parent edge `a` equals the
/// sender of parent edge `b`; `via` records the shared node.
#[derive(Debug, Clone, Default)]
pub struct EdgeGraph {
    /// Parent-edge index acting as the edge-graph sender.
    pub senders: Vec<usize>,
    /// Parent-edge index acting as the edge-graph receiver.
    pub receivers: Vec<usize>,
    /// Shared parent node for each edge-graph edge.
    pub via: Vec<usize>,
}

impl EdgeGraph {
    pub fn n_links(&self) -> usize {
        self.senders.len()
    }
}

/// Map parent edges to edge-graph nodes and connect `(k,i) -> (i,j)` pairs.
pub fn edge_graph_transform(g: &WindGraph) -> EdgeGraph {
    let mut by_sender: Vec<Vec<usize>> = vec![Vec::new(); g.n_nodes()];
    for (idx, &s) in g.senders.iter().enumerate() {
        by_sender[s].push(idx);
    }
    let mut out = EdgeGraph::default();
    for (a, &recv) in g.receivers.iter().enumerate() {
        for &b in &by_sender[recv] {
            out.senders.push(a);
            out.receivers.push(b);
            out.via.push(recv);
        }
    }
    out
}

/// Neighbour ordering for the sequence models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SequenceOrder {
    NearestFirst,
    FarthestFirst,
}

/// Per-turbine input of the sequence baselines: normalised free-stream speed
/// plus one (distance, sin, cos) triple per upstream neighbour.
#[derive(Debug, Clone)]
pub struct UpstreamSequence {
    pub target: usize,
    /// Normalised free-stream wind speed.
    pub ws: f64,
    /// (scaled distance, sin alpha, cos alpha), ordered per `SequenceOrder`.
    pub triples: Vec<(f64, f64, f64)>,
}

/// One upstream sequence per turbine, ordered by downwind distance.
pub fn build_upstream_sequences(
    record: &ScenarioRecord,
    norm: &NormStats,
    order: SequenceOrder,
) -> Result<Vec<UpstreamSequence>> {
    let positions = record.positions();
    let ws = norm.ws.scale(record.ws);
    let mut out = Vec::with_capacity(positions.len());
    for target in 0..positions.len() {
        let mut neighbors = upstream_neighbors(&positions, target, record.theta, None)?;
        if order == SequenceOrder::FarthestFirst {
            neighbors.reverse();
        }
        let triples = neighbors
            .into_iter()
            .map(|j| {
                let alpha = upstream_angle(&positions, target, j, record.theta)
                    .expect("neighbour is not coincident")
                    .to_radians();
                let dist = euclidean_distance(&positions, target, j);
                (norm.dist.scale(dist), alpha.sin(), alpha.cos())
            })
            .collect();
        out.push(UpstreamSequence {
            target,
            ws,
            triples,
        });
    }
    Ok(out)
}
