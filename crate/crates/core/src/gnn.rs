//! The modular attention graph network: a stack of graph blocks where scaled
//! dot-product attention can be switched on at any of five sites (edge
//! update, edge-to-node aggregation, node update, edge-to-global and
//! node-to-global aggregation), followed by three decode MLPs.
//!
//! With every site switched off the block reduces to the plain
//! edge/node/global update with sum aggregations.

use crate::error::{Error, Result};
use crate::graph::{edge_graph_transform, WindGraph};
use crate::nn::{Linear, Mlp, ParamStore, StagedParams, LEAKY_SLOPE};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Which attention sites of a graph block are enabled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttnFlags {
    pub edge: bool,
    pub e2v: bool,
    pub node: bool,
    pub e2u: bool,
    pub v2u: bool,
}

impl AttnFlags {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn all() -> Self {
        AttnFlags {
            edge: true,
            e2v: true,
            node: true,
            e2u: true,
            v2u: true,
        }
    }

    /// Attention only at the edge-to-node aggregation and the node update.
    pub fn n_graph() -> Self {
        AttnFlags {
            e2v: true,
            node: true,
            ..Self::default()
        }
    }

    pub fn any(&self) -> bool {
        self.edge || self.e2v || self.node || self.e2u || self.v2u
    }
}

/// Per-block configuration: attention toggles, head geometry and the widths
/// of the three update MLPs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphBlockConfig {
    pub flags: AttnFlags,
    pub n_heads: usize,
    pub head_dim: usize,
    pub phi_e: Vec<usize>,
    pub phi_v: Vec<usize>,
    pub phi_u: Vec<usize>,
}

impl GraphBlockConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_heads == 0 || self.head_dim == 0 {
            return Err(Error::Config("n_heads and head_dim must be >= 1".into()));
        }
        if self.phi_e.is_empty() || self.phi_v.is_empty() || self.phi_u.is_empty() {
            return Err(Error::Config("update MLPs need at least one layer".into()));
        }
        Ok(())
    }
}

/// The three model presets compared in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GraphKind {
    /// Vanilla blocks, no attention anywhere.
    OGraph,
    /// Attention at the edge-to-node aggregation and node update of the
    /// first block.
    NGraph,
    /// Attention at all five sites of the first block.
    FGraph,
}

impl GraphKind {
    pub fn first_block_flags(&self) -> AttnFlags {
        match self {
            GraphKind::OGraph => AttnFlags::none(),
            GraphKind::NGraph => AttnFlags::n_graph(),
            GraphKind::FGraph => AttnFlags::all(),
        }
    }
}

/// Whole-network configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GnnConfig {
    pub blocks: Vec<GraphBlockConfig>,
    /// Hidden widths of the three decode MLPs; a linear unit head is
    /// appended.
    pub decode: Vec<usize>,
    pub node_in: usize,
    pub edge_in: usize,
    pub global_in: usize,
}

impl GnnConfig {
    /// Three stacked blocks with attention (if any) only in the first,
    /// matching the experiment presets.
    pub fn preset(kind: GraphKind) -> Self {
        Self::preset_sized(
            kind,
            &[vec![256, 128, 64], vec![128, 64, 32], vec![64, 64]],
            vec![64, 64],
            3,
            16,
        )
    }

    /// Preset with custom widths, used to shrink models for quick runs.
    pub fn preset_sized(
        kind: GraphKind,
        block_widths: &[Vec<usize>],
        decode: Vec<usize>,
        n_heads: usize,
        head_dim: usize,
    ) -> Self {
        let blocks = block_widths
            .iter()
            .enumerate()
            .map(|(i, w)| GraphBlockConfig {
                flags: if i == 0 {
                    kind.first_block_flags()
                } else {
                    AttnFlags::none()
                },
                n_heads,
                head_dim,
                phi_e: w.clone(),
                phi_v: w.clone(),
                phi_u: w.clone(),
            })
            .collect();
        GnnConfig {
            blocks,
            decode,
            node_in: 1,
            edge_in: 3,
            global_in: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::Config("need at least one graph block".into()));
        }
        for b in &self.blocks {
            b.validate()?;
        }
        Ok(())
    }

    pub fn has_attention(&self) -> bool {
        self.blocks.iter().any(|b| b.flags.any())
    }
}

/// One head of a score-based attention site (EdgeAttn / NodeAttn): key,
/// query and value maps.
struct ScoreHead {
    key: Linear,
    query: Linear,
    value: Linear,
}

/// Score-based attention site: per-head K/Q/F plus the multi-head combiner H.
struct ScoreAttn {
    heads: Vec<ScoreHead>,
    combine: Linear,
}

/// One head of an aggregate attention site (E2V / E2U / V2U): key and query
/// maps only; values are the raw features scaled by the weights.
struct AggHead {
    key: Linear,
    query: Linear,
}

struct AggAttn {
    heads: Vec<AggHead>,
    combine: Linear,
}

struct BlockParams {
    config: GraphBlockConfig,
    edge_attn: Option<ScoreAttn>,
    e2v_attn: Option<AggAttn>,
    node_attn: Option<ScoreAttn>,
    e2u_attn: Option<AggAttn>,
    v2u_attn: Option<AggAttn>,
    phi_e: Mlp,
    phi_v: Mlp,
    phi_u: Mlp,
    /// Output widths (global, node, edge) of this block.
    out_widths: (usize, usize, usize),
}

/// Attention site label used in recorded weights and exports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttnSite {
    Edge,
    E2V,
    Node,
    E2U,
    V2U,
}

/// One normalized attention coefficient. The meaning of `sender`/`receiver`
/// depends on the site: parent-edge indices for `Edge`, node indices for
/// `E2V`/`Node`, and (edge or node index, graph index) for the global sites.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightEntry {
    pub sender: usize,
    pub receiver: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SiteWeights {
    pub block: usize,
    pub site: AttnSite,
    /// `heads[h]` lists every (sender, receiver, weight) of head `h`.
    pub heads: Vec<Vec<WeightEntry>>,
}

/// All attention coefficients recorded during one forward pass.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AttentionWeights {
    pub sites: Vec<SiteWeights>,
}

impl AttentionWeights {
    pub fn site(&self, block: usize, site: AttnSite) -> Option<&SiteWeights> {
        self.sites
            .iter()
            .find(|s| s.block == block && s.site == site)
    }
}

/// Decoded predictions of one forward pass.
pub struct GnnOutput {
    /// Normalised per-turbine power predictions [n_nodes x 1].
    pub node_pred: Var,
    /// Normalised farm power predictions [n_graphs x 1].
    pub global_pred: Var,
    pub attention: Option<AttentionWeights>,
}

/// The stacked graph network with decode MLPs.
pub struct GnnModel {
    pub config: GnnConfig,
    pub store: ParamStore,
    pub seed: u64,
    blocks: Vec<BlockParams>,
    decode_node: Mlp,
    decode_global: Mlp,
    decode_edge: Mlp,
}

impl GnnModel {
    pub fn new(config: GnnConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut du = config.global_in;
        let mut dv = config.node_in;
        let mut de = config.edge_in;
        let mut blocks = Vec::with_capacity(config.blocks.len());
        for (bi, bc) in config.blocks.iter().enumerate() {
            let d = bc.head_dim;
            let nh = bc.n_heads;
            let p = |site: &str, head: usize, part: &str| format!("block{bi}.{site}.h{head}.{part}");

            let edge_attn = bc.flags.edge.then(|| ScoreAttn {
                heads: (0..nh)
                    .map(|h| ScoreHead {
                        key: Linear::new(&mut store, &mut rng, p("edge_attn", h, "k"), du + de + dv, d),
                        query: Linear::new(&mut store, &mut rng, p("edge_attn", h, "q"), de + dv, d),
                        value: Linear::new(&mut store, &mut rng, p("edge_attn", h, "f"), de, d),
                    })
                    .collect(),
                combine: Linear::new(&mut store, &mut rng, format!("block{bi}.edge_attn.h_combine"), nh * d, d),
            });
            let z_e = if bc.flags.edge { d } else { 0 };
            let phi_e = Mlp::new(
                &mut store,
                &mut rng,
                &format!("block{bi}.phi_e"),
                de + z_e + 2 * dv + du,
                &bc.phi_e,
                false,
            );
            let we = *bc.phi_e.last().unwrap();

            let e2v_attn = bc.flags.e2v.then(|| AggAttn {
                heads: (0..nh)
                    .map(|h| AggHead {
                        key: Linear::new(&mut store, &mut rng, p("e2v_attn", h, "k"), dv + we, d),
                        query: Linear::new(&mut store, &mut rng, p("e2v_attn", h, "q"), dv + we + du, d),
                    })
                    .collect(),
                combine: Linear::new(&mut store, &mut rng, format!("block{bi}.e2v_attn.h_combine"), nh * we, we),
            });

            let node_attn = bc.flags.node.then(|| ScoreAttn {
                heads: (0..nh)
                    .map(|h| ScoreHead {
                        key: Linear::new(&mut store, &mut rng, p("node_attn", h, "k"), du + we + dv, d),
                        query: Linear::new(&mut store, &mut rng, p("node_attn", h, "q"), dv + we, d),
                        value: Linear::new(&mut store, &mut rng, p("node_attn", h, "f"), dv, d),
                    })
                    .collect(),
                combine: Linear::new(&mut store, &mut rng, format!("block{bi}.node_attn.h_combine"), nh * d, d),
            });
            let z_v = if bc.flags.node { d } else { 0 };
            let phi_v = Mlp::new(
                &mut store,
                &mut rng,
                &format!("block{bi}.phi_v"),
                dv + z_v + we + du,
                &bc.phi_v,
                false,
            );
            let wv = *bc.phi_v.last().unwrap();

            let e2u_attn = bc.flags.e2u.then(|| AggAttn {
                heads: (0..nh)
                    .map(|h| AggHead {
                        key: Linear::new(&mut store, &mut rng, p("e2u_attn", h, "k"), we, d),
                        query: Linear::new(&mut store, &mut rng, p("e2u_attn", h, "q"), du, d),
                    })
                    .collect(),
                combine: Linear::new(&mut store, &mut rng, format!("block{bi}.e2u_attn.h_combine"), nh * we, we),
            });
            let v2u_attn = bc.flags.v2u.then(|| AggAttn {
                heads: (0..nh)
                    .map(|h| AggHead {
                        key: Linear::new(&mut store, &mut rng, p("v2u_attn", h, "k"), wv, d),
                        query: Linear::new(&mut store, &mut rng, p("v2u_attn", h, "q"), du, d),
                    })
                    .collect(),
                combine: Linear::new(&mut store, &mut rng, format!("block{bi}.v2u_attn.h_combine"), nh * wv, wv),
            });
            let phi_u = Mlp::new(
                &mut store,
                &mut rng,
                &format!("block{bi}.phi_u"),
                wv + we + du,
                &bc.phi_u,
                false,
            );
            let wu = *bc.phi_u.last().unwrap();

            blocks.push(BlockParams {
                config: bc.clone(),
                edge_attn,
                e2v_attn,
                node_attn,
                e2u_attn,
                v2u_attn,
                phi_e,
                phi_v,
                phi_u,
                out_widths: (wu, wv, we),
            });
            du = wu;
            dv = wv;
            de = we;
        }
        let mut decode_widths = config.decode.clone();
        decode_widths.push(1);
        let decode_node = Mlp::new(&mut store, &mut rng, "decode_node", dv, &decode_widths, true);
        let decode_global = Mlp::new(&mut store, &mut rng, "decode_global", du, &decode_widths, true);
        let decode_edge = Mlp::new(&mut store, &mut rng, "decode_edge", de, &decode_widths, true);
        Ok(GnnModel {
            config,
            store,
            seed,
            blocks,
            decode_node,
            decode_global,
            decode_edge,
        })
    }

    /// Run the stacked blocks plus decoders on a (possibly merged) graph.
    pub fn forward(
        &self,
        tape: &mut Tape,
        staged: &StagedParams,
        g: &WindGraph,
        record: bool,
    ) -> Result<GnnOutput> {
        let mut u = tape.leaf(g.u.clone());
        let mut v = tape.leaf(g.v.clone());
        let mut e = tape.leaf(g.e.clone());
        let mut attention = record.then(AttentionWeights::default);
        for (bi, block) in self.blocks.iter().enumerate() {
            let (nu, nv, ne) = block.forward(tape, staged, g, u, v, e, bi, attention.as_mut())?;
            u = nu;
            v = nv;
            e = ne;
        }
        let node_pred = self.decode_node.forward(tape, staged, v)?;
        let global_pred = self.decode_global.forward(tape, staged, u)?;
        // edge decode is part of the architecture but carries no supervision
        let _edge_pred = self.decode_edge.forward(tape, staged, e)?;
        Ok(GnnOutput {
            node_pred,
            global_pred,
            attention,
        })
    }

    /// Convenience inference on a fresh tape.
    pub fn predict(&self, g: &WindGraph) -> Result<(Tensor, Tensor)> {
        let mut tape = Tape::new();
        let staged = self.store.stage(&mut tape);
        let out = self.forward(&mut tape, &staged, g, false)?;
        Ok((
            tape.value(out.node_pred).clone(),
            tape.value(out.global_pred).clone(),
        ))
    }

    /// Forward pass that records every attention coefficient.
    pub fn predict_with_attention(&self, g: &WindGraph) -> Result<(Tensor, Tensor, AttentionWeights)> {
        if !self.config.has_attention() {
            return Err(Error::NoAttention);
        }
        let mut tape = Tape::new();
        let staged = self.store.stage(&mut tape);
        let out = self.forward(&mut tape, &staged, g, true)?;
        Ok((
            tape.value(out.node_pred).clone(),
            tape.value(out.global_pred).clone(),
            out.attention.expect("recording was requested"),
        ))
    }
}

/// Scaled dot-product scores: rowwise dot of mapped keys and queries over
/// sqrt(d).
fn scaled_scores(
    tape: &mut Tape,
    staged: &StagedParams,
    key: &Linear,
    query: &Linear,
    key_in: Var,
    query_in: Var,
    head_dim: usize,
) -> Result<Var> {
    let k = key.forward(tape, staged, key_in)?;
    let q = query.forward(tape, staged, query_in)?;
    let prod = tape.mul(k, q)?;
    let s = tape.row_sum(prod)?;
    tape.scale(s, 1.0 / (head_dim as f64).sqrt())
}

fn record_site(
    attention: &mut Option<&mut AttentionWeights>,
    tape: &Tape,
    block: usize,
    site: AttnSite,
    head: usize,
    alpha: Var,
    senders: &[usize],
    receivers: &[usize],
) {
    if let Some(attn) = attention.as_deref_mut() {
        let w = tape.value(alpha);
        let entries: Vec<WeightEntry> = senders
            .iter()
            .zip(receivers)
            .enumerate()
            .map(|(r, (&s, &t))| WeightEntry {
                sender: s,
                receiver: t,
                weight: w.data()[r],
            })
            .collect();
        match attn
            .sites
            .iter_mut()
            .find(|s| s.block == block && s.site == site)
        {
            Some(sw) => sw.heads.push(entries),
            None => attn.sites.push(SiteWeights {
                block,
                site,
                heads: vec![entries],
            }),
        }
        let _ = head;
    }
}

impl BlockParams {
    #[allow(clippy::too_many_arguments)]
    fn forward(
        &self,
        tape: &mut Tape,
        staged: &StagedParams,
        g: &WindGraph,
        u: Var,
        v: Var,
        e: Var,
        block_idx: usize,
        mut attention: Option<&mut AttentionWeights>,
    ) -> Result<(Var, Var, Var)> {
        let n_nodes = g.n_nodes();
        let n_edges = g.n_edges();
        let n_graphs = g.n_graphs;
        let d = self.config.head_dim;

        // ---- edge attention over the edge-graph ----
        let z_edge = match &self.edge_attn {
            Some(attn) => {
                let eg = edge_graph_transform(g);
                if eg.n_links() == 0 {
                    Some(tape.leaf(Tensor::zeros(n_edges, d)))
                } else {
                    let link_graphs: Vec<usize> =
                        eg.senders.iter().map(|&a| g.edge_graph[a]).collect();
                    let u_rows = tape.gather_rows(u, &link_graphs)?;
                    let e_send = tape.gather_rows(e, &eg.senders)?;
                    let v_via = tape.gather_rows(v, &eg.via)?;
                    let key_in = tape.concat_cols(&[u_rows, e_send, v_via])?;
                    let e_recv = tape.gather_rows(e, &eg.receivers)?;
                    let query_in = tape.concat_cols(&[e_recv, v_via])?;
                    let mut head_outs = Vec::with_capacity(attn.heads.len());
                    for (h, head) in attn.heads.iter().enumerate() {
                        let scores = scaled_scores(tape, staged, &head.key, &head.query, key_in, query_in, d)?;
                        let alpha = tape.segment_softmax(scores, &eg.receivers, n_edges)?;
                        record_site(
                            &mut attention,
                            tape,
                            block_idx,
                            AttnSite::Edge,
                            h,
                            alpha,
                            &eg.senders,
                            &eg.receivers,
                        );
                        let values = head.value.forward(tape, staged, e_send)?;
                        let weighted = tape.scale_rows(values, alpha)?;
                        let summed = tape.segment_sum(weighted, &eg.receivers, n_edges)?;
                        head_outs.push(tape.leaky_relu(summed, LEAKY_SLOPE)?);
                    }
                    let cat = tape.concat_cols(&head_outs)?;
                    Some(attn.combine.forward(tape, staged, cat)?)
                }
            }
            None => None,
        };

        // ---- edge update ----
        let v_send = tape.gather_rows(v, &g.senders)?;
        let v_recv = tape.gather_rows(v, &g.receivers)?;
        let u_edge = tape.gather_rows(u, &g.edge_graph)?;
        let phi_e_in = match z_edge {
            Some(z) => tape.concat_cols(&[e, z, v_send, v_recv, u_edge])?,
            None => tape.concat_cols(&[e, v_send, v_recv, u_edge])?,
        };
        let e_new = self.phi_e.forward(tape, staged, phi_e_in)?;

        // ---- edge-to-node aggregation ----
        let ebar = match &self.e2v_attn {
            Some(attn) if n_edges > 0 => {
                let key_in = tape.concat_cols(&[v_send, e_new])?;
                let query_in = tape.concat_cols(&[v_recv, e_new, u_edge])?;
                let mut weighted_heads = Vec::with_capacity(attn.heads.len());
                for (h, head) in attn.heads.iter().enumerate() {
                    let scores = scaled_scores(tape, staged, &head.key, &head.query, key_in, query_in, d)?;
                    let alpha = tape.segment_softmax(scores, &g.receivers, n_nodes)?;
                    record_site(
                        &mut attention,
                        tape,
                        block_idx,
                        AttnSite::E2V,
                        h,
                        alpha,
                        &g.senders,
                        &g.receivers,
                    );
                    weighted_heads.push(tape.scale_rows(e_new, alpha)?);
                }
                let cat = tape.concat_cols(&weighted_heads)?;
                let combined = attn.combine.forward(tape, staged, cat)?;
                tape.segment_sum(combined, &g.receivers, n_nodes)?
            }
            _ => tape.segment_sum(e_new, &g.receivers, n_nodes)?,
        };

        // ---- node attention over sending nodes ----
        let z_node = match &self.node_attn {
            Some(attn) => {
                if n_edges == 0 {
                    Some(tape.leaf(Tensor::zeros(n_nodes, d)))
                } else {
                    let key_in = tape.concat_cols(&[u_edge, e_new, v_send])?;
                    let ebar_recv = tape.gather_rows(ebar, &g.receivers)?;
                    let query_in = tape.concat_cols(&[v_recv, ebar_recv])?;
                    let mut head_outs = Vec::with_capacity(attn.heads.len());
                    for (h, head) in attn.heads.iter().enumerate() {
                        let scores = scaled_scores(tape, staged, &head.key, &head.query, key_in, query_in, d)?;
                        let alpha = tape.segment_softmax(scores, &g.receivers, n_nodes)?;
                        record_site(
                            &mut attention,
                            tape,
                            block_idx,
                            AttnSite::Node,
                            h,
                            alpha,
                            &g.senders,
                            &g.receivers,
                        );
                        let values = head.value.forward(tape, staged, v_send)?;
                        let weighted = tape.scale_rows(values, alpha)?;
                        let summed = tape.segment_sum(weighted, &g.receivers, n_nodes)?;
                        head_outs.push(tape.leaky_relu(summed, LEAKY_SLOPE)?);
                    }
                    let cat = tape.concat_cols(&head_outs)?;
                    Some(attn.combine.forward(tape, staged, cat)?)
                }
            }
            None => None,
        };

        // ---- node update ----
        let u_node = tape.gather_rows(u, &g.node_graph)?;
        let phi_v_in = match z_node {
            Some(z) => tape.concat_cols(&[v, z, ebar, u_node])?,
            None => tape.concat_cols(&[v, ebar, u_node])?,
        };
        let v_new = self.phi_v.forward(tape, staged, phi_v_in)?;

        // ---- edge-to-global aggregation ----
        let ebar_u = match &self.e2u_attn {
            Some(attn) if n_edges > 0 => {
                let mut weighted_heads = Vec::with_capacity(attn.heads.len());
                for (h, head) in attn.heads.iter().enumerate() {
                    let scores = scaled_scores(tape, staged, &head.key, &head.query, e_new, u_edge, d)?;
                    let alpha = tape.segment_softmax(scores, &g.edge_graph, n_graphs)?;
                    record_site(
                        &mut attention,
                        tape,
                        block_idx,
                        AttnSite::E2U,
                        h,
                        alpha,
                        &(0..n_edges).collect::<Vec<_>>(),
                        &g.edge_graph,
                    );
                    weighted_heads.push(tape.scale_rows(e_new, alpha)?);
                }
                let cat = tape.concat_cols(&weighted_heads)?;
                let combined = attn.combine.forward(tape, staged, cat)?;
                tape.segment_sum(combined, &g.edge_graph, n_graphs)?
            }
            _ => tape.segment_sum(e_new, &g.edge_graph, n_graphs)?,
        };

        // ---- node-to-global aggregation ----
        let u_node_rows = tape.gather_rows(u, &g.node_graph)?;
        let vbar = match &self.v2u_attn {
            Some(attn) => {
                let mut weighted_heads = Vec::with_capacity(attn.heads.len());
                for (h, head) in attn.heads.iter().enumerate() {
                    let scores =
                        scaled_scores(tape, staged, &head.key, &head.query, v_new, u_node_rows, d)?;
                    let alpha = tape.segment_softmax(scores, &g.node_graph, n_graphs)?;
                    record_site(
                        &mut attention,
                        tape,
                        block_idx,
                        AttnSite::V2U,
                        h,
                        alpha,
                        &(0..n_nodes).collect::<Vec<_>>(),
                        &g.node_graph,
                    );
                    weighted_heads.push(tape.scale_rows(v_new, alpha)?);
                }
                let cat = tape.concat_cols(&weighted_heads)?;
                let combined = attn.combine.forward(tape, staged, cat)?;
                tape.segment_sum(combined, &g.node_graph, n_graphs)?
            }
            None => tape.segment_sum(v_new, &g.node_graph, n_graphs)?,
        };

        // ---- global update ----
        let phi_u_in = tape.concat_cols(&[vbar, ebar_u, u])?;
        let u_new = self.phi_u.forward(tape, staged, phi_u_in)?;

        let _ = self.out_widths;
        Ok((u_new, v_new, e_new))
    }
}
