//! Training loop (Adam + early stopping), evaluation in the two-column MAE
//! protocol, and attention-weight extraction for a trained graph model.

use crate::baselines::{BaselineModel, BaselineVariant, BlstmModel, PaddedMlpModel};
use crate::error::{Error, Result};
use crate::gnn::{AttentionWeights, GnnModel, GraphKind};
use crate::graph::{
    build_graph, build_upstream_sequences, SequenceOrder, UpstreamSequence, WindGraph,
};
use crate::nn::ParamStore;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;
use crate::wake::{NormStats, ScenarioRecord, Splits};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// The seven models of the comparison table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    BsFarm,
    BsTurb,
    Mlp,
    Blstm,
    OGraph,
    NGraph,
    FGraph,
}

impl ModelKind {
    pub const ALL: [ModelKind; 7] = [
        ModelKind::BsFarm,
        ModelKind::BsTurb,
        ModelKind::Mlp,
        ModelKind::Blstm,
        ModelKind::OGraph,
        ModelKind::NGraph,
        ModelKind::FGraph,
    ];

    pub fn display_name(&self) -> &'static str {
        match self {
            ModelKind::BsFarm => "BS_Farm",
            ModelKind::BsTurb => "BS_Turb",
            ModelKind::Mlp => "MLP",
            ModelKind::Blstm => "BLSTM",
            ModelKind::OGraph => "O-Graph",
            ModelKind::NGraph => "N-Graph",
            ModelKind::FGraph => "F-Graph",
        }
    }

    pub fn cli_name(&self) -> &'static str {
        match self {
            ModelKind::BsFarm => "bs-farm",
            ModelKind::BsTurb => "bs-turb",
            ModelKind::Mlp => "mlp",
            ModelKind::Blstm => "blstm",
            ModelKind::OGraph => "o-graph",
            ModelKind::NGraph => "n-graph",
            ModelKind::FGraph => "f-graph",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.cli_name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown model kind '{s}' (valid: {})",
                    Self::ALL.map(|k| k.cli_name()).join(", ")
                ))
            })
    }

    pub fn graph_kind(&self) -> Option<GraphKind> {
        match self {
            ModelKind::OGraph => Some(GraphKind::OGraph),
            ModelKind::NGraph => Some(GraphKind::NGraph),
            ModelKind::FGraph => Some(GraphKind::FGraph),
            _ => None,
        }
    }
}

/// A trainable model of any family, tagged with its comparison-table kind.
pub enum Model {
    Baseline(BaselineModel),
    PaddedMlp(PaddedMlpModel),
    Blstm(BlstmModel),
    Gnn(GraphKind, GnnModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Baseline(b) => match b.variant {
                BaselineVariant::Farm => ModelKind::BsFarm,
                BaselineVariant::Turbine => ModelKind::BsTurb,
            },
            Model::PaddedMlp(_) => ModelKind::Mlp,
            Model::Blstm(_) => ModelKind::Blstm,
            Model::Gnn(k, _) => match k {
                GraphKind::OGraph => ModelKind::OGraph,
                GraphKind::NGraph => ModelKind::NGraph,
                GraphKind::FGraph => ModelKind::FGraph,
            },
        }
    }

    pub fn store(&self) -> &ParamStore {
        match self {
            Model::Baseline(m) => &m.store,
            Model::PaddedMlp(m) => &m.store,
            Model::Blstm(m) => &m.store,
            Model::Gnn(_, m) => &m.store,
        }
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        match self {
            Model::Baseline(m) => &mut m.store,
            Model::PaddedMlp(m) => &mut m.store,
            Model::Blstm(m) => &mut m.store,
            Model::Gnn(_, m) => &mut m.store,
        }
    }
}

/// Training loss; MAE is always the reported metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    Mse,
    Mae,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub loss: LossKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-4,
            batch_size: 16,
            max_epochs: 500,
            patience: 20,
            seed: 0,
            loss: LossKind::Mse,
        }
    }
}

impl TrainConfig {
    /// Default batch sizing per model family: 16 graphs for GNNs, 128
    /// turbine samples otherwise.
    pub fn default_for(kind: ModelKind) -> Self {
        let batch_size = if kind.graph_kind().is_some() { 16 } else { 128 };
        TrainConfig {
            batch_size,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::Config("learning rate must be > 0".into()));
        }
        if self.batch_size == 0 || self.patience == 0 {
            return Err(Error::Config("batch size and patience must be >= 1".into()));
        }
        Ok(())
    }
}

/// Mean absolute error over paired values.
pub fn mae(y_hat: &[f64], y: &[f64]) -> Result<f64> {
    if y_hat.len() != y.len() || y.is_empty() {
        return Err(Error::ShapeMismatch {
            op: "mae",
            lhs: vec![y_hat.len()],
            rhs: vec![y.len()],
        });
    }
    Ok(y_hat
        .iter()
        .zip(y)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / y.len() as f64)
}

/// Adam optimiser state over a parameter store (first/second moments in
/// store order).
pub struct Adam {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(store: &ParamStore, lr: f64) -> Self {
        let zeros: Vec<Tensor> = store
            .entries()
            .iter()
            .map(|e| Tensor::zeros(e.value.rows(), e.value.cols()))
            .collect();
        Adam {
            m: zeros.clone(),
            v: zeros,
            t: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One update from gradients aligned with the store's entries (missing
    /// gradients count as zero).
    pub fn step(&mut self, store: &mut ParamStore, grads: &[Option<Tensor>]) -> Result<()> {
        assert_eq!(grads.len(), store.len());
        for (e, g) in store.entries().iter().zip(grads) {
            if let Some(g) = g {
                if g.data().iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFiniteGradient {
                        name: e.name.clone(),
                    });
                }
            }
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (i, entry) in store.entries_mut().iter_mut().enumerate() {
            let zero;
            let g = match &grads[i] {
                Some(g) => g,
                None => {
                    zero = Tensor::zeros(entry.value.rows(), entry.value.cols());
                    &zero
                }
            };
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            let p = entry.value.data_mut();
            for j in 0..p.len() {
                let gj = g.data()[j];
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * gj;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * gj * gj;
                let mh = m[j] / bc1;
                let vh = v[j] / bc2;
                p[j] -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

/// One turbine sample for the sequence models.
pub struct SeqSample {
    pub seq: UpstreamSequence,
    pub target: f64,
    pub scenario: usize,
}

/// One sample for the layout-blind baselines: scaled (n_turbines, ws) and
/// target.
pub struct PairSample {
    pub n_scaled: f64,
    pub ws_scaled: f64,
    pub target: f64,
}

/// Model-family-specific view of one data split.
pub enum PreparedSplit {
    Graphs(Vec<WindGraph>),
    Sequences(Vec<SeqSample>),
    Pairs(Vec<PairSample>),
}

impl PreparedSplit {
    pub fn len(&self) -> usize {
        match self {
            PreparedSplit::Graphs(g) => g.len(),
            PreparedSplit::Sequences(s) => s.len(),
            PreparedSplit::Pairs(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Convert scenarios into the input representation of a model family.
pub fn prepare_split(
    kind: ModelKind,
    records: &[ScenarioRecord],
    norm: &NormStats,
) -> Result<PreparedSplit> {
    match kind {
        ModelKind::OGraph | ModelKind::NGraph | ModelKind::FGraph => Ok(PreparedSplit::Graphs(
            records
                .iter()
                .map(|r| build_graph(r, norm))
                .collect::<Result<_>>()?,
        )),
        ModelKind::Mlp | ModelKind::Blstm => {
            let mut samples = Vec::new();
            for r in records {
                let seqs = build_upstream_sequences(r, norm, SequenceOrder::NearestFirst)?;
                for s in seqs {
                    samples.push(SeqSample {
                        target: norm.turbine_power.scale(r.powers[s.target]),
                        scenario: r.id,
                        seq: s,
                    });
                }
            }
            Ok(PreparedSplit::Sequences(samples))
        }
        ModelKind::BsFarm => Ok(PreparedSplit::Pairs(
            records
                .iter()
                .map(|r| PairSample {
                    n_scaled: norm.n_turbines.scale(r.turbines.len() as f64),
                    ws_scaled: norm.ws.scale(r.ws),
                    target: norm.farm_power.scale(r.farm_power),
                })
                .collect(),
        )),
        ModelKind::BsTurb => {
            let mut samples = Vec::new();
            for r in records {
                let n_scaled = norm.n_turbines.scale(r.turbines.len() as f64);
                let ws_scaled = norm.ws.scale(r.ws);
                for &p in &r.powers {
                    samples.push(PairSample {
                        n_scaled,
                        ws_scaled,
                        target: norm.turbine_power.scale(p),
                    });
                }
            }
            Ok(PreparedSplit::Pairs(samples))
        }
    }
}

fn deviation_loss(tape: &mut Tape, pred: Var, target: Var, loss: LossKind) -> Result<Var> {
    let d = tape.sub(pred, target)?;
    let e = match loss {
        LossKind::Mse => tape.square(d)?,
        LossKind::Mae => tape.abs(d)?,
    };
    tape.mean_all(e)
}

/// Forward pass and scalar training loss over one batch of sample indices.
fn batch_loss(
    model: &Model,
    data: &PreparedSplit,
    idxs: &[usize],
    loss: LossKind,
) -> Result<(Tape, Var, crate::nn::StagedParams)> {
    let mut tape = Tape::new();
    let staged = model.store().stage(&mut tape);
    let var = match (model, data) {
        (Model::Gnn(_, m), PreparedSplit::Graphs(graphs)) => {
            let selected: Vec<WindGraph> = idxs.iter().map(|&i| graphs[i].clone()).collect();
            let merged = WindGraph::merge(&selected);
            let out = m.forward(&mut tape, &staged, &merged, false)?;
            let node_t = tape.leaf(merged.node_targets.clone().ok_or_else(|| {
                Error::Data("graph has no node targets".into())
            })?);
            let glob_t = tape.leaf(merged.global_targets.clone().ok_or_else(|| {
                Error::Data("graph has no global targets".into())
            })?);
            let ln = deviation_loss(&mut tape, out.node_pred, node_t, loss)?;
            let lg = deviation_loss(&mut tape, out.global_pred, glob_t, loss)?;
            tape.add(ln, lg)?
        }
        (Model::Blstm(m), PreparedSplit::Sequences(samples)) => {
            let seqs: Vec<&UpstreamSequence> = idxs.iter().map(|&i| &samples[i].seq).collect();
            let pred = m.forward(&mut tape, &staged, &seqs)?;
            let t = tape.leaf(Tensor::matrix(
                idxs.len(),
                1,
                idxs.iter().map(|&i| samples[i].target).collect(),
            )?);
            deviation_loss(&mut tape, pred, t, loss)?
        }
        (Model::PaddedMlp(m), PreparedSplit::Sequences(samples)) => {
            let seqs: Vec<&UpstreamSequence> = idxs.iter().map(|&i| &samples[i].seq).collect();
            let scen: Vec<usize> = idxs.iter().map(|&i| samples[i].scenario).collect();
            let pred = m.forward(&mut tape, &staged, &seqs, &scen)?;
            let t = tape.leaf(Tensor::matrix(
                idxs.len(),
                1,
                idxs.iter().map(|&i| samples[i].target).collect(),
            )?);
            deviation_loss(&mut tape, pred, t, loss)?
        }
        (Model::Baseline(m), PreparedSplit::Pairs(samples)) => {
            let inputs: Vec<(f64, f64)> = idxs
                .iter()
                .map(|&i| (samples[i].n_scaled, samples[i].ws_scaled))
                .collect();
            let pred = m.forward(&mut tape, &staged, &inputs)?;
            let t = tape.leaf(Tensor::matrix(
                idxs.len(),
                1,
                idxs.iter().map(|&i| samples[i].target).collect(),
            )?);
            deviation_loss(&mut tape, pred, t, loss)?
        }
        _ => {
            return Err(Error::Data(
                "prepared split does not match model family".into(),
            ))
        }
    };
    Ok((tape, var, staged))
}

fn collect_grads(
    tape: &mut Tape,
    loss: Var,
    staged: &crate::nn::StagedParams,
) -> Result<Vec<Option<Tensor>>> {
    let grads = tape.backward(loss)?;
    Ok(staged
        .vars()
        .iter()
        .map(|&v| grads.try_get(v).cloned())
        .collect())
}

/// Per-epoch statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_mae: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_mae: f64,
    pub wall_seconds: f64,
}

/// MAE scores of one model on one split (normalised units). `None` marks a
/// metric the model family does not define.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelScores {
    pub mae_turbine: Option<f64>,
    pub mae_farm: Option<f64>,
    pub n_turbine_samples: usize,
    pub n_scenarios: usize,
}

/// Primary early-stopping metric of a model family: turbine MAE where
/// defined, farm MAE for the farm-level baseline.
fn primary_mae(scores: &ModelScores) -> f64 {
    scores.mae_turbine.or(scores.mae_farm).expect("a metric")
}

/// Train a model with Adam, early-stopping on validation MAE and restoring
/// the best-validation parameters.
pub fn train(
    model: &mut Model,
    records: &[ScenarioRecord],
    splits: &Splits,
    norm: &NormStats,
    cfg: &TrainConfig,
) -> Result<History> {
    cfg.validate()?;
    let started = std::time::Instant::now();
    let kind = model.kind();
    let train_recs: Vec<ScenarioRecord> =
        splits.train.iter().map(|&i| records[i].clone()).collect();
    let val_recs: Vec<ScenarioRecord> = splits.val.iter().map(|&i| records[i].clone()).collect();
    let train_data = prepare_split(kind, &train_recs, norm)?;
    if train_data.is_empty() {
        return Err(Error::Data("empty training split".into()));
    }
    let mut adam = Adam::new(model.store(), cfg.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_data.len()).collect();
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, Vec<Tensor>)> = None;
    let initial_val = primary_mae(&evaluate_model(model, &val_recs, norm)?);
    let mut since_best = 0usize;
    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut n_batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let (mut tape, loss, staged) = batch_loss(model, &train_data, chunk, cfg.loss)?;
            loss_sum += tape.value(loss).item();
            n_batches += 1;
            let grads = collect_grads(&mut tape, loss, &staged)?;
            adam.step(model.store_mut(), &grads)?;
        }
        let val_scores = evaluate_model(model, &val_recs, norm)?;
        let val_mae = primary_mae(&val_scores);
        history.push(EpochStats {
            epoch,
            train_loss: loss_sum / n_batches as f64,
            val_mae,
        });
        if val_mae > 10.0 * initial_val {
            return Err(Error::Diverged {
                mae: val_mae,
                initial: initial_val,
            });
        }
        let improved = best.as_ref().map_or(true, |(b, _, _)| val_mae < *b);
        if improved {
            best = Some((val_mae, epoch, model.store().snapshot()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    let (best_val_mae, best_epoch, snapshot) = best.expect("at least one epoch ran");
    model.store_mut().restore(&snapshot);
    Ok(History {
        epochs: history,
        best_epoch,
        best_val_mae,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Evaluate a model on scenarios, producing the two MAE columns in
/// normalised units.
pub fn evaluate_model(
    model: &Model,
    records: &[ScenarioRecord],
    norm: &NormStats,
) -> Result<ModelScores> {
    if records.is_empty() {
        return Err(Error::Data("empty evaluation split".into()));
    }
    let n_scenarios = records.len();
    match model {
        Model::Gnn(_, m) => {
            let mut tp = Vec::new();
            let mut tt = Vec::new();
            let mut fp = Vec::new();
            let mut ft = Vec::new();
            for chunk in records.chunks(32) {
                let graphs: Vec<WindGraph> = chunk
                    .iter()
                    .map(|r| build_graph(r, norm))
                    .collect::<Result<_>>()?;
                let merged = WindGraph::merge(&graphs);
                let (node, global) = m.predict(&merged)?;
                tp.extend_from_slice(node.data());
                tt.extend_from_slice(merged.node_targets.as_ref().unwrap().data());
                fp.extend_from_slice(global.data());
                ft.extend_from_slice(merged.global_targets.as_ref().unwrap().data());
            }
            Ok(ModelScores {
                mae_turbine: Some(mae(&tp, &tt)?),
                mae_farm: Some(mae(&fp, &ft)?),
                n_turbine_samples: tp.len(),
                n_scenarios,
            })
        }
        Model::Blstm(_) | Model::PaddedMlp(_) => {
            let mut tp = Vec::new();
            let mut tt = Vec::new();
            let mut fp = Vec::new();
            let mut ft = Vec::new();
            for r in records {
                let seqs = build_upstream_sequences(r, norm, SequenceOrder::NearestFirst)?;
                let refs: Vec<&UpstreamSequence> = seqs.iter().collect();
                let mut tape = Tape::new();
                let staged = model.store().stage(&mut tape);
                let pred = match model {
                    Model::Blstm(m) => m.forward(&mut tape, &staged, &refs)?,
                    Model::PaddedMlp(m) => {
                        let scen = vec![r.id; refs.len()];
                        m.forward(&mut tape, &staged, &refs, &scen)?
                    }
                    _ => unreachable!(),
                };
                let pred = tape.value(pred);
                // farm prediction: de-normalised turbine predictions summed,
                // re-normalised on the farm scale
                let farm_watts: f64 = (0..seqs.len())
                    .map(|i| norm.turbine_power.unscale(pred.get(i, 0)))
                    .sum();
                fp.push(norm.farm_power.scale(farm_watts));
                ft.push(norm.farm_power.scale(r.farm_power));
                for (i, s) in seqs.iter().enumerate() {
                    tp.push(pred.get(i, 0));
                    tt.push(norm.turbine_power.scale(r.powers[s.target]));
                }
            }
            Ok(ModelScores {
                mae_turbine: Some(mae(&tp, &tt)?),
                mae_farm: Some(mae(&fp, &ft)?),
                n_turbine_samples: tp.len(),
                n_scenarios,
            })
        }
        Model::Baseline(m) => {
            let mut preds = Vec::new();
            let mut targets = Vec::new();
            let mut n_turbine_samples = 0;
            for r in records {
                let n_scaled = norm.n_turbines.scale(r.turbines.len() as f64);
                let ws_scaled = norm.ws.scale(r.ws);
                match m.variant {
                    BaselineVariant::Farm => {
                        preds.push(m.predict(n_scaled, ws_scaled)?);
                        targets.push(norm.farm_power.scale(r.farm_power));
                    }
                    BaselineVariant::Turbine => {
                        let p = m.predict(n_scaled, ws_scaled)?;
                        for &t in &r.powers {
                            preds.push(p);
                            targets.push(norm.turbine_power.scale(t));
                        }
                        n_turbine_samples += r.powers.len();
                    }
                }
            }
            let score = mae(&preds, &targets)?;
            Ok(match m.variant {
                BaselineVariant::Farm => ModelScores {
                    mae_turbine: None,
                    mae_farm: Some(score),
                    n_turbine_samples: 0,
                    n_scenarios,
                },
                BaselineVariant::Turbine => ModelScores {
                    mae_turbine: Some(score),
                    mae_farm: None,
                    n_turbine_samples,
                    n_scenarios,
                },
            })
        }
    }
}

/// One row of the comparison table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRow {
    pub model: String,
    pub mae_turbine: Option<f64>,
    pub mae_farm: Option<f64>,
    pub epochs: usize,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.6}"))
}

impl EvalReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,mae_turbine,mae_farm,epochs,wall_seconds\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{:.3}\n",
                r.model,
                fmt_opt(r.mae_turbine),
                fmt_opt(r.mae_farm),
                r.epochs,
                r.wall_seconds
            ));
        }
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<10} {:>12} {:>12} {:>7} {:>9}\n",
            "Model", "MAE Turbine", "MAE Farm", "Epochs", "Wall(s)"
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<10} {:>12} {:>12} {:>7} {:>9.1}\n",
                r.model,
                fmt_opt(r.mae_turbine),
                fmt_opt(r.mae_farm),
                r.epochs,
                r.wall_seconds
            ));
        }
        out
    }
}

/// Geometry accompanying extracted attention weights, for overlay plots.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Overlay {
    pub scenario: usize,
    pub ws: f64,
    pub theta: f64,
    pub positions: Vec<(f64, f64)>,
    /// Directed edges (sender, receiver) of the wind graph.
    pub edges: Vec<(usize, usize)>,
}

/// Run a graph model on one scenario and return its attention weights with
/// the geometry needed for plotting.
pub fn extract_attention(
    model: &Model,
    record: &ScenarioRecord,
    norm: &NormStats,
) -> Result<(AttentionWeights, Overlay)> {
    let gnn: &GnnModel = match model {
        Model::Gnn(_, m) if m.config.has_attention() => m,
        Model::Gnn(_, _) => return Err(Error::NoAttention),
        _ => return Err(Error::NoAttention),
    };
    let g = build_graph(record, norm)?;
    let (_, _, weights) = gnn.predict_with_attention(&g)?;
    let overlay = Overlay {
        scenario: record.id,
        ws: record.ws,
        theta: record.theta,
        positions: record.turbines.iter().map(|t| (t.x, t.y)).collect(),
        edges: g
            .senders
            .iter()
            .zip(&g.receivers)
            .map(|(&s, &r)| (s, r))
            .collect(),
    };
    Ok((weights, overlay))
}
