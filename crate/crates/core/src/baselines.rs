//! Comparison models: a bidirectional LSTM over upstream-neighbour
//! sequences, a padded fixed-width MLP over the same inputs, and two
//! layout-blind baselines that see only the turbine count and the free-stream
//! wind speed.

use crate::error::{Error, Result};
use crate::graph::UpstreamSequence;
use crate::nn::{Mlp, ParamStore, StagedParams};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Width of one neighbour triple: (distance, sin alpha, cos alpha).
pub const TRIPLE_WIDTH: usize = 3;

/// Single LSTM cell: input, forget and output gates plus the tanh candidate,
/// no peepholes. Weights act on [x_t | h_{t-1}] rows.
pub struct LstmCell {
    /// Gate order: input, forget, candidate, output.
    wx: [crate::nn::ParamId; 4],
    wh: [crate::nn::ParamId; 4],
    bias: [crate::nn::ParamId; 4],
    pub in_width: usize,
    pub hidden: usize,
}

impl LstmCell {
    pub fn new(
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
        prefix: &str,
        in_width: usize,
        hidden: usize,
    ) -> Self {
        let gate = |store: &mut ParamStore, rng: &mut ChaCha8Rng, name: &str| {
            (
                store.add(
                    format!("{prefix}.{name}.wx"),
                    crate::nn::glorot_uniform(rng, in_width, hidden),
                ),
                store.add(
                    format!("{prefix}.{name}.wh"),
                    crate::nn::glorot_uniform(rng, hidden, hidden),
                ),
                store.add(format!("{prefix}.{name}.b"), Tensor::zeros(1, hidden)),
            )
        };
        let (ix, ih, ib) = gate(store, rng, "input");
        let (fx, fh, fb) = gate(store, rng, "forget");
        let (gx, gh, gb) = gate(store, rng, "cand");
        let (ox, oh, ob) = gate(store, rng, "output");
        LstmCell {
            wx: [ix, fx, gx, ox],
            wh: [ih, fh, gh, oh],
            bias: [ib, fb, gb, ob],
            in_width,
            hidden,
        }
    }

    /// One recurrence step over a batch of rows: x [B x in], h/c [B x H].
    pub fn step(
        &self,
        tape: &mut Tape,
        staged: &StagedParams,
        x: Var,
        h_prev: Var,
        c_prev: Var,
    ) -> Result<(Var, Var)> {
        let pre = |tape: &mut Tape, g: usize| -> Result<Var> {
            let xa = tape.matmul(x, staged.var(self.wx[g]))?;
            let ha = tape.matmul(h_prev, staged.var(self.wh[g]))?;
            let s = tape.add(xa, ha)?;
            tape.add_bias(s, staged.var(self.bias[g]))
        };
        let i_pre = pre(tape, 0)?;
        let i = tape.sigmoid(i_pre)?;
        let f_pre = pre(tape, 1)?;
        let f = tape.sigmoid(f_pre)?;
        let g_pre = pre(tape, 2)?;
        let g = tape.tanh(g_pre)?;
        let o_pre = pre(tape, 3)?;
        let o = tape.sigmoid(o_pre)?;
        let keep = tape.mul(f, c_prev)?;
        let write = tape.mul(i, g)?;
        let c = tape.add(keep, write)?;
        let ct = tape.tanh(c)?;
        let h = tape.mul(o, ct)?;
        Ok((h, c))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlstmConfig {
    pub hidden: usize,
    /// Hidden widths of the head MLP; a linear unit head is appended.
    pub head: Vec<usize>,
}

impl Default for BlstmConfig {
    fn default() -> Self {
        BlstmConfig {
            hidden: 32,
            head: vec![64, 64],
        }
    }
}

/// Bidirectional LSTM: one cell reads the neighbour sequence as given, an
/// independently parameterised cell reads it in reverse; the head MLP maps
/// [ws | fwd encoding | bwd encoding] to a power prediction.
pub struct BlstmModel {
    pub config: BlstmConfig,
    pub store: ParamStore,
    pub seed: u64,
    fwd: LstmCell,
    bwd: LstmCell,
    head: Mlp,
}

impl BlstmModel {
    pub fn new(config: BlstmConfig, seed: u64) -> Result<Self> {
        if config.hidden == 0 {
            return Err(Error::Config("BLSTM hidden size must be >= 1".into()));
        }
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fwd = LstmCell::new(&mut store, &mut rng, "fwd", TRIPLE_WIDTH, config.hidden);
        let bwd = LstmCell::new(&mut store, &mut rng, "bwd", TRIPLE_WIDTH, config.hidden);
        let mut head_widths = config.head.clone();
        head_widths.push(1);
        let head = Mlp::new(
            &mut store,
            &mut rng,
            "head",
            1 + 2 * config.hidden,
            &head_widths,
            true,
        );
        Ok(BlstmModel {
            config,
            store,
            seed,
            fwd,
            bwd,
            head,
        })
    }

    /// Run one direction over a group of equal-length sequences; `reverse`
    /// flips the read order. Returns the final hidden state [B x H].
    fn run_direction(
        &self,
        tape: &mut Tape,
        staged: &StagedParams,
        cell: &LstmCell,
        seqs: &[&UpstreamSequence],
        len: usize,
        reverse: bool,
    ) -> Result<Var> {
        let b = seqs.len();
        let mut h = tape.leaf(Tensor::zeros(b, cell.hidden));
        let mut c = h;
        for t in 0..len {
            let step = if reverse { len - 1 - t } else { t };
            let mut rows = Vec::with_capacity(b * TRIPLE_WIDTH);
            for s in seqs {
                let (d, sa, ca) = s.triples[step];
                rows.extend_from_slice(&[d, sa, ca]);
            }
            let x = tape.leaf(Tensor::matrix(b, TRIPLE_WIDTH, rows)?);
            let (nh, nc) = cell.step(tape, staged, x, h, c)?;
            h = nh;
            c = nc;
        }
        Ok(h)
    }

    /// Sequence encoding [B x 2H] for a group of equal-length sequences; an
    /// empty sequence encodes to zeros.
    fn encode_group(
        &self,
        tape: &mut Tape,
        staged: &StagedParams,
        seqs: &[&UpstreamSequence],
        len: usize,
    ) -> Result<Var> {
        if len == 0 {
            return Ok(tape.leaf(Tensor::zeros(seqs.len(), 2 * self.config.hidden)));
        }
        let hf = self.run_direction(tape, staged, &self.fwd, seqs, len, false)?;
        let hb = self.run_direction(tape, staged, &self.bwd, seqs, len, true)?;
        tape.concat_cols(&[hf, hb])
    }

    /// Batched predictions in the order of `seqs`: [B x 1].
    pub fn forward(
        &self,
        tape: &mut Tape,
        staged: &StagedParams,
        seqs: &[&UpstreamSequence],
    ) -> Result<Var> {
        assert!(!seqs.is_empty(), "empty batch");
        // bucket by sequence length so each group unrolls as one batch
        let mut by_len: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for (i, s) in seqs.iter().enumerate() {
            by_len.entry(s.triples.len()).or_default().push(i);
        }
        let mut group_outputs = Vec::with_capacity(by_len.len());
        let mut order = Vec::with_capacity(seqs.len());
        for (&len, idxs) in &by_len {
            let group: Vec<&UpstreamSequence> = idxs.iter().map(|&i| seqs[i]).collect();
            let enc = self.encode_group(tape, staged, &group, len)?;
            let ws_col = tape.leaf(Tensor::matrix(
                group.len(),
                1,
                group.iter().map(|s| s.ws).collect(),
            )?);
            let head_in = tape.concat_cols(&[ws_col, enc])?;
            group_outputs.push(self.head.forward(tape, staged, head_in)?);
            order.extend_from_slice(idxs);
        }
        let stacked = if group_outputs.len() == 1 {
            group_outputs[0]
        } else {
            tape.concat_rows(&group_outputs)?
        };
        // scatter back to input order
        let mut inverse = vec![0usize; seqs.len()];
        for (row, &orig) in order.iter().enumerate() {
            inverse[orig] = row;
        }
        tape.gather_rows(stacked, &inverse)
    }

    /// Single-sequence convenience prediction on a fresh tape.
    pub fn predict(&self, seq: &UpstreamSequence) -> Result<f64> {
        let mut tape = Tape::new();
        let staged = self.store.stage(&mut tape);
        let out = self.forward(&mut tape, &staged, &[seq])?;
        Ok(tape.value(out).item())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PaddedMlpConfig {
    /// Capacity of the padded neighbour slots; inputs are [ws | triples,
    /// zero-padded to this many].
    pub max_neighbors: usize,
    pub widths: Vec<usize>,
}

impl Default for PaddedMlpConfig {
    fn default() -> Self {
        PaddedMlpConfig {
            max_neighbors: 15,
            widths: vec![64, 64],
        }
    }
}

/// Fixed-width MLP over padded upstream-neighbour triples. Scenarios with
/// more neighbours than the capacity cannot be represented.
pub struct PaddedMlpModel {
    pub config: PaddedMlpConfig,
    pub store: ParamStore,
    pub seed: u64,
    mlp: Mlp,
}

impl PaddedMlpModel {
    pub fn new(config: PaddedMlpConfig, seed: u64) -> Result<Self> {
        if config.max_neighbors == 0 {
            return Err(Error::Config("padded MLP needs capacity >= 1".into()));
        }
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut widths = config.widths.clone();
        widths.push(1);
        let mlp = Mlp::new(
            &mut store,
            &mut rng,
            "mlp",
            1 + TRIPLE_WIDTH * config.max_neighbors,
            &widths,
            true,
        );
        Ok(PaddedMlpModel {
            config,
            store,
            seed,
            mlp,
        })
    }

    /// Flat input row [ws | padded triples]; `scenario` labels overflow
    /// errors.
    pub fn input_row(&self, seq: &UpstreamSequence, scenario: usize) -> Result<Vec<f64>> {
        if seq.triples.len() > self.config.max_neighbors {
            return Err(Error::Capacity {
                len: seq.triples.len(),
                capacity: self.config.max_neighbors,
                scenario,
            });
        }
        let mut row = Vec::with_capacity(1 + TRIPLE_WIDTH * self.config.max_neighbors);
        row.push(seq.ws);
        for &(d, s, c) in &seq.triples {
            row.extend_from_slice(&[d, s, c]);
        }
        row.resize(1 + TRIPLE_WIDTH * self.config.max_neighbors, 0.0);
        Ok(row)
    }

    /// Batched predictions [B x 1]; `scenarios[i]` labels overflow errors.
    pub fn forward(
        &self,
        tape: &mut Tape,
        staged: &StagedParams,
        seqs: &[&UpstreamSequence],
        scenarios: &[usize],
    ) -> Result<Var> {
        assert_eq!(seqs.len(), scenarios.len());
        let mut data = Vec::with_capacity(seqs.len() * (1 + TRIPLE_WIDTH * self.config.max_neighbors));
        for (s, &sc) in seqs.iter().zip(scenarios) {
            data.extend(self.input_row(s, sc)?);
        }
        let x = tape.leaf(Tensor::matrix(
            seqs.len(),
            1 + TRIPLE_WIDTH * self.config.max_neighbors,
            data,
        )?);
        self.mlp.forward(tape, staged, x)
    }

    pub fn predict(&self, seq: &UpstreamSequence, scenario: usize) -> Result<f64> {
        let mut tape = Tape::new();
        let staged = self.store.stage(&mut tape);
        let out = self.forward(&mut tape, &staged, &[seq], &[scenario])?;
        Ok(tape.value(out).item())
    }
}

/// Which quantity a layout-blind baseline regresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineVariant {
    Farm,
    Turbine,
}

/// Layout-blind MLP over [n_turbines, ws] only.
pub struct BaselineModel {
    pub variant: BaselineVariant,
    pub widths: Vec<usize>,
    pub store: ParamStore,
    pub seed: u64,
    mlp: Mlp,
}

impl BaselineModel {
    pub fn new(variant: BaselineVariant, widths: Vec<usize>, seed: u64) -> Result<Self> {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = widths.clone();
        w.push(1);
        let mlp = Mlp::new(&mut store, &mut rng, "mlp", 2, &w, true);
        Ok(BaselineModel {
            variant,
            widths,
            store,
            seed,
            mlp,
        })
    }

    /// Batched predictions over normalised (n_turbines, ws) pairs.
    pub fn forward(
        &self,
        tape: &mut Tape,
        staged: &StagedParams,
        inputs: &[(f64, f64)],
    ) -> Result<Var> {
        let data = inputs.iter().flat_map(|&(n, ws)| [n, ws]).collect();
        let x = tape.leaf(Tensor::matrix(inputs.len(), 2, data)?);
        self.mlp.forward(tape, staged, x)
    }

    pub fn predict(&self, n_scaled: f64, ws_scaled: f64) -> Result<f64> {
        let mut tape = Tape::new();
        let staged = self.store.stage(&mut tape);
        let out = self.forward(&mut tape, &staged, &[(n_scaled, ws_scaled)])?;
        Ok(tape.value(out).item())
    }
}
