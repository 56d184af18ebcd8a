//! Parameter storage, MLPs and the finite-difference gradient oracle.

use crate::error::{Error, Result};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Negative slope of the leaky ReLU used for all hidden layers and
/// attention outputs.
pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(usize);

pub struct ParamEntry {
    pub name: String,
    pub value: Tensor,
}

/// Ordered collection of named learnable tensors. The order is the layout of
/// the checkpoint blob and of the optimiser state.
#[derive(Default)]
pub struct ParamStore {
    entries: Vec<ParamEntry>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.entries.push(ParamEntry {
            name: name.into(),
            value,
        });
        ParamId(self.entries.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].value
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [ParamEntry] {
        &mut self.entries
    }

    /// Record every parameter on a fresh tape, in store order.
    pub fn stage(&self, tape: &mut Tape) -> StagedParams {
        StagedParams {
            vars: self
                .entries
                .iter()
                .map(|e| tape.leaf(e.value.clone()))
                .collect(),
        }
    }

    pub fn snapshot(&self) -> Vec<Tensor> {
        self.entries.iter().map(|e| e.value.clone()).collect()
    }

    pub fn restore(&mut self, snapshot: &[Tensor]) {
        assert_eq!(snapshot.len(), self.entries.len());
        for (e, t) in self.entries.iter_mut().zip(snapshot) {
            e.value = t.clone();
        }
    }

    /// Total number of scalar parameters.
    pub fn n_scalars(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }
}

/// Tape handles for all parameters of one forward pass.
pub struct StagedParams {
    vars: Vec<Var>,
}

impl StagedParams {
    pub fn var(&self, id: ParamId) -> Var {
        self.vars[id.0]
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}

/// Glorot-uniform weight matrix [fan_in x fan_out].
pub fn glorot_uniform(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| rng.random_range(-limit..limit))
        .collect();
    Tensor::from_rows_unchecked(fan_in, fan_out, data)
}

/// Bias-free linear map, applied as `x . W` on row-major feature rows.
pub struct Linear {
    pub weight: ParamId,
}

impl Linear {
    pub fn new(
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
        name: impl Into<String>,
        in_width: usize,
        out_width: usize,
    ) -> Self {
        let weight = store.add(name, glorot_uniform(rng, in_width, out_width));
        Linear { weight }
    }

    pub fn forward(&self, tape: &mut Tape, staged: &StagedParams, x: Var) -> Result<Var> {
        tape.matmul(x, staged.var(self.weight))
    }
}

/// Fully-connected stack. Hidden layers use leaky ReLU; the final layer is
/// linear when `linear_output` is set (decode heads).
pub struct Mlp {
    layers: Vec<(ParamId, ParamId)>,
    pub in_width: usize,
    pub widths: Vec<usize>,
    pub linear_output: bool,
}

impl Mlp {
    pub fn new(
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
        prefix: &str,
        in_width: usize,
        widths: &[usize],
        linear_output: bool,
    ) -> Self {
        assert!(!widths.is_empty(), "MLP needs at least one layer");
        let mut layers = Vec::with_capacity(widths.len());
        let mut prev = in_width;
        for (i, &w) in widths.iter().enumerate() {
            let weight = store.add(format!("{prefix}.w{i}"), glorot_uniform(rng, prev, w));
            let bias = store.add(format!("{prefix}.b{i}"), Tensor::zeros(1, w));
            layers.push((weight, bias));
            prev = w;
        }
        Mlp {
            layers,
            in_width,
            widths: widths.to_vec(),
            linear_output,
        }
    }

    pub fn out_width(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn forward(&self, tape: &mut Tape, staged: &StagedParams, x: Var) -> Result<Var> {
        let mut h = x;
        let last = self.layers.len() - 1;
        for (i, (w, b)) in self.layers.iter().enumerate() {
            let z = tape.matmul(h, staged.var(*w))?;
            let z = tape.add_bias(z, staged.var(*b))?;
            h = if i == last && self.linear_output {
                z
            } else {
                tape.leaky_relu(z, LEAKY_SLOPE)?
            };
        }
        Ok(h)
    }
}

/// Compare the reverse-mode gradient of a scalar-valued tape function against
/// central finite differences, returning the maximum relative error over all
/// components of `params`.
pub fn grad_check<F>(mut f: F, params: &Tensor, eps: f64) -> Result<f64>
where
    F: FnMut(&mut Tape, Var) -> Result<Var>,
{
    assert!(
        (1e-7..=1e-4).contains(&eps),
        "finite-difference step outside sensible range"
    );
    let analytic = {
        let mut tape = Tape::new();
        let p = tape.leaf(params.clone());
        let loss = f(&mut tape, p)?;
        if tape.value(loss).len() != 1 {
            return Err(Error::ShapeMismatch {
                op: "grad_check",
                lhs: tape.value(loss).shape().to_vec(),
                rhs: vec![1, 1],
            });
        }
        let grads = tape.backward(loss)?;
        grads.get(p, params)
    };

    let mut eval = |t: &Tensor| -> Result<f64> {
        let mut tape = Tape::new();
        let p = tape.leaf(t.clone());
        let loss = f(&mut tape, p)?;
        Ok(tape.value(loss).item())
    };

    let mut max_rel = 0.0f64;
    for i in 0..params.len() {
        let mut plus = params.clone();
        plus.data_mut()[i] += eps;
        let mut minus = params.clone();
        minus.data_mut()[i] -= eps;
        let numeric = (eval(&plus)? - eval(&minus)?) / (2.0 * eps);
        let a = analytic.data()[i];
        let denom = a.abs().max(numeric.abs());
        let rel = if denom < 1e-10 {
            (a - numeric).abs()
        } else {
            (a - numeric).abs() / denom
        };
        max_rel = max_rel.max(rel);
    }
    Ok(max_rel)
}
