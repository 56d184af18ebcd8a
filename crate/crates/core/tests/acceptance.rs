//! Acceptance suite: nine checks covering gradient correctness, the
//! vanilla-block equivalence, attention normalisation, permutation
//! equivariance, simulator physics, the scaled seven-model ordering
//! experiment, overfit sanity, reproducibility, and a qualitative attention
//! inspection. Each test prints one pass/fail line.

use std::collections::HashMap;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use windgnn::baselines::{
    BaselineModel, BaselineVariant, BlstmConfig, BlstmModel, LstmCell, PaddedMlpConfig,
    PaddedMlpModel,
};
use windgnn::gnn::{AttnSite, GnnConfig, GnnModel, GraphKind};
use windgnn::graph::{build_graph, WindGraph};
use windgnn::nn::{ParamStore, StagedParams};
use windgnn::tape::{Tape, Var};
use windgnn::train::{
    evaluate_model, extract_attention, train, Model, ModelKind, ModelScores, TrainConfig,
};
use windgnn::wake::{
    jensen_deficit, normalize_and_split, simulate_dataset, simulate_scenario, FarmScenario,
    FeatureStats, NormStats, ScenarioRecord, SimConfig, Splits, TurbinePos, TurbineSpec,
};
use windgnn::{Result, Tensor};

fn pass(n: usize, name: &str, detail: &str) {
    // write straight to the process stdout so the line survives the test
    // harness's per-test output capture
    use std::io::Write;
    let mut out = std::io::stdout();
    writeln!(out, "[ACCEPTANCE {n}] {name}: PASS ({detail})").unwrap();
    out.flush().unwrap();
}

// ---------------------------------------------------------------------------
// shared helpers
// ---------------------------------------------------------------------------

fn test_norm() -> NormStats {
    NormStats {
        ws: FeatureStats { min: 4.0, max: 12.0 },
        dist: FeatureStats {
            min: 250.0,
            max: 4500.0,
        },
        turbine_power: FeatureStats {
            min: 0.0,
            max: 5.0e6,
        },
        farm_power: FeatureStats {
            min: 0.0,
            max: 8.0e7,
        },
        n_turbines: FeatureStats { min: 1.0, max: 16.0 },
    }
}

/// Random scenario with simulated powers, for structural checks.
fn random_record(rng: &mut ChaCha8Rng, id: usize, n: usize) -> ScenarioRecord {
    let mut positions: Vec<(f64, f64)> = Vec::new();
    while positions.len() < n {
        let p = (rng.random_range(0.0..2500.0), rng.random_range(0.0..2500.0));
        if positions
            .iter()
            .all(|q| ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt() > 260.0)
        {
            positions.push(p);
        }
    }
    let ws = rng.random_range(4.0..12.0);
    let theta = rng.random_range(0.0..360.0);
    let spec = TurbineSpec::default();
    let scenario = FarmScenario {
        turbines: positions.iter().map(|&(x, y)| spec.at(x, y)).collect(),
        ws,
        theta,
    };
    let rec = simulate_scenario(id, &scenario, 0.05, 1.0 / 3.0, 1.225);
    ScenarioRecord {
        id,
        ws,
        theta,
        turbines: positions
            .iter()
            .map(|&(x, y)| TurbinePos { x, y })
            .collect(),
        powers: rec.turbine_powers,
        farm_power: rec.farm_power,
    }
}

/// Evaluate a loss under the current store values.
fn loss_value<F>(store: &ParamStore, mut build: F) -> f64
where
    F: FnMut(&mut Tape, &StagedParams) -> Result<Var>,
{
    let mut tape = Tape::new();
    let staged = store.stage(&mut tape);
    let loss = build(&mut tape, &staged).unwrap();
    tape.value(loss).item()
}

/// Maximum relative error between reverse-mode and central finite-difference
/// gradients over every scalar parameter of the store.
fn max_param_grad_error<F>(store: &mut ParamStore, mut build: F, eps: f64) -> f64
where
    F: FnMut(&mut Tape, &StagedParams) -> Result<Var>,
{
    let analytic: Vec<Option<Tensor>> = {
        let mut tape = Tape::new();
        let staged = store.stage(&mut tape);
        let loss = build(&mut tape, &staged).unwrap();
        let grads = tape.backward(loss).unwrap();
        staged
            .vars()
            .iter()
            .map(|&v| grads.try_get(v).cloned())
            .collect()
    };
    let mut max_err = 0.0f64;
    for pi in 0..store.len() {
        let n_scalars = store.entries()[pi].value.len();
        for j in 0..n_scalars {
            let orig = store.entries()[pi].value.data()[j];
            store.entries_mut()[pi].value.data_mut()[j] = orig + eps;
            let plus = loss_value(store, &mut build);
            store.entries_mut()[pi].value.data_mut()[j] = orig - eps;
            let minus = loss_value(store, &mut build);
            store.entries_mut()[pi].value.data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic[pi].as_ref().map_or(0.0, |t| t.data()[j]);
            // gradients below the finite-difference noise floor are compared
            // absolutely; everything else relatively
            let denom = a.abs().max(numeric.abs());
            let err = if denom < 1e-6 {
                (a - numeric).abs()
            } else {
                (a - numeric).abs() / denom
            };
            max_err = max_err.max(err);
        }
    }
    max_err
}

// ---------------------------------------------------------------------------
// 1. gradient correctness across model families
// ---------------------------------------------------------------------------

#[test]
fn acceptance_1_gradient_correctness() {
    let started = std::time::Instant::now();
    let norm = test_norm();
    let mut worst = 0.0f64;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
        let rec = random_record(&mut rng, 0, 4);
        let graph = build_graph(&rec, &norm).unwrap();

        // padded MLP
        {
            let mut model = PaddedMlpModel::new(
                PaddedMlpConfig {
                    max_neighbors: 3,
                    widths: vec![5, 4],
                },
                seed,
            )
            .unwrap();
            let seqs =
                windgnn::graph::build_upstream_sequences(&rec, &norm, windgnn::graph::SequenceOrder::NearestFirst)
                    .unwrap();
            let targets: Vec<f64> = (0..seqs.len()).map(|i| 0.1 + 0.05 * i as f64).collect();
            let mut store = std::mem::take(&mut model.store);
            let mlp = &model;
            let err = max_param_grad_error(
                &mut store,
                |tape, staged| {
                    let refs: Vec<_> = seqs.iter().collect();
                    let scen = vec![0usize; refs.len()];
                    let pred = mlp.forward(tape, staged, &refs, &scen)?;
                    let t = tape.leaf(Tensor::matrix(targets.len(), 1, targets.clone())?);
                    let d = tape.sub(pred, t)?;
                    let sq = tape.square(d)?;
                    tape.mean_all(sq)
                },
                1e-5,
            );
            assert!(err < 1e-4, "MLP family seed {seed}: max rel error {err}");
            worst = worst.max(err);
        }

        // LSTM unrolled five steps
        {
            let mut store = ParamStore::new();
            let mut cell_rng = ChaCha8Rng::seed_from_u64(40 + seed);
            let cell = LstmCell::new(&mut store, &mut cell_rng, "c", 2, 3);
            let xs: Vec<Tensor> = (0..5)
                .map(|_| {
                    Tensor::matrix(
                        1,
                        2,
                        vec![cell_rng.random_range(-1.0..1.0), cell_rng.random_range(-1.0..1.0)],
                    )
                    .unwrap()
                })
                .collect();
            let err = max_param_grad_error(
                &mut store,
                |tape, staged| {
                    let mut h = tape.leaf(Tensor::zeros(1, 3));
                    let mut c = h;
                    for x in &xs {
                        let xv = tape.leaf(x.clone());
                        let (nh, nc) = cell.step(tape, staged, xv, h, c)?;
                        h = nh;
                        c = nc;
                    }
                    let sq = tape.square(h)?;
                    tape.sum_all(sq)
                },
                1e-5,
            );
            assert!(err < 1e-4, "LSTM family seed {seed}: max rel error {err}");
            worst = worst.max(err);
        }

        // graph blocks, with and without attention
        for kind in [GraphKind::OGraph, GraphKind::FGraph] {
            let mut model = GnnModel::new(
                GnnConfig::preset_sized(kind, &[vec![5, 4]], vec![4], 2, 3),
                seed,
            )
            .unwrap();
            let g = graph.clone();
            let mut store = std::mem::take(&mut model.store);
            let gm = &model;
            let err = max_param_grad_error(
                &mut store,
                |tape, staged| {
                    let out = gm.forward(tape, staged, &g, false)?;
                    let nt = tape.leaf(g.node_targets.clone().unwrap());
                    let gt = tape.leaf(g.global_targets.clone().unwrap());
                    let nd = tape.sub(out.node_pred, nt)?;
                    let n2 = tape.square(nd)?;
                    let l1 = tape.mean_all(n2)?;
                    let gd = tape.sub(out.global_pred, gt)?;
                    let g2 = tape.square(gd)?;
                    let l2 = tape.mean_all(g2)?;
                    tape.add(l1, l2)
                },
                1e-5,
            );
            assert!(
                err < 1e-4,
                "{kind:?} block seed {seed}: max rel error {err}"
            );
            worst = worst.max(err);
        }
    }
    let secs = started.elapsed().as_secs_f64();
    assert!(secs < 60.0, "took {secs:.1}s, budget is 60s");
    pass(
        1,
        "gradient correctness",
        &format!("4 families x 10 seeds, max rel error {worst:.2e}, {secs:.1}s"),
    );
}

// ---------------------------------------------------------------------------
// 2. vanilla equivalence against an independent plain-f64 block
// ---------------------------------------------------------------------------

fn plain_mlp(
    params: &HashMap<String, Tensor>,
    prefix: &str,
    n_layers: usize,
    x: &[f64],
    linear_output: bool,
) -> Vec<f64> {
    let mut h = x.to_vec();
    for l in 0..n_layers {
        let w = &params[&format!("{prefix}.w{l}")];
        let b = &params[&format!("{prefix}.b{l}")];
        let mut out = vec![0.0; w.cols()];
        for (c, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (r, &hv) in h.iter().enumerate() {
                acc += hv * w.get(r, c);
            }
            *o = acc + b.get(0, c);
        }
        if !(linear_output && l == n_layers - 1) {
            for v in &mut out {
                if *v < 0.0 {
                    *v *= 0.2;
                }
            }
        }
        h = out;
    }
    h
}

/// Independent implementation of the attention-free block stack: per-edge
/// update, sum aggregation to nodes, per-node update, sum aggregations to the
/// global, global update, then the decode heads.
fn plain_vanilla_forward(
    params: &HashMap<String, Tensor>,
    cfg: &GnnConfig,
    g: &WindGraph,
) -> (Vec<f64>, Vec<f64>) {
    let n_nodes = g.n_nodes();
    let n_edges = g.n_edges();
    let mut u: Vec<Vec<f64>> = (0..g.n_graphs)
        .map(|i| g.u.row_slice(i).to_vec())
        .collect();
    let mut v: Vec<Vec<f64>> = (0..n_nodes).map(|i| g.v.row_slice(i).to_vec()).collect();
    let mut e: Vec<Vec<f64>> = (0..n_edges).map(|i| g.e.row_slice(i).to_vec()).collect();
    for (bi, block) in cfg.blocks.iter().enumerate() {
        let ne_layers = block.phi_e.len();
        let mut e_new = Vec::with_capacity(n_edges);
        for k in 0..n_edges {
            let mut x = e[k].clone();
            x.extend_from_slice(&v[g.senders[k]]);
            x.extend_from_slice(&v[g.receivers[k]]);
            x.extend_from_slice(&u[g.edge_graph[k]]);
            e_new.push(plain_mlp(params, &format!("block{bi}.phi_e"), ne_layers, &x, false));
        }
        let we = *block.phi_e.last().unwrap();
        let mut ebar = vec![vec![0.0; we]; n_nodes];
        for k in 0..n_edges {
            for (c, val) in e_new[k].iter().enumerate() {
                ebar[g.receivers[k]][c] += val;
            }
        }
        let nv_layers = block.phi_v.len();
        let mut v_new = Vec::with_capacity(n_nodes);
        for i in 0..n_nodes {
            let mut x = v[i].clone();
            x.extend_from_slice(&ebar[i]);
            x.extend_from_slice(&u[g.node_graph[i]]);
            v_new.push(plain_mlp(params, &format!("block{bi}.phi_v"), nv_layers, &x, false));
        }
        let wv = *block.phi_v.last().unwrap();
        let mut ebar_u = vec![vec![0.0; we]; g.n_graphs];
        for k in 0..n_edges {
            for (c, val) in e_new[k].iter().enumerate() {
                ebar_u[g.edge_graph[k]][c] += val;
            }
        }
        let mut vbar = vec![vec![0.0; wv]; g.n_graphs];
        for i in 0..n_nodes {
            for (c, val) in v_new[i].iter().enumerate() {
                vbar[g.node_graph[i]][c] += val;
            }
        }
        let nu_layers = block.phi_u.len();
        let mut u_new = Vec::with_capacity(g.n_graphs);
        for gi in 0..g.n_graphs {
            let mut x = vbar[gi].clone();
            x.extend_from_slice(&ebar_u[gi]);
            x.extend_from_slice(&u[gi]);
            u_new.push(plain_mlp(params, &format!("block{bi}.phi_u"), nu_layers, &x, false));
        }
        u = u_new;
        v = v_new;
        e = e_new;
    }
    let decode_layers = cfg.decode.len() + 1;
    let node_pred = v
        .iter()
        .map(|row| plain_mlp(params, "decode_node", decode_layers, row, true)[0])
        .collect();
    let global_pred = u
        .iter()
        .map(|row| plain_mlp(params, "decode_global", decode_layers, row, true)[0])
        .collect();
    (node_pred, global_pred)
}

#[test]
fn acceptance_2_vanilla_equivalence() {
    let norm = test_norm();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let cfg = GnnConfig::preset_sized(GraphKind::FGraph, &[vec![6, 5], vec![5, 4]], vec![5], 2, 3);
    // all-attention architecture with every flag forced off
    let mut cfg_off = cfg;
    for b in &mut cfg_off.blocks {
        b.flags = windgnn::gnn::AttnFlags::none();
    }
    let model = GnnModel::new(cfg_off.clone(), 5).unwrap();
    let params: HashMap<String, Tensor> = model
        .store
        .entries()
        .iter()
        .map(|e| (e.name.clone(), e.value.clone()))
        .collect();
    let mut worst = 0.0f64;
    for i in 0..100 {
        let n = rng.random_range(2..=12);
        let rec = random_record(&mut rng, i, n);
        let g = build_graph(&rec, &norm).unwrap();
        let (node, global) = model.predict(&g).unwrap();
        let (node_o, global_o) = plain_vanilla_forward(&params, &cfg_off, &g);
        for r in 0..g.n_nodes() {
            worst = worst.max((node.get(r, 0) - node_o[r]).abs());
        }
        worst = worst.max((global.item() - global_o[0]).abs());
    }
    assert!(worst < 1e-12, "max deviation {worst:.2e}");
    pass(
        2,
        "vanilla equivalence",
        &format!("100 graphs, max |deviation| {worst:.2e}"),
    );
}

// ---------------------------------------------------------------------------
// desk-scale experiment fixture (criteria 3, 6, 9)
// ---------------------------------------------------------------------------

struct DeskRun {
    records: Vec<ScenarioRecord>,
    splits: Splits,
    norm: NormStats,
    scores: Vec<(ModelKind, ModelScores, usize)>,
    f_graph: Model,
}

static DESK: OnceLock<DeskRun> = OnceLock::new();

fn desk_model(kind: ModelKind, seed: u64) -> Model {
    match kind {
        ModelKind::BsFarm => {
            Model::Baseline(BaselineModel::new(BaselineVariant::Farm, vec![64, 64], seed).unwrap())
        }
        ModelKind::BsTurb => Model::Baseline(
            BaselineModel::new(BaselineVariant::Turbine, vec![64, 64], seed).unwrap(),
        ),
        ModelKind::Mlp => Model::PaddedMlp(
            PaddedMlpModel::new(
                PaddedMlpConfig {
                    max_neighbors: 15,
                    widths: vec![64, 64],
                },
                seed,
            )
            .unwrap(),
        ),
        ModelKind::Blstm => Model::Blstm(BlstmModel::new(BlstmConfig::default(), seed).unwrap()),
        _ => {
            let gk = kind.graph_kind().unwrap();
            Model::Gnn(
                gk,
                GnnModel::new(
                    GnnConfig::preset_sized(gk, &[vec![64, 48], vec![48, 32]], vec![32], 3, 8),
                    seed,
                )
                .unwrap(),
            )
        }
    }
}

fn desk() -> &'static DeskRun {
    DESK.get_or_init(|| {
        let sim = SimConfig::default(); // 50 layouts x 10 conditions = 500
        let records = simulate_dataset(&sim).unwrap();
        assert_eq!(records.len(), 500);
        let (splits, norm) = normalize_and_split(&records, 11).unwrap();
        let mut scores = Vec::new();
        let mut f_graph = None;
        for kind in ModelKind::ALL {
            let started = std::time::Instant::now();
            let mut model = desk_model(kind, 3);
            let graph_model = kind.graph_kind().is_some();
            // per-variant batch sizes and rates were tuned so each graph
            // model reaches its plateau within the 500-epoch cap
            let (batch_size, lr) = match kind {
                ModelKind::OGraph => (12, 2e-3),
                ModelKind::NGraph => (8, 2.5e-3),
                ModelKind::FGraph => (32, 2e-3),
                _ => (128, 1e-3),
            };
            let cfg = TrainConfig {
                lr,
                batch_size,
                max_epochs: if graph_model { 500 } else { 200 },
                patience: if graph_model { 500 } else { 20 },
                seed: 4,
                loss: windgnn::train::LossKind::Mse,
            };
            let history = train(&mut model, &records, &splits, &norm, &cfg).unwrap();
            let test: Vec<ScenarioRecord> =
                splits.test.iter().map(|&i| records[i].clone()).collect();
            let s = evaluate_model(&model, &test, &norm).unwrap();
            eprintln!(
                "[desk] {:<8} turbine MAE {:?} farm MAE {:?} epochs {} ({:.0}s)",
                kind.display_name(),
                s.mae_turbine,
                s.mae_farm,
                history.epochs.len(),
                started.elapsed().as_secs_f64()
            );
            assert!(
                started.elapsed().as_secs_f64() < 1800.0,
                "{kind:?} exceeded the 30-minute budget"
            );
            scores.push((kind, s, history.epochs.len()));
            if kind == ModelKind::FGraph {
                f_graph = Some(model);
            }
        }
        DeskRun {
            records,
            splits,
            norm,
            scores,
            f_graph: f_graph.unwrap(),
        }
    })
}

fn turbine_mae(desk: &DeskRun, kind: ModelKind) -> f64 {
    desk.scores
        .iter()
        .find(|(k, _, _)| *k == kind)
        .and_then(|(_, s, _)| s.mae_turbine)
        .expect("turbine MAE defined")
}

// ---------------------------------------------------------------------------
// 3. attention normalisation on a trained checkpoint
// ---------------------------------------------------------------------------

#[test]
fn acceptance_3_attention_normalisation() {
    let d = desk();
    let n_scenarios = d.splits.test.len().min(50);
    let mut n_families = 0usize;
    for &idx in d.splits.test.iter().take(n_scenarios) {
        let (weights, _) = extract_attention(&d.f_graph, &d.records[idx], &d.norm).unwrap();
        for site in &weights.sites {
            for head in &site.heads {
                let mut sums: HashMap<usize, f64> = HashMap::new();
                for e in head {
                    assert!(
                        (0.0..=1.0).contains(&e.weight),
                        "weight {} outside [0,1] at {:?}",
                        e.weight,
                        site.site
                    );
                    *sums.entry(e.receiver).or_default() += e.weight;
                }
                for (&r, &s) in &sums {
                    assert!(
                        (s - 1.0).abs() < 1e-9,
                        "site {:?} receiver {r}: sum {s}",
                        site.site
                    );
                    n_families += 1;
                }
            }
        }
    }
    pass(
        3,
        "attention normalisation",
        &format!("{n_scenarios} scenarios, {n_families} weight families all sum to 1 +/- 1e-9"),
    );
}

// ---------------------------------------------------------------------------
// 4. permutation equivariance
// ---------------------------------------------------------------------------

#[test]
fn acceptance_4_permutation_equivariance() {
    let norm = test_norm();
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let model = GnnModel::new(
        GnnConfig::preset_sized(GraphKind::FGraph, &[vec![8, 6], vec![6, 5]], vec![6], 2, 4),
        17,
    )
    .unwrap();
    let mut worst = 0.0f64;
    for i in 0..100 {
        let n = rng.random_range(2..=12);
        let rec = random_record(&mut rng, i, n);
        let mut perm: Vec<usize> = (0..n).collect();
        use rand::seq::SliceRandom;
        perm.shuffle(&mut rng);
        let mut rec_p = rec.clone();
        rec_p.turbines = perm.iter().map(|&o| rec.turbines[o].clone()).collect();
        rec_p.powers = perm.iter().map(|&o| rec.powers[o]).collect();
        let g = build_graph(&rec, &norm).unwrap();
        let gp = build_graph(&rec_p, &norm).unwrap();
        let (node, global) = model.predict(&g).unwrap();
        let (node_p, global_p) = model.predict(&gp).unwrap();
        for (new_i, &old_i) in perm.iter().enumerate() {
            worst = worst.max((node.get(old_i, 0) - node_p.get(new_i, 0)).abs());
        }
        worst = worst.max((global.item() - global_p.item()).abs());
    }
    assert!(worst < 1e-9, "max deviation {worst:.2e}");
    pass(
        4,
        "permutation equivariance",
        &format!("100 graphs, max |deviation| {worst:.2e}"),
    );
}

// ---------------------------------------------------------------------------
// 5. simulator physics
// ---------------------------------------------------------------------------

#[test]
fn acceptance_5_simulator_physics() {
    let spec = TurbineSpec::default();
    let up = spec.at(0.0, 0.0);
    let d = up.rotor_diameter;

    // closed form: 5 diameters downstream, a = 1/3, k = 0.05
    let deficit = jensen_deficit(&up, (5.0 * d, 0.0), 270.0, 0.05, 1.0 / 3.0);
    assert!(
        (deficit - 0.2963).abs() < 1e-4,
        "closed-form deficit {deficit}"
    );

    // monotone decay downstream along the wake axis
    let mut prev = f64::INFINITY;
    for step in 1..=40 {
        let x = 100.0 * step as f64;
        let v = jensen_deficit(&up, (x, 0.0), 270.0, 0.05, 1.0 / 3.0);
        assert!(v > 0.0 && v < prev, "deficit not decreasing at x = {x}");
        prev = v;
    }

    // rotational invariance of simulated powers
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let rec = random_record(&mut rng, 0, 6);
        let rot: f64 = rng.random_range(0.0..360.0);
        let (s, c) = (rot.to_radians().sin(), rot.to_radians().cos());
        let scenario = FarmScenario {
            turbines: rec
                .turbines
                .iter()
                .map(|t| spec.at(t.x, t.y))
                .collect(),
            ws: rec.ws,
            theta: rec.theta,
        };
        // rotating positions clockwise by rot while adding rot to the wind
        // bearing leaves the relative geometry unchanged
        let rotated = FarmScenario {
            turbines: rec
                .turbines
                .iter()
                .map(|t| spec.at(c * t.x - s * t.y, s * t.x + c * t.y))
                .collect(),
            ws: rec.ws,
            theta: rec.theta - rot,
        };
        let p0 = simulate_scenario(0, &scenario, 0.05, 1.0 / 3.0, 1.225);
        let p1 = simulate_scenario(0, &rotated, 0.05, 1.0 / 3.0, 1.225);
        for (a, b) in p0.turbine_powers.iter().zip(&p1.turbine_powers) {
            worst = worst.max((a - b).abs() / spec.rated_power);
        }
    }
    assert!(worst < 1e-9, "relative rotation error {worst:.2e}");
    pass(
        5,
        "simulator physics",
        &format!("deficit 0.2963 matched, monotone decay, rotation error {worst:.2e}"),
    );
}

// ---------------------------------------------------------------------------
// 6. desk-scale ordering experiment
// ---------------------------------------------------------------------------

#[test]
fn acceptance_6_desk_ordering() {
    let d = desk();
    let o = turbine_mae(d, ModelKind::OGraph);
    let n = turbine_mae(d, ModelKind::NGraph);
    let f = turbine_mae(d, ModelKind::FGraph);
    let blstm = turbine_mae(d, ModelKind::Blstm);
    let mlp = turbine_mae(d, ModelKind::Mlp);
    let bs_turb = turbine_mae(d, ModelKind::BsTurb);
    for (name, g) in [("O-Graph", o), ("N-Graph", n), ("F-Graph", f)] {
        assert!(g < blstm, "{name} ({g:.6}) not below BLSTM ({blstm:.6})");
        assert!(
            g * 3.0 <= bs_turb,
            "{name} ({g:.6}) not 3x below BS_Turb ({bs_turb:.6})"
        );
    }
    assert!(blstm <= mlp, "BLSTM ({blstm:.6}) above MLP ({mlp:.6})");
    assert!(mlp < bs_turb, "MLP ({mlp:.6}) not below BS_Turb ({bs_turb:.6})");
    let gmin = o.min(n).min(f);
    let gmax = o.max(n).max(f);
    assert!(
        gmax <= gmin * 1.25,
        "graph models spread beyond 25%: {o:.6} / {n:.6} / {f:.6}"
    );
    pass(
        6,
        "desk-scale ordering",
        &format!(
            "graph {o:.5}/{n:.5}/{f:.5} < BLSTM {blstm:.5} <= MLP {mlp:.5} < BS_Turb {bs_turb:.5}"
        ),
    );
}

// ---------------------------------------------------------------------------
// 7. overfit sanity
// ---------------------------------------------------------------------------

#[test]
fn acceptance_7_overfit_sanity() {
    // ten single-turbine scenarios with distinct wind speeds: a clean
    // (ws -> power) regression every family can drive to near zero
    let spec = TurbineSpec::default();
    let mut records = Vec::new();
    for i in 0..10 {
        let ws = 4.5 + 0.75 * i as f64;
        let scenario = FarmScenario {
            turbines: vec![spec.at(0.0, 0.0)],
            ws,
            theta: 270.0,
        };
        let p = simulate_scenario(i, &scenario, 0.05, 1.0 / 3.0, 1.225);
        records.push(ScenarioRecord {
            id: i,
            ws,
            theta: 270.0,
            turbines: vec![TurbinePos { x: 0.0, y: 0.0 }],
            powers: p.turbine_powers,
            farm_power: p.farm_power,
        });
    }
    let norm = NormStats {
        ws: FeatureStats { min: 4.0, max: 12.0 },
        dist: FeatureStats {
            min: 250.0,
            max: 4500.0,
        },
        turbine_power: FeatureStats {
            min: 0.0,
            max: records
                .iter()
                .flat_map(|r| r.powers.iter().copied())
                .fold(0.0, f64::max),
        },
        farm_power: FeatureStats {
            min: 0.0,
            max: records.iter().map(|r| r.farm_power).fold(0.0, f64::max),
        },
        n_turbines: FeatureStats { min: 1.0, max: 16.0 },
    };
    let all: Vec<usize> = (0..10).collect();
    let splits = Splits {
        train: all.clone(),
        val: all.clone(),
        test: all,
    };
    let mut report = Vec::new();
    for kind in ModelKind::ALL {
        let mut model = match kind {
            // small dedicated sizes keep 2000 steps fast
            ModelKind::OGraph | ModelKind::NGraph | ModelKind::FGraph => {
                let gk = kind.graph_kind().unwrap();
                Model::Gnn(
                    gk,
                    GnnModel::new(
                        GnnConfig::preset_sized(gk, &[vec![16, 12]], vec![12], 2, 4),
                        2,
                    )
                    .unwrap(),
                )
            }
            _ => desk_model(kind, 2),
        };
        let graph_model = kind.graph_kind().is_some();
        let cfg = TrainConfig {
            // graph models need the hotter rate to get under the bar within
            // the step budget
            lr: if graph_model { 2e-2 } else { 1e-2 },
            batch_size: 10, // one optimizer step per epoch
            max_epochs: 2000,
            patience: 2000,
            seed: 6,
            loss: windgnn::train::LossKind::Mse,
        };
        train(&mut model, &records, &splits, &norm, &cfg).unwrap();
        let s = evaluate_model(&model, &records, &norm).unwrap();
        let train_mae = s.mae_turbine.or(s.mae_farm).unwrap();
        assert!(
            train_mae < 1e-3,
            "{kind:?}: train MAE {train_mae} after 2000 steps"
        );
        report.push(format!("{} {train_mae:.1e}", kind.display_name()));
    }
    pass(7, "overfit sanity", &report.join(", "));
}

// ---------------------------------------------------------------------------
// 8. reproducibility of simulate + train
// ---------------------------------------------------------------------------

#[test]
fn acceptance_8_reproducibility() {
    let bin = env!("CARGO_BIN_EXE_windgnn");
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sim.toml");
    std::fs::write(
        &config,
        "n_layouts = 8\nconditions_per_layout = 3\nturbine_min = 3\nturbine_max = 5\nseed = 7\n",
    )
    .unwrap();
    let run_sim = |out: &str| {
        let status = std::process::Command::new(bin)
            .args([
                "simulate",
                "--config",
                config.to_str().unwrap(),
                "--out",
                dir.path().join(out).to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success());
    };
    run_sim("d1");
    run_sim("d2");
    // manifest.json records the output path, so only the data files are
    // expected to be byte-identical
    for file in ["dataset.jsonl", "norm_stats.json", "splits.json"] {
        let a = std::fs::read(dir.path().join("d1").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("d2").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }

    let run_train = |out: &str| {
        let status = std::process::Command::new(bin)
            .args([
                "train",
                "--model",
                "bs-farm",
                "--dataset",
                dir.path().join("d1").to_str().unwrap(),
                "--out",
                dir.path().join(out).to_str().unwrap(),
                "--seed",
                "9",
                "--epochs",
                "2",
            ])
            .status()
            .unwrap();
        assert!(status.success());
    };
    run_train("r1");
    run_train("r2");
    let loss = |out: &str| -> f64 {
        let h: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join(out).join("bs-farm.history.json")).unwrap(),
        )
        .unwrap();
        h["epochs"][0]["train_loss"].as_f64().unwrap()
    };
    let (l1, l2) = (loss("r1"), loss("r2"));
    assert_eq!(l1.to_bits(), l2.to_bits(), "first-epoch losses differ");
    pass(
        8,
        "reproducibility",
        &format!("dataset files byte-identical, first-epoch loss {l1:.6e} bit-identical"),
    );
}

// ---------------------------------------------------------------------------
// 9. qualitative attention inspection (non-gating)
// ---------------------------------------------------------------------------

#[test]
fn acceptance_9_qualitative_attention() {
    let d = desk();
    let spec = TurbineSpec::default();
    let positions = [(0.0, 0.0), (600.0, 0.0), (1200.0, 0.0)];
    let scenario = FarmScenario {
        turbines: positions.iter().map(|&(x, y)| spec.at(x, y)).collect(),
        ws: 8.0,
        theta: 270.0,
    };
    let p = simulate_scenario(0, &scenario, 0.05, 1.0 / 3.0, 1.225);
    let rec = ScenarioRecord {
        id: 0,
        ws: 8.0,
        theta: 270.0,
        turbines: positions
            .iter()
            .map(|&(x, y)| TurbinePos { x, y })
            .collect(),
        powers: p.turbine_powers,
        farm_power: p.farm_power,
    };
    let (weights, _) = extract_attention(&d.f_graph, &rec, &d.norm).unwrap();
    let e2v = weights
        .site(0, AttnSite::E2V)
        .expect("E2V weights recorded");
    // receiver 2 has two upstream senders: turbine 1 (directly upstream,
    // nearest) and turbine 0
    let mut dominant_nearest = 0usize;
    let n_heads = e2v.heads.len();
    for head in &e2v.heads {
        let w = |s: usize| {
            head.iter()
                .find(|e| e.receiver == 2 && e.sender == s)
                .map(|e| e.weight)
                .unwrap_or(0.0)
        };
        if w(1) > w(0) {
            dominant_nearest += 1;
        }
    }
    let verdict = if dominant_nearest * 2 >= n_heads {
        "dominant E2V weight on the directly upstream nearest sender"
    } else {
        "dominant E2V weight NOT on the nearest upstream sender (reported, non-gating)"
    };
    pass(
        9,
        "qualitative attention (non-gating)",
        &format!("{dominant_nearest}/{n_heads} heads favour the nearest upstream sender; {verdict}"),
    );
}
