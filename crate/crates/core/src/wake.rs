//! Jensen-type wake simulator: generates labelled wind-farm datasets with
//! per-turbine power targets under engineered wake deficits.
//!
//! Wind direction uses the meteorological convention: degrees the wind comes
//! FROM, clockwise from north. With north = +y and east = +x, the downwind
//! unit vector for direction `theta` is `(-sin theta, -cos theta)`.

use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::Path;

pub const BETZ_LIMIT: f64 = 16.0 / 27.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Turbine {
    pub x: f64,
    pub y: f64,
    pub rotor_diameter: f64,
    pub cp: f64,
    pub rated_power: f64,
    pub cut_in: f64,
    pub rated_speed: f64,
    pub cut_out: f64,
}

impl Turbine {
    pub fn validate(&self) -> Result<()> {
        if self.rotor_diameter <= 0.0 {
            return Err(Error::Config("rotor diameter must be positive".into()));
        }
        if !(self.cp > 0.0 && self.cp < BETZ_LIMIT) {
            return Err(Error::Config(format!(
                "power coefficient {} outside (0, 16/27)",
                self.cp
            )));
        }
        if !(self.cut_in < self.rated_speed && self.rated_speed < self.cut_out) {
            return Err(Error::Config(
                "need cut_in < rated_speed < cut_out".into(),
            ));
        }
        Ok(())
    }
}

/// Turbine parameters shared by every machine in a simulated farm.
/// Defaults follow the 5 MW reference turbine.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TurbineSpec {
    pub rotor_diameter: f64,
    pub cp: f64,
    pub rated_power: f64,
    pub cut_in: f64,
    pub rated_speed: f64,
    pub cut_out: f64,
}

impl Default for TurbineSpec {
    fn default() -> Self {
        TurbineSpec {
            rotor_diameter: 126.0,
            cp: 0.45,
            rated_power: 5.0e6,
            cut_in: 3.0,
            rated_speed: 11.4,
            cut_out: 25.0,
        }
    }
}

impl TurbineSpec {
    pub fn at(&self, x: f64, y: f64) -> Turbine {
        Turbine {
            x,
            y,
            rotor_diameter: self.rotor_diameter,
            cp: self.cp,
            rated_power: self.rated_power,
            cut_in: self.cut_in,
            rated_speed: self.rated_speed,
            cut_out: self.cut_out,
        }
    }
}

/// One farm layout under one wind condition; the unit of simulation and of
/// one graph.
#[derive(Debug, Clone)]
pub struct FarmScenario {
    pub turbines: Vec<Turbine>,
    /// Free-stream wind speed, m/s.
    pub ws: f64,
    /// Wind direction, degrees, meteorological convention.
    pub theta: f64,
}

impl FarmScenario {
    pub fn positions(&self) -> Vec<(f64, f64)> {
        self.turbines.iter().map(|t| (t.x, t.y)).collect()
    }
}

/// Simulation output for one scenario.
#[derive(Debug, Clone)]
pub struct PowerRecord {
    pub scenario_id: usize,
    pub effective_speeds: Vec<f64>,
    pub turbine_powers: Vec<f64>,
    pub farm_power: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TurbinePos {
    pub x: f64,
    pub y: f64,
}

/// One line of the JSONL dataset file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioRecord {
    pub id: usize,
    pub ws: f64,
    pub theta: f64,
    pub turbines: Vec<TurbinePos>,
    pub powers: Vec<f64>,
    pub farm_power: f64,
}

impl ScenarioRecord {
    pub fn positions(&self) -> Vec<(f64, f64)> {
        self.turbines.iter().map(|t| (t.x, t.y)).collect()
    }

    pub fn n_turbines(&self) -> usize {
        self.turbines.len()
    }
}

/// Downwind unit vector for a meteorological wind direction in degrees.
pub fn downwind_unit(theta_deg: f64) -> (f64, f64) {
    let r = theta_deg.to_radians();
    (-r.sin(), -r.cos())
}

/// Fractional Jensen top-hat deficit induced by `upstream` at `query`.
///
/// In wind-aligned coordinates with downstream distance `x > 0` and crosswind
/// offset `|r| < D/2 + k*x`, the deficit is `2a / (1 + 2kx/D)^2`; zero
/// outside the cone or upstream.
pub fn jensen_deficit(
    upstream: &Turbine,
    query: (f64, f64),
    wind_direction: f64,
    k: f64,
    a: f64,
) -> f64 {
    debug_assert!(k > 0.0 && a > 0.0 && a < 0.5);
    let (dx, dy) = (query.0 - upstream.x, query.1 - upstream.y);
    let (ux, uy) = downwind_unit(wind_direction);
    let downstream = dx * ux + dy * uy;
    if downstream <= 0.0 {
        return 0.0;
    }
    let crosswind = ux * dy - uy * dx;
    let d = upstream.rotor_diameter;
    if crosswind.abs() >= d / 2.0 + k * downstream {
        return 0.0;
    }
    2.0 * a / (1.0 + 2.0 * k * downstream / d).powi(2)
}

/// Effective hub wind speed of one turbine under root-sum-square wake
/// superposition from all other turbines in the scenario.
pub fn effective_wind_speed(target: usize, scenario: &FarmScenario, k: f64, a: f64) -> f64 {
    let t = &scenario.turbines[target];
    let mut sum_sq = 0.0;
    for (j, up) in scenario.turbines.iter().enumerate() {
        if j == target {
            continue;
        }
        let delta = jensen_deficit(up, (t.x, t.y), scenario.theta, k, a);
        sum_sq += delta * delta;
    }
    (scenario.ws * (1.0 - sum_sq.sqrt())).max(0.0)
}

/// Power-curve mapping from hub wind speed to electrical power.
pub fn power_from_wind(v: f64, t: &Turbine, air_density: f64) -> f64 {
    debug_assert!(v >= 0.0);
    if v < t.cut_in || v > t.cut_out {
        return 0.0;
    }
    let area = std::f64::consts::PI * t.rotor_diameter.powi(2) / 4.0;
    (0.5 * air_density * area * t.cp * v.powi(3)).min(t.rated_power)
}

/// Simulate the wakes and powers of one scenario.
pub fn simulate_scenario(
    id: usize,
    scenario: &FarmScenario,
    k: f64,
    a: f64,
    air_density: f64,
) -> PowerRecord {
    let n = scenario.turbines.len();
    let mut effective_speeds = Vec::with_capacity(n);
    let mut turbine_powers = Vec::with_capacity(n);
    for i in 0..n {
        let v = effective_wind_speed(i, scenario, k, a);
        effective_speeds.push(v);
        turbine_powers.push(power_from_wind(v, &scenario.turbines[i], air_density));
    }
    let farm_power = turbine_powers.iter().sum();
    PowerRecord {
        scenario_id: id,
        effective_speeds,
        turbine_powers,
        farm_power,
    }
}

const PLACEMENT_BUDGET: usize = 10_000;

/// Rejection-sample turbine positions in a square of the given area until the
/// spacing constraint holds.
pub fn generate_layouts(
    n_farms: usize,
    turbine_count_range: (usize, usize),
    area: f64,
    min_spacing: f64,
    seed: u64,
) -> Result<Vec<Vec<(f64, f64)>>> {
    let side = area.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layouts = Vec::with_capacity(n_farms);
    for farm in 0..n_farms {
        let count = rng.random_range(turbine_count_range.0..=turbine_count_range.1);
        let mut placed: Vec<(f64, f64)> = Vec::with_capacity(count);
        let mut attempts = 0;
        while placed.len() < count {
            if attempts >= PLACEMENT_BUDGET {
                return Err(Error::InfeasibleLayout { farm, count });
            }
            attempts += 1;
            let p = (rng.random_range(0.0..side), rng.random_range(0.0..side));
            if placed
                .iter()
                .all(|q| ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt() >= min_spacing)
            {
                placed.push(p);
            }
        }
        layouts.push(placed);
    }
    Ok(layouts)
}

/// Full dataset generator configuration; TOML-deserialisable with desk-scale
/// defaults (500 scenarios of 4-16 turbines).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n_layouts: usize,
    pub conditions_per_layout: usize,
    pub turbine_min: usize,
    pub turbine_max: usize,
    /// Farm area in square meters.
    pub area: f64,
    pub min_spacing: f64,
    pub ws_min: f64,
    pub ws_max: f64,
    /// Wind directions are drawn from an even grid of this many bearings.
    pub n_directions: usize,
    pub seed: u64,
    pub turbine: TurbineSpec,
    pub wake_k: f64,
    pub induction: f64,
    pub air_density: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_layouts: 50,
            conditions_per_layout: 10,
            turbine_min: 4,
            turbine_max: 16,
            area: 3000.0 * 3000.0,
            min_spacing: 252.0,
            ws_min: 4.0,
            ws_max: 12.0,
            n_directions: 36,
            seed: 7,
            turbine: TurbineSpec::default(),
            wake_k: 0.05,
            induction: 1.0 / 3.0,
            air_density: 1.225,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let spec = self.turbine.at(0.0, 0.0);
        spec.validate()?;
        if self.turbine_min == 0 || self.turbine_min > self.turbine_max {
            return Err(Error::Config("bad turbine count range".into()));
        }
        if self.min_spacing < 2.0 * self.turbine.rotor_diameter {
            return Err(Error::Config(
                "min_spacing must be at least two rotor diameters".into(),
            ));
        }
        if !(self.wake_k > 0.0) || !(self.induction > 0.0 && self.induction < 0.5) {
            return Err(Error::Config("wake parameters out of range".into()));
        }
        if self.ws_min < self.turbine.cut_in || self.ws_max > self.turbine.cut_out {
            return Err(Error::Config(
                "wind-speed range must lie within [cut_in, cut_out]".into(),
            ));
        }
        if self.ws_min > self.ws_max || self.n_directions == 0 {
            return Err(Error::Config("bad wind condition grid".into()));
        }
        Ok(())
    }

    pub fn n_scenarios(&self) -> usize {
        self.n_layouts * self.conditions_per_layout
    }
}

/// Generate the labelled dataset: layouts crossed with sampled wind
/// conditions, one [`ScenarioRecord`] per scenario. Deterministic in the
/// config seed.
pub fn simulate_dataset(config: &SimConfig) -> Result<Vec<ScenarioRecord>> {
    config.validate()?;
    let layouts = generate_layouts(
        config.n_layouts,
        (config.turbine_min, config.turbine_max),
        config.area,
        config.min_spacing,
        config.seed,
    )?;
    // separate stream so layout sampling and condition sampling do not
    // interleave
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut records = Vec::with_capacity(config.n_scenarios());
    let mut id = 0;
    for layout in &layouts {
        for _ in 0..config.conditions_per_layout {
            let ws = rng.random_range(config.ws_min..=config.ws_max);
            let dir_idx = rng.random_range(0..config.n_directions);
            let theta = 360.0 * dir_idx as f64 / config.n_directions as f64;
            let scenario = FarmScenario {
                turbines: layout
                    .iter()
                    .map(|&(x, y)| config.turbine.at(x, y))
                    .collect(),
                ws,
                theta,
            };
            let record = simulate_scenario(id, &scenario, config.wake_k, config.induction, config.air_density);
            records.push(ScenarioRecord {
                id,
                ws,
                theta,
                turbines: layout.iter().map(|&(x, y)| TurbinePos { x, y }).collect(),
                powers: record.turbine_powers,
                farm_power: record.farm_power,
            });
            id += 1;
        }
    }
    Ok(records)
}

/// Min-max range of one input or target feature, computed on the training
/// split only.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FeatureStats {
    pub min: f64,
    pub max: f64,
}

impl FeatureStats {
    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Self {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for v in values {
            min = min.min(v);
            max = max.max(v);
        }
        FeatureStats { min, max }
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.max > self.min)
    }

    pub fn scale(&self, x: f64) -> f64 {
        if self.is_degenerate() {
            0.0
        } else {
            (x - self.min) / (self.max - self.min)
        }
    }

    pub fn unscale(&self, y: f64) -> f64 {
        if self.is_degenerate() {
            self.min
        } else {
            self.min + y * (self.max - self.min)
        }
    }

    /// Identity mapping, for tests that want unscaled features.
    pub fn identity() -> Self {
        FeatureStats { min: 0.0, max: 1.0 }
    }
}

/// All feature ranges needed to scale model inputs and de-scale predictions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormStats {
    pub ws: FeatureStats,
    pub dist: FeatureStats,
    pub turbine_power: FeatureStats,
    pub farm_power: FeatureStats,
    pub n_turbines: FeatureStats,
}

impl NormStats {
    pub fn identity() -> Self {
        NormStats {
            ws: FeatureStats::identity(),
            dist: FeatureStats::identity(),
            turbine_power: FeatureStats::identity(),
            farm_power: FeatureStats::identity(),
            n_turbines: FeatureStats::identity(),
        }
    }

    /// Compute stats from the training subset of `records`.
    pub fn from_train(records: &[ScenarioRecord], train: &[usize]) -> Self {
        let rows: Vec<&ScenarioRecord> = train.iter().map(|&i| &records[i]).collect();
        let ws = FeatureStats::from_values(rows.iter().map(|r| r.ws));
        let mut dists = Vec::new();
        for r in &rows {
            let pos = r.positions();
            for i in 0..pos.len() {
                for j in 0..pos.len() {
                    if i != j {
                        dists.push(
                            ((pos[i].0 - pos[j].0).powi(2) + (pos[i].1 - pos[j].1).powi(2)).sqrt(),
                        );
                    }
                }
            }
        }
        let dist = if dists.is_empty() {
            FeatureStats::identity()
        } else {
            FeatureStats::from_values(dists)
        };
        let turbine_power =
            FeatureStats::from_values(rows.iter().flat_map(|r| r.powers.iter().copied()));
        let farm_power = FeatureStats::from_values(rows.iter().map(|r| r.farm_power));
        let n_turbines = FeatureStats::from_values(rows.iter().map(|r| r.n_turbines() as f64));
        let stats = NormStats {
            ws,
            dist,
            turbine_power,
            farm_power,
            n_turbines,
        };
        for (name, f) in [
            ("ws", &stats.ws),
            ("dist", &stats.dist),
            ("turbine_power", &stats.turbine_power),
            ("farm_power", &stats.farm_power),
            ("n_turbines", &stats.n_turbines),
        ] {
            if f.is_degenerate() {
                eprintln!("warning: constant feature '{name}' maps to 0 under min-max scaling");
            }
        }
        stats
    }
}

/// Record indices of the three splits: 20% test, then 80/20 train/val of the
/// remainder.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffle, split and compute train-only normalisation stats.
pub fn normalize_and_split(records: &[ScenarioRecord], seed: u64) -> Result<(Splits, NormStats)> {
    if records.len() < 5 {
        return Err(Error::Data(format!(
            "need at least 5 records to split, got {}",
            records.len()
        )));
    }
    let mut idx: Vec<usize> = (0..records.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let n_test = (records.len() as f64 * 0.2).round() as usize;
    let test: Vec<usize> = idx[..n_test].to_vec();
    let rest = &idx[n_test..];
    let n_val = (rest.len() as f64 * 0.2).round() as usize;
    let val: Vec<usize> = rest[..n_val].to_vec();
    let train: Vec<usize> = rest[n_val..].to_vec();
    let stats = NormStats::from_train(records, &train);
    Ok((Splits { train, val, test }, stats))
}

pub fn write_jsonl(records: &[ScenarioRecord], path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl(path: &Path) -> Result<Vec<ScenarioRecord>> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut records = Vec::new();
    for line in file.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line)?);
    }
    Ok(records)
}
