//! Snapshot protocol, dataset assembly, surrogate training per monitored
//! curve, and accuracy and timing evaluation.

mod io;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, ErrorKind, Result};
use crate::kernel::InterpolantModel;
use crate::network::Network;
use crate::simulation::{steps_until, SimState, Simulation, DEFAULT_DT};
use crate::units::dyn_to_mmhg;
use crate::vkoga::{cross_validate, CvResult, CvSpec};

pub use io::{
    read_dataset, read_error_report, write_curve, write_dataset, write_error_report, DATASET_FORMAT_VERSION,
    REPORT_FORMAT_VERSION,
};

/// Bumped whenever a solver change alters results, so cached warm-ups are
/// not reused across versions.
pub const SOLVER_REVISION: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    Pressure,
    Flow,
}

impl Quantity {
    pub const ALL: [Quantity; 2] = [Quantity::Pressure, Quantity::Flow];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::Pressure => "pressure",
            Quantity::Flow => "flow",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Quantity::Pressure => "mmHg",
            Quantity::Flow => "cm3/s",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "pressure" => Some(Quantity::Pressure),
            "flow" => Some(Quantity::Flow),
            _ => None,
        }
    }
}

/// A monitored curve: `<monitor label>/<quantity>`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SeriesKey {
    pub monitor: String,
    pub quantity: Quantity,
}

impl SeriesKey {
    pub fn label(&self) -> String {
        format!("{}/{}", self.monitor, self.quantity.name())
    }

    /// File stem without a path separator.
    pub fn file_stem(&self) -> String {
        format!("{}-{}", self.monitor, self.quantity.name())
    }

    pub fn parse(label: &str) -> Option<Self> {
        let (m, q) = label.rsplit_once('/')?;
        Some(Self {
            monitor: m.to_string(),
            quantity: Quantity::parse(q)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnapshotProtocol {
    /// Healthy warm-up from rest ends here, s.
    pub warmup_end: f64,
    /// End of every run, s.
    pub final_time: f64,
    /// Recording starts here and runs to `final_time`, s.
    pub record_start: f64,
    /// Samples per second.
    pub sample_rate: f64,
    /// Degree used in place of a healthy 0.
    pub healthy_degree: f64,
    /// Solver step, s.
    pub dt: f64,
}

impl Default for SnapshotProtocol {
    fn default() -> Self {
        Self {
            warmup_end: 20.0,
            final_time: 30.0,
            record_start: 29.0,
            sample_rate: 400.0,
            healthy_degree: 1e-6,
            dt: DEFAULT_DT,
        }
    }
}

impl SnapshotProtocol {
    /// Number of samples per curve.
    pub fn samples(&self) -> usize {
        (self.sample_rate * (self.final_time - self.record_start)).round() as usize
    }

    /// Solver steps between two samples.
    pub fn stride(&self) -> u64 {
        (1.0 / (self.sample_rate * self.dt)).round() as u64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if !(self.dt > 0.0 && self.sample_rate > 0.0) {
            return bad("time step and sample rate must be > 0".into());
        }
        if !(0.0 <= self.warmup_end && self.warmup_end <= self.record_start && self.record_start < self.final_time) {
            return bad(format!(
                "need 0 <= warmup_end ({}) <= record_start ({}) < final_time ({})",
                self.warmup_end, self.record_start, self.final_time
            ));
        }
        let q = self.sample_rate * (self.final_time - self.record_start);
        if (q - q.round()).abs() > 1e-9 * q {
            return bad(format!("the record window holds {q} samples, not a whole number"));
        }
        let m = 1.0 / (self.sample_rate * self.dt);
        if (m - m.round()).abs() > 1e-9 * m || m.round() < 1.0 {
            return bad(format!(
                "the step {} s does not divide the sampling interval {} s",
                self.dt,
                1.0 / self.sample_rate
            ));
        }
        for t in [self.warmup_end, self.record_start, self.final_time] {
            steps_until(t, self.dt)?;
        }
        if !(self.healthy_degree > 0.0 && self.healthy_degree < 1.0) {
            return bad(format!("healthy degree must lie in (0, 1), got {}", self.healthy_degree));
        }
        Ok(())
    }

    /// Sample times of the recorded window.
    pub fn sample_times(&self) -> Vec<f64> {
        (0..self.samples()).map(|k| self.record_start + k as f64 / self.sample_rate).collect()
    }

    /// Identifies everything that determines the warm-up state.
    pub fn warmup_key(&self, network: &Network) -> Result<String> {
        let healthy = network.with_stenosis_degree(self.healthy_degree)?;
        let mut h = Sha256::new();
        h.update(healthy.canonical_json().as_bytes());
        h.update(format!("|{:?}|{:?}|{SOLVER_REVISION}", self.dt, self.warmup_end).as_bytes());
        Ok(hex::encode(h.finalize()))
    }
}

/// Curves recorded at every monitor for one stenosis degree.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub degree: f64,
    /// (monitor label, pressure in mmHg, flow in cm³/s), monitor order.
    pub curves: Vec<(String, Vec<f64>, Vec<f64>)>,
    /// Cycle-averaged stenosis flow over the record window, cm³/s.
    pub stenosis_flow: f64,
}

impl Snapshot {
    pub fn curve(&self, key: &SeriesKey) -> Option<&[f64]> {
        self.curves.iter().find(|c| c.0 == key.monitor).map(|c| match key.quantity {
            Quantity::Pressure => c.1.as_slice(),
            Quantity::Flow => c.2.as_slice(),
        })
    }
}

/// Integrates the healthy network from rest to the end of the warm-up.
pub fn warm_up(network: &Network, protocol: &SnapshotProtocol) -> Result<SimState> {
    protocol.validate()?;
    let healthy = network.with_stenosis_degree(protocol.healthy_degree)?;
    let mut sim = Simulation::new(&healthy, protocol.dt)?;
    sim.advance_to(protocol.warmup_end, |_| {})?;
    Ok(sim.into_state())
}

/// Loads the warm-up state from `dir` or computes and stores it there.
pub fn cached_warm_up(dir: &Path, network: &Network, protocol: &SnapshotProtocol) -> Result<SimState> {
    let key = protocol.warmup_key(network)?;
    let path = dir.join(format!("warmup-{}.json", &key[..16]));
    if let Ok(text) = std::fs::read_to_string(&path) {
        #[derive(Deserialize)]
        struct Stored {
            key: String,
            state: SimState,
        }
        if let Ok(stored) = serde_json::from_str::<Stored>(&text) {
            if stored.key == key {
                return Ok(stored.state);
            }
        }
    }
    let state = warm_up(network, protocol)?;
    std::fs::create_dir_all(dir)?;
    let text = serde_json::to_string(&serde_json::json!({ "key": key, "state": &state }))
        .map_err(|e| Error::Numerical(format!("cannot serialise warm-up state: {e}")))?;
    std::fs::write(&path, text)?;
    Ok(state)
}

/// Resumes from the warm-up state with the stenosis at `degree` and records
/// the last window.
pub fn run_full_model(network: &Network, warm: &SimState, degree: f64, protocol: &SnapshotProtocol) -> Result<Snapshot> {
    protocol.validate()?;
    let net = network.with_stenosis_degree(degree)?;
    let wrap = |e: Error| match e.kind() {
        ErrorKind::Numerical => Error::Numerical(format!("full model at R_s = {degree}: {e}")),
        _ => e,
    };
    let mut sim = Simulation::from_state(&net, protocol.dt, warm.clone())?;
    sim.advance_to(protocol.record_start, |_| {}).map_err(wrap)?;
    let q = protocol.samples();
    let stride = protocol.stride();
    let monitors = net.monitors.len();
    let mut pressure = vec![Vec::with_capacity(q); monitors];
    let mut flow = vec![Vec::with_capacity(q); monitors];
    let mut stenosis_flow = 0.0;
    let record = |sim: &Simulation, pressure: &mut Vec<Vec<f64>>, flow: &mut Vec<Vec<f64>>| {
        for (k, s) in sim.monitor_samples().into_iter().enumerate() {
            pressure[k].push(dyn_to_mmhg(s.pressure));
            flow[k].push(s.flow);
        }
    };
    record(&sim, &mut pressure, &mut flow);
    let start = sim.state().step;
    for _ in 1..q as u64 * stride {
        sim.step().map_err(wrap)?;
        stenosis_flow += sim.state().stenosis_flow;
        if (sim.state().step - start) % stride == 0 {
            record(&sim, &mut pressure, &mut flow);
        }
    }
    sim.step().map_err(wrap)?;
    stenosis_flow += sim.state().stenosis_flow;
    stenosis_flow /= (q as u64 * stride) as f64;
    let curves = net
        .monitors
        .iter()
        .zip(pressure.into_iter().zip(flow))
        .map(|(m, (p, f))| (m.label.clone(), p, f))
        .collect();
    Ok(Snapshot {
        degree,
        curves,
        stenosis_flow,
    })
}

/// `n` equally spaced degrees from `lo` to 1, both included.
pub fn degree_grid(n: usize, lo: f64) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i + 1 == n {
                    1.0
                } else {
                    lo + i as f64 * (1.0 - lo) / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Training inputs that coincide with test inputs (to 1e-12), sorted.
pub fn coincident_inputs(train: &[f64], test: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = train
        .iter()
        .copied()
        .filter(|x| test.iter().any(|t| (t - x).abs() <= 1e-12))
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub network: String,
    pub network_hash: String,
    pub protocol: SnapshotProtocol,
    pub solver_revision: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotDataset {
    pub provenance: Provenance,
    /// Sorted, pairwise distinct degrees.
    pub inputs: Vec<f64>,
    pub q: usize,
    /// One N × q row-major matrix per monitored curve.
    pub series: BTreeMap<SeriesKey, Vec<f64>>,
}

impl SnapshotDataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn row(&self, key: &SeriesKey, i: usize) -> Option<&[f64]> {
        self.series.get(key).map(|m| &m[i * self.q..(i + 1) * self.q])
    }

    /// Keeps only the rows whose inputs are in `keep` (exact matches).
    pub fn subset(&self, keep: &[f64]) -> Result<Self> {
        let idx: Vec<usize> = keep
            .iter()
            .map(|x| {
                self.inputs
                    .iter()
                    .position(|y| y.to_bits() == x.to_bits())
                    .ok_or_else(|| Error::InvalidInput(format!("degree {x} is not in the dataset")))
            })
            .collect::<Result<_>>()?;
        let q = self.q;
        Ok(Self {
            provenance: self.provenance.clone(),
            inputs: keep.to_vec(),
            q,
            series: self
                .series
                .iter()
                .map(|(k, m)| (k.clone(), idx.iter().flat_map(|&i| m[i * q..(i + 1) * q].iter().copied()).collect()))
                .collect(),
        })
    }
}

/// Runs the full model at every degree (concurrently, merged in input
/// order) and assembles a dataset.
pub fn snapshot_runs(network: &Network, warm: &SimState, degrees: &[f64], protocol: &SnapshotProtocol) -> Result<Vec<Snapshot>> {
    let runs: Vec<Result<Snapshot>> = degrees
        .par_iter()
        .map(|&d| run_full_model(network, warm, d, protocol))
        .collect();
    let failed: Vec<String> = runs
        .iter()
        .zip(degrees)
        .filter_map(|(r, d)| r.as_ref().err().map(|e| format!("R_s = {d}: {e}")))
        .collect();
    if !failed.is_empty() {
        return Err(Error::Numerical(format!("{} snapshot runs failed: {}", failed.len(), failed.join("; "))));
    }
    Ok(runs.into_iter().map(|r| r.unwrap()).collect())
}

pub fn assemble_dataset(network: &Network, protocol: &SnapshotProtocol, snapshots: &[Snapshot]) -> Result<SnapshotDataset> {
    let mut order: Vec<&Snapshot> = snapshots.iter().collect();
    order.sort_by(|a, b| a.degree.total_cmp(&b.degree));
    if order.windows(2).any(|w| w[0].degree == w[1].degree) {
        return Err(Error::InvalidInput("dataset degrees must be pairwise distinct".into()));
    }
    let q = protocol.samples();
    let mut series = BTreeMap::new();
    for m in &network.monitors {
        for quantity in Quantity::ALL {
            let key = SeriesKey {
                monitor: m.label.clone(),
                quantity,
            };
            let mut values = Vec::with_capacity(order.len() * q);
            for s in &order {
                let c = s.curve(&key).ok_or_else(|| Error::Dimension(format!("snapshot lacks {}", key.label())))?;
                if c.len() != q || c.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Numerical(format!("non-finite or short curve {} at R_s = {}", key.label(), s.degree)));
                }
                values.extend_from_slice(c);
            }
            series.insert(key, values);
        }
    }
    Ok(SnapshotDataset {
        provenance: Provenance {
            network: network.name.clone(),
            network_hash: network.content_hash(),
            protocol: *protocol,
            solver_revision: SOLVER_REVISION,
        },
        inputs: order.iter().map(|s| s.degree).collect(),
        q,
        series,
    })
}

/// Datasets for each requested size on equispaced grids in
/// [healthy_degree, 1]. Degrees shared between sizes are simulated once.
pub fn build_datasets(network: &Network, warm: &SimState, sizes: &[usize], protocol: &SnapshotProtocol) -> Result<Vec<SnapshotDataset>> {
    if sizes.contains(&0) {
        return Err(Error::InvalidInput("dataset sizes must be >= 1".into()));
    }
    let mut all: Vec<f64> = sizes.iter().flat_map(|&n| degree_grid(n, protocol.healthy_degree)).collect();
    all.sort_by(f64::total_cmp);
    all.dedup_by(|a, b| a.to_bits() == b.to_bits());
    let runs = snapshot_runs(network, warm, &all, protocol)?;
    sizes
        .iter()
        .map(|&n| {
            let grid = degree_grid(n, protocol.healthy_degree);
            let picked: Vec<Snapshot> = grid
                .iter()
                .map(|d| runs[all.iter().position(|a| a.to_bits() == d.to_bits()).unwrap()].clone())
                .collect();
            assemble_dataset(network, protocol, &picked)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub key: SeriesKey,
    pub result: CvResult,
}

impl TrainedModel {
    pub fn model(&self) -> &InterpolantModel {
        &self.result.model
    }
}

/// One cross-validated sparse model per monitored curve.
pub fn train_all(dataset: &SnapshotDataset, spec: &CvSpec) -> Result<Vec<TrainedModel>> {
    let keys: Vec<&SeriesKey> = dataset.series.keys().collect();
    keys.par_iter()
        .map(|&key| {
            let values = &dataset.series[key];
            cross_validate(&dataset.inputs, 1, values, dataset.q, spec)
                .map(|result| TrainedModel {
                    key: key.clone(),
                    result,
                })
                .map_err(|e| match e {
                    Error::Numerical(m) => Error::Numerical(format!("{}: {m}", key.label())),
                    other => Error::Numerical(format!("{}: {other}", key.label())),
                })
        })
        .collect()
}

/// (max − min)/mean of one curve.
pub fn pulsatility_index(curve: &[f64]) -> f64 {
    let max = curve.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = curve.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = curve.iter().sum::<f64>() / curve.len() as f64;
    (max - min) / mean
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointError {
    pub degree: f64,
    /// ‖f − f̂‖₂
    pub absolute: f64,
    /// ‖f − f̂‖₂ / ‖f‖₂
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub series: String,
    pub centers: usize,
    pub points: Vec<PointError>,
    /// max of the absolute errors
    pub max_absolute: f64,
    /// max of the relative errors
    pub max_relative: f64,
}

/// Pointwise and aggregate errors of `model` against the reference rows.
pub fn evaluate_model(model: &InterpolantModel, key: &SeriesKey, test: &SnapshotDataset) -> Result<ErrorReport> {
    let reference = test
        .series
        .get(key)
        .ok_or_else(|| Error::InvalidInput(format!("test data has no rows for {}", key.label())))?;
    if model.outputs != test.q {
        return Err(Error::Dimension(format!("model has {} outputs, test rows have {}", model.outputs, test.q)));
    }
    let q = test.q;
    let mut pred = vec![0.0; q];
    let points: Vec<PointError> = test
        .inputs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            model.evaluate_into(&[x], &mut pred);
            let f = &reference[i * q..(i + 1) * q];
            let diff = f.iter().zip(&pred).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let norm = f.iter().map(|a| a * a).sum::<f64>().sqrt();
            PointError {
                degree: x,
                absolute: diff,
                relative: if norm > 0.0 { diff / norm } else { f64::INFINITY },
            }
        })
        .collect();
    let max_absolute = points.iter().map(|p| p.absolute).fold(0.0, f64::max);
    let max_relative = points.iter().map(|p| p.relative).fold(0.0, f64::max);
    Ok(ErrorReport {
        series: key.label(),
        centers: model.center_count(),
        points,
        max_absolute,
        max_relative,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    /// Mean seconds per input over the timed passes.
    pub mean: f64,
    pub stddev: f64,
    pub repeats: usize,
    pub inputs: usize,
}

/// Times evaluation of `model` at every input: one discarded pass, then
/// `repeats` timed passes.
pub fn time_evaluation(model: &InterpolantModel, inputs: &[f64], repeats: usize) -> Timing {
    let mut out = vec![0.0; model.outputs];
    let mut sink = 0.0;
    let mut pass = |out: &mut [f64]| {
        let t0 = Instant::now();
        for &x in inputs {
            model.evaluate_into(&[x], out);
            sink += out.first().copied().unwrap_or(0.0);
        }
        t0.elapsed().as_secs_f64() / inputs.len().max(1) as f64
    };
    pass(&mut out);
    let samples: Vec<f64> = (0..repeats).map(|_| pass(&mut out)).collect();
    std::hint::black_box(sink);
    let (mean, stddev) = mean_std(&samples);
    Timing {
        mean,
        stddev,
        repeats,
        inputs: inputs.len(),
    }
}

/// Seconds for one full-model run from the warm-up state, averaged over
/// `repeats` runs.
pub fn time_full_model(network: &Network, warm: &SimState, degree: f64, protocol: &SnapshotProtocol, repeats: usize) -> Result<Timing> {
    let samples: Vec<f64> = (0..repeats.max(1))
        .map(|_| {
            let t0 = Instant::now();
            run_full_model(network, warm, degree, protocol).map(|_| t0.elapsed().as_secs_f64())
        })
        .collect::<Result<_>>()?;
    let (mean, stddev) = mean_std(&samples);
    Ok(Timing {
        mean,
        stddev,
        repeats: samples.len(),
        inputs: 1,
    })
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Standard layout of a model directory.
pub fn model_path(dir: &Path, key: &SeriesKey) -> PathBuf {
    dir.join(format!("{}.model", key.file_stem()))
}
