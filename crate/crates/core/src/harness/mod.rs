//! Experiment orchestration: scenario batch simulation, 7-fold
//! cross-validation of the model roster, learning curves, fault/load-step
//! classification, noise sweeps, and the impedance-locator comparison.
//!
//! Every run is keyed by the experiment seed; the emitted CSV reports are
//! byte-identical across runs of the same config. Wall-clock fit times are
//! the exception and live in their own artifact.

pub mod plot;
pub mod report;

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{dtree_fit, knn_fit, ols_fit, KnnModel, OlsModel, TreeModel};
use crate::dataset::{build_matrix, ChannelMode, FeatureMatrix, Label, StandardScaler};
use crate::error::{Error, Result};
use crate::gbt::{self, BoostedEnsemble, Hyperparams, Task};
use crate::sim::{
    add_noise, generate_scenarios, ScenarioRanges, Simulator, NetworkConfig, WaveformRecord,
};

/// One model in the comparison roster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelSpec {
    /// Gradient-boosted trees.
    Gb(Hyperparams),
    /// Ordinary least squares.
    Ols,
    /// k-nearest-neighbor regression.
    Knn { k: usize },
    /// Single decision tree.
    Dtree { max_depth: usize, min_samples_leaf: usize },
    /// Constant training-mean predictor, the sanity-floor baseline.
    Mean,
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Gb(_) => "gb",
            ModelSpec::Ols => "ols",
            ModelSpec::Knn { .. } => "knn",
            ModelSpec::Dtree { .. } => "dtree",
            ModelSpec::Mean => "mean",
        }
    }

    pub fn default_roster() -> Vec<ModelSpec> {
        vec![
            ModelSpec::Gb(Hyperparams::default()),
            ModelSpec::Ols,
            ModelSpec::Knn { k: 5 },
            ModelSpec::Dtree {
                max_depth: 6,
                min_samples_leaf: 5,
            },
        ]
    }
}

enum Fitted {
    Boosted(BoostedEnsemble),
    Ols(OlsModel),
    Knn(KnnModel),
    Tree(TreeModel),
    Mean(f64),
}

impl Fitted {
    fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<f64>> {
        match self {
            Fitted::Boosted(m) => m.predict_raw(x),
            Fitted::Ols(m) => m.predict(x),
            Fitted::Knn(m) => m.predict(x),
            Fitted::Tree(m) => Ok(m.predict(x)),
            Fitted::Mean(c) => Ok(vec![*c; x.len()]),
        }
    }
}

fn fit_model(spec: &ModelSpec, x: &[Vec<f64>], y: &[f64]) -> Result<Fitted> {
    match spec {
        ModelSpec::Gb(params) => Ok(Fitted::Boosted(gbt::fit(x, y, Task::Regression, params)?)),
        ModelSpec::Ols => Ok(Fitted::Ols(ols_fit(x, y)?)),
        ModelSpec::Knn { k } => Ok(Fitted::Knn(knn_fit(x.to_vec(), y.to_vec(), *k)?)),
        ModelSpec::Dtree {
            max_depth,
            min_samples_leaf,
        } => Ok(Fitted::Tree(dtree_fit(x, y, *max_depth, *min_samples_leaf)?)),
        ModelSpec::Mean => {
            if y.is_empty() {
                return Err(Error::EmptyInput("mean model needs targets".into()));
            }
            Ok(Fitted::Mean(y.iter().sum::<f64>() / y.len() as f64))
        }
    }
}

/// Full experiment definition; everything randomized flows from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub network: NetworkConfig,
    pub n_fault: usize,
    pub n_nonfault: usize,
    pub ranges: ScenarioRanges,
    pub seed: u64,
    /// Event time within the simulation window (s).
    pub inception_time: f64,
    /// Simulation window length (s).
    pub duration: f64,
    /// Feature window length in output samples.
    pub n_window: usize,
    /// Channel selection for classification, learning curves, and dataset
    /// export; k-fold evaluation always runs voltage-only and current-only.
    pub channel_mode: ChannelMode,
    pub k_folds: usize,
    pub roster: Vec<ModelSpec>,
    /// SNR levels for the noise sweep; `null` is the clean sentinel.
    pub noise_levels_db: Vec<Option<f64>>,
    /// Assumed fault resistance for the blind impedance locator (ohm).
    pub rf_assumed: f64,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            network: NetworkConfig::default(),
            n_fault: 1400,
            n_nonfault: 200,
            ranges: ScenarioRanges::default(),
            seed: 42,
            inception_time: 0.03,
            duration: 0.1,
            n_window: 20,
            channel_mode: ChannelMode::Voltage,
            k_folds: 7,
            roster: ModelSpec::default_roster(),
            noise_levels_db: vec![None, Some(40.0), Some(20.0)],
            rf_assumed: 0.0,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.ranges.validate()?;
        if self.roster.is_empty() {
            return Err(Error::Config("model roster is empty".into()));
        }
        if self.k_folds < 2 {
            return Err(Error::Config("k_folds must be >= 2".into()));
        }
        if self.n_window == 0 {
            return Err(Error::Config("n_window must be >= 1".into()));
        }
        let needed = self.inception_time + self.n_window as f64 * crate::sim::DT_OUTPUT;
        if needed > self.duration + 1e-12 {
            return Err(Error::Config(format!(
                "duration {} s cannot hold a {}-sample window after inception {} s",
                self.duration, self.n_window, self.inception_time
            )));
        }
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    /// Hex digest of the canonical JSON encoding; stamped into reports.
    pub fn fingerprint(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Mean absolute error in km.
pub fn mae(yhat: &[f64], y: &[f64]) -> Result<f64> {
    if yhat.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions vs {} targets",
            yhat.len(),
            y.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::EmptyInput("MAE of zero pairs".into()));
    }
    Ok(yhat
        .iter()
        .zip(y)
        .map(|(p, t)| (p - t).abs())
        .sum::<f64>()
        / y.len() as f64)
}

/// Generate the seeded scenario batch and simulate every event.
pub fn build_records(config: &ExperimentConfig) -> Result<Vec<WaveformRecord>> {
    config.validate()?;
    let scenarios = generate_scenarios(
        &config.network,
        config.seed,
        config.n_fault,
        config.n_nonfault,
        &config.ranges,
        config.inception_time,
    )?;
    scenarios
        .par_iter()
        .map(|scenario| {
            Simulator::for_scenario(&config.network, scenario)?.simulate(scenario, config.duration)
        })
        .collect()
}

fn derive_noise_seed(base: u64, record_index: usize) -> u64 {
    base ^ (record_index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Apply `snr_db` to every record with per-record derived seeds;
/// `None` is the clean pass-through.
pub fn noisy_records(
    records: &[WaveformRecord],
    snr_db: Option<f64>,
    seed: u64,
) -> Vec<WaveformRecord> {
    match snr_db {
        None => records.to_vec(),
        Some(db) => records
            .iter()
            .enumerate()
            .map(|(i, r)| add_noise(r, db, derive_noise_seed(seed, i)))
            .collect(),
    }
}

/// Keep only fault rows (distance labels) for the regression task.
pub fn regression_matrix(
    records: &[WaveformRecord],
    config: &ExperimentConfig,
    mode: ChannelMode,
) -> Result<FeatureMatrix> {
    let faults: Vec<WaveformRecord> = records
        .iter()
        .filter(|r| r.scenario.label().distance().is_some())
        .cloned()
        .collect();
    build_matrix(&faults, config.n_window, mode, config.k_folds, config.seed)
}

fn regression_targets(matrix: &FeatureMatrix, indices: &[usize]) -> Vec<f64> {
    matrix
        .labels_of(indices)
        .into_iter()
        .map(|l| l.distance().expect("regression rows carry distances"))
        .collect()
}

/// Per-model evaluation over the folds of one channel.
#[derive(Debug, Clone, Serialize)]
pub struct ModelEval {
    pub name: String,
    /// Validation MAE per fold (km); NaN where the model failed.
    pub per_fold_mae: Vec<f64>,
    /// Mean over the successful folds.
    pub mean_mae: f64,
    /// Total fit time across folds, each the median of 3 repeats (s).
    pub fit_seconds: f64,
    /// Failure messages, if any fold failed.
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChannelReport {
    pub channel: ChannelMode,
    pub models: Vec<ModelEval>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub channels: Vec<ChannelReport>,
    pub k_folds: usize,
    pub fingerprint: String,
}

impl EvalReport {
    pub fn model_mean(&self, channel: ChannelMode, name: &str) -> Option<f64> {
        self.channels
            .iter()
            .find(|c| c.channel == channel)
            .and_then(|c| c.models.iter().find(|m| m.name == name))
            .map(|m| m.mean_mae)
    }
}

/// Median wall-clock seconds of three fits; returns the last fitted model.
fn timed_fit(spec: &ModelSpec, x: &[Vec<f64>], y: &[f64]) -> Result<(Fitted, f64)> {
    let mut times = Vec::with_capacity(3);
    let mut fitted = None;
    for _ in 0..3 {
        let t0 = Instant::now();
        let model = fit_model(spec, x, y)?;
        times.push(t0.elapsed().as_secs_f64());
        fitted = Some(model);
    }
    times.sort_by(f64::total_cmp);
    Ok((fitted.expect("three fits ran"), times[1]))
}

/// 7-fold cross-validation of the whole roster, once per single-channel
/// mode (voltage-only and current-only).
///
/// Within each fold the scaler is fitted on the training rows only, and a
/// model failure is recorded without aborting the other entries.
pub fn run_kfold(config: &ExperimentConfig, records: &[WaveformRecord]) -> Result<EvalReport> {
    config.validate()?;
    let mut channels = Vec::new();
    for mode in [ChannelMode::Voltage, ChannelMode::Current] {
        let matrix = regression_matrix(records, config, mode)?;
        channels.push(kfold_channel(config, &matrix)?);
    }
    Ok(EvalReport {
        channels,
        k_folds: config.k_folds,
        fingerprint: config.fingerprint(),
    })
}

fn kfold_channel(config: &ExperimentConfig, matrix: &FeatureMatrix) -> Result<ChannelReport> {
    let k = config.k_folds;
    if matrix.n_rows() < k {
        return Err(Error::InvalidParameter(format!(
            "{} regression rows cannot fill {k} folds",
            matrix.n_rows()
        )));
    }
    let mut models: Vec<ModelEval> = config
        .roster
        .iter()
        .map(|spec| ModelEval {
            name: spec.name().to_string(),
            per_fold_mae: Vec::with_capacity(k),
            mean_mae: f64::NAN,
            fit_seconds: 0.0,
            failures: Vec::new(),
        })
        .collect();

    for fold in 0..k {
        let (train_idx, val_idx) = matrix.split_fold(fold);
        let scaler = StandardScaler::fit(train_idx.iter().map(|&i| matrix.rows[i].values.as_slice()))?;
        let x_train = scaler.transform(&matrix.features_of(&train_idx))?;
        let x_val = scaler.transform(&matrix.features_of(&val_idx))?;
        let y_train = regression_targets(matrix, &train_idx);
        let y_val = regression_targets(matrix, &val_idx);

        for (spec, eval) in config.roster.iter().zip(&mut models) {
            match timed_fit(spec, &x_train, &y_train)
                .and_then(|(model, secs)| Ok((model.predict(&x_val)?, secs)))
            {
                Ok((preds, secs)) => {
                    eval.per_fold_mae.push(mae(&preds, &y_val)?);
                    eval.fit_seconds += secs;
                }
                Err(e) => {
                    eval.per_fold_mae.push(f64::NAN);
                    eval.failures.push(format!("fold {fold}: {e}"));
                }
            }
        }
    }

    for eval in &mut models {
        let ok: Vec<f64> = eval
            .per_fold_mae
            .iter()
            .copied()
            .filter(|m| m.is_finite())
            .collect();
        if !ok.is_empty() {
            eval.mean_mae = ok.iter().sum::<f64>() / ok.len() as f64;
        }
    }

    Ok(ChannelReport {
        channel: matrix.channel_mode,
        models,
    })
}

/// One learning-curve sample.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CurvePoint {
    pub n_train: usize,
    pub train_mae: f64,
    pub val_mae: f64,
    pub fit_seconds: f64,
    pub cumulative_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LearningCurve {
    pub model: String,
    pub channel: ChannelMode,
    pub points: Vec<CurvePoint>,
}

/// Eight log-spaced training sizes from 50 (or what is available) up to
/// the full training split.
pub fn default_grid(n_train: usize) -> Vec<usize> {
    let lo = 50.min(n_train).max(2) as f64;
    let hi = n_train as f64;
    let mut grid: Vec<usize> = (0..8)
        .map(|i| {
            let t = i as f64 / 7.0;
            (lo * (hi / lo).powf(t)).round() as usize
        })
        .collect();
    grid.dedup();
    grid
}

/// Train on growing prefixes of the shuffled training split (folds 1..k),
/// validating on fold 0. Timing is serial, the median of 3 fits each.
///
/// At the full grid point this reproduces the fold-0 column of
/// [`run_kfold`] exactly: the models are permutation-invariant.
pub fn learning_curve(
    config: &ExperimentConfig,
    records: &[WaveformRecord],
    spec: &ModelSpec,
    grid: &[usize],
) -> Result<LearningCurve> {
    config.validate()?;
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty learning-curve grid".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "learning-curve grid must be strictly increasing".into(),
        ));
    }
    let matrix = regression_matrix(records, config, config.channel_mode)?;
    let (train_idx, val_idx) = matrix.split_fold(0);
    if *grid.last().unwrap() > train_idx.len() {
        return Err(Error::InvalidParameter(format!(
            "grid point {} exceeds the {}-row training split",
            grid.last().unwrap(),
            train_idx.len()
        )));
    }

    let mut order = train_idx;
    {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5eed));
        order.shuffle(&mut rng);
    }
    let y_val_truth = regression_targets(&matrix, &val_idx);

    let mut points = Vec::with_capacity(grid.len());
    let mut cumulative = 0.0;
    for &n in grid {
        let subset = &order[..n];
        let scaler = StandardScaler::fit(subset.iter().map(|&i| matrix.rows[i].values.as_slice()))?;
        let x_train = scaler.transform(&matrix.features_of(subset))?;
        let y_train = regression_targets(&matrix, subset);
        let x_val = scaler.transform(&matrix.features_of(&val_idx))?;

        let (model, fit_seconds) = timed_fit(spec, &x_train, &y_train)?;
        let train_mae = mae(&model.predict(&x_train)?, &y_train)?;
        let val_mae = mae(&model.predict(&x_val)?, &y_val_truth)?;
        cumulative += fit_seconds;
        points.push(CurvePoint {
            n_train: n,
            train_mae,
            val_mae,
            fit_seconds,
            cumulative_seconds: cumulative,
        });
    }
    Ok(LearningCurve {
        model: spec.name().to_string(),
        channel: config.channel_mode,
        points,
    })
}

/// Fault vs load-step classification report.
#[derive(Debug, Clone, Serialize)]
pub struct ClassifyReport {
    pub per_fold: Vec<FoldCounts>,
    pub accuracy: f64,
    pub confusion: Confusion,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FoldCounts {
    pub fold: usize,
    pub confusion: Confusion,
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct Confusion {
    pub true_fault: usize,
    pub false_fault: usize,
    pub true_nonfault: usize,
    pub false_nonfault: usize,
}

impl Confusion {
    pub fn accuracy(&self) -> f64 {
        let correct = self.true_fault + self.true_nonfault;
        let total = correct + self.false_fault + self.false_nonfault;
        correct as f64 / total as f64
    }

    fn add(&mut self, other: &Confusion) {
        self.true_fault += other.true_fault;
        self.false_fault += other.false_fault;
        self.true_nonfault += other.true_nonfault;
        self.false_nonfault += other.false_nonfault;
    }
}

/// 7-fold CV of the logistic-loss boosted classifier on fault vs
/// load-step windows, using the config's channel mode.
pub fn classify_events(
    config: &ExperimentConfig,
    records: &[WaveformRecord],
) -> Result<ClassifyReport> {
    config.validate()?;
    let matrix = build_matrix(
        records,
        config.n_window,
        config.channel_mode,
        config.k_folds,
        config.seed,
    )?;
    let params = config
        .roster
        .iter()
        .find_map(|spec| match spec {
            ModelSpec::Gb(p) => Some(p.clone()),
            _ => None,
        })
        .unwrap_or_default();
    classify_matrix(&matrix, &params, config.k_folds)
}

/// Classification CV on a prepared matrix; fault rows are class 1.
pub fn classify_matrix(
    matrix: &FeatureMatrix,
    params: &Hyperparams,
    k: usize,
) -> Result<ClassifyReport> {
    let classes: Vec<f64> = matrix
        .rows
        .iter()
        .map(|r| match r.label {
            Label::Distance(_) => 1.0,
            Label::NonFault => 0.0,
        })
        .collect();
    if !classes.contains(&0.0) || !classes.contains(&1.0) {
        return Err(Error::InvalidParameter(
            "classification needs both fault and non-fault rows".into(),
        ));
    }

    let mut per_fold = Vec::with_capacity(k);
    let mut confusion = Confusion::default();
    for fold in 0..k {
        let (train_idx, val_idx) = matrix.split_fold(fold);
        let scaler = StandardScaler::fit(train_idx.iter().map(|&i| matrix.rows[i].values.as_slice()))?;
        let x_train = scaler.transform(&matrix.features_of(&train_idx))?;
        let x_val = scaler.transform(&matrix.features_of(&val_idx))?;
        let y_train: Vec<f64> = train_idx.iter().map(|&i| classes[i]).collect();
        let model = gbt::fit(&x_train, &y_train, Task::BinaryClassification, params)?;
        let predicted = model.predict_class(&x_val)?;

        let mut counts = Confusion::default();
        for (&i, &p) in val_idx.iter().zip(&predicted) {
            match (classes[i] == 1.0, p == 1) {
                (true, true) => counts.true_fault += 1,
                (false, true) => counts.false_fault += 1,
                (false, false) => counts.true_nonfault += 1,
                (true, false) => counts.false_nonfault += 1,
            }
        }
        confusion.add(&counts);
        per_fold.push(FoldCounts {
            fold,
            confusion: counts,
        });
    }
    Ok(ClassifyReport {
        per_fold,
        accuracy: confusion.accuracy(),
        confusion,
    })
}

/// MAE table over the configured SNR levels.
#[derive(Debug, Clone, Serialize)]
pub struct NoiseReport {
    pub entries: Vec<NoiseEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NoiseEntry {
    /// `None` is the clean run.
    pub snr_db: Option<f64>,
    pub report: EvalReport,
}

/// Repeat the k-fold evaluation with measurement noise injected at each
/// configured SNR. The clean sentinel reuses the records untouched, so it
/// matches a plain [`run_kfold`] exactly.
pub fn noise_sweep(config: &ExperimentConfig, records: &[WaveformRecord]) -> Result<NoiseReport> {
    if config.noise_levels_db.is_empty() {
        return Err(Error::InvalidParameter("empty noise level list".into()));
    }
    let mut entries = Vec::with_capacity(config.noise_levels_db.len());
    for &snr_db in &config.noise_levels_db {
        let noised = noisy_records(records, snr_db, config.seed);
        entries.push(NoiseEntry {
            snr_db,
            report: run_kfold(config, &noised)?,
        });
    }
    Ok(NoiseReport { entries })
}

/// Impedance-locator comparison row for one fault scenario.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ImpedanceRow {
    pub scenario: usize,
    pub distance_km: f64,
    pub fault_resistance: f64,
    /// True fault current and true fault resistance.
    pub estimate_oracle_km: f64,
    /// Fault current approximated by the terminal current, assumed
    /// resistance from the config.
    pub estimate_blind_km: f64,
}

/// Evaluate the locator on every fault record carrying an oracle channel.
///
/// The terminal quantities are means over the first five post-inception
/// output samples; the path impedance spans the measuring branch plus its
/// longest continuation.
pub fn impedance_rows(
    config: &ExperimentConfig,
    records: &[WaveformRecord],
) -> Result<Vec<ImpedanceRow>> {
    use crate::baselines::{impedance_locate, ImpedanceInputs};

    let line_length = config.network.reachable_path_km();
    let z_total = config.network.branches[config.network.measuring_terminal].r_per_km * line_length;
    let mut rows = Vec::new();
    for (id, record) in records.iter().enumerate() {
        let (Some(distance), Some(fault_current)) =
            (record.scenario.label().distance(), record.fault_current.as_ref())
        else {
            continue;
        };
        let start = record.sample_index_at_or_after(record.scenario.inception_time);
        if start + 5 > record.voltage.len() {
            return Err(Error::InvalidParameter(format!(
                "scenario {id}: fewer than 5 post-inception samples"
            )));
        }
        let avg = |xs: &[f64]| xs[start..start + 5].iter().sum::<f64>() / 5.0;
        let v_s = avg(&record.voltage);
        let i_s = avg(&record.current);
        let i_f = avg(fault_current);

        let oracle = impedance_locate(&ImpedanceInputs {
            v_s,
            i_s,
            i_f,
            r_f_assumed: record.scenario.fault_resistance,
            z_total,
            line_length,
        })?;
        let blind = impedance_locate(&ImpedanceInputs {
            v_s,
            i_s,
            i_f: i_s,
            r_f_assumed: config.rf_assumed,
            z_total,
            line_length,
        })?;
        rows.push(ImpedanceRow {
            scenario: id,
            distance_km: distance,
            fault_resistance: record.scenario.fault_resistance,
            estimate_oracle_km: oracle,
            estimate_blind_km: blind,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FeatureVector;
    use crate::sim::{EventKind, FaultScenario};

    /// Hand-built waveforms whose shapes encode the fault distance, so the
    /// harness can be exercised without running the simulator.
    fn synth_records(n_fault: usize, n_nonfault: usize) -> Vec<WaveformRecord> {
        let mut records = Vec::new();
        for i in 0..n_fault + n_nonfault {
            let is_fault = i < n_fault;
            let distance = 1.0 + 699.0 * (i as f64 * 0.37).fract();
            let scenario = FaultScenario {
                kind: if is_fault {
                    EventKind::PoleToPoleFault
                } else {
                    EventKind::LoadStep
                },
                branch_index: 0,
                distance_km: if is_fault { distance } else { 0.0 },
                fault_resistance: if is_fault { 1.0 } else { 0.0 },
                inception_time: 0.03,
                limiting_inductance: 0.05,
                load_step_fraction: if is_fault { 0.0 } else { 0.3 },
            };
            let voltage: Vec<f64> = (0..100)
                .map(|k| {
                    if k < 30 {
                        640e3
                    } else if is_fault {
                        640e3 * (0.2 + 0.6 * distance / 700.0)
                            + 1e3 * ((k - 30) as f64 * 0.4 + i as f64).sin()
                    } else {
                        640e3 - 50.0 * (k - 30) as f64
                    }
                })
                .collect();
            let current: Vec<f64> = voltage.iter().map(|v| (640e3 - v) * 0.01 + 60.0).collect();
            records.push(WaveformRecord {
                dt_output: 1e-3,
                voltage,
                current,
                fault_current: is_fault.then(|| vec![0.0; 100]),
                scenario,
            });
        }
        records
    }

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            n_fault: 70,
            n_nonfault: 21,
            roster: vec![ModelSpec::Mean],
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mae(&[10.0, 20.0], &[12.0, 26.0]).unwrap(), 4.0);
        assert_eq!(mae(&[100.0], &[70.0]).unwrap(), 30.0);
        assert!(mae(&[], &[]).is_err());
        assert!(mae(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn kfold_mean_model_matches_deviation_oracle() {
        let config = small_config();
        let records = synth_records(70, 21);
        let report = run_kfold(&config, &records).unwrap();

        // Recompute the dummy's expected MAE per fold by hand.
        let matrix = regression_matrix(&records, &config, ChannelMode::Voltage).unwrap();
        let voltage = &report.channels[0];
        assert_eq!(voltage.models[0].name, "mean");
        for fold in 0..config.k_folds {
            let (train_idx, val_idx) = matrix.split_fold(fold);
            let y_train = regression_targets(&matrix, &train_idx);
            let y_val = regression_targets(&matrix, &val_idx);
            let train_mean = y_train.iter().sum::<f64>() / y_train.len() as f64;
            let oracle =
                y_val.iter().map(|y| (y - train_mean).abs()).sum::<f64>() / y_val.len() as f64;
            let got = voltage.models[0].per_fold_mae[fold];
            assert!(
                (got - oracle).abs() < 1e-9,
                "fold {fold}: {got} vs oracle {oracle}"
            );
        }
    }

    #[test]
    fn duplicate_roster_entries_agree() {
        let config = ExperimentConfig {
            roster: vec![ModelSpec::Knn { k: 3 }, ModelSpec::Knn { k: 3 }],
            ..small_config()
        };
        let records = synth_records(70, 21);
        let report = run_kfold(&config, &records).unwrap();
        for channel in &report.channels {
            assert_eq!(channel.models[0].per_fold_mae, channel.models[1].per_fold_mae);
        }
    }

    #[test]
    fn seven_rows_runs_leave_one_out() {
        let config = ExperimentConfig {
            n_fault: 7,
            n_nonfault: 1,
            ..small_config()
        };
        let records = synth_records(7, 1);
        let report = run_kfold(&config, &records).unwrap();
        for channel in &report.channels {
            for model in &channel.models {
                assert_eq!(model.per_fold_mae.len(), 7);
                assert!(model.per_fold_mae.iter().all(|m| m.is_finite()));
            }
        }
    }

    #[test]
    fn fold_validation_rows_cover_matrix() {
        let config = small_config();
        let records = synth_records(70, 21);
        let matrix = regression_matrix(&records, &config, ChannelMode::Voltage).unwrap();
        let total: usize = (0..config.k_folds)
            .map(|f| matrix.split_fold(f).1.len())
            .sum();
        assert_eq!(total, matrix.n_rows());
        assert_eq!(matrix.n_rows(), 70, "non-fault rows must be excluded");
    }

    #[test]
    fn curve_full_grid_point_matches_kfold_fold_zero() {
        let spec = ModelSpec::Gb(Hyperparams {
            n_rounds: 20,
            ..Hyperparams::default()
        });
        let config = ExperimentConfig {
            roster: vec![spec.clone()],
            ..small_config()
        };
        let records = synth_records(70, 21);
        let report = run_kfold(&config, &records).unwrap();
        let matrix = regression_matrix(&records, &config, config.channel_mode).unwrap();
        let n_train = matrix.split_fold(0).0.len();
        let curve = learning_curve(&config, &records, &spec, &[n_train]).unwrap();
        assert_eq!(curve.points.len(), 1);
        let kfold_fold0 = report.channels[0].models[0].per_fold_mae[0];
        assert_eq!(
            curve.points[0].val_mae, kfold_fold0,
            "full-split curve point must reproduce the fold-0 evaluation"
        );
    }

    #[test]
    fn curve_mean_model_matches_deviation_oracle_at_each_size() {
        let config = small_config();
        let records = synth_records(70, 21);
        let grid = [10usize, 25, 60];
        let curve = learning_curve(&config, &records, &ModelSpec::Mean, &grid).unwrap();

        // replay the shuffle to recover the training prefixes
        let matrix = regression_matrix(&records, &config, config.channel_mode).unwrap();
        let (mut order, val_idx) = matrix.split_fold(0);
        {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut rng =
                rand_chacha::ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5eed));
            order.shuffle(&mut rng);
        }
        let y_val = regression_targets(&matrix, &val_idx);
        for (point, &n) in curve.points.iter().zip(&grid) {
            let y_train = regression_targets(&matrix, &order[..n]);
            let train_mean = y_train.iter().sum::<f64>() / n as f64;
            let oracle =
                y_val.iter().map(|y| (y - train_mean).abs()).sum::<f64>() / y_val.len() as f64;
            assert!(
                (point.val_mae - oracle).abs() < 1e-9,
                "n={n}: {} vs oracle {oracle}",
                point.val_mae
            );
        }
    }

    #[test]
    fn curve_rejects_oversized_grid() {
        let config = small_config();
        let records = synth_records(70, 21);
        let err = learning_curve(&config, &records, &ModelSpec::Mean, &[10_000]).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)), "{err}");
        assert!(learning_curve(&config, &records, &ModelSpec::Mean, &[]).is_err());
        assert!(learning_curve(&config, &records, &ModelSpec::Mean, &[30, 30]).is_err());
    }

    #[test]
    fn default_grid_is_increasing_and_spans() {
        let grid = default_grid(1200);
        assert_eq!(grid.len(), 8);
        assert_eq!(grid[0], 50);
        assert_eq!(*grid.last().unwrap(), 1200);
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn classifier_cannot_beat_chance_on_mirrored_rows() {
        // every feature row appears once per class, and both copies share a
        // fold: no leaf can carry class signal
        let mut rows = Vec::new();
        let pair_folds = crate::dataset::assign_folds(70, 7, 3).unwrap();
        let mut fold_of_row = Vec::new();
        for (i, &fold) in pair_folds.iter().enumerate() {
            let values: Vec<f64> = (0..6).map(|j| ((i * 7 + j) as f64 * 0.13).sin()).collect();
            rows.push(FeatureVector {
                values: values.clone(),
                label: Label::Distance(100.0),
            });
            rows.push(FeatureVector {
                values,
                label: Label::NonFault,
            });
            fold_of_row.extend([fold, fold]);
        }
        let matrix = FeatureMatrix {
            rows,
            fold_of_row,
            channel_mode: ChannelMode::Voltage,
        };
        let params = Hyperparams {
            n_rounds: 30,
            ..Hyperparams::default()
        };
        let report = classify_matrix(&matrix, &params, 7).unwrap();
        assert!(
            (report.accuracy - 0.5).abs() < 0.15,
            "mirrored classes must be undecidable, got {}",
            report.accuracy
        );
    }

    #[test]
    fn classify_requires_both_classes() {
        let config = ExperimentConfig {
            n_fault: 30,
            n_nonfault: 1,
            ..small_config()
        };
        let records = synth_records(30, 0);
        assert!(classify_events(&config, &records).is_err());
    }

    #[test]
    fn classify_separates_synthetic_events() {
        let config = ExperimentConfig {
            roster: vec![ModelSpec::Gb(Hyperparams {
                n_rounds: 30,
                ..Hyperparams::default()
            })],
            ..small_config()
        };
        let records = synth_records(70, 21);
        let report = classify_events(&config, &records).unwrap();
        assert!(report.accuracy >= 0.9, "accuracy {}", report.accuracy);
    }

    #[test]
    fn clean_noise_entry_matches_plain_kfold() {
        let config = ExperimentConfig {
            noise_levels_db: vec![None, Some(30.0)],
            ..small_config()
        };
        let records = synth_records(70, 21);
        let plain = run_kfold(&config, &records).unwrap();
        let sweep = noise_sweep(&config, &records).unwrap();
        assert_eq!(sweep.entries.len(), 2);
        assert!(sweep.entries[0].snr_db.is_none());
        for (a, b) in sweep.entries[0]
            .report
            .channels
            .iter()
            .zip(&plain.channels)
        {
            for (ma, mb) in a.models.iter().zip(&b.models) {
                assert_eq!(ma.per_fold_mae, mb.per_fold_mae);
            }
        }
        let empty = ExperimentConfig {
            noise_levels_db: vec![],
            ..small_config()
        };
        assert!(noise_sweep(&empty, &records).is_err());
    }

    #[test]
    fn kfold_reports_are_byte_deterministic() {
        let config = small_config();
        let records = synth_records(70, 21);
        let a = report::kfold_csv(&run_kfold(&config, &records).unwrap());
        let b = report::kfold_csv(&run_kfold(&config, &records).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn model_failure_is_recorded_not_fatal() {
        // kNN with k larger than any training fold must fail per fold while
        // the mean model still reports.
        let config = ExperimentConfig {
            roster: vec![ModelSpec::Knn { k: 1000 }, ModelSpec::Mean],
            ..small_config()
        };
        let records = synth_records(70, 21);
        let report = run_kfold(&config, &records).unwrap();
        let knn = &report.channels[0].models[0];
        assert!(knn.per_fold_mae.iter().all(|m| m.is_nan()));
        assert!(!knn.failures.is_empty());
        let mean = &report.channels[0].models[1];
        assert!(mean.mean_mae.is_finite());
    }

    #[test]
    fn impedance_rows_cover_fault_records_only() {
        let config = small_config();
        let records = synth_records(70, 21);
        let rows = impedance_rows(&config, &records).unwrap();
        assert_eq!(rows.len(), 70);
        assert!(rows.iter().all(|r| r.estimate_oracle_km.is_finite()));
    }

    #[test]
    fn config_fingerprint_tracks_content() {
        let a = ExperimentConfig::default();
        let mut b = ExperimentConfig::default();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.seed = 43;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn config_round_trips_through_json() {
        let config = ExperimentConfig::default();
        let text = serde_json::to_string_pretty(&config).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(config, back);
        // partial configs pick up defaults
        let partial: ExperimentConfig = serde_json::from_str(r#"{"seed": 7}"#).unwrap();
        assert_eq!(partial.seed, 7);
        assert_eq!(partial.n_fault, config.n_fault);
    }
}
