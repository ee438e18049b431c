//! Experiment drivers: the (β₂, d) grid scan, the feedback-attenuation sweep
//! with its no-delay baseline, and the per-task parameter presets.

use std::borrow::Cow;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::masking::{build_drive, generate_masks, DelayedInputSpec, InputSequence, MaskDistribution, MaskPair};
use crate::metrics::nmse;
use crate::parallel::{try_map_indexed, Parallelism};
use crate::readout::{kfold_evaluate, random_resplit_evaluate, NormalEquations, UtteranceDataset};
use crate::reservoir::{run, InitialState, Nonlinearity, ReservoirParams};
use crate::tasks::SeriesTask;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetName {
    Narma10,
    MackeyGlass,
    SpokenDigits,
    Speakers,
}

impl PresetName {
    pub const ALL: [PresetName; 4] = [
        PresetName::Narma10,
        PresetName::MackeyGlass,
        PresetName::SpokenDigits,
        PresetName::Speakers,
    ];

    pub fn is_classification(self) -> bool {
        matches!(self, PresetName::SpokenDigits | PresetName::Speakers)
    }

    /// Optical attenuations at which the preset is exercised.
    pub fn tested_attenuations_db(self) -> &'static [f64] {
        match self {
            PresetName::Narma10 | PresetName::MackeyGlass => &[2.0, 15.0],
            PresetName::SpokenDigits | PresetName::Speakers => &[2.0],
        }
    }
}

impl std::fmt::Display for PresetName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PresetName::Narma10 => "narma10",
            PresetName::MackeyGlass => "mackey-glass",
            PresetName::SpokenDigits => "spoken-digits",
            PresetName::Speakers => "speakers",
        })
    }
}

impl std::str::FromStr for PresetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PresetName::ALL
            .into_iter()
            .find(|p| p.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown preset {s:?}")))
    }
}

/// Fixed (non-optimised) input and reservoir parameters for a task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskPreset {
    pub name: PresetName,
    pub beta1: f64,
    pub bias_j0: f64,
    pub attenuation_db: f64,
    pub ridge_lambda: f64,
    pub n_nodes: usize,
}

impl TaskPreset {
    /// The reference parameters, at the 2 dB operating point.
    pub fn table(name: PresetName) -> Self {
        let (beta1, bias_j0, n_nodes) = match name {
            PresetName::Narma10 => (1.8, 0.4, 50),
            PresetName::MackeyGlass => (1.0, 0.0, 50),
            PresetName::SpokenDigits => (10.0, 0.0, 100),
            PresetName::Speakers => (0.3, 0.8, 100),
        };
        Self {
            name,
            beta1,
            bias_j0,
            attenuation_db: 2.0,
            ridge_lambda: 1e-5,
            n_nodes,
        }
    }
}

/// Piecewise log-linear map from optical attenuation (dB) to feedback α.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttenuationMap {
    /// `(attenuation_db, alpha)` pairs.
    pub anchors: Vec<(f64, f64)>,
    #[serde(default)]
    pub allow_extrapolation: bool,
}

impl Default for AttenuationMap {
    fn default() -> Self {
        Self {
            anchors: vec![(2.0, 0.15), (15.0, 1e-4)],
            allow_extrapolation: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaLookup {
    pub alpha: f64,
    pub interpolated: bool,
}

impl AttenuationMap {
    fn sorted(&self) -> Result<Vec<(f64, f64)>> {
        let mut a = self.anchors.clone();
        if a.is_empty() {
            return Err(Error::Config("attenuation map has no anchors".into()));
        }
        if a.iter().any(|&(db, alpha)| !db.is_finite() || !(alpha > 0.0)) {
            return Err(Error::Config("attenuation anchors need finite dB and alpha > 0".into()));
        }
        a.sort_by(|x, y| x.0.total_cmp(&y.0));
        if a.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Config("duplicate attenuation anchor".into()));
        }
        Ok(a)
    }

    fn anchor_list(&self) -> String {
        self.anchors
            .iter()
            .map(|(db, a)| format!("{db} dB -> {a}"))
            .collect::<Vec<_>>()
            .join(", ")
    }

    pub fn lookup(&self, db: f64) -> Result<AlphaLookup> {
        let a = self.sorted()?;
        if let Some(&(_, alpha)) = a.iter().find(|&&(x, _)| x == db) {
            return Ok(AlphaLookup {
                alpha,
                interpolated: false,
            });
        }
        let (lo, hi) = (a[0].0, a[a.len() - 1].0);
        let outside = !(db >= lo && db <= hi);
        if outside && (!self.allow_extrapolation || a.len() < 2 || !db.is_finite()) {
            return Err(Error::UnmappedAttenuation {
                db,
                lo,
                hi,
                anchors: self.anchor_list(),
            });
        }
        // bracketing pair, or the outermost pair when extrapolating
        let i = a.partition_point(|&(x, _)| x < db).clamp(1, a.len() - 1);
        let ((x0, y0), (x1, y1)) = (a[i - 1], a[i]);
        let t = (db - x0) / (x1 - x0);
        let log_alpha = y0.ln() + t * (y1.ln() - y0.ln());
        Ok(AlphaLookup {
            alpha: log_alpha.exp(),
            interpolated: true,
        })
    }
}

pub fn map_attenuation(db: f64, map: &AttenuationMap) -> Result<AlphaLookup> {
    map.lookup(db)
}

/// Classification evaluation protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ClassificationProtocol {
    KFold { k: usize },
    RandomResplit { train_count: usize, repeats: usize, seed: u64 },
}

/// The data a scan is run on.
#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentTask {
    Series(SeriesTask),
    Classification {
        dataset: UtteranceDataset,
        protocol: ClassificationProtocol,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricKind {
    Nmse,
    ErrorRate,
}

impl ExperimentTask {
    pub fn metric(&self) -> MetricKind {
        match self {
            ExperimentTask::Series(_) => MetricKind::Nmse,
            ExperimentTask::Classification { .. } => MetricKind::ErrorRate,
        }
    }

    pub fn channels(&self) -> usize {
        match self {
            ExperimentTask::Series(t) => t.input.channels(),
            ExperimentTask::Classification { dataset, .. } => dataset.channels(),
        }
    }

    fn input(&self) -> Result<Cow<'_, InputSequence>> {
        Ok(match self {
            ExperimentTask::Series(t) => Cow::Borrowed(&t.input),
            ExperimentTask::Classification { dataset, .. } => Cow::Owned(dataset.concatenated_input()?),
        })
    }
}

/// Everything held fixed across the cells of a scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSetup {
    pub n_nodes: usize,
    pub alpha: f64,
    pub nonlinearity: Nonlinearity,
    pub initial_state: InitialState,
    pub beta1: f64,
    pub bias_j0: f64,
    pub ridge_lambda: f64,
    pub mask_distribution: MaskDistribution,
}

impl ExperimentSetup {
    pub fn from_preset(preset: &TaskPreset, map: &AttenuationMap) -> Result<Self> {
        let alpha = map.lookup(preset.attenuation_db)?.alpha;
        Ok(Self::with_alpha(preset, alpha))
    }

    pub fn with_alpha(preset: &TaskPreset, alpha: f64) -> Self {
        Self {
            n_nodes: preset.n_nodes,
            alpha,
            nonlinearity: Nonlinearity::Sine,
            initial_state: InitialState::Zeros,
            beta1: preset.beta1,
            bias_j0: preset.bias_j0,
            ridge_lambda: preset.ridge_lambda,
            mask_distribution: MaskDistribution::Uniform01,
        }
    }

    /// Reservoir parameters for one cell; a seeded initial state is mixed
    /// with `cell_seed` so cells do not share it.
    pub fn reservoir(&self, cell_seed: u64) -> Result<ReservoirParams> {
        let init = match self.initial_state {
            InitialState::Zeros => InitialState::Zeros,
            InitialState::SeededUniform(s) => InitialState::SeededUniform(mix_seed(&[s, cell_seed])),
        };
        let p = ReservoirParams {
            n_nodes: self.n_nodes,
            feedback_alpha: self.alpha,
            nonlinearity: self.nonlinearity,
            initial_state: init,
        };
        p.validate()?;
        Ok(p)
    }
}

/// SplitMix64 over a list of words: stable, platform independent.
pub fn mix_seed(words: &[u64]) -> u64 {
    let mut h: u64 = 0x243F_6A88_85A3_08D3;
    for &w in words {
        h = h.wrapping_add(w).wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    }
    h
}

/// Seed attached to grid cell `(beta2_index, delay_index)`; independent of
/// the grid size so adding points leaves existing cells untouched.
pub fn cell_seed(experiment_seed: u64, beta2_index: usize, delay_index: usize) -> u64 {
    mix_seed(&[experiment_seed, beta2_index as u64, delay_index as u64])
}

/// Input prepared once per scan and shared by every cell.
struct Prepared<'a> {
    task: &'a ExperimentTask,
    input: Cow<'a, InputSequence>,
}

impl<'a> Prepared<'a> {
    fn new(task: &'a ExperimentTask) -> Result<Self> {
        if let ExperimentTask::Series(t) = task {
            t.split.ranges(t.len())?;
        }
        Ok(Self {
            task,
            input: task.input()?,
        })
    }

    /// Test metric for each ridge λ in `lambdas`.
    fn evaluate(
        &self,
        reservoir: &ReservoirParams,
        drive_spec: &DelayedInputSpec,
        lambdas: &[f64],
    ) -> Result<Vec<f64>> {
        let drive = build_drive(&self.input, drive_spec)?;
        let states = run(&drive, reservoir, 0)?.into_matrix();
        match self.task {
            ExperimentTask::Series(task) => series_metrics(task, &states, lambdas),
            ExperimentTask::Classification { dataset, protocol } => lambdas
                .iter()
                .map(|&l| {
                    let report = match *protocol {
                        ClassificationProtocol::KFold { k } => kfold_evaluate(dataset, &states, k, l)?,
                        ClassificationProtocol::RandomResplit {
                            train_count,
                            repeats,
                            seed,
                        } => random_resplit_evaluate(dataset, &states, train_count, repeats, seed, l)?,
                    };
                    Ok(report.mean)
                })
                .collect(),
        }
    }
}

fn series_metrics(task: &SeriesTask, states: &Matrix, lambdas: &[f64]) -> Result<Vec<f64>> {
    let ranges = task.split.ranges(task.len())?;
    let mut ne = NormalEquations::new(states.cols(), 1, false);
    for r in ranges.train.clone() {
        ne.add_row(states.row(r), std::slice::from_ref(&task.target[r]));
    }
    let target = &task.target[ranges.test.clone()];
    lambdas
        .iter()
        .map(|&l| {
            let readout = ne.solve(l)?;
            let mut y = [0.0];
            let predicted: Vec<f64> = ranges
                .test
                .clone()
                .map(|r| {
                    readout.predict_row(states.row(r), &mut y);
                    y[0]
                })
                .collect();
            Ok(nmse(&predicted, target)?.value())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanGrid {
    pub beta2: Vec<f64>,
    pub delays: Vec<usize>,
}

impl Default for ScanGrid {
    /// β₂ ∈ {0, 0.25, …, 3}, d ∈ {0, …, 25}.
    fn default() -> Self {
        Self {
            beta2: (0..=12).map(|i| i as f64 * 0.25).collect(),
            delays: (0..=25).collect(),
        }
    }
}

impl ScanGrid {
    pub fn validate(&self) -> Result<()> {
        if self.beta2.is_empty() || self.delays.is_empty() {
            return Err(Error::InvalidParameter("scan grids must be non-empty".into()));
        }
        if !self.beta2.contains(&0.0) {
            return Err(Error::InvalidParameter(
                "the beta2 grid must contain 0 (the no-delay baseline)".into(),
            ));
        }
        if self.beta2.iter().any(|&b| !(b >= 0.0) || !b.is_finite()) {
            return Err(Error::InvalidParameter("beta2 values must be finite and >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BestCell {
    pub beta2: f64,
    pub delay: usize,
    pub metric: f64,
    pub beta2_index: usize,
    pub delay_index: usize,
}

/// Metric surface over (d, β₂). Rows follow `delay_axis`, columns
/// `beta2_axis`; each entry is the mean over the mask seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub metric: MetricKind,
    pub beta2_axis: Vec<f64>,
    pub delay_axis: Vec<usize>,
    pub mask_seeds: Vec<u64>,
    pub surface: Vec<Vec<f64>>,
    /// `[d][β₂][seed]`
    pub per_seed: Vec<Vec<Vec<f64>>>,
    pub cell_seeds: Vec<Vec<u64>>,
    pub best: BestCell,
    /// Wall-clock per cell in milliseconds; kept out of the serialized payload.
    #[serde(skip)]
    pub cell_timings_ms: Vec<Vec<f64>>,
}

impl GridResult {
    /// Value at `(β₂ index, d index)`.
    pub fn at(&self, beta2_index: usize, delay_index: usize) -> f64 {
        self.surface[delay_index][beta2_index]
    }

    /// Column of the surface at β₂ = 0.
    pub fn baseline_column(&self) -> Option<Vec<f64>> {
        let b = self.beta2_axis.iter().position(|&x| x == 0.0)?;
        Some(self.surface.iter().map(|row| row[b]).collect())
    }

    pub fn baseline_metric(&self) -> Option<f64> {
        self.baseline_column().map(|c| c[0])
    }
}

/// Argmin over `[row][col]`; ties go to the smallest row then smallest
/// column. Non-finite entries never win unless everything is non-finite.
fn argmin_surface(surface: &[Vec<f64>]) -> (usize, usize) {
    let mut best = (0, 0);
    let mut best_v = f64::INFINITY;
    let mut found = false;
    for (r, row) in surface.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            if v.is_finite() && (!found || v < best_v) {
                best = (r, c);
                best_v = v;
                found = true;
            }
        }
    }
    best
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Scans every (β₂, d) pair with all other parameters fixed. Masks depend
/// only on the mask seed, so every cell sees the same masks and data.
pub fn scan_beta2_delay(
    task: &ExperimentTask,
    setup: &ExperimentSetup,
    grid: &ScanGrid,
    mask_seeds: &[u64],
    experiment_seed: u64,
    parallelism: Parallelism,
) -> Result<GridResult> {
    grid.validate()?;
    if mask_seeds.is_empty() {
        return Err(Error::InvalidParameter("at least one mask seed is required".into()));
    }
    let prepared = Prepared::new(task)?;
    let masks: Vec<MaskPair> = mask_seeds
        .iter()
        .map(|&s| generate_masks(setup.n_nodes, task.channels(), s, setup.mask_distribution))
        .collect::<Result<_>>()?;
    if masks.iter().any(|m| m.channels() != task.channels()) {
        return Err(Error::DimensionMismatch {
            context: "task channels vs mask columns",
            expected: masks[0].channels(),
            got: task.channels(),
        });
    }

    let (nb, nd, ns) = (grid.beta2.len(), grid.delays.len(), mask_seeds.len());
    // index = (d_idx * nb + b_idx) * ns + s_idx
    let decode = |i: usize| (i / ns / nb, (i / ns) % nb, i % ns);
    let results = try_map_indexed(nd * nb * ns, parallelism, |i| -> Result<(f64, f64)> {
        let (di, bi, si) = decode(i);
        let beta2 = grid.beta2[bi];
        // with β₂ = 0 the lag never reaches the drive: evaluate d = first only
        if beta2 == 0.0 && di > 0 {
            return Ok((f64::NAN, 0.0));
        }
        let started = Instant::now();
        let spec = DelayedInputSpec {
            beta1: setup.beta1,
            beta2,
            delay: grid.delays[di],
            bias_j0: setup.bias_j0,
            masks: masks[si].clone(),
        };
        let reservoir = setup.reservoir(cell_seed(experiment_seed, bi, di))?;
        let m = prepared.evaluate(&reservoir, &spec, &[setup.ridge_lambda])?[0];
        Ok((m, started.elapsed().as_secs_f64() * 1e3))
    })?;

    let mut per_seed = vec![vec![vec![0.0; ns]; nb]; nd];
    let mut timings = vec![vec![0.0; nb]; nd];
    for (i, (m, ms)) in results.into_iter().enumerate() {
        let (di, bi, si) = decode(i);
        per_seed[di][bi][si] = m;
        timings[di][bi] += ms;
    }
    for (bi, _) in grid.beta2.iter().enumerate().filter(|(_, &b)| b == 0.0) {
        for di in 1..nd {
            per_seed[di][bi] = per_seed[0][bi].clone();
        }
    }
    let surface: Vec<Vec<f64>> = per_seed
        .iter()
        .map(|row| row.iter().map(|cell| mean(cell)).collect())
        .collect();
    let (di, bi) = argmin_surface(&surface);
    let cell_seeds = (0..nd)
        .map(|d| (0..nb).map(|b| cell_seed(experiment_seed, b, d)).collect())
        .collect();
    Ok(GridResult {
        metric: task.metric(),
        beta2_axis: grid.beta2.clone(),
        delay_axis: grid.delays.clone(),
        mask_seeds: mask_seeds.to_vec(),
        best: BestCell {
            beta2: grid.beta2[bi],
            delay: grid.delays[di],
            metric: surface[di][bi],
            beta2_index: bi,
            delay_index: di,
        },
        surface,
        per_seed,
        cell_seeds,
        cell_timings_ms: timings,
    })
}

/// Metric of a single (β₂, d) cell averaged over the mask seeds.
pub fn evaluate_cell(
    task: &ExperimentTask,
    setup: &ExperimentSetup,
    beta2: f64,
    delay: usize,
    mask_seeds: &[u64],
    cell_seed: u64,
) -> Result<f64> {
    let prepared = Prepared::new(task)?;
    let reservoir = setup.reservoir(cell_seed)?;
    let mut values = Vec::with_capacity(mask_seeds.len());
    for &s in mask_seeds {
        let spec = DelayedInputSpec {
            beta1: setup.beta1,
            beta2,
            delay,
            bias_j0: setup.bias_j0,
            masks: generate_masks(setup.n_nodes, task.channels(), s, setup.mask_distribution)?,
        };
        values.push(prepared.evaluate(&reservoir, &spec, &[setup.ridge_lambda])?[0]);
    }
    Ok(mean(&values))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    /// Preset β₁, J₀, λ; optimise (β₂, d).
    DelayedInput,
    /// β₂ = 0; optimise (β₁, λ).
    StandardNoDelay,
}

impl std::fmt::Display for SweepMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepMode::DelayedInput => "delayed-input",
            SweepMode::StandardNoDelay => "standard-no-delay",
        })
    }
}

/// Grids for the no-delay baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StandardGrid {
    /// Multipliers applied to the preset β₁.
    pub beta1_factors: Vec<f64>,
    pub ridge_lambdas: Vec<f64>,
}

impl Default for StandardGrid {
    fn default() -> Self {
        Self {
            beta1_factors: vec![0.1, 0.3, 1.0, 3.0, 10.0],
            ridge_lambdas: vec![1e-7, 1e-5, 1e-3, 1e-1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BestParams {
    Delay { beta2: f64, delay: usize },
    Standard { beta1: f64, ridge_lambda: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub attenuation_db: f64,
    pub alpha: f64,
    pub interpolated: bool,
    pub best_metric: f64,
    pub best_params: BestParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub mode: SweepMode,
    pub metric: MetricKind,
    pub points: Vec<SweepPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    pub scan_grid: ScanGrid,
    pub standard_grid: StandardGrid,
    pub mask_seeds: Vec<u64>,
    pub experiment_seed: u64,
    pub parallelism: Parallelism,
}

/// Best metric per attenuation for one optimisation mode. `base` supplies
/// everything except α, which comes from the map at each grid point.
pub fn sweep_attenuation(
    task: &ExperimentTask,
    base: &ExperimentSetup,
    mode: SweepMode,
    attenuation_grid_db: &[f64],
    map: &AttenuationMap,
    options: &SweepOptions,
) -> Result<SweepCurve> {
    if attenuation_grid_db.is_empty() {
        return Err(Error::InvalidParameter("attenuation grid must be non-empty".into()));
    }
    // resolve every point up front so an unmapped dB fails before any work
    let alphas: Vec<AlphaLookup> = attenuation_grid_db
        .iter()
        .map(|&db| map.lookup(db))
        .collect::<Result<_>>()?;

    let mut points = Vec::with_capacity(alphas.len());
    for (&db, lookup) in attenuation_grid_db.iter().zip(&alphas) {
        let setup = ExperimentSetup {
            alpha: lookup.alpha,
            ..base.clone()
        };
        let (best_metric, best_params) = match mode {
            SweepMode::DelayedInput => {
                let g = scan_beta2_delay(
                    task,
                    &setup,
                    &options.scan_grid,
                    &options.mask_seeds,
                    options.experiment_seed,
                    options.parallelism,
                )?;
                (
                    g.best.metric,
                    BestParams::Delay {
                        beta2: g.best.beta2,
                        delay: g.best.delay,
                    },
                )
            }
            SweepMode::StandardNoDelay => standard_best(task, &setup, options)?,
        };
        points.push(SweepPoint {
            attenuation_db: db,
            alpha: lookup.alpha,
            interpolated: lookup.interpolated,
            best_metric,
            best_params,
        });
    }
    Ok(SweepCurve {
        mode,
        metric: task.metric(),
        points,
    })
}

/// Grid search over (β₁, λ) at β₂ = 0. Returns the best mean metric.
fn standard_best(task: &ExperimentTask, setup: &ExperimentSetup, options: &SweepOptions) -> Result<(f64, BestParams)> {
    let grid = &options.standard_grid;
    if grid.beta1_factors.is_empty() || grid.ridge_lambdas.is_empty() || options.mask_seeds.is_empty() {
        return Err(Error::InvalidParameter("standard baseline grids must be non-empty".into()));
    }
    let prepared = Prepared::new(task)?;
    let seeds = &options.mask_seeds;
    let (nf, ns) = (grid.beta1_factors.len(), seeds.len());
    // one reservoir run per (β₁, seed); all λ share its normal equations
    let runs = try_map_indexed(nf * ns, options.parallelism, |i| {
        let (fi, si) = (i / ns, i % ns);
        let spec = DelayedInputSpec {
            beta1: setup.beta1 * grid.beta1_factors[fi],
            beta2: 0.0,
            delay: 0,
            bias_j0: setup.bias_j0,
            masks: generate_masks(setup.n_nodes, task.channels(), seeds[si], setup.mask_distribution)?,
        };
        let reservoir = setup.reservoir(mix_seed(&[options.experiment_seed, u64::MAX, fi as u64]))?;
        prepared.evaluate(&reservoir, &spec, &grid.ridge_lambdas)
    })?;
    // surface[β₁][λ]
    let surface: Vec<Vec<f64>> = (0..nf)
        .map(|fi| {
            (0..grid.ridge_lambdas.len())
                .map(|li| mean(&(0..ns).map(|si| runs[fi * ns + si][li]).collect::<Vec<_>>()))
                .collect()
        })
        .collect();
    let (fi, li) = argmin_surface(&surface);
    Ok((
        surface[fi][li],
        BestParams::Standard {
            beta1: setup.beta1 * grid.beta1_factors[fi],
            ridge_lambda: grid.ridge_lambdas[li],
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::{generate_narma10, Narma10Params, SplitSpec};

    #[test]
    fn presets_match_reference_table() {
        let n = TaskPreset::table(PresetName::Narma10);
        assert_eq!((n.beta1, n.bias_j0, n.ridge_lambda, n.n_nodes), (1.8, 0.4, 1e-5, 50));
        let m = TaskPreset::table(PresetName::MackeyGlass);
        assert_eq!((m.beta1, m.bias_j0, m.ridge_lambda, m.n_nodes), (1.0, 0.0, 1e-5, 50));
        let d = TaskPreset::table(PresetName::SpokenDigits);
        assert_eq!((d.beta1, d.bias_j0, d.ridge_lambda, d.n_nodes), (10.0, 0.0, 1e-5, 100));
        let s = TaskPreset::table(PresetName::Speakers);
        assert_eq!((s.beta1, s.bias_j0, s.ridge_lambda, s.n_nodes), (0.3, 0.8, 1e-5, 100));
        assert_eq!(PresetName::Narma10.tested_attenuations_db(), &[2.0, 15.0]);
        assert_eq!(PresetName::MackeyGlass.tested_attenuations_db(), &[2.0, 15.0]);
        assert_eq!(PresetName::SpokenDigits.tested_attenuations_db(), &[2.0]);
        assert_eq!(PresetName::Speakers.tested_attenuations_db(), &[2.0]);
        for p in PresetName::ALL {
            assert_eq!(TaskPreset::table(p).attenuation_db, 2.0);
            assert_eq!(p.to_string().parse::<PresetName>().unwrap(), p);
        }
    }

    #[test]
    fn attenuation_anchors_and_interpolation() {
        let map = AttenuationMap::default();
        assert_eq!(map.lookup(2.0).unwrap(), AlphaLookup { alpha: 0.15, interpolated: false });
        assert_eq!(map.lookup(15.0).unwrap(), AlphaLookup { alpha: 1e-4, interpolated: false });
        let mid = map.lookup(8.5).unwrap();
        assert!(mid.interpolated);
        assert!((mid.alpha - (0.15f64 * 1e-4).sqrt()).abs() < 1e-15);
        assert!((mid.alpha - 3.873e-3).abs() < 1e-6);
    }

    #[test]
    fn attenuation_extrapolation_needs_opt_in() {
        let map = AttenuationMap::default();
        let err = map.lookup(20.0).unwrap_err();
        assert!(matches!(err, Error::UnmappedAttenuation { .. }));
        assert!(err.to_string().contains("2 dB -> 0.15"));
        let open = AttenuationMap {
            allow_extrapolation: true,
            ..AttenuationMap::default()
        };
        let a = open.lookup(28.0).unwrap();
        // two more 13 dB steps down in log α from 15 dB
        assert!(a.interpolated);
        assert!((a.alpha.ln() - ((1e-4f64).ln() * 2.0 - 0.15f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn seeds_are_stable() {
        assert_eq!(cell_seed(0, 1, 2), cell_seed(0, 1, 2));
        assert_ne!(cell_seed(0, 1, 2), cell_seed(0, 2, 1));
        assert_ne!(cell_seed(0, 1, 2), cell_seed(1, 1, 2));
    }

    fn small_narma() -> ExperimentTask {
        let p = Narma10Params {
            length: 1200,
            input_seed: 3,
            split: SplitSpec::new(100, 500, 100, 500),
            ..Default::default()
        };
        ExperimentTask::Series(generate_narma10(&p).unwrap())
    }

    fn small_setup() -> ExperimentSetup {
        let mut preset = TaskPreset::table(PresetName::Narma10);
        preset.n_nodes = 12;
        ExperimentSetup::from_preset(&preset, &AttenuationMap::default()).unwrap()
    }

    #[test]
    fn scan_baseline_row_is_constant_and_best_is_min() {
        let grid = ScanGrid {
            beta2: vec![0.0, 1.0, 2.0],
            delays: vec![0, 3, 9],
        };
        let g = scan_beta2_delay(&small_narma(), &small_setup(), &grid, &[1, 2], 7, Parallelism::Auto).unwrap();
        let base = g.baseline_column().unwrap();
        assert!(base.iter().all(|&v| v == base[0]));
        assert!(g.surface.iter().flatten().all(|&v| g.best.metric <= v));
        assert_eq!(g.surface.len(), 3);
        assert_eq!(g.surface[0].len(), 3);
        let again = evaluate_cell(
            &small_narma(),
            &small_setup(),
            g.best.beta2,
            g.best.delay,
            &[1, 2],
            cell_seed(7, g.best.beta2_index, g.best.delay_index),
        )
        .unwrap();
        assert_eq!(again, g.best.metric);
    }

    #[test]
    fn scan_is_independent_of_parallelism() {
        let grid = ScanGrid {
            beta2: vec![0.0, 1.5],
            delays: vec![0, 1, 9],
        };
        let a = scan_beta2_delay(&small_narma(), &small_setup(), &grid, &[4], 0, Parallelism::Sequential).unwrap();
        let b = scan_beta2_delay(&small_narma(), &small_setup(), &grid, &[4], 0, Parallelism::Threads(3)).unwrap();
        assert_eq!(a.surface, b.surface);
        assert_eq!(a.best, b.best);
    }

    #[test]
    fn scan_validation() {
        let t = small_narma();
        let s = small_setup();
        let no_zero = ScanGrid {
            beta2: vec![1.0],
            delays: vec![0],
        };
        assert!(scan_beta2_delay(&t, &s, &no_zero, &[1], 0, Parallelism::Sequential).is_err());
        let empty = ScanGrid {
            beta2: vec![0.0],
            delays: vec![],
        };
        assert!(scan_beta2_delay(&t, &s, &empty, &[1], 0, Parallelism::Sequential).is_err());
        assert!(scan_beta2_delay(&t, &s, &ScanGrid::default(), &[], 0, Parallelism::Sequential).is_err());
    }

    #[test]
    fn argmin_ties_prefer_small_delay_then_small_beta2() {
        let s = vec![vec![2.0, 1.0, 1.0], vec![1.0, 1.0, 3.0]];
        assert_eq!(argmin_surface(&s), (0, 1));
        let s = vec![vec![f64::NAN, 5.0], vec![4.0, f64::NAN]];
        assert_eq!(argmin_surface(&s), (1, 0));
    }

    #[test]
    fn sweep_rejects_bad_grids() {
        let opts = SweepOptions {
            scan_grid: ScanGrid::default(),
            standard_grid: StandardGrid::default(),
            mask_seeds: vec![1],
            experiment_seed: 0,
            parallelism: Parallelism::Sequential,
        };
        let map = AttenuationMap::default();
        let base = ExperimentSetup::from_preset(&TaskPreset::table(PresetName::Narma10), &map).unwrap();
        let t = small_narma();
        assert!(sweep_attenuation(&t, &base, SweepMode::DelayedInput, &[], &map, &opts).is_err());
        let err = sweep_attenuation(&t, &base, SweepMode::StandardNoDelay, &[2.0, 40.0], &map, &opts).unwrap_err();
        assert!(matches!(err, Error::UnmappedAttenuation { .. }));
    }
}
