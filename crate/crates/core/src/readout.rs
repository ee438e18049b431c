//! Linear readout: ridge regression, one-vs-rest classification with
//! winner-takes-all voting, and the k-fold / random-resplit protocols.

use std::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{Cholesky, Matrix};
use crate::masking::InputSequence;
use crate::metrics::{error_rate, ErrorRate};
use crate::{Error, Result};

/// Output weights, `C_out × N` (plus one bias column when `fit_bias`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedReadout {
    pub weights: Matrix,
    pub ridge_lambda: f64,
    #[serde(default)]
    pub fit_bias: bool,
}

impl TrainedReadout {
    pub fn n_outputs(&self) -> usize {
        self.weights.rows()
    }

    /// Number of reservoir features expected by [`predict`].
    pub fn n_features(&self) -> usize {
        self.weights.cols() - usize::from(self.fit_bias)
    }

    pub fn predict_row(&self, x: &[f64], out: &mut [f64]) {
        for (o, w) in out.iter_mut().zip(self.weights.row_iter()) {
            let mut s: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
            if self.fit_bias {
                s += w[w.len() - 1];
            }
            *o = s;
        }
    }
}

/// Running sums `XᵀX` and `XᵀY` over selected rows.
#[derive(Debug, Clone)]
pub struct NormalEquations {
    n_features: usize,
    n_outputs: usize,
    fit_bias: bool,
    /// Upper triangle is authoritative.
    gram: Vec<f64>,
    xty: Vec<f64>,
    rows: usize,
    scratch: Vec<f64>,
}

impl NormalEquations {
    pub fn new(n_features: usize, n_outputs: usize, fit_bias: bool) -> Self {
        let p = n_features + usize::from(fit_bias);
        Self {
            n_features,
            n_outputs,
            fit_bias,
            gram: vec![0.0; p * p],
            xty: vec![0.0; p * n_outputs],
            rows: 0,
            scratch: Vec::with_capacity(p),
        }
    }

    fn width(&self) -> usize {
        self.n_features + usize::from(self.fit_bias)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn add_row(&mut self, x: &[f64], y: &[f64]) {
        debug_assert_eq!(x.len(), self.n_features);
        debug_assert_eq!(y.len(), self.n_outputs);
        let p = self.width();
        let m = self.n_outputs;
        let mut z = std::mem::take(&mut self.scratch);
        z.clear();
        z.extend_from_slice(x);
        if self.fit_bias {
            z.push(1.0);
        }
        for i in 0..p {
            let zi = z[i];
            if zi != 0.0 {
                let g = &mut self.gram[i * p + i..(i + 1) * p];
                for (gij, &zj) in g.iter_mut().zip(&z[i..]) {
                    *gij += zi * zj;
                }
                for (t, &yc) in self.xty[i * m..(i + 1) * m].iter_mut().zip(y) {
                    *t += zi * yc;
                }
            }
        }
        self.scratch = z;
        self.rows += 1;
    }

    pub fn add_rows(&mut self, states: &Matrix, targets: &Matrix, rows: Range<usize>) {
        for r in rows {
            self.add_row(states.row(r), targets.row(r));
        }
    }

    pub fn merge(&mut self, other: &NormalEquations) {
        assert_eq!(self.gram.len(), other.gram.len());
        assert_eq!(self.xty.len(), other.xty.len());
        for (a, b) in self.gram.iter_mut().zip(&other.gram) {
            *a += b;
        }
        for (a, b) in self.xty.iter_mut().zip(&other.xty) {
            *a += b;
        }
        self.rows += other.rows;
    }

    /// Solves `(XᵀX + λI)·Wᵀ = XᵀY` by Cholesky factorisation.
    pub fn solve(&self, ridge_lambda: f64) -> Result<TrainedReadout> {
        if !(ridge_lambda >= 0.0) || !ridge_lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "ridge_lambda must be finite and >= 0, got {ridge_lambda}"
            )));
        }
        let p = self.width();
        let mut a = Matrix::zeros(p, p);
        for i in 0..p {
            for j in i..p {
                let g = self.gram[i * p + j];
                a[(i, j)] = g;
                a[(j, i)] = g;
            }
            a[(i, i)] += ridge_lambda;
        }
        let chol = Cholesky::factor(&a).ok_or(Error::SingularSystem { lambda: ridge_lambda })?;
        let rhs = Matrix::from_row_major(p, self.n_outputs, self.xty.clone())?;
        let w_t = chol.solve(&rhs);
        let weights = w_t.transpose();
        if !weights.is_finite() {
            return Err(Error::SingularSystem { lambda: ridge_lambda });
        }
        Ok(TrainedReadout {
            weights,
            ridge_lambda,
            fit_bias: self.fit_bias,
        })
    }
}

fn check_rows(states: &Matrix, targets: &Matrix) -> Result<()> {
    if states.rows() != targets.rows() {
        return Err(Error::DimensionMismatch {
            context: "ridge training rows (states vs targets)",
            expected: states.rows(),
            got: targets.rows(),
        });
    }
    if states.rows() == 0 || states.cols() == 0 || targets.cols() == 0 {
        return Err(Error::EmptyInput("ridge training data"));
    }
    Ok(())
}

/// Ridge regression over every row of `states` (timesteps × N) and
/// `targets` (timesteps × C_out).
pub fn train_ridge(states: &Matrix, targets: &Matrix, ridge_lambda: f64) -> Result<TrainedReadout> {
    train_ridge_on(states, targets, 0..states.rows(), ridge_lambda, false)
}

/// Ridge regression restricted to a row range, optionally with a bias column.
pub fn train_ridge_on(
    states: &Matrix,
    targets: &Matrix,
    rows: Range<usize>,
    ridge_lambda: f64,
    fit_bias: bool,
) -> Result<TrainedReadout> {
    check_rows(states, targets)?;
    if rows.end > states.rows() || rows.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "training rows {rows:?} outside 0..{}",
            states.rows()
        )));
    }
    let mut ne = NormalEquations::new(states.cols(), targets.cols(), fit_bias);
    ne.add_rows(states, targets, rows);
    ne.solve(ridge_lambda)
}

/// `timesteps × C_out` outputs for each state row.
pub fn predict(readout: &TrainedReadout, states: &Matrix) -> Result<Matrix> {
    if states.cols() != readout.n_features() {
        return Err(Error::DimensionMismatch {
            context: "readout input width",
            expected: readout.n_features(),
            got: states.cols(),
        });
    }
    let mut out = Matrix::zeros(states.rows(), readout.n_outputs());
    for r in 0..states.rows() {
        readout.predict_row(states.row(r), out.row_mut(r));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub id: String,
    pub label: usize,
    /// `T × C` feature block.
    pub features: Matrix,
}

/// Labelled multichannel sequences, fed to the reservoir back to back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceDataset {
    pub utterances: Vec<Utterance>,
    pub n_classes: usize,
}

impl UtteranceDataset {
    pub fn new(utterances: Vec<Utterance>, n_classes: usize) -> Result<Self> {
        let ds = Self { utterances, n_classes };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let first = self.utterances.first().ok_or(Error::EmptyInput("utterance dataset"))?;
        if self.n_classes == 0 {
            return Err(Error::InvalidParameter("n_classes must be at least 1".into()));
        }
        let c = first.features.cols();
        if c == 0 {
            return Err(Error::EmptyInput("utterance channels"));
        }
        for u in &self.utterances {
            if u.label >= self.n_classes {
                return Err(Error::InvalidParameter(format!(
                    "utterance {:?} has label {} outside [0, {})",
                    u.id, u.label, self.n_classes
                )));
            }
            if u.features.rows() == 0 {
                return Err(Error::InvalidParameter(format!("utterance {:?} is empty", u.id)));
            }
            if u.features.cols() != c {
                return Err(Error::DimensionMismatch {
                    context: "utterance channel count",
                    expected: c,
                    got: u.features.cols(),
                });
            }
            if !u.features.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "utterance {:?} has non-finite features",
                    u.id
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.utterances.first().map_or(0, |u| u.features.cols())
    }

    pub fn labels(&self) -> Vec<usize> {
        self.utterances.iter().map(|u| u.label).collect()
    }

    /// Row span of each utterance in the concatenated stream.
    pub fn spans(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.utterances
            .iter()
            .map(|u| {
                let r = start..start + u.features.rows();
                start = r.end;
                r
            })
            .collect()
    }

    pub fn total_timesteps(&self) -> usize {
        self.utterances.iter().map(|u| u.features.rows()).sum()
    }

    /// All utterances stacked in order, without resets in between.
    pub fn concatenated_input(&self) -> Result<InputSequence> {
        let c = self.channels();
        let mut data = Vec::with_capacity(self.total_timesteps() * c);
        for u in &self.utterances {
            data.extend_from_slice(u.features.as_slice());
        }
        InputSequence::new(Matrix::from_row_major(self.total_timesteps(), c, data)?)
    }
}

/// One-vs-rest targets: +1 in the label column and −1 elsewhere, for every
/// timestep of the concatenated stream.
pub fn make_classification_targets(dataset: &UtteranceDataset, concatenated_length: usize) -> Result<Matrix> {
    if concatenated_length != dataset.total_timesteps() {
        return Err(Error::DimensionMismatch {
            context: "concatenated utterance length",
            expected: dataset.total_timesteps(),
            got: concatenated_length,
        });
    }
    let k = dataset.n_classes;
    let mut targets = Matrix::zeros(concatenated_length, k);
    for (u, span) in dataset.utterances.iter().zip(dataset.spans()) {
        if u.label >= k {
            return Err(Error::InvalidParameter(format!(
                "label {} outside [0, {k})",
                u.label
            )));
        }
        for r in span {
            let row = targets.row_mut(r);
            row.fill(-1.0);
            row[u.label] = 1.0;
        }
    }
    Ok(targets)
}

/// Index of the largest entry; ties go to the lowest index.
fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Per-timestep argmax votes, then majority over timesteps. Ties at either
/// stage go to the lowest class index.
pub fn winner_takes_all(scores: &Matrix) -> Result<usize> {
    if scores.rows() == 0 || scores.cols() == 0 {
        return Err(Error::EmptyInput("score matrix"));
    }
    let mut votes = vec![0usize; scores.cols()];
    for row in scores.row_iter() {
        votes[argmax(row)] += 1;
    }
    let mut best = 0;
    for (c, &v) in votes.iter().enumerate() {
        if v > votes[best] {
            best = c;
        }
    }
    Ok(best)
}

fn classify_span(readout: &TrainedReadout, states: &Matrix, span: Range<usize>) -> usize {
    let k = readout.n_outputs();
    let mut votes = vec![0usize; k];
    let mut out = vec![0.0; k];
    for r in span {
        readout.predict_row(states.row(r), &mut out);
        votes[argmax(&out)] += 1;
    }
    let mut best = 0;
    for (c, &v) in votes.iter().enumerate() {
        if v > votes[best] {
            best = c;
        }
    }
    best
}

/// Trains one-vs-rest classifiers on the `train` utterances and returns the
/// winner-takes-all error rate on the `test` utterances.
pub fn train_and_score(
    dataset: &UtteranceDataset,
    states: &Matrix,
    train: &[usize],
    test: &[usize],
    ridge_lambda: f64,
) -> Result<ErrorRate> {
    if test.is_empty() || train.is_empty() {
        return Err(Error::InvalidParameter("train and test sets must be non-empty".into()));
    }
    let spans = dataset.spans();
    let targets = make_classification_targets(dataset, states.rows())?;
    let mut ne = NormalEquations::new(states.cols(), dataset.n_classes, false);
    for &u in train {
        ne.add_rows(states, &targets, spans[u].clone());
    }
    let readout = ne.solve(ridge_lambda)?;
    score_utterances(dataset, states, &readout, test)
}

fn score_utterances(
    dataset: &UtteranceDataset,
    states: &Matrix,
    readout: &TrainedReadout,
    test: &[usize],
) -> Result<ErrorRate> {
    let spans = dataset.spans();
    let predicted: Vec<usize> = test
        .iter()
        .map(|&u| classify_span(readout, states, spans[u].clone()))
        .collect();
    let labels: Vec<usize> = test.iter().map(|&u| dataset.utterances[u].label).collect();
    error_rate(&predicted, &labels)
}

/// Contiguous, near-equal fold boundaries over `n` items.
pub fn fold_ranges(n: usize, k: usize) -> Result<Vec<Range<usize>>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k-fold needs k >= 2, got {k}")));
    }
    if k > n {
        return Err(Error::InvalidParameter(format!("cannot split {n} utterances into {k} folds")));
    }
    Ok((0..k).map(|f| f * n / k..(f + 1) * n / k).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub error_rates: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (0 for a single value).
    pub std_dev: f64,
}

impl FoldReport {
    fn from_rates(error_rates: Vec<f64>) -> Self {
        let n = error_rates.len() as f64;
        let mean = error_rates.iter().sum::<f64>() / n;
        let std_dev = if error_rates.len() > 1 {
            (error_rates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self {
            error_rates,
            mean,
            std_dev,
        }
    }
}

/// k-fold cross-validation over utterances in dataset order.
///
/// `states` are the reservoir states of the whole concatenated stream
/// (one row per timestep); they are shared by every fold.
pub fn kfold_evaluate(
    dataset: &UtteranceDataset,
    states: &Matrix,
    k: usize,
    ridge_lambda: f64,
) -> Result<FoldReport> {
    let folds = fold_ranges(dataset.len(), k)?;
    let targets = make_classification_targets(dataset, states.rows())?;
    let spans = dataset.spans();
    let per_fold: Vec<NormalEquations> = folds
        .iter()
        .map(|fold| {
            let mut ne = NormalEquations::new(states.cols(), dataset.n_classes, false);
            for u in fold.clone() {
                ne.add_rows(states, &targets, spans[u].clone());
            }
            ne
        })
        .collect();

    let mut rates = Vec::with_capacity(k);
    for (f, fold) in folds.iter().enumerate() {
        let mut ne = NormalEquations::new(states.cols(), dataset.n_classes, false);
        for (g, part) in per_fold.iter().enumerate() {
            if g != f {
                ne.merge(part);
            }
        }
        let readout = ne.solve(ridge_lambda)?;
        let test: Vec<usize> = fold.clone().collect();
        rates.push(score_utterances(dataset, states, &readout, &test)?.value);
    }
    Ok(FoldReport::from_rates(rates))
}

/// Repeated random train/test splits of the utterances; `train_count` are
/// drawn for training and the rest are tested.
pub fn random_resplit_evaluate(
    dataset: &UtteranceDataset,
    states: &Matrix,
    train_count: usize,
    repeats: usize,
    seed: u64,
    ridge_lambda: f64,
) -> Result<FoldReport> {
    let n = dataset.len();
    if train_count == 0 || train_count >= n {
        return Err(Error::InvalidParameter(format!(
            "train_count must be in 1..{n}, got {train_count}"
        )));
    }
    if repeats == 0 {
        return Err(Error::InvalidParameter("repeats must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rates = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let (train, test) = order.split_at(train_count);
        rates.push(train_and_score(dataset, states, train, test, ridge_lambda)?.value);
    }
    Ok(FoldReport::from_rates(rates))
}
