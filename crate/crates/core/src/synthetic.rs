//! Synthetic utterance sets for exercising the classification protocol
//! without the audio corpora.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::readout::{Utterance, UtteranceDataset};
use crate::{Error, Result};

/// Each class has a fixed random prototype over the channels; utterances are
/// the prototype plus small uniform jitter. Classes are interleaved so that
/// contiguous folds stay balanced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrototypeParams {
    pub n_classes: usize,
    pub per_class: usize,
    pub channels: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Half-width of the uniform jitter added to each feature.
    pub noise: f64,
    pub seed: u64,
}

impl Default for PrototypeParams {
    fn default() -> Self {
        Self {
            n_classes: 3,
            per_class: 20,
            channels: 4,
            min_len: 15,
            max_len: 30,
            noise: 0.05,
            seed: 0,
        }
    }
}

pub fn prototype_utterances(p: &PrototypeParams) -> Result<UtteranceDataset> {
    if p.n_classes == 0 || p.per_class == 0 || p.channels == 0 {
        return Err(Error::InvalidParameter("class, utterance and channel counts must be positive".into()));
    }
    if p.min_len == 0 || p.min_len > p.max_len {
        return Err(Error::InvalidParameter(format!(
            "utterance length range [{}, {}] is invalid",
            p.min_len, p.max_len
        )));
    }
    if !(p.noise >= 0.0) {
        return Err(Error::InvalidParameter("noise must be >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let prototypes: Vec<Vec<f64>> = (0..p.n_classes)
        .map(|_| (0..p.channels).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    let mut utterances = Vec::with_capacity(p.n_classes * p.per_class);
    for i in 0..p.n_classes * p.per_class {
        let label = i % p.n_classes;
        let t = rng.random_range(p.min_len..=p.max_len);
        let mut data = Vec::with_capacity(t * p.channels);
        for _ in 0..t {
            for &v in &prototypes[label] {
                let jitter = if p.noise > 0.0 { rng.random_range(-p.noise..=p.noise) } else { 0.0 };
                data.push(v + jitter);
            }
        }
        utterances.push(Utterance {
            id: format!("proto-{i:04}"),
            label,
            features: Matrix::from_row_major(t, p.channels, data)?,
        });
    }
    UtteranceDataset::new(utterances, p.n_classes)
}

/// Two classes of ±1 sequences that only differ in how the current sample
/// relates to the one `lag` steps back: class 0 repeats it, class 1 negates
/// it. The marginal distribution of each sample is the same for both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LagContextParams {
    pub lag: usize,
    pub per_class: usize,
    pub length: usize,
    pub seed: u64,
}

impl Default for LagContextParams {
    fn default() -> Self {
        Self {
            lag: 5,
            per_class: 30,
            length: 40,
            seed: 0,
        }
    }
}

pub fn lag_context_utterances(p: &LagContextParams) -> Result<UtteranceDataset> {
    if p.lag == 0 || p.length <= 2 * p.lag || p.per_class == 0 {
        return Err(Error::InvalidParameter(format!(
            "lag context needs lag >= 1 and length > 2*lag (lag {}, length {})",
            p.lag, p.length
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut utterances = Vec::with_capacity(2 * p.per_class);
    for i in 0..2 * p.per_class {
        let label = i % 2;
        let sign = if label == 0 { 1.0 } else { -1.0 };
        let mut u = Vec::with_capacity(p.length);
        for n in 0..p.length {
            let v = if n < p.lag {
                if rng.random_bool(0.5) { 1.0 } else { -1.0 }
            } else {
                sign * u[n - p.lag]
            };
            u.push(v);
        }
        utterances.push(Utterance {
            id: format!("lag{}-{i:04}", p.lag),
            label,
            features: Matrix::column(&u),
        });
    }
    UtteranceDataset::new(utterances, 2)
}
