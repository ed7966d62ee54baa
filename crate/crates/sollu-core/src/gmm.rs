//! Per-class diagonal-covariance Gaussian mixtures trained by EM, and
//! maximum-likelihood classification under uniform class priors.

use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureSequence;

/// Default component count per class mixture.
pub const DEFAULT_COMPONENTS: usize = 15;
/// Relative log-likelihood improvement below which EM stops.
pub const EM_REL_TOL: f64 = 1e-6;
/// Maximum EM iterations per class.
pub const EM_MAX_ITERS: usize = 200;
/// Variance floor as a fraction of the per-dimension data variance.
pub const VAR_FLOOR_SCALE: f64 = 1e-4;

const MODEL_VERSION: u32 = 1;

/// One diagonal-covariance Gaussian mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mixture {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
}

impl Mixture {
    pub fn components(&self) -> usize {
        self.weights.len()
    }

    /// log p(x | mixture) via log-sum-exp over components.
    pub fn log_likelihood(&self, x: &[f64]) -> f64 {
        let mut terms = Vec::with_capacity(self.components());
        for ((w, mu), var) in self.weights.iter().zip(&self.means).zip(&self.variances) {
            if *w <= 0.0 {
                continue;
            }
            terms.push(w.ln() + diag_log_pdf(x, mu, var));
        }
        log_sum_exp(&terms)
    }
}

fn diag_log_pdf(x: &[f64], mu: &[f64], var: &[f64]) -> f64 {
    let mut acc = -0.5 * x.len() as f64 * (2.0 * std::f64::consts::PI).ln();
    for ((xi, mi), vi) in x.iter().zip(mu).zip(var) {
        let d = xi - mi;
        acc -= 0.5 * (vi.ln() + d * d / vi);
    }
    acc
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return f64::NEG_INFINITY;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Trained per-class mixtures over a fixed feature dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub version: u32,
    pub dim: usize,
    pub components: usize,
    pub classes: BTreeMap<u8, Mixture>,
}

impl GmmModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<GmmModel> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("model parse: {e}")))
    }
}

/// Result of training: the model plus per-class log-likelihood traces
/// (one value per EM iteration) and any class-size warnings.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: GmmModel,
    pub traces: BTreeMap<u8, Vec<f64>>,
    pub warnings: Vec<String>,
}

/// Train one mixture per class with EM. Classes holding fewer vectors than
/// the requested component count get a reduced mixture and a warning.
pub fn em_train(
    data: &BTreeMap<u8, Vec<Vec<f64>>>,
    components: usize,
    seed: u64,
) -> Result<TrainOutcome> {
    for (&code, vectors) in data {
        if vectors.is_empty() {
            return Err(Error::EmptyClass(code));
        }
    }
    let dim = data
        .values()
        .next()
        .and_then(|v| v.first())
        .map(|v| v.len())
        .unwrap_or(0);

    let trained: Vec<(u8, Mixture, Vec<f64>, Option<String>)> = data
        .par_iter()
        .map(|(&code, vectors)| {
            let m = components.min(vectors.len());
            let warning = (m < components).then(|| {
                let msg = format!(
                    "class {code}: only {} vectors, reducing components {components} -> {m}",
                    vectors.len()
                );
                log::warn!("{msg}");
                msg
            });
            let class_seed = seed ^ (code as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let (mixture, trace) = train_class(vectors, m, class_seed);
            (code, mixture, trace, warning)
        })
        .collect();

    let mut classes = BTreeMap::new();
    let mut traces = BTreeMap::new();
    let mut warnings = Vec::new();
    for (code, mixture, trace, warning) in trained {
        classes.insert(code, mixture);
        traces.insert(code, trace);
        warnings.extend(warning);
    }
    Ok(TrainOutcome {
        model: GmmModel {
            version: MODEL_VERSION,
            dim,
            components,
            classes,
        },
        traces,
        warnings,
    })
}

fn train_class(vectors: &[Vec<f64>], m: usize, seed: u64) -> (Mixture, Vec<f64>) {
    let dim = vectors[0].len();
    let n = vectors.len();

    // Per-dimension variance floor from the class data.
    let floor: Vec<f64> = {
        let mut mean = vec![0.0; dim];
        for v in vectors {
            for (a, x) in mean.iter_mut().zip(v) {
                *a += x;
            }
        }
        for a in mean.iter_mut() {
            *a /= n as f64;
        }
        let mut var = vec![0.0; dim];
        for v in vectors {
            for ((a, x), mu) in var.iter_mut().zip(v).zip(&mean) {
                let d = x - mu;
                *a += d * d;
            }
        }
        var.iter()
            .map(|v| (VAR_FLOOR_SCALE * v / n as f64).max(1e-10))
            .collect()
    };

    let mut mixture = init_kmeans_pp(vectors, m, seed, &floor);
    let mut trace: Vec<f64> = Vec::new();
    let mut prev_ll = f64::NEG_INFINITY;

    for _ in 0..EM_MAX_ITERS {
        // E step: responsibilities in the log domain.
        let mut resp = vec![vec![0.0f64; m]; n];
        let mut total_ll = 0.0;
        for (i, x) in vectors.iter().enumerate() {
            let mut terms = Vec::with_capacity(m);
            for k in 0..m {
                let w = mixture.weights[k];
                let t = if w > 0.0 {
                    w.ln() + diag_log_pdf(x, &mixture.means[k], &mixture.variances[k])
                } else {
                    f64::NEG_INFINITY
                };
                terms.push(t);
            }
            let lse = log_sum_exp(&terms);
            total_ll += lse;
            for k in 0..m {
                resp[i][k] = (terms[k] - lse).exp();
            }
        }
        if let Some(&prev) = trace.last() {
            debug_assert!(
                total_ll >= prev - 1e-9 * prev.abs().max(1.0),
                "EM log-likelihood decreased: {prev} -> {total_ll}"
            );
        }
        trace.push(total_ll);

        let improvement = total_ll - prev_ll;
        if prev_ll.is_finite() && improvement.abs() <= EM_REL_TOL * prev_ll.abs().max(1.0) {
            break;
        }
        prev_ll = total_ll;

        // M step.
        for k in 0..m {
            let nk: f64 = resp.iter().map(|r| r[k]).sum();
            if nk <= 1e-12 {
                // Dead component; keep its parameters and zero its weight.
                mixture.weights[k] = 0.0;
                continue;
            }
            mixture.weights[k] = nk / n as f64;
            let mut mean = vec![0.0; dim];
            for (x, r) in vectors.iter().zip(&resp) {
                for (a, xi) in mean.iter_mut().zip(x) {
                    *a += r[k] * xi;
                }
            }
            for a in mean.iter_mut() {
                *a /= nk;
            }
            let mut var = vec![0.0; dim];
            for (x, r) in vectors.iter().zip(&resp) {
                for ((a, xi), mu) in var.iter_mut().zip(x).zip(&mean) {
                    let d = xi - mu;
                    *a += r[k] * d * d;
                }
            }
            for (a, f) in var.iter_mut().zip(&floor) {
                *a = (*a / nk).max(*f);
            }
            mixture.means[k] = mean;
            mixture.variances[k] = var;
        }
        let wsum: f64 = mixture.weights.iter().sum();
        for w in mixture.weights.iter_mut() {
            *w /= wsum;
        }
    }

    (mixture, trace)
}

/// k-means++ seeding: D^2-sampled centers, one hard assignment pass, and
/// per-cluster statistics as the starting mixture.
fn init_kmeans_pp(vectors: &[Vec<f64>], m: usize, seed: u64, floor: &[f64]) -> Mixture {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let n = vectors.len();
    let dim = vectors[0].len();

    let mut centers: Vec<usize> = vec![rng.gen_range(0..n)];
    let mut dist2: Vec<f64> = vectors
        .iter()
        .map(|v| sq_dist(v, &vectors[centers[0]]))
        .collect();
    while centers.len() < m {
        let total: f64 = dist2.iter().sum();
        let next = if total <= 0.0 {
            rng.gen_range(0..n)
        } else {
            WeightedIndex::new(&dist2).map(|d| d.sample(&mut rng)).unwrap_or_else(|_| rng.gen_range(0..n))
        };
        centers.push(next);
        for (d, v) in dist2.iter_mut().zip(vectors) {
            *d = d.min(sq_dist(v, &vectors[next]));
        }
    }

    let mut counts = vec![0usize; m];
    let mut means = vec![vec![0.0; dim]; m];
    let mut assignment = vec![0usize; n];
    for (i, v) in vectors.iter().enumerate() {
        let k = (0..m)
            .min_by(|&a, &b| {
                sq_dist(v, &vectors[centers[a]])
                    .partial_cmp(&sq_dist(v, &vectors[centers[b]]))
                    .unwrap()
            })
            .unwrap();
        assignment[i] = k;
        counts[k] += 1;
        for (a, xi) in means[k].iter_mut().zip(v) {
            *a += xi;
        }
    }
    for (mean, &c) in means.iter_mut().zip(&counts) {
        if c > 0 {
            for a in mean.iter_mut() {
                *a /= c as f64;
            }
        }
    }
    for (k, mean) in means.iter_mut().enumerate() {
        if counts[k] == 0 {
            *mean = vectors[centers[k]].clone();
        }
    }

    let mut variances = vec![floor.to_vec(); m];
    for (i, v) in vectors.iter().enumerate() {
        let k = assignment[i];
        for ((a, xi), mu) in variances[k].iter_mut().zip(v).zip(&means[k]) {
            let d = xi - mu;
            *a += d * d / counts[k].max(1) as f64;
        }
    }

    let weights: Vec<f64> = counts
        .iter()
        .map(|&c| (c.max(1)) as f64 / n as f64)
        .collect();
    let wsum: f64 = weights.iter().sum();
    Mixture {
        weights: weights.into_iter().map(|w| w / wsum).collect(),
        means,
        variances,
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Classify a slice's feature stream: the class maximizing the summed
/// per-frame log-likelihood wins (uniform priors cancel); ties break toward
/// the lowest class code.
pub fn classify(model: &GmmModel, features: &FeatureSequence) -> Result<(u8, f64)> {
    if features.is_empty() {
        return Err(Error::EmptySignature);
    }
    let mut best: Option<(u8, f64)> = None;
    for (&code, mixture) in &model.classes {
        let score: f64 = features
            .vectors
            .iter()
            .map(|v| mixture.log_likelihood(v.as_slice()))
            .sum();
        match best {
            Some((_, s)) if score <= s => {}
            _ => best = Some((code, score)),
        }
    }
    best.ok_or(Error::EmptyDictionary)
}
