use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ClusterError;

/// Free parameters of a two-component 1-D mixture: two means, two variances, one weight.
pub const MIXTURE_PARAMS: usize = 5;
pub const SINGLE_GAUSSIAN_PARAMS: usize = 2;

const MIN_POINTS: usize = 4;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmOptions {
    pub max_iter: usize,
    /// Stop once an iteration improves the log-likelihood by less than this.
    pub tol: f64,
    pub var_floor: f64,
    /// Extra fits from random data points; the quantile start is always tried.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for GmmOptions {
    fn default() -> Self {
        GmmOptions {
            max_iter: 500,
            tol: 1e-8,
            var_floor: 1e-6,
            restarts: 0,
            seed: 0,
        }
    }
}

impl GmmOptions {
    pub fn seeded(seed: u64) -> Self {
        GmmOptions {
            seed,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureModel {
    pub weights: [f64; 2],
    pub means: [f64; 2],
    pub variances: [f64; 2],
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Data log-likelihood at the start and after every iteration.
    pub history: Vec<f64>,
}

impl MixtureModel {
    pub fn aic(&self) -> f64 {
        aic(self.loglik, MIXTURE_PARAMS)
    }

    /// Index of the component with the larger mean (0 when equal).
    pub fn upper(&self) -> usize {
        usize::from(self.means[1] > self.means[0])
    }

    fn log_joint(&self, x: f64) -> [f64; 2] {
        [0, 1].map(|k| self.weights[k].ln() + log_normal(x, self.means[k], self.variances[k]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub mean: f64,
    pub variance: f64,
    pub loglik: f64,
}

impl GaussianFit {
    pub fn aic(&self) -> f64 {
        aic(self.loglik, SINGLE_GAUSSIAN_PARAMS)
    }
}

/// `2k - 2 ln L`.
pub fn aic(loglik: f64, n_params: usize) -> f64 {
    2.0 * n_params as f64 - 2.0 * loglik
}

fn log_normal(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln() + d * d / var)
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn validate(scores: &[f64], needed: usize) -> Result<(), ClusterError> {
    if scores.len() < needed {
        return Err(ClusterError::InsufficientData {
            needed,
            got: scores.len(),
        });
    }
    if scores.iter().any(|x| !x.is_finite()) {
        return Err(ClusterError::NonFinite);
    }
    let (lo, hi) = scores
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
    if lo == hi {
        return Err(ClusterError::DegenerateData);
    }
    Ok(())
}

fn mean_var(scores: &[f64]) -> (f64, f64) {
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn data_loglik(scores: &[f64], m: &MixtureModel) -> f64 {
    scores
        .iter()
        .map(|&x| {
            let [a, b] = m.log_joint(x);
            log_sum_exp(a, b)
        })
        .sum()
}

fn run_em(scores: &[f64], init: MixtureModel, opts: &GmmOptions) -> MixtureModel {
    let n = scores.len() as f64;
    let mut m = init;
    m.loglik = data_loglik(scores, &m);
    m.history = vec![m.loglik];
    let mut resp = vec![0.0; scores.len()];
    for iter in 1..=opts.max_iter {
        // E step: responsibility of component 1
        for (r, &x) in resp.iter_mut().zip(scores) {
            let [a, b] = m.log_joint(x);
            *r = (b - log_sum_exp(a, b)).exp();
        }
        // M step
        let n1: f64 = resp.iter().sum();
        let n0 = n - n1;
        let mut next = m.clone();
        for (k, nk) in [(0, n0), (1, n1)] {
            let weight_of = |r: f64| if k == 1 { r } else { 1.0 - r };
            if nk <= f64::MIN_POSITIVE {
                next.weights[k] = f64::MIN_POSITIVE;
                continue;
            }
            let mean = scores.iter().zip(&resp).map(|(&x, &r)| weight_of(r) * x).sum::<f64>() / nk;
            let var = scores
                .iter()
                .zip(&resp)
                .map(|(&x, &r)| weight_of(r) * (x - mean).powi(2))
                .sum::<f64>()
                / nk;
            next.weights[k] = nk / n;
            next.means[k] = mean;
            next.variances[k] = var.max(opts.var_floor);
        }
        let total = next.weights[0] + next.weights[1];
        next.weights = next.weights.map(|w| w / total);
        next.loglik = data_loglik(scores, &next);
        next.iterations = iter;
        next.history.push(next.loglik);
        let gain = next.loglik - m.loglik;
        m = next;
        if gain < opts.tol {
            m.converged = true;
            break;
        }
    }
    m
}

fn start(means: [f64; 2], var: f64, floor: f64) -> MixtureModel {
    MixtureModel {
        weights: [0.5, 0.5],
        means,
        variances: [var.max(floor); 2],
        loglik: f64::NEG_INFINITY,
        iterations: 0,
        converged: false,
        history: Vec::new(),
    }
}

/// Fit a two-component mixture by EM.
///
/// Starts from means at the 25th and 75th percentiles (min and max if those
/// coincide), equal weights and the pooled variance. With `restarts > 0`,
/// further starts use pairs of data points drawn with `seed`; the highest
/// likelihood fit wins, earlier starts winning ties.
pub fn fit_gmm_em(scores: &[f64], opts: &GmmOptions) -> Result<MixtureModel, ClusterError> {
    validate(scores, MIN_POINTS)?;
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (_, pooled) = mean_var(scores);
    let (mut q1, mut q3) = (quantile(&sorted, 0.25), quantile(&sorted, 0.75));
    if q1 == q3 {
        (q1, q3) = (sorted[0], sorted[sorted.len() - 1]);
    }
    let mut best = run_em(scores, start([q1, q3], pooled, opts.var_floor), opts);
    if opts.restarts > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        for _ in 0..opts.restarts {
            let pick = sample(&mut rng, scores.len(), 2);
            let (a, b) = (scores[pick.index(0)], scores[pick.index(1)]);
            if a == b {
                continue;
            }
            let fit = run_em(scores, start([a.min(b), a.max(b)], pooled, opts.var_floor), opts);
            if fit.loglik > best.loglik {
                best = fit;
            }
        }
    }
    Ok(best)
}

/// Maximum-likelihood single Gaussian, for model comparison.
pub fn fit_single_gaussian(scores: &[f64]) -> Result<GaussianFit, ClusterError> {
    validate(scores, 2)?;
    let (mean, variance) = mean_var(scores);
    let loglik = scores.iter().map(|&x| log_normal(x, mean, variance)).sum();
    Ok(GaussianFit { mean, variance, loglik })
}

/// Label each score by its most probable component; the component with the
/// higher mean is the valid one and wins exact ties.
pub fn classify_by_mixture(scores: &[f64], model: &MixtureModel) -> Vec<bool> {
    let hi = model.upper();
    let lo = 1 - hi;
    scores
        .iter()
        .map(|&x| {
            let lj = model.log_joint(x);
            lj[hi] >= lj[lo]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_clusters_hit_the_floor() {
        let m = fit_gmm_em(&[0.0, 0.0, 10.0, 10.0], &GmmOptions::default()).unwrap();
        let mut means = m.means;
        means.sort_by(f64::total_cmp);
        assert!(means[0].abs() < 1e-9 && (means[1] - 10.0).abs() < 1e-9);
        assert_eq!(m.variances, [1e-6, 1e-6]);
        assert!((m.weights[0] - 0.5).abs() < 1e-9);
        assert!(m.converged);
    }

    #[test]
    fn data_errors() {
        let opts = GmmOptions::default();
        assert_eq!(
            fit_gmm_em(&[1.0, 2.0, 3.0], &opts),
            Err(ClusterError::InsufficientData { needed: 4, got: 3 })
        );
        assert_eq!(fit_gmm_em(&[2.0; 10], &opts), Err(ClusterError::DegenerateData));
        assert_eq!(
            fit_gmm_em(&[1.0, 2.0, f64::NAN, 3.0], &opts),
            Err(ClusterError::NonFinite)
        );
    }

    #[test]
    fn aic_formula() {
        assert_eq!(aic(0.0, 5), 10.0);
        assert_eq!(aic(-100.0, 5), 210.0);
    }

    #[test]
    fn skewed_data_still_splits() {
        let mut data = vec![0.0; 20];
        data.extend([5.0, 5.1, 4.9]);
        let m = fit_gmm_em(&data, &GmmOptions::default()).unwrap();
        assert!(m.means[m.upper()] > 4.0);
        assert!(m.means[1 - m.upper()] < 1.0);
    }

    #[test]
    fn tie_goes_to_higher_mean() {
        let m = MixtureModel {
            weights: [0.5, 0.5],
            means: [1.0, -1.0],
            variances: [1.0, 1.0],
            loglik: 0.0,
            iterations: 0,
            converged: true,
            history: vec![],
        };
        assert_eq!(classify_by_mixture(&[0.0, 0.5, -0.5], &m), [true, true, false]);
    }

    #[test]
    fn one_sided_posteriors() {
        let m = MixtureModel {
            weights: [0.999, 0.001],
            means: [0.0, 0.1],
            variances: [100.0, 1e-4],
            loglik: 0.0,
            iterations: 0,
            converged: true,
            history: vec![],
        };
        assert_eq!(classify_by_mixture(&[-30.0, 30.0, 5.0], &m), [false, false, false]);
    }

    #[test]
    fn restarts_are_deterministic() {
        let data: Vec<f64> = (0..40)
            .map(|i| ((i * 37) % 11) as f64 + if i % 3 == 0 { 20.0 } else { 0.0 })
            .collect();
        let opts = GmmOptions {
            restarts: 5,
            seed: 9,
            ..GmmOptions::default()
        };
        let a = fit_gmm_em(&data, &opts).unwrap();
        let b = fit_gmm_em(&data, &opts).unwrap();
        assert_eq!(a, b);
        let base = fit_gmm_em(&data, &GmmOptions::default()).unwrap();
        assert!(a.loglik >= base.loglik);
    }
}
