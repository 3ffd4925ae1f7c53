//! Exact Gaussian sampling of increment vectors, Monte Carlo replicas of
//! `V_n`, the Kolmogorov–Smirnov proxy, and the logarithmic (ASCLT) average
//! along a single path.
//!
//! Every replica draws from its own ChaCha stream `(seed, replica)`, so the
//! samples do not depend on batching or thread count.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::covariance::{CovarianceModel, IncrementCovariance, Perturbation, SizeCaps};
use crate::cumulants::{sigma_n_sq, sigma_sq_prefix};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_lower, gemm_strided};
use crate::sum::Neumaier;

/// Diagonal jitters tried in order, relative to `max Θ(i,i)`.
pub const JITTER_LADDER: [f64; 5] = [0.0, 1e-12, 1e-11, 1e-10, 1e-9];

/// Replicas sampled per matrix product.
const BATCH: usize = 256;

/// Rows of `L` per triangular block in the batched product.
const TRI_BLOCK: usize = 128;

/// Magic bytes of the raw sample file.
pub const RAW_MAGIC: [u8; 4] = *b"GQVS";

/// Lower Cholesky factor of `Θ + λI`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    n: usize,
    lower: Vec<f64>,
    jitter: f64,
    trace: f64,
}

impl CholeskyFactor {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Row-major lower-triangular factor.
    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    /// Absolute jitter `λ` that was added to the diagonal.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// `tr Θ` (without jitter).
    pub fn trace(&self) -> f64 {
        self.trace
    }

    /// `L z`.
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| self.lower[i * n..i * n + i + 1].iter().zip(z).map(|(l, z)| l * z).sum())
            .collect()
    }
}

/// Factors a row-major symmetric matrix, escalating the jitter as needed.
pub fn cholesky_dense(theta: &[f64], n: usize) -> Result<CholeskyFactor> {
    if theta.len() != n * n || n == 0 {
        return Err(Error::InvalidInput(format!("expected a non-empty {n}×{n} matrix")));
    }
    let scale = (0..n).map(|i| theta[i * n + i].abs()).fold(0.0, f64::max);
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let trace: f64 = (0..n).map(|i| theta[i * n + i]).sum();
    let mut last = (0, f64::NAN);
    for rel in JITTER_LADDER {
        let jitter = rel * scale;
        match cholesky_lower(theta, n, jitter) {
            Ok(lower) => return Ok(CholeskyFactor { n, lower, jitter, trace }),
            Err(fail) => last = fail,
        }
    }
    Err(Error::NotPsd { row: last.0, pivot: last.1 })
}

pub fn cholesky_factor(inc: &IncrementCovariance) -> Result<CholeskyFactor> {
    cholesky_dense(&inc.theta_dense(), inc.n())
}

fn replica_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `reps` draws of `V_n = (Σ x_k² − tr Θ)/σ_n` with `x = L z`.
pub fn sample_vn(factor: &CholeskyFactor, sigma_n: f64, reps: usize, seed: u64) -> Vec<f64> {
    let n = factor.n;
    let batches: Vec<Vec<f64>> = (0..reps.div_ceil(BATCH))
        .into_par_iter()
        .map(|b| {
            let first = b * BATCH;
            let width = BATCH.min(reps - first);
            // z is n × width, one column per replica.
            let mut z = vec![0.0; n * width];
            for c in 0..width {
                let mut rng = replica_rng(seed, (first + c) as u64);
                for k in 0..n {
                    z[k * width + c] = StandardNormal.sample(&mut rng);
                }
            }
            let mut sq = vec![Neumaier::new(); width];
            let mut x = vec![0.0; TRI_BLOCK * width];
            for r0 in (0..n).step_by(TRI_BLOCK) {
                let rows = TRI_BLOCK.min(n - r0);
                let inner = r0 + rows;
                gemm_strided(&factor.lower[r0 * n..], rows, inner, n, &z, width, &mut x);
                for row in x[..rows * width].chunks_exact(width) {
                    for (acc, v) in sq.iter_mut().zip(row) {
                        acc.add(v * v);
                    }
                }
            }
            sq.iter().map(|s| (s.value() - factor.trace) / sigma_n).collect()
        })
        .collect();
    batches.concat()
}

/// Monte Carlo run of `V_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRun {
    pub model: String,
    pub params: String,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub jitter: f64,
    #[serde(skip)]
    pub samples: Vec<f64>,
    pub ks_distance: f64,
    pub empirical_mean: f64,
    pub empirical_var: f64,
}

impl McRun {
    pub fn from_samples(model: &CovarianceModel, n: usize, seed: u64, jitter: f64, samples: Vec<f64>) -> Self {
        let (empirical_mean, empirical_var) = mean_var(&samples);
        Self {
            model: model.kind().label().to_string(),
            params: model.params(),
            n,
            reps: samples.len(),
            seed,
            jitter,
            ks_distance: ks_distance(&samples),
            empirical_mean,
            empirical_var,
            samples,
        }
    }

    /// Writes the raw samples: magic, then `n`, `reps`, `seed` as `u64`,
    /// then the samples, all little-endian.
    pub fn write_raw<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(&RAW_MAGIC)?;
        for v in [self.n as u64, self.reps as u64, self.seed] {
            w.write_all(&v.to_le_bytes())?;
        }
        for s in &self.samples {
            w.write_all(&s.to_le_bytes())?;
        }
        Ok(())
    }
}

/// Contents of a raw sample file.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSamples {
    pub n: u64,
    pub reps: u64,
    pub seed: u64,
    pub samples: Vec<f64>,
}

pub fn read_raw<R: Read>(mut r: R) -> Result<RawSamples> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != RAW_MAGIC {
        return Err(Error::Parse { line: 0, msg: "bad magic in raw sample file".into() });
    }
    let mut word = [0u8; 8];
    let mut next = |r: &mut R| -> Result<[u8; 8]> {
        r.read_exact(&mut word)?;
        Ok(word)
    };
    let n = u64::from_le_bytes(next(&mut r)?);
    let reps = u64::from_le_bytes(next(&mut r)?);
    let seed = u64::from_le_bytes(next(&mut r)?);
    let mut samples = Vec::with_capacity(reps as usize);
    for _ in 0..reps {
        samples.push(f64::from_le_bytes(next(&mut r)?));
    }
    Ok(RawSamples { n, reps, seed, samples })
}

/// Samples `reps` replicas of `V_n` for `model`.
pub fn simulate(model: &CovarianceModel, n: usize, reps: usize, seed: u64) -> Result<McRun> {
    simulate_with_caps(model, n, reps, seed, &SizeCaps::default())
}

pub fn simulate_with_caps(model: &CovarianceModel, n: usize, reps: usize, seed: u64, caps: &SizeCaps) -> Result<McRun> {
    if reps == 0 {
        return Err(Error::InvalidInput("reps must be at least 1".into()));
    }
    if n > caps.dense {
        return Err(Error::SizeCap { what: "Cholesky sampler", n, cap: caps.dense });
    }
    let inc = IncrementCovariance::with_caps(model, n, caps)?;
    let factor = cholesky_factor(&inc)?;
    let sigma = sigma_n_sq(&inc).sqrt();
    let samples = sample_vn(&factor, sigma, reps, seed);
    Ok(McRun::from_samples(model, n, seed, factor.jitter, samples))
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `sup_x |F_emp(x) − Φ(x)|`, checking both one-sided gaps at every sample.
pub fn ks_distance(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return f64::NAN;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let p = normal_cdf(x);
            ((i + 1) as f64 / m - p).max(p - i as f64 / m)
        })
        .fold(0.0, f64::max)
}

/// Sample mean and unbiased variance (zero variance for a single sample).
pub fn mean_var(samples: &[f64]) -> (f64, f64) {
    let m = samples.len();
    if m == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.iter().copied().collect::<Neumaier>().value() / m as f64;
    if m == 1 {
        return (mean, 0.0);
    }
    let ss = samples.iter().map(|x| (x - mean).powi(2)).collect::<Neumaier>().value();
    (mean, ss / (m - 1) as f64)
}

/// Test function for the logarithmic average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunction {
    /// `φ ≡ 1`.
    One,
    /// `φ(x) = 1(x ≤ 0)`.
    IndicatorLeZero,
    /// `φ(x) = cos x`.
    Cosine,
}

impl TestFunction {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            TestFunction::One => 1.0,
            TestFunction::IndicatorLeZero => {
                if x <= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::Cosine => x.cos(),
        }
    }

    /// `E φ(N)` for a standard normal `N`.
    pub fn target(self) -> f64 {
        match self {
            TestFunction::One => 1.0,
            TestFunction::IndicatorLeZero => 0.5,
            TestFunction::Cosine => (-0.5f64).exp(),
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            TestFunction::One => "one",
            TestFunction::IndicatorLeZero => "indicator_le_zero",
            TestFunction::Cosine => "cos",
        }
    }
}

impl std::str::FromStr for TestFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one" | "1" => Ok(TestFunction::One),
            "indicator_le_zero" | "indicator" | "le0" => Ok(TestFunction::IndicatorLeZero),
            "cos" | "cosine" => Ok(TestFunction::Cosine),
            other => Err(Error::InvalidInput(format!("unknown test function `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AscltResult {
    pub n: usize,
    pub seed: u64,
    pub phi_id: String,
    /// `(1/ln n) Σ_{k≤n} φ(V_k)/k`.
    pub log_average: f64,
    /// `(1/ln n) Σ_{k≤n} 1/k`.
    pub weight_sum: f64,
    pub target: f64,
}

/// One exact path of `n` increments.
///
/// Stationary models use the Durbin–Levinson recursion, which produces the
/// same `x = L z` as the Cholesky factor of the Toeplitz `Θ` in O(n²) time
/// and O(n) memory; other models factor `Θ` densely.
pub fn sample_path(inc: &IncrementCovariance, z: &[f64], caps: &SizeCaps) -> Result<Vec<f64>> {
    let n = inc.n();
    if z.len() != n {
        return Err(Error::InvalidInput(format!("need {n} normals, got {}", z.len())));
    }
    match inc.perturbation() {
        Perturbation::Zero => levinson_path(inc.rho_row(), z),
        _ => {
            if n > caps.dense {
                return Err(Error::SizeCap { what: "Cholesky sampler", n, cap: caps.dense });
            }
            Ok(cholesky_factor(inc)?.apply(z))
        }
    }
}

/// `x = L z` for the Toeplitz covariance with first row `acov`, via the
/// Durbin–Levinson innovations.
pub fn levinson_path(acov: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    let n = z.len();
    if acov.len() < n {
        return Err(Error::InvalidInput("autocovariance row too short".into()));
    }
    let mut x = Vec::with_capacity(n);
    if n == 0 {
        return Ok(x);
    }
    let mut v = acov[0];
    if !(v > 0.0) {
        return Err(Error::NotPsd { row: 0, pivot: v });
    }
    x.push(v.sqrt() * z[0]);
    let mut phi: Vec<f64> = Vec::with_capacity(n);
    let mut prev: Vec<f64> = Vec::with_capacity(n);
    for t in 1..n {
        // phi_{t,j}, j = 1..t, stored at index j − 1.
        let acc: f64 = (1..t).map(|j| phi[j - 1] * acov[t - j]).sum();
        let k = (acov[t] - acc) / v;
        prev.clone_from(&phi);
        for j in 1..t {
            phi[j - 1] = prev[j - 1] - k * prev[t - j - 1];
        }
        phi.push(k);
        v *= 1.0 - k * k;
        if !(v > 0.0) {
            return Err(Error::NotPsd { row: t, pivot: v });
        }
        let pred: f64 = (1..=t).map(|j| phi[j - 1] * x[t - j]).sum();
        x.push(pred + v.sqrt() * z[t]);
    }
    Ok(x)
}

/// Logarithmic average of `φ(V_k)`, `k = 1..n`, along one path.
pub fn asclt_average(model: &CovarianceModel, n: usize, phi: TestFunction, seed: u64) -> Result<AscltResult> {
    asclt_average_with_caps(model, n, phi, seed, &SizeCaps::default())
}

pub fn asclt_average_with_caps(
    model: &CovarianceModel,
    n: usize,
    phi: TestFunction,
    seed: u64,
    caps: &SizeCaps,
) -> Result<AscltResult> {
    if n < 2 {
        return Err(Error::InvalidInput("the logarithmic average needs n >= 2".into()));
    }
    let inc = IncrementCovariance::with_caps(model, n, caps)?;
    let mut rng = replica_rng(seed, 0);
    let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let x = sample_path(&inc, &z, caps)?;
    let sigma_sq = sigma_sq_prefix(&inc);
    Ok(log_average_from_path(&inc, &x, &sigma_sq, phi, seed))
}

/// The averaging step, separated so it can be checked on a fixed path.
pub fn log_average_from_path(
    inc: &IncrementCovariance,
    x: &[f64],
    sigma_sq: &[f64],
    phi: TestFunction,
    seed: u64,
) -> AscltResult {
    let n = x.len();
    let mut z = Neumaier::new();
    let mut avg = Neumaier::new();
    let mut weights = Neumaier::new();
    for k in 1..=n {
        let i = k - 1;
        z.add(x[i] * x[i] - inc.theta(i, i));
        let v = z.value() / sigma_sq[i].sqrt();
        avg.add(phi.eval(v) / k as f64);
        weights.add(1.0 / k as f64);
    }
    let ln = (n as f64).ln();
    AscltResult {
        n,
        seed,
        phi_id: phi.id().to_string(),
        log_average: avg.value() / ln,
        weight_sum: weights.value() / ln,
        target: phi.target(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use crate::linalg::reconstruction_error;

    #[test]
    fn identity_factor_is_identity() {
        let n = 5;
        let mut id = vec![0.0; n * n];
        for i in 0..n {
            id[i * n + i] = 1.0;
        }
        let f = cholesky_dense(&id, n).unwrap();
        assert_eq!(f.lower(), &id[..]);
        assert_eq!(f.jitter(), 0.0);
        assert_eq!(f.trace(), 5.0);
    }

    #[test]
    fn fbm_factor_reconstructs() {
        let inc = IncrementCovariance::new(&CovarianceModel::fbm(0.7).unwrap(), 4).unwrap();
        let f = cholesky_factor(&inc).unwrap();
        assert!(reconstruction_error(f.lower(), &inc.theta_dense(), 4) <= 1e-12);
        for m in [CovarianceModel::sub_fbm(0.3).unwrap(), CovarianceModel::gen_sub_fbm(0.45, 1.5).unwrap()] {
            let inc = IncrementCovariance::new(&m, 300).unwrap();
            let theta = inc.theta_dense();
            let f = cholesky_factor(&inc).unwrap();
            let max = theta.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            assert!(reconstruction_error(f.lower(), &theta, 300) <= 1e-8 * max);
        }
    }

    #[test]
    fn tiny_negative_eigenvalue_needs_jitter() {
        // Q diag(1, 1, −1e−12) Qᵀ with a Householder Q.
        let n = 3;
        let u = [1.0 / 3f64.sqrt(); 3];
        let q = |i: usize, j: usize| (if i == j { 1.0 } else { 0.0 }) - 2.0 * u[i] * u[j];
        let eig = [1.0, 1.0, -1e-12];
        let mut a = vec![0.0; 9];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = (0..n).map(|k| q(i, k) * eig[k] * q(j, k)).sum();
            }
        }
        for i in 0..n {
            for j in 0..i {
                a[i * n + j] = a[j * n + i];
            }
        }
        assert!(cholesky_lower(&a, n, 0.0).is_err());
        let f = cholesky_dense(&a, n).unwrap();
        assert!(f.jitter() >= 1e-12 && f.jitter() <= 1e-10, "jitter {}", f.jitter());

        let bad = [1.0, 2.0, 2.0, 1.0];
        assert!(matches!(cholesky_dense(&bad, 2), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn chi_square_variance() {
        let f = cholesky_dense(&[1.0], 1).unwrap();
        let s = sample_vn(&f, 2f64.sqrt(), 100_000, 7);
        let (mean, var) = mean_var(&s);
        assert!((var - 1.0).abs() < 0.03, "var {var}");
        assert!(mean.abs() < 5.0 / 100_000f64.sqrt());
    }

    #[test]
    fn samples_are_deterministic_and_batch_independent() {
        let m = CovarianceModel::fbm(0.6).unwrap();
        let a = simulate(&m, 200, 600, 42).unwrap();
        let b = simulate(&m, 200, 600, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.samples, b.samples);
        let c = simulate(&m, 200, 10, 42).unwrap();
        assert_eq!(&a.samples[..10], &c.samples[..]);
        let d = simulate(&m, 200, 600, 43).unwrap();
        assert_ne!(a.samples, d.samples);
    }

    #[test]
    fn batched_product_matches_direct_product() {
        let inc = IncrementCovariance::new(&CovarianceModel::sub_fbm(0.7).unwrap(), 300).unwrap();
        let f = cholesky_factor(&inc).unwrap();
        let sigma = sigma_n_sq(&inc).sqrt();
        let batched = sample_vn(&f, sigma, 3, 9);
        for (r, v) in batched.iter().enumerate() {
            let mut rng = replica_rng(9, r as u64);
            let z: Vec<f64> = (0..300).map(|_| StandardNormal.sample(&mut rng)).collect();
            let x = f.apply(&z);
            let direct = (x.iter().map(|v| v * v).sum::<f64>() - f.trace()) / sigma;
            assert_relative_eq!(*v, direct, epsilon = 1e-10);
        }
    }

    #[test]
    fn empirical_covariance_matches_theta() {
        let n = 8;
        let reps = 100_000;
        for m in [CovarianceModel::fbm(0.7).unwrap(), CovarianceModel::bi_fbm(0.8, 0.75).unwrap()] {
            let inc = IncrementCovariance::new(&m, n).unwrap();
            let f = cholesky_factor(&inc).unwrap();
            let mut acc = vec![0.0; n * n];
            for r in 0..reps {
                let mut rng = replica_rng(11, r as u64);
                let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                let x = f.apply(&z);
                for i in 0..n {
                    for j in 0..n {
                        acc[i * n + j] += x[i] * x[j];
                    }
                }
            }
            for i in 0..n {
                for j in 0..n {
                    let est = acc[i * n + j] / reps as f64;
                    let th = inc.theta(i, j);
                    let se = ((inc.theta(i, i) * inc.theta(j, j) + th * th) / reps as f64).sqrt();
                    assert!((est - th).abs() <= 5.0 * se, "{m} ({i},{j}): {est} vs {th}");
                }
            }
        }
    }

    #[test]
    fn ks_examples() {
        assert_eq!(ks_distance(&[0.0]), 0.5);
        let m = 1000;
        let normal = statrs::distribution::Normal::new(0.0, 1.0).unwrap();
        use statrs::distribution::ContinuousCDF;
        let q: Vec<f64> = (1..=m).map(|i| normal.inverse_cdf((i as f64 - 0.5) / m as f64)).collect();
        assert_relative_eq!(ks_distance(&q), 0.0005, max_relative = 1e-6);

        let mut rng = replica_rng(5, 0);
        let draws: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let d = ks_distance(&draws);
        assert!((0.0..0.01).contains(&d), "ks {d}");
    }

    #[test]
    fn raw_round_trip() {
        let m = CovarianceModel::fbm(0.6).unwrap();
        let run = simulate(&m, 16, 33, 3).unwrap();
        let mut buf = Vec::new();
        run.write_raw(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"GQVS");
        assert_eq!(buf.len(), 4 + 24 + 33 * 8);
        let raw = read_raw(&buf[..]).unwrap();
        assert_eq!((raw.n, raw.reps, raw.seed), (16, 33, 3));
        assert_eq!(raw.samples, run.samples);
        assert!(read_raw(&b"XXXX"[..]).is_err());
    }

    #[test]
    fn levinson_equals_cholesky() {
        for h in [0.2, 0.5, 0.7, 0.9] {
            let inc = IncrementCovariance::new(&CovarianceModel::fbm(h).unwrap(), 200).unwrap();
            let mut rng = replica_rng(1, 0);
            let z: Vec<f64> = (0..200).map(|_| StandardNormal.sample(&mut rng)).collect();
            let lev = levinson_path(inc.rho_row(), &z).unwrap();
            let chol = cholesky_factor(&inc).unwrap().apply(&z);
            for (a, b) in lev.iter().zip(&chol) {
                assert!((a - b).abs() <= 1e-9, "h={h}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn asclt_weights_and_small_case() {
        let m = CovarianceModel::fbm(0.6).unwrap();
        for n in [8usize, 100, 5000] {
            let r = asclt_average(&m, n, TestFunction::One, 1).unwrap();
            let harmonic: f64 = (1..=n).map(|k| 1.0 / k as f64).sum();
            assert_relative_eq!(r.log_average, harmonic / (n as f64).ln(), max_relative = 1e-14);
            assert_eq!(r.log_average, r.weight_sum);
            assert!(r.weight_sum >= 1.0 && r.weight_sum <= 1.0 + 1.0 / (n as f64).ln());
        }

        let inc = IncrementCovariance::new(&m, 2).unwrap();
        let x = [0.3, -1.2];
        let s = sigma_sq_prefix(&inc);
        let r = log_average_from_path(&inc, &x, &s, TestFunction::Cosine, 0);
        let v1 = (0.09 - inc.theta(0, 0)) / s[0].sqrt();
        let v2 = (0.09 + 1.44 - inc.theta(0, 0) - inc.theta(1, 1)) / s[1].sqrt();
        assert_relative_eq!(r.log_average, (v1.cos() + v2.cos() / 2.0) / 2f64.ln(), max_relative = 1e-14);
        assert!(asclt_average(&m, 1, TestFunction::One, 0).is_err());
    }

    #[test]
    fn asclt_is_deterministic() {
        let m = CovarianceModel::sub_fbm(0.6).unwrap();
        let a = asclt_average(&m, 300, TestFunction::IndicatorLeZero, 5).unwrap();
        let b = asclt_average(&m, 300, TestFunction::IndicatorLeZero, 5).unwrap();
        assert_eq!(a, b);
        assert!((0.0..=1.5).contains(&a.log_average));
    }
}
