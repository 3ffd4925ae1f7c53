//! Exact cumulants of the quadratic variation and the structured ρ/γ sums
//! behind their asymptotics.
//!
//! With `Θ` the increment covariance,
//!
//! ```text
//! σ_n² = 2 Σ θ²,   κ₃(F_n) = 8/n^{3/2} Σ (Θ²)∘Θ,   κ₄(F_n) = 48/n² Σ (Θ²)∘(Θ²)
//! ```
//!
//! and the `V_n = Z_n/σ_n` versions follow by rescaling. Dense models pay
//! for one blocked matrix square. When `Γ ≡ 0`, `Θ` is Toeplitz and `Θ²` is
//! walked diagonal by diagonal with an O(1) update per entry, so the cost is
//! O(n²) and no n × n buffer is ever allocated.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::{rho, rho_row, CovarianceModel, IncrementCovariance, Perturbation, SizeCaps};
use crate::error::{Error, Result};
use crate::linalg::{hadamard_sum, matmul, square_hadamard_sums};
use crate::sum::{merge_ordered, Neumaier};

/// Largest `n` for which the stationary fast path is allowed.
pub const STATIONARY_CAP: usize = 1 << 17;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CumulantReport {
    pub n: usize,
    pub sigma_n_sq: f64,
    pub kappa3_f: f64,
    pub kappa4_f: f64,
    pub kappa3_v: f64,
    pub kappa4_v: f64,
    pub m_stat: f64,
}

impl CumulantReport {
    /// Assembles a report from `σ_n²` and the raw sums `S3 = Σ(Θ²)∘Θ`,
    /// `S4 = Σ(Θ²)∘(Θ²)`.
    pub fn from_sums(n: usize, sigma_n_sq: f64, s3: f64, s4: f64) -> Self {
        let nf = n as f64;
        let kappa3_f = 8.0 * s3 / nf.powf(1.5);
        let kappa4_f = 48.0 * s4 / (nf * nf);
        let sigma = sigma_n_sq.sqrt();
        let kappa3_v = 8.0 * s3 / (sigma * sigma_n_sq);
        let kappa4_v = 48.0 * s4 / (sigma_n_sq * sigma_n_sq);
        Self { n, sigma_n_sq, kappa3_f, kappa4_f, kappa3_v, kappa4_v, m_stat: kappa3_v.abs().max(kappa4_v) }
    }
}

/// `σ_n² = 2 Σ_{i,j} θ(i, j)²`.
pub fn sigma_n_sq(inc: &IncrementCovariance) -> f64 {
    let n = inc.n();
    match inc.perturbation() {
        Perturbation::Zero => 2.0 * lag_weighted_sq_sum(inc.rho_row(), n),
        _ => {
            let rows: Vec<Neumaier> = (0..n)
                .into_par_iter()
                .map(|i| (0..n).map(|j| inc.theta(i, j).powi(2)).collect())
                .collect();
            2.0 * merge_ordered(&rows)
        }
    }
}

/// `Σ_{i,j<n} ρ(i − j)² = n ρ(0)² + 2 Σ_{r≥1} (n − r) ρ(r)²`.
fn lag_weighted_sq_sum(rho: &[f64], n: usize) -> f64 {
    let mut acc = Neumaier::new();
    acc.add(n as f64 * rho[0] * rho[0]);
    for (r, v) in rho.iter().enumerate().take(n).skip(1) {
        acc.add(2.0 * (n - r) as f64 * v * v);
    }
    acc.value()
}

/// `Σ_{i,j<n} ρ_h(i − j)²` in O(n).
pub fn rho_sq_lag_sum(h: f64, n: usize) -> f64 {
    lag_weighted_sq_sum(&rho_row(h, n), n)
}

/// `(S3, S4)` for `Θ`, dispatching on its structure.
pub fn third_fourth_sums(inc: &IncrementCovariance, caps: &SizeCaps) -> Result<(f64, f64)> {
    let n = inc.n();
    match inc.perturbation() {
        Perturbation::Zero => {
            if n > STATIONARY_CAP {
                return Err(Error::SizeCap { what: "stationary cumulant sums", n, cap: STATIONARY_CAP });
            }
            let mut rho = inc.rho_row().to_vec();
            rho.push(rho_at_n(inc));
            Ok(toeplitz_square_sums(&rho, n))
        }
        _ => {
            if n > caps.dense {
                return Err(Error::SizeCap { what: "dense cumulant sums", n, cap: caps.dense });
            }
            Ok(square_hadamard_sums(&inc.theta_dense(), n))
        }
    }
}

fn rho_at_n(inc: &IncrementCovariance) -> f64 {
    rho(inc.hurst(), inc.n() as i64)
}

/// `κ₃(F_n)`.
pub fn kappa3(inc: &IncrementCovariance) -> Result<f64> {
    let (s3, _) = third_fourth_sums(inc, &SizeCaps::default())?;
    Ok(8.0 * s3 / (inc.n() as f64).powf(1.5))
}

/// `κ₄(F_n)`.
pub fn kappa4(inc: &IncrementCovariance) -> Result<f64> {
    let (_, s4) = third_fourth_sums(inc, &SizeCaps::default())?;
    Ok(48.0 * s4 / (inc.n() as f64).powi(2))
}

pub fn report_for(inc: &IncrementCovariance, caps: &SizeCaps) -> Result<CumulantReport> {
    let (s3, s4) = third_fourth_sums(inc, caps)?;
    Ok(CumulantReport::from_sums(inc.n(), sigma_n_sq(inc), s3, s4))
}

pub fn report(model: &CovarianceModel, n: usize) -> Result<CumulantReport> {
    report_with_caps(model, n, &SizeCaps::default())
}

pub fn report_with_caps(model: &CovarianceModel, n: usize, caps: &SizeCaps) -> Result<CumulantReport> {
    let caps = if model.is_stationary() {
        SizeCaps { structured: caps.structured.max(STATIONARY_CAP), ..*caps }
    } else {
        *caps
    };
    let inc = IncrementCovariance::with_caps(model, n, &caps)?;
    report_for(&inc, &caps)
}

/// `(Σ (T²)∘T, Σ (T²)∘(T²))` for the symmetric Toeplitz `T` with first row
/// `rho[0..n]`; `rho` must also carry `rho[n]`.
///
/// `P = T²` is walked along each diagonal `k = i + d` using
/// `P[i+1][k+1] = P[i][k] + ρ(i+1)ρ(k+1) − ρ(n−1−i)ρ(n−1−k)`, with the head
/// `P[0][d]` summed directly.
pub fn toeplitz_square_sums(rho: &[f64], n: usize) -> (f64, f64) {
    assert!(rho.len() > n, "need ρ(0..=n)");
    if n == 0 {
        return (0.0, 0.0);
    }
    let rho = &rho[..=n];
    let parts: Vec<(Neumaier, Neumaier)> = (0..n)
        .into_par_iter()
        .with_min_len(16)
        .map(|d| {
            let mut p: Neumaier = (0..n).map(|j| rho[j] * rho[j.abs_diff(d)]).collect();
            let mult = if d == 0 { 1.0 } else { 2.0 };
            let mut s3 = Neumaier::new();
            let mut s4 = Neumaier::new();
            let rd = rho[d];
            for i in 0..n - d {
                let v = p.value();
                s3.add(mult * v * rd);
                s4.add(mult * v * v);
                if i + 1 < n - d {
                    let k = i + d;
                    p.add(rho[i + 1] * rho[k + 1]);
                    p.add(-rho[n - 1 - i] * rho[n - 1 - k]);
                }
            }
            (s3, s4)
        })
        .collect();
    (merge_ordered(parts.iter().map(|p| &p.0)), merge_ordered(parts.iter().map(|p| &p.1)))
}

/// `Σ_{j,k,l<n} ρ(j−k)ρ(k−l)ρ(j−l)` by lag counting: the pair of lags
/// `(a, b) = (j − k, k − l)` is realized by `n − span` triples, where `span`
/// is the spread of `{0, b, a + b}`.
pub fn rho_triple_sum(h: f64, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let ni = n as i64;
    let row: Vec<f64> = (0..2 * n).map(|r| rho(h, r as i64)).collect();
    let at = |r: i64| row[r.unsigned_abs() as usize];
    let parts: Vec<Neumaier> = (0..2 * n - 1)
        .into_par_iter()
        .with_min_len(16)
        .map(|ai| {
            let a = ai as i64 + 1 - ni;
            let mut acc = Neumaier::new();
            for b in 1 - ni..ni {
                let c = a + b;
                let span = 0.max(b).max(c) - 0.min(b).min(c);
                if span < ni {
                    acc.add((ni - span) as f64 * at(a) * at(b) * at(c));
                }
            }
            acc
        })
        .collect();
    merge_ordered(&parts)
}

/// Cyclic `Σ_{i,j,k,l<n} ρ(i−j)ρ(i−k)ρ(k−l)ρ(j−l) = ‖T²‖_F²`.
pub fn rho_quad_sum(h: f64, n: usize) -> f64 {
    toeplitz_square_sums(&rho_row(h, n + 1), n).1
}

/// `2 Σ_{r∈ℤ} ρ(r)²` truncated at `|r| ≤ r_max`, plus a tail estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesEstimate {
    /// Partial sum plus tail estimate.
    pub value: f64,
    pub partial: f64,
    pub tail_estimate: f64,
    /// Upper bound on the neglected tail.
    pub truncation_bound: f64,
}

pub fn sigma_sq_series(h: f64, r_max: usize) -> Result<SeriesEstimate> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::Domain(format!("H = {h} must lie in (0, 1)")));
    }
    if h >= 0.75 {
        return Err(Error::DivergentSeries(h));
    }
    let mut acc = Neumaier::new();
    acc.add(1.0);
    for r in 1..=r_max {
        acc.add(2.0 * rho(h, r as i64).powi(2));
    }
    let partial = 2.0 * acc.value();
    // 2 Σ_{|r| > r_max} c² r^{4h−4} ≤ 4c² ∫_{r_max}^∞ x^{4h−4} dx.
    let tail = |c: f64| 4.0 * c * c * (r_max as f64).powf(4.0 * h - 3.0) / (3.0 - 4.0 * h);
    let c = h * (2.0 * h - 1.0).abs();
    let tail_estimate = tail(c);
    Ok(SeriesEstimate {
        value: partial + tail_estimate,
        partial,
        tail_estimate,
        truncation_bound: tail(1.1 * c),
    })
}

/// The seven mixed sums with at least one `γ` factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedSums {
    pub n: usize,
    /// `Σγγγ`, `Σγγρ`, `Σγρρ` along the triangle `(j,k),(k,l),(j,l)`.
    pub triple: [f64; 3],
    /// `Σγγγγ`, `Σγγγρ`, `Σγγρρ`, `Σγρρρ` along the cycle
    /// `(i,j),(i,k),(k,l),(j,l)`; present when `n` is within the quadruple cap.
    pub quadruple: Option<[f64; 4]>,
}

/// Caps for [`mixed_sums`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixedCaps {
    pub triple: usize,
    pub quadruple: usize,
}

impl Default for MixedCaps {
    fn default() -> Self {
        Self { triple: 1024, quadruple: 256 }
    }
}

/// Mixed sums as Hadamard reductions of matrix products: e.g.
/// `Σ γ(j,k)γ(k,l)ρ(j−l) = Σ (ΓΓ)∘T` and
/// `Σ γ(i,j)γ(i,k)ρ(k−l)ρ(j−l) = tr(ΓΓTT) = Σ (ΓΓT)∘T`.
pub fn mixed_sums(inc: &IncrementCovariance, caps: &MixedCaps) -> Result<MixedSums> {
    let n = inc.n();
    if n > caps.triple {
        return Err(Error::SizeCap { what: "mixed triple sums", n, cap: caps.triple });
    }
    if inc.is_stationary() {
        let quadruple = (n <= caps.quadruple).then_some([0.0; 4]);
        return Ok(MixedSums { n, triple: [0.0; 3], quadruple });
    }
    let g = inc.gamma_dense();
    let t = inc.toeplitz_dense();
    let gg = matmul(&g, &g, n);
    let gt = matmul(&g, &t, n);
    let triple = [hadamard_sum(&gg, &g), hadamard_sum(&gg, &t), hadamard_sum(&gt, &t)];
    let quadruple = if n <= caps.quadruple {
        let ggg = matmul(&gg, &g, n);
        let ggt = matmul(&gg, &t, n);
        let gtt = matmul(&gt, &t, n);
        Some([
            hadamard_sum(&ggg, &g),
            hadamard_sum(&ggg, &t),
            hadamard_sum(&ggt, &t),
            hadamard_sum(&gtt, &t),
        ])
    } else {
        None
    };
    Ok(MixedSums { n, triple, quadruple })
}

/// One row of [`mixed_sum_bounds`]: absolute sums over their envelopes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeRow {
    pub n: usize,
    pub sums: MixedSums,
    pub triple_ratio: [f64; 3],
    pub quadruple_ratio: Option<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub rows: Vec<EnvelopeRow>,
    /// Every ratio stays within twice its value at the first `n`.
    pub pass: bool,
}

/// Mixed sums over a sequence of `n`, divided by `n^{(6H−3)∨0}` (triple) and
/// `n^{(8H−4)∨0}` (quadruple).
pub fn mixed_sum_bounds(model: &CovarianceModel, n_list: &[usize], caps: &MixedCaps) -> Result<EnvelopeReport> {
    let h = model.hurst();
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let inc = IncrementCovariance::new(model, n)?;
        let sums = mixed_sums(&inc, caps)?;
        let nf = n as f64;
        let e3 = nf.powf((6.0 * h - 3.0).max(0.0));
        let e4 = nf.powf((8.0 * h - 4.0).max(0.0));
        rows.push(EnvelopeRow {
            n,
            sums,
            triple_ratio: sums.triple.map(|v| v.abs() / e3),
            quadruple_ratio: sums.quadruple.map(|q| q.map(|v| v.abs() / e4)),
        });
    }
    let pass = match rows.first() {
        None => true,
        Some(first) => rows.iter().all(|row| {
            let t_ok = row.triple_ratio.iter().zip(&first.triple_ratio).all(|(r, f)| *r <= 2.0 * f);
            let q_ok = match (&row.quadruple_ratio, &first.quadruple_ratio) {
                (Some(q), Some(f)) => q.iter().zip(f).all(|(r, f)| *r <= 2.0 * f),
                _ => true,
            };
            t_ok && q_ok
        }),
    };
    Ok(EnvelopeReport { rows, pass })
}

/// `σ_k²` for `k = 1..=n` from
/// `σ_k² = σ_{k−1}² + 2θ(k−1,k−1)² + 4 Σ_{i<k−1} θ(i,k−1)²`.
pub fn sigma_sq_prefix(inc: &IncrementCovariance) -> Vec<f64> {
    let n = inc.n();
    let mut out = Vec::with_capacity(n);
    let mut acc = Neumaier::new();
    match inc.perturbation() {
        Perturbation::Zero => {
            let rho = inc.rho_row();
            let mut lag_sq = Neumaier::new();
            for k in 1..=n {
                if k >= 2 {
                    lag_sq.add(rho[k - 1] * rho[k - 1]);
                }
                acc.add(2.0 * rho[0] * rho[0]);
                acc.add(4.0 * lag_sq.value());
                out.push(acc.value());
            }
        }
        _ => {
            let cross: Vec<f64> = (0..n)
                .into_par_iter()
                .map(|c| (0..c).map(|i| inc.theta(i, c).powi(2)).collect::<Neumaier>().value())
                .collect();
            for (c, x) in cross.iter().enumerate() {
                acc.add(2.0 * inc.theta(c, c).powi(2));
                acc.add(4.0 * x);
                out.push(acc.value());
            }
        }
    }
    out
}

/// `(Σ_{i<k, j<l} θ(i,j)² / (σ_k σ_l),  √(k/l) + (kl)^{(2H−1)∨0 − ½})`.
pub fn asclt_condition2_bound(model: &CovarianceModel, k: usize, l: usize) -> Result<(f64, f64)> {
    if k == 0 || k >= l {
        return Err(Error::Ordering { k, l });
    }
    let inc = IncrementCovariance::new(model, l)?;
    let sigma = sigma_sq_prefix(&inc);
    let cross: Neumaier = (0..k).flat_map(|i| (0..l).map(move |j| (i, j))).map(|(i, j)| inc.theta(i, j).powi(2)).collect();
    let lhs = cross.value() / (sigma[k - 1] * sigma[l - 1]).sqrt();
    let h = model.hurst();
    let (kf, lf) = (k as f64, l as f64);
    let shape = (kf / lf).sqrt() + (kf * lf).powf((2.0 * h - 1.0).max(0.0) - 0.5);
    Ok((lhs, shape))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn brute_s3(theta: &[f64], n: usize) -> f64 {
        let mut acc = Neumaier::new();
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    acc.add(theta[j * n + k] * theta[k * n + l] * theta[j * n + l]);
                }
            }
        }
        acc.value()
    }

    fn brute_s4(theta: &[f64], n: usize) -> f64 {
        let mut acc = Neumaier::new();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        acc.add(theta[i * n + j] * theta[j * n + k] * theta[k * n + l] * theta[l * n + i]);
                    }
                }
            }
        }
        acc.value()
    }

    fn rho_brute(h: f64, n: usize) -> Vec<f64> {
        let mut t = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                t[i * n + j] = rho(h, i as i64 - j as i64);
            }
        }
        t
    }

    #[test]
    fn identity_examples() {
        let bm = CovarianceModel::fbm(0.5).unwrap();
        let inc = IncrementCovariance::new(&bm, 10).unwrap();
        assert_eq!(sigma_n_sq(&inc), 20.0);
        let sub = CovarianceModel::sub_fbm(0.5).unwrap();
        assert_eq!(sigma_n_sq(&IncrementCovariance::new(&sub, 7).unwrap()), 14.0);

        let inc = IncrementCovariance::new(&bm, 4).unwrap();
        assert_relative_eq!(kappa3(&inc).unwrap(), 4.0, max_relative = 1e-15);
        assert_relative_eq!(kappa4(&inc).unwrap(), 12.0, max_relative = 1e-15);

        let r = report(&bm, 100).unwrap();
        assert_eq!(r.sigma_n_sq, 200.0);
        assert_relative_eq!(r.kappa3_v, 800.0 / 200f64.powf(1.5), max_relative = 1e-14);
        assert_relative_eq!(r.kappa3_v, 0.28284271247461906, max_relative = 1e-14);
        assert_relative_eq!(r.kappa4_v, 0.12, max_relative = 1e-14);
        assert_eq!(r.m_stat, r.kappa3_v.abs().max(r.kappa4_v));
    }

    #[test]
    fn single_increment() {
        for m in [
            CovarianceModel::fbm(0.3).unwrap(),
            CovarianceModel::sub_fbm(0.7).unwrap(),
            CovarianceModel::gen_sub_fbm(0.45, 1.5).unwrap(),
        ] {
            let inc = IncrementCovariance::new(&m, 1).unwrap();
            let t = inc.theta(0, 0);
            assert_relative_eq!(kappa3(&inc).unwrap(), 8.0 * t.powi(3), max_relative = 1e-14);
            let r = report(&m, 1).unwrap();
            assert_relative_eq!(r.kappa4_v, 12.0, max_relative = 1e-14);
            assert_relative_eq!(r.kappa3_v, 8.0 / 8f64.sqrt(), max_relative = 1e-14);
        }
    }

    #[test]
    fn fbm_reports_match_brute_force() {
        for (h, n) in [(0.6, 4), (0.6, 16), (0.7, 16), (0.6, 32), (0.3, 33)] {
            let m = CovarianceModel::fbm(h).unwrap();
            let inc = IncrementCovariance::new(&m, n).unwrap();
            let theta = inc.theta_dense();
            let sig: f64 = 2.0 * theta.iter().map(|v| v * v).collect::<Neumaier>().value();
            let r = report(&m, n).unwrap();
            assert_relative_eq!(r.sigma_n_sq, sig, max_relative = 1e-14);
            let k3 = 8.0 * brute_s3(&theta, n) / (n as f64).powf(1.5);
            let k4 = 48.0 * brute_s4(&theta, n) / (n as f64).powi(2);
            assert_relative_eq!(r.kappa3_f, k3, max_relative = 1e-12);
            assert_relative_eq!(r.kappa4_f, k4, max_relative = 1e-12);
        }
    }

    #[test]
    fn stationary_fast_path_matches_dense_path() {
        for h in [0.2, 0.5, 0.55, 0.7, 0.9] {
            for n in [1, 2, 3, 63, 64, 65, 200] {
                let inc = IncrementCovariance::new(&CovarianceModel::fbm(h).unwrap(), n).unwrap();
                let fast = third_fourth_sums(&inc, &SizeCaps::default()).unwrap();
                let dense = square_hadamard_sums(&inc.theta_dense(), n);
                assert_relative_eq!(fast.0, dense.0, max_relative = 1e-12);
                assert_relative_eq!(fast.1, dense.1, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn rho_sums_match_brute_force() {
        for (h, n) in [(0.5, 20), (0.7, 64), (0.65, 32), (0.3, 48), (0.8, 17)] {
            let t = rho_brute(h, n);
            assert_relative_eq!(rho_triple_sum(h, n), brute_s3(&t, n), max_relative = 1e-12);
            if n <= 32 {
                assert_relative_eq!(rho_quad_sum(h, n), brute_s4(&t, n), max_relative = 1e-12);
            } else {
                let dense = square_hadamard_sums(&t, n).1;
                assert_relative_eq!(rho_quad_sum(h, n), dense, max_relative = 1e-12);
            }
        }
        assert_eq!(rho_triple_sum(0.5, 77), 77.0);
        assert_eq!(rho_quad_sum(0.5, 77), 77.0);
    }

    #[test]
    fn triple_sum_linear_below_two_thirds() {
        let v: Vec<f64> = [1 << 10, 1 << 11, 1 << 12].iter().map(|&n| rho_triple_sum(0.6, n)).collect();
        for w in v.windows(2) {
            let r = w[1] / w[0];
            assert!((r - 2.0).abs() < 0.05, "ratio {r}");
        }
    }

    #[test]
    fn quad_sum_growth_above_five_eighths() {
        let ns = [1usize << 9, 1 << 10, 1 << 11, 1 << 12];
        let v: Vec<f64> = ns.iter().map(|&n| rho_quad_sum(0.7, n)).collect();
        let slope = (v[3] / v[2]).log2();
        assert!((slope - 1.6).abs() < 0.1, "slope {slope}");
    }

    #[test]
    fn sigma_series_examples() {
        let e = sigma_sq_series(0.5, 1000).unwrap();
        assert_eq!(e.value, 2.0);
        assert!(matches!(sigma_sq_series(0.75, 10), Err(Error::DivergentSeries(_))));
        assert!(matches!(sigma_sq_series(0.8, 10), Err(Error::DivergentSeries(_))));

        let e = sigma_sq_series(0.6, 1_000_000).unwrap();
        assert!(e.value.is_finite() && e.value > 2.0);
        // The tail shrinks like r_max^{4h−3}; at h = 0.6 and r_max = 10⁶ that
        // is about 1.3e-5 of the total.
        assert!(e.truncation_bound / e.value < 2e-5);
        assert!(e.tail_estimate < e.truncation_bound);
        let coarse = sigma_sq_series(0.6, 100_000).unwrap();
        assert!((coarse.value - e.value).abs() < coarse.truncation_bound);
    }

    #[test]
    fn sigma_over_n_converges() {
        for m in [
            CovarianceModel::fbm(0.3).unwrap(),
            CovarianceModel::fbm(0.6).unwrap(),
            CovarianceModel::sub_fbm(0.3).unwrap(),
            CovarianceModel::sub_fbm(0.6).unwrap(),
        ] {
            let limit = sigma_sq_series(m.hurst(), 1_000_000).unwrap().value;
            let errs: Vec<f64> = [256, 512, 1024, 2048]
                .iter()
                .map(|&n| {
                    let inc = IncrementCovariance::new(&m, n).unwrap();
                    (sigma_n_sq(&inc) / n as f64 - limit).abs()
                })
                .collect();
            assert!(errs.windows(2).all(|w| w[1] < w[0]), "{m}: {errs:?}");
        }
    }

    #[test]
    fn sigma_prefix_matches_direct() {
        for m in [CovarianceModel::fbm(0.7).unwrap(), CovarianceModel::bi_fbm(0.8, 0.75).unwrap()] {
            let inc = IncrementCovariance::new(&m, 40).unwrap();
            let prefix = sigma_sq_prefix(&inc);
            for k in [1, 2, 17, 40] {
                let sub = IncrementCovariance::new(&m, k).unwrap();
                assert_relative_eq!(prefix[k - 1], sigma_n_sq(&sub), max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn scaling_leaves_normalized_cumulants_unchanged() {
        let m = CovarianceModel::sub_fbm(0.6).unwrap();
        let inc = IncrementCovariance::new(&m, 48).unwrap();
        let base = report_for(&inc, &SizeCaps::default()).unwrap();
        for c in [0.5f64, 2.0] {
            let scaled = report_for(&inc.scaled(c * c), &SizeCaps::default()).unwrap();
            assert_relative_eq!(scaled.kappa3_v, base.kappa3_v, max_relative = 1e-12);
            assert_relative_eq!(scaled.kappa4_v, base.kappa4_v, max_relative = 1e-12);
        }
    }

    #[test]
    fn mixed_sums_match_brute_force() {
        for m in [
            CovarianceModel::sub_fbm(0.6).unwrap(),
            CovarianceModel::sub_fbm(0.3).unwrap(),
            CovarianceModel::bi_fbm(0.8, 0.75).unwrap(),
            CovarianceModel::gen_sub_fbm(0.45, 1.5).unwrap(),
        ] {
            let n = 12;
            let inc = IncrementCovariance::new(&m, n).unwrap();
            let g = |i: usize, j: usize| inc.gamma(i, j);
            let r = |i: usize, j: usize| inc.rho_row()[i.abs_diff(j)];
            let mut t = [Neumaier::new(); 3];
            let mut q = [Neumaier::new(); 4];
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        t[0].add(g(i, j) * g(j, k) * g(i, k));
                        t[1].add(g(i, j) * g(j, k) * r(i, k));
                        t[2].add(g(i, j) * r(j, k) * r(i, k));
                        for l in 0..n {
                            q[0].add(g(i, j) * g(i, k) * g(k, l) * g(j, l));
                            q[1].add(g(i, j) * g(i, k) * g(k, l) * r(j, l));
                            q[2].add(g(i, j) * g(i, k) * r(k, l) * r(j, l));
                            q[3].add(g(i, j) * r(i, k) * r(k, l) * r(j, l));
                        }
                    }
                }
            }
            let got = mixed_sums(&inc, &MixedCaps::default()).unwrap();
            for (a, b) in got.triple.iter().zip(&t) {
                assert!((a - b.value()).abs() <= 1e-12 * b.value().abs().max(1e-3), "{m}: {a} vs {}", b.value());
            }
            for (a, b) in got.quadruple.unwrap().iter().zip(&q) {
                assert!((a - b.value()).abs() <= 1e-12 * b.value().abs().max(1e-3), "{m}: {a} vs {}", b.value());
            }
        }
    }

    #[test]
    fn mixed_sums_vanish_for_fbm_and_respect_caps() {
        let inc = IncrementCovariance::new(&CovarianceModel::fbm(0.7).unwrap(), 300).unwrap();
        let s = mixed_sums(&inc, &MixedCaps::default()).unwrap();
        assert_eq!(s.triple, [0.0; 3]);
        assert!(s.quadruple.is_none());
        let caps = MixedCaps { triple: 16, quadruple: 8 };
        let sub = IncrementCovariance::new(&CovarianceModel::sub_fbm(0.6).unwrap(), 17).unwrap();
        assert!(matches!(mixed_sums(&sub, &caps), Err(Error::SizeCap { .. })));
    }

    #[test]
    fn condition2_examples() {
        let bm = CovarianceModel::fbm(0.5).unwrap();
        let (lhs, shape) = asclt_condition2_bound(&bm, 4, 16).unwrap();
        assert_relative_eq!(lhs, 0.25, max_relative = 1e-14);
        assert_relative_eq!(shape, 0.625, max_relative = 1e-14);
        assert!(matches!(asclt_condition2_bound(&bm, 16, 16), Err(Error::Ordering { .. })));
        assert!(matches!(asclt_condition2_bound(&bm, 17, 16), Err(Error::Ordering { .. })));

        let m = CovarianceModel::sub_fbm(0.7).unwrap();
        let inc = IncrementCovariance::new(&m, 2).unwrap();
        let (lhs, _) = asclt_condition2_bound(&m, 1, 2).unwrap();
        let s = sigma_sq_prefix(&inc);
        let expect = (inc.theta(0, 0).powi(2) + inc.theta(0, 1).powi(2)) / (s[0] * s[1]).sqrt();
        assert_relative_eq!(lhs, expect, max_relative = 1e-14);
        assert!(lhs > 0.0);
    }

    #[test]
    fn condition2_ratio_is_stable_under_doubling() {
        let m = CovarianceModel::fbm(0.6).unwrap();
        let ratios: Vec<f64> = [64usize, 128, 256, 512]
            .iter()
            .map(|&l| {
                let (lhs, shape) = asclt_condition2_bound(&m, l - 1, l).unwrap();
                lhs / shape
            })
            .collect();
        for w in ratios.windows(2) {
            assert!((w[1] / w[0] - 1.0).abs() < 0.1, "{ratios:?}");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn kappa4_is_positive(h in 0.05f64..0.95, n in 1usize..80, which in 0usize..3) {
                let m = match which {
                    0 => CovarianceModel::fbm(h).unwrap(),
                    1 => CovarianceModel::sub_fbm(h).unwrap(),
                    _ => CovarianceModel::bi_fbm(h, 0.75).unwrap(),
                };
                let r = report(&m, n).unwrap();
                prop_assert!(r.kappa4_v > 0.0 && r.kappa4_f > 0.0);
                prop_assert!(r.sigma_n_sq > 0.0);
                prop_assert_eq!(r.m_stat, r.kappa3_v.abs().max(r.kappa4_v));
            }

            #[test]
            fn triple_lag_count_equals_toeplitz_square(h in 0.05f64..0.95, n in 1usize..120) {
                let fast = toeplitz_square_sums(&rho_row(h, n + 1), n).0;
                let lag = rho_triple_sum(h, n);
                prop_assert!((fast - lag).abs() <= 1e-11 * lag.abs().max(1.0));
            }
        }
    }
}
