//! Numerical checks of the structural hypothesis on `R` and of the two
//! technical lemmas used with it: the Stieltjes integration-by-parts
//! identity for step functions and the simplex-sum inequality.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::covariance::{fbm_cov, unit_pow_diff, CovarianceModel, IncrementCovariance};
use crate::error::{Error, Result};
use crate::sum::Neumaier;

/// Default finite-difference step for `Ψ`.
pub const DEFAULT_PSI_STEP: f64 = 1e-4;

/// Steps used by [`psi_richardson`]. At `1e-4` the stencil is already
/// dominated by roundoff, so the O(h²) behaviour is probed on larger steps.
pub const RICHARDSON_STEPS: [f64; 3] = [0.04, 0.02, 0.01];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiEstimate {
    pub t: f64,
    pub s: f64,
    pub psi: f64,
    /// `C'·(ts)^{H−1}` for the constant the scan was checked against.
    pub bound: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiScan {
    pub estimates: Vec<PsiEstimate>,
    /// Grid points within `2·step` of the diagonal, or with a non-positive coordinate.
    pub rejected: Vec<(f64, f64)>,
    /// `max |ψ|·(ts)^{1−H}` over the accepted points.
    pub fitted_constant: f64,
    pub pass: bool,
}

/// `R − R^B` at `(t, s)`.
fn cov_difference(model: &CovarianceModel, t: f64, s: f64) -> Result<f64> {
    Ok(model.cov(t, s)? - fbm_cov(model.hurst(), t, s))
}

/// Centered 4-point mixed difference of `R − R^B`.
pub fn psi_estimate(model: &CovarianceModel, t: f64, s: f64, step: f64) -> Result<f64> {
    let d = |x: f64, y: f64| cov_difference(model, x, y);
    let mut acc = Neumaier::new();
    acc.add(d(t + step, s + step)?);
    acc.add(-d(t + step, s - step)?);
    acc.add(-d(t - step, s + step)?);
    acc.add(d(t - step, s - step)?);
    Ok(acc.value() / (4.0 * step * step))
}

/// Scans `Ψ` over `grid`. With `c_h_prime = None` the scan passes whenever
/// the fitted constant is finite.
pub fn psi_scan(model: &CovarianceModel, c_h_prime: Option<f64>, grid: &[(f64, f64)], step: f64) -> Result<PsiScan> {
    if !(step > 0.0) {
        return Err(Error::InvalidInput(format!("step must be positive, got {step}")));
    }
    let h = model.hurst();
    let (accepted, rejected): (Vec<_>, Vec<_>) = grid
        .iter()
        .copied()
        .partition(|&(t, s)| t - step > 0.0 && s - step > 0.0 && (t - s).abs() > 2.0 * step);
    let psis = accepted
        .par_iter()
        .map(|&(t, s)| psi_estimate(model, t, s, step))
        .collect::<Result<Vec<f64>>>()?;
    let fitted_constant = accepted
        .iter()
        .zip(&psis)
        .map(|(&(t, s), psi)| psi.abs() * (t * s).powf(1.0 - h))
        .fold(0.0, f64::max);
    let c = c_h_prime.unwrap_or(fitted_constant);
    let estimates = accepted
        .iter()
        .zip(&psis)
        .map(|(&(t, s), &psi)| PsiEstimate { t, s, psi, bound: c * (t * s).powf(h - 1.0), step })
        .collect();
    let pass = fitted_constant.is_finite() && fitted_constant <= c;
    Ok(PsiScan { estimates, rejected, fitted_constant, pass })
}

/// Log-spaced pairs in `[lo, hi]²` plus points just off the diagonal
/// (`s = t + 3·step`), where the supremum of `|Ψ|(ts)^{1−H}` tends to sit.
pub fn default_scan_grid(lo: f64, hi: f64, points: usize, step: f64) -> Vec<(f64, f64)> {
    let axis: Vec<f64> = (0..points)
        .map(|i| lo * (hi / lo).powf(i as f64 / (points.max(2) - 1) as f64))
        .collect();
    let mut grid = Vec::with_capacity(points * (points + 1));
    for &t in &axis {
        for &s in &axis {
            grid.push((t, s));
        }
        if t + 3.0 * step <= hi {
            grid.push((t, t + 3.0 * step));
        }
    }
    grid
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RichardsonCheck {
    pub steps: [f64; 3],
    pub estimates: [f64; 3],
    /// `(ψ(h₀) − ψ(h₁)) / (ψ(h₁) − ψ(h₂))`; 4 for an O(h²) stencil.
    pub ratio: f64,
    pub consistent: bool,
}

/// Halving the step should shrink the stencil error by four.
pub fn psi_richardson(model: &CovarianceModel, t: f64, s: f64) -> Result<RichardsonCheck> {
    let steps = RICHARDSON_STEPS;
    let mut estimates = [0.0; 3];
    for (e, &h) in estimates.iter_mut().zip(&steps) {
        *e = psi_estimate(model, t, s, h)?;
    }
    let d0 = estimates[0] - estimates[1];
    let d1 = estimates[1] - estimates[2];
    // Differences at the roundoff floor carry no information about the order.
    let floor = 1e-9 * estimates[2].abs().max(1e-6);
    let (ratio, consistent) = if d0.abs() <= floor && d1.abs() <= floor {
        (f64::NAN, true)
    } else {
        let r = d0 / d1;
        (r, (r - 4.0).abs() <= 0.5)
    };
    Ok(RichardsonCheck { steps, estimates, ratio, consistent })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaBoundReport {
    /// `max |γ(i,j)| / (Δ_i Δ_j)` with `Δ_i = (i+1)^H − i^H`.
    pub max_ratio: f64,
    pub argmax: (usize, usize),
    /// Smallest `C'` for which the check passes: `max_ratio · H²`.
    pub implied_constant: f64,
    pub c_h_prime: f64,
    pub pass: bool,
}

/// Checks `|γ(i,j)| ≤ (C'/H²)·Δ_i·Δ_j` for all `i, j < n`.
pub fn gamma_bound_check(inc: &IncrementCovariance, c_h_prime: f64) -> GammaBoundReport {
    let n = inc.n();
    let h = inc.hurst();
    let delta: Vec<f64> = (0..n).map(|i| unit_pow_diff(i as f64, h)).collect();
    let (max_ratio, argmax) = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut best = (0.0f64, (i, 0));
            for j in 0..n {
                let r = inc.gamma(i, j).abs() / (delta[i] * delta[j]);
                if r > best.0 {
                    best = (r, (i, j));
                }
            }
            best
        })
        .reduce(|| (0.0, (0, 0)), |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });
    GammaBoundReport {
        max_ratio,
        argmax,
        implied_constant: max_ratio * h * h,
        c_h_prime,
        pass: max_ratio <= c_h_prime / (h * h),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailBoundReport {
    pub h: f64,
    /// `(i+1)^h − i^h ≤ h·i^{h−1}` held for every `1 ≤ i < n`.
    pub pointwise_ok: bool,
    /// `(n_k, S(n_k)/n_k^{(2h−1)∨0})` over doublings `n_k = 2, 4, …`.
    pub ratios: Vec<(usize, f64)>,
    /// `1/h² + 1 + 1/|2h−1|`, an explicit bound on every ratio for `h ≠ ½`.
    pub bound: f64,
    /// `h = ½`: the ratio grows like `log n` and is reported only.
    pub informational: bool,
    pub pass: bool,
}

/// Pointwise increment bound plus the growth of
/// `S(n) = h^{−2} Σ_{i<n} [(i+1)^h − i^h]²`.
pub fn increment_tail_bound_check(h: f64, n: usize) -> Result<TailBoundReport> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::Domain(format!("h = {h} must lie in (0, 1)")));
    }
    if n < 2 {
        return Err(Error::InvalidInput("n must be at least 2".into()));
    }
    let exponent = (2.0 * h - 1.0).max(0.0);
    let mut pointwise_ok = true;
    let mut acc = Neumaier::new();
    let mut ratios = Vec::new();
    let mut next = 2usize;
    for i in 0..n {
        let d = unit_pow_diff(i as f64, h);
        if i >= 1 && d > h * (i as f64).powf(h - 1.0) * (1.0 + 1e-14) {
            pointwise_ok = false;
        }
        acc.add(d * d);
        if i + 1 == next {
            ratios.push((next, acc.value() / (h * h) / (next as f64).powf(exponent)));
            next *= 2;
        }
    }
    let informational = (h - 0.5).abs() < 1e-12;
    let bound = if informational { f64::INFINITY } else { 1.0 / (h * h) + 1.0 + 1.0 / (2.0 * h - 1.0).abs() };
    let bounded = ratios.iter().all(|&(_, r)| r <= bound);
    // The ratio must settle: successive changes shrink over the last doublings.
    let settling = ratios.len() < 3 || {
        let k = ratios.len();
        let late = (ratios[k - 1].1 - ratios[k - 2].1).abs();
        let early = (ratios[k - 2].1 - ratios[k - 3].1).abs();
        late <= early * (1.0 + 1e-12)
    };
    let pass = pointwise_ok && (informational || (bounded && settling));
    Ok(TailBoundReport { h, pointwise_ok, ratios, bound, informational, pass })
}

/// A function with a continuous derivative.
pub trait Smooth {
    fn value(&self, t: f64) -> f64;
    fn derivative(&self, t: f64) -> f64;
}

/// `Σ c_k t^k`, coefficients in increasing degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial(pub Vec<f64>);

impl Smooth for Polynomial {
    fn value(&self, t: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    fn derivative(&self, t: f64) -> f64 {
        self.0
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, c)| acc * t + k as f64 * c)
    }
}

/// `f = Σ value·1_{[lo, hi)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    pub pieces: Vec<(f64, f64, f64)>,
}

impl StepFunction {
    pub fn indicator(lo: f64, hi: f64) -> Self {
        Self { pieces: vec![(lo, hi, 1.0)] }
    }

    pub fn zero() -> Self {
        Self { pieces: Vec::new() }
    }

    /// The signed measure `ν_f`: one atom per jump of `f`, with `f` taken as
    /// zero outside its pieces. Zero-mass atoms are dropped.
    pub fn measure(&self) -> StepMeasure {
        let mut jumps: Vec<(f64, f64)> = Vec::with_capacity(2 * self.pieces.len());
        for &(lo, hi, v) in &self.pieces {
            if hi > lo && v != 0.0 {
                jumps.push((lo, v));
                jumps.push((hi, -v));
            }
        }
        jumps.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut atoms: Vec<(f64, f64)> = Vec::new();
        for (x, m) in jumps {
            match atoms.last_mut() {
                Some(last) if last.0 == x => last.1 += m,
                _ => atoms.push((x, m)),
            }
        }
        atoms.retain(|a| a.1 != 0.0);
        StepMeasure { atoms }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMeasure {
    pub atoms: Vec<(f64, f64)>,
}

/// Integrand specification for [`stieltjes_identity_check`]; only step
/// functions carry an atomic measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FunctionSpec {
    Step(StepFunction),
    Polynomial(Polynomial),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StieltjesResidual {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// Absolute tolerance of the adaptive Simpson rule.
pub const QUADRATURE_TOL: f64 = 1e-10;

/// Compares `−∫_a^b f φ′` (adaptive quadrature) with `∫ φ dν_f` (atom sum).
pub fn stieltjes_identity_check<P: Smooth + ?Sized>(f: &FunctionSpec, phi: &P, a: f64, b: f64) -> Result<StieltjesResidual> {
    let step = match f {
        FunctionSpec::Step(s) => s,
        FunctionSpec::Polynomial(_) => {
            return Err(Error::UnsupportedFunction("only step functions have an atomic measure".into()))
        }
    };
    if !(a < b) {
        return Err(Error::InvalidInput(format!("empty interval [{a}, {b})")));
    }
    for &(lo, hi, _) in &step.pieces {
        if lo < a || hi > b || hi < lo {
            return Err(Error::InvalidInput(format!("piece [{lo}, {hi}) is not inside [{a}, {b})")));
        }
    }
    let mut lhs = Neumaier::new();
    for &(lo, hi, v) in &step.pieces {
        if hi > lo {
            lhs.add(-v * adaptive_simpson(&|t| phi.derivative(t), lo, hi, QUADRATURE_TOL));
        }
    }
    let rhs: Neumaier = step.measure().atoms.iter().map(|&(x, m)| m * phi.value(x)).collect();
    let (lhs, rhs) = (lhs.value(), rhs.value());
    Ok(StieltjesResidual { lhs, rhs, residual: (lhs - rhs).abs() })
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, m, fm, whole, tol, 48)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplexRow {
    pub r: usize,
    pub d: f64,
    /// `D(r) / r^{Σv}`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexReport {
    pub v: Vec<f64>,
    pub rows: Vec<SimplexRow>,
    /// `Π Γ(v_i) / Γ(1 + Σ v_i)`, the Dirichlet-integral constant.
    pub dirichlet_constant: f64,
    /// Every `D(r)` is at most `dirichlet_constant · (r + m)^{Σv}`, `m` the
    /// number of exponents above one.
    pub pass: bool,
}

/// `D(r) = Σ_{r_i ≥ 1, Σ r_i < r} Π r_i^{v_i − 1}` for `l = v.len() ≤ 3`,
/// by exact convolution over the level sets `Σ r_i = s`.
pub fn simplex_sum_check(v: &[f64], r_values: &[usize]) -> Result<SimplexReport> {
    let l = v.len();
    if l == 0 {
        return Err(Error::InvalidInput("need at least one exponent".into()));
    }
    if l > 3 {
        return Err(Error::Complexity(l));
    }
    if let Some(bad) = v.iter().find(|x| !(**x > 0.0)) {
        return Err(Error::Domain(format!("exponent {bad} must be positive")));
    }
    if r_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("r values must be strictly increasing".into()));
    }
    if let Some(&r) = r_values.iter().find(|&&r| r < l + 1) {
        return Err(Error::InvalidInput(format!("r = {r} must be at least {}", l + 1)));
    }
    let r_max = r_values.last().copied().unwrap_or(0);
    let power = |e: f64| -> Vec<f64> { (0..r_max).map(|x| if x == 0 { 0.0 } else { (x as f64).powf(e) }).collect() };

    // level[s] = Σ_{r_1+…+r_k = s} Π r_i^{v_i−1}
    let mut level = power(v[0] - 1.0);
    for &vi in &v[1..] {
        let kernel = power(vi - 1.0);
        level = (0..r_max)
            .into_par_iter()
            .map(|s| (1..s).map(|y| level[y] * kernel[s - y]).collect::<Neumaier>().value())
            .collect();
    }
    let total: f64 = v.iter().sum();
    let m = v.iter().filter(|&&x| x > 1.0).count() as f64;
    let dirichlet_constant = (v.iter().map(|&x| ln_gamma(x)).sum::<f64>() - ln_gamma(1.0 + total)).exp();

    let mut prefix = Neumaier::new();
    let mut rows = Vec::with_capacity(r_values.len());
    let mut next = r_values.iter().peekable();
    for (s, value) in level.iter().enumerate() {
        prefix.add(*value);
        // prefix now covers sums ≤ s, i.e. D(s + 1)
        while let Some(&&r) = next.peek() {
            if r == s + 1 {
                let d = prefix.value();
                rows.push(SimplexRow { r, d, ratio: d / (r as f64).powf(total) });
                next.next();
            } else {
                break;
            }
        }
    }
    let pass = rows
        .iter()
        .all(|row| row.d <= dirichlet_constant * (row.r as f64 + m).powf(total) * (1.0 + 1e-12));
    Ok(SimplexReport { v: v.to_vec(), rows, dirichlet_constant, pass })
}

/// One JSON record of the `hypothesis` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub check: String,
    pub model: String,
    pub params: String,
    pub fitted_constant: f64,
    pub max_ratio: f64,
    pub pass: bool,
}
