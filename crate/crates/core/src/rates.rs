//! Power-law fits of cumulant and distance sequences against the regime
//! table of the Berry–Esséen rates.

use serde::{Deserialize, Serialize};

use crate::covariance::CovarianceModel;
use crate::cumulants;
use crate::error::{Error, Result};
use crate::simulation;

/// Tolerance when deciding whether `h` sits on a critical value.
const CRITICAL_TOL: f64 = 1e-12;

/// Exponent tolerance for sequences computed from exact cumulants.
pub const EXACT_TOL: f64 = 0.05;
/// Tolerance for the sharper ρ-sum predictions.
pub const SHARPER_TOL: f64 = 0.1;
/// Tolerance for Monte Carlo KS fits.
pub const KS_TOL: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "Optimal_sqrt")]
    OptimalSqrt,
    #[serde(rename = "Critical_23")]
    Critical23,
    #[serde(rename = "Upper_34")]
    Upper34,
    #[serde(rename = "Boundary_34")]
    Boundary34,
    /// Used by the fourth-cumulant table only.
    #[serde(rename = "Optimal_n")]
    OptimalN,
    #[serde(rename = "Critical_58")]
    Critical58,
    #[serde(rename = "Upper_58")]
    Upper58,
}

impl Regime {
    /// Regimes where the paper only gives an upper bound.
    pub fn is_upper_bound(self) -> bool {
        matches!(self, Regime::Upper34 | Regime::Upper58)
    }

    /// Regimes with a logarithmic factor.
    pub fn is_critical(self) -> bool {
        matches!(self, Regime::Critical23 | Regime::Boundary34 | Regime::Critical58)
    }
}

/// `y ≍ n^a (log n)^b` (or `≤` for upper-bound regimes).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theoretical {
    pub regime: Regime,
    pub a: f64,
    pub b: f64,
}

fn near(h: f64, x: f64) -> bool {
    (h - x).abs() <= CRITICAL_TOL
}

/// The total-variation rate of `V_n` (equivalently of `M`, and of `κ₃(V_n)`).
pub fn theoretical_exponent(h: f64) -> Result<Theoretical> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!("H = {h} must be positive")));
    }
    let t = |regime, a, b| Ok(Theoretical { regime, a, b });
    if near(h, 2.0 / 3.0) {
        t(Regime::Critical23, -0.5, 2.0)
    } else if near(h, 0.75) {
        t(Regime::Boundary34, 0.0, -1.5)
    } else if h < 2.0 / 3.0 {
        t(Regime::OptimalSqrt, -0.5, 0.0)
    } else if h < 0.75 {
        t(Regime::Upper34, 0.5 * (4.0 * h - 3.0), 0.0)
    } else {
        Err(Error::OutOfTheorem(h))
    }
}

/// Rate of `κ₄(V_n)`.
pub fn kappa4_exponent(h: f64) -> Result<Theoretical> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!("H = {h} must be positive")));
    }
    let t = |regime, a, b| Ok(Theoretical { regime, a, b });
    if near(h, 0.625) {
        t(Regime::Critical58, -1.0, 3.0)
    } else if near(h, 0.75) {
        t(Regime::Boundary34, 0.0, -2.0)
    } else if h < 0.625 {
        t(Regime::OptimalN, -1.0, 0.0)
    } else if h < 0.75 {
        t(Regime::Upper58, 8.0 * h - 6.0, 0.0)
    } else {
        Err(Error::OutOfTheorem(h))
    }
}

/// Least-squares fit `ln y = c + a ln n (+ b ln ln n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    /// `a`.
    pub exponent: f64,
    /// `b`; zero for pure power fits.
    pub log_power: f64,
    /// `c`.
    pub log_prefactor: f64,
    pub r_squared: f64,
}

pub fn fit_power_law(points: &[(f64, f64)], with_log: bool) -> Result<PowerFit> {
    if points.len() < 4 {
        return Err(Error::InsufficientData { need: 4, got: points.len() });
    }
    if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::InvalidInput("n values must be strictly increasing".into()));
    }
    for &(n, y) in points {
        if !(y > 0.0) || !y.is_finite() {
            return Err(Error::Domain(format!("y = {y} at n = {n} is not positive")));
        }
        if (with_log && !(n > 1.0)) || !(n > 0.0) {
            return Err(Error::Domain(format!("n = {n} is outside the fit domain")));
        }
    }
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mut cols = vec![vec![1.0; points.len()], points.iter().map(|p| p.0.ln()).collect()];
    if with_log {
        cols.push(points.iter().map(|p| p.0.ln().ln()).collect());
    }
    let beta = least_squares(&cols, &ys)?;
    let fitted = |i: usize| cols.iter().zip(&beta).map(|(c, b)| c[i] * b).sum::<f64>();
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let ss_tot: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
    let ss_res: f64 = ys.iter().enumerate().map(|(i, y)| (y - fitted(i)).powi(2)).sum();
    let r_squared = if ss_tot <= f64::EPSILON * ys.len() as f64 * mean.abs().max(1.0).powi(2) {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(PowerFit {
        exponent: beta[1],
        log_power: if with_log { beta[2] } else { 0.0 },
        log_prefactor: beta[0],
        r_squared,
    })
}

/// Solves `min ‖X β − y‖` with modified Gram–Schmidt on the columns.
fn least_squares(cols: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>> {
    let p = cols.len();
    let mut q: Vec<Vec<f64>> = cols.to_vec();
    let mut r = vec![vec![0.0; p]; p];
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    for j in 0..p {
        for i in 0..j {
            let rij = dot(&q[i], &q[j]);
            r[i][j] = rij;
            let qi = q[i].clone();
            for (v, u) in q[j].iter_mut().zip(&qi) {
                *v -= rij * u;
            }
        }
        let norm = dot(&q[j], &q[j]).sqrt();
        let scale = dot(&cols[j], &cols[j]).sqrt();
        if !(norm > 1e-12 * scale) {
            return Err(Error::InvalidInput("fit design is rank deficient".into()));
        }
        r[j][j] = norm;
        q[j].iter_mut().for_each(|v| *v /= norm);
    }
    let qty: Vec<f64> = q.iter().map(|qi| dot(qi, y)).collect();
    let mut beta = vec![0.0; p];
    for i in (0..p).rev() {
        let tail: f64 = (i + 1..p).map(|k| r[i][k] * beta[k]).sum();
        beta[i] = (qty[i] - tail) / r[i][i];
    }
    Ok(beta)
}

/// The sequence being fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceKind {
    Kappa3,
    Kappa4,
    MStat,
    Ks,
}

impl SequenceKind {
    pub fn label(self) -> &'static str {
        match self {
            SequenceKind::Kappa3 => "kappa3",
            SequenceKind::Kappa4 => "kappa4",
            SequenceKind::MStat => "m_stat",
            SequenceKind::Ks => "ks",
        }
    }
}

impl std::str::FromStr for SequenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kappa3" => Ok(SequenceKind::Kappa3),
            "kappa4" => Ok(SequenceKind::Kappa4),
            "m_stat" | "m" => Ok(SequenceKind::MStat),
            "ks" => Ok(SequenceKind::Ks),
            other => Err(Error::InvalidInput(format!("unknown sequence `{other}`"))),
        }
    }
}

/// Monte Carlo settings for `ks` sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McOptions {
    pub reps: usize,
    pub seed: u64,
}

impl Default for McOptions {
    fn default() -> Self {
        Self { reps: 10_000, seed: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub a: f64,
    pub b: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheorySummary {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub model: String,
    pub params: String,
    #[serde(rename = "use")]
    pub use_: SequenceKind,
    pub points: Vec<(usize, f64)>,
    pub fitted: FitSummary,
    /// Pure power fit, reported alongside the log-corrected fit at critical `H`.
    pub pure_fit: Option<FitSummary>,
    pub theoretical: TheorySummary,
    pub regime: Regime,
    /// `6H − 9/2` (third cumulant) in the upper-bound regime.
    pub sharper: Option<f64>,
    pub tolerance: f64,
    pub verdict: Verdict,
}

/// Theory row for a sequence kind.
pub fn theory_for(kind: SequenceKind, h: f64) -> Result<(Theoretical, Option<f64>)> {
    let theory = match kind {
        SequenceKind::Kappa4 => kappa4_exponent(h)?,
        _ => theoretical_exponent(h)?,
    };
    let sharper = match (kind, theory.regime) {
        (SequenceKind::Kappa3 | SequenceKind::MStat, Regime::Upper34) => Some(6.0 * h - 4.5),
        _ => None,
    };
    Ok((theory, sharper))
}

/// Judges a fit against the theory row.
pub fn judge(fit: &PowerFit, theory: &Theoretical, sharper: Option<f64>, tol: f64) -> Verdict {
    let ok = if theory.regime.is_critical() {
        (fit.exponent - theory.a).abs() <= tol && fit.log_power.signum() == theory.b.signum()
    } else if theory.regime.is_upper_bound() {
        fit.exponent <= theory.a + tol && sharper.is_none_or(|s| (fit.exponent - s).abs() <= SHARPER_TOL)
    } else {
        (fit.exponent - theory.a).abs() <= tol
    };
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

/// Computes the requested sequence over `n_list`.
pub fn sequence(model: &CovarianceModel, n_list: &[usize], kind: SequenceKind, mc: &McOptions) -> Result<Vec<(usize, f64)>> {
    n_list
        .iter()
        .map(|&n| {
            let y = match kind {
                SequenceKind::Ks => simulation::simulate(model, n, mc.reps, mc.seed)?.ks_distance,
                _ => {
                    let r = cumulants::report(model, n)?;
                    match kind {
                        SequenceKind::Kappa3 => r.kappa3_v.abs(),
                        SequenceKind::Kappa4 => r.kappa4_v,
                        _ => r.m_stat,
                    }
                }
            };
            Ok((n, y))
        })
        .collect()
}

/// Fits the sequence and compares it with the regime table.
pub fn regime_check(model: &CovarianceModel, n_list: &[usize], kind: SequenceKind, mc: &McOptions) -> Result<RegimeReport> {
    if n_list.len() < 4 {
        return Err(Error::InsufficientData { need: 4, got: n_list.len() });
    }
    let h = model.hurst();
    let (theory, sharper) = theory_for(kind, h)?;
    let points = sequence(model, n_list, kind, mc)?;
    regime_report(model, kind, points, theory, sharper)
}

/// [`regime_check`] on precomputed points.
pub fn regime_report(
    model: &CovarianceModel,
    kind: SequenceKind,
    points: Vec<(usize, f64)>,
    theory: Theoretical,
    sharper: Option<f64>,
) -> Result<RegimeReport> {
    let xy: Vec<(f64, f64)> = points.iter().map(|&(n, y)| (n as f64, y)).collect();
    let critical = theory.regime.is_critical();
    let fit = fit_power_law(&xy, critical)?;
    let pure_fit = if critical {
        let p = fit_power_law(&xy, false)?;
        Some(FitSummary { a: p.exponent, b: 0.0, r2: p.r_squared })
    } else {
        None
    };
    let tolerance = if kind == SequenceKind::Ks { KS_TOL } else { EXACT_TOL };
    let verdict = judge(&fit, &theory, sharper, tolerance);
    Ok(RegimeReport {
        model: model.kind().label().to_string(),
        params: model.params(),
        use_: kind,
        points,
        fitted: FitSummary { a: fit.exponent, b: fit.log_power, r2: fit.r_squared },
        pure_fit,
        theoretical: TheorySummary { a: theory.a, b: theory.b },
        regime: theory.regime,
        sharper,
        tolerance,
        verdict,
    })
}

/// `a, 2a, 4a, …` up to and including `b`.
pub fn doubling(a: usize, b: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut n = a;
    while n > 0 && n <= b {
        out.push(n);
        n = match n.checked_mul(2) {
            Some(v) => v,
            None => break,
        };
    }
    out
}
