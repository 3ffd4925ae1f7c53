//! Covariance kernels, the stationary fBm increment correlation `ρ`, and the
//! increment-covariance matrix `Θ = Toeplitz(ρ) + Γ`.
//!
//! The non-stationary part `Γ` is evaluated from closed forms of the mixed
//! second difference of `R − R^B` rather than by differencing `R` itself,
//! which would lose most significant digits once `R(i, j)` grows like
//! `i^{2H}`:
//!
//! * fBm: `Γ ≡ 0`.
//! * sub-fBm: `R − R^B = ½(t^{2H} + s^{2H} − (t+s)^{2H})`, whose mixed
//!   difference is `γ(i, j) = −ρ(i + j + 1)`: a Hankel matrix.
//! * bi-fBm and generalized sub-fBm: the separable terms drop out and the
//!   mixed difference of `F(t, s) = (t^{2H'} + s^{2H'})^K` is taken in an
//!   `expm1`/`ln_1p` form.

use std::fmt;
use std::io::BufRead;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lags at or below this use the defining formula for `ρ`; beyond it the
/// binomial series of the central second difference is used.
const RHO_SERIES_THRESHOLD: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Fbm,
    SubFbm,
    BiFbm,
    GenSubFbm,
    Tabulated,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Fbm => "fbm",
            ModelKind::SubFbm => "subfbm",
            ModelKind::BiFbm => "bifbm",
            ModelKind::GenSubFbm => "gsfbm",
            ModelKind::Tabulated => "tabulated",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fbm" => Ok(ModelKind::Fbm),
            "subfbm" => Ok(ModelKind::SubFbm),
            "bifbm" => Ok(ModelKind::BiFbm),
            "gsfbm" | "gensubfbm" => Ok(ModelKind::GenSubFbm),
            "tabulated" => Ok(ModelKind::Tabulated),
            other => Err(Error::InvalidModel(format!("unknown model kind `{other}`"))),
        }
    }
}

/// Covariance values on the uniform grid `{0, step, 2·step, …, horizon}²`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedGrid {
    horizon: f64,
    step: f64,
    points: usize,
    values: Vec<f64>,
}

impl TabulatedGrid {
    /// Builds a grid from a full symmetric table of `points × points` values.
    pub fn new(horizon: f64, step: f64, values: Vec<f64>) -> Result<Self> {
        let points = grid_points(horizon, step)?;
        if values.len() != points * points {
            return Err(Error::InvalidModel(format!(
                "expected {} grid values, got {}",
                points * points,
                values.len()
            )));
        }
        for i in 0..points {
            for j in 0..i {
                let (a, b) = (values[i * points + j], values[j * points + i]);
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::InvalidModel(format!("grid is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { horizon, step, points, values })
    }

    /// Tabulates a closed-form model, mostly useful for tests and fixtures.
    pub fn from_model(model: &CovarianceModel, horizon: f64, step: f64) -> Result<Self> {
        let points = grid_points(horizon, step)?;
        let mut values = vec![0.0; points * points];
        for i in 0..points {
            for j in 0..=i {
                let v = model.cov(i as f64 * step, j as f64 * step)?;
                values[i * points + j] = v;
                values[j * points + i] = v;
            }
        }
        Ok(Self { horizon, step, points, values })
    }

    /// Parses `T,<horizon>,step,<dt>` followed by `t,s,R` rows; the reader
    /// symmetrizes, and every grid pair must be covered.
    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate().filter_map(|(i, l)| match l {
            Ok(l) if l.trim().is_empty() => None,
            other => Some((i + 1, other)),
        });
        let (line_no, header) = lines
            .next()
            .ok_or(Error::Parse { line: 1, msg: "empty covariance file".into() })?;
        let header = header?;
        let fields: Vec<&str> = header.split(',').map(str::trim).collect();
        if fields.len() != 4 || !fields[0].eq_ignore_ascii_case("T") || !fields[2].eq_ignore_ascii_case("step") {
            return Err(Error::Parse { line: line_no, msg: "header must be `T,<horizon>,step,<dt>`".into() });
        }
        let horizon = parse_f64(fields[1], line_no)?;
        let step = parse_f64(fields[3], line_no)?;
        let points = grid_points(horizon, step).map_err(|e| Error::Parse { line: line_no, msg: e.to_string() })?;

        let mut values = vec![f64::NAN; points * points];
        for (line_no, line) in lines {
            let line = line?;
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 3 {
                return Err(Error::Parse { line: line_no, msg: format!("expected `t,s,R`, got `{line}`") });
            }
            let i = grid_index(parse_f64(f[0], line_no)?, step, points, line_no)?;
            let j = grid_index(parse_f64(f[1], line_no)?, step, points, line_no)?;
            let r = parse_f64(f[2], line_no)?;
            for idx in [i * points + j, j * points + i] {
                let prev = values[idx];
                if !prev.is_nan() && (prev - r).abs() > 1e-12 * prev.abs().max(1.0) {
                    return Err(Error::Parse { line: line_no, msg: format!("conflicting value for ({i}, {j})") });
                }
                values[idx] = r;
            }
        }
        if let Some(missing) = values.iter().position(|v| v.is_nan()) {
            return Err(Error::Parse {
                line: 0,
                msg: format!("grid pair ({}, {}) missing", missing / points, missing % points),
            });
        }
        Ok(Self { horizon, step, points, values })
    }

    pub fn read_csv_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file))
    }

    /// Writes the upper triangle in the format accepted by [`Self::read_csv`].
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "T,{},step,{}", self.horizon, self.step)?;
        for i in 0..self.points {
            for j in i..self.points {
                writeln!(w, "{},{},{}", i as f64 * self.step, j as f64 * self.step, self.at(i, j))?;
            }
        }
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Number of grid points per axis (including 0).
    pub fn points(&self) -> usize {
        self.points
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.points + j]
    }

    fn interpolate(&self, t: f64, s: f64) -> Result<f64> {
        let slack = 1e-12 * self.horizon.max(1.0);
        if t < -slack || s < -slack || t > self.horizon + slack || s > self.horizon + slack {
            return Err(Error::OutOfRange { t, s, horizon: self.horizon });
        }
        let last = self.points - 1;
        let locate = |x: f64| {
            let u = (x / self.step).clamp(0.0, last as f64);
            let i0 = (u.floor() as usize).min(last.saturating_sub(1));
            (i0, u - i0 as f64)
        };
        let (i0, ft) = locate(t);
        let (j0, fs) = locate(s);
        if last == 0 {
            return Ok(self.at(0, 0));
        }
        let v00 = self.at(i0, j0);
        let v10 = self.at(i0 + 1, j0);
        let v01 = self.at(i0, j0 + 1);
        let v11 = self.at(i0 + 1, j0 + 1);
        Ok(v00 * (1.0 - ft) * (1.0 - fs) + v10 * ft * (1.0 - fs) + v01 * (1.0 - ft) * fs + v11 * ft * fs)
    }
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::Parse { line, msg: format!("not a number: `{s}`") })
}

fn grid_points(horizon: f64, step: f64) -> Result<usize> {
    if !(horizon > 0.0 && step > 0.0 && horizon.is_finite() && step.is_finite()) {
        return Err(Error::InvalidModel("grid horizon and step must be positive".into()));
    }
    let m = horizon / step;
    let rounded = m.round();
    if (m - rounded).abs() > 1e-9 * m.max(1.0) || rounded < 1.0 {
        return Err(Error::InvalidModel(format!("horizon {horizon} is not a multiple of step {step}")));
    }
    Ok(rounded as usize + 1)
}

fn grid_index(x: f64, step: f64, points: usize, line: usize) -> Result<usize> {
    let u = x / step;
    let r = u.round();
    if (u - r).abs() > 1e-9 * u.abs().max(1.0) || r < 0.0 || r as usize >= points {
        return Err(Error::Parse { line, msg: format!("{x} is not a grid point") });
    }
    Ok(r as usize)
}

/// A parametrized covariance kernel `R(t, s)` with effective Hurst index `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    kind: ModelKind,
    hurst_h: f64,
    h_prime: Option<f64>,
    k_param: Option<f64>,
    grid: Option<Arc<TabulatedGrid>>,
}

fn check_unit_open(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidModel(format!("{name} = {v} must lie in (0, 1)")))
    }
}

impl CovarianceModel {
    pub fn fbm(hurst: f64) -> Result<Self> {
        check_unit_open("H", hurst)?;
        Ok(Self { kind: ModelKind::Fbm, hurst_h: hurst, h_prime: None, k_param: None, grid: None })
    }

    pub fn sub_fbm(hurst: f64) -> Result<Self> {
        check_unit_open("H", hurst)?;
        Ok(Self { kind: ModelKind::SubFbm, hurst_h: hurst, h_prime: None, k_param: None, grid: None })
    }

    /// Bi-fractional Brownian motion, `H' ∈ (0, 1)`, `K ∈ (0, 1]`, effective
    /// `H = H'K`. `K = 1` is plain fBm.
    pub fn bi_fbm(h_prime: f64, k: f64) -> Result<Self> {
        check_unit_open("H'", h_prime)?;
        if !(k > 0.0 && k <= 1.0) {
            return Err(Error::InvalidModel(format!("K = {k} must lie in (0, 1]")));
        }
        Ok(Self {
            kind: ModelKind::BiFbm,
            hurst_h: h_prime * k,
            h_prime: Some(h_prime),
            k_param: Some(k),
            grid: None,
        })
    }

    /// Generalized sub-fractional Brownian motion, `H' ∈ (0,1)`, `K ∈ [1, 2)`,
    /// `H'K ∈ (0, 1)`.
    pub fn gen_sub_fbm(h_prime: f64, k: f64) -> Result<Self> {
        check_unit_open("H'", h_prime)?;
        if !(1.0..2.0).contains(&k) {
            return Err(Error::InvalidModel(format!("K = {k} must lie in [1, 2)")));
        }
        let h = h_prime * k;
        if !(h > 0.0 && h < 1.0) {
            return Err(Error::InvalidModel(format!("H'K = {h} must lie in (0, 1)")));
        }
        Ok(Self {
            kind: ModelKind::GenSubFbm,
            hurst_h: h,
            h_prime: Some(h_prime),
            k_param: Some(k),
            grid: None,
        })
    }

    /// A user-supplied kernel on a uniform grid; `hurst` is the index whose
    /// fBm increments are subtracted to form `Γ`.
    pub fn tabulated(grid: TabulatedGrid, hurst: f64) -> Result<Self> {
        check_unit_open("H", hurst)?;
        let model = Self {
            kind: ModelKind::Tabulated,
            hurst_h: hurst,
            h_prime: None,
            k_param: None,
            grid: Some(Arc::new(grid)),
        };
        let grid = model.grid.as_deref().expect("just set");
        let scale = grid.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        for j in 0..grid.points {
            if grid.at(0, j).abs() > 1e-9 * scale {
                return Err(Error::InvalidModel(format!("R(0, s) != 0 at s = {}", j as f64 * grid.step)));
            }
        }
        Ok(model)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn hurst(&self) -> f64 {
        self.hurst_h
    }

    pub fn h_prime(&self) -> Option<f64> {
        self.h_prime
    }

    pub fn k_param(&self) -> Option<f64> {
        self.k_param
    }

    pub fn grid(&self) -> Option<&TabulatedGrid> {
        self.grid.as_deref()
    }

    /// True when the increments are stationary, i.e. `Γ ≡ 0`.
    pub fn is_stationary(&self) -> bool {
        self.kind == ModelKind::Fbm
    }

    /// Parameter string without commas, suitable for a CSV cell.
    pub fn params(&self) -> String {
        match self.kind {
            ModelKind::Fbm | ModelKind::SubFbm => format!("H={}", self.hurst_h),
            ModelKind::BiFbm | ModelKind::GenSubFbm => format!(
                "Hp={};K={}",
                self.h_prime.expect("set by constructor"),
                self.k_param.expect("set by constructor")
            ),
            ModelKind::Tabulated => {
                let g = self.grid().expect("set by constructor");
                format!("H={};T={};step={}", self.hurst_h, g.horizon, g.step)
            }
        }
    }

    /// Covariance `R(t, s)`.
    pub fn cov(&self, t: f64, s: f64) -> Result<f64> {
        if !(t >= 0.0 && s >= 0.0) {
            return Err(Error::InvalidInput(format!("cov requires t, s >= 0, got ({t}, {s})")));
        }
        let h = self.hurst_h;
        Ok(match self.kind {
            ModelKind::Fbm => fbm_cov(h, t, s),
            ModelKind::SubFbm => {
                let a = 2.0 * h;
                s.powf(a) + t.powf(a) - 0.5 * ((s + t).powf(a) + (t - s).abs().powf(a))
            }
            ModelKind::BiFbm => {
                let (hp, k) = (self.h_prime.unwrap(), self.k_param.unwrap());
                let a = 2.0 * hp;
                0.5 * ((s.powf(a) + t.powf(a)).powf(k) - (t - s).abs().powf(a * k))
            }
            ModelKind::GenSubFbm => {
                let (hp, k) = (self.h_prime.unwrap(), self.k_param.unwrap());
                let a = 2.0 * hp;
                (s.powf(a) + t.powf(a)).powf(k) - 0.5 * ((t + s).powf(a * k) + (t - s).abs().powf(a * k))
            }
            ModelKind::Tabulated => self.grid().expect("set by constructor").interpolate(t, s)?,
        })
    }

    /// Checks `R(0, s) = 0` and `R(t, s) = R(s, t)` on a sample grid.
    pub fn check_invariants(&self, samples: &[f64]) -> Result<()> {
        for &s in samples {
            let r0 = self.cov(0.0, s)?;
            if r0.abs() > 1e-12 * s.max(1.0) {
                return Err(Error::InvalidModel(format!("R(0, {s}) = {r0}")));
            }
            for &t in samples {
                let (a, b) = (self.cov(t, s)?, self.cov(s, t)?);
                if (a - b).abs() > 1e-12 * a.abs().max(1.0) {
                    return Err(Error::InvalidModel(format!("R not symmetric at ({t}, {s})")));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for CovarianceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.kind.label(), self.params())
    }
}

/// Free-function form of [`CovarianceModel::cov`].
pub fn cov(model: &CovarianceModel, t: f64, s: f64) -> Result<f64> {
    model.cov(t, s)
}

/// fBm covariance `½(t^{2H} + s^{2H} − |t − s|^{2H})`.
#[inline]
pub fn fbm_cov(h: f64, t: f64, s: f64) -> f64 {
    let a = 2.0 * h;
    0.5 * (t.powf(a) + s.powf(a) - (t - s).abs().powf(a))
}

/// `ρ(r) = ½(|r+1|^{2H} + |r−1|^{2H} − 2|r|^{2H})`, the fBm increment
/// autocovariance at lag `r`.
///
/// For `|r| > 8` the defining formula cancels catastrophically; there we sum
/// `|r|^{2H} · Σ_k C(2H, 2k) r^{−2k}`, whose terms all share one sign.
pub fn rho(h: f64, r: i64) -> f64 {
    let r = r.unsigned_abs();
    if r == 0 {
        return 1.0;
    }
    let a = 2.0 * h;
    let x = r as f64;
    if r <= RHO_SERIES_THRESHOLD {
        return 0.5 * ((x + 1.0).powf(a) + (x - 1.0).powf(a) - 2.0 * x.powf(a));
    }
    let inv2 = 1.0 / (x * x);
    // C(a, 2k) via C(a, 2k+2) = C(a, 2k) (a−2k)(a−2k−1) / ((2k+1)(2k+2)).
    let mut coeff = a * (a - 1.0) / 2.0;
    let mut pow = inv2;
    let mut total = 0.0;
    for k in 1..64 {
        let term = coeff * pow;
        total += term;
        if term.abs() <= 1e-18 * total.abs() {
            break;
        }
        let k2 = 2.0 * k as f64;
        coeff *= (a - k2) * (a - k2 - 1.0) / ((k2 + 1.0) * (k2 + 2.0));
        pow *= inv2;
    }
    x.powf(a) * total
}

/// `(x + 1)^a − x^a` without cancellation for large `x`.
#[inline]
pub fn unit_pow_diff(x: f64, a: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.powf(a) * (a * (1.0 / x).ln_1p()).exp_m1()
    }
}

/// `(base + delta)^k − base^k` for `base ≥ 0`, `delta > 0`.
#[inline]
fn shifted_pow_diff(base: f64, delta: f64, k: f64) -> f64 {
    if base == 0.0 {
        delta.powf(k)
    } else {
        base.powf(k) * (k * (delta / base).ln_1p()).exp_m1()
    }
}

/// Caps on `n` for increment matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeCaps {
    /// Models whose `Γ` needs dense `n × n` storage, and dense reductions.
    pub dense: usize,
    /// Models with `Γ ≡ 0` or Hankel `Γ` (O(n) storage).
    pub structured: usize,
}

impl Default for SizeCaps {
    fn default() -> Self {
        Self { dense: 8192, structured: 1 << 20 }
    }
}

/// Storage for the non-stationary part `Γ`.
#[derive(Debug, Clone, PartialEq)]
pub enum Perturbation {
    /// `Γ ≡ 0`.
    Zero,
    /// `γ(i, j) = h[i + j]`, length `2n − 1`.
    Hankel(Vec<f64>),
    /// Row-major `n × n`, exactly symmetric.
    Dense(Vec<f64>),
}

/// `Θ[i][j] = E[(G_{i+1} − G_i)(G_{j+1} − G_j)]` split as `Toeplitz(ρ) + Γ`.
///
/// Entries of `Θ` are always formed as `ρ(|i − j|) + γ(i, j)`, so the split
/// holds exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementCovariance {
    n: usize,
    hurst: f64,
    rho: Vec<f64>,
    gamma: Perturbation,
}

impl IncrementCovariance {
    pub fn new(model: &CovarianceModel, n: usize) -> Result<Self> {
        Self::with_caps(model, n, &SizeCaps::default())
    }

    pub fn with_caps(model: &CovarianceModel, n: usize, caps: &SizeCaps) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("n must be at least 1".into()));
        }
        let dense = matches!(model.kind, ModelKind::BiFbm | ModelKind::GenSubFbm | ModelKind::Tabulated);
        let cap = if dense { caps.dense } else { caps.structured };
        if n > cap {
            return Err(Error::SizeCap { what: "increment covariance", n, cap });
        }
        let h = model.hurst_h;
        let rho_row = rho_row(h, n);
        let gamma = match model.kind {
            ModelKind::Fbm => Perturbation::Zero,
            ModelKind::SubFbm => Perturbation::Hankel((0..2 * n - 1).map(|m| -rho(h, m as i64 + 1)).collect()),
            ModelKind::BiFbm => {
                let (hp, k) = (model.h_prime.unwrap(), model.k_param.unwrap());
                Perturbation::Dense(power_sum_mixed_difference(n, 2.0 * hp, k, |_, _, d| 0.5 * d))
            }
            ModelKind::GenSubFbm => {
                let (hp, k) = (model.h_prime.unwrap(), model.k_param.unwrap());
                Perturbation::Dense(power_sum_mixed_difference(n, 2.0 * hp, k, |i, j, d| {
                    d - rho(h, (i + j) as i64 + 1)
                }))
            }
            ModelKind::Tabulated => {
                let grid = model.grid().expect("set by constructor");
                if (grid.step - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidModel(format!(
                        "increments need a unit grid step, got {}",
                        grid.step
                    )));
                }
                if n >= grid.points {
                    return Err(Error::OutOfRange { t: n as f64, s: n as f64, horizon: grid.horizon });
                }
                let mut g = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..=i {
                        let theta = grid.at(i + 1, j + 1) - grid.at(i + 1, j) - grid.at(i, j + 1) + grid.at(i, j);
                        let v = theta - rho_row[i - j];
                        g[i * n + j] = v;
                        g[j * n + i] = v;
                    }
                }
                let inc = Self { n, hurst: h, rho: rho_row, gamma: Perturbation::Dense(g) };
                inc.check_psd()?;
                return Ok(inc);
            }
        };
        Ok(Self { n, hurst: h, rho: rho_row, gamma })
    }

    /// Wraps an explicit symmetric `Θ` (row-major); `Γ` is stored as `Θ − Toeplitz(ρ_H)`.
    pub fn from_theta(hurst: f64, n: usize, theta: &[f64]) -> Result<Self> {
        check_unit_open("H", hurst)?;
        if n == 0 || theta.len() != n * n {
            return Err(Error::InvalidInput(format!("theta must be {n}×{n}")));
        }
        let rho_row = rho_row(hurst, n);
        let mut g = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if (theta[i * n + j] - theta[j * n + i]).abs() > 1e-12 * theta[i * n + j].abs().max(1.0) {
                    return Err(Error::InvalidCovariance(format!("theta not symmetric at ({i}, {j})")));
                }
                g[i * n + j] = theta[i * n + j] - rho_row[i.abs_diff(j)];
            }
        }
        Ok(Self { n, hurst, rho: rho_row, gamma: Perturbation::Dense(g) })
    }

    /// Same matrix with every entry multiplied by `factor`. The result keeps
    /// `ρ_H` as its Toeplitz part, so `Γ` becomes dense.
    pub fn scaled(&self, factor: f64) -> Self {
        let n = self.n;
        let mut g = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                g[i * n + j] = self.theta(i, j) * factor - self.rho[i.abs_diff(j)];
            }
        }
        Self { n, hurst: self.hurst, rho: self.rho.clone(), gamma: Perturbation::Dense(g) }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    /// `ρ(0), …, ρ(n − 1)`.
    pub fn rho_row(&self) -> &[f64] {
        &self.rho
    }

    pub fn perturbation(&self) -> &Perturbation {
        &self.gamma
    }

    pub fn is_stationary(&self) -> bool {
        matches!(self.gamma, Perturbation::Zero)
    }

    #[inline]
    pub fn gamma(&self, i: usize, j: usize) -> f64 {
        match &self.gamma {
            Perturbation::Zero => 0.0,
            Perturbation::Hankel(h) => h[i + j],
            Perturbation::Dense(g) => g[i * self.n + j],
        }
    }

    #[inline]
    pub fn theta(&self, i: usize, j: usize) -> f64 {
        self.rho[i.abs_diff(j)] + self.gamma(i, j)
    }

    /// Dense row-major `Θ`.
    pub fn theta_dense(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.theta(i, j);
            }
        });
        out
    }

    /// Dense row-major `Γ`.
    pub fn gamma_dense(&self) -> Vec<f64> {
        let n = self.n;
        match &self.gamma {
            Perturbation::Dense(g) => g.clone(),
            _ => {
                let mut out = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        out[i * n + j] = self.gamma(i, j);
                    }
                }
                out
            }
        }
    }

    /// Dense row-major `Toeplitz(ρ)`.
    pub fn toeplitz_dense(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = self.rho[i.abs_diff(j)];
            }
        }
        out
    }

    /// Rejects matrices that are indefinite beyond roundoff.
    fn check_psd(&self) -> Result<()> {
        let theta = self.theta_dense();
        let scale = (0..self.n).map(|i| theta[i * self.n + i].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        crate::simulation::JITTER_LADDER
            .iter()
            .find_map(|&j| crate::linalg::cholesky_lower(&theta, self.n, j * scale).ok())
            .map(|_| ())
            .ok_or_else(|| Error::InvalidCovariance("tabulated increments are not positive semidefinite".into()))
    }
}

/// `ρ(0..n)` for index `h`.
pub fn rho_row(h: f64, n: usize) -> Vec<f64> {
    (0..n).map(|r| rho(h, r as i64)).collect()
}

/// Mixed unit second difference `Δ_iΔ_j (t^a + s^a)^k`, post-processed by
/// `finish(i, j, d)`, on the upper triangle and mirrored.
fn power_sum_mixed_difference<F>(n: usize, a: f64, k: f64, finish: F) -> Vec<f64>
where
    F: Fn(usize, usize, f64) -> f64 + Sync,
{
    let pw: Vec<f64> = (0..=n).map(|i| (i as f64).powf(a)).collect();
    let dv: Vec<f64> = (0..n).map(|j| unit_pow_diff(j as f64, a)).collect();
    // g(t, j) = F(t, j+1) − F(t, j)
    let g = |t: usize, j: usize| shifted_pow_diff(pw[t] + pw[j], dv[j], k);
    let mut out = vec![0.0; n * n];
    out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, v) in row.iter_mut().enumerate().skip(i) {
            *v = finish(i, j, g(i + 1, j) - g(i, j));
        }
    });
    for i in 0..n {
        for j in 0..i {
            out[i * n + j] = out[j * n + i];
        }
    }
    out
}
