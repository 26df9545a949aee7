//! Classical head/expression split of a dense flow field.
//!
//! A parametric 2D motion model (translation, similarity or affine) is fitted
//! to the masked flow by iteratively reweighted least squares under a Huber or
//! Tukey loss on the residual vector norm. The fitted model is the head flow;
//! the remainder is the expression flow.
//!
//! Models are evaluated at pixel centers `(x + 0.5, y + 0.5)`:
//!
//! | kind        | `u`                         | `v`                         |
//! |-------------|-----------------------------|-----------------------------|
//! | translation | `a0`                        | `a1`                        |
//! | similarity  | `a0 + a2·x − a3·y`          | `a1 + a3·x + a2·y`          |
//! | affine      | `a0 + a2·x + a3·y`          | `a1 + a4·x + a5·y`          |
//!
//! Internally the fit runs on centered, scaled coordinates for conditioning;
//! normal equations are accumulated in row-major pixel order.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{FlowField, Mask};

/// Tukey biweight constant for 95% Gaussian efficiency.
pub const TUKEY_EFFICIENCY: f64 = 4.685;
/// Median of a 2D standard-normal residual norm (Rayleigh median, `sqrt(2 ln 2)`).
const RAYLEIGH_MEDIAN: f64 = 1.177_410_022_515_474_6;
const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MotionKind {
    Translation,
    Similarity,
    Affine,
}

impl MotionKind {
    pub fn num_coefficients(self) -> usize {
        match self {
            MotionKind::Translation => 2,
            MotionKind::Similarity => 4,
            MotionKind::Affine => 6,
        }
    }

    /// Design rows for the `u` and `v` components at `(x, y)`.
    fn rows(self, x: f64, y: f64) -> ([f64; 6], [f64; 6]) {
        match self {
            MotionKind::Translation => ([1.0, 0.0, 0.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0, 0.0, 0.0]),
            MotionKind::Similarity => ([1.0, 0.0, x, -y, 0.0, 0.0], [0.0, 1.0, y, x, 0.0, 0.0]),
            MotionKind::Affine => ([1.0, 0.0, x, y, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0, x, y]),
        }
    }
}

impl std::str::FromStr for MotionKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "translation" => Ok(MotionKind::Translation),
            "similarity" => Ok(MotionKind::Similarity),
            "affine" => Ok(MotionKind::Affine),
            other => Err(Error::Domain(format!("unknown motion model '{other}'"))),
        }
    }
}

/// Parametric motion field in pixel coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionModel {
    pub kind: MotionKind,
    pub coefficients: Vec<f64>,
}

impl MotionModel {
    pub fn new(kind: MotionKind, coefficients: Vec<f64>) -> Result<Self> {
        let m = MotionModel { kind, coefficients };
        m.validate()?;
        Ok(m)
    }

    pub fn zero(kind: MotionKind) -> Self {
        MotionModel { kind, coefficients: vec![0.0; kind.num_coefficients()] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.coefficients.len() != self.kind.num_coefficients() {
            return Err(Error::Shape(format!(
                "{:?} model needs {} coefficients, got {}",
                self.kind,
                self.kind.num_coefficients(),
                self.coefficients.len()
            )));
        }
        if self.coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("non-finite motion coefficient".into()));
        }
        Ok(())
    }

    /// Displacement at continuous pixel coordinates.
    pub fn evaluate(&self, x: f64, y: f64) -> [f64; 2] {
        let (ru, rv) = self.kind.rows(x, y);
        let n = self.coefficients.len();
        let dot = |r: &[f64; 6]| r[..n].iter().zip(&self.coefficients).map(|(a, b)| a * b).sum::<f64>();
        [dot(&ru), dot(&rv)]
    }

    /// Displacement at the center of pixel `(px, py)`.
    pub fn at_pixel(&self, px: usize, py: usize) -> [f64; 2] {
        self.evaluate(px as f64 + 0.5, py as f64 + 0.5)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RobustLoss {
    Huber,
    Tukey,
}

impl std::str::FromStr for RobustLoss {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "huber" => Ok(RobustLoss::Huber),
            "tukey" => Ok(RobustLoss::Tukey),
            other => Err(Error::Domain(format!("unknown robust loss '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrlsConfig {
    pub loss: RobustLoss,
    /// Huber threshold, or the residual sigma for Tukey (cutoff `4.685 × scale`).
    /// `None` estimates the sigma from the initial residuals' median.
    pub scale: Option<f64>,
    pub max_iterations: usize,
    /// Stop when no coefficient (in normalized coordinates) moves more than this.
    pub tolerance: f64,
}

impl IrlsConfig {
    pub fn huber() -> Self {
        IrlsConfig { loss: RobustLoss::Huber, scale: Some(1.0), max_iterations: 100, tolerance: 1e-10 }
    }

    pub fn tukey() -> Self {
        IrlsConfig { loss: RobustLoss::Tukey, scale: None, max_iterations: 100, tolerance: 1e-10 }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(s) = self.scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Domain("IRLS scale must be positive".into()));
            }
        }
        if self.max_iterations < 1 {
            return Err(Error::Domain("IRLS needs at least one iteration".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Domain("IRLS tolerance must be positive".into()));
        }
        Ok(())
    }
}

impl Default for IrlsConfig {
    fn default() -> Self {
        IrlsConfig::huber()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    /// Robust objective of the initial least-squares fit and after each accepted step.
    pub objective_history: Vec<f64>,
    /// Fraction of fitted pixels with residual below `3 × scale`.
    pub inlier_fraction: f64,
    /// Huber threshold or Tukey sigma actually used (px).
    pub scale: f64,
    pub num_pixels: usize,
}

#[derive(Clone, Copy)]
struct Loss {
    kind: RobustLoss,
    /// Huber delta or Tukey cutoff.
    threshold: f64,
}

impl Loss {
    fn rho(&self, r: f64) -> f64 {
        let c = self.threshold;
        match self.kind {
            RobustLoss::Huber => {
                if r <= c {
                    0.5 * r * r
                } else {
                    c * (r - 0.5 * c)
                }
            }
            RobustLoss::Tukey => {
                if r <= c {
                    let t = 1.0 - (r / c).powi(2);
                    c * c / 6.0 * (1.0 - t * t * t)
                } else {
                    c * c / 6.0
                }
            }
        }
    }

    fn weight(&self, r: f64) -> f64 {
        let c = self.threshold;
        match self.kind {
            RobustLoss::Huber => {
                if r <= c {
                    1.0
                } else {
                    c / r
                }
            }
            RobustLoss::Tukey => {
                if r < c {
                    let t = 1.0 - (r / c).powi(2);
                    t * t
                } else {
                    0.0
                }
            }
        }
    }
}

struct Samples {
    /// Normalized pixel-center coordinates.
    coords: Vec<[f64; 2]>,
    flow: Vec<[f64; 2]>,
    origin: [f64; 2],
    spread: f64,
}

fn collect_samples(flow: &FlowField, mask: &Mask) -> Result<Samples> {
    if (mask.width, mask.height) != (flow.width, flow.height) {
        return Err(Error::Shape("mask and flow dimensions differ".into()));
    }
    let origin = [flow.width as f64 / 2.0, flow.height as f64 / 2.0];
    let spread = (flow.width.max(flow.height) as f64 / 2.0).max(1.0);
    let mut coords = Vec::new();
    let mut values = Vec::new();
    for y in 0..flow.height {
        for x in 0..flow.width {
            let idx = y * flow.width + x;
            if mask.bits[idx] && flow.valid[idx] {
                coords.push([(x as f64 + 0.5 - origin[0]) / spread, (y as f64 + 0.5 - origin[1]) / spread]);
                let d = flow.data[idx];
                values.push([d[0] as f64, d[1] as f64]);
            }
        }
    }
    Ok(Samples { coords, flow: values, origin, spread })
}

fn residual_norms(kind: MotionKind, s: &Samples, coef: &[f64]) -> Vec<f64> {
    let model = MotionModel { kind, coefficients: coef.to_vec() };
    s.coords
        .iter()
        .zip(&s.flow)
        .map(|(c, f)| {
            let m = model.evaluate(c[0], c[1]);
            (f[0] - m[0]).hypot(f[1] - m[1])
        })
        .collect()
}

/// Weighted normal equations, accumulated in sample (row-major pixel) order.
fn normal_equations(kind: MotionKind, s: &Samples, weights: Option<&[f64]>) -> (DMatrix<f64>, DVector<f64>) {
    let m = kind.num_coefficients();
    let mut ata = DMatrix::zeros(m, m);
    let mut atb = DVector::zeros(m);
    for (i, (c, f)) in s.coords.iter().zip(&s.flow).enumerate() {
        let w = weights.map_or(1.0, |w| w[i]);
        if w == 0.0 {
            continue;
        }
        let (ru, rv) = kind.rows(c[0], c[1]);
        for a in 0..m {
            atb[a] += w * (ru[a] * f[0] + rv[a] * f[1]);
            for b in 0..m {
                ata[(a, b)] += w * (ru[a] * ru[b] + rv[a] * rv[b]);
            }
        }
    }
    (ata, atb)
}

fn solve(ata: DMatrix<f64>, atb: &DVector<f64>) -> Option<Vec<f64>> {
    let chol = ata.cholesky()?;
    let x = chol.solve(atb);
    x.iter().all(|v| v.is_finite()).then(|| x.iter().copied().collect())
}

/// Converts normalized-coordinate coefficients to pixel-coordinate ones.
fn denormalize(kind: MotionKind, b: &[f64], origin: [f64; 2], s: f64) -> Vec<f64> {
    let [cx, cy] = origin;
    match kind {
        MotionKind::Translation => b.to_vec(),
        MotionKind::Similarity => {
            let (a2, a3) = (b[2] / s, b[3] / s);
            vec![b[0] - a2 * cx + a3 * cy, b[1] - a3 * cx - a2 * cy, a2, a3]
        }
        MotionKind::Affine => {
            let (a2, a3, a4, a5) = (b[2] / s, b[3] / s, b[4] / s, b[5] / s);
            vec![b[0] - a2 * cx - a3 * cy, b[1] - a4 * cx - a5 * cy, a2, a3, a4, a5]
        }
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Robust fit of a parametric head-motion model to the masked, valid flow.
///
/// Starts from the unweighted least-squares solution. A step that would raise
/// the robust objective is rejected, so `objective_history` never increases.
/// Hitting `max_iterations` returns the best iterate with `converged = false`.
pub fn fit_head_motion(
    flow: &FlowField,
    face_mask: &Mask,
    kind: MotionKind,
    config: &IrlsConfig,
) -> Result<(MotionModel, FitDiagnostics)> {
    config.validate()?;
    let samples = collect_samples(flow, face_mask)?;
    let m = kind.num_coefficients();
    let n = samples.coords.len();
    if n < m {
        return Err(Error::Rank(format!("{n} usable pixels cannot determine a {kind:?} model")));
    }

    let (ata, atb) = normal_equations(kind, &samples, None);
    let eig = SymmetricEigen::new(ata.clone());
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e.abs())));
    if !(hi > 0.0) || lo <= RANK_TOLERANCE * hi {
        return Err(Error::Rank(format!("support of {n} pixels is degenerate for a {kind:?} model")));
    }
    let mut coef = solve(ata, &atb).ok_or_else(|| Error::Rank("normal equations are singular".into()))?;

    let residuals = residual_norms(kind, &samples, &coef);
    let sigma = match (config.loss, config.scale) {
        (_, Some(s)) => s,
        (RobustLoss::Huber, None) => 1.0,
        (RobustLoss::Tukey, None) => {
            // Floor keeps the cutoff positive when the initial fit is already exact.
            (median(&residuals) / RAYLEIGH_MEDIAN).max(1e-6)
        }
    };
    let loss = Loss {
        kind: config.loss,
        threshold: match config.loss {
            RobustLoss::Huber => sigma,
            RobustLoss::Tukey => TUKEY_EFFICIENCY * sigma,
        },
    };
    let objective = |res: &[f64]| res.iter().map(|&r| loss.rho(r)).sum::<f64>();

    let mut residuals = residuals;
    let mut obj = objective(&residuals);
    let mut history = vec![obj];
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=config.max_iterations {
        iterations = it;
        let weights: Vec<f64> = residuals.iter().map(|&r| loss.weight(r)).collect();
        let (ata, atb) = normal_equations(kind, &samples, Some(&weights));
        let Some(next) = solve(ata, &atb) else {
            break;
        };
        let next_res = residual_norms(kind, &samples, &next);
        let next_obj = objective(&next_res);
        if next_obj > obj {
            // fixed point up to rounding
            converged = true;
            break;
        }
        let step = next.iter().zip(&coef).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        coef = next;
        residuals = next_res;
        obj = next_obj;
        history.push(obj);
        if step < config.tolerance {
            converged = true;
            break;
        }
    }

    let inliers = residuals.iter().filter(|&&r| r < 3.0 * sigma).count();
    let model = MotionModel {
        kind,
        coefficients: denormalize(kind, &coef, samples.origin, samples.spread),
    };
    model.validate()?;
    Ok((
        model,
        FitDiagnostics {
            iterations,
            converged,
            objective: obj,
            objective_history: history,
            inlier_fraction: inliers as f64 / n as f64,
            scale: sigma,
            num_pixels: n,
        },
    ))
}

/// Splits `f` into `(head, expression)` with `head + expression == f` in f32.
///
/// `head` starts as the rounded model value and is nudged only when f32
/// rounding would otherwise break the identity. When `f` has low mantissa
/// bits set and the residual is large relative to `f`, no head value near the
/// model can satisfy the identity; the head is then moved toward `f` just far
/// enough that the expression part is exactly representable.
fn split_component(f: f32, model: f64) -> (f32, f32) {
    if !f.is_finite() || !model.is_finite() {
        return (f, 0.0);
    }
    let mut h = model as f32;
    for _ in 0..4 {
        let e = f - h;
        if h + e == f {
            return (h, e);
        }
        h = f - e;
    }
    // f = m * g with m odd; any h, e on grid g below b = 2^24 g are exact.
    let g = {
        let bits = f.to_bits();
        let exp = ((bits >> 23) & 0xff) as i32;
        let frac = bits & 0x7f_ffff;
        let (mant, e2) = if exp == 0 { (frac, -149) } else { (frac | 0x80_0000, exp - 150) };
        2f64.powi(e2 + mant.trailing_zeros() as i32)
    };
    let b = g * 16_777_216.0;
    let fd = f as f64;
    let reach = b - 2.0 * g;
    let target = model.clamp(fd - reach, fd + reach);
    let step = if target.abs() >= b { 2.0 * g } else { g };
    let h = ((target / step).round() * step) as f32;
    (h, f - h)
}

/// Head flow from `model` on the mask (or everywhere when `extrapolate`),
/// expression flow as the remainder. Invalid input pixels stay invalid in both.
pub fn decompose_flow(
    flow: &FlowField,
    face_mask: &Mask,
    model: &MotionModel,
    extrapolate: bool,
) -> Result<(FlowField, FlowField)> {
    model.validate()?;
    if (face_mask.width, face_mask.height) != (flow.width, flow.height) {
        return Err(Error::Shape("mask and flow dimensions differ".into()));
    }
    let mut head = FlowField::zeros(flow.width, flow.height);
    let mut expr = FlowField::zeros(flow.width, flow.height);
    for y in 0..flow.height {
        for x in 0..flow.width {
            let idx = y * flow.width + x;
            if !flow.valid[idx] {
                head.set_invalid(idx);
                expr.set_invalid(idx);
                continue;
            }
            let f = flow.data[idx];
            if face_mask.bits[idx] || extrapolate {
                let m = model.at_pixel(x, y);
                let (hu, eu) = split_component(f[0], m[0]);
                let (hv, ev) = split_component(f[1], m[1]);
                head.data[idx] = [hu, hv];
                expr.data[idx] = [eu, ev];
            } else {
                expr.data[idx] = f;
            }
        }
    }
    expr.occlusion = flow.occlusion.clone();
    Ok((head, expr))
}
