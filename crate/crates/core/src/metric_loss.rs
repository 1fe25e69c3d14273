//! Triplet objectives over embedding batches.
//!
//! With `δ₊ = d(a,p)`, `δ₋ = d(a,n)` and `ρ = d(p,n)` (plain Euclidean
//! distances, not squared), the per-triplet terms are
//!
//! - `triplet`:  `[δ₊ − δ₋ + ε₀]⁺`
//! - `proposed`: `[δ₊ − δ₋ + ε₀]⁺ + (ρ − δ₋)²`
//! - `swap`:     `[δ₊ − min(δ₋, ρ) + ε₀]⁺`
//!
//! and every batch value is the mean over triplets.
//!
//! The proposed objective is zero exactly when each triplet has `ρ = δ₋` and
//! `δ₋ ≥ δ₊ + ε₀`, which forces the positive–negative gap `ρ ≥ δ₊ + ε₀`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    Proposed,
    Triplet,
    Swap,
}

impl LossKind {
    pub const ALL: [LossKind; 3] = [LossKind::Proposed, LossKind::Triplet, LossKind::Swap];

    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Proposed => "proposed",
            LossKind::Triplet => "triplet",
            LossKind::Swap => "swap",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(LossKind::Proposed),
            "triplet" => Ok(LossKind::Triplet),
            "swap" => Ok(LossKind::Swap),
            other => Err(Error::InvalidConfig(format!(
                "unknown loss `{other}` (expected proposed | triplet | swap)"
            ))),
        }
    }
}

/// Row `i` of each matrix belongs to triplet `i`.
#[derive(Debug, Clone)]
pub struct TripletBatch {
    pub anchor: Matrix,
    pub positive: Matrix,
    pub negative: Matrix,
}

impl TripletBatch {
    pub fn new(anchor: Matrix, positive: Matrix, negative: Matrix) -> Result<Self> {
        let batch = Self {
            anchor,
            positive,
            negative,
        };
        batch.check()?;
        Ok(batch)
    }

    fn check(&self) -> Result<()> {
        let s = self.anchor.shape();
        if self.positive.shape() != s || self.negative.shape() != s {
            return Err(Error::dim(format!(
                "triplet roles have shapes {:?}/{:?}/{:?}",
                s,
                self.positive.shape(),
                self.negative.shape()
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.anchor.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub total: f64,
    pub mean_hinge: f64,
    pub mean_reg: f64,
    pub hinge: Vec<f64>,
    pub reg: Vec<f64>,
    pub delta_pos: Vec<f64>,
    pub delta_neg: Vec<f64>,
    pub rho: Vec<f64>,
    pub margin: f64,
}

#[derive(Debug, Clone)]
pub struct TripletGrads {
    pub anchor: Matrix,
    pub positive: Matrix,
    pub negative: Matrix,
}

pub fn euclidean_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::dim(format!("vectors of length {} and {}", u.len(), v.len())));
    }
    Ok(dist(u, v))
}

#[inline]
fn dist(u: &[f64], v: &[f64]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

fn check_margin(eps0: f64) -> Result<()> {
    if !(eps0 > 0.0 && eps0.is_finite()) {
        return Err(Error::InvalidConfig(format!("margin must be positive, got {eps0}")));
    }
    Ok(())
}

struct Terms {
    hinge: f64,
    reg: f64,
}

fn terms(kind: LossKind, dp: f64, dn: f64, rho: f64, eps0: f64) -> Terms {
    match kind {
        LossKind::Triplet => Terms {
            hinge: (dp - dn + eps0).max(0.0),
            reg: 0.0,
        },
        LossKind::Proposed => Terms {
            hinge: (dp - dn + eps0).max(0.0),
            reg: (rho - dn) * (rho - dn),
        },
        LossKind::Swap => Terms {
            hinge: (dp - dn.min(rho) + eps0).max(0.0),
            reg: 0.0,
        },
    }
}

pub fn evaluate_loss(batch: &TripletBatch, eps0: f64, kind: LossKind) -> Result<LossReport> {
    batch.check()?;
    check_margin(eps0)?;
    let n = batch.len();
    let mut report = LossReport {
        total: 0.0,
        mean_hinge: 0.0,
        mean_reg: 0.0,
        hinge: Vec::with_capacity(n),
        reg: Vec::with_capacity(n),
        delta_pos: Vec::with_capacity(n),
        delta_neg: Vec::with_capacity(n),
        rho: Vec::with_capacity(n),
        margin: eps0,
    };
    for i in 0..n {
        let (a, p, q) = (batch.anchor.row(i), batch.positive.row(i), batch.negative.row(i));
        let (dp, dn, rho) = (dist(a, p), dist(a, q), dist(p, q));
        let t = terms(kind, dp, dn, rho, eps0);
        report.hinge.push(t.hinge);
        report.reg.push(t.reg);
        report.delta_pos.push(dp);
        report.delta_neg.push(dn);
        report.rho.push(rho);
    }
    if n > 0 {
        report.mean_hinge = report.hinge.iter().sum::<f64>() / n as f64;
        report.mean_reg = report.reg.iter().sum::<f64>() / n as f64;
    }
    report.total = report.mean_hinge + report.mean_reg;
    Ok(report)
}

pub fn triplet_loss(batch: &TripletBatch, eps0: f64) -> Result<LossReport> {
    evaluate_loss(batch, eps0, LossKind::Triplet)
}

pub fn proposed_loss(batch: &TripletBatch, eps0: f64) -> Result<LossReport> {
    evaluate_loss(batch, eps0, LossKind::Proposed)
}

pub fn swap_triplet_loss(batch: &TripletBatch, eps0: f64) -> Result<LossReport> {
    evaluate_loss(batch, eps0, LossKind::Swap)
}

/// Adds `coef · ∂d(u,v)/∂u` to `gu` and its negation to `gv`.
/// Coincident points contribute nothing.
fn push_distance_grad(coef: f64, u: &[f64], v: &[f64], d: f64, gu: &mut [f64], gv: &mut [f64]) {
    if coef == 0.0 || d == 0.0 {
        return;
    }
    let s = coef / d;
    for k in 0..u.len() {
        let g = s * (u[k] - v[k]);
        gu[k] += g;
        gv[k] -= g;
    }
}

/// Gradient of the batch-mean loss with respect to each role's embeddings.
///
/// The hinge contributes nothing when its argument is `≤ 0`; in the swap
/// loss a tie `δ₋ = ρ` routes the gradient through `δ₋`.
pub fn loss_gradients(batch: &TripletBatch, eps0: f64, kind: LossKind) -> Result<TripletGrads> {
    batch.check()?;
    check_margin(eps0)?;
    let (n, d) = batch.anchor.shape();
    let mut ga = Matrix::zeros(n, d);
    let mut gp = Matrix::zeros(n, d);
    let mut gn = Matrix::zeros(n, d);
    let inv_n = if n > 0 { 1.0 / n as f64 } else { 0.0 };
    for i in 0..n {
        let (a, p, q) = (batch.anchor.row(i), batch.positive.row(i), batch.negative.row(i));
        let (dp, dn, rho) = (dist(a, p), dist(a, q), dist(p, q));

        let (mut c_pos, mut c_neg, mut c_rho) = (0.0, 0.0, 0.0);
        match kind {
            LossKind::Triplet | LossKind::Proposed => {
                if dp - dn + eps0 > 0.0 {
                    c_pos += 1.0;
                    c_neg -= 1.0;
                }
                if kind == LossKind::Proposed {
                    let r = 2.0 * (rho - dn);
                    c_rho += r;
                    c_neg -= r;
                }
            }
            LossKind::Swap => {
                if dp - dn.min(rho) + eps0 > 0.0 {
                    c_pos += 1.0;
                    if dn <= rho {
                        c_neg -= 1.0;
                    } else {
                        c_rho -= 1.0;
                    }
                }
            }
        }

        let (mut ra, mut rp, mut rn) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
        push_distance_grad(c_pos * inv_n, a, p, dp, &mut ra, &mut rp);
        push_distance_grad(c_neg * inv_n, a, q, dn, &mut ra, &mut rn);
        push_distance_grad(c_rho * inv_n, p, q, rho, &mut rp, &mut rn);
        ga.row_mut(i).copy_from_slice(&ra);
        gp.row_mut(i).copy_from_slice(&rp);
        gn.row_mut(i).copy_from_slice(&rn);
    }
    Ok(TripletGrads {
        anchor: ga,
        positive: gp,
        negative: gn,
    })
}
