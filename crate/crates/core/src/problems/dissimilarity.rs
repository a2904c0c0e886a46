//! Dissimilarity constants of a client population.
//!
//! For a subset S of size s, h_i^S = f_S - f_i and m_S = f - f_S. The
//! second-order dissimilarity δ_s bounds the average Lipschitz constant of
//! ∇h_i^S over i ∈ S, the external dissimilarity Δ_s bounds that of ∇m_S,
//! and ζ bounds the spread of client gradients around ∇f.
//!
//! Subsets are enumerated when C(n, s) ≤ [`SUBSET_ENUMERATION_CAP`] and
//! sampled otherwise, in which case the result is a lower bound.

use std::collections::BTreeMap;

use itertools::Itertools;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Oracle, ProblemInstance};
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::{self, SimRng};
use crate::sampling::{binomial, sample_subset};

pub const SUBSET_ENUMERATION_CAP: u64 = 10_000;
pub const SUBSET_SAMPLES: usize = 256;

const PROBE_LANE: u64 = 1;
const RADIUS_GROWTH_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMode {
    /// Closed form for diagonal quadratics.
    ExactQuadratic,
    /// Largest eigenvalue of the Hessian deviation at probe points.
    PowerIteration,
    /// Supremum of gradient-difference ratios over random probe pairs.
    ProbeEstimate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateOptions {
    pub probes: usize,
    pub seed: u64,
    pub power_iters: usize,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions { probes: 32, seed: 0, power_iters: 300 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub mode: EstimateMode,
    pub subsets: usize,
    /// True when the value may underestimate the supremum: sampled subsets
    /// or probe-based modes.
    pub lower_bound: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BgvEstimate {
    pub zeta: f64,
    pub probes: usize,
    pub radius: f64,
    /// Set when ζ measured at twice the probe radius exceeds ζ at the probe
    /// radius by more than 10%, suggesting no global bound exists.
    pub unbounded_suspected: bool,
    /// Quadratics only: an upper bound on ζ over the whole probe ball,
    /// δ_n · radius + ζ(center), from the triangle inequality.
    pub ball_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissimilarityReport {
    pub method: EstimateMode,
    pub probes: usize,
    pub delta_s: BTreeMap<usize, f64>,
    #[serde(rename = "Delta_s")]
    pub ext_delta_s: BTreeMap<usize, f64>,
    pub delta_max: f64,
    pub zeta: f64,
    pub zeta_unbounded_suspected: bool,
    pub lower_bound: bool,
}

/// Subsets to scan, plus whether they cover every subset.
fn subsets(n: usize, s: usize, seed: u64) -> Result<(Vec<Vec<usize>>, bool)> {
    if s == 0 || s > n {
        return Err(Error::param(format!("subset size s={s} must lie in [1, n={n}]")));
    }
    match binomial(n, s) {
        Some(c) if c <= SUBSET_ENUMERATION_CAP => Ok(((0..n).combinations(s).collect(), true)),
        _ => {
            let mut r = rng::stream(seed, 0, rng::SAMPLING_LANE);
            let draws = (0..SUBSET_SAMPLES)
                .map(|_| sample_subset(n, s, &mut r).map(|d| d.ids))
                .collect::<Result<Vec<_>>>()?;
            Ok((draws, false))
        }
    }
}

fn subset_mean(vectors: &[Vec<f64>], subset: &[usize], d: usize) -> Vec<f64> {
    linalg::mean(subset.iter().map(|&i| &vectors[i]), d)
}

fn require_quadratic(p: &ProblemInstance) -> Result<Vec<Vec<f64>>> {
    p.quadratic_hessians()
        .map(|hs| hs.into_iter().map(<[f64]>::to_vec).collect())
        .ok_or_else(|| Error::param("exact_quadratic mode needs an all-quadratic instance"))
}

fn probe_center(p: &ProblemInstance) -> (Vec<f64>, f64) {
    match &p.x_star {
        Some(x) => (x.clone(), linalg::norm(x).max(1.0)),
        None => (vec![0.0; p.d], 1.0),
    }
}

fn random_direction(d: usize, rng: &mut SimRng) -> Vec<f64> {
    loop {
        let u: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut *rng)).collect();
        let nu = linalg::norm(&u);
        if nu > 0.0 {
            return linalg::scale(&u, 1.0 / nu);
        }
    }
}

/// Probe pairs (x, y) with x within the probe radius of the reference point
/// and y at a random distance from x.
fn probe_pairs(p: &ProblemInstance, probes: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let (center, radius) = probe_center(p);
    let mut r = rng::stream(seed, 0, PROBE_LANE);
    (0..probes)
        .map(|_| {
            let mut x = center.clone();
            let t: f64 = r.random_range(0.0..=1.0);
            linalg::axpy(radius * t, &random_direction(p.d, &mut r), &mut x);
            let mut y = x.clone();
            let step: f64 = r.random_range(1e-3..=1.0);
            linalg::axpy(radius * step, &random_direction(p.d, &mut r), &mut y);
            (x, y)
        })
        .collect()
}

fn probe_points(p: &ProblemInstance, probes: usize, seed: u64) -> Vec<Vec<f64>> {
    probe_pairs(p, probes, seed).into_iter().map(|(x, _)| x).collect()
}

#[derive(Clone, Copy)]
enum Kind {
    Sod,
    Ed,
}

fn estimate(p: &ProblemInstance, s: usize, mode: EstimateMode, opts: &EstimateOptions, kind: Kind) -> Result<Estimate> {
    let n = p.n();
    let d = p.d;
    let (sets, exhaustive) = subsets(n, s, opts.seed)?;
    let value = match mode {
        EstimateMode::ExactQuadratic => {
            let hs = require_quadratic(p)?;
            let full = linalg::mean(&hs, d);
            let mut best = 0.0f64;
            for set in &sets {
                let hsub = subset_mean(&hs, set, d);
                for k in 0..d {
                    let v = match kind {
                        Kind::Sod => {
                            set.iter().map(|&i| (hsub[k] - hs[i][k]).powi(2)).sum::<f64>() / s as f64
                        }
                        Kind::Ed => (full[k] - hsub[k]).powi(2),
                    };
                    best = best.max(v);
                }
            }
            best.sqrt()
        }
        EstimateMode::ProbeEstimate => {
            let mut best = 0.0f64;
            for (x, y) in probe_pairs(p, opts.probes.max(1), opts.seed) {
                let dxy = linalg::dist_sq(&x, &y);
                if dxy == 0.0 {
                    continue;
                }
                let diffs: Vec<Vec<f64>> =
                    p.clients.iter().map(|c| linalg::sub(&c.grad(&x), &c.grad(&y))).collect();
                let full = linalg::mean(&diffs, d);
                for set in &sets {
                    let dsub = subset_mean(&diffs, set, d);
                    let num = match kind {
                        Kind::Sod => set.iter().map(|&i| linalg::dist_sq(&dsub, &diffs[i])).sum::<f64>() / s as f64,
                        Kind::Ed => linalg::dist_sq(&full, &dsub),
                    };
                    best = best.max(num / dxy);
                }
            }
            best.sqrt()
        }
        EstimateMode::PowerIteration => {
            let mut best = 0.0f64;
            for x in probe_points(p, opts.probes.max(1), opts.seed) {
                for set in &sets {
                    let rho = linalg::power_iteration(
                        d,
                        |v| deviation_gram(p, set, &x, v, kind),
                        opts.power_iters,
                        1e-10,
                    );
                    best = best.max(rho);
                }
            }
            best.max(0.0).sqrt()
        }
    };
    Ok(Estimate { value, mode, subsets: sets.len(), lower_bound: !exhaustive || mode != EstimateMode::ExactQuadratic })
}

/// Action of (1/s) Σ D_iᵀ D_i (SOD) or DᵀD (ED) for the Hessian deviations at x.
fn deviation_gram(p: &ProblemInstance, set: &[usize], x: &[f64], v: &[f64], kind: Kind) -> Vec<f64> {
    let d = p.d;
    let hv: Vec<Vec<f64>> = p.clients.iter().map(|c| c.hess_vec(x, v)).collect();
    let hsub = subset_mean(&hv, set, d);
    match kind {
        Kind::Sod => {
            // (1/s) Σ D_i² = (1/s) Σ H_i² - H_S², with D_i = H_S - H_i.
            let sq: Vec<Vec<f64>> = set.iter().map(|&i| p.clients[i].hess_vec(x, &hv[i])).collect();
            let hs_hsub: Vec<Vec<f64>> = set.iter().map(|&i| p.clients[i].hess_vec(x, &hsub)).collect();
            linalg::sub(&linalg::mean(&sq, d), &linalg::mean(&hs_hsub, d))
        }
        Kind::Ed => {
            let full = linalg::mean(&hv, d);
            let w = linalg::sub(&full, &hsub);
            let hw: Vec<Vec<f64>> = p.clients.iter().map(|c| c.hess_vec(x, &w)).collect();
            linalg::sub(&linalg::mean(&hw, d), &subset_mean(&hw, set, d))
        }
    }
}

/// δ_s with default options.
pub fn estimate_sod(p: &ProblemInstance, s: usize, mode: EstimateMode) -> Result<f64> {
    estimate_sod_with(p, s, mode, &EstimateOptions { seed: p.seed, ..Default::default() }).map(|e| e.value)
}

pub fn estimate_sod_with(p: &ProblemInstance, s: usize, mode: EstimateMode, opts: &EstimateOptions) -> Result<Estimate> {
    estimate(p, s, mode, opts, Kind::Sod)
}

/// Δ_s with default options.
pub fn estimate_ed(p: &ProblemInstance, s: usize, mode: EstimateMode) -> Result<f64> {
    estimate_ed_with(p, s, mode, &EstimateOptions { seed: p.seed, ..Default::default() }).map(|e| e.value)
}

pub fn estimate_ed_with(p: &ProblemInstance, s: usize, mode: EstimateMode, opts: &EstimateOptions) -> Result<Estimate> {
    estimate(p, s, mode, opts, Kind::Ed)
}

/// δ_max: the largest Lipschitz constant of ∇(f - f_i) over clients.
pub fn estimate_delta_max(p: &ProblemInstance, mode: EstimateMode, opts: &EstimateOptions) -> Result<Estimate> {
    let n = p.n();
    let d = p.d;
    let value = match mode {
        EstimateMode::ExactQuadratic => {
            let hs = require_quadratic(p)?;
            let full = linalg::mean(&hs, d);
            hs.iter()
                .flat_map(|h| h.iter().zip(&full).map(|(a, b)| (b - a).abs()))
                .fold(0.0, f64::max)
        }
        EstimateMode::ProbeEstimate => {
            let mut best = 0.0f64;
            for (x, y) in probe_pairs(p, opts.probes.max(1), opts.seed) {
                let dxy = linalg::dist(&x, &y);
                if dxy == 0.0 {
                    continue;
                }
                let diffs: Vec<Vec<f64>> =
                    p.clients.iter().map(|c| linalg::sub(&c.grad(&x), &c.grad(&y))).collect();
                let full = linalg::mean(&diffs, d);
                for dfi in &diffs {
                    best = best.max(linalg::dist(&full, dfi) / dxy);
                }
            }
            best
        }
        EstimateMode::PowerIteration => {
            let mut best = 0.0f64;
            for x in probe_points(p, opts.probes.max(1), opts.seed) {
                for i in 0..n {
                    let dev = |v: &[f64]| {
                        let hv: Vec<Vec<f64>> = p.clients.iter().map(|c| c.hess_vec(&x, v)).collect();
                        linalg::sub(&linalg::mean(&hv, d), &hv[i])
                    };
                    let rho = linalg::power_iteration(d, |v| dev(&dev(v)), opts.power_iters, 1e-10);
                    best = best.max(rho.max(0.0).sqrt());
                }
            }
            best
        }
    };
    Ok(Estimate { value, mode, subsets: n, lower_bound: mode != EstimateMode::ExactQuadratic })
}

fn bgv_at(p: &ProblemInstance, points: &[Vec<f64>]) -> f64 {
    let mut best = 0.0f64;
    for x in points {
        let grads = p.client_grads(x);
        let g = linalg::mean(&grads, p.d);
        let var = grads.iter().map(|gi| linalg::dist_sq(gi, &g)).sum::<f64>() / p.n() as f64;
        best = best.max(var);
    }
    best.sqrt()
}

/// ζ as the largest gradient spread over the reference point and `probes`
/// points on the sphere of the probe radius around it. An estimate only.
pub fn estimate_bgv(p: &ProblemInstance, probes: usize) -> Result<BgvEstimate> {
    if probes == 0 {
        return Err(Error::param("estimate_bgv needs at least one probe"));
    }
    let (center, radius) = probe_center(p);
    let mut r = rng::stream(p.seed, 1, PROBE_LANE);
    let dirs: Vec<Vec<f64>> = (0..probes).map(|_| random_direction(p.d, &mut r)).collect();
    let at = |rad: f64| -> Vec<Vec<f64>> {
        let mut pts = vec![center.clone()];
        for u in &dirs {
            let mut x = center.clone();
            linalg::axpy(rad, u, &mut x);
            pts.push(x);
        }
        pts
    };
    let zeta = bgv_at(p, &at(radius));
    let zeta_far = bgv_at(p, &at(2.0 * radius));
    let ball_bound = if p.all_quadratic() {
        let delta = estimate_sod_with(p, p.n(), EstimateMode::ExactQuadratic, &EstimateOptions::default())?.value;
        Some(delta * radius + bgv_at(p, std::slice::from_ref(&center)))
    } else {
        None
    };
    Ok(BgvEstimate {
        zeta,
        probes,
        radius,
        unbounded_suspected: zeta_far > (1.0 + RADIUS_GROWTH_TOLERANCE) * zeta,
        ball_bound,
    })
}

/// δ_s and Δ_s for each requested s, plus δ_max and ζ.
pub fn dissimilarity_report(
    p: &ProblemInstance,
    s_values: &[usize],
    mode: EstimateMode,
    opts: &EstimateOptions,
) -> Result<DissimilarityReport> {
    let mut delta_s = BTreeMap::new();
    let mut ext_delta_s = BTreeMap::new();
    let mut lower_bound = false;
    for &s in s_values {
        let sod = estimate_sod_with(p, s, mode, opts)?;
        let ed = estimate_ed_with(p, s, mode, opts)?;
        lower_bound |= sod.lower_bound || ed.lower_bound;
        delta_s.insert(s, sod.value);
        ext_delta_s.insert(s, ed.value);
    }
    let dmax = estimate_delta_max(p, mode, opts)?;
    let bgv = estimate_bgv(p, opts.probes.max(1))?;
    Ok(DissimilarityReport {
        method: mode,
        probes: opts.probes,
        delta_s,
        ext_delta_s,
        delta_max: dmax.value,
        zeta: bgv.zeta,
        zeta_unbounded_suspected: bgv.unbounded_suspected,
        lower_bound: lower_bound || dmax.lower_bound,
    })
}
