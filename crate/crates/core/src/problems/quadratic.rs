use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ClientFunction, Family, GeneratorParams, Oracle, ProblemInstance};
use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::rng;

const MAX_ATTEMPTS: usize = 10;

/// f_i(x) = (1/m) Σ_j ½ <A_ij (x - b_ij), x - b_ij> with diagonal A_ij ⪰ 0.
#[derive(Debug, Clone)]
pub struct QuadraticClient {
    d: usize,
    m: usize,
    /// Diagonals of A_ij, row-major m × d.
    a: Vec<f64>,
    /// Centers b_ij, row-major m × d.
    b: Vec<f64>,
    /// (1/m) Σ_j A_ij
    h: Vec<f64>,
    /// (1/m) Σ_j A_ij b_ij
    hb: Vec<f64>,
}

impl QuadraticClient {
    pub fn new(d: usize, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if d == 0 || a.is_empty() || a.len() % d != 0 {
            return Err(Error::param("quadratic client data must be a non-empty m × d array"));
        }
        check_dim(a.len(), b.len())?;
        if a.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::param("diagonal entries of A must be finite and non-negative"));
        }
        let m = a.len() / d;
        let mut h = vec![0.0; d];
        let mut hb = vec![0.0; d];
        for (aj, bj) in a.chunks_exact(d).zip(b.chunks_exact(d)) {
            for k in 0..d {
                h[k] += aj[k];
                hb[k] += aj[k] * bj[k];
            }
        }
        let mf = m as f64;
        h.iter_mut().for_each(|x| *x /= mf);
        hb.iter_mut().for_each(|x| *x /= mf);
        Ok(QuadraticClient { d, m, a, b, h, hb })
    }

    /// Single-term client ½ <diag(a)(x - b), x - b>.
    pub fn single(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        Self::new(a.len(), a, b)
    }

    pub fn hessian_diag(&self) -> &[f64] {
        &self.h
    }

    /// (1/m) Σ_j A_ij b_ij, so that ∇f_i(x) = H_i x - linear_term.
    pub fn linear_term(&self) -> &[f64] {
        &self.hb
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn m(&self) -> usize {
        self.m
    }
}

impl Oracle for QuadraticClient {
    fn dim(&self) -> usize {
        self.d
    }

    fn value(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (aj, bj) in self.a.chunks_exact(self.d).zip(self.b.chunks_exact(self.d)) {
            for k in 0..self.d {
                let e = x[k] - bj[k];
                acc += 0.5 * aj[k] * e * e;
            }
        }
        acc / self.m as f64
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        (0..self.d).map(|k| self.h[k] * x[k] - self.hb[k]).collect()
    }

    fn hess_vec(&self, _x: &[f64], v: &[f64]) -> Vec<f64> {
        self.h.iter().zip(v).map(|(h, v)| h * v).collect()
    }

    fn smoothness(&self) -> f64 {
        self.h.iter().copied().fold(0.0, f64::max)
    }

    fn convexity(&self) -> f64 {
        self.h.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn data_size(&self) -> usize {
        self.m
    }

    fn batch_grad(&self, x: &[f64], batch: &[usize]) -> Vec<f64> {
        let d = self.d;
        let mut g = vec![0.0; d];
        for &j in batch {
            let aj = &self.a[j * d..(j + 1) * d];
            let bj = &self.b[j * d..(j + 1) * d];
            for k in 0..d {
                g[k] += aj[k] * (x[k] - bj[k]);
            }
        }
        let c = batch.len() as f64;
        g.iter_mut().for_each(|x| *x /= c);
        g
    }

    fn prox_solve(&self, shift: &[f64], center: &[f64], lambda: f64) -> Option<Vec<f64>> {
        Some((0..self.d).map(|k| (self.hb[k] - shift[k] + lambda * center[k]) / (self.h[k] + lambda)).collect())
    }
}

/// Settings for the heterogeneous diagonal quadratic family.
///
/// Client Hessians share a base spectrum drawn from `[h_min, l_max]`; each
/// client and each data point adds an independent offset uniform in
/// `[-delta_target, delta_target]`, which controls the second-order
/// dissimilarity. Entries are clamped at zero and rescaled so the largest
/// entry of any A_ij equals `l_max` exactly. `ridge` is added to every entry
/// (inside the rescale), making each f_i ridge-strongly convex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadraticParams {
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub l_max: f64,
    pub delta_target: f64,
    pub h_min: f64,
    pub ridge: f64,
    pub b_scale: f64,
    pub seed: u64,
}

impl Default for QuadraticParams {
    fn default() -> Self {
        QuadraticParams {
            n: 10,
            m: 5,
            d: 50,
            l_max: 100.0,
            delta_target: 5.0,
            h_min: 5.0,
            ridge: 0.0,
            b_scale: 1.0,
            seed: 42,
        }
    }
}

impl QuadraticParams {
    /// Defaults scaled to `l_max`: offsets and base floor at `l_max / 20`.
    pub fn new(n: usize, m: usize, d: usize, l_max: f64, seed: u64) -> Self {
        QuadraticParams { n, m, d, l_max, delta_target: l_max / 20.0, h_min: l_max / 20.0, seed, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 || self.d == 0 {
            return Err(Error::param("quadratic generator needs n, m, d >= 1"));
        }
        if !(self.l_max > 0.0) {
            return Err(Error::param("l_max must be positive"));
        }
        if !(self.h_min >= 0.0 && self.h_min <= self.l_max) {
            return Err(Error::param("h_min must lie in [0, l_max]"));
        }
        if !(self.ridge >= 0.0 && self.ridge < self.l_max) {
            return Err(Error::param("ridge must lie in [0, l_max)"));
        }
        if !(self.delta_target >= 0.0) || !(self.b_scale >= 0.0) {
            return Err(Error::param("delta_target and b_scale must be non-negative"));
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<ProblemInstance> {
        self.validate()?;
        let (n, m, d) = (self.n, self.m, self.d);
        let w = self.delta_target;
        let mut last_bad = 0;
        for attempt in 0..MAX_ATTEMPTS {
            let mut rng = rng::stream(self.seed, attempt as u64, 0);
            let base: Vec<f64> = (0..d).map(|_| rng.random_range(self.h_min..=self.l_max)).collect();
            let mut raw = vec![0.0; n * m * d];
            for i in 0..n {
                let offset: Vec<f64> = (0..d).map(|_| uniform_sym(&mut rng, w)).collect();
                for j in 0..m {
                    for k in 0..d {
                        let v = base[k] + offset[k] + uniform_sym(&mut rng, w);
                        raw[(i * m + j) * d + k] = v.max(0.0);
                    }
                }
            }
            let top = raw.iter().copied().fold(0.0, f64::max);
            if top <= 0.0 {
                last_bad = 0;
                continue;
            }
            let factor = (self.l_max - self.ridge) / top;
            let a: Vec<f64> = raw.iter().map(|v| v * factor + self.ridge).collect();
            if let Some(k) = (0..d).find(|&k| (0..n * m).all(|r| a[r * d + k] <= 0.0)) {
                last_bad = k;
                continue;
            }
            let b: Vec<f64> = (0..n * m * d)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    self.b_scale * z
                })
                .collect();
            let clients = (0..n)
                .map(|i| {
                    let r = i * m * d..(i + 1) * m * d;
                    QuadraticClient::new(d, a[r.clone()].to_vec(), b[r].to_vec()).map(ClientFunction::Quadratic)
                })
                .collect::<Result<Vec<_>>>()?;
            let mut p = ProblemInstance::from_clients(clients)?;
            p.seed = self.seed;
            p.provenance = Some(GeneratorParams::Quadratic(self.clone()));
            solve_quadratic(&mut p)?;
            return Ok(p);
        }
        Err(Error::DegenerateCoordinate { coord: last_bad, attempts: MAX_ATTEMPTS })
    }
}

fn uniform_sym<R: Rng>(rng: &mut R, w: f64) -> f64 {
    if w == 0.0 {
        0.0
    } else {
        rng.random_range(-w..=w)
    }
}

/// Draw a quadratic population with the default dissimilarity settings.
pub fn gen_quadratic(n: usize, m: usize, d: usize, l_max: f64, seed: u64) -> Result<ProblemInstance> {
    QuadraticParams::new(n, m, d, l_max, seed).generate()
}

/// Exact per-coordinate solve of (Σ H_i) x = Σ H_i b_i; caches x*, f*.
pub(crate) fn solve_quadratic(p: &mut ProblemInstance) -> Result<()> {
    debug_assert_eq!(p.family, Family::Quadratic);
    let d = p.d;
    let mut x = vec![0.0; d];
    for (k, xk) in x.iter_mut().enumerate() {
        let mut h = 0.0;
        let mut hb = 0.0;
        for c in &p.clients {
            let q = c.as_quadratic().expect("quadratic family");
            h += q.hessian_diag()[k];
            hb += q.linear_term()[k];
        }
        if !(h > 0.0) {
            return Err(Error::DegenerateCoordinate { coord: k, attempts: 1 });
        }
        *xk = hb / h;
    }
    let f = p.value(&x);
    debug_assert!(linalg::is_finite(&x));
    p.x_star = Some(x);
    p.f_star = Some(f);
    Ok(())
}
