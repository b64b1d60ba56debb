//! M-step maximizers: penalized Newton/IRLS for the logistic and gamma
//! blocks, the 1-D dispersion search, and the correlation cubic.

use nalgebra::{DMatrix, DVector};

use crate::centrality::DesignMatrix;
use crate::error::{Error, Result};
use crate::likelihood::{dot, dot3};
use crate::special::{ln_gamma, ln_logistic, ln_one_minus_logistic, logistic, ETA_BOUND};

/// One augmented observation of a retained draw: the connection's latent
/// values, the E-step claim weight and the (observed or imputed) gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Augmented {
    pub latent: [f64; 3],
    pub weight: f64,
    pub gap: f64,
}

/// Coefficients are kept within this magnitude; larger values only arise on
/// separable data.
pub const COEF_BOUND: f64 = 30.0;

const MAX_HALVINGS: usize = 20;
const RIDGE: f64 = 1e-8;

/// Which of the `p + 3` coefficients take part in a Newton system. Inactive
/// coefficients keep their starting value (all-zero design columns, or the
/// latent loadings of the GLM reduction).
pub fn active_mask(design: &DesignMatrix, latent_effects: bool) -> Vec<bool> {
    let mut mask: Vec<bool> = (0..design.p).map(|j| design.column(j).any(|x| x != 0.0)).collect();
    mask.extend([latent_effects; 3]);
    mask
}

/// Gradient and Hessian accumulator over design rows and retained draws.
/// The fixed-by-fixed block sums the per-draw weights first, so each
/// connection costs one `p x p` outer product regardless of the draw count.
struct Moments {
    p: usize,
    grad: Vec<f64>,
    hess: DMatrix<f64>,
}

impl Moments {
    fn new(p: usize) -> Self {
        Self {
            p,
            grad: vec![0.0; p + 3],
            hess: DMatrix::zeros(p + 3, p + 3),
        }
    }

    /// Adds connection `x` with per-draw latent rows and `(g, h)` weights:
    /// gradient `g x̄`, Hessian `h x̄ x̄ᵀ`.
    fn add(&mut self, x: &[f64], per_draw: &[([f64; 3], f64, f64)]) {
        let p = self.p;
        let mut g_sum = 0.0;
        let mut h_sum = 0.0;
        let mut hl = [0.0; 3];
        for &(l, g, h) in per_draw {
            g_sum += g;
            h_sum += h;
            for a in 0..3 {
                self.grad[p + a] += g * l[a];
                hl[a] += h * l[a];
                for b in a..3 {
                    self.hess[(p + a, p + b)] += h * l[a] * l[b];
                }
            }
        }
        if h_sum != 0.0 || g_sum != 0.0 {
            for i in 0..p {
                if x[i] == 0.0 {
                    continue;
                }
                self.grad[i] += g_sum * x[i];
                let hx = h_sum * x[i];
                for j in i..p {
                    self.hess[(i, j)] += hx * x[j];
                }
                for a in 0..3 {
                    self.hess[(i, p + a)] += x[i] * hl[a];
                }
            }
        }
    }

    fn finish(mut self, scale: f64) -> (Vec<f64>, DMatrix<f64>) {
        let q = self.p + 3;
        for i in 0..q {
            for j in i..q {
                let v = self.hess[(i, j)] * scale;
                self.hess[(i, j)] = v;
                self.hess[(j, i)] = v;
            }
        }
        self.grad.iter_mut().for_each(|g| *g *= scale);
        (self.grad, self.hess)
    }
}

/// The logistic block `Q1(alpha, beta)` of one M-step.
pub struct LogisticProblem<'a> {
    pub design: &'a DesignMatrix,
    pub draws: &'a [Vec<Augmented>],
    /// `lambda |C|`; the penalty is `lambda |C| |beta|^2`.
    pub penalty: f64,
}

impl LogisticProblem<'_> {
    fn scale(&self) -> f64 {
        1.0 / self.draws.len() as f64
    }

    pub fn objective(&self, coef: &[f64]) -> f64 {
        let p = self.design.p;
        let beta = [coef[p], coef[p + 1], coef[p + 2]];
        let mut total = 0.0;
        for k in 0..self.design.n {
            let fixed = dot(self.design.row(k), &coef[..p]);
            for draw in self.draws {
                let a = draw[k];
                let eta = fixed + dot3(&a.latent, &beta);
                total += a.weight * ln_logistic(eta) + (1.0 - a.weight) * ln_one_minus_logistic(eta);
            }
        }
        total * self.scale() - self.penalty * beta.iter().map(|b| b * b).sum::<f64>()
    }

    pub fn gradient_hessian(&self, coef: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
        let p = self.design.p;
        let beta = [coef[p], coef[p + 1], coef[p + 2]];
        let mut m = Moments::new(p);
        let mut per_draw = Vec::with_capacity(self.draws.len());
        for k in 0..self.design.n {
            let x = self.design.row(k);
            let fixed = dot(x, &coef[..p]);
            per_draw.clear();
            for draw in self.draws {
                let a = draw[k];
                let eta = fixed + dot3(&a.latent, &beta);
                let pk = logistic(eta);
                per_draw.push((a.latent, a.weight - pk, -pk * (1.0 - pk)));
            }
            m.add(x, &per_draw);
        }
        let (mut g, mut h) = m.finish(self.scale());
        for a in 0..3 {
            g[p + a] -= 2.0 * self.penalty * beta[a];
            h[(p + a, p + a)] -= 2.0 * self.penalty;
        }
        (g, h)
    }
}

/// The gamma block `Q2(gamma, nu, psi)` of one M-step.
pub struct GammaProblem<'a> {
    pub design: &'a DesignMatrix,
    pub draws: &'a [Vec<Augmented>],
    pub penalty: f64,
}

/// Weighted sums that make `Q2` closed-form in `psi`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GammaSums {
    /// `sum w`
    pub w: f64,
    /// `sum w eta`
    pub eta: f64,
    /// `sum w ln T`
    pub ln_t: f64,
    /// `sum w T e^-eta`
    pub ratio: f64,
}

impl GammaSums {
    /// `Q2` as a function of `psi` (without the penalty), per retained draw.
    pub fn q2(&self, psi: f64, draws: usize) -> f64 {
        if self.w == 0.0 {
            return 0.0;
        }
        let a = 1.0 / psi;
        (-self.w * ln_gamma(a) - self.w * a * psi.ln() - a * self.eta + (a - 1.0) * self.ln_t - a * self.ratio)
            / draws as f64
    }
}

impl GammaProblem<'_> {
    fn scale(&self) -> f64 {
        1.0 / self.draws.len() as f64
    }

    pub fn sums(&self, coef: &[f64]) -> GammaSums {
        let p = self.design.p;
        let nu = [coef[p], coef[p + 1], coef[p + 2]];
        let mut s = GammaSums::default();
        for k in 0..self.design.n {
            let fixed = dot(self.design.row(k), &coef[..p]);
            for draw in self.draws {
                let a = draw[k];
                if a.weight == 0.0 {
                    continue;
                }
                let eta = (fixed + dot3(&a.latent, &nu)).clamp(-ETA_BOUND, ETA_BOUND);
                s.w += a.weight;
                s.eta += a.weight * eta;
                s.ln_t += a.weight * a.gap.ln();
                s.ratio += a.weight * a.gap * (-eta).exp();
            }
        }
        s
    }

    pub fn objective(&self, coef: &[f64], psi: f64) -> f64 {
        let p = self.design.p;
        let pen: f64 = coef[p..p + 3].iter().map(|v| v * v).sum();
        self.sums(coef).q2(psi, self.draws.len()) - self.penalty * pen
    }

    /// Gradient and exact Hessian in `(gamma, nu)` at fixed `psi`.
    pub fn gradient_hessian(&self, coef: &[f64], psi: f64) -> (Vec<f64>, DMatrix<f64>) {
        let p = self.design.p;
        let nu = [coef[p], coef[p + 1], coef[p + 2]];
        let mut m = Moments::new(p);
        let mut per_draw = Vec::with_capacity(self.draws.len());
        for k in 0..self.design.n {
            let x = self.design.row(k);
            let fixed = dot(x, &coef[..p]);
            per_draw.clear();
            for draw in self.draws {
                let a = draw[k];
                if a.weight == 0.0 {
                    continue;
                }
                let eta = (fixed + dot3(&a.latent, &nu)).clamp(-ETA_BOUND, ETA_BOUND);
                let r = a.gap * (-eta).exp();
                per_draw.push((a.latent, a.weight * (r - 1.0) / psi, -a.weight * r / psi));
            }
            if !per_draw.is_empty() {
                m.add(x, &per_draw);
            }
        }
        let (mut g, mut h) = m.finish(self.scale());
        for a in 0..3 {
            g[p + a] -= 2.0 * self.penalty * nu[a];
            h[(p + a, p + a)] -= 2.0 * self.penalty;
        }
        (g, h)
    }
}

/// Outcome of a Newton maximization.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonResult {
    pub coef: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Whether any coefficient hit [`COEF_BOUND`].
    pub capped: bool,
}

/// Solves `(-H) d = g` on the active coordinates, retrying once with a ridge.
fn newton_direction(g: &[f64], h: &DMatrix<f64>, active: &[usize]) -> Result<Vec<f64>> {
    let m = active.len();
    let neg_h = DMatrix::from_fn(m, m, |i, j| -h[(active[i], active[j])]);
    let rhs = DVector::from_iterator(m, active.iter().map(|&i| g[i]));
    let solve = |mat: DMatrix<f64>| mat.cholesky().map(|c| c.solve(&rhs));
    let sol = match solve(neg_h.clone()) {
        Some(s) => s,
        None => {
            let scale = (0..m).map(|i| neg_h[(i, i)].abs()).fold(1.0f64, f64::max);
            let ridged = neg_h + DMatrix::identity(m, m) * (RIDGE * scale);
            solve(ridged).ok_or_else(|| Error::Numerical("Hessian is singular even after a ridge retry".into()))?
        }
    };
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("Newton direction is not finite".into()));
    }
    let mut d = vec![0.0; g.len()];
    for (i, &a) in active.iter().enumerate() {
        d[a] = sol[i];
    }
    Ok(d)
}

/// Damped Newton ascent with step halving on the active coordinates.
pub fn newton_maximize(
    objective: impl Fn(&[f64]) -> f64,
    gradient_hessian: impl Fn(&[f64]) -> (Vec<f64>, DMatrix<f64>),
    start: &[f64],
    mask: &[bool],
    tol: f64,
    max_iter: usize,
) -> Result<NewtonResult> {
    let active: Vec<usize> = (0..start.len()).filter(|&i| mask[i]).collect();
    let mut coef = start.to_vec();
    let mut current = objective(&coef);
    if !current.is_finite() {
        return Err(Error::Numerical("objective is not finite at the starting point".into()));
    }
    let mut capped = false;
    for it in 1..=max_iter {
        let (g, h) = gradient_hessian(&coef);
        let d = newton_direction(&g, &h, &active)?;
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = coef
                .iter()
                .zip(&d)
                .map(|(c, di)| (c + step * di).clamp(-COEF_BOUND, COEF_BOUND))
                .collect();
            let value = objective(&trial);
            if value.is_finite() && value >= current - 1e-12 * current.abs().max(1.0) {
                accepted = Some((trial, value));
                break;
            }
            step *= 0.5;
        }
        let Some((trial, value)) = accepted else {
            return Ok(NewtonResult {
                coef,
                iterations: it,
                converged: true,
                capped,
            });
        };
        let change = trial.iter().zip(&coef).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if trial.iter().any(|c| c.abs() >= COEF_BOUND) {
            capped = true;
        }
        coef = trial;
        current = value;
        if change < tol {
            return Ok(NewtonResult {
                coef,
                iterations: it,
                converged: true,
                capped,
            });
        }
    }
    Ok(NewtonResult {
        coef,
        iterations: max_iter,
        converged: false,
        capped,
    })
}

/// Maximizes `Q2` over `psi` by golden-section search on `ln psi`, starting
/// from the bracket `psi_prev * [1/8, 8]` and expanding it while the maximum
/// sits on an edge.
pub fn maximize_psi(sums: &GammaSums, draws: usize, psi_prev: f64) -> Result<f64> {
    let f = |u: f64| sums.q2(u.exp(), draws);
    let width = 8f64.ln();
    let mut lo = psi_prev.ln() - width;
    let mut hi = psi_prev.ln() + width;
    for _ in 0..40 {
        let u = golden_section(&f, lo, hi, 1e-10);
        if u - lo < 1e-6 {
            lo -= 2.0 * width;
            continue;
        }
        if hi - u < 1e-6 {
            hi += 2.0 * width;
            continue;
        }
        return Ok(u.exp());
    }
    Err(Error::Numerical("dispersion bracket expansion failed".into()))
}

fn golden_section(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Second moments of the retained buyer/seller draws, averaged over draws
/// and entities.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RhoStats {
    pub bb: f64,
    pub ss: f64,
    pub bs: f64,
    /// Number of entities.
    pub n: usize,
}

impl RhoStats {
    pub fn from_draws(draws: &[(&[f64], &[f64])]) -> Self {
        let n = draws.first().map_or(0, |d| d.0.len());
        let mut s = Self { n, ..Default::default() };
        let count = (draws.len() * n) as f64;
        if count == 0.0 {
            return s;
        }
        for (b, sv) in draws {
            for (x, y) in b.iter().zip(sv.iter()) {
                s.bb += x * x;
                s.ss += y * y;
                s.bs += x * y;
            }
        }
        s.bb /= count;
        s.ss /= count;
        s.bs /= count;
        s
    }

    /// `Q3(rho)` per retained draw.
    pub fn q3(&self, rho: f64) -> f64 {
        let one_m = 1.0 - rho * rho;
        let n = self.n as f64;
        -n * std::f64::consts::TAU.ln() - 0.5 * n * one_m.ln() - n * (self.bb - 2.0 * rho * self.bs + self.ss) / (2.0 * one_m)
    }

    /// Residual of the stationarity cubic.
    pub fn cubic(&self, rho: f64) -> f64 {
        -rho.powi(3) + (1.0 - self.bb - self.ss) * rho + self.bs * (rho * rho + 1.0)
    }
}

/// Real roots of `x^3 + a x^2 + b x + c`.
pub fn cubic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let p = b - a * a / 3.0;
    let q = 2.0 * a.powi(3) / 27.0 - a * b / 3.0 + c;
    let shift = -a / 3.0;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    let mut roots = if disc > 0.0 {
        let sq = disc.sqrt();
        vec![(-q / 2.0 + sq).cbrt() + (-q / 2.0 - sq).cbrt() + shift]
    } else if p == 0.0 {
        vec![shift]
    } else {
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        (0..3)
            .map(|k| m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() + shift)
            .collect()
    };
    // polish
    for r in roots.iter_mut() {
        for _ in 0..4 {
            let f = ((*r + a) * *r + b) * *r + c;
            let df = (3.0 * *r + 2.0 * a) * *r + b;
            if df == 0.0 {
                break;
            }
            let next = *r - f / df;
            if !next.is_finite() {
                break;
            }
            *r = next;
        }
    }
    roots
}

/// Correlation update: the root of the stationarity cubic in `(-1, 1)` with
/// the largest `Q3`; falls back to the clamped empirical correlation.
pub fn mstep_rho(stats: &RhoStats) -> f64 {
    // -rho^3 + bs rho^2 + (1 - bb - ss) rho + bs = 0, monic form
    let roots = cubic_roots(-stats.bs, -(1.0 - stats.bb - stats.ss), -stats.bs);
    let best = roots
        .into_iter()
        .filter(|r| r.abs() < 1.0)
        .max_by(|x, y| stats.q3(*x).total_cmp(&stats.q3(*y)));
    match best {
        Some(r) => r,
        None => {
            log::warn!("correlation cubic has no root in (-1, 1); using the empirical correlation");
            let denom = (stats.bb * stats.ss).sqrt();
            let r = if denom > 0.0 { stats.bs / denom } else { 0.0 };
            r.clamp(-0.999, 0.999)
        }
    }
}
