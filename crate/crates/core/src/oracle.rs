//! Independent brute-force and quadrature references used to check the
//! production paths: literal double-sum centrality, Gauss–Legendre
//! quadrature, and exact posteriors of tiny instances.

use std::collections::BTreeMap;

use crate::centrality::{connection_weight, DegreeCentrality, WeightScheme};
use crate::error::{Error, Result};
use crate::graph::{EntityId, NetworkGraph};
use crate::likelihood::{conn_obs_loglik, dot, dot3, ln_bivariate_normal, ln_normal, ModelData, ParameterSet};
use crate::special::{logistic, GammaShape};

/// Centrality at `t` by enumerating every ordered pair of distinct active
/// connections. Quadratic in the number of active connections.
pub fn oracle_centrality(g: &NetworkGraph, t: f64, scheme: WeightScheme) -> BTreeMap<EntityId, DegreeCentrality> {
    let view = g.active_subgraph(t);
    let mut out: BTreeMap<EntityId, DegreeCentrality> = view
        .entities
        .iter()
        .map(|&i| (g.entities()[i].id, DegreeCentrality::default()))
        .collect();
    let conns = &view.connections;
    let w: Vec<f64> = conns.iter().map(|&k| connection_weight(g, k, scheme)).collect();
    let s: Vec<usize> = conns.iter().map(|&k| g.seller_of(k)).collect();
    let b: Vec<usize> = conns.iter().map(|&k| g.buyer_of(k)).collect();
    let id = |i: usize| g.entities()[i].id;
    for x in 0..conns.len() {
        out.get_mut(&id(s[x])).unwrap().out_degree += w[x];
        out.get_mut(&id(b[x])).unwrap().in_degree += w[x];
        for y in 0..conns.len() {
            if x == y {
                continue;
            }
            let ww = w[x] * w[y];
            if s[y] == b[x] {
                out.get_mut(&id(s[x])).unwrap().out_out += ww;
            }
            if b[y] == s[x] {
                out.get_mut(&id(b[x])).unwrap().in_in += ww;
            }
            if s[y] == s[x] {
                out.get_mut(&id(b[x])).unwrap().in_out += ww;
            }
            if b[y] == b[x] {
                out.get_mut(&id(s[x])).unwrap().out_in += ww;
            }
        }
    }
    out
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Fixed-order Gauss–Legendre rule mapped to `[a, b]`.
pub fn gl_integrate(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let (x, w) = gauss_legendre(n);
    let (half, mid) = (0.5 * (b - a), 0.5 * (b + a));
    x.iter().zip(&w).map(|(xi, wi)| wi * f(mid + half * xi)).sum::<f64>() * half
}

/// Adaptive Gauss–Legendre quadrature on `[a, b]` by interval bisection.
pub fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn recurse(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let left = gl_integrate(f, a, m, 20);
        let right = gl_integrate(f, m, b, 20);
        if depth >= 40 || (left + right - whole).abs() <= tol {
            left + right
        } else {
            recurse(f, a, m, left, 0.5 * tol, depth + 1) + recurse(f, m, b, right, 0.5 * tol, depth + 1)
        }
    }
    let whole = gl_integrate(&mut f, a, b, 20);
    recurse(&mut f, a, b, whole, tol, 0)
}

/// Integral over `[0, inf)` via the substitution `x = u / (1 - u)`.
pub fn integrate_half_line(mut f: impl FnMut(f64) -> f64, tol: f64) -> f64 {
    integrate(
        |u| {
            if u >= 1.0 {
                return 0.0;
            }
            let x = u / (1.0 - u);
            let v = f(x) / ((1.0 - u) * (1.0 - u));
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        tol,
    )
}

/// One latent effect integrated over by [`oracle_posterior`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatentCoord {
    Buyer(usize),
    Seller(usize),
    Policy(usize),
}

/// Latent half-width of the quadrature box.
const BOX: f64 = 8.0;
const NODES: usize = 81;
const COARSE_NODES: usize = 41;

/// Exact posterior of the latent effects of a tiny instance by tensor
/// Gauss–Legendre quadrature on `[-8, 8]^d`.
#[derive(Debug, Clone)]
pub struct OraclePosterior {
    /// The effects that touch at least one connection, buyers first.
    pub coords: Vec<LatentCoord>,
    /// Largest change of any posterior mean between the 41- and 81-node rules.
    pub refinement_gap: f64,
    data: ModelData,
    theta: ParameterSet,
    shape: GammaShape,
    /// Grid points with normalized posterior weights.
    points: Vec<(Vec<f64>, f64)>,
    ln_ref: f64,
    norm: f64,
}

/// Posterior of the latent effects of `data` at `theta`, refusing instances
/// with more than three effects in play. Effects that touch no connection
/// integrate out of the prior and are left out.
pub fn oracle_posterior(data: &ModelData, theta: &ParameterSet) -> Result<OraclePosterior> {
    theta.validate()?;
    let mut coords = Vec::new();
    let mut push = |c: LatentCoord| {
        if !coords.contains(&c) {
            coords.push(c);
        }
    };
    for k in 0..data.n() {
        push(LatentCoord::Buyer(data.buyer[k]));
    }
    for k in 0..data.n() {
        push(LatentCoord::Seller(data.seller[k]));
    }
    for k in 0..data.n() {
        push(LatentCoord::Policy(data.policy[k]));
    }
    if coords.len() > 3 {
        return Err(Error::Contract(format!(
            "quadrature oracle supports at most 3 latent dimensions, instance has {}",
            coords.len()
        )));
    }
    let mut post = OraclePosterior {
        coords,
        refinement_gap: 0.0,
        data: data.clone(),
        theta: theta.clone(),
        shape: GammaShape::new(1.0 / theta.psi),
        points: Vec::new(),
        ln_ref: 0.0,
        norm: 1.0,
    };
    let coarse = post.grid(COARSE_NODES);
    let fine = post.grid(NODES);
    let d = post.coords.len();
    let mean = |pts: &[(Vec<f64>, f64)], j: usize| pts.iter().map(|(x, w)| w * x[j]).sum::<f64>();
    post.refinement_gap = (0..d)
        .map(|j| (mean(&coarse.0, j) - mean(&fine.0, j)).abs())
        .fold(0.0, f64::max);
    if post.refinement_gap > 1e-6 {
        log::warn!("quadrature oracle refinement gap {:.2e}", post.refinement_gap);
    }
    (post.points, post.ln_ref, post.norm) = fine;
    Ok(post)
}

impl OraclePosterior {
    /// Unnormalized log posterior at a point of the coordinate space.
    fn ln_density(&self, x: &[f64]) -> f64 {
        let (data, theta) = (&self.data, &self.theta);
        let value = |c: LatentCoord| self.coords.iter().position(|&e| e == c).map(|j| x[j]);
        let mut total = 0.0;
        for k in 0..data.n() {
            let l = [
                value(LatentCoord::Buyer(data.buyer[k])).unwrap(),
                value(LatentCoord::Seller(data.seller[k])).unwrap(),
                value(LatentCoord::Policy(data.policy[k])).unwrap(),
            ];
            let row = data.design.row(k);
            let ez = dot(row, &theta.alpha) + dot3(&l, &theta.beta);
            let et = dot(row, &theta.gamma) + dot3(&l, &theta.nu);
            total += conn_obs_loglik(
                data.observed_claim[k],
                data.observed_gap[k],
                data.window[k],
                ez,
                et,
                theta.psi,
                &self.shape,
            );
        }
        for (j, &c) in self.coords.iter().enumerate() {
            total += match c {
                LatentCoord::Buyer(i) => match value(LatentCoord::Seller(i)) {
                    Some(s) => ln_bivariate_normal(x[j], s, theta.rho),
                    None => ln_normal(x[j]),
                },
                // a seller paired with its buyer was counted with the buyer
                LatentCoord::Seller(i) if value(LatentCoord::Buyer(i)).is_some() => 0.0,
                _ => ln_normal(x[j]),
            };
        }
        total
    }

    /// Tensor rule over `ranges` (one `[a, b]` per coordinate) with `n` nodes
    /// per axis: points, raw weights and log densities.
    fn tensor(&self, ranges: &[(f64, f64)], n: usize) -> Vec<(Vec<f64>, f64, f64)> {
        let (x, w) = gauss_legendre(n);
        let d = ranges.len();
        let total = n.pow(d as u32);
        (0..total)
            .map(|mut idx| {
                let mut point = Vec::with_capacity(d);
                let mut weight = 1.0;
                for &(a, b) in ranges {
                    let i = idx % n;
                    idx /= n;
                    let half = 0.5 * (b - a);
                    point.push(0.5 * (a + b) + half * x[i]);
                    weight *= w[i] * half;
                }
                let ln = self.ln_density(&point);
                (point, weight, ln)
            })
            .collect()
    }

    #[allow(clippy::type_complexity)]
    fn grid(&self, n: usize) -> (Vec<(Vec<f64>, f64)>, f64, f64) {
        let ranges = vec![(-BOX, BOX); self.coords.len()];
        let raw = self.tensor(&ranges, n);
        let ln_ref = raw.iter().map(|r| r.2).fold(f64::NEG_INFINITY, f64::max);
        let norm: f64 = raw.iter().map(|(_, w, ln)| w * (ln - ln_ref).exp()).sum();
        let points = raw
            .into_iter()
            .map(|(x, w, ln)| (x, w * (ln - ln_ref).exp() / norm))
            .collect();
        (points, ln_ref, norm)
    }

    /// Posterior expectation of `f` over the coordinates.
    pub fn expect(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.points.iter().map(|(x, w)| w * f(x)).sum()
    }

    pub fn mean(&self, j: usize) -> f64 {
        self.expect(|x| x[j])
    }

    /// Position of `c` among the coordinates.
    pub fn index_of(&self, c: LatentCoord) -> Option<usize> {
        self.coords.iter().position(|&e| e == c)
    }

    /// Posterior distribution function of coordinate `j` at `t`.
    pub fn marginal_cdf(&self, j: usize, t: f64) -> f64 {
        if t <= -BOX {
            return 0.0;
        }
        if t >= BOX {
            return 1.0;
        }
        let mut ranges = vec![(-BOX, BOX); self.coords.len()];
        ranges[j] = (-BOX, t);
        let raw = self.tensor(&ranges, NODES);
        raw.iter().map(|(_, w, ln)| w * (ln - self.ln_ref).exp()).sum::<f64>() / self.norm
    }

    /// Posterior mean of the claim probability of connection `k`.
    pub fn claim_prob(&self, k: usize) -> f64 {
        let data = &self.data;
        let row = data.design.row(k);
        let fixed = dot(row, &self.theta.alpha);
        let b = self.index_of(LatentCoord::Buyer(data.buyer[k])).unwrap();
        let s = self.index_of(LatentCoord::Seller(data.seller[k])).unwrap();
        let p = self.index_of(LatentCoord::Policy(data.policy[k])).unwrap();
        self.expect(|x| logistic(fixed + dot3(&[x[b], x[s], x[p]], &self.theta.beta)))
    }
}
