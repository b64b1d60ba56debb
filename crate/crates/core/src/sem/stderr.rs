//! Standard errors from the curvature of the observed log-likelihood at the
//! final estimate, after integrating out the latent effects.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::mstep::RhoStats;
use crate::likelihood::{conn_obs_loglik, conn_obs_score, predictors, LatentState, ModelData, ParameterSet};
use crate::special::{logistic, GammaShape, ETA_BOUND};

/// Standard errors in the layout of [`ParameterSet`]. Coefficients held fixed
/// during the fit (inactive columns, GLM loadings) report 0; a block whose
/// information matrix cannot be inverted reports NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StdErrors {
    #[serde(with = "nan_as_null")]
    pub alpha: Vec<f64>,
    #[serde(with = "nan_as_null")]
    pub beta: Vec<f64>,
    #[serde(with = "nan_as_null")]
    pub gamma: Vec<f64>,
    #[serde(with = "nan_as_null")]
    pub nu: Vec<f64>,
    #[serde(with = "nan_scalar")]
    pub psi: f64,
    #[serde(with = "nan_scalar")]
    pub rho: f64,
}

mod nan_as_null {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let opt: Vec<Option<f64>> = v.iter().map(|x| x.is_finite().then_some(*x)).collect();
        opt.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let opt: Vec<Option<f64>> = Vec::deserialize(d)?;
        Ok(opt.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect())
    }
}

mod nan_scalar {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        v.is_finite().then_some(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

/// Square roots of the diagonal of `(-H)^-1` restricted to the active set.
fn block_se(h: &DMatrix<f64>, mask: &[bool]) -> Vec<f64> {
    let active: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    let m = active.len();
    let neg = DMatrix::from_fn(m, m, |i, j| -h[(active[i], active[j])]);
    let mut out = vec![0.0; mask.len()];
    match neg.try_inverse() {
        Some(inv) => {
            for (i, &a) in active.iter().enumerate() {
                let v = inv[(i, i)];
                out[a] = if v > 0.0 { v.sqrt() } else { f64::NAN };
            }
        }
        None => {
            log::warn!("information matrix is singular; standard errors unavailable for this block");
            for &a in &active {
                out[a] = f64::NAN;
            }
        }
    }
    out
}

/// `1 / sqrt(-f'')` by a central difference of width `h`.
fn curvature_se(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    let d2 = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
    if d2 < 0.0 {
        (-1.0 / d2).sqrt()
    } else {
        f64::NAN
    }
}

/// Hessian of the truncation-adjusted observed log-likelihood over
/// `(alpha, beta, gamma, nu)`, averaged over latent draws. Unlike the
/// complete-data Hessians of the M-step objectives it carries the
/// information lost to unreported claims.
pub fn observed_hessian(data: &ModelData, theta: &ParameterSet, draws: &[LatentState], penalty: f64) -> DMatrix<f64> {
    let p = data.p();
    let q = p + 3;
    let shape = GammaShape::new(1.0 / theta.psi);
    let chunk = 512;
    let parts: Vec<DMatrix<f64>> = (0..data.n())
        .collect::<Vec<_>>()
        .par_chunks(chunk)
        .map(|ks| {
            let mut h = DMatrix::zeros(2 * q, 2 * q);
            let mut xbar = vec![0.0; q];
            for &k in ks {
                xbar[..p].copy_from_slice(data.design.row(k));
                for lat in draws {
                    let l = data.latent_row(lat, k);
                    xbar[p..].copy_from_slice(&l);
                    let (ez, et) = predictors(data, theta, lat, k);
                    let [hzz, hzt, htt] = local_hessian(data, k, ez, et, theta.psi, &shape);
                    for i in 0..q {
                        if xbar[i] == 0.0 {
                            continue;
                        }
                        for j in i..q {
                            let xx = xbar[i] * xbar[j];
                            h[(i, j)] += hzz * xx;
                            h[(q + i, q + j)] += htt * xx;
                        }
                        if hzt != 0.0 {
                            for j in 0..q {
                                h[(i, q + j)] += hzt * xbar[i] * xbar[j];
                            }
                        }
                    }
                }
            }
            h
        })
        .collect();
    let mut h = DMatrix::zeros(2 * q, 2 * q);
    for part in parts {
        h += part;
    }
    h /= draws.len() as f64;
    for i in 0..2 * q {
        for j in 0..i {
            if i < q || j >= q {
                // within a block only the upper triangle was filled
                h[(i, j)] = h[(j, i)];
            }
        }
    }
    for i in 0..q {
        for j in q..2 * q {
            h[(j, i)] = h[(i, j)];
        }
    }
    for a in 0..3 {
        h[(p + a, p + a)] -= 2.0 * penalty;
        h[(q + p + a, q + p + a)] -= 2.0 * penalty;
    }
    h
}

/// Second derivatives of one connection's observed log-likelihood in its
/// linear predictors, `[d2/dz2, d2/dzdt, d2/dt2]`, by central differences
/// of the analytic score.
fn local_hessian(data: &ModelData, k: usize, ez: f64, et: f64, psi: f64, shape: &GammaShape) -> [f64; 3] {
    let (z, t, c) = (data.observed_claim[k], data.observed_gap[k], data.window[k]);
    let score = |a: f64, b: f64| conn_obs_score(z, t, c, a, b, psi, shape);
    if z {
        // reported claims separate: logistic and gamma curvature in closed form
        let pr = logistic(ez);
        let mu = et.clamp(-ETA_BOUND, ETA_BOUND).exp();
        return [-pr * (1.0 - pr), 0.0, -t / (mu * psi)];
    }
    let h = 1e-5;
    let (zp, tp) = score(ez + h, et);
    let (zm, tm) = score(ez - h, et);
    let (_, tp2) = score(ez, et + h);
    let (_, tm2) = score(ez, et - h);
    let hzz = (zp - zm) / (2.0 * h);
    let hzt = (tp - tm) / (2.0 * h);
    let htt = (tp2 - tm2) / (2.0 * h);
    [hzz, hzt, htt]
}

/// Symmetric sparse matrix in compressed rows.
struct Csr {
    start: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
}

impl Csr {
    /// Sums duplicate entries of `triplets`.
    fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut m = Csr { start: vec![0; dim + 1], col: Vec::new(), val: Vec::new() };
        let mut last = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *m.val.last_mut().unwrap() += v;
            } else {
                m.col.push(c);
                m.val.push(v);
                m.start[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..dim {
            m.start[r + 1] += m.start[r];
        }
        m
    }

    fn dim(&self) -> usize {
        self.start.len() - 1
    }

    fn mul(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o = (self.start[r]..self.start[r + 1]).map(|i| self.val[i] * x[self.col[i]]).sum();
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|r| {
                (self.start[r]..self.start[r + 1])
                    .find(|&i| self.col[i] == r)
                    .map_or(1.0, |i| self.val[i])
            })
            .collect()
    }
}

/// Jacobi-preconditioned conjugate gradients for `m x = b`, `m` SPD.
fn solve_cg(m: &Csr, diag: &[f64], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let norm_b = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm_b == 0.0 {
        return x;
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut mp = vec![0.0; n];
    for _ in 0..CG_MAX_ITER {
        m.mul(&p, &mut mp);
        let alpha = rz / p.iter().zip(&mp).map(|(a, b)| a * b).sum::<f64>();
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * mp[i];
        }
        if r.iter().map(|v| v * v).sum::<f64>().sqrt() <= CG_TOL * norm_b {
            break;
        }
        z.iter_mut().zip(r.iter().zip(diag)).for_each(|(z, (r, d))| *z = r / d);
        let rz_next: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_next / rz;
        rz = rz_next;
        p.iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
    }
    x
}

const CG_TOL: f64 = 1e-10;
const CG_MAX_ITER: usize = 2000;

/// Latent coordinate of the buyer, seller and policy effect of connection `k`
/// in the stacked vector `(B, S, P)`.
fn latent_index(data: &ModelData, k: usize) -> [usize; 3] {
    let e = data.n_entities;
    [data.buyer[k], e + data.seller[k], 2 * e + data.policy[k]]
}

/// Information about `(alpha, beta, gamma, nu)` left after the latent
/// effects are integrated out, as a Hessian (negative definite).
///
/// The joint curvature of the observed log-likelihood and the latent prior
/// is split into the fixed block `A`, the latent block `D` (sparse, with the
/// prior precision) and the coupling `C`; the fixed effects keep the Schur
/// complement `A - C D^-1 C'`. Curvatures are averaged over `draws` and the
/// latent regressors of the loadings are their posterior means.
pub fn marginal_information(data: &ModelData, theta: &ParameterSet, draws: &[LatentState], penalty: f64) -> DMatrix<f64> {
    let p = data.p();
    let q = p + 3;
    let n_lat = 2 * data.n_entities + data.n_policies;
    let shape = GammaShape::new(1.0 / theta.psi);
    let stride = draws.len().div_ceil(HESSIAN_DRAWS);
    let sub: Vec<&LatentState> = draws.iter().step_by(stride).collect();
    let mean_latents = {
        let m = draws.len() as f64;
        let avg = |f: fn(&LatentState) -> &Vec<f64>| -> Vec<f64> {
            let mut out = vec![0.0; f(&draws[0]).len()];
            for d in draws {
                out.iter_mut().zip(f(d)).for_each(|(o, v)| *o += v / m);
            }
            out
        };
        LatentState { buyer: avg(|l| &l.buyer), seller: avg(|l| &l.seller), policy: avg(|l| &l.policy) }
    };
    // per connection: minus the curvature in (eta_z, eta_t), averaged over draws
    let weights: Vec<[f64; 3]> = (0..data.n())
        .into_par_iter()
        .map(|k| {
            let mut w = [0.0; 3];
            for lat in &sub {
                let (ez, et) = predictors(data, theta, lat, k);
                let h = local_hessian(data, k, ez, et, theta.psi, &shape);
                w.iter_mut().zip(h).for_each(|(w, h)| *w -= h / sub.len() as f64);
            }
            w
        })
        .collect();
    let load = [theta.beta, theta.nu];

    let mut a = DMatrix::<f64>::zeros(2 * q, 2 * q);
    let mut c = DMatrix::<f64>::zeros(2 * q, n_lat);
    let mut triplets = Vec::with_capacity(9 * data.n() + n_lat + 2 * data.n_entities);
    let mut xbar = vec![0.0; q];
    for k in 0..data.n() {
        let [wzz, wzt, wtt] = weights[k];
        let w = [[wzz, wzt], [wzt, wtt]];
        xbar[..p].copy_from_slice(data.design.row(k));
        xbar[p..].copy_from_slice(&data.latent_row(&mean_latents, k));
        for i in 0..q {
            if xbar[i] == 0.0 {
                continue;
            }
            for j in 0..q {
                let xx = xbar[i] * xbar[j];
                for (r, wr) in w.iter().enumerate() {
                    for (s, ws) in wr.iter().enumerate() {
                        a[(r * q + i, s * q + j)] += ws * xx;
                    }
                }
            }
        }
        // W Lambda: rows (z, t), columns the three latent families
        let wl: [[f64; 3]; 2] =
            std::array::from_fn(|r| std::array::from_fn(|f| w[r][0] * load[0][f] + w[r][1] * load[1][f]));
        let idx = latent_index(data, k);
        for f in 0..3 {
            for (r, row) in wl.iter().enumerate() {
                for i in 0..q {
                    c[(r * q + i, idx[f])] += xbar[i] * row[f];
                }
            }
            for g in 0..3 {
                let v = load[0][f] * wl[0][g] + load[1][f] * wl[1][g];
                triplets.push((idx[f], idx[g], v));
            }
        }
    }
    // prior precision: (B_i, S_i) bivariate normal, P_j standard normal
    let e = data.n_entities;
    let one_m = 1.0 - theta.rho * theta.rho;
    for i in 0..e {
        triplets.push((i, i, 1.0 / one_m));
        triplets.push((e + i, e + i, 1.0 / one_m));
        triplets.push((i, e + i, -theta.rho / one_m));
        triplets.push((e + i, i, -theta.rho / one_m));
    }
    for j in 0..data.n_policies {
        triplets.push((2 * e + j, 2 * e + j, 1.0));
    }
    let d = Csr::from_triplets(n_lat, triplets);
    let diag = d.diagonal();
    let solved: Vec<Vec<f64>> = (0..2 * q)
        .into_par_iter()
        .map(|r| solve_cg(&d, &diag, &c.row(r).iter().copied().collect::<Vec<_>>()))
        .collect();
    let mut h = DMatrix::<f64>::zeros(2 * q, 2 * q);
    for r in 0..2 * q {
        for s in 0..2 * q {
            let coupling: f64 = c.row(r).iter().zip(&solved[s]).map(|(x, y)| x * y).sum();
            h[(r, s)] = coupling - a[(r, s)];
        }
    }
    for f in 0..3 {
        h[(p + f, p + f)] -= 2.0 * penalty;
        h[(q + p + f, q + p + f)] -= 2.0 * penalty;
    }
    h
}

/// Hessian draws are spread over at most this many of the latent states.
const HESSIAN_DRAWS: usize = 20;

/// Standard errors at `theta` from posterior latent `draws`.
///
/// With latent effects the coefficients use [`marginal_information`]; the
/// fixed-effects reduction has no latent effects and uses the observed
/// curvature directly.
pub(crate) fn standard_errors(
    data: &ModelData,
    theta: &ParameterSet,
    draws: &[LatentState],
    penalty: f64,
    latent_effects: bool,
    mask: &[bool],
) -> StdErrors {
    let p = theta.p();
    let q = p + 3;
    let stride = draws.len().div_ceil(HESSIAN_DRAWS);
    let sub: Vec<LatentState> = draws.iter().step_by(stride).cloned().collect();
    let h = if latent_effects {
        marginal_information(data, theta, draws, penalty)
    } else {
        observed_hessian(data, theta, &sub, penalty)
    };
    let mut joint_mask = mask.to_vec();
    joint_mask.extend_from_slice(mask);
    let se = block_se(&h, &joint_mask);

    let loglik_psi = |psi: f64| {
        let shape = GammaShape::new(1.0 / psi);
        let mut total = 0.0;
        for lat in &sub {
            for k in 0..data.n() {
                let (ez, et) = predictors(data, theta, lat, k);
                total += conn_obs_loglik(
                    data.observed_claim[k],
                    data.observed_gap[k],
                    data.window[k],
                    ez,
                    et,
                    psi,
                    &shape,
                );
            }
        }
        total / sub.len() as f64
    };
    let psi_se = curvature_se(loglik_psi, theta.psi, 1e-3 * theta.psi);
    let rho_se = if latent_effects && draws.len() > 1 {
        rho_se(draws, theta.rho)
    } else {
        0.0
    };
    StdErrors {
        alpha: se[..p].to_vec(),
        beta: se[p..q].to_vec(),
        gamma: se[q..q + p].to_vec(),
        nu: se[q + p..].to_vec(),
        psi: psi_se,
        rho: rho_se,
    }
}

/// Standard error of `rho` from the prior of the buyer/seller draws, with
/// the same missing-information correction.
fn rho_se(draws: &[LatentState], rho: f64) -> f64 {
    let h = 1e-4 * (1.0 - rho.abs()).max(1e-6);
    let per_draw: Vec<RhoStats> = draws
        .iter()
        .map(|l| RhoStats::from_draws(&[(&l.buyer[..], &l.seller[..])]))
        .collect();
    let slope = |st: &RhoStats| (st.q3(rho + h) - st.q3(rho - h)) / (2.0 * h);
    let curv = |st: &RhoStats| (st.q3(rho + h) - 2.0 * st.q3(rho) + st.q3(rho - h)) / (h * h);
    let n = per_draw.len() as f64;
    let mean_curv = per_draw.iter().map(curv).sum::<f64>() / n;
    let slopes: Vec<f64> = per_draw.iter().map(slope).collect();
    let mean_slope = slopes.iter().sum::<f64>() / n;
    let var_slope = slopes.iter().map(|s| (s - mean_slope).powi(2)).sum::<f64>() / (n - 1.0);
    let info = -mean_curv - var_slope;
    if info > 0.0 {
        info.recip().sqrt()
    } else {
        f64::NAN
    }
}
