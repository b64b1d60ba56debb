//! Stochastic EM estimation: MH sampling of the latent effects, augmentation
//! of the unreported claims, and blockwise M-steps, followed by averaging of
//! the final iterates.

pub mod augment;
pub mod init;
pub mod mstep;
pub mod sampler;
pub mod stderr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use augment::{claim_weight, sample_left_truncated};
pub use init::initialize;
pub use mstep::{active_mask, mstep_rho, Augmented, GammaProblem, LogisticProblem, RhoStats, COEF_BOUND};
pub use sampler::{Acceptance, Family, Sampler, SweepStreams};
pub use stderr::StdErrors;

use crate::centrality::{featurize_connections, Scaling, WeightScheme};
use crate::error::{Error, Result};
use crate::graph::NetworkGraph;
use crate::likelihood::{LatentState, ModelData, ParameterSet};
use crate::rng::{stream, Purpose};
use crate::special::{GammaShape, ETA_BOUND};

/// Estimator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// SEM iterations.
    pub iterations: usize,
    /// MH sub-iterations per iteration.
    pub mh_steps: usize,
    /// Sub-iterations (1-based) whose latent states feed the M-step.
    pub retain: Vec<usize>,
    /// Ridge penalty on the latent loadings, scaled by the connection count.
    pub lambda: f64,
    pub seed: u64,
    pub irls_tol: f64,
    pub irls_max_iter: usize,
    /// Number of final iterates averaged into the estimate.
    pub averaging_window: usize,
    /// Stop once the means of two consecutive windows differ by less than
    /// this in every parameter.
    pub early_stop: Option<f64>,
    /// `false` fits the fixed-effects reduction (no latent effects).
    pub latent_effects: bool,
    /// Posterior draws at the estimate used for the standard errors.
    pub se_draws: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            iterations: 200,
            mh_steps: 20,
            retain: vec![15, 20],
            lambda: 1e-5,
            seed: 1,
            irls_tol: 1e-8,
            irls_max_iter: 50,
            averaging_window: 10,
            early_stop: None,
            latent_effects: true,
            se_draws: 200,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.iterations == 0 {
            return bad("iterations must be at least 1".into());
        }
        if self.retain.is_empty() {
            return bad("the retained set must not be empty".into());
        }
        if let Some(m) = self.retain.iter().find(|&&m| m == 0 || m > self.mh_steps) {
            return bad(format!("retained step {m} is outside 1..={}", self.mh_steps));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("penalty must be non-negative, got {}", self.lambda));
        }
        if self.averaging_window == 0 || self.averaging_window > self.iterations {
            return bad(format!(
                "averaging window {} must lie in 1..={}",
                self.averaging_window, self.iterations
            ));
        }
        if self.latent_effects && self.se_draws < 2 {
            return bad(format!("at least 2 standard-error draws are needed, got {}", self.se_draws));
        }
        if !(self.irls_tol > 0.0) || self.irls_max_iter == 0 {
            return bad("IRLS tolerance and iteration cap must be positive".into());
        }
        Ok(())
    }
}

/// One SEM iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub params: ParameterSet,
    /// Acceptance rates of the buyer, seller and policy sweeps.
    pub acceptance: [f64; 3],
    /// `Q1 + Q2 + Q3` at the new parameters on the retained draws.
    pub q: f64,
    /// Mean of `q` over the trailing averaging window.
    pub q_smoothed: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SemTrace {
    pub rows: Vec<TraceRow>,
}

impl SemTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Column names of [`to_csv_rows`](Self::to_csv_rows).
    pub fn csv_header(&self, names: &[String]) -> Vec<String> {
        let mut h = vec!["iteration".to_string()];
        h.extend(names.iter().map(|n| format!("alpha.{n}")));
        h.extend(["beta.buyer", "beta.seller", "beta.policy"].map(String::from));
        h.extend(names.iter().map(|n| format!("gamma.{n}")));
        h.extend(["nu.buyer", "nu.seller", "nu.policy", "psi", "rho"].map(String::from));
        h.extend(["accept.buyer", "accept.seller", "accept.policy", "q", "q_smoothed"].map(String::from));
        h
    }

    pub fn to_csv_rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                let mut v = vec![r.iteration.to_string()];
                let nums = r
                    .params
                    .coefficients()
                    .into_iter()
                    .chain([r.params.psi, r.params.rho])
                    .chain(r.acceptance)
                    .chain([r.q, r.q_smoothed]);
                v.extend(nums.map(|x| format!("{x:e}")));
                v
            })
            .collect()
    }
}

/// Output of [`fit_data`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    /// Average of the final iterates.
    pub params: ParameterSet,
    pub std_errors: StdErrors,
    pub initial: ParameterSet,
    pub trace: SemTrace,
    /// Latent state at the end of the last sweep.
    pub latents: LatentState,
    pub config: FitConfig,
}

/// Output of [`fit`]: the estimate plus what is needed to score new data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub estimate: Estimate,
    pub scaling: Scaling,
    pub weight_scheme: WeightScheme,
}

/// Featurizes `g` and runs [`fit_data`].
pub fn fit(g: &NetworkGraph, scheme: WeightScheme, config: &FitConfig) -> Result<FitResult> {
    let (design, scaling) = featurize_connections(g, scheme)?;
    let data = ModelData::new(g, design)?;
    Ok(FitResult {
        estimate: fit_data(&data, config)?,
        scaling,
        weight_scheme: scheme,
    })
}

/// Augments one retained draw: claim weights, and gaps of unreported
/// connections from the left-truncated gamma law.
fn augment_draw(data: &ModelData, theta: &ParameterSet, latents: &LatentState, seed: u64, counters: [u64; 2]) -> Vec<Augmented> {
    let shape = GammaShape::new(1.0 / theta.psi);
    (0..data.n())
        .into_par_iter()
        .map(|k| {
            let latent = data.latent_row(latents, k);
            let (ez, et) = crate::likelihood::predictors(data, theta, latents, k);
            if data.observed_claim[k] {
                return Augmented {
                    latent,
                    weight: 1.0,
                    gap: data.observed_gap[k],
                };
            }
            let c = data.window[k];
            let mu = et.clamp(-ETA_BOUND, ETA_BOUND).exp();
            let ln_surv = if c.is_finite() {
                shape.ln_upper(c / (theta.psi * mu))
            } else {
                f64::NEG_INFINITY
            };
            let weight = claim_weight(false, ez, ln_surv);
            let gap = if weight > 0.0 {
                let mut r = stream(seed, Purpose::GapAugment, &[counters[0], counters[1], data.connection_ids[k]]);
                sample_left_truncated(&mut r, &shape, theta.psi * mu, c)
            } else if c.is_finite() {
                c
            } else {
                1.0
            };
            Augmented { latent, weight, gap }
        })
        .collect()
}

struct MStep {
    theta: ParameterSet,
    q: f64,
}

fn m_step(
    data: &ModelData,
    config: &FitConfig,
    prev: &ParameterSet,
    draws: &[Vec<Augmented>],
    retained: &[LatentState],
    mask: &[bool],
) -> Result<MStep> {
    let p = data.p();
    let penalty = config.lambda * data.n() as f64;
    let logistic = LogisticProblem {
        design: &data.design,
        draws,
        penalty,
    };
    let gamma = GammaProblem {
        design: &data.design,
        draws,
        penalty,
    };
    let mut ab = prev.alpha.clone();
    ab.extend_from_slice(&prev.beta);
    let mut gn = prev.gamma.clone();
    gn.extend_from_slice(&prev.nu);

    let q1_block = || {
        let r = mstep::newton_maximize(
            |c| logistic.objective(c),
            |c| logistic.gradient_hessian(c),
            &ab,
            mask,
            config.irls_tol,
            config.irls_max_iter,
        )?;
        if r.capped {
            log::warn!("claim coefficients hit the bound {COEF_BOUND}");
        }
        let q = logistic.objective(&r.coef);
        Ok::<_, Error>((r.coef, q))
    };
    let q2_block = || {
        let r = mstep::newton_maximize(
            |c| gamma.objective(c, prev.psi),
            |c| gamma.gradient_hessian(c, prev.psi),
            &gn,
            mask,
            config.irls_tol,
            config.irls_max_iter,
        )?;
        if r.capped {
            log::warn!("gap coefficients hit the bound {COEF_BOUND}");
        }
        let sums = gamma.sums(&r.coef);
        let psi = if sums.w > 0.0 {
            mstep::maximize_psi(&sums, draws.len(), prev.psi)?
        } else {
            log::warn!("all claim weights are zero; keeping the previous dispersion");
            prev.psi
        };
        let q = gamma.objective(&r.coef, psi);
        Ok::<_, Error>((r.coef, psi, q))
    };
    let q3_block = || {
        if !config.latent_effects {
            return (0.0, 0.0);
        }
        let pairs: Vec<(&[f64], &[f64])> = retained.iter().map(|l| (&l.buyer[..], &l.seller[..])).collect();
        let stats = RhoStats::from_draws(&pairs);
        let rho = mstep_rho(&stats);
        (rho, stats.q3(rho))
    };
    let (r1, (r2, (rho, q3))) = rayon::join(q1_block, || rayon::join(q2_block, q3_block));
    let (ab, q1) = r1?;
    let (gn, psi, q2) = r2?;
    let theta = ParameterSet {
        alpha: ab[..p].to_vec(),
        beta: [ab[p], ab[p + 1], ab[p + 2]],
        gamma: gn[..p].to_vec(),
        nu: [gn[p], gn[p + 1], gn[p + 2]],
        psi,
        rho,
    };
    Ok(MStep { theta, q: q1 + q2 + q3 })
}

fn mean_params(rows: &[TraceRow]) -> ParameterSet {
    let n = rows.len() as f64;
    let first = &rows[0].params;
    let mut coef = vec![0.0; first.coefficients().len()];
    let (mut psi, mut rho) = (0.0, 0.0);
    for r in rows {
        for (c, v) in coef.iter_mut().zip(r.params.coefficients()) {
            *c += v / n;
        }
        psi += r.params.psi / n;
        rho += r.params.rho / n;
    }
    let mut out = first.with_coefficients(&coef);
    out.psi = psi;
    out.rho = rho;
    out
}

fn max_abs_diff(a: &ParameterSet, b: &ParameterSet) -> f64 {
    a.coefficients()
        .iter()
        .zip(b.coefficients())
        .map(|(x, y)| (x - y).abs())
        .chain([(a.psi - b.psi).abs(), (a.rho - b.rho).abs()])
        .fold(0.0, f64::max)
}

fn dump_trace(trace: &SemTrace) {
    for r in &trace.rows {
        log::error!("iteration {}: q = {}, params = {:?}", r.iteration, r.q, r.params);
    }
}

/// Sweeps after the fit, at the final estimate, before the draws used for
/// the standard errors are kept.
const SE_BURN_IN: usize = 20;

/// One latent state per sweep of a chain run at `theta`.
fn posterior_draws(data: &ModelData, theta: &ParameterSet, start: &LatentState, config: &FitConfig) -> Result<Vec<LatentState>> {
    let mut chain = Sampler::new(data, theta.clone(), start.clone(), config.seed, SweepStreams::STDERR)?;
    let mut out = Vec::with_capacity(config.se_draws);
    for s in 0..SE_BURN_IN + config.se_draws {
        chain.sweep(&[s as u64]);
        if s >= SE_BURN_IN {
            out.push(chain.latents().clone());
        }
    }
    Ok(out)
}

/// Runs the stochastic EM estimator on prepared connection data.
pub fn fit_data(data: &ModelData, config: &FitConfig) -> Result<Estimate> {
    config.validate()?;
    let (initial, latents) = initialize(data, config)?;
    let mask = active_mask(&data.design, config.latent_effects);
    let mut sampler = Sampler::new(data, initial.clone(), latents, config.seed, SweepStreams::FIT)?;
    let mut trace = SemTrace::default();
    let mut last_retained: Vec<LatentState> = Vec::new();

    for t in 1..=config.iterations {
        let prev = sampler.params().clone();
        let mut acc = Acceptance::default();
        let mut retained = Vec::with_capacity(config.retain.len());
        if config.latent_effects {
            for m in 1..=config.mh_steps {
                acc.add(&sampler.sweep(&[t as u64, m as u64]));
                if config.retain.contains(&m) {
                    retained.push(sampler.latents().clone());
                }
            }
        } else {
            retained = vec![sampler.latents().clone(); config.retain.len()];
        }
        let mut draws: Vec<Vec<Augmented>> = config
            .retain
            .iter()
            .zip(&retained)
            .map(|(&m, l)| augment_draw(data, &prev, l, config.seed, [t as u64, m as u64]))
            .collect();

        let MStep { mut theta, q } = m_step(data, config, &prev, &draws, &retained, &mask)?;
        if !q.is_finite() {
            dump_trace(&trace);
            return Err(Error::Numerical(format!(
                "objective is not finite at iteration {t} (trace of {} rows logged)",
                trace.len()
            )));
        }
        for f in 0..3 {
            if theta.beta[f] < 0.0 {
                // the likelihood is invariant under this joint sign change
                theta = theta.flipped(f);
                sampler.latents_mut().negate(f);
                retained.iter_mut().for_each(|l| l.negate(f));
                for d in draws.iter_mut() {
                    d.iter_mut().for_each(|a| a.latent[f] = -a.latent[f]);
                }
            }
        }
        sampler.set_params(theta.clone())?;

        let w = config.averaging_window.min(trace.len() + 1);
        let q_smoothed = (trace.rows[trace.len() + 1 - w..].iter().map(|r| r.q).sum::<f64>() + q) / w as f64;
        trace.rows.push(TraceRow {
            iteration: t,
            params: theta,
            acceptance: acc.rates(),
            q,
            q_smoothed,
        });
        log::debug!("iteration {t}: q = {q:.6}");
        last_retained = retained;

        if let Some(tol) = config.early_stop {
            let w = config.averaging_window;
            if trace.len() >= 2 * w {
                let n = trace.len();
                let a = mean_params(&trace.rows[n - 2 * w..n - w]);
                let b = mean_params(&trace.rows[n - w..]);
                if max_abs_diff(&a, &b) < tol {
                    log::info!("stopping after {t} iterations: window drift below {tol}");
                    break;
                }
            }
        }
    }

    let n = trace.len();
    let params = mean_params(&trace.rows[n - config.averaging_window.min(n)..]);
    let penalty = config.lambda * data.n() as f64;
    let se_draws = if config.latent_effects {
        posterior_draws(data, &params, sampler.latents(), config)?
    } else {
        last_retained
    };
    let std_errors = stderr::standard_errors(data, &params, &se_draws, penalty, config.latent_effects, &mask);

    Ok(Estimate {
        params,
        std_errors,
        initial,
        trace,
        latents: sampler.latents().clone(),
        config: config.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::testdata::random_instance;

    fn small_config() -> FitConfig {
        FitConfig {
            iterations: 6,
            mh_steps: 4,
            retain: vec![2, 4],
            averaging_window: 3,
            ..FitConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(FitConfig::default().validate().is_ok());
        for bad in [
            FitConfig { retain: vec![], ..FitConfig::default() },
            FitConfig { retain: vec![21], ..FitConfig::default() },
            FitConfig { retain: vec![0], ..FitConfig::default() },
            FitConfig { lambda: -1.0, ..FitConfig::default() },
            FitConfig { averaging_window: 300, ..FitConfig::default() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))));
        }
    }

    #[test]
    fn fit_is_deterministic_and_traced() {
        let (data, _, _) = random_instance(150, 3, 12, 10, 31);
        let cfg = small_config();
        let a = fit_data(&data, &cfg).unwrap();
        let b = fit_data(&data, &cfg).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
        assert_eq!(a.trace.len(), cfg.iterations);
        assert!(a.params.beta[0] >= 0.0);
        assert!(a.trace.rows.iter().all(|r| r.params.beta.iter().all(|&b| b >= 0.0)));
        let rows = a.trace.to_csv_rows();
        assert_eq!(rows[0].len(), a.trace.csv_header(&data.design.names).len());
    }

    #[test]
    fn thread_count_does_not_change_the_fit() {
        let (data, _, _) = random_instance(150, 3, 12, 10, 32);
        let cfg = small_config();
        let run = |n: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .unwrap()
                .install(|| fit_data(&data, &cfg).unwrap())
        };
        // Debug output so that matching NaN standard errors compare equal
        assert_eq!(format!("{:?}", run(1)), format!("{:?}", run(3)));
    }

    #[test]
    fn glm_mode_keeps_loadings_at_zero() {
        let (data, _, _) = random_instance(150, 3, 12, 10, 33);
        let cfg = FitConfig { latent_effects: false, ..small_config() };
        let est = fit_data(&data, &cfg).unwrap();
        assert!(est.params.is_glm());
        assert_eq!(est.params.rho, 0.0);
        assert_eq!(est.std_errors.beta, vec![0.0; 3]);
        assert!(est.latents.buyer.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn early_stop_truncates_the_trace() {
        let (data, _, _) = random_instance(150, 3, 12, 10, 34);
        let cfg = FitConfig {
            latent_effects: false,
            iterations: 50,
            averaging_window: 2,
            early_stop: Some(1.0),
            ..small_config()
        };
        let est = fit_data(&data, &cfg).unwrap();
        assert_eq!(est.trace.len(), 4);
    }

    #[test]
    fn mean_of_identical_rows_is_the_row() {
        let (_, theta, _) = random_instance(10, 3, 4, 3, 35);
        let row = TraceRow {
            iteration: 1,
            params: theta.clone(),
            acceptance: [0.0; 3],
            q: 0.0,
            q_smoothed: 0.0,
        };
        let m = mean_params(&[row.clone(), row.clone(), row]);
        assert!(max_abs_diff(&m, &theta) < 1e-15);
    }
}
