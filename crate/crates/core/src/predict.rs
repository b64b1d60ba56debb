//! Posterior prediction: claim probabilities for new connections, the
//! probability that an open connection hides an unreported claim, reserves,
//! and absolute-deviance scores against realized outcomes.
//!
//! Latent draws come from a fresh Metropolis–Hastings run at the fitted
//! parameters. Effects of units not seen in training are simulated from the
//! prior, conditionally on the other role of the same entity when that role
//! was observed.

use std::collections::HashMap;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{dot3, ln_gap_survival_with, LatentState, ModelData, ParameterSet};
use crate::rng::{stream, Purpose};
use crate::sem::augment::claim_weight;
use crate::sem::sampler::{Acceptance, Sampler, SweepStreams};
use crate::special::{logistic, GammaShape, ETA_BOUND};

/// Size of the prediction run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictConfig {
    /// Retained draws per latent effect.
    pub draws: usize,
    /// MH sweeps at the fitted parameters; every `sweeps / draws`-th is kept.
    pub sweeps: usize,
    pub seed: u64,
}

impl Default for PredictConfig {
    fn default() -> Self {
        Self {
            draws: 1000,
            sweeps: 2000,
            seed: 1,
        }
    }
}

impl PredictConfig {
    pub fn validate(&self) -> Result<()> {
        if self.draws == 0 {
            return Err(Error::Config("prediction needs at least one draw".into()));
        }
        if self.sweeps < self.draws {
            return Err(Error::Config(format!(
                "{} sweeps cannot supply {} thinned draws",
                self.sweeps, self.draws
            )));
        }
        Ok(())
    }

    fn thin(&self) -> usize {
        self.sweeps / self.draws
    }
}

/// Posterior draws of the in-sample latent effects at fixed parameters,
/// keyed by entity and policy id so that other datasets can be scored.
#[derive(Debug, Clone)]
pub struct PosteriorSample {
    pub theta: ParameterSet,
    /// Empty when the model has no latent effects.
    pub draws: Vec<LatentState>,
    pub acceptance: Acceptance,
    entity: HashMap<u64, usize>,
    policy: HashMap<u64, usize>,
    known_buyer: Vec<bool>,
    known_seller: Vec<bool>,
    n_draws: usize,
    seed: u64,
}

impl PosteriorSample {
    /// Number of Monte Carlo draws each score averages over.
    pub fn len(&self) -> usize {
        self.n_draws
    }

    pub fn is_empty(&self) -> bool {
        self.n_draws == 0
    }
}

/// Runs the frozen-parameter sampler on the training data, warm-started at
/// `warm`, and keeps `config.draws` thinned states.
pub fn posterior_sample(
    train: &ModelData,
    theta: &ParameterSet,
    warm: &LatentState,
    config: &PredictConfig,
) -> Result<PosteriorSample> {
    config.validate()?;
    theta.validate()?;
    if theta.p() != train.p() {
        return Err(Error::Contract(format!(
            "model has {} covariates, data {}",
            theta.p(),
            train.p()
        )));
    }
    if warm.buyer.len() != train.n_entities || warm.policy.len() != train.n_policies {
        return Err(Error::Contract("warm-start latents do not match the training data".into()));
    }
    let mut draws = Vec::new();
    let mut acceptance = Acceptance::default();
    if !theta.is_glm() {
        let mut sampler = Sampler::new(train, theta.clone(), warm.clone(), config.seed, SweepStreams::PREDICT)?;
        let thin = config.thin();
        draws.reserve(config.draws);
        for s in 1..=config.sweeps {
            acceptance.add(&sampler.sweep(&[s as u64]));
            if s % thin == 0 && draws.len() < config.draws {
                draws.push(sampler.latents().clone());
            }
        }
        if acceptance.non_finite > 0 {
            log::warn!("{} prediction proposals had a non-finite ratio", acceptance.non_finite);
        }
    }
    Ok(PosteriorSample {
        theta: theta.clone(),
        draws,
        acceptance,
        entity: train.entity_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect(),
        policy: train.policy_ids.iter().enumerate().map(|(j, &id)| (id, j)).collect(),
        known_buyer: train.by_buyer.iter().map(|c| !c.is_empty()).collect(),
        known_seller: train.by_seller.iter().map(|c| !c.is_empty()).collect(),
        n_draws: if theta.is_glm() { 1 } else { config.draws },
        seed: config.seed,
    })
}

/// Where the draws of one effect come from.
#[derive(Debug, Clone, Copy)]
enum Source {
    /// In-sample effect of the same role.
    Reuse(usize),
    /// Normal given the other role's in-sample effect, then a fresh normal.
    Given(usize, usize),
    /// Prior draw; the index selects the fresh-normal table.
    Fresh(usize),
    /// Seller effect of a fully new entity, correlated with its buyer draw.
    FreshPair(usize),
}

/// `(B~, S~, P~)` draws for every connection of a scored dataset.
pub struct PosteriorDraws<'a> {
    sample: &'a PosteriorSample,
    buyer: Vec<Source>,
    seller: Vec<Source>,
    policy: Vec<Source>,
    /// Two independent standard normals per draw for each entity needing
    /// fresh values, and one per draw for each new policy.
    fresh_entity: Vec<Vec<[f64; 2]>>,
    fresh_policy: Vec<Vec<f64>>,
}

impl<'a> PosteriorDraws<'a> {
    /// Resolves every entity and policy of `target` against the training
    /// sample and simulates the effects of those not seen in training.
    pub fn new(sample: &'a PosteriorSample, target: &ModelData) -> Self {
        let m = sample.len();
        let latent = !sample.theta.is_glm();
        let mut fresh_entity = Vec::new();
        let mut buyer = Vec::with_capacity(target.n_entities);
        let mut seller = Vec::with_capacity(target.n_entities);
        let mut fresh_for = |id: u64| {
            let mut r = stream(sample.seed, Purpose::PredictNew, &[0, id]);
            let z: Vec<[f64; 2]> = if latent {
                (0..m)
                    .map(|_| [StandardNormal.sample(&mut r), StandardNormal.sample(&mut r)])
                    .collect()
            } else {
                Vec::new()
            };
            fresh_entity.push(z);
            fresh_entity.len() - 1
        };
        for &id in &target.entity_ids {
            let (b, s) = match sample.entity.get(&id) {
                Some(&t) => match (sample.known_buyer[t], sample.known_seller[t]) {
                    (true, true) => (Source::Reuse(t), Source::Reuse(t)),
                    (true, false) => (Source::Reuse(t), Source::Given(t, fresh_for(id))),
                    (false, true) => (Source::Given(t, fresh_for(id)), Source::Reuse(t)),
                    (false, false) => {
                        let f = fresh_for(id);
                        (Source::Fresh(f), Source::FreshPair(f))
                    }
                },
                None => {
                    let f = fresh_for(id);
                    (Source::Fresh(f), Source::FreshPair(f))
                }
            };
            buyer.push(b);
            seller.push(s);
        }
        let mut fresh_policy = Vec::new();
        let policy = target
            .policy_ids
            .iter()
            .map(|&id| match sample.policy.get(&id) {
                Some(&t) => Source::Reuse(t),
                None => {
                    let mut r = stream(sample.seed, Purpose::PredictNew, &[1, id]);
                    let z: Vec<f64> = if latent {
                        (0..m).map(|_| StandardNormal.sample(&mut r)).collect()
                    } else {
                        Vec::new()
                    };
                    fresh_policy.push(z);
                    Source::Fresh(fresh_policy.len() - 1)
                }
            })
            .collect();
        Self {
            sample,
            buyer,
            seller,
            policy,
            fresh_entity,
            fresh_policy,
        }
    }

    pub fn len(&self) -> usize {
        self.sample.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample.is_empty()
    }

    fn buyer_value(&self, src: Source, m: usize) -> f64 {
        let rho = self.sample.theta.rho;
        match src {
            Source::Reuse(t) => self.sample.draws[m].buyer[t],
            Source::Given(t, f) => {
                rho * self.sample.draws[m].seller[t] + (1.0 - rho * rho).sqrt() * self.fresh_entity[f][m][0]
            }
            Source::Fresh(f) => self.fresh_entity[f][m][0],
            Source::FreshPair(_) => unreachable!("buyer effects are never paired"),
        }
    }

    fn seller_value(&self, src: Source, m: usize) -> f64 {
        let rho = self.sample.theta.rho;
        let z = |f: usize| self.fresh_entity[f][m];
        match src {
            Source::Reuse(t) => self.sample.draws[m].seller[t],
            Source::Given(t, f) => rho * self.sample.draws[m].buyer[t] + (1.0 - rho * rho).sqrt() * z(f)[1],
            Source::FreshPair(f) => rho * z(f)[0] + (1.0 - rho * rho).sqrt() * z(f)[1],
            Source::Fresh(_) => unreachable!("new seller effects are always paired"),
        }
    }

    /// Draw `m` of `(B~, S~, P~)` for connection `k` of the target data.
    pub fn get(&self, target: &ModelData, k: usize, m: usize) -> [f64; 3] {
        if self.sample.theta.is_glm() {
            return [0.0; 3];
        }
        let p = match self.policy[target.policy[k]] {
            Source::Reuse(t) => self.sample.draws[m].policy[t],
            Source::Fresh(f) => self.fresh_policy[f][m],
            _ => unreachable!("policies have no second role"),
        };
        [
            self.buyer_value(self.buyer[target.buyer[k]], m),
            self.seller_value(self.seller[target.seller[k]], m),
            p,
        ]
    }
}

/// Scores of one connection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectionScore {
    pub id: u64,
    pub observed_claim: bool,
    /// Posterior probability of a claim, reported or not.
    pub p_pos: f64,
    /// Monte Carlo standard error of `p_pos`.
    pub p_pos_se: f64,
    /// Posterior probability of a claim reported by the window end.
    pub p_star: f64,
    /// Posterior probability of an unreported claim; only for open connections.
    pub p_ur: Option<f64>,
}

/// Scores of a whole dataset with the portfolio reserve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub scores: Vec<ConnectionScore>,
    /// Sum of `p_ur` over open connections.
    pub reserve: f64,
    /// Connections without a reported claim.
    pub open: usize,
}

struct Moments {
    p_pos: f64,
    p_pos_se: f64,
    p_star: f64,
    p_ur: f64,
}

fn moments(target: &ModelData, draws: &PosteriorDraws, shape: &GammaShape, k: usize) -> Moments {
    let theta = &draws.sample.theta;
    let row = target.design.row(k);
    let fz: f64 = row.iter().zip(&theta.alpha).map(|(x, a)| x * a).sum();
    let ft: f64 = row.iter().zip(&theta.gamma).map(|(x, g)| x * g).sum();
    let c = target.window[k];
    let m = draws.len();
    let (mut s1, mut s2, mut star, mut ur) = (0.0, 0.0, 0.0, 0.0);
    for d in 0..m {
        let l = draws.get(target, k, d);
        let ez = fz + dot3(&l, &theta.beta);
        let mu = (ft + dot3(&l, &theta.nu)).clamp(-ETA_BOUND, ETA_BOUND).exp();
        let p = logistic(ez);
        let ln_surv = ln_gap_survival_with(c, mu, theta.psi, shape);
        s1 += p;
        s2 += p * p;
        star += p * -ln_surv.exp_m1();
        ur += claim_weight(false, ez, ln_surv);
    }
    let n = m as f64;
    let mean = s1 / n;
    let var = if m > 1 { ((s2 - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    Moments {
        p_pos: mean,
        p_pos_se: (var / n).sqrt(),
        p_star: star / n,
        p_ur: ur / n,
    }
}

fn check_target(target: &ModelData, draws: &PosteriorDraws) -> Result<()> {
    if target.p() != draws.sample.theta.p() {
        return Err(Error::Contract(format!(
            "model has {} covariates, data {}",
            draws.sample.theta.p(),
            target.p()
        )));
    }
    Ok(())
}

/// Posterior claim probability of connection `k` and its Monte Carlo
/// standard error.
pub fn posterior_claim_prob(target: &ModelData, draws: &PosteriorDraws, k: usize) -> Result<(f64, f64)> {
    check_target(target, draws)?;
    let shape = GammaShape::new(1.0 / draws.sample.theta.psi);
    let m = moments(target, draws, &shape, k);
    Ok((m.p_pos, m.p_pos_se))
}

/// Posterior probability that open connection `k` carries an unreported claim.
pub fn unreported_claim_prob(target: &ModelData, draws: &PosteriorDraws, k: usize) -> Result<f64> {
    check_target(target, draws)?;
    if target.observed_claim[k] {
        return Err(Error::Contract(format!(
            "connection {} has a reported claim; its unreported probability is undefined",
            target.connection_ids[k]
        )));
    }
    let shape = GammaShape::new(1.0 / draws.sample.theta.psi);
    Ok(moments(target, draws, &shape, k).p_ur)
}

/// Scores every connection of `target`.
pub fn score(target: &ModelData, sample: &PosteriorSample) -> Result<ScoreReport> {
    let draws = PosteriorDraws::new(sample, target);
    check_target(target, &draws)?;
    let shape = GammaShape::new(1.0 / sample.theta.psi);
    let scores: Vec<ConnectionScore> = (0..target.n())
        .into_par_iter()
        .map(|k| {
            let m = moments(target, &draws, &shape, k);
            let open = !target.observed_claim[k];
            ConnectionScore {
                id: target.connection_ids[k],
                observed_claim: target.observed_claim[k],
                p_pos: m.p_pos,
                p_pos_se: m.p_pos_se,
                p_star: m.p_star,
                p_ur: open.then_some(m.p_ur),
            }
        })
        .collect();
    let open = scores.iter().filter(|s| !s.observed_claim).count();
    Ok(ScoreReport {
        reserve: reserve(&scores),
        open,
        scores,
    })
}

/// Expected number of unreported claims: the sum of `p_ur` over open connections.
pub fn reserve(scores: &[ConnectionScore]) -> f64 {
    scores.iter().filter_map(|s| s.p_ur).sum()
}

/// Sum of absolute deviations between predicted probabilities and 0/1 outcomes.
pub fn adev(predictions: &[f64], outcomes: &[bool]) -> Result<f64> {
    if predictions.len() != outcomes.len() {
        return Err(Error::Contract(format!(
            "{} predictions for {} outcomes",
            predictions.len(),
            outcomes.len()
        )));
    }
    Ok(predictions
        .iter()
        .zip(outcomes)
        .map(|(&p, &y)| (if y { 1.0 } else { 0.0 } - p).abs())
        .sum())
}

/// Absolute deviances of the three probability types.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdevTable {
    /// `p_star` against the reported-claim flag, all connections.
    pub observed: f64,
    /// `p_ur` against the actual claim, open connections.
    pub unreported: f64,
    /// `p_pos` against the actual claim, all connections.
    pub complete: f64,
}

/// Scores `report` against the actual claim indicators, in connection order.
pub fn adev_table(report: &ScoreReport, actual_claim: &[bool]) -> Result<AdevTable> {
    if actual_claim.len() != report.scores.len() {
        return Err(Error::Contract(format!(
            "{} outcomes for {} scored connections",
            actual_claim.len(),
            report.scores.len()
        )));
    }
    if let Some(s) = report.scores.iter().zip(actual_claim).find(|(s, &z)| s.observed_claim && !z) {
        return Err(Error::Contract(format!(
            "connection {} has a reported claim but no actual claim",
            s.0.id
        )));
    }
    let star: Vec<f64> = report.scores.iter().map(|s| s.p_star).collect();
    let flags: Vec<bool> = report.scores.iter().map(|s| s.observed_claim).collect();
    let pos: Vec<f64> = report.scores.iter().map(|s| s.p_pos).collect();
    let (ur, ur_out): (Vec<f64>, Vec<bool>) = report
        .scores
        .iter()
        .zip(actual_claim)
        .filter_map(|(s, &z)| s.p_ur.map(|p| (p, z)))
        .unzip();
    Ok(AdevTable {
        observed: adev(&star, &flags)?,
        unreported: adev(&ur, &ur_out)?,
        complete: adev(&pos, actual_claim)?,
    })
}
