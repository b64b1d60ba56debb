//! Random-walk Metropolis–Hastings sweeps over the buyer, seller and policy
//! effects at fixed parameters.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::Result;
use crate::likelihood::{conn_obs_loglik, dot3, LatentState, ModelData, ParameterSet};
use crate::rng::{stream, Purpose};
use crate::special::GammaShape;

/// Latent family updated by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Buyer = 0,
    Seller = 1,
    Policy = 2,
}

/// Stream tags of the three sweeps; training and prediction use disjoint sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepStreams {
    pub buyer: Purpose,
    pub seller: Purpose,
    pub policy: Purpose,
}

impl SweepStreams {
    pub const FIT: Self = Self {
        buyer: Purpose::BuyerSweep,
        seller: Purpose::SellerSweep,
        policy: Purpose::PolicySweep,
    };
    pub const PREDICT: Self = Self {
        buyer: Purpose::PredictBuyer,
        seller: Purpose::PredictSeller,
        policy: Purpose::PredictPolicy,
    };
    pub const STDERR: Self = Self {
        buyer: Purpose::StdErrBuyer,
        seller: Purpose::StdErrSeller,
        policy: Purpose::StdErrPolicy,
    };
}

/// Accepted and attempted proposals of one or more sweeps, per family.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Acceptance {
    pub accepted: [u64; 3],
    pub proposed: [u64; 3],
    /// Proposals rejected because the acceptance ratio was not finite.
    pub non_finite: u64,
}

impl Acceptance {
    pub fn add(&mut self, other: &Acceptance) {
        for f in 0..3 {
            self.accepted[f] += other.accepted[f];
            self.proposed[f] += other.proposed[f];
        }
        self.non_finite += other.non_finite;
    }

    pub fn rates(&self) -> [f64; 3] {
        std::array::from_fn(|f| {
            if self.proposed[f] == 0 {
                0.0
            } else {
                self.accepted[f] as f64 / self.proposed[f] as f64
            }
        })
    }
}

/// MH chain over all latent effects with a per-connection log-likelihood cache.
pub struct Sampler<'a> {
    data: &'a ModelData,
    theta: ParameterSet,
    shape: GammaShape,
    fixed_z: Vec<f64>,
    fixed_t: Vec<f64>,
    latents: LatentState,
    ll: Vec<f64>,
    seed: u64,
    streams: SweepStreams,
}

impl<'a> Sampler<'a> {
    pub fn new(data: &'a ModelData, theta: ParameterSet, latents: LatentState, seed: u64, streams: SweepStreams) -> Result<Self> {
        theta.validate()?;
        let mut s = Self {
            data,
            shape: GammaShape::new(1.0 / theta.psi),
            fixed_z: data.fixed_predictor(&theta.alpha),
            fixed_t: data.fixed_predictor(&theta.gamma),
            theta,
            latents,
            ll: Vec::new(),
            seed,
            streams,
        };
        s.refresh();
        Ok(s)
    }

    fn refresh(&mut self) {
        self.ll = (0..self.data.n())
            .into_par_iter()
            .map(|k| self.conn_ll(k, self.data.latent_row(&self.latents, k)))
            .collect();
    }

    /// Replaces the parameters and rebuilds the cached predictors.
    pub fn set_params(&mut self, theta: ParameterSet) -> Result<()> {
        theta.validate()?;
        self.shape = GammaShape::new(1.0 / theta.psi);
        self.fixed_z = self.data.fixed_predictor(&theta.alpha);
        self.fixed_t = self.data.fixed_predictor(&theta.gamma);
        self.theta = theta;
        self.refresh();
        Ok(())
    }

    pub fn params(&self) -> &ParameterSet {
        &self.theta
    }

    pub fn latents(&self) -> &LatentState {
        &self.latents
    }

    /// Mutable access for the identifiability flip; the caller restores the
    /// cache with [`set_params`](Self::set_params).
    pub fn latents_mut(&mut self) -> &mut LatentState {
        &mut self.latents
    }

    /// Sum of the cached connection log-likelihoods.
    pub fn loglik(&self) -> f64 {
        self.ll.iter().sum()
    }

    /// Linear predictors of connection `k` with latent row `l`.
    #[inline]
    pub fn predictors(&self, k: usize, l: [f64; 3]) -> (f64, f64) {
        (
            self.fixed_z[k] + dot3(&l, &self.theta.beta),
            self.fixed_t[k] + dot3(&l, &self.theta.nu),
        )
    }

    #[inline]
    fn conn_ll(&self, k: usize, l: [f64; 3]) -> f64 {
        let (ez, et) = self.predictors(k, l);
        conn_obs_loglik(
            self.data.observed_claim[k],
            self.data.observed_gap[k],
            self.data.window[k],
            ez,
            et,
            self.theta.psi,
            &self.shape,
        )
    }

    fn members(&self, family: Family, i: usize) -> &'a [usize] {
        match family {
            Family::Buyer => &self.data.by_buyer[i],
            Family::Seller => &self.data.by_seller[i],
            Family::Policy => &self.data.by_policy[i],
        }
    }

    fn value(&self, family: Family, i: usize) -> f64 {
        match family {
            Family::Buyer => self.latents.buyer[i],
            Family::Seller => self.latents.seller[i],
            Family::Policy => self.latents.policy[i],
        }
    }

    fn log_prior_ratio(&self, family: Family, i: usize, proposal: f64) -> f64 {
        let rho = self.theta.rho;
        let one_m = 1.0 - rho * rho;
        match family {
            Family::Buyer => {
                let (b, s) = (self.latents.buyer[i], self.latents.seller[i]);
                -(proposal * proposal - b * b - 2.0 * rho * s * (proposal - b)) / (2.0 * one_m)
            }
            Family::Seller => {
                let (b, s) = (self.latents.buyer[i], self.latents.seller[i]);
                -(proposal * proposal - s * s - 2.0 * rho * b * (proposal - s)) / (2.0 * one_m)
            }
            Family::Policy => {
                let p = self.latents.policy[i];
                -0.5 * (proposal * proposal - p * p)
            }
        }
    }

    /// Log acceptance ratio of moving unit `i` of `family` to `proposal`,
    /// together with the connection log-likelihoods under the proposal.
    pub fn log_ratio(&self, family: Family, i: usize, proposal: f64) -> (f64, Vec<f64>) {
        let mut diff = self.log_prior_ratio(family, i, proposal);
        let members = self.members(family, i);
        let mut new_ll = Vec::with_capacity(members.len());
        for &k in members {
            let mut l = self.data.latent_row(&self.latents, k);
            l[family as usize] = proposal;
            let v = self.conn_ll(k, l);
            diff += v - self.ll[k];
            new_ll.push(v);
        }
        (diff, new_ll)
    }

    fn units(&self, family: Family) -> usize {
        match family {
            Family::Policy => self.data.n_policies,
            _ => self.data.n_entities,
        }
    }

    fn key(&self, family: Family, i: usize) -> u64 {
        match family {
            Family::Policy => self.data.policy_ids[i],
            _ => self.data.entity_ids[i],
        }
    }

    fn purpose(&self, family: Family) -> Purpose {
        match family {
            Family::Buyer => self.streams.buyer,
            Family::Seller => self.streams.seller,
            Family::Policy => self.streams.policy,
        }
    }

    /// One MH pass over every unit of `family`. Proposals are evaluated in
    /// parallel (their likelihood footprints are disjoint) and applied in
    /// index order, so the result does not depend on the worker count.
    pub fn sweep_family(&mut self, family: Family, counters: &[u64]) -> Acceptance {
        let purpose = self.purpose(family);
        let decisions: Vec<(bool, Option<(f64, Vec<f64>)>)> = (0..self.units(family))
            .into_par_iter()
            .map(|i| {
                let mut key = counters.to_vec();
                key.push(self.key(family, i));
                let mut rng = stream(self.seed, purpose, &key);
                let step: f64 = rng.sample(StandardNormal);
                let proposal = self.value(family, i) + step;
                let (ratio, new_ll) = self.log_ratio(family, i, proposal);
                let u: f64 = rng.random();
                if !ratio.is_finite() {
                    return (true, None);
                }
                if u.ln() < ratio {
                    (false, Some((proposal, new_ll)))
                } else {
                    (false, None)
                }
            })
            .collect();

        let f = family as usize;
        let mut acc = Acceptance::default();
        for (i, (non_finite, decision)) in decisions.into_iter().enumerate() {
            acc.proposed[f] += 1;
            if non_finite {
                acc.non_finite += 1;
            }
            if let Some((value, new_ll)) = decision {
                acc.accepted[f] += 1;
                match family {
                    Family::Buyer => self.latents.buyer[i] = value,
                    Family::Seller => self.latents.seller[i] = value,
                    Family::Policy => self.latents.policy[i] = value,
                }
                for (&k, v) in self.members(family, i).iter().zip(new_ll) {
                    self.ll[k] = v;
                }
            }
        }
        acc
    }

    /// One MH sub-iteration: buyers, then sellers, then policies.
    pub fn sweep(&mut self, counters: &[u64]) -> Acceptance {
        let mut acc = self.sweep_family(Family::Buyer, counters);
        acc.add(&self.sweep_family(Family::Seller, counters));
        acc.add(&self.sweep_family(Family::Policy, counters));
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::obs_loglik_conditional;
    use crate::likelihood::testdata::random_instance;

    #[test]
    fn cache_tracks_full_likelihood() {
        let (data, theta, latents) = random_instance(60, 3, 8, 6, 21);
        let mut s = Sampler::new(&data, theta.clone(), latents, 5, SweepStreams::FIT).unwrap();
        for m in 0..5 {
            s.sweep(&[1, m]);
        }
        let full = obs_loglik_conditional(&data, &theta, s.latents()).unwrap();
        assert!((s.loglik() - full).abs() < 1e-9 * full.abs());
    }

    #[test]
    fn staying_put_is_always_accepted() {
        let (data, theta, latents) = random_instance(30, 3, 6, 4, 2);
        let s = Sampler::new(&data, theta, latents, 5, SweepStreams::FIT).unwrap();
        for family in [Family::Buyer, Family::Seller, Family::Policy] {
            for i in 0..4 {
                let (r, _) = s.log_ratio(family, i, s.value(family, i));
                assert_eq!(r, 0.0);
            }
        }
    }

    #[test]
    fn sweeps_are_reproducible_across_thread_counts() {
        let (data, theta, latents) = random_instance(200, 3, 30, 20, 8);
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                let mut s = Sampler::new(&data, theta.clone(), latents.clone(), 9, SweepStreams::FIT).unwrap();
                for m in 0..4 {
                    s.sweep(&[3, m]);
                }
                s.latents().clone()
            })
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn prior_only_unit_has_conditional_normal_marginal() {
        // entity 0 is never a buyer, so its buyer effect follows N(rho S, 1 - rho^2)
        let (mut data, mut theta, mut latents) = random_instance(20, 2, 4, 3, 4);
        for k in 0..data.n() {
            if data.buyer[k] == 0 {
                data.buyer[k] = 1;
            }
        }
        data.by_buyer = vec![Vec::new(); 4];
        for k in 0..data.n() {
            data.by_buyer[data.buyer[k]].push(k);
        }
        theta.rho = 0.6;
        latents.seller[0] = 1.5;
        let mut s = Sampler::new(&data, theta, latents, 17, SweepStreams::FIT).unwrap();
        let n = 40_000;
        let mut draws = Vec::with_capacity(n);
        for m in 0..n as u64 {
            s.sweep_family(Family::Buyer, &[m]);
            draws.push(s.latents().buyer[0]);
        }
        let burn = 500;
        let kept = &draws[burn..];
        let mean = kept.iter().sum::<f64>() / kept.len() as f64;
        // batch means for the MC standard error
        let batch = 400;
        let means: Vec<f64> = kept.chunks(batch).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
        let bm = means.iter().sum::<f64>() / means.len() as f64;
        let var = means.iter().map(|m| (m - bm).powi(2)).sum::<f64>() / (means.len() - 1) as f64;
        let se = (var / means.len() as f64).sqrt();
        assert!((mean - 0.9).abs() < 3.0 * se, "mean {mean} se {se}");
    }
}
