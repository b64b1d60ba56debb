//! Synthetic portfolios drawn from the model with known parameters.
//!
//! The network is grown policy by policy: sellers are picked with
//! probability proportional to `(1 + out-degree)^kappa`, buyers uniformly
//! without replacement. Covariates are drawn independently from published
//! marginals; latent effects, claims and reporting gaps follow the model.
//! Dates live on a daily grid so a dataset survives a CSV round trip.

use chrono::{Datelike, NaiveDate};
use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Exp, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::centrality::{covariate_names, featurize_connections, DesignMatrix, Scaling, WeightScheme};
use crate::error::{Error, Result};
use crate::graph::{
    build_graph, observe, BusinessType, ConnectionId, ConnectionRow, EntityCovariates, EntityId, EntityRow, Industry,
    NetworkGraph, PolicyId, PolicyRow, PolicyType, SalesBucket, DAYS_PER_YEAR,
};
use crate::likelihood::{dot, dot3, LatentState, ParameterSet};
use crate::rng::{stream, Purpose};
use crate::special::{logistic, GammaShape, ETA_BOUND};

/// Category proportions of the entity covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateMix {
    /// In the order of [`BusinessType::ALL`].
    pub business_type: [f64; 5],
    /// In the order of [`Industry::ALL`].
    pub industry: [f64; 4],
    /// In the order of [`SalesBucket::ALL`].
    pub sales: [f64; 4],
    /// Mean business age at the origin, in years.
    pub mean_age: f64,
    /// Yearly probability that an entity moves to a new sales bucket.
    pub sales_drift: f64,
}

impl Default for CovariateMix {
    /// Averages of the seller-side and buyer-side proportions of the
    /// portfolio summary statistics.
    fn default() -> Self {
        Self {
            business_type: [0.089, 0.018, 0.691, 0.161, 0.041],
            industry: [0.486, 0.368, 0.029, 0.117],
            sales: [0.306, 0.332, 0.283, 0.079],
            mean_age: 13.6,
            sales_drift: 0.1,
        }
    }
}

/// Generator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub n_entities: usize,
    pub n_policies: usize,
    pub n_connections: usize,
    /// Length of the observation period; policies start uniformly within it.
    pub years: usize,
    pub origin: NaiveDate,
    /// Evaluation date in years since the origin; defaults to the end of
    /// the observation period.
    pub tau: Option<f64>,
    pub multiple_buyer_share: f64,
    /// Preferential-attachment exponent of the seller choice.
    pub attachment: f64,
    /// Policy duration in days.
    pub policy_days: i64,
    pub covariates: CovariateMix,
    pub weight_scheme: WeightScheme,
    /// Ground truth; [`default_truth`] when absent.
    pub params: Option<ParameterSet>,
    /// Shift the claim intercept so the mean claim probability hits this.
    pub target_claim_rate: Option<f64>,
    /// Shift the gap intercept so this expected share of claims is reported
    /// after the evaluation date.
    pub target_truncated_share: Option<f64>,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            n_entities: 2000,
            n_policies: 8000,
            n_connections: 20000,
            years: 5,
            origin: NaiveDate::from_ymd_opt(2015, 1, 1).expect("valid date"),
            tau: None,
            multiple_buyer_share: 0.736,
            attachment: 0.5,
            policy_days: 365,
            covariates: CovariateMix::default(),
            weight_scheme: WeightScheme::Unit,
            params: None,
            target_claim_rate: Some(0.025),
            target_truncated_share: None,
            seed: 1,
        }
    }
}

impl GenConfig {
    /// A small configuration for tests and examples.
    pub fn small(seed: u64) -> Self {
        Self {
            n_entities: 60,
            n_policies: 120,
            n_connections: 300,
            years: 3,
            target_claim_rate: Some(0.2),
            seed,
            ..Self::default()
        }
    }

    /// Policies start on a day in `0..start_days()`.
    fn start_days(&self) -> i64 {
        ((self.years as f64 * DAYS_PER_YEAR).round() as i64).min(self.tau_days())
    }

    fn tau_days(&self) -> i64 {
        match self.tau {
            Some(t) => (t * DAYS_PER_YEAR).round() as i64,
            None => (self.years as f64 * DAYS_PER_YEAR).round() as i64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_entities < 2 || self.n_policies == 0 || self.n_connections == 0 || self.years == 0 {
            return bad("entity, policy, connection and year counts must be positive (at least 2 entities)".into());
        }
        if !(0.0..=1.0).contains(&self.multiple_buyer_share) {
            return bad(format!("multiple-buyer share {} outside [0, 1]", self.multiple_buyer_share));
        }
        let multi = self.n_multi();
        let single = self.n_policies - multi;
        if multi > 0 && self.n_entities < 3 {
            return bad("multiple-buyer policies need at least 3 entities".into());
        }
        let min = single + 2 * multi;
        let max = single + multi * (self.n_entities - 1);
        if self.n_connections < min || self.n_connections > max {
            return bad(format!(
                "{} connections cannot be spread over {single} single-buyer and {multi} multiple-buyer policies \
                 (feasible range {min}..={max})",
                self.n_connections
            ));
        }
        if self.policy_days <= 0 {
            return bad("policy duration must be positive".into());
        }
        if self.tau_days() <= 0 {
            return bad("evaluation date must be after the origin".into());
        }
        if let Some(r) = self.target_claim_rate {
            if !(r > 0.0 && r < 1.0) {
                return bad(format!("target claim rate {r} outside (0, 1)"));
            }
        }
        if let Some(r) = self.target_truncated_share {
            if !(r > 0.0 && r < 1.0) {
                return bad(format!("target truncated share {r} outside (0, 1)"));
            }
        }
        let mix = &self.covariates;
        let ok = |w: &[f64]| w.iter().all(|&x| x >= 0.0 && x.is_finite()) && w.iter().sum::<f64>() > 0.0;
        if !ok(&mix.business_type) || !ok(&mix.industry) || !ok(&mix.sales) {
            return bad("category proportions must be non-negative with a positive total".into());
        }
        if let Some(p) = &self.params {
            p.validate()?;
            if p.p() != covariate_names().len() {
                return bad(format!("ground truth has {} fixed effects, the design {}", p.p(), covariate_names().len()));
            }
        }
        Ok(())
    }

    fn n_multi(&self) -> usize {
        (self.multiple_buyer_share * self.n_policies as f64).round() as usize
    }
}

/// Default ground truth: signs loosely follow the fitted claim and gap
/// models of a real portfolio, with moderate latent loadings.
pub fn default_truth() -> ParameterSet {
    let names = covariate_names();
    let mut alpha = vec![0.0; names.len()];
    let mut gamma = vec![0.0; names.len()];
    let set = |v: &mut Vec<f64>, name: &str, x: f64| {
        let j = names.iter().position(|n| n == name).expect("known column");
        v[j] = x;
    };
    for (name, a, g) in [
        ("intercept", -1.5, 0.0),
        ("total_insured_amount", -0.10, 0.15),
        ("buyer_insured_amount", 0.30, -0.15),
        ("avg_turnover_ratio", 0.25, -0.10),
        ("buyer_turnover_ratio", -0.40, 0.05),
        ("policy_single_buyer", 0.30, 0.10),
        ("seller_biz_sole_proprietorship", 0.20, 0.05),
        ("seller_biz_acc", -0.15, 0.0),
        ("buyer_biz_acc", -0.20, 0.05),
        ("buyer_biz_listed", -0.60, 0.10),
        ("seller_industry_wholesale", 0.10, -0.05),
        ("buyer_industry_manufacturing", -0.15, -0.10),
        ("buyer_industry_professional_services", -0.40, 0.0),
        ("seller_business_age", -0.05, 0.0),
        ("buyer_business_age", -0.20, 0.05),
        ("seller_sales_small", 0.15, 0.0),
        ("buyer_sales_large", -0.20, 0.05),
        ("seller_DC_O", 0.10, 0.05),
        ("buyer_DC_I", 0.15, -0.10),
        ("buyer_DC_OO", 0.05, 0.10),
    ] {
        set(&mut alpha, name, a);
        set(&mut gamma, name, g);
    }
    ParameterSet {
        alpha,
        beta: [0.6, 0.5, 0.4],
        gamma,
        nu: [0.3, 0.25, 0.2],
        psi: 0.5,
        rho: 0.4,
    }
}

/// What the generator knows and the observer does not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Generating parameters, after intercept calibration.
    pub params: ParameterSet,
    /// Per connection, in ascending id order.
    pub connection_ids: Vec<ConnectionId>,
    pub actual_claim: Vec<bool>,
    /// Actual reporting gap in years (on the daily grid); infinite without a claim.
    pub actual_gap: Vec<f64>,
    /// `(B, S, P)` of each connection.
    pub latent_rows: Vec<[f64; 3]>,
    /// Entity and policy effects, indexed densely in ascending id order.
    pub latents: LatentState,
    /// Model claim probability of each connection.
    pub claim_prob: Vec<f64>,
}

impl GroundTruth {
    /// Number of actual claims reported after the evaluation date.
    pub fn unreported(&self, g: &NetworkGraph) -> usize {
        self.actual_claim
            .iter()
            .zip(g.connections())
            .filter(|(&z, c)| z && !c.observed_claim)
            .count()
    }

    pub fn actual_claims(&self) -> usize {
        self.actual_claim.iter().filter(|&&z| z).count()
    }
}

/// Output of [`generate`].
#[derive(Debug, Clone)]
pub struct Generated {
    pub graph: NetworkGraph,
    pub truth: GroundTruth,
    /// Standardized design of the full portfolio and its scaling.
    pub design: DesignMatrix,
    pub scaling: Scaling,
}

fn log_uniform(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (r.random_range(lo.ln()..hi.ln())).exp()
}

fn pick<T: Copy>(r: &mut ChaCha8Rng, items: &[T], w: &WeightedIndex<f64>) -> T {
    items[w.sample(r)]
}

fn entity_rows(config: &GenConfig, r: &mut ChaCha8Rng) -> Result<Vec<EntityRow>> {
    let mix = &config.covariates;
    let werr = |e: rand_distr::weighted::Error| Error::Config(format!("category proportions: {e}"));
    let wb = WeightedIndex::new(mix.business_type).map_err(werr)?;
    let wi = WeightedIndex::new(mix.industry).map_err(werr)?;
    let ws = WeightedIndex::new(mix.sales).map_err(werr)?;
    let age = Exp::new(1.0 / mix.mean_age.max(1e-6)).map_err(|e| Error::Config(format!("mean age: {e}")))?;
    let first = config.origin.year();
    let last = (config.origin + chrono::Duration::days(config.start_days() + config.policy_days)).year();
    let mut rows = Vec::with_capacity(config.n_entities * (last - first + 1) as usize);
    for i in 0..config.n_entities {
        let id = EntityId(i as u64 + 1);
        let business_type = pick(r, BusinessType::ALL, &wb);
        let industry = pick(r, Industry::ALL, &wi);
        let mut sales = pick(r, SalesBucket::ALL, &ws);
        let age0 = age.sample(r).floor().min(89.0);
        for year in first..=last {
            if year > first && r.random_bool(mix.sales_drift) {
                sales = pick(r, SalesBucket::ALL, &ws);
            }
            rows.push(EntityRow {
                id,
                year,
                covariates: EntityCovariates {
                    business_type,
                    industry,
                    business_age: age0 + (year - first) as f64,
                    sales,
                },
            });
        }
    }
    Ok(rows)
}

/// Policies and their (not yet observed) connections.
fn network(config: &GenConfig, r: &mut ChaCha8Rng) -> Result<(Vec<PolicyRow>, Vec<ConnectionRow>)> {
    let n = config.n_entities;
    let multi = config.n_multi();
    let single = config.n_policies - multi;
    // buyer counts: policies 0..single are single-buyer, the rest start at two
    let mut counts: Vec<usize> = (0..config.n_policies).map(|j| if j < single { 1 } else { 2 }).collect();
    let mut extra = config.n_connections - single - 2 * multi;
    while extra > 0 {
        let j = single + r.random_range(0..multi);
        if counts[j] < n - 1 {
            counts[j] += 1;
            extra -= 1;
        }
    }
    // shuffle which policies are single-buyer so ids carry no signal
    for j in (1..counts.len()).rev() {
        let i = r.random_range(0..=j);
        counts.swap(i, j);
    }
    let span = config.start_days();
    let mut starts: Vec<i64> = (0..config.n_policies).map(|_| r.random_range(0..span)).collect();
    starts.sort_unstable();

    let mut out_degree = vec![0usize; n];
    let mut policies = Vec::with_capacity(config.n_policies);
    let mut connections = Vec::with_capacity(config.n_connections);
    for (j, (&count, &start)) in counts.iter().zip(&starts).enumerate() {
        let weights: Vec<f64> = out_degree.iter().map(|&d| (1.0 + d as f64).powf(config.attachment)).collect();
        let seller = WeightedIndex::new(&weights)
            .map_err(|e| Error::Numerical(format!("seller weights: {e}")))?
            .sample(r);
        let id = PolicyId(j as u64 + 1);
        policies.push(PolicyRow {
            id,
            seller: EntityId(seller as u64 + 1),
            start: start as f64 / DAYS_PER_YEAR,
            end: (start + config.policy_days) as f64 / DAYS_PER_YEAR,
            policy_type: if count == 1 { PolicyType::SingleBuyer } else { PolicyType::MultipleBuyer },
            total_insured_amount: log_uniform(r, 1.0, 9800.0),
            avg_turnover_ratio: log_uniform(r, 2.0, 80.0),
        });
        let mut buyers: Vec<usize> = sample(r, n - 1, count)
            .into_iter()
            .map(|b| if b >= seller { b + 1 } else { b })
            .collect();
        buyers.sort_unstable();
        for b in buyers {
            connections.push(ConnectionRow {
                id: ConnectionId(connections.len() as u64 + 1),
                policy: id,
                buyer: EntityId(b as u64 + 1),
                insured_amount: log_uniform(r, 1.0, 1000.0),
                turnover_ratio: log_uniform(r, 2.0, 189.0),
                observed_claim: false,
                observed_gap: f64::INFINITY,
            });
        }
        out_degree[seller] += count;
    }
    Ok((policies, connections))
}

/// Root of an increasing function on `[lo, hi]` by bisection.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Draws a synthetic portfolio and its ground truth.
pub fn generate(config: &GenConfig) -> Result<Generated> {
    config.validate()?;
    let mut r = stream(config.seed, Purpose::Generate, &[0]);
    let entity_rows = entity_rows(config, &mut r)?;
    let (policy_rows, mut connection_rows) = network(config, &mut r)?;
    let tau = config.tau_days() as f64 / DAYS_PER_YEAR;

    // features do not depend on outcomes, so the design of the final graph
    // equals that of the outcome-free one
    let bare = build_graph(config.origin, entity_rows.clone(), policy_rows.clone(), connection_rows.clone(), tau)?;
    let (design, scaling) = featurize_connections(&bare, config.weight_scheme)?;

    let mut params = config.params.clone().unwrap_or_else(default_truth);
    let n_ent = bare.entities().len();
    let n_pol = bare.policies().len();
    let mut lr = stream(config.seed, Purpose::Generate, &[1]);
    let mut latents = LatentState::zeros(n_ent, n_pol);
    let sq = (1.0 - params.rho * params.rho).sqrt();
    for i in 0..n_ent {
        let z1: f64 = lr.sample(StandardNormal);
        let z2: f64 = lr.sample(StandardNormal);
        latents.buyer[i] = z1;
        latents.seller[i] = params.rho * z1 + sq * z2;
    }
    for j in 0..n_pol {
        latents.policy[j] = lr.sample(StandardNormal);
    }
    let n = bare.connections().len();
    let latent_rows: Vec<[f64; 3]> = (0..n)
        .map(|k| [latents.buyer[bare.buyer_of(k)], latents.seller[bare.seller_of(k)], latents.policy[bare.policy_of(k)]])
        .collect();
    let eta_z: Vec<f64> = (0..n)
        .map(|k| dot(design.row(k), &params.alpha) + dot3(&latent_rows[k], &params.beta))
        .collect();
    if let Some(target) = config.target_claim_rate {
        let shift = bisect(|s| eta_z.iter().map(|e| logistic(e + s)).sum::<f64>() / n as f64 - target, -40.0, 40.0);
        params.alpha[0] += shift;
    }
    let claim_prob: Vec<f64> = (0..n)
        .map(|k| logistic(dot(design.row(k), &params.alpha) + dot3(&latent_rows[k], &params.beta)))
        .collect();
    let eta_t: Vec<f64> = (0..n)
        .map(|k| dot(design.row(k), &params.gamma) + dot3(&latent_rows[k], &params.nu))
        .collect();
    let shape = GammaShape::new(1.0 / params.psi);
    if let Some(target) = config.target_truncated_share {
        let total: f64 = claim_prob.iter().sum();
        let share = |s: f64| {
            (0..n)
                .map(|k| {
                    let mu = (eta_t[k] + s).clamp(-ETA_BOUND, ETA_BOUND).exp();
                    claim_prob[k] * shape.ln_upper(bare.window(k) / (params.psi * mu)).exp()
                })
                .sum::<f64>()
                / total
        };
        params.gamma[0] += bisect(|s| share(s) - target, -20.0, 20.0);
    }

    let mut or = stream(config.seed, Purpose::Generate, &[2]);
    let gamma_unit = Gamma::new(1.0 / params.psi, 1.0).map_err(|e| Error::Domain(format!("gap law: {e}")))?;
    let mut actual_claim = Vec::with_capacity(n);
    let mut actual_gap = Vec::with_capacity(n);
    for k in 0..n {
        let z = or.random::<f64>() < claim_prob[k];
        let t = if z {
            let eta = dot(design.row(k), &params.gamma) + dot3(&latent_rows[k], &params.nu);
            let mu = eta.clamp(-ETA_BOUND, ETA_BOUND).exp();
            let raw = gamma_unit.sample(&mut or) * params.psi * mu;
            // report dates are whole days after the start
            (raw * DAYS_PER_YEAR).ceil().max(1.0) / DAYS_PER_YEAR
        } else {
            f64::INFINITY
        };
        actual_claim.push(z);
        actual_gap.push(t);
    }
    // bare connections are in ascending id order, as are the rows
    for (k, c) in connection_rows.iter_mut().enumerate() {
        let (z, t) = observe(actual_claim[k], actual_gap[k], bare.start_of(k), tau);
        c.observed_claim = z;
        c.observed_gap = t;
    }
    let graph = build_graph(config.origin, entity_rows, policy_rows, connection_rows, tau)?;
    let truth = GroundTruth {
        params,
        connection_ids: graph.connections().iter().map(|c| c.id).collect(),
        actual_claim,
        actual_gap,
        latent_rows,
        latents,
        claim_prob,
    };
    Ok(Generated {
        graph,
        truth,
        design,
        scaling,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::observe;

    #[test]
    fn generated_portfolio_is_consistent() {
        let cfg = GenConfig::small(3);
        let g = generate(&cfg).unwrap();
        assert_eq!(g.graph.connections().len(), cfg.n_connections);
        assert_eq!(g.graph.policies().len(), cfg.n_policies);
        let multi = g.graph.policies().iter().filter(|p| p.policy_type == PolicyType::MultipleBuyer).count();
        assert_eq!(multi, cfg.n_multi());
        // observed + unreported = actual, exactly
        let observed = g.graph.connections().iter().filter(|c| c.observed_claim).count();
        assert_eq!(observed + g.truth.unreported(&g.graph), g.truth.actual_claims());
        for (k, c) in g.graph.connections().iter().enumerate() {
            let want = observe(g.truth.actual_claim[k], g.truth.actual_gap[k], g.graph.start_of(k), g.graph.tau());
            assert_eq!((c.observed_claim, c.observed_gap), want);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate(&GenConfig::small(4)).unwrap();
        let b = generate(&GenConfig::small(4)).unwrap();
        assert_eq!(a.graph, b.graph);
        assert_eq!(a.truth, b.truth);
        let c = generate(&GenConfig::small(5)).unwrap();
        assert_ne!(a.graph, c.graph);
    }

    #[test]
    fn infeasible_counts_are_rejected() {
        let cfg = GenConfig {
            n_connections: 10,
            ..GenConfig::small(1)
        };
        assert!(matches!(generate(&cfg), Err(Error::Config(_))));
        let cfg = GenConfig {
            n_entities: 3,
            n_policies: 2,
            n_connections: 9,
            ..GenConfig::small(1)
        };
        assert!(matches!(generate(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn claim_rate_matches_model_average_without_truncation() {
        let mut truth = default_truth();
        truth.beta = [0.0; 3];
        truth.nu = [0.0; 3];
        let cfg = GenConfig {
            params: Some(truth),
            tau: Some(60.0),
            n_entities: 300,
            n_policies: 1500,
            n_connections: 4000,
            target_claim_rate: Some(0.1),
            ..GenConfig::default()
        };
        let g = generate(&cfg).unwrap();
        let n = g.truth.claim_prob.len() as f64;
        let mean_p = g.truth.claim_prob.iter().sum::<f64>() / n;
        assert!((mean_p - 0.1).abs() < 1e-9);
        let var: f64 = g.truth.claim_prob.iter().map(|p| p * (1.0 - p)).sum();
        let rate = g.graph.connections().iter().filter(|c| c.observed_claim).count() as f64;
        // a 60-year window leaves essentially nothing unreported
        assert!((rate - mean_p * n).abs() < 3.0 * var.sqrt(), "{rate} vs {}", mean_p * n);
    }

    #[test]
    fn near_unit_correlation_ties_buyer_and_seller_effects() {
        let mut truth = default_truth();
        truth.rho = 1.0 - 1e-9;
        let g = generate(&GenConfig {
            params: Some(truth),
            ..GenConfig::small(7)
        })
        .unwrap();
        let (b, s) = (&g.truth.latents.buyer, &g.truth.latents.seller);
        let n = b.len() as f64;
        let mb = b.iter().sum::<f64>() / n;
        let ms = s.iter().sum::<f64>() / n;
        let cov: f64 = b.iter().zip(s).map(|(x, y)| (x - mb) * (y - ms)).sum();
        let vb: f64 = b.iter().map(|x| (x - mb).powi(2)).sum();
        let vs: f64 = s.iter().map(|y| (y - ms).powi(2)).sum();
        assert!(cov / (vb * vs).sqrt() > 0.999);
    }

    #[test]
    fn truncated_share_calibration() {
        let cfg = GenConfig {
            n_entities: 400,
            n_policies: 1600,
            n_connections: 4000,
            target_claim_rate: Some(0.3),
            target_truncated_share: Some(0.35),
            ..GenConfig::default()
        };
        let g = generate(&cfg).unwrap();
        let actual = g.truth.actual_claims() as f64;
        let share = g.truth.unreported(&g.graph) as f64 / actual;
        // binomial noise on ~1200 claims plus day rounding
        assert!((share - 0.35).abs() < 0.05, "{share}");
    }

    #[test]
    fn empirical_claim_rate_is_calibrated_across_replicates() {
        let mut zs = Vec::new();
        for seed in 0..200 {
            let mut cfg = GenConfig::small(seed);
            cfg.tau = Some(80.0);
            cfg.policy_days = 365;
            let g = generate(&cfg).unwrap();
            let expected: f64 = g.truth.claim_prob.iter().sum();
            let var: f64 = g.truth.claim_prob.iter().map(|p| p * (1.0 - p)).sum();
            let got = g.truth.actual_claims() as f64;
            zs.push((got - expected) / var.sqrt());
        }
        let mean = zs.iter().sum::<f64>() / zs.len() as f64;
        assert!(mean.abs() < 0.25, "mean z {mean}");
    }

    #[test]
    fn entities_cover_every_policy_year() {
        let cfg = GenConfig::small(9);
        let g = generate(&cfg).unwrap();
        for k in 0..g.graph.connections().len() {
            let t = g.graph.start_of(k);
            assert!(g.graph.features_at(g.graph.buyer_of(k), t).is_some());
        }
    }
}
