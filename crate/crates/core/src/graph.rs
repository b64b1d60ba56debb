//! The trade-credit network: entities (nodes), policies (outward stars) and
//! insured seller-to-buyer connections (directed edges), with the inverted
//! indexes used by the samplers and the time-sliced active subgraph.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Days per year used to convert calendar dates to model time.
pub const DAYS_PER_YEAR: f64 = 365.25;

/// Slack allowed when comparing a reported gap against its window.
const WINDOW_SLACK: f64 = 1e-9;

macro_rules! id_type {
    ($(#[$m:meta])* $name:ident) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_type!(
    /// Identifier of an entity (a buyer, a seller, or both).
    EntityId
);
id_type!(
    /// Identifier of a policy.
    PolicyId
);
id_type!(
    /// Identifier of an insured trade connection.
    ConnectionId
);

macro_rules! category {
    ($(#[$m:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s.trim() {
                    $($text => Ok($name::$variant),)+
                    other => Err(format!(concat!("unknown ", stringify!($name), " '{}'"), other)),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

category!(
    /// Legal form of an entity.
    BusinessType {
        SoleProprietorship => "sole_proprietorship",
        UnspecifiedCorporation => "unspecified_corporation",
        Llc => "llc",
        Acc => "acc",
        Listed => "listed",
    }
);

category!(
    /// Industry classification of an entity.
    Industry {
        Manufacturing => "manufacturing",
        Wholesale => "wholesale",
        ProfessionalServices => "professional_services",
        Others => "others",
    }
);

category!(
    /// Annual sales bucket of an entity.
    SalesBucket {
        Small => "small",
        Medium => "medium",
        Large => "large",
        NotAvailable => "not_available",
    }
);

category!(
    /// Single-buyer or multiple-buyer policy.
    PolicyType {
        SingleBuyer => "single_buyer",
        MultipleBuyer => "multiple_buyer",
    }
);

/// Covariates of an entity for one policy year.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntityCovariates {
    pub business_type: BusinessType,
    pub industry: Industry,
    /// Years in business.
    pub business_age: f64,
    pub sales: SalesBucket,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntityRecord {
    pub id: EntityId,
    /// Covariates keyed by calendar year; piecewise constant within a year.
    pub features: BTreeMap<i32, EntityCovariates>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRecord {
    pub id: PolicyId,
    pub seller: EntityId,
    /// Distinct buyers, ascending.
    pub buyers: Vec<EntityId>,
    /// Start date in years since the dataset origin.
    pub start: f64,
    pub end: f64,
    pub total_insured_amount: f64,
    pub avg_turnover_ratio: f64,
    pub policy_type: PolicyType,
}

impl PolicyRecord {
    /// Active on `(start, end]`.
    #[inline]
    pub fn is_active(&self, t: f64) -> bool {
        self.start < t && t <= self.end
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionRecord {
    pub id: ConnectionId,
    pub policy: PolicyId,
    pub seller: EntityId,
    pub buyer: EntityId,
    pub insured_amount: f64,
    pub turnover_ratio: f64,
    pub observed_claim: bool,
    /// Observed reporting gap in years; `f64::INFINITY` when no claim was reported.
    pub observed_gap: f64,
}

/// One row of entity input: the covariates of `id` during calendar `year`.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityRow {
    pub id: EntityId,
    pub year: i32,
    pub covariates: EntityCovariates,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRow {
    pub id: PolicyId,
    pub seller: EntityId,
    pub start: f64,
    pub end: f64,
    pub policy_type: PolicyType,
    pub total_insured_amount: f64,
    pub avg_turnover_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionRow {
    pub id: ConnectionId,
    pub policy: PolicyId,
    pub buyer: EntityId,
    pub insured_amount: f64,
    pub turnover_ratio: f64,
    pub observed_claim: bool,
    pub observed_gap: f64,
}

/// Applies the administrative cut-off at evaluation date `tau` to an actual
/// `(claim, gap)` pair of a connection whose policy starts at `start`.
///
/// A claim is observed only if it is reported within `tau - start`.
pub fn observe(actual_claim: bool, actual_gap: f64, start: f64, tau: f64) -> (bool, f64) {
    if actual_claim && actual_gap <= tau - start {
        (true, actual_gap)
    } else {
        (false, f64::INFINITY)
    }
}

/// Entities, policies and connections active at a time `t`, as dense indexes
/// into the owning graph (ascending id order).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ActiveSubgraph {
    pub entities: Vec<usize>,
    pub policies: Vec<usize>,
    pub connections: Vec<usize>,
}

/// Immutable network graph with dense indexes and inverted connection indexes.
#[derive(Debug, Clone)]
pub struct NetworkGraph {
    origin: NaiveDate,
    tau: f64,
    entities: Vec<EntityRecord>,
    policies: Vec<PolicyRecord>,
    connections: Vec<ConnectionRecord>,
    entity_pos: HashMap<EntityId, usize>,
    policy_pos: HashMap<PolicyId, usize>,
    connection_pos: HashMap<ConnectionId, usize>,
    conn_buyer: Vec<usize>,
    conn_seller: Vec<usize>,
    conn_policy: Vec<usize>,
    by_buyer: Vec<Vec<usize>>,
    by_seller: Vec<Vec<usize>>,
    by_policy: Vec<Vec<usize>>,
}

impl PartialEq for NetworkGraph {
    fn eq(&self, other: &Self) -> bool {
        // Indexes are derived from the records.
        self.origin == other.origin
            && self.tau == other.tau
            && self.entities == other.entities
            && self.policies == other.policies
            && self.connections == other.connections
    }
}

/// Validates the input rows and assembles a [`NetworkGraph`].
///
/// `origin` is the calendar date corresponding to time 0; all times in the
/// rows are fractional years since that date, and `tau` is the evaluation date.
pub fn build_graph(
    origin: NaiveDate,
    entity_rows: Vec<EntityRow>,
    policy_rows: Vec<PolicyRow>,
    connection_rows: Vec<ConnectionRow>,
    tau: f64,
) -> Result<NetworkGraph> {
    if !tau.is_finite() || tau < 0.0 {
        return Err(Error::Domain(format!("evaluation date must be finite and >= 0, got {tau}")));
    }

    let mut entity_map: BTreeMap<EntityId, BTreeMap<i32, EntityCovariates>> = BTreeMap::new();
    for (row, e) in entity_rows.iter().enumerate() {
        if !(e.covariates.business_age >= 0.0) || !e.covariates.business_age.is_finite() {
            return Err(Error::validation(
                "entities",
                row,
                format!("business age of entity {} must be finite and >= 0", e.id),
            ));
        }
        if entity_map
            .entry(e.id)
            .or_default()
            .insert(e.year, e.covariates)
            .is_some()
        {
            return Err(Error::validation(
                "entities",
                row,
                format!("duplicate entity {} for year {}", e.id, e.year),
            ));
        }
    }
    let entities: Vec<EntityRecord> = entity_map
        .into_iter()
        .map(|(id, features)| EntityRecord { id, features })
        .collect();
    let entity_pos: HashMap<EntityId, usize> =
        entities.iter().enumerate().map(|(i, e)| (e.id, i)).collect();

    let mut policy_rows_sorted: Vec<(usize, PolicyRow)> = policy_rows.into_iter().enumerate().collect();
    policy_rows_sorted.sort_by_key(|(_, p)| p.id);
    for w in policy_rows_sorted.windows(2) {
        if w[0].1.id == w[1].1.id {
            return Err(Error::validation("policies", w[1].0, format!("duplicate policy id {}", w[1].1.id)));
        }
    }
    for (row, p) in &policy_rows_sorted {
        if !entity_pos.contains_key(&p.seller) {
            return Err(Error::validation(
                "policies",
                *row,
                format!("policy {} references undeclared seller {}", p.id, p.seller),
            ));
        }
        if !(p.start.is_finite() && p.end.is_finite() && p.start < p.end) {
            return Err(Error::validation(
                "policies",
                *row,
                format!("policy {} must have start < end (got {} .. {})", p.id, p.start, p.end),
            ));
        }
        if !(p.start >= 0.0 && p.start < tau) {
            return Err(Error::validation(
                "policies",
                *row,
                format!("policy {} start {} outside [0, {tau})", p.id, p.start),
            ));
        }
        if !(p.total_insured_amount > 0.0 && p.total_insured_amount.is_finite()) {
            return Err(Error::validation("policies", *row, format!("policy {} has non-positive total insured amount", p.id)));
        }
        if !(p.avg_turnover_ratio > 0.0 && p.avg_turnover_ratio.is_finite()) {
            return Err(Error::validation("policies", *row, format!("policy {} has non-positive turnover ratio", p.id)));
        }
    }
    let policy_pos: HashMap<PolicyId, usize> = policy_rows_sorted
        .iter()
        .enumerate()
        .map(|(i, (_, p))| (p.id, i))
        .collect();

    let mut conn_rows_sorted: Vec<(usize, ConnectionRow)> = connection_rows.into_iter().enumerate().collect();
    conn_rows_sorted.sort_by_key(|(_, c)| c.id);
    for w in conn_rows_sorted.windows(2) {
        if w[0].1.id == w[1].1.id {
            return Err(Error::validation("connections", w[1].0, format!("duplicate connection id {}", w[1].1.id)));
        }
    }

    let mut buyer_sets: Vec<Vec<EntityId>> = vec![Vec::new(); policy_rows_sorted.len()];
    let mut connections = Vec::with_capacity(conn_rows_sorted.len());
    for (row, c) in &conn_rows_sorted {
        let Some(&pi) = policy_pos.get(&c.policy) else {
            return Err(Error::validation(
                "connections",
                *row,
                format!("connection {} references undeclared policy {}", c.id, c.policy),
            ));
        };
        if !entity_pos.contains_key(&c.buyer) {
            return Err(Error::validation(
                "connections",
                *row,
                format!("connection {} references undeclared buyer {}", c.id, c.buyer),
            ));
        }
        let policy = &policy_rows_sorted[pi].1;
        if policy.seller == c.buyer {
            return Err(Error::validation(
                "connections",
                *row,
                format!("connection {} is a self-loop on entity {}", c.id, c.buyer),
            ));
        }
        if !(c.insured_amount > 0.0 && c.insured_amount.is_finite()) {
            return Err(Error::validation("connections", *row, format!("connection {} has non-positive insured amount", c.id)));
        }
        if !(c.turnover_ratio > 0.0 && c.turnover_ratio.is_finite()) {
            return Err(Error::validation("connections", *row, format!("connection {} has non-positive turnover ratio", c.id)));
        }
        let window = tau - policy.start;
        if c.observed_claim {
            if !(c.observed_gap > 0.0 && c.observed_gap.is_finite()) {
                return Err(Error::validation(
                    "connections",
                    *row,
                    format!("connection {} reports a claim with invalid gap {}", c.id, c.observed_gap),
                ));
            }
            if c.observed_gap > window + WINDOW_SLACK {
                return Err(Error::validation(
                    "connections",
                    *row,
                    format!(
                        "connection {} reports a claim {} years after start, beyond the truncation window {}",
                        c.id, c.observed_gap, window
                    ),
                ));
            }
        } else if c.observed_gap != f64::INFINITY {
            return Err(Error::validation(
                "connections",
                *row,
                format!("connection {} has no claim but a finite reporting gap", c.id),
            ));
        }
        buyer_sets[pi].push(c.buyer);
        connections.push(ConnectionRecord {
            id: c.id,
            policy: c.policy,
            seller: policy.seller,
            buyer: c.buyer,
            insured_amount: c.insured_amount,
            turnover_ratio: c.turnover_ratio,
            observed_claim: c.observed_claim,
            observed_gap: c.observed_gap,
        });
    }

    let mut policies = Vec::with_capacity(policy_rows_sorted.len());
    for ((row, p), mut buyers) in policy_rows_sorted.into_iter().zip(buyer_sets) {
        buyers.sort();
        buyers.dedup();
        if buyers.is_empty() {
            return Err(Error::validation("policies", row, format!("policy {} has no connections", p.id)));
        }
        let implied = if buyers.len() == 1 {
            PolicyType::SingleBuyer
        } else {
            PolicyType::MultipleBuyer
        };
        if implied != p.policy_type {
            return Err(Error::validation(
                "policies",
                row,
                format!(
                    "policy {} declared {} but has {} distinct buyer(s)",
                    p.id,
                    p.policy_type,
                    buyers.len()
                ),
            ));
        }
        policies.push(PolicyRecord {
            id: p.id,
            seller: p.seller,
            buyers,
            start: p.start,
            end: p.end,
            total_insured_amount: p.total_insured_amount,
            avg_turnover_ratio: p.avg_turnover_ratio,
            policy_type: p.policy_type,
        });
    }

    let mut defaults: HashSet<EntityId> = HashSet::new();
    for c in &connections {
        if c.observed_claim && !defaults.insert(c.buyer) {
            log::warn!("buyer {} has more than one reported claim", c.buyer);
        }
    }

    Ok(NetworkGraph::index(origin, tau, entities, policies, connections))
}

impl NetworkGraph {
    fn index(
        origin: NaiveDate,
        tau: f64,
        entities: Vec<EntityRecord>,
        policies: Vec<PolicyRecord>,
        connections: Vec<ConnectionRecord>,
    ) -> Self {
        let entity_pos: HashMap<EntityId, usize> =
            entities.iter().enumerate().map(|(i, e)| (e.id, i)).collect();
        let policy_pos: HashMap<PolicyId, usize> =
            policies.iter().enumerate().map(|(i, p)| (p.id, i)).collect();
        let connection_pos: HashMap<ConnectionId, usize> =
            connections.iter().enumerate().map(|(i, c)| (c.id, i)).collect();
        let mut by_buyer = vec![Vec::new(); entities.len()];
        let mut by_seller = vec![Vec::new(); entities.len()];
        let mut by_policy = vec![Vec::new(); policies.len()];
        let mut conn_buyer = Vec::with_capacity(connections.len());
        let mut conn_seller = Vec::with_capacity(connections.len());
        let mut conn_policy = Vec::with_capacity(connections.len());
        for (k, c) in connections.iter().enumerate() {
            let b = entity_pos[&c.buyer];
            let s = entity_pos[&c.seller];
            let p = policy_pos[&c.policy];
            by_buyer[b].push(k);
            by_seller[s].push(k);
            by_policy[p].push(k);
            conn_buyer.push(b);
            conn_seller.push(s);
            conn_policy.push(p);
        }
        Self {
            origin,
            tau,
            entities,
            policies,
            connections,
            entity_pos,
            policy_pos,
            connection_pos,
            conn_buyer,
            conn_seller,
            conn_policy,
            by_buyer,
            by_seller,
            by_policy,
        }
    }

    pub fn origin(&self) -> NaiveDate {
        self.origin
    }

    /// Evaluation date in years since the origin.
    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn entities(&self) -> &[EntityRecord] {
        &self.entities
    }

    pub fn policies(&self) -> &[PolicyRecord] {
        &self.policies
    }

    pub fn connections(&self) -> &[ConnectionRecord] {
        &self.connections
    }

    pub fn entity_index(&self, id: EntityId) -> Option<usize> {
        self.entity_pos.get(&id).copied()
    }

    pub fn policy_index(&self, id: PolicyId) -> Option<usize> {
        self.policy_pos.get(&id).copied()
    }

    pub fn connection_index(&self, id: ConnectionId) -> Option<usize> {
        self.connection_pos.get(&id).copied()
    }

    /// Dense entity index of the buyer of connection `k`.
    #[inline]
    pub fn buyer_of(&self, k: usize) -> usize {
        self.conn_buyer[k]
    }

    #[inline]
    pub fn seller_of(&self, k: usize) -> usize {
        self.conn_seller[k]
    }

    #[inline]
    pub fn policy_of(&self, k: usize) -> usize {
        self.conn_policy[k]
    }

    /// Connections whose buyer is entity `i`.
    pub fn connections_as_buyer(&self, i: usize) -> &[usize] {
        &self.by_buyer[i]
    }

    /// Connections whose seller is entity `i`.
    pub fn connections_as_seller(&self, i: usize) -> &[usize] {
        &self.by_seller[i]
    }

    pub fn connections_of_policy(&self, j: usize) -> &[usize] {
        &self.by_policy[j]
    }

    /// Truncation window `tau - start` of connection `k`.
    #[inline]
    pub fn window(&self, k: usize) -> f64 {
        self.tau - self.policies[self.conn_policy[k]].start
    }

    /// Start date of the policy of connection `k`.
    #[inline]
    pub fn start_of(&self, k: usize) -> f64 {
        self.policies[self.conn_policy[k]].start
    }

    /// Calendar date at model time `t`.
    pub fn date_at(&self, t: f64) -> NaiveDate {
        self.origin + Duration::days((t * DAYS_PER_YEAR).round() as i64)
    }

    /// Model time of a calendar date.
    pub fn time_of(&self, date: NaiveDate) -> f64 {
        (date - self.origin).num_days() as f64 / DAYS_PER_YEAR
    }

    /// Covariates of entity `i` for the policy year containing `t`.
    pub fn features_at(&self, i: usize, t: f64) -> Option<&EntityCovariates> {
        self.entities[i].features.get(&self.date_at(t).year())
    }

    /// Entities, policies and connections active at `t`: policies with
    /// `start < t <= end`, their connections, and every seller or buyer of them.
    pub fn active_subgraph(&self, t: f64) -> ActiveSubgraph {
        self.subgraph_where(|p| p.is_active(t))
    }

    /// Right limit of the active subgraph at `t`: policies with
    /// `start <= t < end`, so a policy starting exactly at `t` is included.
    pub fn opening_subgraph(&self, t: f64) -> ActiveSubgraph {
        self.subgraph_where(|p| p.start <= t && t < p.end)
    }

    fn subgraph_where(&self, keep: impl Fn(&PolicyRecord) -> bool) -> ActiveSubgraph {
        let policies: Vec<usize> = (0..self.policies.len()).filter(|&j| keep(&self.policies[j])).collect();
        let mut connections: Vec<usize> = policies
            .iter()
            .flat_map(|&j| self.by_policy[j].iter().copied())
            .collect();
        connections.sort_unstable();
        let mut entities: Vec<usize> = Vec::new();
        for &j in &policies {
            let p = &self.policies[j];
            entities.push(self.entity_pos[&p.seller]);
            entities.extend(p.buyers.iter().map(|b| self.entity_pos[b]));
        }
        entities.sort_unstable();
        entities.dedup();
        ActiveSubgraph {
            entities,
            policies,
            connections,
        }
    }

    /// Input rows reproducing this graph.
    pub fn to_rows(&self) -> (Vec<EntityRow>, Vec<PolicyRow>, Vec<ConnectionRow>) {
        let entities = self
            .entities
            .iter()
            .flat_map(|e| {
                e.features.iter().map(move |(&year, &covariates)| EntityRow {
                    id: e.id,
                    year,
                    covariates,
                })
            })
            .collect();
        let policies = self
            .policies
            .iter()
            .map(|p| PolicyRow {
                id: p.id,
                seller: p.seller,
                start: p.start,
                end: p.end,
                policy_type: p.policy_type,
                total_insured_amount: p.total_insured_amount,
                avg_turnover_ratio: p.avg_turnover_ratio,
            })
            .collect();
        let connections = self
            .connections
            .iter()
            .map(|c| ConnectionRow {
                id: c.id,
                policy: c.policy,
                buyer: c.buyer,
                insured_amount: c.insured_amount,
                turnover_ratio: c.turnover_ratio,
                observed_claim: c.observed_claim,
                observed_gap: c.observed_gap,
            })
            .collect();
        (entities, policies, connections)
    }

    /// The portfolio as it would have been observed at an earlier evaluation
    /// date: policies starting at or after `tau` are dropped, reported claims
    /// are re-truncated at `tau`, and entities no longer referenced are removed.
    pub fn censor_at(&self, tau: f64) -> Result<NetworkGraph> {
        if tau > self.tau {
            return Err(Error::Domain(format!(
                "cannot censor at {tau}, later than the current evaluation date {}",
                self.tau
            )));
        }
        self.select(|p| p.start < tau, tau)
    }

    /// Subset of policies satisfying `keep`, re-observed at `tau`.
    pub fn select(&self, keep: impl Fn(&PolicyRecord) -> bool, tau: f64) -> Result<NetworkGraph> {
        let (entity_rows, policy_rows, connection_rows) = self.to_rows();
        let kept: HashSet<PolicyId> = self.policies.iter().filter(|p| keep(p)).map(|p| p.id).collect();
        let starts: HashMap<PolicyId, f64> = self.policies.iter().map(|p| (p.id, p.start)).collect();
        let policy_rows: Vec<PolicyRow> = policy_rows.into_iter().filter(|p| kept.contains(&p.id)).collect();
        let connection_rows: Vec<ConnectionRow> = connection_rows
            .into_iter()
            .filter(|c| kept.contains(&c.policy))
            .map(|mut c| {
                let (z, t) = observe(c.observed_claim, c.observed_gap, starts[&c.policy], tau);
                c.observed_claim = z;
                c.observed_gap = t;
                c
            })
            .collect();
        let mut used: HashSet<EntityId> = policy_rows.iter().map(|p| p.seller).collect();
        used.extend(connection_rows.iter().map(|c| c.buyer));
        let entity_rows = entity_rows.into_iter().filter(|e| used.contains(&e.id)).collect();
        build_graph(self.origin, entity_rows, policy_rows, connection_rows, tau)
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn covariates() -> EntityCovariates {
        EntityCovariates {
            business_type: BusinessType::Llc,
            industry: Industry::Manufacturing,
            business_age: 10.0,
            sales: SalesBucket::Medium,
        }
    }

    pub fn origin() -> NaiveDate {
        NaiveDate::from_ymd_opt(2015, 1, 1).unwrap()
    }

    pub fn entity_rows(ids: impl IntoIterator<Item = u64>, years: std::ops::Range<i32>) -> Vec<EntityRow> {
        ids.into_iter()
            .flat_map(|id| {
                years.clone().map(move |year| EntityRow {
                    id: EntityId(id),
                    year,
                    covariates: covariates(),
                })
            })
            .collect()
    }

    pub fn policy(id: u64, seller: u64, start: f64, end: f64, multi: bool) -> PolicyRow {
        PolicyRow {
            id: PolicyId(id),
            seller: EntityId(seller),
            start,
            end,
            policy_type: if multi {
                PolicyType::MultipleBuyer
            } else {
                PolicyType::SingleBuyer
            },
            total_insured_amount: 100.0,
            avg_turnover_ratio: 5.0,
        }
    }

    pub fn connection(id: u64, policy: u64, buyer: u64) -> ConnectionRow {
        ConnectionRow {
            id: ConnectionId(id),
            policy: PolicyId(policy),
            buyer: EntityId(buyer),
            insured_amount: 10.0,
            turnover_ratio: 5.0,
            observed_claim: false,
            observed_gap: f64::INFINITY,
        }
    }

    /// The nine-entity, six-policy, eleven-connection illustration graph with
    /// policy windows `(0.2(s-1), 0.2(s-1) + 1)`.
    pub fn illustration() -> NetworkGraph {
        let starts = |s: u64| 0.2 * (s as f64 - 1.0);
        let policies = vec![
            policy(1, 1, starts(1), starts(1) + 1.0, true),
            policy(2, 2, starts(2), starts(2) + 1.0, true),
            policy(3, 8, starts(3), starts(3) + 1.0, false),
            policy(4, 9, starts(4), starts(4) + 1.0, true),
            policy(5, 1, starts(5), starts(5) + 1.0, false),
            policy(6, 7, starts(6), starts(6) + 1.0, false),
        ];
        let connections = vec![
            connection(1, 1, 3),
            connection(2, 1, 2),
            connection(3, 1, 4),
            connection(4, 2, 6),
            connection(5, 2, 5),
            connection(6, 2, 7),
            connection(7, 3, 5),
            connection(8, 4, 8),
            connection(9, 4, 6),
            connection(10, 5, 7),
            connection(11, 6, 1),
        ];
        build_graph(origin(), entity_rows(1..=9, 2015..2018), policies, connections, 2.0).unwrap()
    }
}
