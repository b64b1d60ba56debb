//! Weighted first- and second-order degree centrality on the active
//! subgraph, and the per-connection design matrix built from it.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, RwLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{BusinessType, EntityCovariates, EntityId, Industry, NetworkGraph, PolicyType, SalesBucket};

/// Relative importance `w_k` of each connection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightScheme {
    #[default]
    Unit,
    /// `1 / |buyers of the policy|`.
    InverseBuyerCount,
    /// Share of the policy's total buyer-specific insured amount.
    InsuredAmount,
}

impl WeightScheme {
    pub fn as_str(self) -> &'static str {
        match self {
            WeightScheme::Unit => "unit",
            WeightScheme::InverseBuyerCount => "inverse-buyer-count",
            WeightScheme::InsuredAmount => "insured-amount",
        }
    }
}

impl FromStr for WeightScheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "unit" => Ok(WeightScheme::Unit),
            "inverse-buyer-count" => Ok(WeightScheme::InverseBuyerCount),
            "insured-amount" => Ok(WeightScheme::InsuredAmount),
            other => Err(format!("unknown weight scheme '{other}'")),
        }
    }
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Weight of connection `k` (dense index) under `scheme`.
pub fn connection_weight(g: &NetworkGraph, k: usize, scheme: WeightScheme) -> f64 {
    match scheme {
        WeightScheme::Unit => 1.0,
        WeightScheme::InverseBuyerCount => 1.0 / g.policies()[g.policy_of(k)].buyers.len() as f64,
        WeightScheme::InsuredAmount => {
            let total: f64 = g
                .connections_of_policy(g.policy_of(k))
                .iter()
                .map(|&k2| g.connections()[k2].insured_amount)
                .sum();
            g.connections()[k].insured_amount / total
        }
    }
}

/// Sparse weighted adjacency matrix over a set of entities, in compressed row
/// form. Parallel edges are summed into one entry; alongside each entry the
/// sum of squared edge weights is kept, which is what the `k != k'` exclusion
/// of the second-order measures removes.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyMatrix {
    ids: Vec<EntityId>,
    entities: Vec<usize>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
    squares: Vec<f64>,
}

impl AdjacencyMatrix {
    /// Builds the matrix of the given connections over `entities` (dense graph
    /// indexes, ascending). Every endpoint must be in `entities`.
    fn build(g: &NetworkGraph, entities: Vec<usize>, connections: &[usize], scheme: WeightScheme) -> Self {
        let local: HashMap<usize, usize> = entities.iter().enumerate().map(|(r, &i)| (i, r)).collect();
        let mut triples: Vec<(usize, usize, f64)> = connections
            .iter()
            .map(|&k| {
                (
                    local[&g.seller_of(k)],
                    local[&g.buyer_of(k)],
                    connection_weight(g, k, scheme),
                )
            })
            .collect();
        triples.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.2.total_cmp(&b.2)));

        let n = entities.len();
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::new();
        let mut values = Vec::new();
        let mut squares = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for (r, c, w) in triples {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += w;
                *squares.last_mut().unwrap() += w * w;
            } else {
                cols.push(c);
                values.push(w);
                squares.push(w * w);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        let ids = entities.iter().map(|&i| g.entities()[i].id).collect();
        Self {
            ids,
            entities,
            row_ptr,
            cols,
            values,
            squares,
        }
    }

    pub fn dim(&self) -> usize {
        self.entities.len()
    }

    /// Entity ids in row/column order (ascending).
    pub fn ids(&self) -> &[EntityId] {
        &self.ids
    }

    /// Dense graph indexes in row/column order.
    pub fn entities(&self) -> &[usize] {
        &self.entities
    }

    /// Stored entries of row `r` as `(column, weight)`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(cc, _)| cc == c).map_or(0.0, |(_, v)| v)
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Dense copy, row-major.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut d = vec![vec![0.0; n]; n];
        for (r, row) in d.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                row[c] = v;
            }
        }
        d
    }

    /// All six degree-centrality measures for every row entity.
    ///
    /// With `out = D 1`, `in = Dᵀ 1` and `Q` the entry-wise sum of squared
    /// weights: `OO = D out`, `II = Dᵀ in`, `OI = D in - Q 1`, `IO = Dᵀ out - Qᵀ 1`.
    /// `OO` and `II` need no correction since a pair `k = k'` would be a self-loop.
    pub fn centrality(&self) -> Vec<DegreeCentrality> {
        let n = self.dim();
        let mut out = vec![0.0; n];
        let mut inw = vec![0.0; n];
        for r in 0..n {
            for (c, v) in self.row(r) {
                out[r] += v;
                inw[c] += v;
            }
        }
        let mut res: Vec<DegreeCentrality> = (0..n)
            .map(|i| DegreeCentrality {
                out_degree: out[i],
                in_degree: inw[i],
                ..Default::default()
            })
            .collect();
        for r in 0..n {
            let span = self.row_ptr[r]..self.row_ptr[r + 1];
            for e in span {
                let (c, v, q) = (self.cols[e], self.values[e], self.squares[e]);
                res[r].out_out += v * out[c];
                res[c].in_in += v * inw[r];
                res[r].out_in += v * inw[c] - q;
                res[c].in_out += v * out[r] - q;
            }
        }
        res
    }
}

/// The six degree-centrality measures of one entity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DegreeCentrality {
    pub out_degree: f64,
    pub in_degree: f64,
    pub out_out: f64,
    pub in_in: f64,
    pub in_out: f64,
    pub out_in: f64,
}

impl DegreeCentrality {
    /// Values in the order O, I, OO, II, OI, IO.
    pub fn as_array(&self) -> [f64; 6] {
        [
            self.out_degree,
            self.in_degree,
            self.out_out,
            self.in_in,
            self.out_in,
            self.in_out,
        ]
    }
}

/// Degree centrality of every active entity at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralityFeatures {
    entities: Vec<usize>,
    ids: Vec<EntityId>,
    values: Vec<DegreeCentrality>,
}

impl CentralityFeatures {
    fn from_matrix(m: &AdjacencyMatrix) -> Self {
        Self {
            entities: m.entities.clone(),
            ids: m.ids.clone(),
            values: m.centrality(),
        }
    }

    /// Centrality of entity `i` (dense graph index); zero when inactive.
    pub fn get(&self, i: usize) -> DegreeCentrality {
        self.entities
            .binary_search(&i)
            .map_or_else(|_| DegreeCentrality::default(), |pos| self.values[pos])
    }

    pub fn by_id(&self) -> BTreeMap<EntityId, DegreeCentrality> {
        self.ids.iter().copied().zip(self.values.iter().copied()).collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Adjacency matrix of the subgraph active at `t`.
pub fn adjacency(g: &NetworkGraph, t: f64, scheme: WeightScheme) -> AdjacencyMatrix {
    let view = g.active_subgraph(t);
    AdjacencyMatrix::build(g, view.entities, &view.connections, scheme)
}

/// Out- and in-degree of every entity active at `t`.
pub fn fodc(g: &NetworkGraph, t: f64, scheme: WeightScheme) -> BTreeMap<EntityId, (f64, f64)> {
    centrality(g, t, scheme)
        .by_id()
        .into_iter()
        .map(|(id, c)| (id, (c.out_degree, c.in_degree)))
        .collect()
}

/// `(OO, II, IO, OI)` second-order centrality of every entity active at `t`.
pub fn sodc(g: &NetworkGraph, t: f64, scheme: WeightScheme) -> BTreeMap<EntityId, (f64, f64, f64, f64)> {
    centrality(g, t, scheme)
        .by_id()
        .into_iter()
        .map(|(id, c)| (id, (c.out_out, c.in_in, c.in_out, c.out_in)))
        .collect()
}

/// All six measures for every entity active at `t`.
pub fn centrality(g: &NetworkGraph, t: f64, scheme: WeightScheme) -> CentralityFeatures {
    CentralityFeatures::from_matrix(&adjacency(g, t, scheme))
}

/// Centrality of the network as it stands right after a policy starting at
/// `t` comes into force: policies with `start <= t < end`. This is the
/// right limit of the active subgraph at `t`, so a connection's own policy
/// contributes to the centrality used as its covariate.
pub fn centrality_at_start(g: &NetworkGraph, t: f64, scheme: WeightScheme) -> CentralityFeatures {
    let view = g.opening_subgraph(t);
    CentralityFeatures::from_matrix(&AdjacencyMatrix::build(g, view.entities, &view.connections, scheme))
}

/// Memoized centrality snapshots keyed by time and weight scheme.
#[derive(Debug, Default)]
pub struct CentralityCache {
    inner: RwLock<HashMap<(u64, WeightScheme), Arc<CentralityFeatures>>>,
}

impl CentralityCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Snapshot at the start date `t`, computed once.
    pub fn at_start(&self, g: &NetworkGraph, t: f64, scheme: WeightScheme) -> Arc<CentralityFeatures> {
        let key = (t.to_bits(), scheme);
        if let Some(hit) = self.inner.read().expect("cache lock").get(&key) {
            return Arc::clone(hit);
        }
        let value = Arc::new(centrality_at_start(g, t, scheme));
        self.inner
            .write()
            .expect("cache lock")
            .entry(key)
            .or_insert(value)
            .clone()
    }

    pub fn len(&self) -> usize {
        self.inner.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

const DC_NAMES: [&str; 6] = ["DC_O", "DC_I", "DC_OO", "DC_II", "DC_OI", "DC_IO"];
const BIZ_DUMMIES: [BusinessType; 4] = [
    BusinessType::SoleProprietorship,
    BusinessType::UnspecifiedCorporation,
    BusinessType::Acc,
    BusinessType::Listed,
];
const INDUSTRY_DUMMIES: [Industry; 3] = [Industry::Manufacturing, Industry::Wholesale, Industry::ProfessionalServices];
const SALES_DUMMIES: [SalesBucket; 3] = [SalesBucket::Small, SalesBucket::Medium, SalesBucket::Large];

/// Number of fixed-effect columns, intercept included.
pub const N_COVARIATES: usize = 40;

/// Column names of the fixed-effect design, in order. Baselines are LLC,
/// the "others" industry, unavailable sales, and multiple-buyer policies.
pub fn covariate_names() -> Vec<String> {
    let mut names: Vec<String> = [
        "intercept",
        "total_insured_amount",
        "buyer_insured_amount",
        "avg_turnover_ratio",
        "buyer_turnover_ratio",
        "policy_single_buyer",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for side in ["seller", "buyer"] {
        names.extend(BIZ_DUMMIES.iter().map(|b| format!("{side}_biz_{b}")));
    }
    for side in ["seller", "buyer"] {
        names.extend(INDUSTRY_DUMMIES.iter().map(|b| format!("{side}_industry_{b}")));
    }
    names.push("seller_business_age".into());
    names.push("buyer_business_age".into());
    for side in ["seller", "buyer"] {
        names.extend(SALES_DUMMIES.iter().map(|b| format!("{side}_sales_{b}")));
    }
    for side in ["seller", "buyer"] {
        names.extend(DC_NAMES.iter().map(|d| format!("{side}_{d}")));
    }
    debug_assert_eq!(names.len(), N_COVARIATES);
    names
}

/// Whether each design column is continuous (standardized) or an intercept/dummy.
pub fn continuous_columns() -> Vec<bool> {
    covariate_names()
        .iter()
        .map(|n| {
            n.ends_with("amount") || n.ends_with("ratio") || n.ends_with("business_age") || n.contains("_DC_")
        })
        .collect()
}

/// Row-major design matrix, one row per connection in dense connection order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    pub names: Vec<String>,
    pub n: usize,
    pub p: usize,
    pub values: Vec<f64>,
}

impl DesignMatrix {
    #[inline]
    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k * self.p..(k + 1) * self.p]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |k| self.values[k * self.p + j])
    }
}

/// Location and scale of one standardized column. A zero `sd` marks a
/// constant column, which maps to 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    pub mean: f64,
    pub sd: f64,
}

/// Standardization applied to the continuous design columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub names: Vec<String>,
    /// `None` for columns left as is.
    pub columns: Vec<Option<ColumnScale>>,
}

impl Scaling {
    /// Fits mean/sd of each continuous column of a raw design.
    pub fn fit(raw: &DesignMatrix) -> Self {
        let cont = continuous_columns();
        let columns = (0..raw.p)
            .map(|j| {
                if !cont[j] {
                    return None;
                }
                let n = raw.n as f64;
                if raw.n == 0 {
                    return Some(ColumnScale { mean: 0.0, sd: 0.0 });
                }
                let mean = raw.column(j).sum::<f64>() / n;
                let var = raw.column(j).map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
                let sd = var.sqrt();
                // treat round-off spread as constant
                let sd = if sd <= 1e-12 * mean.abs().max(1.0) { 0.0 } else { sd };
                Some(ColumnScale { mean, sd })
            })
            .collect();
        Self {
            names: raw.names.clone(),
            columns,
        }
    }

    pub fn apply(&self, raw: &DesignMatrix) -> Result<DesignMatrix> {
        if raw.names != self.names {
            return Err(Error::Contract("design columns do not match the scaling layout".into()));
        }
        let mut out = raw.clone();
        for k in 0..raw.n {
            for (j, col) in self.columns.iter().enumerate() {
                if let Some(s) = col {
                    let x = &mut out.values[k * raw.p + j];
                    *x = if s.sd > 0.0 { (*x - s.mean) / s.sd } else { 0.0 };
                }
            }
        }
        Ok(out)
    }
}

fn push_entity(row: &mut [f64], side: usize, cov: &EntityCovariates) {
    // side 0 = seller, 1 = buyer
    for (d, b) in BIZ_DUMMIES.iter().enumerate() {
        row[6 + 4 * side + d] = f64::from(u8::from(cov.business_type == *b));
    }
    for (d, ind) in INDUSTRY_DUMMIES.iter().enumerate() {
        row[14 + 3 * side + d] = f64::from(u8::from(cov.industry == *ind));
    }
    row[20 + side] = cov.business_age;
    for (d, s) in SALES_DUMMIES.iter().enumerate() {
        row[22 + 3 * side + d] = f64::from(u8::from(cov.sales == *s));
    }
}

/// Unstandardized design: entity covariates of both endpoints and their
/// centrality measures at the policy start date, policy and connection
/// covariates.
pub fn raw_design(g: &NetworkGraph, scheme: WeightScheme) -> Result<DesignMatrix> {
    let names = covariate_names();
    let p = names.len();
    let n = g.connections().len();
    let mut starts: Vec<u64> = g.policies().iter().map(|pol| pol.start.to_bits()).collect();
    starts.sort_unstable();
    starts.dedup();
    let cache = CentralityCache::new();
    starts.par_iter().for_each(|&t| {
        cache.at_start(g, f64::from_bits(t), scheme);
    });

    let mut values = vec![0.0; n * p];
    for (k, c) in g.connections().iter().enumerate() {
        let row = &mut values[k * p..(k + 1) * p];
        let policy = &g.policies()[g.policy_of(k)];
        let t = policy.start;
        let dc = cache.at_start(g, t, scheme);
        row[0] = 1.0;
        row[1] = policy.total_insured_amount;
        row[2] = c.insured_amount;
        row[3] = policy.avg_turnover_ratio;
        row[4] = c.turnover_ratio;
        row[5] = f64::from(u8::from(policy.policy_type == PolicyType::SingleBuyer));
        for (side, entity) in [(0usize, g.seller_of(k)), (1, g.buyer_of(k))] {
            let cov = g.features_at(entity, t).ok_or_else(|| {
                Error::validation(
                    "connections",
                    k,
                    format!(
                        "entity {} has no covariates for {} (connection {})",
                        g.entities()[entity].id,
                        g.date_at(t),
                        c.id
                    ),
                )
            })?;
            push_entity(row, side, cov);
            let d = dc.get(entity).as_array();
            row[28 + 6 * side..34 + 6 * side].copy_from_slice(&d);
        }
    }
    Ok(DesignMatrix { names, n, p, values })
}

/// Standardized design and the scaling fitted to it.
pub fn featurize_connections(g: &NetworkGraph, scheme: WeightScheme) -> Result<(DesignMatrix, Scaling)> {
    let raw = raw_design(g, scheme)?;
    let scaling = Scaling::fit(&raw);
    let design = scaling.apply(&raw)?;
    Ok((design, scaling))
}

/// Design standardized with an existing scaling (e.g. a training set's).
pub fn featurize_with(g: &NetworkGraph, scheme: WeightScheme, scaling: &Scaling) -> Result<DesignMatrix> {
    scaling.apply(&raw_design(g, scheme)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::*;
    use crate::graph::{build_graph, ConnectionId};
    use crate::oracle::oracle_centrality;

    fn eid(g: &NetworkGraph, id: u64) -> usize {
        g.entity_index(EntityId(id)).unwrap()
    }

    #[test]
    fn illustration_at_half_year() {
        let g = illustration();
        let m = adjacency(&g, 0.5, WeightScheme::Unit);
        assert_eq!(m.dim(), 8);
        assert_eq!(m.total(), 7.0);
        let dc = centrality(&g, 0.5, WeightScheme::Unit);
        let i2 = dc.get(eid(&g, 2));
        assert_eq!(i2.out_degree, 3.0);
        assert_eq!(i2.in_out, 2.0);
        assert_eq!(fodc(&g, 0.5, WeightScheme::Unit)[&EntityId(2)], (3.0, 1.0));
        assert_eq!(sodc(&g, 0.5, WeightScheme::Unit)[&EntityId(2)].2, 2.0);
    }

    #[test]
    fn empty_view_gives_empty_matrix() {
        let g = illustration();
        let m = adjacency(&g, 0.0, WeightScheme::Unit);
        assert_eq!(m.dim(), 0);
        assert!(centrality(&g, 0.0, WeightScheme::Unit).is_empty());
        assert_eq!(centrality(&g, 0.0, WeightScheme::Unit).get(3), DegreeCentrality::default());
    }

    #[test]
    fn parallel_edges_accumulate() {
        let g = build_graph(
            origin(),
            entity_rows([1, 2], 2015..2016),
            vec![policy(1, 1, 0.0, 1.0, false), policy(2, 1, 0.1, 1.0, false)],
            vec![connection(1, 1, 2), connection(2, 2, 2)],
            1.0,
        )
        .unwrap();
        let m = adjacency(&g, 0.5, WeightScheme::Unit);
        assert_eq!(m.to_dense(), vec![vec![0.0, 2.0], vec![0.0, 0.0]]);
        // the buyer has two inward edges from the same seller: OI for the
        // seller counts each edge paired with the other one
        let dc = centrality(&g, 0.5, WeightScheme::Unit);
        assert_eq!(dc.get(0).out_in, 2.0);
        assert_eq!(dc.get(1).in_out, 2.0);
        assert_eq!(dc.by_id(), oracle_centrality(&g, 0.5, WeightScheme::Unit));
    }

    #[test]
    fn star_closed_form() {
        let n = 6u64;
        let conns = (0..n).map(|b| connection(b + 1, 1, b + 2)).collect();
        let g = build_graph(
            origin(),
            entity_rows(1..=n + 1, 2015..2016),
            vec![policy(1, 1, 0.0, 1.0, true)],
            conns,
            1.0,
        )
        .unwrap();
        let dc = centrality(&g, 0.5, WeightScheme::Unit);
        for b in 2..=n + 1 {
            assert_eq!(dc.get(eid(&g, b)).in_out, (n - 1) as f64);
        }
        assert_eq!(dc.get(eid(&g, 1)).out_degree, n as f64);
        assert_eq!(dc.get(eid(&g, 1)).out_in, 0.0);
    }

    #[test]
    fn single_edge_has_no_second_order() {
        let g = build_graph(
            origin(),
            entity_rows([1, 2], 2015..2016),
            vec![policy(1, 1, 0.0, 1.0, false)],
            vec![connection(1, 1, 2)],
            1.0,
        )
        .unwrap();
        for c in centrality(&g, 0.5, WeightScheme::Unit).by_id().values() {
            assert_eq!((c.out_out, c.in_in, c.in_out, c.out_in), (0.0, 0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn weighted_schemes_match_oracle() {
        let g = illustration();
        for scheme in [WeightScheme::InverseBuyerCount, WeightScheme::InsuredAmount] {
            for t in [0.3, 0.5, 0.9, 1.3] {
                let got = centrality(&g, t, scheme).by_id();
                let want = oracle_centrality(&g, t, scheme);
                assert_eq!(got.keys().collect::<Vec<_>>(), want.keys().collect::<Vec<_>>());
                for (id, a) in &got {
                    let b = want[id];
                    for (x, y) in a.as_array().iter().zip(b.as_array()) {
                        assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0), "{scheme} t={t} id={id}");
                    }
                }
            }
        }
    }

    #[test]
    fn opening_snapshot_counts_own_policy() {
        let g = illustration();
        let dc = centrality_at_start(&g, 0.0, WeightScheme::Unit);
        assert_eq!(dc.get(eid(&g, 1)).out_degree, 3.0);
        let strict = centrality(&g, 0.0, WeightScheme::Unit);
        assert_eq!(strict.get(eid(&g, 1)).out_degree, 0.0);
    }

    #[test]
    fn design_layout_and_scaling() {
        let g = illustration();
        let raw = raw_design(&g, WeightScheme::Unit).unwrap();
        assert_eq!(raw.p, N_COVARIATES);
        assert_eq!(raw.n, 11);
        let k5 = g.connection_index(ConnectionId(5)).unwrap();
        let row = raw.row(k5);
        // seller i2 of policy j2 at its start 0.2: out-degree 3 (k4..k6)
        assert_eq!(row[28], 3.0);
        // buyer i5 at 0.2: in-degree 1 (k5; k7 starts at 0.4)
        assert_eq!(row[35], 1.0);
        let (design, scaling) = featurize_connections(&g, WeightScheme::Unit).unwrap();
        // all entities share identical covariates, so business age standardizes to 0
        for k in 0..design.n {
            assert_eq!(design.row(k)[20], 0.0);
            assert_eq!(design.row(k)[0], 1.0);
        }
        let again = featurize_with(&g, WeightScheme::Unit, &scaling).unwrap();
        assert_eq!(again, design);
    }

    #[test]
    fn missing_covariates_are_reported() {
        let g = build_graph(
            origin(),
            entity_rows([1, 2], 2016..2017),
            vec![policy(1, 1, 0.0, 1.0, false)],
            vec![connection(1, 1, 2)],
            1.0,
        )
        .unwrap();
        let err = raw_design(&g, WeightScheme::Unit).unwrap_err();
        assert!(err.to_string().contains("no covariates"), "{err}");
    }

    #[test]
    fn cache_memoizes() {
        let g = illustration();
        let cache = CentralityCache::new();
        let a = cache.at_start(&g, 0.2, WeightScheme::Unit);
        let b = cache.at_start(&g, 0.2, WeightScheme::Unit);
        assert!(Arc::ptr_eq(&a, &b));
        cache.at_start(&g, 0.2, WeightScheme::InverseBuyerCount);
        assert_eq!(cache.len(), 2);
    }
}
