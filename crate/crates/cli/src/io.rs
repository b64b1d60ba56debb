//! Dataset files: `entities.csv`, `policies.csv`, `connections.csv`, the
//! `dataset.cfg` metadata (origin and evaluation date) and the optional
//! `truth.csv` sidecar written by the generator.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tci_core::graph::{
    build_graph, ConnectionId, ConnectionRow, EntityCovariates, EntityId, EntityRow, NetworkGraph, PolicyId, PolicyRow,
    DAYS_PER_YEAR,
};
use tci_core::synth::GroundTruth;

use crate::config::parse_kv;
use crate::error::{CliError, CliResult};

pub const ENTITIES: &str = "entities.csv";
pub const POLICIES: &str = "policies.csv";
pub const CONNECTIONS: &str = "connections.csv";
pub const META: &str = "dataset.cfg";
pub const TRUTH: &str = "truth.csv";

#[derive(Debug, Serialize, Deserialize)]
struct EntityCsv {
    id: u64,
    year: i32,
    business_type: String,
    industry: String,
    business_age: f64,
    annual_sales_bucket: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct PolicyCsv {
    id: u64,
    seller_id: u64,
    start_date: NaiveDate,
    end_date: NaiveDate,
    policy_type: String,
    total_insured_amount: f64,
    avg_turnover_ratio: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ConnectionCsv {
    id: u64,
    policy_id: u64,
    buyer_id: u64,
    insured_amount: f64,
    turnover_ratio: f64,
    claim_flag: u8,
    claim_report_date: Option<NaiveDate>,
}

/// One row of the ground-truth sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthCsv {
    pub connection_id: u64,
    pub actual_claim: u8,
    pub actual_report_date: Option<NaiveDate>,
    pub buyer_effect: f64,
    pub seller_effect: f64,
    pub policy_effect: f64,
}

fn years_between(from: NaiveDate, to: NaiveDate) -> f64 {
    (to - from).num_days() as f64 / DAYS_PER_YEAR
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<Vec<T>> {
    let text = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::Reader::from_reader(text.as_slice());
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    reader
        .deserialize()
        .map(|r| r.map_err(|e| CliError::Schema(format!("{name}: {e}"))))
        .collect()
}

fn category<T: std::str::FromStr<Err = String>>(file: &str, row: usize, text: &str) -> CliResult<T> {
    text.parse()
        .map_err(|e: String| CliError::Schema(format!("{file} row {}: {e}", row + 1)))
}

fn read_meta(dir: &Path) -> CliResult<(Option<NaiveDate>, Option<NaiveDate>)> {
    let path = dir.join(META);
    if !path.exists() {
        return Ok((None, None));
    }
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let map = parse_kv(&text).map_err(|e| CliError::Schema(format!("{META}: {e}")))?;
    let date = |key: &str| -> CliResult<Option<NaiveDate>> {
        map.get(key)
            .map(|v| v.parse().map_err(|e| CliError::Schema(format!("{META}: {key}: {e}"))))
            .transpose()
    };
    for key in map.keys() {
        if key != "origin" && key != "evaluation_date" {
            return Err(CliError::Schema(format!("{META}: unknown key '{key}'")));
        }
    }
    Ok((date("origin")?, date("evaluation_date")?))
}

/// Reads and validates a dataset directory. `evaluation_date` overrides the
/// one recorded in `dataset.cfg`; one of the two must be present.
pub fn read_dataset(dir: &Path, evaluation_date: Option<NaiveDate>) -> CliResult<NetworkGraph> {
    let entities: Vec<EntityCsv> = read_rows(&dir.join(ENTITIES))?;
    let policies: Vec<PolicyCsv> = read_rows(&dir.join(POLICIES))?;
    let connections: Vec<ConnectionCsv> = read_rows(&dir.join(CONNECTIONS))?;
    let (origin, recorded) = read_meta(dir)?;
    let evaluation_date = evaluation_date.or(recorded).ok_or_else(|| {
        CliError::Config(format!("no evaluation date: pass --tau or record one in {META}"))
    })?;
    let origin = match origin {
        Some(o) => o,
        None => {
            let first = policies.iter().map(|p| p.start_date).min().unwrap_or(evaluation_date);
            NaiveDate::from_ymd_opt(chrono::Datelike::year(&first), 1, 1).expect("January 1st exists")
        }
    };

    let mut entity_rows = Vec::with_capacity(entities.len());
    for (row, e) in entities.iter().enumerate() {
        entity_rows.push(EntityRow {
            id: EntityId(e.id),
            year: e.year,
            covariates: EntityCovariates {
                business_type: category(ENTITIES, row, &e.business_type)?,
                industry: category(ENTITIES, row, &e.industry)?,
                business_age: e.business_age,
                sales: category(ENTITIES, row, &e.annual_sales_bucket)?,
            },
        });
    }
    let mut starts = HashMap::with_capacity(policies.len());
    let mut policy_rows = Vec::with_capacity(policies.len());
    for (row, p) in policies.iter().enumerate() {
        starts.insert(p.id, p.start_date);
        policy_rows.push(PolicyRow {
            id: PolicyId(p.id),
            seller: EntityId(p.seller_id),
            start: years_between(origin, p.start_date),
            end: years_between(origin, p.end_date),
            policy_type: category(POLICIES, row, &p.policy_type)?,
            total_insured_amount: p.total_insured_amount,
            avg_turnover_ratio: p.avg_turnover_ratio,
        });
    }
    let mut connection_rows = Vec::with_capacity(connections.len());
    for (row, c) in connections.iter().enumerate() {
        let schema = |m: String| CliError::Schema(format!("{CONNECTIONS} row {}: {m}", row + 1));
        let observed_claim = match c.claim_flag {
            0 => false,
            1 => true,
            other => return Err(schema(format!("claim_flag must be 0 or 1, got {other}"))),
        };
        let observed_gap = match (observed_claim, c.claim_report_date) {
            (false, None) => f64::INFINITY,
            (true, Some(date)) => {
                // an unknown policy is reported by the graph validation
                let start = starts.get(&c.policy_id).copied().unwrap_or(date);
                years_between(start, date)
            }
            (true, None) => return Err(schema("claim without a report date".into())),
            (false, Some(_)) => return Err(schema("report date without a claim".into())),
        };
        connection_rows.push(ConnectionRow {
            id: ConnectionId(c.id),
            policy: PolicyId(c.policy_id),
            buyer: EntityId(c.buyer_id),
            insured_amount: c.insured_amount,
            turnover_ratio: c.turnover_ratio,
            observed_claim,
            observed_gap,
        });
    }
    let tau = years_between(origin, evaluation_date);
    Ok(build_graph(origin, entity_rows, policy_rows, connection_rows, tau)?)
}

fn report_date(g: &NetworkGraph, start: f64, gap: f64) -> NaiveDate {
    g.date_at(start) + Duration::days((gap * DAYS_PER_YEAR).round() as i64)
}

fn csv_bytes<T: Serialize>(rows: impl IntoIterator<Item = T>) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Schema(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Schema(e.to_string()))
}

/// The four files of a dataset, as written to disk.
pub struct DatasetBytes {
    pub entities: Vec<u8>,
    pub policies: Vec<u8>,
    pub connections: Vec<u8>,
    pub meta: Vec<u8>,
}

pub fn dataset_bytes(g: &NetworkGraph) -> CliResult<DatasetBytes> {
    let (entities, policies, connections) = g.to_rows();
    let starts: HashMap<PolicyId, f64> = policies.iter().map(|p| (p.id, p.start)).collect();
    let entities = csv_bytes(entities.iter().map(|e| EntityCsv {
        id: e.id.0,
        year: e.year,
        business_type: e.covariates.business_type.to_string(),
        industry: e.covariates.industry.to_string(),
        business_age: e.covariates.business_age,
        annual_sales_bucket: e.covariates.sales.to_string(),
    }))?;
    let policies = csv_bytes(policies.iter().map(|p| PolicyCsv {
        id: p.id.0,
        seller_id: p.seller.0,
        start_date: g.date_at(p.start),
        end_date: g.date_at(p.end),
        policy_type: p.policy_type.to_string(),
        total_insured_amount: p.total_insured_amount,
        avg_turnover_ratio: p.avg_turnover_ratio,
    }))?;
    let connections = csv_bytes(connections.iter().map(|c| ConnectionCsv {
        id: c.id.0,
        policy_id: c.policy.0,
        buyer_id: c.buyer.0,
        insured_amount: c.insured_amount,
        turnover_ratio: c.turnover_ratio,
        claim_flag: u8::from(c.observed_claim),
        claim_report_date: c.observed_claim.then(|| report_date(g, starts[&c.policy], c.observed_gap)),
    }))?;
    let meta = format!("origin = {}\nevaluation_date = {}\n", g.origin(), g.date_at(g.tau())).into_bytes();
    Ok(DatasetBytes {
        entities,
        policies,
        connections,
        meta,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn write_dataset(dir: &Path, g: &NetworkGraph) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let b = dataset_bytes(g)?;
    write_file(&dir.join(ENTITIES), &b.entities)?;
    write_file(&dir.join(POLICIES), &b.policies)?;
    write_file(&dir.join(CONNECTIONS), &b.connections)?;
    write_file(&dir.join(META), &b.meta)
}

/// SHA-256 of the canonical serialization of a dataset, in hex.
pub fn fingerprint(g: &NetworkGraph) -> CliResult<String> {
    let b = dataset_bytes(g)?;
    let mut h = Sha256::new();
    for part in [&b.entities, &b.policies, &b.connections, &b.meta] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part);
    }
    Ok(h.finalize().iter().map(|x| format!("{x:02x}")).collect())
}

pub fn write_truth(dir: &Path, g: &NetworkGraph, truth: &GroundTruth) -> CliResult<()> {
    let rows = (0..g.connections().len()).map(|k| TruthCsv {
        connection_id: truth.connection_ids[k].0,
        actual_claim: u8::from(truth.actual_claim[k]),
        actual_report_date: truth.actual_claim[k].then(|| report_date(g, g.start_of(k), truth.actual_gap[k])),
        buyer_effect: truth.latent_rows[k][0],
        seller_effect: truth.latent_rows[k][1],
        policy_effect: truth.latent_rows[k][2],
    });
    write_file(&dir.join(TRUTH), &csv_bytes(rows)?)
}

/// Actual claim indicator per connection id.
pub fn read_truth(path: &Path) -> CliResult<HashMap<u64, bool>> {
    let rows: Vec<TruthCsv> = read_rows(path)?;
    let mut out = HashMap::with_capacity(rows.len());
    for (row, r) in rows.iter().enumerate() {
        let claim = match r.actual_claim {
            0 => false,
            1 => true,
            other => {
                return Err(CliError::Schema(format!(
                    "{TRUTH} row {}: actual_claim must be 0 or 1, got {other}",
                    row + 1
                )))
            }
        };
        if out.insert(r.connection_id, claim).is_some() {
            return Err(CliError::Schema(format!(
                "{TRUTH} row {}: duplicate connection {}",
                row + 1,
                r.connection_id
            )));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tci_core::synth::{generate, GenConfig};

    #[test]
    fn dataset_round_trips_through_files() {
        let gen = generate(&GenConfig::small(3)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &gen.graph).unwrap();
        let back = read_dataset(dir.path(), None).unwrap();
        assert_eq!(back.connections(), gen.graph.connections());
        assert_eq!(back.entities(), gen.graph.entities());
        assert_eq!(fingerprint(&back).unwrap(), fingerprint(&gen.graph).unwrap());
    }

    #[test]
    fn truth_sidecar_round_trips() {
        let gen = generate(&GenConfig::small(4)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_truth(dir.path(), &gen.graph, &gen.truth).unwrap();
        let truth = read_truth(&dir.path().join(TRUTH)).unwrap();
        for (k, id) in gen.truth.connection_ids.iter().enumerate() {
            assert_eq!(truth[&id.0], gen.truth.actual_claim[k]);
        }
    }

    #[test]
    fn unknown_category_is_a_schema_error() {
        let gen = generate(&GenConfig::small(5)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &gen.graph).unwrap();
        let path = dir.path().join(ENTITIES);
        let text = fs::read_to_string(&path).unwrap().replacen(",llc,", ",cooperative,", 1);
        fs::write(&path, text).unwrap();
        assert!(matches!(read_dataset(dir.path(), None), Err(CliError::Schema(_))));
    }

    #[test]
    fn missing_evaluation_date_is_a_config_error() {
        let gen = generate(&GenConfig::small(6)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &gen.graph).unwrap();
        fs::remove_file(dir.path().join(META)).unwrap();
        assert!(matches!(read_dataset(dir.path(), None), Err(CliError::Config(_))));
        let tau = gen.graph.date_at(gen.graph.tau());
        assert!(read_dataset(dir.path(), Some(tau)).is_ok());
    }
}
