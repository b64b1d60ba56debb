use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use tci_core::centrality::{featurize_with, raw_design};
use tci_core::graph::NetworkGraph;
use tci_core::likelihood::ModelData;
use tci_core::predict::{adev_table, posterior_sample, reserve, score, AdevTable, ScoreReport};
use tci_core::sem::fit;
use tci_core::synth::generate as synth_generate;

use crate::artifact::ModelArtifact;
use crate::config::Settings;
use crate::error::{CliError, CliResult};
use crate::io::{read_dataset, read_truth, write_dataset, write_truth, TRUTH};

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn csv_text(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| CliError::Schema(e.to_string()))?;
    for r in rows {
        w.write_record(&r).map_err(|e| CliError::Schema(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Schema(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Writes a synthetic dataset and its ground-truth sidecar to `out`.
pub fn generate(settings: &Settings, out: &Path) -> CliResult<String> {
    let config = settings.gen_config()?;
    let gen = synth_generate(&config)?;
    write_dataset(out, &gen.graph)?;
    write_truth(out, &gen.graph, &gen.truth)?;
    let observed = gen.graph.connections().iter().filter(|c| c.observed_claim).count();
    Ok(format!(
        "connections = {}\nactual_claims = {}\nreported_claims = {}\nunreported_claims = {}\n",
        gen.graph.connections().len(),
        gen.truth.actual_claims(),
        observed,
        gen.truth.unreported(&gen.graph),
    ))
}

/// Writes the unstandardized design of every connection.
pub fn featurize(settings: &Settings, data: &Path, out: &Path) -> CliResult<()> {
    let g = read_dataset(data, settings.tau()?)?;
    let design = raw_design(&g, settings.weight_scheme()?)?;
    let mut header = vec!["connection_id".to_string()];
    header.extend(design.names.iter().cloned());
    let rows = g.connections().iter().enumerate().map(|(k, c)| {
        let mut r = vec![c.id.0.to_string()];
        r.extend(design.row(k).iter().map(|x| x.to_string()));
        r
    });
    write_text(out, &csv_text(&header, rows)?)
}

/// `model.json` -> `model.trace.csv`.
pub fn trace_path(model: &Path) -> PathBuf {
    model.with_extension("trace.csv")
}

/// Fits the model to the portfolio as of `--tau` (or the dataset's own
/// evaluation date) and writes the artifact and the iteration trace.
pub fn fit_model(settings: &Settings, data: &Path, out: &Path) -> CliResult<String> {
    let full = read_dataset(data, None)?;
    let tau = match settings.tau()? {
        Some(date) => full.time_of(date),
        None => full.tau(),
    };
    // also drops entities that no policy refers to, as scoring will
    let train = full.censor_at(tau)?;
    let config = settings.fit_config()?;
    let result = fit(&train, settings.weight_scheme()?, &config)?;
    let names = result.scaling.names.clone();
    let trace = csv_text(
        &result.estimate.trace.csv_header(&names),
        result.estimate.trace.to_csv_rows(),
    )?;
    let artifact = ModelArtifact::new(result, &train)?;
    artifact.save(out)?;
    write_text(&trace_path(out), &trace)?;
    Ok(format!(
        "connections = {}\niterations = {}\nfingerprint = {}\n",
        artifact.training.connections,
        artifact.fit_config.iterations,
        artifact.training.fingerprint
    ))
}

/// Scores every connection of `data` with `model`; with `held_out`, only
/// those whose policy starts after the training evaluation date.
pub fn score_dataset(settings: &Settings, model: &ModelArtifact, data: &Path, held_out: bool) -> CliResult<ScoreReport> {
    let g = read_dataset(data, None)?;
    let train = model.training_graph(&g)?;
    let train_data = ModelData::new(&train, featurize_with(&train, model.weight_scheme, &model.scaling)?)?;
    let sample = posterior_sample(&train_data, &model.params, &model.latents, &settings.predict_config()?)?;
    let target = ModelData::new(&g, featurize_with(&g, model.weight_scheme, &model.scaling)?)?;
    let report = score(&target, &sample)?;
    if !held_out {
        return Ok(report);
    }
    Ok(restrict(report, &g, g.time_of(model.training.evaluation_date)))
}

fn restrict(report: ScoreReport, g: &NetworkGraph, cutoff: f64) -> ScoreReport {
    let scores: Vec<_> = report
        .scores
        .into_iter()
        .enumerate()
        .filter(|&(k, _)| g.start_of(k) >= cutoff)
        .map(|(_, s)| s)
        .collect();
    ScoreReport {
        reserve: reserve(&scores),
        open: scores.iter().filter(|s| !s.observed_claim).count(),
        scores,
    }
}

fn summary(report: &ScoreReport) -> String {
    format!(
        "connections = {}\nopen_connections = {}\nreserve = {}\n",
        report.scores.len(),
        report.open,
        report.reserve
    )
}

pub fn predict(settings: &Settings, model: &Path, data: &Path, out: &Path, held_out: bool) -> CliResult<String> {
    let artifact = ModelArtifact::load(model)?;
    let report = score_dataset(settings, &artifact, data, held_out)?;
    let header: Vec<String> = ["connection_id", "p_pos", "p_star", "p_ur", "p_pos_se"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows = report.scores.iter().map(|s| {
        vec![
            s.id.to_string(),
            s.p_pos.to_string(),
            s.p_star.to_string(),
            s.p_ur.map(|p| p.to_string()).unwrap_or_default(),
            s.p_pos_se.to_string(),
        ]
    });
    write_text(out, &csv_text(&header, rows)?)?;
    Ok(summary(&report))
}

pub fn reserve_summary(settings: &Settings, model: &Path, data: &Path, held_out: bool) -> CliResult<String> {
    let artifact = ModelArtifact::load(model)?;
    Ok(summary(&score_dataset(settings, &artifact, data, held_out)?))
}

/// ADEV rows for each model, and reserves against the actual count of
/// unreported claims.
pub fn evaluate(
    settings: &Settings,
    models: &[PathBuf],
    data: &Path,
    truth: Option<&Path>,
    held_out: bool,
) -> CliResult<String> {
    if models.is_empty() {
        return Err(CliError::Config("evaluate needs at least one --model".into()));
    }
    let truth_path = truth.map(Path::to_path_buf).unwrap_or_else(|| data.join(TRUTH));
    let actual = read_truth(&truth_path)?;
    let mut columns: Vec<(String, AdevTable, f64)> = Vec::new();
    let mut unreported = 0;
    for path in models {
        let artifact = ModelArtifact::load(path)?;
        let report = score_dataset(settings, &artifact, data, held_out)?;
        let outcomes: Vec<bool> = report
            .scores
            .iter()
            .map(|s| {
                actual
                    .get(&s.id)
                    .copied()
                    .ok_or_else(|| CliError::Mismatch(format!("no ground truth for connection {}", s.id)))
            })
            .collect::<CliResult<_>>()?;
        unreported = report
            .scores
            .iter()
            .zip(&outcomes)
            .filter(|(s, &z)| z && !s.observed_claim)
            .count();
        let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        columns.push((label, adev_table(&report, &outcomes)?, report.reserve));
    }
    let mut text = String::from("metric");
    for (label, _, _) in &columns {
        let _ = write!(text, ",{label}");
    }
    text.push('\n');
    let rows: [(&str, fn(&AdevTable, f64) -> f64); 4] = [
        ("adev_observed", |t, _| t.observed),
        ("adev_unreported", |t, _| t.unreported),
        ("adev_complete", |t, _| t.complete),
        ("reserve", |_, r| r),
    ];
    for (name, get) in rows {
        text.push_str(name);
        for (_, t, r) in &columns {
            let _ = write!(text, ",{}", get(t, *r));
        }
        text.push('\n');
    }
    let _ = writeln!(text, "actual_unreported,{}", vec![unreported.to_string(); columns.len()].join(","));
    Ok(text)
}
