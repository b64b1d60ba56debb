use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &str = "\
n_entities = 60
n_policies = 150
n_connections = 400
years = 3
target_claim_rate = 0.12
target_truncated_share = 0.3
iterations = 6
mh_steps = 4
retain = 3,4
averaging_window = 3
pred_draws = 40
";

fn tci(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tci"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = tci(args);
    assert!(
        out.status.success(),
        "tci {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    dir: TempDir,
    cfg: PathBuf,
    data: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        fs::write(dir.path().join("small.cfg"), SMALL).unwrap();
        let f = Fixture {
            cfg: dir.path().join("small.cfg"),
            data: dir.path().join("data"),
            dir,
        };
        ok(&["generate", "--config", s(&f.cfg), "--out", s(&f.data)]);
        f
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn fit(&self, model: &str, extra: &[&str]) -> PathBuf {
        let out = self.path(model);
        let mut args = vec!["fit", "--config", s(&self.cfg), "--data", s(&self.data), "--out", s(&out)];
        args.extend_from_slice(extra);
        ok(&args);
        out
    }
}

fn value(summary: &str, key: &str) -> f64 {
    summary
        .lines()
        .find_map(|l| l.strip_prefix(key)?.trim().strip_prefix('=').map(|v| v.trim().parse().unwrap()))
        .unwrap_or_else(|| panic!("no {key} in {summary}"))
}

#[test]
fn generate_is_reproducible_and_reports_counts() {
    let f = Fixture::new();
    let again = f.path("again");
    let summary = ok(&["generate", "--config", s(&f.cfg), "--out", s(&again)]);
    assert_eq!(value(&summary, "connections"), 400.0);
    for name in ["entities.csv", "policies.csv", "connections.csv", "truth.csv", "dataset.cfg"] {
        assert_eq!(fs::read(f.data.join(name)).unwrap(), fs::read(again.join(name)).unwrap(), "{name}");
    }
    let actual = value(&summary, "actual_claims");
    let reported = value(&summary, "reported_claims");
    assert_eq!(actual, reported + value(&summary, "unreported_claims"));
}

#[test]
fn featurize_writes_one_row_per_connection() {
    let f = Fixture::new();
    let out = f.path("features.csv");
    ok(&["featurize", "--data", s(&f.data), "--out", s(&out)]);
    let text = fs::read_to_string(out).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header[0], "connection_id");
    assert!(header.contains(&"buyer_DC_IO"));
    assert_eq!(lines.count(), 400);
}

#[test]
fn thread_count_does_not_change_any_output() {
    let f = Fixture::new();
    let one = f.fit("one.json", &["--threads", "1"]);
    let four = f.fit("four.json", &["--threads", "4"]);
    assert_eq!(fs::read(&one).unwrap(), fs::read(&four).unwrap());
    assert_eq!(fs::read(one.with_extension("trace.csv")).unwrap(), fs::read(four.with_extension("trace.csv")).unwrap());

    let (p1, p4) = (f.path("p1.csv"), f.path("p4.csv"));
    let cfg = f.cfg;
    let common = ["--config", s(&cfg), "--data", s(&f.data)];
    let mut a = vec!["predict", "--threads", "1", "--model", s(&one), "--out", s(&p1)];
    a.extend_from_slice(&common);
    let mut b = vec!["predict", "--threads", "4", "--model", s(&one), "--out", s(&p4)];
    b.extend_from_slice(&common);
    assert_eq!(ok(&a), ok(&b));
    assert_eq!(fs::read(p1).unwrap(), fs::read(p4).unwrap());
}

#[test]
fn predictions_are_probabilities_and_reserve_matches() {
    let f = Fixture::new();
    let model = f.fit("m.json", &[]);
    let out = f.path("p.csv");
    let cfg = f.cfg;
    let summary = ok(&["predict", "--config", s(&cfg), "--model", s(&model), "--data", s(&f.data), "--out", s(&out)]);
    let mut rdr = csv::Reader::from_path(&out).unwrap();
    let mut reserve = 0.0;
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        rows += 1;
        for col in [1, 2] {
            let p: f64 = rec[col].parse().unwrap();
            assert!((0.0..=1.0).contains(&p));
        }
        if !rec[3].is_empty() {
            let p: f64 = rec[3].parse().unwrap();
            assert!((0.0..=1.0).contains(&p));
            reserve += p;
        }
    }
    assert_eq!(rows, 400);
    assert!((value(&summary, "reserve") - reserve).abs() < 1e-9 * reserve.max(1.0));
    let again = ok(&["reserve", "--config", s(&cfg), "--model", s(&model), "--data", s(&f.data)]);
    assert_eq!(again, summary);
}

#[test]
fn held_out_scoring_is_empty_without_later_policies() {
    let f = Fixture::new();
    // the default training date is the end of the data
    let model = f.fit("m.json", &[]);
    let cfg = f.cfg;
    let summary = ok(&["reserve", "--held-out", "--config", s(&cfg), "--model", s(&model), "--data", s(&f.data)]);
    assert_eq!(value(&summary, "connections"), 0.0);
    assert_eq!(value(&summary, "reserve"), 0.0);
}

#[test]
fn evaluate_compares_models_on_held_out_connections() {
    let f = Fixture::new();
    let sem = f.fit("sem.json", &["--tau", "2017-01-01"]);
    let glm = f.path("glm.json");
    fs::write(f.path("glm.cfg"), format!("{SMALL}latent_effects = false\n")).unwrap();
    ok(&["fit", "--config", s(&f.path("glm.cfg")), "--tau", "2017-01-01", "--data", s(&f.data), "--out", s(&glm)]);
    let table = ok(&[
        "evaluate", "--held-out", "--config", s(&f.cfg), "--model", s(&sem), "--model", s(&glm), "--data", s(&f.data),
    ]);
    let lines: Vec<Vec<&str>> = table.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(lines[0], ["metric", "sem", "glm"]);
    let names: Vec<&str> = lines[1..].iter().map(|l| l[0]).collect();
    assert_eq!(names, ["adev_observed", "adev_unreported", "adev_complete", "reserve", "actual_unreported"]);
    for row in &lines[1..] {
        for v in &row[1..] {
            let x: f64 = v.parse().unwrap();
            assert!(x.is_finite() && x >= 0.0);
        }
    }
}

#[test]
fn exit_codes_distinguish_failure_kinds() {
    let f = Fixture::new();
    let missing = f.path("nowhere");
    assert_eq!(tci(&["fit", "--data", s(&missing), "--out", s(&f.path("m.json"))]).status.code(), Some(3));

    fs::write(f.path("bad.cfg"), "iterashuns = 3\n").unwrap();
    assert_eq!(tci(&["generate", "--config", s(&f.path("bad.cfg")), "--out", s(&f.path("x"))]).status.code(), Some(6));
    assert_eq!(tci(&["fit", "--data", s(&f.data), "--out", s(&f.path("m.json")), "--threads", "0"]).status.code(), Some(6));

    let broken = f.path("broken");
    fs::create_dir(&broken).unwrap();
    for name in ["entities.csv", "policies.csv", "dataset.cfg"] {
        fs::copy(f.data.join(name), broken.join(name)).unwrap();
    }
    let conns = fs::read_to_string(f.data.join("connections.csv")).unwrap();
    let mut lines: Vec<String> = conns.lines().map(String::from).collect();
    let first: Vec<&str> = lines[1].split(',').collect();
    // point the first connection at a policy that does not exist
    lines[1] = format!("{},999999,{}", first[0], first[2..].join(","));
    fs::write(broken.join("connections.csv"), lines.join("\n") + "\n").unwrap();
    let out = tci(&["fit", "--data", s(&broken), "--out", s(&f.path("m.json"))]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn scoring_rejects_a_dataset_whose_history_changed() {
    let f = Fixture::new();
    let model = f.fit("m.json", &[]);
    let edited = f.path("edited");
    fs::create_dir(&edited).unwrap();
    for name in ["entities.csv", "policies.csv", "connections.csv", "dataset.cfg"] {
        fs::copy(f.data.join(name), edited.join(name)).unwrap();
    }
    let text = fs::read_to_string(edited.join("connections.csv")).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut cells: Vec<String> = lines[1].split(',').map(String::from).collect();
    let amount: f64 = cells[3].parse().unwrap();
    cells[3] = (amount * 2.0 + 1.0).to_string();
    lines[1] = cells.join(",");
    fs::write(edited.join("connections.csv"), lines.join("\n") + "\n").unwrap();
    let out = tci(&["reserve", "--config", s(&f.cfg), "--model", s(&model), "--data", s(&edited)]);
    assert_eq!(out.status.code(), Some(7), "{}", String::from_utf8_lossy(&out.stderr));
}
