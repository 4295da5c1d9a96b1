use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_seqbudget"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

/// Synthetic problem config; `extra` goes in before the dataset tables.
fn synthetic_config(n: usize, informative: usize, records: usize, costs: &str, extra: &str) -> String {
    format!(
        "threshold = 0.65\n\
         {extra}\n\
         [dataset]\n\
         split_seed = 0\n\
         [dataset.synthetic]\n\
         n_features = {n}\n\
         n_informative = {informative}\n\
         n_records = {records}\n\
         seed = 0\n\
         [dataset.cost]\n\
         {costs}\n"
    )
}

/// Data rows (excluding the header) of a result file.
fn rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(str::to_owned)
        .collect()
}

fn entries(dir: &Path) -> usize {
    fs::read_dir(dir).map(|d| d.count()).unwrap_or(0)
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn missing_dataset_is_a_usage_error_with_no_outputs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "c.toml",
        "threshold = 0.7\n[dataset]\npath = \"nope.csv\"\n[dataset.cost]\nmode = \"explicit\"\ncosts = [1]\n",
    );
    let out = tmp.path().join("out");
    let o = run(&["evolve", "--config", path_str(&cfg), "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("nope.csv"));
    assert!(!out.exists());
}

#[test]
fn malformed_config_reports_its_location() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.toml", "threshold = 0.7\n[dataset\n");
    let o = run(&["evolve", "--config", path_str(&cfg), "--out", path_str(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("c.toml"));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn bad_seed_list_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "c.toml",
        &synthetic_config(4, 2, 200, "mode = \"explicit\"\ncosts = [1, 2, 3, 4]", ""),
    );
    let o = run(&["evolve", "--config", path_str(&cfg), "--seed", "3-x"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oracle_reports_size_and_refuses_above_cap() {
    let tmp = TempDir::new().unwrap();
    let costs = "mode = \"explicit\"\ncosts = [1, 2, 3, 5, 8, 13]";
    let cfg = write(
        tmp.path(),
        "c.toml",
        &synthetic_config(6, 4, 300, costs, "[oracle]\nmax_stages = 3"),
    );
    let out = tmp.path().join("out");
    let o = run(&["oracle", "--config", path_str(&cfg), "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("evaluated 603"), "{}", stdout(&o));
    assert!(out.join("front.csv").is_file());
    assert!(out.join("manifest.json").is_file());

    let capped = write(
        tmp.path(),
        "capped.toml",
        &synthetic_config(6, 4, 300, costs, "[oracle]\nmax_stages = 3\ncap = 100"),
    );
    let out2 = tmp.path().join("out2");
    let o = run(&["oracle", "--config", path_str(&capped), "--out", path_str(&out2)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("603"), "{}", stderr(&o));
    assert!(!out2.exists());
}

#[test]
fn oracle_with_one_stage_keeps_the_full_feature_solution() {
    let tmp = TempDir::new().unwrap();
    let mut csv = String::from("a,b,c,d,label\n");
    for i in 0..120u32 {
        let x = (i % 7) as f64 - 3.0;
        let y = ((i * 5) % 11) as f64 - 5.0;
        let label = u32::from(x + 0.3 * y + if i % 9 == 0 { 4.0 } else { 0.0 } > 0.0);
        csv.push_str(&format!("{x},{y},{},{},{label}\n", (i % 3) as f64, (i % 4) as f64 * 0.5));
    }
    write(tmp.path(), "data.csv", &csv);
    let cfg = write(
        tmp.path(),
        "c.toml",
        "threshold = 0.6\n[oracle]\nmax_stages = 1\n[dataset]\npath = \"data.csv\"\n\
         [dataset.cost]\nmode = \"explicit\"\ncosts = [1, 2, 3, 4]\n",
    );
    let out = tmp.path().join("out");
    let o = run(&["oracle", "--config", path_str(&cfg), "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let front = rows(&out.join("front.csv"));
    assert_eq!(front.len(), 1, "{front:?}");
    assert!(front[0].starts_with("0-0-0-0,"), "{front:?}");
}

#[test]
fn evolve_writes_one_front_per_seed_and_reruns_identically() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "c.toml",
        &synthetic_config(
            5,
            3,
            300,
            "mode = \"explicit\"\ncosts = [1, 2, 3, 4, 5]",
            "[ga]\npopulation_size = 20\nmax_iter = 8",
        ),
    );
    let out = tmp.path().join("out");
    let o = run(&["evolve", "--config", path_str(&cfg), "--seed", "0-2", "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    for s in 0..3 {
        assert!(out.join(format!("front_seed{s}.csv")).is_file());
    }
    let agg = rows(&out.join("aggregate.csv"));
    let metrics: Vec<&str> = agg.iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(metrics, ["g1", "g2", "g3_star"]);
    assert_eq!(rows(&out.join("top_solutions.csv")).len(), 3);
    // three fronts, top solutions, aggregate, manifest
    assert_eq!(entries(&out), 6);

    let again = tmp.path().join("again");
    let manifest = out.join("manifest.json");
    let o = run(&[
        "evolve",
        "--config",
        path_str(&manifest),
        "--threads",
        "1",
        "--out",
        path_str(&again),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for s in 0..3 {
        let name = format!("front_seed{s}.csv");
        assert_eq!(fs::read(out.join(&name)).unwrap(), fs::read(again.join(&name)).unwrap());
    }

    let o = run(&["oracle", "--config", path_str(&manifest), "--out", path_str(&again)]);
    assert_eq!(o.status.code(), Some(2), "manifest of another command");
}

#[test]
fn recovery_with_one_run_equals_its_own_curve() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "c.toml",
        &synthetic_config(
            5,
            3,
            300,
            "mode = \"explicit\"\ncosts = [1, 2, 3, 5, 8]",
            "[ga]\npopulation_size = 20\nmax_iter = 15\nmax_stages = 3",
        ),
    );
    let out = tmp.path().join("out");
    let o = run(&["recovery", "--config", path_str(&cfg), "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(2), "no front yet: {}", stderr(&o));

    let o = run(&["oracle", "--config", path_str(&cfg), "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(&["recovery", "--config", path_str(&cfg), "--seed", "4", "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = rows(&out.join("recovery.csv"));
    assert!(!table.is_empty());
    let mut last = 0usize;
    for (h, row) in table.iter().enumerate() {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells.len(), 3);
        assert_eq!(cells[0], h.to_string());
        let mean: f64 = cells[1].parse().unwrap();
        let x: usize = cells[2].parse().unwrap();
        assert_eq!(mean, x as f64);
        assert!(x >= last);
        last = x;
    }
}

#[test]
fn cost_ordered_baseline_uses_one_stage_per_class() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "c.toml",
        &synthetic_config(
            4,
            2,
            300,
            "mode = \"class-linear\"\nscale = 100\ncosts = [2, 1, 2, 1]",
            "",
        ),
    );
    let out = tmp.path().join("out");
    let o = run(&[
        "baseline",
        "--which",
        "cost-ordered",
        "--config",
        path_str(&cfg),
        "--out",
        path_str(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = rows(&out.join("baseline_cost-ordered.csv"));
    assert_eq!(r.len(), 1);
    // cheap class (features 1 and 3) forms the first stage
    assert!(r[0].starts_with("1-0-1-0,"), "{r:?}");
    let cost: f64 = r[0].split(',').nth(3).unwrap().parse().unwrap();
    assert!((200.0..=600.0).contains(&cost));

    let explicit = write(
        tmp.path(),
        "e.toml",
        &synthetic_config(4, 2, 300, "mode = \"explicit\"\ncosts = [2, 1, 2, 1]", ""),
    );
    let out2 = tmp.path().join("out2");
    let o = run(&[
        "baseline",
        "--which",
        "cost-ordered",
        "--config",
        path_str(&explicit),
        "--out",
        path_str(&out2),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out2.exists());
}

#[test]
fn single_stage_baseline_pays_every_cost() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "c.toml",
        &synthetic_config(4, 2, 300, "mode = \"explicit\"\ncosts = [1.5, 2, 3, 4]", ""),
    );
    let out = tmp.path().join("out");
    let o = run(&[
        "baseline",
        "--which",
        "single-stage",
        "--config",
        path_str(&cfg),
        "--out",
        path_str(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = rows(&out.join("baseline_single-stage.csv"));
    let cells: Vec<&str> = r[0].split(',').collect();
    assert_eq!(cells[0], "0-0-0-0");
    assert_eq!(cells[3].parse::<f64>().unwrap(), 10.5);
}

#[test]
fn sweep_of_one_combination_returns_it() {
    let tmp = TempDir::new().unwrap();
    let grid = "[sweep]\npopulation_size = [16]\nmutation_rate = [0.3]\ncrossover_rate = [0.7]\n\
                mutation_bias = [2.5]\nelitism_fraction = [0.25]\nmax_iter = 4";
    let cfg = write(
        tmp.path(),
        "c.toml",
        &synthetic_config(4, 2, 300, "mode = \"explicit\"\ncosts = [1, 2, 3, 4]", grid),
    );
    let out = tmp.path().join("out");
    let o = run(&["sweep", "--config", path_str(&cfg), "--seed", "0,1", "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = rows(&out.join("sweep.csv"));
    assert_eq!(r.len(), 1);
    assert!(r[0].starts_with("16,0.3,0.7,2.5,0.25,"), "{r:?}");
    assert!(stdout(&o).contains("population_size=16"));

    let empty = write(
        tmp.path(),
        "e.toml",
        &synthetic_config(
            4,
            2,
            300,
            "mode = \"explicit\"\ncosts = [1, 2, 3, 4]",
            "[sweep]\nmutation_rate = []",
        ),
    );
    let o = run(&["sweep", "--config", path_str(&empty), "--out", path_str(&tmp.path().join("o2"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("empty sweep grid"));
}

#[test]
fn sample_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["synthetic15.toml", "desk6.toml", "pima.toml", "credit.toml", "heart.toml"] {
        let text = fs::read_to_string(dir.join(name)).unwrap();
        let value: toml::Table = toml::from_str(&text).unwrap();
        assert!(value.contains_key("threshold"), "{name}");
    }
}
