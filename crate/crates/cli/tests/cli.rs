use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pmd::datasets::synthetic::{generate, SyntheticSpec};

fn pmd_bin(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pmd"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("run pmd")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// A small generated dataset as `ratings.csv` and `genome-scores.csv`.
fn write_synthetic(dir: &Path) -> (PathBuf, PathBuf) {
    let (data, genome) = generate(&SyntheticSpec::small(3)).unwrap();
    let mut ratings = String::from("user,item,rating\n");
    for (u, i, r) in data.ratings.entries() {
        let _ = writeln!(
            ratings,
            "{},{},{r}",
            data.users.raw(u).unwrap(),
            data.items.raw(i).unwrap()
        );
    }
    let mut scores = String::from("movieId,tagId,relevance\n");
    for (i, v) in genome.vectors.iter().enumerate() {
        for (t, x) in v.as_ref().unwrap().iter().enumerate() {
            let _ = writeln!(scores, "{},{},{x}", data.items.raw(i as u32).unwrap(), t + 1);
        }
    }
    let (rp, gp) = (dir.join("ratings.csv"), dir.join("genome-scores.csv"));
    std::fs::write(&rp, ratings).unwrap();
    std::fs::write(&gp, scores).unwrap();
    (rp, gp)
}

#[test]
fn version_names_cache_formats() {
    let dir = tempfile::tempdir().unwrap();
    let o = pmd_bin(dir.path(), &["--version"]);
    let text = stdout(&o);
    assert!(text.contains("PMDC v1") && text.contains("PMDS v1"), "{text}");
}

#[test]
fn case_study_table_and_check() {
    let dir = tempfile::tempdir().unwrap();
    let o = pmd_bin(dir.path(), &["case-study", "--check"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let row = text.lines().find(|l| l.starts_with("u4 & u5")).unwrap();
    assert!(row.contains("---"));
    let header = text.lines().next().unwrap();
    let jaccard_col = header.split_whitespace().position(|h| h == "jaccard").unwrap();
    let u12 = text.lines().find(|l| l.starts_with("u1 & u2")).unwrap();
    // Row labels take three whitespace-separated fields.
    let cell = u12.split_whitespace().nth(jaccard_col + 2).unwrap();
    assert_eq!(cell.parse::<f64>().unwrap(), 0.5);
    assert!(dir.path().join("case-study-one-minus.csv").exists());
}

#[test]
fn corrupted_fixture_fails_check() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    let ratings = pmd::case_study::TOY_RATINGS_CSV.replace("u5,Titanic,5", "u5,Titanic,5\nu5,IronMan,1");
    std::fs::write(&bad, ratings).unwrap();
    let o = pmd_bin(dir.path(), &["case-study", "--check", "--ratings", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn missing_fixture_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = pmd_bin(dir.path(), &["case-study", "--similarity", "/no/such/file.csv"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn pair_prints_coupling() {
    let dir = tempfile::tempdir().unwrap();
    let o = pmd_bin(dir.path(), &["pair", "--user-a", "u5", "--user-b", "u6", "--coupling"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let flows: Vec<&str> = text.lines().skip_while(|l| !l.starts_with("item_a")).skip(1).collect();
    assert_eq!(flows.len(), 1);
    let f: Vec<&str> = flows[0].split(',').collect();
    assert_eq!(&f[..2], &["Titanic", "Casablanca"]);
    assert_eq!(f[2].parse::<f64>().unwrap(), 1.0);
    assert!((f[3].parse::<f64>().unwrap() - 0.2).abs() < 1e-12);

    let same = stdout(&pmd_bin(dir.path(), &["pair", "--user-a", "u2", "--user-b", "u2"]));
    assert!(same.contains("value       0\n"), "{same}");
    let pcc = stdout(&pmd_bin(
        dir.path(),
        &["pair", "--user-a", "u4", "--user-b", "u5", "--measure", "pcc"],
    ));
    assert!(pcc.contains("uncomputable"));
    let unknown = pmd_bin(dir.path(), &["pair", "--user-a", "u4", "--user-b", "nobody"]);
    assert_eq!(unknown.status.code(), Some(3));
}

#[test]
fn pmd_without_genome_names_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let (ratings, _) = write_synthetic(dir.path());
    let o = pmd_bin(
        dir.path(),
        &["evaluate", "--dataset", "csv", "--ratings", ratings.to_str().unwrap(), "--measures", "pmd,cos"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--genome-scores"));
}

#[test]
fn bad_config_keys_and_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.ini");
    std::fs::write(&cfg, "measures = cos\nbogus = 1\n").unwrap();
    let o = pmd_bin(dir.path(), &["--config", cfg.to_str().unwrap(), "case-study"]);
    assert_eq!(o.status.code(), Some(2));

    let broken = dir.path().join("broken.csv");
    std::fs::write(&broken, "user,item,rating\n1,1,4\n2,1,oops\n").unwrap();
    let o = pmd_bin(
        dir.path(),
        &["ingest", "--dataset", "csv", "--ratings", broken.to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains(":3:"));
}

#[test]
fn ingest_metric_and_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let (ratings, genome) = write_synthetic(dir.path());
    let out = dir.path().join("out");
    let data = ["--dataset", "csv", "--ratings", ratings.to_str().unwrap()];

    let o = pmd_bin(&out, &[&["ingest"][..], &data].concat());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("ingest/manifest.json").exists());
    assert!(out.join("ingest/items.json").exists());

    let with_genome = [&data[..], &["--genome-scores", genome.to_str().unwrap()]].concat();
    let o = pmd_bin(&out, &[&["metric"][..], &with_genome].concat());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("cache      written"), "{text}");
    assert!(text.contains("0 violations"), "{text}");
    let again = stdout(&pmd_bin(&out, &[&["metric"][..], &with_genome].concat()));
    assert!(again.contains("cache      loaded"), "{again}");

    // Config file values sit under the flags.
    let cfg = dir.path().join("run.ini");
    std::fs::write(&cfg, "measures = pmd,cos\nfractions = 0.5\nk = 10\nreps = 3\n").unwrap();
    let args = [
        &["--config", cfg.to_str().unwrap(), "evaluate", "--reps", "1"][..],
        &with_genome,
    ]
    .concat();
    let o = pmd_bin(&out, &args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("report.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("pmd,0.5,10,0,"));
    for name in ["report.json", "fig-sparsity.csv", "fig-ksweep.csv"] {
        assert!(out.join(name).exists(), "{name}");
    }
    // Second run reads the pair-score cache and reproduces the report.
    let o = pmd_bin(&out, &args);
    assert_eq!(o.status.code(), Some(0));
    let csv2 = std::fs::read_to_string(out.join("report.csv")).unwrap();
    let mae = |s: &str| s.lines().skip(1).map(|l| l.split(',').nth(4).unwrap().to_string()).collect::<Vec<_>>();
    assert_eq!(mae(&csv), mae(&csv2));
    assert!(std::fs::read_dir(out.join("cache/scores")).unwrap().count() >= 1);
}
