use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::json;

use pmd::case_study::{golden_checks, CaseStudy, TOY_RATINGS_CSV, TOY_SIMILARITY_CSV};
use pmd::datasets::{build_item_metric, CacheStatus, Dataset, DatasetManifest, MetricBuild};
use pmd::evaluation::run_sweep;
use pmd::measures::{lookup, pmd_solution, Measure, MeasureContext};
use pmd::metric::{verify_triangle, DenseItemMetric, DistanceMode, ItemMetric, DEFAULT_TRIANGLE_SAMPLES};

use crate::config::RunConfig;
use crate::CliError;

fn write_file(path: &Path, body: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, body)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn to_json(value: &impl serde::Serialize) -> Result<String, CliError> {
    serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))
}

fn load_dataset(cfg: &RunConfig) -> Result<(DatasetManifest, Dataset), CliError> {
    let manifest = cfg.manifest()?;
    let dataset = manifest.load_ratings()?;
    log::info!(
        "{}: {} users, {} items, {} ratings",
        manifest.ratings.display(),
        dataset.ratings.num_users(),
        dataset.ratings.num_items(),
        dataset.ratings.num_ratings()
    );
    Ok((manifest, dataset))
}

fn load_metric(
    cfg: &RunConfig,
    manifest: &DatasetManifest,
    dataset: &Dataset,
    mode: DistanceMode,
) -> Result<MetricBuild, CliError> {
    let genome = manifest.load_genome(dataset)?;
    let cache = cfg.metric_cache_path(mode);
    let build = build_item_metric(&genome, mode, cache.as_deref())?;
    if !build.missing.is_empty() {
        log::warn!(
            "{} of {} items have no genome vector; they sit at distance {:.4} from everything",
            build.missing.len(),
            dataset.ratings.num_items(),
            build.metric.d_max()
        );
    }
    Ok(build)
}

fn cache_line(status: &CacheStatus, path: Option<&PathBuf>) -> String {
    let path = path.map(|p| p.display().to_string()).unwrap_or_default();
    match status {
        CacheStatus::Disabled => "disabled".into(),
        CacheStatus::Loaded => format!("loaded {path}"),
        CacheStatus::Written => format!("written {path}"),
        CacheStatus::Rebuilt(why) => format!("rebuilt {path} ({why})"),
    }
}

pub fn ingest(cfg: &RunConfig) -> Result<(), CliError> {
    let (manifest, dataset) = load_dataset(cfg)?;
    let r = &dataset.ratings;
    let counts: Vec<usize> = (0..r.num_users() as u32).map(|u| r.user_items(u).len()).collect();
    let stats = json!({
        "users": r.num_users(),
        "items": r.num_items(),
        "ratings": r.num_ratings(),
        "sparsity": r.sparsity(),
        "mean_rating": r.global_mean(),
        "min_ratings_per_user": counts.iter().min(),
        "max_ratings_per_user": counts.iter().max(),
    });
    println!("dataset   {}", dataset.format);
    println!("users     {}", r.num_users());
    println!("items     {}", r.num_items());
    println!("ratings   {}", r.num_ratings());
    println!("sparsity  {:.4}", r.sparsity());
    if let Some(m) = r.global_mean() {
        println!("mean      {m:.4}");
    }

    let dir = cfg.out.join("ingest");
    write_file(
        &dir.join("manifest.json"),
        &to_json(&json!({ "manifest": manifest, "stats": stats }))?,
    )?;
    write_file(&dir.join("users.json"), &to_json(&dataset.users)?)?;
    write_file(&dir.join("items.json"), &to_json(&dataset.items)?)?;
    println!("wrote     {}", dir.display());
    Ok(())
}

pub fn metric(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.require_genome("the metric command")?;
    let (manifest, dataset) = load_dataset(cfg)?;
    let mode = cfg.mode.unwrap_or(DistanceMode::Arccos);
    let build = load_metric(cfg, &manifest, &dataset, mode)?;
    let check = verify_triangle(&build.metric, DEFAULT_TRIANGLE_SAMPLES, cfg.sweep.seed);

    println!("mode       {mode}");
    println!("items      {}", build.metric.num_items());
    println!("d_max      {:.6}", build.metric.d_max());
    println!("missing    {}", build.missing.len());
    println!(
        "cache      {}",
        cache_line(&build.cache, cfg.metric_cache_path(mode).as_ref())
    );
    println!(
        "triangle   {} triples, {} violations, worst slack {:.3e}{}",
        check.triples,
        check.violations,
        check.worst_slack,
        if build.metric.is_metric() { "" } else { " (not a metric)" }
    );
    if !build.missing.is_empty() {
        let mut listing = String::from("item\n");
        for &i in &build.missing {
            let _ = writeln!(listing, "{}", dataset.items.raw(i).unwrap_or("?"));
        }
        let path = cfg.out.join("metric").join(format!("missing-items-{}.csv", dataset.format));
        write_file(&path, &listing)?;
        println!("missing    listed in {}", path.display());
    }
    Ok(())
}

fn read_fixture(path: Option<&PathBuf>, builtin: &'static str) -> Result<String, CliError> {
    match path {
        None => Ok(builtin.to_string()),
        Some(p) => std::fs::read_to_string(p).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => {
                CliError::Config(format!("fixture {} not found", p.display()))
            }
            _ => CliError::Data(format!("cannot read {}: {e}", p.display())),
        }),
    }
}

fn toy_study(cfg: &RunConfig) -> Result<CaseStudy, CliError> {
    let ratings = read_fixture(cfg.ratings.as_ref(), TOY_RATINGS_CSV)?;
    let similarity = read_fixture(cfg.similarity.as_ref(), TOY_SIMILARITY_CSV)?;
    Ok(CaseStudy::from_strs(&ratings, &similarity)?)
}

pub fn case_study(cfg: &RunConfig, check: bool) -> Result<(), CliError> {
    let study = toy_study(cfg)?;
    let mode = cfg.mode.unwrap_or(DistanceMode::OneMinus);
    let table = study.table(mode)?;
    print!("{}", table.render());
    let path = cfg.out.join(format!("case-study-{mode}.csv"));
    write_file(&path, &table.to_csv())?;
    println!("wrote {}", path.display());
    if !check {
        return Ok(());
    }
    let checks = golden_checks(&study)?;
    let failed: Vec<_> = checks.iter().filter(|c| !c.pass).collect();
    for c in &checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(format!("{} of {} checks failed", failed.len(), checks.len())))
    }
}

pub fn pair(cfg: &RunConfig, a: &str, b: &str, measure: &str, coupling: bool) -> Result<(), CliError> {
    let measure: Measure = lookup(&measure.to_ascii_lowercase())?;
    let toy = cfg.similarity.is_some() || (cfg.ratings.is_none() && cfg.genome_scores.is_none());
    let (dataset, metric): (Dataset, Option<DenseItemMetric>) = if toy {
        let study = toy_study(cfg)?;
        let metric = study.metric(cfg.mode.unwrap_or(DistanceMode::OneMinus))?;
        (study.dataset, Some(metric))
    } else {
        let (manifest, dataset) = load_dataset(cfg)?;
        let metric = if measure.needs_metric() {
            cfg.require_genome(&format!("measure {}", measure.key()))?;
            let mode = cfg.mode.unwrap_or(DistanceMode::Arccos);
            Some(load_metric(cfg, &manifest, &dataset, mode)?.metric)
        } else {
            None
        };
        (dataset, metric)
    };

    let user = |name: &str| {
        dataset
            .users
            .get(name)
            .ok_or_else(|| CliError::Data(format!("user {name} not found")))
    };
    let (ua, ub) = (user(a)?, user(b)?);
    let mut ctx = MeasureContext::new(&dataset.ratings)
        .with_solver(cfg.sweep.solver)
        .with_truncation(cfg.sweep.truncation);
    if let Some(m) = &metric {
        ctx = ctx.with_metric(m);
    }
    let score = measure.score(&ctx, ua, ub)?;
    println!("measure     {}", measure.key());
    println!("users       {a} {b}");
    match score.value() {
        Some(v) => {
            println!("value       {v}");
            if let Some(s) = score.as_similarity().filter(|_| score.value() != score.as_similarity()) {
                println!("similarity  {s}");
            }
        }
        None => println!("value       uncomputable"),
    }

    if coupling && measure == Measure::Pmd && score.computable {
        let metric = metric.as_ref().expect("pmd always has a metric");
        let (_, solution) = pmd_solution(ua, ub, &ctx)?;
        let mut csv = String::from("item_a,item_b,mass,cost\n");
        for (i, j, mass) in solution.coupling.flows().filter(|f| f.2 > 1e-12) {
            let _ = writeln!(
                csv,
                "{},{},{},{}",
                dataset.items.raw(i).unwrap_or("?"),
                dataset.items.raw(j).unwrap_or("?"),
                mass,
                metric.distance(i, j)
            );
        }
        print!("{csv}");
        let path = cfg.out.join(format!("pair-{a}-{b}-coupling.csv"));
        write_file(&path, &csv)?;
    }
    Ok(())
}

pub fn evaluate(cfg: &RunConfig) -> Result<(), CliError> {
    let mut needs_metric = None;
    for key in &cfg.sweep.measures {
        if let Ok(m) = lookup(key) {
            if m.needs_metric() && needs_metric.is_none() {
                needs_metric = Some(m);
            }
        }
    }
    if let Some(m) = needs_metric {
        cfg.require_genome(&format!("measure {}", m.key()))?;
    }
    let (manifest, dataset) = load_dataset(cfg)?;
    if let Some(name) = &cfg.preset {
        log::info!("preset {name}");
    }
    let metric = match needs_metric {
        Some(_) => {
            let mode = cfg.mode.unwrap_or(DistanceMode::Arccos);
            Some(load_metric(cfg, &manifest, &dataset, mode)?.metric)
        }
        None => None,
    };
    let mut sweep = cfg.sweep.clone();
    if cfg.score_cache {
        sweep.score_cache = Some(cfg.out.join("cache").join("scores"));
    }
    let report = run_sweep(
        &dataset.ratings,
        metric.as_ref().map(|m| m as &dyn ItemMetric),
        &sweep,
    )?;
    print!("{}", report.render_summary());
    for path in report.write_to(&cfg.out)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
