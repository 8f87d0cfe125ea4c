//! Run settings, merged from defaults, a preset, a config file and flags.
//!
//! Each source is a flat `key -> value` layer using the long flag names.
//! Later layers win; the merged layer is parsed and validated in one go
//! before any data is touched.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use pmd::datasets::{DatasetFormat, DatasetManifest};
use pmd::evaluation::{SweepConfig, BASELINE_KEY, SPARSITY_FRACTIONS};
use pmd::measures::lookup;
use pmd::metric::DistanceMode;
use pmd::transport::Solver;

use crate::CliError;

pub const KEYS: &[&str] = &[
    "preset",
    "dataset",
    "ratings",
    "data-dir",
    "genome-scores",
    "genome-movies",
    "genome-dir",
    "item-titles",
    "links",
    "similarity",
    "mode",
    "measures",
    "fractions",
    "k",
    "reps",
    "seed",
    "solver",
    "epsilon",
    "max-iter",
    "truncate",
    "out",
    "threads",
    "score-cache",
    "metric-cache",
];

pub const PRESETS: &[&str] = &["fig3a", "fig3b", "fig3c", "fig3d", "fig3e", "fig3f"];

const PLOTTED: &str = "pmd,cos,pcc,msd,jmsd,nhsm,bcf,n-bcf";

pub type Layer = BTreeMap<String, String>;

fn check_key(key: &str, source: &str) -> Result<(), CliError> {
    if KEYS.contains(&key) {
        Ok(())
    } else {
        Err(CliError::Config(format!("unknown key {key:?} in {source}")))
    }
}

/// Reads a flat `key = value` file. Section headers are allowed but ignored.
pub fn read_config_file(path: &Path) -> Result<Layer, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let ini = ini::Ini::load_from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut layer = Layer::new();
    for (_, props) in ini.iter() {
        for (key, value) in props.iter() {
            let key = key.trim().to_ascii_lowercase().replace('_', "-");
            check_key(&key, &path.display().to_string())?;
            layer.insert(key, value.trim().to_string());
        }
    }
    Ok(layer)
}

fn k_range(start: usize, end: usize, step: usize) -> String {
    (start..=end)
        .step_by(step)
        .map(|k| k.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// The protocol behind each panel of the MAE figure.
pub fn preset(name: &str) -> Result<Layer, CliError> {
    let all_fractions = SPARSITY_FRACTIONS
        .iter()
        .map(|f| f.to_string())
        .collect::<Vec<_>>()
        .join(",");
    let (dataset, fractions, ks) = match name {
        "fig3a" => ("ml-100k", all_fractions, "40".to_string()),
        "fig3b" => ("ml-100k", "0.8".into(), k_range(5, 60, 5)),
        "fig3c" => ("ml-100k", "0.1".into(), k_range(5, 60, 5)),
        "fig3d" => ("ml-1m", all_fractions, "40".to_string()),
        "fig3e" => ("ml-1m", "0.8".into(), k_range(4, 60, 4)),
        "fig3f" => ("ml-1m", "0.1".into(), k_range(4, 60, 4)),
        other => {
            return Err(CliError::Config(format!(
                "unknown preset {other:?} (expected one of {})",
                PRESETS.join(", ")
            )))
        }
    };
    let mut layer = Layer::new();
    layer.insert("dataset".into(), dataset.into());
    layer.insert("fractions".into(), fractions);
    layer.insert("k".into(), ks);
    layer.insert("measures".into(), PLOTTED.into());
    layer.insert("reps".into(), "5".into());
    Ok(layer)
}

/// Stacks `flags` over `file` over the preset either of them names.
pub fn merge(file: Layer, flags: Layer) -> Result<Layer, CliError> {
    let preset_name = flags.get("preset").or_else(|| file.get("preset")).cloned();
    let mut merged = match preset_name {
        Some(name) => preset(&name)?,
        None => Layer::new(),
    };
    merged.extend(file);
    merged.extend(flags);
    Ok(merged)
}

/// Fully parsed settings shared by every subcommand.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub dataset: DatasetFormat,
    pub ratings: Option<PathBuf>,
    pub item_titles: Option<PathBuf>,
    pub links: Option<PathBuf>,
    pub genome_scores: Option<PathBuf>,
    pub genome_movies: Option<PathBuf>,
    pub similarity: Option<PathBuf>,
    /// `None` lets the command pick its own default.
    pub mode: Option<DistanceMode>,
    pub sweep: SweepConfig,
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub score_cache: bool,
    pub metric_cache: bool,
}

fn parse_list<T>(key: &str, raw: &str, parse: impl Fn(&str) -> Option<T>) -> Result<Vec<T>, CliError> {
    let values: Vec<T> = raw
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(s).ok_or_else(|| CliError::Config(format!("--{key}: bad value {s:?}"))))
        .collect::<Result<_, _>>()?;
    if values.is_empty() {
        return Err(CliError::Config(format!("--{key} is empty")));
    }
    Ok(values)
}

fn parse_one<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T, CliError> {
    raw.trim()
        .parse()
        .map_err(|_| CliError::Config(format!("--{key}: bad value {raw:?}")))
}

fn parse_bool(key: &str, raw: &str) -> Result<bool, CliError> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(CliError::Config(format!("--{key}: expected true or false, got {raw:?}"))),
    }
}

/// First existing file among `dir/name` candidates.
fn in_dir(dir: Option<&PathBuf>, names: &[&str]) -> Option<PathBuf> {
    let dir = dir?;
    names.iter().map(|n| dir.join(n)).find(|p| p.exists())
}

impl RunConfig {
    pub fn from_layer(layer: &Layer) -> Result<Self, CliError> {
        for key in layer.keys() {
            check_key(key, "settings")?;
        }
        let get = |k: &str| layer.get(k).map(String::as_str);
        let path = |k: &str| get(k).map(PathBuf::from);

        let dataset = match get("dataset") {
            Some(s) => s.parse().map_err(|e: pmd::Error| CliError::Config(e.to_string()))?,
            None => DatasetFormat::Ml100k,
        };
        let data_dir = path("data-dir");
        if let Some(dir) = &data_dir {
            if !dir.is_dir() {
                return Err(CliError::Config(format!(
                    "--data-dir {} is not a directory",
                    dir.display()
                )));
            }
        }
        let (ratings_name, titles_name) = match dataset {
            DatasetFormat::Ml100k => ("u.data", "u.item"),
            DatasetFormat::Ml1m => ("ratings.dat", "movies.dat"),
            DatasetFormat::Csv => ("ratings.csv", "items.csv"),
        };
        let ratings = path("ratings").or_else(|| in_dir(data_dir.as_ref(), &[ratings_name]));
        let item_titles = path("item-titles").or_else(|| in_dir(data_dir.as_ref(), &[titles_name]));
        let genome_dir = path("genome-dir");
        let genome_scores =
            path("genome-scores").or_else(|| in_dir(genome_dir.as_ref(), &["genome-scores.csv"]));
        let genome_movies =
            path("genome-movies").or_else(|| in_dir(genome_dir.as_ref(), &["movies.csv"]));
        if let (Some(dir), None) = (&genome_dir, &genome_scores) {
            return Err(CliError::Config(format!(
                "--genome-dir {} has no genome-scores.csv",
                dir.display()
            )));
        }

        let mode = get("mode")
            .map(|s| s.parse().map_err(|e: pmd::Error| CliError::Config(e.to_string())))
            .transpose()?;

        let mut sweep = SweepConfig::default();
        if let Some(raw) = get("measures") {
            sweep.measures = parse_list("measures", raw, |s| {
                let key = s.to_ascii_lowercase();
                (key == BASELINE_KEY || lookup(&key).is_ok()).then_some(key)
            })?;
        }
        if let Some(raw) = get("fractions") {
            sweep.fractions = parse_list("fractions", raw, |s| {
                s.parse::<f64>().ok().filter(|f| *f > 0.0 && *f < 1.0)
            })?;
        }
        if let Some(raw) = get("k") {
            sweep.ks = parse_list("k", raw, |s| s.parse::<usize>().ok().filter(|k| *k > 0))?;
        }
        if let Some(raw) = get("reps") {
            sweep.repetitions = parse_one("reps", raw)?;
            if sweep.repetitions == 0 {
                return Err(CliError::Config("--reps must be at least 1".into()));
            }
        }
        if let Some(raw) = get("seed") {
            sweep.seed = parse_one("seed", raw)?;
        }
        let epsilon: f64 = get("epsilon").map(|s| parse_one("epsilon", s)).transpose()?.unwrap_or(1e-3);
        let max_iter: usize =
            get("max-iter").map(|s| parse_one("max-iter", s)).transpose()?.unwrap_or(10_000);
        if !(epsilon > 0.0 && epsilon.is_finite()) || max_iter == 0 {
            return Err(CliError::Config(
                "--epsilon must be positive and --max-iter at least 1".into(),
            ));
        }
        sweep.solver = match get("solver").unwrap_or("exact") {
            "exact" => Solver::Exact,
            "entropic" => Solver::Entropic { epsilon, max_iter },
            other => {
                return Err(CliError::Config(format!(
                    "--solver: expected exact or entropic, got {other:?}"
                )))
            }
        };
        if let Some(raw) = get("truncate") {
            let t: usize = parse_one("truncate", raw)?;
            if t == 0 {
                return Err(CliError::Config("--truncate must keep at least one item".into()));
            }
            sweep.truncation = Some(t);
        }

        let threads = get("threads").map(|s| parse_one("threads", s)).transpose()?;
        if threads == Some(0) {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        let out = path("out").unwrap_or_else(|| PathBuf::from("out"));
        let score_cache = get("score-cache").map(|s| parse_bool("score-cache", s)).transpose()?;
        let metric_cache = get("metric-cache").map(|s| parse_bool("metric-cache", s)).transpose()?;

        Ok(RunConfig {
            preset: get("preset").map(String::from),
            dataset,
            ratings,
            item_titles,
            links: path("links"),
            genome_scores,
            genome_movies,
            similarity: path("similarity"),
            mode,
            sweep,
            out,
            threads,
            score_cache: score_cache.unwrap_or(true),
            metric_cache: metric_cache.unwrap_or(true),
        })
    }

    /// The manifest for the configured dataset; the ratings file is required.
    pub fn manifest(&self) -> Result<DatasetManifest, CliError> {
        let ratings = self.ratings.clone().ok_or_else(|| {
            CliError::Config("no ratings file: pass --ratings or --data-dir".into())
        })?;
        if !ratings.exists() {
            return Err(CliError::Config(format!(
                "--ratings {} does not exist",
                ratings.display()
            )));
        }
        let mut manifest = DatasetManifest::new(self.dataset, ratings);
        manifest.item_titles = self.item_titles.clone();
        manifest.links = self.links.clone();
        manifest.genome_scores = self.genome_scores.clone();
        manifest.genome_movies = self.genome_movies.clone();
        Ok(manifest)
    }

    /// Fails, naming the flag, when a measure needs item features that were not given.
    pub fn require_genome(&self, why: &str) -> Result<(), CliError> {
        if self.genome_scores.is_none() {
            return Err(CliError::Config(format!(
                "{why} needs item features: pass --genome-scores (or --genome-dir)"
            )));
        }
        Ok(())
    }

    pub fn metric_cache_path(&self, mode: DistanceMode) -> Option<PathBuf> {
        self.metric_cache.then(|| {
            self.out
                .join("cache")
                .join(format!("item-metric-{}-{}.pmdc", self.dataset, mode))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(pairs: &[(&str, &str)]) -> Layer {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn flags_beat_file_beat_preset() {
        let file = layer(&[("preset", "fig3b"), ("k", "10"), ("seed", "7")]);
        let flags = layer(&[("seed", "9")]);
        let cfg = RunConfig::from_layer(&merge(file, flags).unwrap()).unwrap();
        assert_eq!(cfg.sweep.ks, vec![10]);
        assert_eq!(cfg.sweep.seed, 9);
        assert_eq!(cfg.sweep.fractions, vec![0.8]);
        assert_eq!(cfg.sweep.measures.len(), 8);
    }

    #[test]
    fn presets_follow_the_figure_protocols() {
        let a = RunConfig::from_layer(&preset("fig3a").unwrap()).unwrap();
        assert_eq!(a.sweep.fractions, SPARSITY_FRACTIONS.to_vec());
        assert_eq!(a.sweep.ks, vec![40]);
        let e = RunConfig::from_layer(&preset("fig3e").unwrap()).unwrap();
        assert_eq!(e.dataset, DatasetFormat::Ml1m);
        assert_eq!(e.sweep.ks.first(), Some(&4));
        assert_eq!(e.sweep.ks.last(), Some(&60));
        assert_eq!(e.sweep.ks.len(), 15);
        assert!(preset("fig4").is_err());
    }

    #[test]
    fn rejects_bad_values() {
        for bad in [
            ("fractions", "0.8,1.2"),
            ("k", "0"),
            ("measures", "pmd,foo"),
            ("solver", "magic"),
            ("reps", "0"),
            ("unknown", "1"),
        ] {
            let err = RunConfig::from_layer(&layer(&[bad])).unwrap_err();
            assert!(matches!(err, CliError::Config(_)), "{bad:?}");
        }
    }
}
