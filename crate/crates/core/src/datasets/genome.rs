use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use super::cache::{read_metric_cache, write_metric_cache, CacheStatus, Fingerprint};
use super::{open, read_lossy, DatasetFormat, IdMap};
use crate::error::{Error, Result};
use crate::metric::{CosineItemMetric, DenseItemMetric, DistanceMode, ItemMetric};
use crate::model::ItemId;

/// Tag-relevance vectors indexed by dense item id.
#[derive(Clone, Debug, PartialEq)]
pub struct GenomeVectors {
    /// Number of tags; tag `k` sits at index `k - 1`.
    pub dim: usize,
    pub vectors: Vec<Option<Vec<f64>>>,
}

impl GenomeVectors {
    /// Items without a usable vector.
    pub fn missing(&self) -> Vec<ItemId> {
        self.vectors
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_none())
            .map(|(i, _)| i as ItemId)
            .collect()
    }

    fn fingerprint(&self, mode: DistanceMode) -> u64 {
        let mut fp = Fingerprint::new();
        fp.bytes(mode.key().as_bytes());
        fp.u64(self.dim as u64);
        fp.u64(self.vectors.len() as u64);
        for v in &self.vectors {
            match v {
                None => fp.u64(u64::MAX),
                Some(v) => v.iter().for_each(|&x| fp.f64(x)),
            }
        }
        fp.finish()
    }
}

/// Lowercased with whitespace collapsed.
pub fn normalize_title(title: &str) -> String {
    title
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Item titles keyed by raw item id.
///
/// Reads `u.item` (`id|title|...`), `movies.dat` (`id::title::genres`) or a
/// two-column `item,title` CSV, depending on `format`.
pub fn read_item_titles(path: &Path, format: DatasetFormat) -> Result<HashMap<String, String>> {
    let mut titles = HashMap::new();
    match format {
        DatasetFormat::Ml100k | DatasetFormat::Ml1m => {
            let text = read_lossy(path)?;
            let sep = if format == DatasetFormat::Ml100k { "|" } else { "::" };
            for (idx, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let mut fields = line.split(sep);
                let (Some(id), Some(title)) = (fields.next(), fields.next()) else {
                    return Err(Error::parse(path, idx + 1, "expected id and title"));
                };
                titles.insert(id.trim().to_string(), title.trim().to_string());
            }
        }
        DatasetFormat::Csv => {
            for (line, record) in csv_records(path)? {
                if record.len() < 2 {
                    return Err(Error::parse(path, line, "expected item,title"));
                }
                titles.insert(record[0].trim().to_string(), record[1].trim().to_string());
            }
        }
    }
    Ok(titles)
}

fn csv_records(path: &Path) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(open(path)?);
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        out.push((line, record));
    }
    Ok(out)
}

/// Genome movie ids keyed by normalized title, from the genome's `movies.csv`.
pub fn read_genome_movies(path: &Path) -> Result<HashMap<String, u32>> {
    let mut movies = HashMap::new();
    for (line, record) in csv_records(path)? {
        if record.len() < 2 {
            return Err(Error::parse(path, line, "expected movieId,title"));
        }
        let Ok(id) = record[0].trim().parse::<u32>() else {
            if line <= 1 {
                continue;
            }
            return Err(Error::parse(path, line, format!("bad movie id {:?}", &record[0])));
        };
        movies.entry(normalize_title(&record[1])).or_insert(id);
    }
    Ok(movies)
}

/// `item,genome_movie_id` pairs, header optional.
pub fn read_links(path: &Path) -> Result<HashMap<String, u32>> {
    let mut links = HashMap::new();
    for (line, record) in csv_records(path)? {
        if record.len() < 2 {
            return Err(Error::parse(path, line, "expected item,genome_movie_id"));
        }
        match record[1].trim().parse::<u32>() {
            Ok(id) => {
                links.insert(record[0].trim().to_string(), id);
            }
            Err(_) if line <= 1 => {}
            Err(_) => {
                return Err(Error::parse(path, line, format!("bad movie id {:?}", &record[1])))
            }
        }
    }
    Ok(links)
}

/// Genome movie id of each dense item, matched on normalized title.
pub fn link_by_title(
    items: &IdMap,
    item_titles: &HashMap<String, String>,
    genome: &HashMap<String, u32>,
) -> Vec<Option<u32>> {
    let linked: Vec<Option<u32>> = items
        .iter()
        .map(|(_, raw)| {
            item_titles
                .get(raw)
                .and_then(|t| genome.get(&normalize_title(t)).copied())
        })
        .collect();
    let hits = linked.iter().flatten().count();
    log::info!("linked {hits} of {} items to the genome by title", items.len());
    linked
}

pub fn load_tag_genome(scores: &Path, genome_ids: &[Option<u32>]) -> Result<GenomeVectors> {
    read_tag_genome(open(scores)?, genome_ids, scores)
}

/// Reads `movieId,tagId,relevance` rows into one dense vector per item.
///
/// `genome_ids[item]` names the genome movie of each dense item. Tags a movie
/// lacks are zero. Items whose movie has no rows, or only zero relevance,
/// come back as `None`.
pub fn read_tag_genome(
    reader: impl BufRead,
    genome_ids: &[Option<u32>],
    label: &Path,
) -> Result<GenomeVectors> {
    let mut wanted: HashMap<u32, Vec<(u32, f64)>> = genome_ids
        .iter()
        .flatten()
        .map(|&id| (id, Vec::new()))
        .collect();
    let mut dim = 0u32;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(label, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let (Some(movie), Some(tag), Some(relevance), None) =
            (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(Error::parse(label, lineno, "expected movieId,tagId,relevance"));
        };
        let (Ok(movie), Ok(tag)) = (movie.trim().parse::<u32>(), tag.trim().parse::<u32>()) else {
            if lineno == 1 {
                continue;
            }
            return Err(Error::parse(label, lineno, "movieId and tagId must be integers"));
        };
        let relevance: f64 = relevance
            .trim()
            .parse()
            .map_err(|_| Error::parse(label, lineno, format!("bad relevance {relevance:?}")))?;
        if !(0.0..=1.0).contains(&relevance) {
            return Err(Error::parse(
                label,
                lineno,
                format!("relevance {relevance} outside [0, 1]"),
            ));
        }
        if tag == 0 {
            return Err(Error::parse(label, lineno, "tag ids start at 1"));
        }
        dim = dim.max(tag);
        if let Some(rows) = wanted.get_mut(&movie) {
            rows.push((tag, relevance));
        }
    }
    let dim = dim as usize;
    let mut by_movie: HashMap<u32, Option<Vec<f64>>> = HashMap::with_capacity(wanted.len());
    for (movie, rows) in wanted {
        if rows.is_empty() {
            by_movie.insert(movie, None);
            continue;
        }
        let mut v = vec![0.0; dim];
        let mut seen = vec![false; dim];
        for (tag, relevance) in rows {
            let k = tag as usize - 1;
            if seen[k] {
                log::warn!("duplicate genome row for movie {movie}, tag {tag}; keeping the last");
            }
            seen[k] = true;
            v[k] = relevance;
        }
        let usable = v.iter().any(|&x| x > 0.0);
        by_movie.insert(movie, usable.then_some(v));
    }
    let vectors: Vec<Option<Vec<f64>>> = genome_ids
        .iter()
        .map(|id| id.and_then(|id| by_movie.get(&id).cloned().flatten()))
        .collect();
    let genome = GenomeVectors { dim, vectors };
    let missing = genome.missing().len();
    if missing > 0 {
        log::warn!(
            "{missing} of {} items have no genome vector and sit at maximal distance",
            genome.vectors.len()
        );
    }
    Ok(genome)
}

/// A materialized item metric and where it came from.
#[derive(Debug)]
pub struct MetricBuild {
    pub metric: DenseItemMetric,
    /// Items without a vector, placed at `d_max` from everything else.
    pub missing: Vec<ItemId>,
    pub cache: CacheStatus,
}

/// Cosine-derived distances over all items, optionally through a cache file.
///
/// A cache whose header, size or source fingerprint does not match is
/// rebuilt and overwritten.
pub fn build_item_metric(
    genome: &GenomeVectors,
    mode: DistanceMode,
    cache: Option<&Path>,
) -> Result<MetricBuild> {
    let missing = genome.missing();
    let fingerprint = genome.fingerprint(mode);
    let mut status = CacheStatus::Disabled;
    if let Some(path) = cache {
        status = CacheStatus::Written;
        if path.exists() {
            match read_metric_cache(path) {
                Ok((metric, fp))
                    if fp == fingerprint
                        && metric.mode() == mode
                        && metric.num_items() == genome.vectors.len() =>
                {
                    return Ok(MetricBuild {
                        metric,
                        missing,
                        cache: CacheStatus::Loaded,
                    });
                }
                Ok(_) => {
                    log::warn!("{} was built from other inputs; rebuilding", path.display());
                    status = CacheStatus::Rebuilt("stale fingerprint".into());
                }
                Err(Error::CacheInvalid { reason, .. }) => {
                    log::warn!("{} is invalid ({reason}); rebuilding", path.display());
                    status = CacheStatus::Rebuilt(reason);
                }
                Err(e) => return Err(e),
            }
        }
    }
    let lazy = CosineItemMetric::new(genome.vectors.clone(), mode)?;
    let metric = DenseItemMetric::materialize(&lazy);
    if let Some(path) = cache {
        write_metric_cache(path, &metric, fingerprint)?;
    }
    Ok(MetricBuild {
        metric,
        missing,
        cache: status,
    })
}
