//! Rating files, tag-genome vectors and the cached item metric.
//!
//! Raw user and item ids are mapped to dense indices in order of first
//! appearance, so reading the same file twice gives the same indices.

mod cache;
mod genome;
pub mod synthetic;

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use cache::{
    read_metric_cache, read_score_cache, write_metric_cache, write_score_cache, CacheStatus,
    METRIC_CACHE_MAGIC, METRIC_CACHE_VERSION, SCORE_CACHE_MAGIC, SCORE_CACHE_VERSION,
};
pub(crate) use cache::Fingerprint;
pub use genome::{
    build_item_metric, link_by_title, load_tag_genome, normalize_title, read_genome_movies,
    read_item_titles, read_links, read_tag_genome, GenomeVectors, MetricBuild,
};

use crate::error::{Error, Result};
use crate::model::{RatingScale, SparseRatings};

/// Bijection between raw ids and dense indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct IdMap {
    raw: Vec<String>,
    dense: HashMap<String, u32>,
}

impl TryFrom<Vec<String>> for IdMap {
    type Error = Error;

    fn try_from(raw: Vec<String>) -> Result<Self> {
        IdMap::from_raw(raw)
    }
}

impl From<IdMap> for Vec<String> {
    fn from(map: IdMap) -> Self {
        map.raw
    }
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_raw(raw: Vec<String>) -> Result<Self> {
        let mut map = IdMap::new();
        for id in raw {
            if map.get(&id).is_some() {
                return Err(Error::Config(format!("duplicate raw id {id:?}")));
            }
            map.intern(&id);
        }
        Ok(map)
    }

    /// Dense index for `raw`, assigning the next free one on first sight.
    pub fn intern(&mut self, raw: &str) -> u32 {
        if let Some(&idx) = self.dense.get(raw) {
            return idx;
        }
        let idx = self.raw.len() as u32;
        self.raw.push(raw.to_string());
        self.dense.insert(raw.to_string(), idx);
        idx
    }

    pub fn get(&self, raw: &str) -> Option<u32> {
        self.dense.get(raw).copied()
    }

    pub fn raw(&self, dense: u32) -> Option<&str> {
        self.raw.get(dense as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &str)> {
        self.raw.iter().enumerate().map(|(i, r)| (i as u32, r.as_str()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetFormat {
    /// `user TAB item TAB rating TAB timestamp` (`u.data`).
    Ml100k,
    /// `user::item::rating::timestamp` (`ratings.dat`).
    Ml1m,
    /// `user,item,rating` with an optional header line.
    Csv,
}

impl DatasetFormat {
    pub fn key(self) -> &'static str {
        match self {
            DatasetFormat::Ml100k => "ml-100k",
            DatasetFormat::Ml1m => "ml-1m",
            DatasetFormat::Csv => "csv",
        }
    }
}

impl std::str::FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ml-100k" | "ml100k" => Ok(DatasetFormat::Ml100k),
            "ml-1m" | "ml1m" => Ok(DatasetFormat::Ml1m),
            "csv" => Ok(DatasetFormat::Csv),
            other => Err(Error::Config(format!(
                "unknown dataset {other:?} (expected ml-100k, ml-1m or csv)"
            ))),
        }
    }
}

impl std::fmt::Display for DatasetFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.key())
    }
}

/// Ratings together with the raw ids they were read under.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub format: DatasetFormat,
    pub ratings: SparseRatings,
    pub users: IdMap,
    pub items: IdMap,
}

/// Where a dataset and its item features live.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: DatasetFormat,
    pub ratings: PathBuf,
    /// `genome-scores.csv`.
    pub genome_scores: Option<PathBuf>,
    /// `movies.csv` of the genome release, used to link items by title.
    pub genome_movies: Option<PathBuf>,
    /// `u.item` or `movies.dat`, titles of the rated items.
    pub item_titles: Option<PathBuf>,
    /// Explicit `item,genome_movie_id` table; takes precedence over titles.
    pub links: Option<PathBuf>,
    pub scale: RatingScale,
}

impl DatasetManifest {
    pub fn new(name: DatasetFormat, ratings: impl Into<PathBuf>) -> Self {
        DatasetManifest {
            name,
            ratings: ratings.into(),
            genome_scores: None,
            genome_movies: None,
            item_titles: None,
            links: None,
            scale: RatingScale::FIVE_STAR,
        }
    }

    pub fn load_ratings(&self) -> Result<Dataset> {
        load_ratings(&self.ratings, self.name, self.scale)
    }

    /// Genome movie id of every dense item, `None` where no link exists.
    ///
    /// MovieLens-1M shares movie ids with the genome; the 100k release does
    /// not, so its items are joined on title unless a links table is given.
    pub fn genome_ids(&self, dataset: &Dataset) -> Result<Vec<Option<u32>>> {
        if let Some(links) = &self.links {
            let table = read_links(links)?;
            return Ok(dataset
                .items
                .iter()
                .map(|(_, raw)| table.get(raw).copied())
                .collect());
        }
        match self.name {
            DatasetFormat::Ml1m | DatasetFormat::Csv if self.item_titles.is_none() => Ok(dataset
                .items
                .iter()
                .map(|(_, raw)| raw.parse().ok())
                .collect()),
            _ => {
                let titles = self.item_titles.as_ref().ok_or_else(|| {
                    Error::Config(format!(
                        "{} items need a titles file or a links table to reach the genome",
                        self.name
                    ))
                })?;
                let movies = self.genome_movies.as_ref().ok_or_else(|| {
                    Error::Config("linking by title needs the genome movies file".into())
                })?;
                let item_titles = read_item_titles(titles, self.name)?;
                let genome = read_genome_movies(movies)?;
                Ok(link_by_title(&dataset.items, &item_titles, &genome))
            }
        }
    }

    /// Tag-genome vectors aligned with the dense items of `dataset`.
    pub fn load_genome(&self, dataset: &Dataset) -> Result<GenomeVectors> {
        let scores = self
            .genome_scores
            .as_ref()
            .ok_or_else(|| Error::Config("no genome scores file configured".into()))?;
        let ids = self.genome_ids(dataset)?;
        load_tag_genome(scores, &ids)
    }
}

pub(crate) fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

/// Reads a whole file, replacing bytes that are not UTF-8 (older MovieLens
/// releases use Latin-1 titles).
pub(crate) fn read_lossy(path: &Path) -> Result<String> {
    let mut bytes = Vec::new();
    open(path)?
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    Ok(match String::from_utf8(bytes) {
        Ok(s) => s,
        Err(e) => e.into_bytes().iter().map(|&b| b as char).collect(),
    })
}

pub fn load_ratings(path: &Path, format: DatasetFormat, scale: RatingScale) -> Result<Dataset> {
    read_ratings(open(path)?, format, scale, path)
}

pub fn parse_ml100k(path: &Path) -> Result<Dataset> {
    load_ratings(path, DatasetFormat::Ml100k, RatingScale::FIVE_STAR)
}

pub fn parse_ml1m(path: &Path) -> Result<Dataset> {
    load_ratings(path, DatasetFormat::Ml1m, RatingScale::FIVE_STAR)
}

pub fn parse_csv(path: &Path, scale: RatingScale) -> Result<Dataset> {
    load_ratings(path, DatasetFormat::Csv, scale)
}

/// Parses ratings from any reader; `label` names the source in errors.
pub fn read_ratings(
    reader: impl BufRead,
    format: DatasetFormat,
    scale: RatingScale,
    label: &Path,
) -> Result<Dataset> {
    let mut users = IdMap::new();
    let mut items = IdMap::new();
    let mut triplets = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(label, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = match format {
            DatasetFormat::Ml100k => line.split('\t').collect(),
            DatasetFormat::Ml1m => line.split("::").collect(),
            DatasetFormat::Csv => line.split(',').map(str::trim).collect(),
        };
        let min_fields = if format == DatasetFormat::Csv { 3 } else { 4 };
        if fields.len() < min_fields {
            return Err(Error::parse(
                label,
                lineno,
                format!("expected {min_fields} fields, found {}", fields.len()),
            ));
        }
        let rating: f64 = match fields[2].trim().parse() {
            Ok(r) => r,
            // A leading header line is allowed in CSV input.
            Err(_) if format == DatasetFormat::Csv && triplets.is_empty() && users.is_empty() => {
                continue
            }
            Err(_) => {
                return Err(Error::parse(
                    label,
                    lineno,
                    format!("rating {:?} is not a number", fields[2]),
                ))
            }
        };
        if !rating.is_finite() || !scale.contains(rating) {
            return Err(Error::parse(
                label,
                lineno,
                format!("rating {rating} outside [{}, {}]", scale.min, scale.max),
            ));
        }
        let (user, item) = (fields[0].trim(), fields[1].trim());
        if user.is_empty() || item.is_empty() {
            return Err(Error::parse(label, lineno, "empty user or item id"));
        }
        triplets.push((users.intern(user), items.intern(item), rating));
    }
    let ratings = SparseRatings::from_triplets(users.len(), items.len(), scale, triplets)?;
    Ok(Dataset {
        format,
        ratings,
        users,
        items,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str, format: DatasetFormat) -> Result<Dataset> {
        read_ratings(
            text.as_bytes(),
            format,
            RatingScale::FIVE_STAR,
            Path::new("test"),
        )
    }

    #[test]
    fn ml100k_line() {
        let d = read("196\t242\t3\t881250949\n186\t302\t3\t891717742\n", DatasetFormat::Ml100k)
            .unwrap();
        assert_eq!(d.ratings.num_ratings(), 2);
        let u = d.users.get("196").unwrap();
        let i = d.items.get("242").unwrap();
        assert_eq!(d.ratings.rating(u, i), Some(3.0));
    }

    #[test]
    fn empty_file() {
        let d = read("", DatasetFormat::Ml100k).unwrap();
        assert_eq!(d.ratings.num_users(), 0);
    }

    #[test]
    fn scale_violation_reports_line() {
        match read("1\t1\t3\t0\n1\t2\t9\t0\n", DatasetFormat::Ml100k) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn ml1m_fields() {
        let d = read("1::1193::5::978300760\n", DatasetFormat::Ml1m).unwrap();
        assert_eq!(d.ratings.rating(0, 0), Some(5.0));
        assert!(matches!(
            read("1::1193::5\n", DatasetFormat::Ml1m),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn csv_header_and_duplicates() {
        let d = read("user,item,rating\na,x,2\nb,x,4\na,x,5\n", DatasetFormat::Csv).unwrap();
        assert_eq!(d.ratings.num_ratings(), 2);
        assert_eq!(d.ratings.rating(0, 0), Some(5.0));
    }

    #[test]
    fn reindexing_is_stable() {
        let text = "9\t5\t1\t0\n3\t5\t2\t0\n9\t7\t3\t0\n";
        let a = read(text, DatasetFormat::Ml100k).unwrap();
        let b = read(text, DatasetFormat::Ml100k).unwrap();
        assert_eq!(a.users, b.users);
        assert_eq!(a.items, b.items);
        assert_eq!(a.users.raw(0), Some("9"));
    }
}
