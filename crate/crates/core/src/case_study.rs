//! The six-user, five-movie toy example.
//!
//! Users u1 to u3 share two movies each; u4, u5 and u6 share none, which is
//! where the co-rated measures break down.
//!
//! ```
//! use pmd::case_study::CaseStudy;
//! use pmd::measures::Measure;
//! use pmd::metric::DistanceMode;
//!
//! let study = CaseStudy::builtin().unwrap();
//! let table = study.table(DistanceMode::OneMinus).unwrap();
//! let pmd = table.cell("u5", "u6", Measure::Pmd).unwrap();
//! assert!((pmd.value - 0.2).abs() < 1e-12);
//! assert!(!table.cell("u4", "u5", Measure::Cos).unwrap().computable);
//! ```

use std::fmt::Write as _;
use std::path::Path;

use crate::datasets::{read_ratings, Dataset, DatasetFormat};
use crate::error::{Error, Result};
use crate::measures::{Measure, MeasureContext, MeasureResult, ScoreKind};
use crate::metric::{item_metric_from_similarity, DenseItemMetric, DistanceMode, SimilarityTable};
use crate::model::{RatingScale, UserId};

pub const TOY_RATINGS_CSV: &str = include_str!("../fixtures/toy_ratings.csv");
pub const TOY_SIMILARITY_CSV: &str = include_str!("../fixtures/toy_similarity.csv");

/// The user pairs shown in the comparison table.
pub const CASE_PAIRS: [(&str, &str); 4] = [("u1", "u2"), ("u2", "u3"), ("u4", "u5"), ("u5", "u6")];

/// Ratings plus an item similarity table aligned with their item ids.
#[derive(Clone, Debug)]
pub struct CaseStudy {
    pub dataset: Dataset,
    pub similarity: SimilarityTable,
}

impl CaseStudy {
    pub fn builtin() -> Result<Self> {
        Self::from_strs(TOY_RATINGS_CSV, TOY_SIMILARITY_CSV)
    }

    pub fn load(ratings: &Path, similarity: &Path) -> Result<Self> {
        let read = |p: &Path| {
            std::fs::read_to_string(p).map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => {
                    Error::Config(format!("fixture {} not found", p.display()))
                }
                _ => Error::io(p, e),
            })
        };
        Self::from_strs(&read(ratings)?, &read(similarity)?)
    }

    /// `ratings` is a `user,item,rating` CSV; `similarity` is a square CSV
    /// whose header row and first column name the items.
    pub fn from_strs(ratings: &str, similarity: &str) -> Result<Self> {
        let dataset = read_ratings(
            ratings.as_bytes(),
            DatasetFormat::Csv,
            RatingScale::FIVE_STAR,
            Path::new("ratings"),
        )?;
        let (names, values) = parse_similarity(similarity)?;
        let n = dataset.items.len();
        let mut position = Vec::with_capacity(n);
        for (_, raw) in dataset.items.iter() {
            let p = names.iter().position(|s| s == raw).ok_or_else(|| {
                Error::InvalidSimilarity(format!("item {raw:?} missing from the similarity table"))
            })?;
            position.push(p);
        }
        let mut aligned = Vec::with_capacity(n * n);
        for &a in &position {
            for &b in &position {
                aligned.push(values[a * names.len() + b]);
            }
        }
        let similarity = SimilarityTable::new(n, aligned)?;
        Ok(CaseStudy {
            dataset,
            similarity,
        })
    }

    pub fn user(&self, name: &str) -> Result<UserId> {
        self.dataset.users.get(name).ok_or(Error::NotFound {
            what: "user",
            id: name.to_string(),
        })
    }

    pub fn metric(&self, mode: DistanceMode) -> Result<DenseItemMetric> {
        item_metric_from_similarity(&self.similarity, mode)
    }

    /// Every measure on the standard pairs.
    pub fn table(&self, mode: DistanceMode) -> Result<CaseTable> {
        let metric = self.metric(mode)?;
        let ctx = MeasureContext::new(&self.dataset.ratings).with_metric(&metric);
        let mut rows = Vec::new();
        for (a, b) in CASE_PAIRS {
            let (u, v) = (self.user(a)?, self.user(b)?);
            let cells = Measure::ALL
                .iter()
                .map(|m| m.score(&ctx, u, v))
                .collect::<Result<Vec<_>>>()?;
            rows.push(CaseRow {
                pair: (a.to_string(), b.to_string()),
                cells,
            });
        }
        Ok(CaseTable {
            mode,
            columns: Measure::ALL.to_vec(),
            rows,
        })
    }
}

fn parse_similarity(text: &str) -> Result<(Vec<String>, Vec<f64>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidSimilarity("empty similarity table".into()))?;
    let names: Vec<String> = header.split(',').skip(1).map(|s| s.trim().to_string()).collect();
    let n = names.len();
    let mut values = vec![f64::NAN; n * n];
    let mut seen = vec![false; n];
    for line in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let row = names.iter().position(|s| s == fields[0]).ok_or_else(|| {
            Error::InvalidSimilarity(format!("row {:?} is not a column", fields[0]))
        })?;
        if fields.len() != n + 1 {
            return Err(Error::InvalidSimilarity(format!(
                "row {:?} has {} values, expected {n}",
                fields[0],
                fields.len() - 1
            )));
        }
        for (j, f) in fields[1..].iter().enumerate() {
            values[row * n + j] = f.parse().map_err(|_| {
                Error::InvalidSimilarity(format!("bad value {f:?} in row {:?}", fields[0]))
            })?;
        }
        seen[row] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidSimilarity(format!("no row for {:?}", names[missing])));
    }
    Ok((names, values))
}

#[derive(Clone, Debug)]
pub struct CaseRow {
    pub pair: (String, String),
    pub cells: Vec<MeasureResult>,
}

/// One row per user pair, one column per measure.
#[derive(Clone, Debug)]
pub struct CaseTable {
    pub mode: DistanceMode,
    pub columns: Vec<Measure>,
    pub rows: Vec<CaseRow>,
}

impl CaseTable {
    pub fn cell(&self, a: &str, b: &str, measure: Measure) -> Option<&MeasureResult> {
        let col = self.columns.iter().position(|&m| m == measure)?;
        self.rows
            .iter()
            .find(|r| r.pair.0 == a && r.pair.1 == b)
            .map(|r| &r.cells[col])
    }

    fn header(m: Measure) -> String {
        match m.kind() {
            ScoreKind::Distance => format!("1-{}", m.key()),
            ScoreKind::Similarity => m.key().to_string(),
        }
    }

    /// Distances are shown as `1 - d`, uncomputable cells as `---`.
    fn shown(cell: &MeasureResult) -> String {
        match cell.as_similarity() {
            Some(v) => format!("{v:.4}"),
            None => "---".to_string(),
        }
    }

    pub fn render(&self) -> String {
        let mut head = vec!["pair".to_string()];
        head.extend(self.columns.iter().map(|&m| Self::header(m)));
        let mut body: Vec<Vec<String>> = Vec::new();
        for row in &self.rows {
            let mut line = vec![format!("{} & {}", row.pair.0, row.pair.1)];
            line.extend(row.cells.iter().map(Self::shown));
            body.push(line);
        }
        let widths: Vec<usize> = (0..head.len())
            .map(|c| {
                body.iter()
                    .map(|r| r[c].len())
                    .chain([head[c].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        let line = |cells: &[String], out: &mut String| {
            let padded: Vec<String> = cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect();
            let _ = writeln!(out, "{}", padded.join("  "));
        };
        line(&head, &mut out);
        for r in &body {
            line(r, &mut out);
        }
        out
    }

    /// Raw values; distances are not converted. Empty field = uncomputable.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("user_a,user_b,mode");
        for m in &self.columns {
            out.push(',');
            out.push_str(m.key());
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{},{},{}", row.pair.0, row.pair.1, self.mode);
            for c in &row.cells {
                out.push(',');
                if let Some(v) = c.value() {
                    let _ = write!(out, "{v}");
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Outcome of one expected property of the toy example.
#[derive(Clone, Debug)]
pub struct GoldenCheck {
    pub name: String,
    pub detail: String,
    pub pass: bool,
}

const GOLDEN_TOL: f64 = 1e-9;

/// The values and orderings the toy example is known to produce.
pub fn golden_checks(study: &CaseStudy) -> Result<Vec<GoldenCheck>> {
    let one_minus = study.table(DistanceMode::OneMinus)?;
    let arccos = study.table(DistanceMode::Arccos)?;
    let mut checks = Vec::new();
    let mut value = |table: &CaseTable, a: &str, b: &str, m: Measure, similarity: bool, want: f64| {
        let cell = table.cell(a, b, m).expect("measure column");
        let got = if similarity {
            cell.as_similarity()
        } else {
            cell.value()
        };
        let label = if similarity { CaseTable::header(m) } else { m.key().to_string() };
        checks.push(GoldenCheck {
            name: format!("{label}({a},{b})"),
            detail: format!("expected {want}, got {got:?}"),
            pass: got.is_some_and(|g| (g - want).abs() <= GOLDEN_TOL),
        });
    };
    for (a, b) in [("u1", "u2"), ("u2", "u3")] {
        for m in [Measure::Cos, Measure::Pcc, Measure::Msd] {
            value(&one_minus, a, b, m, true, 1.0);
        }
        for m in [Measure::Jaccard, Measure::Urp, Measure::Jmsd] {
            value(&one_minus, a, b, m, true, 0.5);
        }
    }
    for (a, b) in [("u4", "u5"), ("u5", "u6")] {
        value(&one_minus, a, b, Measure::Jaccard, true, 0.0);
        value(&one_minus, a, b, Measure::Urp, true, 0.5);
    }
    value(&one_minus, "u4", "u5", Measure::Pmd, true, 0.3);
    value(&one_minus, "u5", "u6", Measure::Pmd, true, 0.8);
    value(&one_minus, "u4", "u5", Measure::NBcf, false, 0.3);
    value(&one_minus, "u5", "u6", Measure::NBcf, false, 0.8);

    for (a, b) in [("u4", "u5"), ("u5", "u6")] {
        for m in [Measure::Cos, Measure::Pcc, Measure::Msd, Measure::Jmsd, Measure::Nhsm] {
            let cell = one_minus.cell(a, b, m).expect("measure column");
            checks.push(GoldenCheck {
                name: format!("{}({a},{b}) uncomputable", m.key()),
                detail: format!("computable = {}", cell.computable),
                pass: !cell.computable,
            });
        }
    }

    let get = |t: &CaseTable, a: &str, b: &str, m: Measure| t.cell(a, b, m).and_then(|c| c.value());
    for table in [&one_minus, &arccos] {
        let (d12, d23) = (get(table, "u1", "u2", Measure::Pmd), get(table, "u2", "u3", Measure::Pmd));
        let (d45, d56) = (get(table, "u4", "u5", Measure::Pmd), get(table, "u5", "u6", Measure::Pmd));
        checks.push(GoldenCheck {
            name: format!("pmd(u1,u2) < pmd(u2,u3) [{}]", table.mode),
            detail: format!("{d12:?} vs {d23:?}"),
            pass: matches!((d12, d23), (Some(x), Some(y)) if x < y),
        });
        checks.push(GoldenCheck {
            name: format!("pmd(u4,u5) > pmd(u5,u6) [{}]", table.mode),
            detail: format!("{d45:?} vs {d56:?}"),
            pass: matches!((d45, d56), (Some(x), Some(y)) if x > y),
        });
    }
    let (b45, b56) = (
        get(&one_minus, "u4", "u5", Measure::Bcf),
        get(&one_minus, "u5", "u6", Measure::Bcf),
    );
    checks.push(GoldenCheck {
        name: "bcf(u4,u5) > bcf(u5,u6)".into(),
        detail: format!("{b45:?} vs {b56:?}"),
        pass: matches!((b45, b56), (Some(x), Some(y)) if x > y),
    });
    Ok(checks)
}
