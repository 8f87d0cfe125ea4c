//! User distances from rating distributions, and the neighborhood
//! recommender evaluated on them.
//!
//! A user's ratings, normalized to sum to one, form a distribution over the
//! items they rated. The preference distance between two users is the
//! earth mover's distance between their distributions under an item metric,
//! so users who like different but related items still come out close.
//!
//! ```
//! use pmd::case_study::CaseStudy;
//! use pmd::measures::{Measure, MeasureContext};
//! use pmd::metric::DistanceMode;
//!
//! let study = CaseStudy::builtin().unwrap();
//! let metric = study.metric(DistanceMode::OneMinus).unwrap();
//! let ctx = MeasureContext::new(&study.dataset.ratings).with_metric(&metric);
//! let (u5, u6) = (study.user("u5").unwrap(), study.user("u6").unwrap());
//! let d = Measure::Pmd.score(&ctx, u5, u6).unwrap();
//! assert!((d.value().unwrap() - 0.2).abs() < 1e-12);
//! ```

pub mod case_study;
pub mod datasets;
pub mod error;
pub mod evaluation;
pub mod measures;
pub mod metric;
pub mod model;
pub mod recommender;
pub mod transport;

pub use error::{Error, Result};
pub use measures::{Measure, MeasureContext, MeasureResult};
pub use metric::{DistanceMode, ItemMetric};
pub use model::{RatingScale, SparseRatings};
pub use transport::{Solver, TransportProblem};
