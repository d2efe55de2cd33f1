//! Sparse compressed agglomeration (SparCA).
//!
//! Features are grouped by Ward agglomerative clustering, each group is
//! compressed with PCA (component count from Horn's parallel analysis) and
//! every component is approximated by orthogonal matching pursuit using as
//! few of the group's own features as needed to recover a fixed share of its
//! variance. The result is a sparse linear map whose columns draw on
//! disjoint feature groups.
//!
//! ```no_run
//! use sparca::{data::load_csv, horn::HornParams, pipeline};
//!
//! let (x, _) = load_csv("data.csv", true, None).unwrap();
//! let model = pipeline::fit(&x, 8, 0.95, HornParams::default()).unwrap();
//! let reduced = model.transform(&x).unwrap();
//! println!("{} -> {} features", x.n_features(), reduced.values.ncols());
//! ```

pub mod cfselect;
pub mod compress;
pub mod data;
pub mod error;
pub mod evalkit;
pub mod horn;
pub mod omp;
pub mod pipeline;
pub mod rng;
pub mod ward;

/// Matrix types used throughout the public API.
pub use nalgebra;

pub use data::{DataMatrix, LabelVector, Scaler};
pub use error::{Result, SparcaError};
pub use horn::HornParams;
pub use pipeline::{fit, DimReducer, ReducedMatrix, SparcaModel, SparseComponent};
