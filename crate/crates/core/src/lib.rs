//! Incremental fuzzy bounded twin support vector machines for data streams.
//!
//! Pairwise twin-SVM nodes over an optional random Fourier feature map,
//! composed into a decision DAG. Models grow from stream batches through
//! gradient screening and shrink by forgetting points whose multipliers stay
//! near zero.
//!
//! ```
//! use fbtsvm::{gen_blobs, train_dag, FeatureMap, Hyperparams, ScreenPolicy};
//!
//! let centers = [vec![0.0, 0.0], vec![5.0, 5.0]];
//! let train = gen_blobs::<f64>(&centers, 1.0, 50, 1).unwrap();
//! let map = FeatureMap::Linear { input_dim: 2 };
//! let model = train_dag(&train, &Hyperparams::default(), map, ScreenPolicy::Extrema).unwrap();
//! assert_eq!(model.predict(&[5.0, 5.0]).unwrap(), 2);
//! ```

// NaN must fail validation, which `!(x > 0)` expresses directly.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod binary;
pub mod dag;
pub mod data;
pub mod error;
pub mod fuzzy;
pub mod incremental;
pub mod linalg;
pub mod persistence;
pub mod rff;
pub mod scalar;
pub mod solver;

pub use binary::{train_binary, BinaryModel, Hyperparams, Side};
pub use dag::{train_dag, DagModel, DagUpdate, MetricsReport, Trace};
pub use data::{
    batches, gen_blobs, gen_hyper, gen_sea, load_csv, load_libsvm, parse_csv, parse_libsvm,
    stratified_split, BatchPlan, Dataset, LabeledPoint,
};
pub use error::{Error, Result};
pub use fuzzy::FuzzyParams;
pub use incremental::{Forgetting, ScreenPolicy};
pub use persistence::{load, save};
pub use rff::{FeatureMap, FourierMap};
pub use scalar::Real;
pub use solver::SolverConfig;

pub type DatasetF64 = Dataset<f64>;
pub type DatasetF32 = Dataset<f32>;
pub type DagModelF64 = DagModel<f64>;
pub type DagModelF32 = DagModel<f32>;
pub type BinaryModelF64 = BinaryModel<f64>;
pub type BinaryModelF32 = BinaryModel<f32>;
pub type HyperparamsF64 = Hyperparams<f64>;
pub type HyperparamsF32 = Hyperparams<f32>;
