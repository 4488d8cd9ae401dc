//! Feature extraction from image intensity landscapes.
//!
//! An image is treated as a sampled surface `I(x, y)`. Two planar flows are
//! derived from it: the negative gradient flow, whose sinks and sources sit at
//! the minima and maxima of `I`, and the Hamiltonian flow, whose solution
//! curves follow the level sets of `I`. Lattice streamlines of the Hamiltonian
//! flow traced on a canonical (average) image become feature templates; each
//! template is scored on new images by density match, direction match, the
//! Poincaré index and a pseudo Conley index. The resulting feature columns feed
//! a discrete AdaBoost trainer, with a Haar-like feature bank for comparison.
//!
//! All numeric code is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the common double-precision instantiation.

pub mod boosting;
pub mod dataset;
mod error;
pub mod features;
pub mod haar;
pub mod landscape;
mod scalar;
pub mod streamline;
pub mod topo_index;

pub use error::{Error, Result};
pub use scalar::Real;

pub use boosting::{Confusion, RocCurve, RocPoint, StrongClassifier, Stump, TrainingReport};
pub use dataset::{Label, Manifest, ManifestEntry, PatchSampler, Split};
pub use features::{DirectionMode, FeatureBank, FeatureKind, FeatureMatrix, FeatureSource, FeatureTemplate};
pub use haar::{HaarBank, HaarFeature, HaarKind, IntegralImage};
pub use landscape::{DirectionField, ScalarField, VectorField};
pub use streamline::{LatticePoint, Orbit, StepOutcome};
pub use topo_index::{BoundaryFlow, ConleyType};

pub type ScalarField64 = ScalarField<f64>;
pub type ScalarField32 = ScalarField<f32>;
pub type VectorField64 = VectorField<f64>;
pub type VectorField32 = VectorField<f32>;
pub type DirectionField64 = DirectionField<f64>;
pub type DirectionField32 = DirectionField<f32>;
pub type FeatureBank64 = FeatureBank<f64>;
pub type FeatureMatrix64 = FeatureMatrix<f64>;
pub type StrongClassifier64 = StrongClassifier<f64>;
pub type IntegralImage64 = IntegralImage<f64>;
