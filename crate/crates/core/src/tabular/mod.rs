//! Mixed-type tabular data: schemas, encoding, scaling and distances.

mod dataset;
mod distance;
mod schema;
mod space;

pub use dataset::{load_dataset, read_records, Dataset, EncodedInstance};
pub use distance::{distance, pairwise_distances, DistanceMatrix, Metric};
pub use schema::{FeatureKind, FeatureSchema, FeatureSpec, RawRecord, RawValue};
pub use space::{decode, encode, ColumnRange, FeatureSpace, Scaler, INTEGRAL_TOLERANCE};
