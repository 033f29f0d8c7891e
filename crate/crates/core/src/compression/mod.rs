//! Learned compression of pooled representations: PCA projection and ITQ
//! binary codes.

pub mod code;
pub mod itq;
pub mod pca;

pub use code::BinaryCode;
pub use itq::{fit_itq, initial_rotation, ItqModel};
pub use pca::{fit_pca, PcaModel};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::pooling::PooledRepresentation;

/// Stacks representations into an `n × dim` training matrix.
pub fn stack_representations(reps: &[PooledRepresentation]) -> Result<DMatrix<f64>> {
    let Some(first) = reps.first() else {
        return Err(Error::EmptyInput("no representations to stack".into()));
    };
    let dim = first.dim();
    if let Some(r) = reps.iter().find(|r| r.dim() != dim) {
        return Err(Error::argument(format!(
            "representation {} has dimension {}, expected {dim}",
            r.image_id,
            r.dim()
        )));
    }
    Ok(DMatrix::from_row_iterator(
        reps.len(),
        dim,
        reps.iter()
            .flat_map(|r| r.vector.iter().map(|&v| f64::from(v))),
    ))
}
