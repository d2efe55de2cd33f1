use nalgebra::DMatrix;

use crate::compress::pca_fit;
use crate::data::{DataMatrix, Scaler};
use crate::error::{Result, SparcaError};
use crate::horn::{horn_components, HornParams};
use crate::pipeline::DimReducer;

/// Whole-matrix PCA comparator with the component count from parallel analysis.
#[derive(Debug, Clone)]
pub struct PcaModel {
    pub scaler: Scaler,
    /// `kept x h`.
    pub loadings: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
}

impl PcaModel {
    pub fn fit(x: &DataMatrix, horn: &HornParams) -> Result<PcaModel> {
        let scaler = Scaler::fit(x)?;
        let z = scaler.apply(x)?;
        let h = horn_components(&z, horn)?;
        let pca = pca_fit(&z, h)?;
        Ok(PcaModel {
            scaler,
            loadings: pca.loadings,
            eigenvalues: pca.eigenvalues,
        })
    }
}

impl DimReducer for PcaModel {
    fn scaler(&self) -> &Scaler {
        &self.scaler
    }

    fn n_components(&self) -> usize {
        self.loadings.ncols()
    }

    fn transform_standardized(&self, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if z.ncols() != self.loadings.nrows() {
            return Err(SparcaError::DimensionMismatch {
                what: "standardized features",
                expected: self.loadings.nrows(),
                got: z.ncols(),
            });
        }
        Ok(z * &self.loadings)
    }
}
