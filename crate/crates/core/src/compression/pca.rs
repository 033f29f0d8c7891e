//! Principal component analysis via the SVD of the centred data matrix.

use nalgebra::{DMatrix, DVector};

use crate::binio::{put_f64s, put_u32, to_u32, Reader};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"OFPM";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct PcaModel {
    pub mean: DVector<f64>,
    /// `output_dim × input_dim`, orthonormal rows.
    pub components: DMatrix<f64>,
    /// Variance along each component, non-increasing.
    pub explained_variance: Vec<f64>,
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.components.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.components.nrows()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.input_dim() {
            return Err(Error::argument(format!(
                "vector has length {len}, model expects {}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// `components · (x − mean)`.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x.len())?;
        Ok(self
            .components
            .row_iter()
            .map(|c| {
                c.iter()
                    .zip(x.iter().zip(self.mean.iter()))
                    .map(|(&w, (&v, &m))| w * (v - m))
                    .sum()
            })
            .collect())
    }

    pub fn project_f32(&self, x: &[f32]) -> Result<Vec<f64>> {
        let x: Vec<f64> = x.iter().map(|&v| f64::from(v)).collect();
        self.project(&x)
    }

    /// Projects every row of `data`.
    pub fn project_rows(&self, data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_len(data.ncols())?;
        let mut centered = data.clone();
        for mut row in centered.row_iter_mut() {
            row -= self.mean.transpose();
        }
        Ok(centered * self.components.transpose())
    }

    /// Maps a projected vector back to input space.
    pub fn reconstruct(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.output_dim() {
            return Err(Error::argument(format!(
                "projected vector has length {}, model has {} components",
                y.len(),
                self.output_dim()
            )));
        }
        let y = DVector::from_column_slice(y);
        Ok((self.components.transpose() * y + &self.mean)
            .iter()
            .copied()
            .collect())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, VERSION);
        self.write_body(&mut out)?;
        Ok(out)
    }

    pub(crate) fn write_body(&self, out: &mut Vec<u8>) -> Result<()> {
        put_u32(out, to_u32(self.input_dim(), "input_dim")?);
        put_u32(out, to_u32(self.output_dim(), "output_dim")?);
        put_f64s(out, self.mean.as_slice());
        for row in self.components.row_iter() {
            put_f64s(out, &row.iter().copied().collect::<Vec<_>>());
        }
        put_f64s(out, &self.explained_variance);
        Ok(())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(MAGIC)?;
        r.version(VERSION)?;
        let model = Self::read_body(&mut r)?;
        r.finish()?;
        Ok(model)
    }

    pub(crate) fn read_body(r: &mut Reader<'_>) -> Result<Self> {
        let input_dim = r.u32("input_dim")? as usize;
        let at = r.pos();
        let output_dim = r.u32("output_dim")? as usize;
        if input_dim == 0 || output_dim == 0 || output_dim > input_dim {
            return Err(Error::format(
                at,
                format!("invalid PCA dimensions {input_dim} -> {output_dim}"),
            ));
        }
        r.require(
            8 * (input_dim + output_dim * input_dim + output_dim),
            "PCA model",
        )?;
        let mean = DVector::from_vec(r.f64s(input_dim, "mean")?);
        let components = DMatrix::from_row_slice(
            output_dim,
            input_dim,
            &r.f64s(output_dim * input_dim, "components")?,
        );
        let explained_variance = r.f64s(output_dim, "explained_variance")?;
        Ok(Self {
            mean,
            components,
            explained_variance,
        })
    }
}

/// Flips `v` so that its largest-magnitude entry (first on ties) is positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Gram-Schmidt of `e_0, e_1, …` against `basis` until `needed` new directions are found.
fn complete_basis(basis: &mut Vec<Vec<f64>>, dim: usize, needed: usize) {
    let mut added = 0;
    for i in 0..dim {
        if added == needed {
            break;
        }
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        // two passes keep the result orthogonal to working precision
        for _ in 0..2 {
            for b in basis.iter() {
                let dot: f64 = b.iter().zip(&v).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|x| *x /= norm);
            fix_sign(&mut v);
            basis.push(v);
            added += 1;
        }
    }
}

/// Fits a `d`-component PCA to the rows of `data`.
///
/// Directions beyond the numerical rank of the centred data are filled from
/// the standard basis orthogonalised against the earlier components, with
/// zero variance.
pub fn fit_pca(data: &DMatrix<f64>, d: usize) -> Result<PcaModel> {
    let (n, dim) = data.shape();
    if n < 2 {
        return Err(Error::argument(format!(
            "PCA needs at least 2 samples, got {n}"
        )));
    }
    if d < 1 || d > (n - 1).min(dim) {
        return Err(Error::argument(format!(
            "target dimension {d} outside [1, {}] for {n} samples of dimension {dim}",
            (n - 1).min(dim)
        )));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::argument("PCA input contains non-finite values"));
    }
    let mean = DVector::from_iterator(dim, data.column_iter().map(|c| c.sum() / n as f64));
    let mut centered = data.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }

    let svd = centered.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let sv = svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));
    let tol = sv.max() * n.max(dim) as f64 * f64::EPSILON;

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d);
    let mut variance = Vec::with_capacity(d);
    for &i in order.iter().take(d) {
        if sv[i] <= tol {
            break;
        }
        let mut v: Vec<f64> = v_t.row(i).iter().copied().collect();
        fix_sign(&mut v);
        basis.push(v);
        variance.push(sv[i] * sv[i] / (n - 1) as f64);
    }
    let missing = d - basis.len();
    if missing > 0 {
        complete_basis(&mut basis, dim, missing);
        variance.resize(d, 0.0);
    }
    let components = DMatrix::from_row_iterator(d, dim, basis.into_iter().flatten());
    Ok(PcaModel {
        mean,
        components,
        explained_variance: variance,
    })
}
