//! Iterative quantization: PCA to `c` dimensions followed by an orthogonal
//! rotation that minimises the distance between the rotated data and the
//! vertices of the binary hypercube.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::code::BinaryCode;
use super::pca::{fit_pca, PcaModel};
use crate::binio::{put_f64s, put_u32, to_u32, Reader};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"OFPQ";
pub const VERSION: u32 = 1;
pub const DEFAULT_ITERATIONS: usize = 50;

#[derive(Clone, Debug, PartialEq)]
pub struct ItqModel {
    pub pca: PcaModel,
    /// `bits × bits` orthogonal rotation applied to the projected row vector.
    pub rotation: DMatrix<f64>,
    /// Quantisation loss `‖B − VR‖²_F`: the initial rotation first, then one
    /// value after each rotation update.
    pub loss_trace: Vec<f64>,
}

/// Seeded Gaussian `c × c` matrix orthogonalised through its SVD (left factor).
pub fn initial_rotation(c: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(c, c, |_, _| StandardNormal.sample(&mut rng));
    g.svd(true, false)
        .u
        .expect("left singular vectors requested")
}

fn sign_matrix(z: &DMatrix<f64>) -> DMatrix<f64> {
    z.map(|v| if v >= 0.0 { 1.0 } else { -1.0 })
}

fn quantization_loss(b: &DMatrix<f64>, z: &DMatrix<f64>) -> f64 {
    (b - z).norm_squared()
}

/// Fits an ITQ model with `bits` output bits on the rows of `data`.
pub fn fit_itq(data: &DMatrix<f64>, bits: usize, iterations: usize, seed: u64) -> Result<ItqModel> {
    let n = data.nrows();
    if bits < 1 || bits >= n {
        return Err(Error::argument(format!(
            "ITQ needs 1 <= bits < samples, got {bits} bits for {n} samples"
        )));
    }
    let pca = fit_pca(data, bits)?;
    let v = pca.project_rows(data)?;
    let mut rotation = initial_rotation(bits, seed);
    let mut b = sign_matrix(&(&v * &rotation));
    let mut loss_trace = Vec::with_capacity(iterations + 1);
    loss_trace.push(quantization_loss(&b, &(&v * &rotation)));
    for _ in 0..iterations {
        // orthogonal Procrustes: BᵀV = S Ω Ŝᵀ, R = Ŝ Sᵀ
        let svd = (b.transpose() * &v).svd(true, true);
        let s = svd.u.expect("u requested");
        let s_hat_t = svd.v_t.expect("v_t requested");
        rotation = s_hat_t.transpose() * s.transpose();
        let z = &v * &rotation;
        loss_trace.push(quantization_loss(&b, &z));
        b = sign_matrix(&z);
    }
    Ok(ItqModel {
        pca,
        rotation,
        loss_trace,
    })
}

impl ItqModel {
    pub fn bits(&self) -> usize {
        self.rotation.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.pca.input_dim()
    }

    /// `pca_project(x) · R`, the real-valued vector whose signs form the code.
    pub fn project_rotated(&self, x: &[f64]) -> Result<Vec<f64>> {
        let v = self.pca.project(x)?;
        Ok((0..self.bits())
            .map(|j| {
                v.iter()
                    .enumerate()
                    .map(|(i, vi)| vi * self.rotation[(i, j)])
                    .sum()
            })
            .collect())
    }

    /// Bit `j` is set iff the `j`-th rotated coordinate is `>= 0`.
    pub fn encode(&self, x: &[f64]) -> Result<BinaryCode> {
        let z = self.project_rotated(x)?;
        BinaryCode::from_bits(&z.iter().map(|&v| v >= 0.0).collect::<Vec<_>>())
    }

    pub fn encode_f32(&self, x: &[f32]) -> Result<BinaryCode> {
        let x: Vec<f64> = x.iter().map(|&v| f64::from(v)).collect();
        self.encode(&x)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, VERSION);
        self.pca.write_body(&mut out)?;
        put_u32(&mut out, to_u32(self.bits(), "bits")?);
        for row in self.rotation.row_iter() {
            put_f64s(&mut out, &row.iter().copied().collect::<Vec<_>>());
        }
        put_u32(
            &mut out,
            to_u32(self.loss_trace.len(), "loss trace length")?,
        );
        put_f64s(&mut out, &self.loss_trace);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(MAGIC)?;
        r.version(VERSION)?;
        let pca = PcaModel::read_body(&mut r)?;
        let at = r.pos();
        let bits = r.u32("bits")? as usize;
        if bits != pca.output_dim() {
            return Err(Error::format(
                at,
                format!(
                    "bit count {bits} differs from PCA output dimension {}",
                    pca.output_dim()
                ),
            ));
        }
        r.require(8 * bits * bits, "rotation")?;
        let rotation = DMatrix::from_row_slice(bits, bits, &r.f64s(bits * bits, "rotation")?);
        let len = r.u32("loss trace length")? as usize;
        r.require(8 * len, "loss trace")?;
        let loss_trace = r.f64s(len, "loss trace")?;
        r.finish()?;
        Ok(Self {
            pca,
            rotation,
            loss_trace,
        })
    }
}
