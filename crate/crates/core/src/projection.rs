//! Linear projections and the `PRJ1` file format.
//!
//! Layout: magic `PRJ1`, `u32` d_out, `u32` d_in, `d_out * d_in` row-major
//! `f64` entries, `u32` byte length, UTF-8 provenance string. Little-endian
//! throughout.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::dataset::read_magic;
use crate::error::{Error, Result};
use crate::linalg::{matmul, Matrix};

const PRJ_MAGIC: &[u8; 4] = b"PRJ1";

/// A `d_out × d_in` linear map with `d_out <= d_in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    matrix: Matrix,
    provenance: String,
}

impl Projection {
    pub fn new(matrix: Matrix, provenance: impl Into<String>) -> Result<Self> {
        if matrix.rows() > matrix.cols() {
            return Err(Error::InvalidShape {
                rows: matrix.rows(),
                cols: matrix.cols(),
                reason: "projection may not expand dimension (d_out > d_in)",
            });
        }
        Ok(Self {
            matrix,
            provenance: provenance.into(),
        })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::new(Matrix::identity(dim)?, "identity")
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }

    pub fn d_in(&self) -> usize {
        self.matrix.cols()
    }

    pub fn d_out(&self) -> usize {
        self.matrix.rows()
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// `c · M`; cosine scores are unchanged for any `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidConfig(format!("scale factor must be positive, got {c}")));
        }
        Self::new(self.matrix.scale(c), format!("{} scaled by {c}", self.provenance))
    }

    /// The single projection equivalent to applying `self` and then `next`.
    pub fn then(&self, next: &Projection) -> Result<Self> {
        let m = matmul(&next.matrix, &self.matrix)?;
        Self::new(m, format!("{} then {}", self.provenance, next.provenance))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path.as_ref())?);
        w.write_all(PRJ_MAGIC)?;
        for n in [self.d_out(), self.d_in()] {
            let n = u32::try_from(n).map_err(|_| Error::InvalidConfig("dimension exceeds u32".into()))?;
            w.write_all(&n.to_le_bytes())?;
        }
        for x in self.matrix.as_slice() {
            w.write_all(&x.to_le_bytes())?;
        }
        let len = u32::try_from(self.provenance.len())
            .map_err(|_| Error::InvalidConfig("provenance string too long".into()))?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(self.provenance.as_bytes())?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = read_magic(path, PRJ_MAGIC)?;
        let err = |message: String| Error::Format {
            path: path.to_path_buf(),
            message,
        };
        let u32_at = |pos: usize| -> Result<u32> {
            bytes
                .get(pos..pos + 4)
                .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
                .ok_or_else(|| err(format!("truncated file at byte {pos}")))
        };
        let d_out = u32_at(4)? as usize;
        let d_in = u32_at(8)? as usize;
        let n = d_out
            .checked_mul(d_in)
            .ok_or_else(|| err("dimensions overflow".into()))?;
        let body_end = 12 + n * 8;
        let entries = bytes
            .get(12..body_end)
            .ok_or_else(|| err(format!("truncated matrix: expected {n} entries")))?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let len = u32_at(body_end)? as usize;
        let text = bytes
            .get(body_end + 4..body_end + 4 + len)
            .ok_or_else(|| err("truncated provenance string".into()))?;
        if bytes.len() != body_end + 4 + len {
            return Err(err(format!("{} trailing bytes", bytes.len() - body_end - 4 - len)));
        }
        let provenance = String::from_utf8(text.to_vec()).map_err(|_| err("provenance is not UTF-8".into()))?;
        let matrix = Matrix::new(d_out, d_in, entries).map_err(|e| err(e.to_string()))?;
        Self::new(matrix, provenance).map_err(|e| err(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_expansion() {
        assert!(Projection::new(Matrix::zeros(3, 2).unwrap(), "x").is_err());
        assert!(Projection::new(Matrix::zeros(2, 3).unwrap(), "x").is_ok());
    }

    #[test]
    fn file_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.prj");
        let proj = Projection::new(Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap(), "lda").unwrap();
        proj.save(&p).unwrap();
        let mut expected = b"PRJ1".to_vec();
        expected.extend(1u32.to_le_bytes());
        expected.extend(2u32.to_le_bytes());
        expected.extend(1.0f64.to_le_bytes());
        expected.extend(2.0f64.to_le_bytes());
        expected.extend(3u32.to_le_bytes());
        expected.extend(b"lda");
        assert_eq!(std::fs::read(&p).unwrap(), expected);
    }

    #[test]
    fn load_rejects_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.prj");
        Projection::identity(3).unwrap().save(&p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 1]).unwrap();
        assert!(Projection::load(&p).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        std::fs::write(&p, &extra).unwrap();
        assert!(Projection::load(&p).unwrap_err().to_string().contains("trailing"));
        let mut nan = bytes.clone();
        nan[12..20].copy_from_slice(&f64::NAN.to_le_bytes());
        std::fs::write(&p, &nan).unwrap();
        assert!(Projection::load(&p).is_err());
    }

    #[test]
    fn composition_and_scaling() {
        let a = Projection::new(Matrix::from_rows(&[vec![1.0, 1.0, 0.0], vec![0.0, 1.0, 1.0]]).unwrap(), "a").unwrap();
        let b = Projection::new(Matrix::from_rows(&[vec![2.0, -1.0]]).unwrap(), "b").unwrap();
        let ab = a.then(&b).unwrap();
        assert_eq!(ab.matrix().as_slice(), &[2.0, 1.0, -1.0]);
        assert_eq!(ab.provenance(), "a then b");
        assert!(a.scaled(0.0).is_err());
        assert_eq!(a.scaled(2.0).unwrap().matrix().as_slice()[1], 2.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn round_trip_bit_exact(seed in any::<u64>(), d_out in 1usize..6, extra in 0usize..4, text in ".{0,20}") {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d_in = d_out + extra;
            let data = (0..d_out * d_in).map(|_| rng.random::<f64>() * 10f64.powi(rng.random_range(-300..300))).collect();
            let proj = Projection::new(Matrix::new(d_out, d_in, data).unwrap(), text).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("m.prj");
            proj.save(&p).unwrap();
            let back = Projection::load(&p).unwrap();
            let bits = |m: &Projection| m.matrix().as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&back), bits(&proj));
            prop_assert_eq!(back.provenance(), proj.provenance());
        }
    }
}
