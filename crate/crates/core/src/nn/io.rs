//! Binary parameter files.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic   b"DOGEMLP1"
//! u32     number of layer dims
//! u64     each layer dim
//! f64     parameters, layer by layer: weight (row-major, in × out) then bias
//! ```

use std::fs;
use std::path::Path;

use super::matrix::Matrix;
use super::mlp::{Dense, Mlp};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"DOGEMLP1";

pub fn encode(model: &Mlp) -> Vec<u8> {
    let dims = model.layer_dims();
    let mut out = Vec::with_capacity(12 + 8 * dims.len() + 8 * model.num_params());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for &d in dims {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for p in model.flat_params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Mlp> {
    let mut cursor = bytes;
    let mut take = |n: usize| -> Result<&[u8]> {
        if cursor.len() < n {
            return Err(Error::Format("truncated parameter file".into()));
        }
        let (head, tail) = cursor.split_at(n);
        cursor = tail;
        Ok(head)
    };
    if take(8)? != MAGIC {
        return Err(Error::Format("bad parameter file magic".into()));
    }
    let n_dims = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
    if !(2..=64).contains(&n_dims) {
        return Err(Error::Format(format!("implausible layer count {n_dims}")));
    }
    let mut dims = Vec::with_capacity(n_dims);
    for _ in 0..n_dims {
        dims.push(u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize);
    }
    let mut layers = Vec::with_capacity(n_dims - 1);
    for w in dims.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let mut read = |n: usize| -> Result<Vec<f64>> {
            let raw = take(n.checked_mul(8).ok_or_else(|| Error::Format("overflow".into()))?)?;
            Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
        };
        let weight = Matrix::from_vec(fan_in, fan_out, read(fan_in * fan_out)?)?;
        let bias = Matrix::from_vec(1, fan_out, read(fan_out)?)?;
        layers.push(Dense { weight, bias });
    }
    if !cursor.is_empty() {
        return Err(Error::Format("trailing bytes after parameters".into()));
    }
    Mlp::from_layers(layers)
}

pub fn save(model: &Mlp, path: &Path) -> Result<()> {
    fs::write(path, encode(model))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Mlp> {
    decode(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    proptest! {
        #[test]
        fn round_trip_is_exact(seed in any::<u64>(), hidden in 1usize..12, depth in 0usize..3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut dims = vec![3];
            dims.extend(std::iter::repeat_n(hidden, depth));
            dims.push(2);
            let model = Mlp::new(&dims, &mut rng).unwrap();
            let back = decode(&encode(&model)).unwrap();
            prop_assert_eq!(back, model);
        }
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let model = Mlp::zeros(&[2, 3, 1]).unwrap();
        let bytes = encode(&model);
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        let mut long = bytes;
        long.push(0);
        assert!(decode(&long).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.bin");
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let model = Mlp::new(&[4, 8, 1], &mut rng).unwrap();
        save(&model, &path).unwrap();
        assert_eq!(load(&path).unwrap(), model);
    }
}
