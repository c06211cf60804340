//! Network checkpoint file format.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic   5 bytes  "SCTL1"
//! flags   u8       bit 0: Adam state appended
//! n       u32      number of layer sizes
//! sizes   n × u32
//! params  f64 …    per layer: weight matrix (column-major), then bias
//! adam    (when flagged) step u64, lr/beta1/beta2/eps f64, then first- and
//!         second-moment arrays in the same layout as params
//! ```
//!
//! Round-trips are bit-exact.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::adam::AdamState;
use super::mlp::Mlp;
use crate::error::{Result, SctlError};

pub const CHECKPOINT_MAGIC: &[u8; 5] = b"SCTL1";

fn write_f64s(w: &mut impl Write, values: impl Iterator<Item = f64>) -> std::io::Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn param_iter<'a>(
    weights: &'a [DMatrix<f64>],
    biases: &'a [DVector<f64>],
) -> impl Iterator<Item = f64> + 'a {
    weights
        .iter()
        .zip(biases)
        .flat_map(|(w, b)| w.as_slice().iter().chain(b.as_slice()).copied())
}

pub fn write_mlp(w: &mut impl Write, net: &Mlp, adam: Option<&AdamState>) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&[adam.is_some() as u8])?;
    w.write_all(&(net.sizes().len() as u32).to_le_bytes())?;
    for s in net.sizes() {
        w.write_all(&(*s as u32).to_le_bytes())?;
    }
    write_f64s(w, param_iter(&net.weights, &net.biases))?;
    if let Some(st) = adam {
        w.write_all(&st.step.to_le_bytes())?;
        write_f64s(w, [st.lr, st.beta1, st.beta2, st.eps].into_iter())?;
        write_f64s(w, param_iter(&st.m_w, &st.m_b))?;
        write_f64s(w, param_iter(&st.v_w, &st.v_b))?;
    }
    Ok(())
}

fn read_exact_f64(r: &mut impl Read) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

fn fill_params(
    r: &mut impl Read,
    weights: &mut [DMatrix<f64>],
    biases: &mut [DVector<f64>],
) -> Result<()> {
    for (w, b) in weights.iter_mut().zip(biases.iter_mut()) {
        for v in w.as_mut_slice() {
            *v = read_exact_f64(r)?;
        }
        for v in b.as_mut_slice() {
            *v = read_exact_f64(r)?;
        }
    }
    Ok(())
}

pub fn read_mlp(r: &mut impl Read) -> Result<(Mlp, Option<AdamState>)> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(SctlError::Usage(format!(
            "not a checkpoint file (magic {:?})",
            magic
        )));
    }
    let mut flags = [0u8; 1];
    r.read_exact(&mut flags)?;
    let mut nbuf = [0u8; 4];
    r.read_exact(&mut nbuf)?;
    let n = u32::from_le_bytes(nbuf) as usize;
    if !(2..=64).contains(&n) {
        return Err(SctlError::Usage(format!("implausible layer count {n} in checkpoint")));
    }
    let mut sizes = Vec::with_capacity(n);
    for _ in 0..n {
        r.read_exact(&mut nbuf)?;
        sizes.push(u32::from_le_bytes(nbuf) as usize);
    }
    let mut net = Mlp::zeros(&sizes);
    fill_params(r, &mut net.weights, &mut net.biases)?;
    let adam = if flags[0] & 1 != 0 {
        let mut sbuf = [0u8; 8];
        r.read_exact(&mut sbuf)?;
        let mut st = AdamState::new(&net, 0.0);
        st.step = u64::from_le_bytes(sbuf);
        st.lr = read_exact_f64(r)?;
        st.beta1 = read_exact_f64(r)?;
        st.beta2 = read_exact_f64(r)?;
        st.eps = read_exact_f64(r)?;
        fill_params(r, &mut st.m_w, &mut st.m_b)?;
        fill_params(r, &mut st.v_w, &mut st.v_b)?;
        Some(st)
    } else {
        None
    };
    Ok((net, adam))
}

pub fn save_mlp(path: &Path, net: &Mlp, adam: Option<&AdamState>) -> Result<()> {
    let mut buf = Vec::new();
    write_mlp(&mut buf, net, adam)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_mlp(path: &Path) -> Result<(Mlp, Option<AdamState>)> {
    let data = std::fs::read(path)?;
    read_mlp(&mut data.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn bad_magic_rejected() {
        let data = b"NOPE!xxxxxxxxxxx";
        assert!(read_mlp(&mut data.as_slice()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn roundtrip_is_bit_exact(seed in any::<u64>(), with_adam in any::<bool>(), h in 1usize..6) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let net = Mlp::new(&[3, h, 2], &mut rng);
            let adam = with_adam.then(|| {
                let mut st = AdamState::new(&net, 1e-4);
                st.step = seed % 1000;
                st
            });
            let mut buf = Vec::new();
            write_mlp(&mut buf, &net, adam.as_ref()).unwrap();
            let (back, adam_back) = read_mlp(&mut buf.as_slice()).unwrap();
            prop_assert_eq!(net, back);
            prop_assert_eq!(adam, adam_back);
        }
    }
}
