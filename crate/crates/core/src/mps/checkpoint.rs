//! Versioned little-endian binary snapshot of a [`MatrixProductState`].
//!
//! Layout: magic, format version, header scalars, `L + 1` bond dimensions, then
//! every tensor's entries column by column as `(re, im)` pairs. Floats are
//! written by bit pattern so a round trip is exact.

use std::io::{Read, Write};
use std::path::Path;

use faer::Mat;

use super::{MatrixProductState, SiteTensor, TruncationPolicy};
use crate::error::{Error, Result};
use crate::linalg::C64;

pub const MAGIC: &[u8; 8] = b"KZMPSCK\0";
pub const VERSION: u32 = 1;

pub fn write<W: Write>(psi: &MatrixProductState, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    put_u64(&mut w, psi.len() as u64)?;
    put_u64(&mut w, psi.d() as u64)?;
    let center = psi.ortho_center().map_or(-1, |c| c as i64);
    w.write_all(&center.to_le_bytes())?;
    put_u64(&mut w, psi.policy.m_max as u64)?;
    for v in [
        psi.policy.weight_tol,
        psi.eps_tilde,
        psi.time,
        psi.norm_ledger,
        psi.discarded_weight,
    ] {
        put_f64(&mut w, v)?;
    }
    put_u64(&mut w, 1)?;
    for t in psi.tensors() {
        put_u64(&mut w, t.right as u64)?;
    }
    for t in psi.tensors() {
        for j in 0..t.data.ncols() {
            for i in 0..t.data.nrows() {
                let z = t.data[(i, j)];
                put_f64(&mut w, z.re)?;
                put_f64(&mut w, z.im)?;
            }
        }
    }
    Ok(())
}

pub fn read<R: Read>(mut r: R) -> Result<MatrixProductState> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not an MPS checkpoint".into()));
    }
    let mut vb = [0u8; 4];
    r.read_exact(&mut vb)?;
    let version = u32::from_le_bytes(vb);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let length = get_u64(&mut r)? as usize;
    let d = get_u64(&mut r)? as usize;
    let mut cb = [0u8; 8];
    r.read_exact(&mut cb)?;
    let center = i64::from_le_bytes(cb);
    let m_max = get_u64(&mut r)? as usize;
    let weight_tol = get_f64(&mut r)?;
    let eps_tilde = get_f64(&mut r)?;
    let time = get_f64(&mut r)?;
    let norm_ledger = get_f64(&mut r)?;
    let discarded_weight = get_f64(&mut r)?;
    if length == 0 || d == 0 || length > 1 << 20 || d > 1 << 16 {
        return Err(Error::Format(format!("implausible header L={length} d={d}")));
    }
    let dims = (0..=length)
        .map(|_| get_u64(&mut r).map(|x| x as usize))
        .collect::<Result<Vec<_>>>()?;
    if dims[0] != 1 || dims[length] != 1 || dims.iter().any(|&x| x == 0 || x > 1 << 16) {
        return Err(Error::Format(format!("bad bond dimensions {dims:?}")));
    }
    let mut tensors = Vec::with_capacity(length);
    for j in 0..length {
        let (l, rt) = (dims[j], dims[j + 1]);
        let mut data = Mat::<C64>::zeros(l * d, rt);
        for c in 0..rt {
            for i in 0..l * d {
                let re = get_f64(&mut r)?;
                let im = get_f64(&mut r)?;
                data[(i, c)] = C64::new(re, im);
            }
        }
        tensors.push(SiteTensor::from_left_grouped(data, l, d));
    }
    let center = if center < 0 { None } else { Some(center as usize) };
    let policy = TruncationPolicy { m_max, weight_tol };
    let mut psi = MatrixProductState::from_parts(tensors, center, policy)?;
    psi.eps_tilde = eps_tilde;
    psi.time = time;
    psi.norm_ledger = norm_ledger;
    psi.discarded_weight = discarded_weight;
    Ok(psi)
}

pub fn save(psi: &MatrixProductState, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write(psi, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<MatrixProductState> {
    let f = std::fs::File::open(path)?;
    read(std::io::BufReader::new(f))
}

fn put_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_bits().to_le_bytes())?;
    Ok(())
}

fn get_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_bits(get_u64(r)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut psi =
            MatrixProductState::random(6, 3, 7, TruncationPolicy::default(), &mut rng).unwrap();
        psi.eps_tilde = -0.123456789;
        psi.time = 3.25;
        psi.norm_ledger = 1.0 - 3e-13;
        psi.discarded_weight = 2.5e-11;
        let mut buf = Vec::new();
        write(&psi, &mut buf).unwrap();
        let back = read(buf.as_slice()).unwrap();
        assert_eq!(back.ortho_center(), psi.ortho_center());
        assert_eq!(back.bond_dims(), psi.bond_dims());
        assert_eq!(back.eps_tilde.to_bits(), psi.eps_tilde.to_bits());
        assert_eq!(back.norm_ledger.to_bits(), psi.norm_ledger.to_bits());
        for (a, b) in back.tensors().iter().zip(psi.tensors()) {
            assert_eq!(a, b);
        }
        let mut again = Vec::new();
        write(&back, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(read(&b"NOTACHECKPOINT.."[..]), Err(Error::Format(_))));
        let mut buf = Vec::new();
        let psi = super::super::product_state(2, 2, 0, TruncationPolicy::default()).unwrap();
        write(&psi, &mut buf).unwrap();
        buf[8] = 9;
        assert!(matches!(read(buf.as_slice()), Err(Error::Format(_))));
        let mut short = Vec::new();
        write(&psi, &mut short).unwrap();
        short.truncate(short.len() - 4);
        assert!(matches!(read(short.as_slice()), Err(Error::Io(_))));
    }
}
