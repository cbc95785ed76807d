//! `ADVT` named-tensor container.
//!
//! ```text
//! "ADVT" | u32 version = 1 | u32 count
//! per tensor: u16 name_len | name (UTF-8) | u8 ndim | u32 dims[ndim] | u8 dtype (0 = f32) | f32 payload
//! ```
//!
//! All integers and floats are little-endian. Weights, PPGs (`"ppg"`,
//! `[frames, dim]`) and phoneme sequences (`"phoneme_ids"`, 1-D) share the
//! format.

use std::collections::HashSet;
use std::path::Path;

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::text2ppg::{PhonemeSequence, Ppg};
use crate::weights::{Provenance, WeightStore};

pub const MAGIC: [u8; 4] = *b"ADVT";
pub const VERSION: u32 = 1;
pub const DTYPE_F32: u8 = 0;
pub const PPG_NAME: &str = "ppg";
pub const PHONEME_NAME: &str = "phoneme_ids";

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| {
            Error::Truncated(format!(
                "{what}: need {n} bytes at offset {}, file has {}",
                self.pos,
                self.bytes.len()
            ))
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

/// Parses a whole container. Trailing bytes are an error.
pub fn decode_tensors(bytes: &[u8]) -> Result<Vec<(String, Tensor)>> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4, "magic").map_err(|_| Error::BadMagic {
        expected: MAGIC,
        found: bytes.iter().take(4).copied().collect(),
    })?;
    if magic != MAGIC {
        return Err(Error::BadMagic {
            expected: MAGIC,
            found: magic.to_vec(),
        });
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let count = r.u32("tensor count")? as usize;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for i in 0..count {
        let name_len = r.u16("name length")? as usize;
        let name = std::str::from_utf8(r.take(name_len, "name")?)
            .map_err(|_| Error::Malformed(format!("tensor {i} name is not UTF-8")))?
            .to_string();
        if !seen.insert(name.clone()) {
            return Err(Error::DuplicateName(name));
        }
        let ndim = r.u8("ndim")? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.u32("dims")? as usize);
        }
        let dtype = r.u8("dtype")?;
        if dtype != DTYPE_F32 {
            return Err(Error::Malformed(format!("tensor {name:?} has unknown dtype {dtype}")));
        }
        let numel = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::Malformed(format!("tensor {name:?} shape {shape:?} overflows")))?;
        let payload = r.take(numel, &format!("payload of {name:?}"))?;
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let t = Tensor::new(shape, data).map_err(|e| Error::Malformed(format!("tensor {name:?}: {e}")))?;
        out.push((name, t));
    }
    if r.pos != bytes.len() {
        return Err(Error::Malformed(format!(
            "{} trailing bytes after {count} tensors",
            bytes.len() - r.pos
        )));
    }
    Ok(out)
}

pub fn encode_tensors<'a>(tensors: impl IntoIterator<Item = (&'a str, &'a Tensor)>) -> Result<Vec<u8>> {
    let tensors: Vec<_> = tensors.into_iter().collect();
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let count = u32::try_from(tensors.len()).map_err(|_| Error::Malformed("too many tensors".into()))?;
    out.extend_from_slice(&count.to_le_bytes());
    let mut seen = HashSet::new();
    for (name, t) in tensors {
        if !seen.insert(name) {
            return Err(Error::DuplicateName(name.to_string()));
        }
        let name_len = u16::try_from(name.len()).map_err(|_| Error::Malformed(format!("name {name:?} too long")))?;
        out.extend_from_slice(&name_len.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        let ndim = u8::try_from(t.ndim()).map_err(|_| Error::Malformed(format!("{name:?} has too many dims")))?;
        out.push(ndim);
        for &d in t.shape() {
            let d = u32::try_from(d).map_err(|_| Error::Malformed(format!("{name:?} dim {d} too large")))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        out.push(DTYPE_F32);
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn read_tensors(path: impl AsRef<Path>) -> Result<Vec<(String, Tensor)>> {
    decode_tensors(&std::fs::read(path)?)
}

pub fn write_tensors<'a>(
    path: impl AsRef<Path>,
    tensors: impl IntoIterator<Item = (&'a str, &'a Tensor)>,
) -> Result<()> {
    Ok(std::fs::write(path, encode_tensors(tensors)?)?)
}

pub fn save_weights(store: &WeightStore, path: impl AsRef<Path>) -> Result<()> {
    write_tensors(path, store.iter())
}

/// Decodes a weight container and, when a config is given, checks that every
/// required tensor is present with the right shape.
pub fn store_from_bytes(bytes: &[u8], cfg: Option<&ModelConfig>, provenance: Provenance) -> Result<WeightStore> {
    let mut store = WeightStore::new(provenance);
    for (name, t) in decode_tensors(bytes)? {
        if !t.all_finite() {
            return Err(Error::Malformed(format!("tensor {name:?} holds non-finite values")));
        }
        store.insert(name, t)?;
    }
    if let Some(cfg) = cfg {
        store.validate(cfg)?;
    }
    Ok(store)
}

pub fn load_weights(path: impl AsRef<Path>, cfg: Option<&ModelConfig>) -> Result<WeightStore> {
    let path = path.as_ref();
    store_from_bytes(&std::fs::read(path)?, cfg, Provenance::File(path.to_path_buf()))
}

fn single(tensors: Vec<(String, Tensor)>, name: &str) -> Result<Tensor> {
    tensors
        .into_iter()
        .find(|(n, _)| n == name)
        .map(|(_, t)| t)
        .ok_or_else(|| Error::MissingTensor(name.to_string()))
}

pub fn decode_ppg(bytes: &[u8]) -> Result<Ppg> {
    Ppg::new(single(decode_tensors(bytes)?, PPG_NAME)?)
}

pub fn decode_phonemes(bytes: &[u8], vocab_size: usize) -> Result<PhonemeSequence> {
    PhonemeSequence::from_tensor(&single(decode_tensors(bytes)?, PHONEME_NAME)?, vocab_size)
}

pub fn read_ppg(path: impl AsRef<Path>) -> Result<Ppg> {
    decode_ppg(&std::fs::read(path)?)
}

pub fn write_ppg(ppg: &Ppg, path: impl AsRef<Path>) -> Result<()> {
    write_tensors(path, [(PPG_NAME, ppg.frames())])
}

pub fn read_phonemes(path: impl AsRef<Path>, vocab_size: usize) -> Result<PhonemeSequence> {
    decode_phonemes(&std::fs::read(path)?, vocab_size)
}

pub fn write_phonemes(seq: &PhonemeSequence, path: impl AsRef<Path>) -> Result<()> {
    write_tensors(path, [(PHONEME_NAME, &seq.to_tensor())])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two() -> Vec<(String, Tensor)> {
        vec![
            ("b".into(), Tensor::new(vec![2], vec![1.5, -0.0]).unwrap()),
            (
                "a".into(),
                Tensor::new(vec![1, 2, 1], vec![f32::MIN_POSITIVE, 3.0]).unwrap(),
            ),
        ]
    }

    fn encode(t: &[(String, Tensor)]) -> Vec<u8> {
        encode_tensors(t.iter().map(|(n, t)| (n.as_str(), t))).unwrap()
    }

    #[test]
    fn layout_is_exact() {
        let bytes = encode(&two()[..1]);
        let mut want = b"ADVT".to_vec();
        want.extend([1, 0, 0, 0, 1, 0, 0, 0, 1, 0, b'b', 1, 2, 0, 0, 0, 0]);
        want.extend(1.5f32.to_le_bytes());
        want.extend((-0.0f32).to_le_bytes());
        assert_eq!(bytes, want);
    }

    #[test]
    fn round_trip_keeps_order_and_bits() {
        let t = two();
        let back = decode_tensors(&encode(&t)).unwrap();
        assert_eq!(back.len(), 2);
        for ((n0, t0), (n1, t1)) in t.iter().zip(&back) {
            assert_eq!(n0, n1);
            assert_eq!(t0.shape(), t1.shape());
            let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(t0), bits(t1));
        }
        assert_eq!(encode(&back), encode(&t));
    }

    #[test]
    fn rejects_corruption() {
        let good = encode(&two());
        let mut bad = good.clone();
        bad[0] = b'X';
        assert_eq!(decode_tensors(&bad).unwrap_err().code(), "bad_magic");
        assert_eq!(decode_tensors(b"AD").unwrap_err().code(), "bad_magic");
        let mut bad = good.clone();
        bad[4] = 2;
        assert_eq!(decode_tensors(&bad).unwrap_err().code(), "unsupported_version");
        for cut in [8, 11, 20, good.len() - 1] {
            assert_eq!(
                decode_tensors(&good[..cut]).unwrap_err().code(),
                "truncated",
                "cut {cut}"
            );
        }
        let mut bad = good.clone();
        bad.push(0);
        assert_eq!(decode_tensors(&bad).unwrap_err().code(), "malformed");
        let dup = [two()[0].clone(), two()[0].clone()];
        assert_eq!(
            encode_tensors(dup.iter().map(|(n, t)| (n.as_str(), t)))
                .unwrap_err()
                .code(),
            "duplicate_name"
        );
        let mut bad = good.clone();
        let second_name = good.len() - (2 + 1 + 1 + 12 + 1 + 8) + 2;
        bad[second_name] = b'b';
        assert_eq!(decode_tensors(&bad).unwrap_err().code(), "duplicate_name");
    }

    #[test]
    fn huge_dims_do_not_allocate() {
        let mut bytes = b"ADVT".to_vec();
        bytes.extend([1, 0, 0, 0, 1, 0, 0, 0, 1, 0, b'x', 3]);
        for _ in 0..3 {
            bytes.extend(u32::MAX.to_le_bytes());
        }
        bytes.push(0);
        assert!(decode_tensors(&bytes).is_err());
    }

    #[test]
    fn named_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.advt");
        let seq = PhonemeSequence::new(vec![3, 0, 7], 10).unwrap();
        write_phonemes(&seq, &p).unwrap();
        assert_eq!(read_phonemes(&p, 10).unwrap(), seq);
        assert!(read_phonemes(&p, 5).is_err());
        assert_eq!(read_ppg(&p).unwrap_err().code(), "missing_tensor");
        let ppg = Ppg::new(Tensor::new(vec![2, 3], vec![0.5; 6]).unwrap()).unwrap();
        write_ppg(&ppg, &p).unwrap();
        assert_eq!(read_ppg(&p).unwrap(), ppg);
    }
}
