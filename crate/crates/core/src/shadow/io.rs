//! Binary and JSON serialization of shadow sets.
//!
//! Layout (little endian): magic `b"ALSOSHDW"`, u32 version, u32 n, u64 T,
//! u64 seed, then T records of ⌈3n/8⌉ bytes. Qubit q occupies bits
//! 3q..3q+3 of its record, least significant first, holding the code
//! `basis << 1 | outcome`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{decode, Basis, ShadowSet};
use crate::error::{Error, Result};

pub const SHADOW_MAGIC: [u8; 8] = *b"ALSOSHDW";
pub const SHADOW_VERSION: u32 = 1;

fn record_bytes(n: usize) -> usize {
    (3 * n).div_ceil(8)
}

pub fn write_shadow_file<W: Write>(set: &ShadowSet, mut w: W) -> Result<()> {
    let n = set.n();
    w.write_all(&SHADOW_MAGIC)?;
    w.write_all(&SHADOW_VERSION.to_le_bytes())?;
    w.write_all(&(n as u32).to_le_bytes())?;
    w.write_all(&(set.len() as u64).to_le_bytes())?;
    w.write_all(&set.seed().to_le_bytes())?;
    let mut buf = vec![0u8; record_bytes(n)];
    for rec in set.records() {
        buf.fill(0);
        for (q, &code) in rec.iter().enumerate() {
            let bit = 3 * q;
            let word = (code as u16) << (bit % 8);
            buf[bit / 8] |= word as u8;
            if bit / 8 + 1 < buf.len() {
                buf[bit / 8 + 1] |= (word >> 8) as u8;
            }
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_shadow_file<R: Read>(mut r: R) -> Result<ShadowSet> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if magic != SHADOW_MAGIC {
        return Err(Error::ShadowFormat("bad magic".into()));
    }
    let mut u32buf = [0u8; 4];
    let mut u64buf = [0u8; 8];
    r.read_exact(&mut u32buf)?;
    let version = u32::from_le_bytes(u32buf);
    if version != SHADOW_VERSION {
        return Err(Error::ShadowFormat(format!("unsupported version {version}")));
    }
    r.read_exact(&mut u32buf)?;
    let n = u32::from_le_bytes(u32buf) as usize;
    r.read_exact(&mut u64buf)?;
    let t = u64::from_le_bytes(u64buf) as usize;
    r.read_exact(&mut u64buf)?;
    let seed = u64::from_le_bytes(u64buf);
    if n == 0 || t == 0 {
        return Err(Error::ShadowFormat(format!("empty set (n={n}, T={t})")));
    }
    let rb = record_bytes(n);
    let mut buf = vec![0u8; rb];
    let mut codes = Vec::with_capacity(n.saturating_mul(t).min(1 << 28));
    for j in 0..t {
        r.read_exact(&mut buf)
            .map_err(|e| Error::ShadowFormat(format!("record {j} of {t}: {e}")))?;
        for q in 0..n {
            let bit = 3 * q;
            let lo = buf[bit / 8] as u16;
            let hi = buf.get(bit / 8 + 1).copied().unwrap_or(0) as u16;
            let code = (((hi << 8 | lo) >> (bit % 8)) & 0b111) as u8;
            if code >= 6 {
                return Err(Error::ShadowFormat(format!("record {j}, qubit {q}: invalid code {code}")));
            }
            codes.push(code);
        }
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::ShadowFormat("trailing bytes after last record".into()));
    }
    ShadowSet::from_codes(n, seed, codes)
}

/// Human-readable form: one string per record, e.g. `"X1 Z0 Y0"`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShadowSetJson {
    pub n: usize,
    pub seed: u64,
    pub records: Vec<String>,
}

impl From<&ShadowSet> for ShadowSetJson {
    fn from(set: &ShadowSet) -> Self {
        let records = set
            .records()
            .map(|rec| {
                rec.iter()
                    .map(|&c| {
                        let (b, o) = decode(c);
                        format!("{:?}{}", b, o as u8)
                    })
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect();
        Self {
            n: set.n(),
            seed: set.seed(),
            records,
        }
    }
}

impl TryFrom<&ShadowSetJson> for ShadowSet {
    type Error = Error;

    fn try_from(json: &ShadowSetJson) -> Result<Self> {
        let mut codes = Vec::with_capacity(json.n * json.records.len());
        for (j, rec) in json.records.iter().enumerate() {
            let before = codes.len();
            for tok in rec.split_whitespace() {
                let basis = match &tok[..1] {
                    "Z" => Basis::Z,
                    "X" => Basis::X,
                    "Y" => Basis::Y,
                    _ => return Err(Error::ShadowFormat(format!("record {j}: bad token {tok:?}"))),
                };
                let outcome = match &tok[1..] {
                    "0" => false,
                    "1" => true,
                    _ => return Err(Error::ShadowFormat(format!("record {j}: bad token {tok:?}"))),
                };
                codes.push(super::encode(basis, outcome));
            }
            if codes.len() - before != json.n {
                return Err(Error::ShadowFormat(format!("record {j}: expected {} qubits", json.n)));
            }
        }
        ShadowSet::from_codes(json.n, json.seed, codes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::ProductState;
    use crate::shadow::sample_shadows;

    #[test]
    fn binary_round_trip() {
        for n in [1, 2, 3, 5, 8, 11] {
            let set = sample_shadows(&ProductState::zero(n), 257, n as u64).unwrap();
            let mut bytes = Vec::new();
            write_shadow_file(&set, &mut bytes).unwrap();
            assert_eq!(bytes.len(), 32 + 257 * record_bytes(n));
            assert_eq!(read_shadow_file(bytes.as_slice()).unwrap(), set);
        }
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let set = sample_shadows(&ProductState::zero(3), 10, 1).unwrap();
        let mut bytes = Vec::new();
        write_shadow_file(&set, &mut bytes).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'x';
        assert!(matches!(read_shadow_file(bad.as_slice()), Err(Error::ShadowFormat(_))));
        let truncated = &bytes[..bytes.len() - 1];
        assert!(matches!(read_shadow_file(truncated), Err(Error::ShadowFormat(_))));
        let mut trailing = bytes.clone();
        trailing.push(0);
        assert!(read_shadow_file(trailing.as_slice()).is_err());
        let mut invalid = bytes;
        invalid[32] = 0b111;
        assert!(matches!(read_shadow_file(invalid.as_slice()), Err(Error::ShadowFormat(_))));
    }

    #[test]
    fn json_round_trip() {
        let set = sample_shadows(&ProductState::zero(4), 20, 9).unwrap();
        let json = ShadowSetJson::from(&set);
        let text = serde_json::to_string(&json).unwrap();
        let back: ShadowSetJson = serde_json::from_str(&text).unwrap();
        assert_eq!(ShadowSet::try_from(&back).unwrap(), set);
    }
}
