//! `.cemb` token-embedding files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "CEMB" | version u32 = 1 | n_tokens u32 | dim u32
//! n_tokens x (len u32 | UTF-8 bytes)
//! mask: ceil(n_tokens / 8) bytes, bit i of byte i/8 (LSB first) = token i included
//! n_tokens x dim f32, row-major
//! ```
//!
//! Files are named by the lowercase hex SHA-256 of the embedded code.

use sha2::{Digest, Sha256};

use super::{Embedded, TokenEmbeddingMatrix, TokenMask};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"CEMB";
pub const VERSION: u32 = 1;
pub const EXTENSION: &str = "cemb";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CembHeader {
    pub version: u32,
    pub n_tokens: u32,
    pub dim: u32,
}

pub fn content_hash(code: &str) -> String {
    hex::encode(Sha256::digest(code.as_bytes()))
}

pub fn file_name(code: &str) -> String {
    format!("{}.{EXTENSION}", content_hash(code))
}

pub fn encode(e: &Embedded) -> Vec<u8> {
    let m = &e.matrix;
    let n = m.len();
    let mut out = Vec::with_capacity(16 + n * (8 + 4 * m.dim));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&(m.dim as u32).to_le_bytes());
    for t in &m.tokens {
        out.extend_from_slice(&(t.len() as u32).to_le_bytes());
        out.extend_from_slice(t.as_bytes());
    }
    let mut mask = vec![0u8; n.div_ceil(8)];
    for (i, keep) in e.mask.include.iter().enumerate() {
        if *keep {
            mask[i / 8] |= 1 << (i % 8);
        }
    }
    out.extend_from_slice(&mask);
    for v in &m.vectors {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|e| *e <= self.buf.len())
            .ok_or_else(|| Error::Format(format!("truncated while reading {what} at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

/// Parse and validate a `.cemb` buffer.
pub fn decode(bytes: &[u8]) -> Result<Embedded> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::Format("bad magic, expected CEMB".into()));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n = r.u32("n_tokens")? as usize;
    let dim = r.u32("dim")? as usize;
    if dim == 0 {
        return Err(Error::Format("dim must be >= 1".into()));
    }
    let mut tokens = Vec::with_capacity(n.min(1 << 16));
    for i in 0..n {
        let len = r.u32("token length")? as usize;
        let raw = r.take(len, "token bytes")?;
        let t = std::str::from_utf8(raw).map_err(|_| Error::Format(format!("token {i} is not UTF-8")))?;
        tokens.push(t.to_string());
    }
    let mask_bytes = r.take(n.div_ceil(8), "mask")?;
    let include: Vec<bool> = (0..n).map(|i| mask_bytes[i / 8] & (1 << (i % 8)) != 0).collect();
    if !n.is_multiple_of(8) && mask_bytes[n / 8] >> (n % 8) != 0 {
        return Err(Error::Format("mask padding bits must be zero".into()));
    }
    let floats = r.take(
        n.checked_mul(dim)
            .and_then(|c| c.checked_mul(4))
            .ok_or_else(|| Error::Format("matrix size overflows".into()))?,
        "vectors",
    )?;
    let vectors: Vec<f32> = floats
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(i) = vectors.iter().position(|v| !v.is_finite()) {
        return Err(Error::Format(format!("non-finite value in row {}", i / dim)));
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let matrix = TokenEmbeddingMatrix::new(tokens, vectors, dim)?;
    Embedded::new(matrix, TokenMask { include })
}

pub fn validate(bytes: &[u8]) -> Result<CembHeader> {
    let e = decode(bytes)?;
    Ok(CembHeader {
        version: VERSION,
        n_tokens: e.matrix.len() as u32,
        dim: e.matrix.dim as u32,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{EmbedderBackend, HashEmbedder};
    use proptest::prelude::*;

    fn sample() -> Embedded {
        let m = TokenEmbeddingMatrix::new(vec!["ab".into(), "(".into()], vec![1.0, -2.0, 0.5, 0.25], 2).unwrap();
        Embedded::new(m, TokenMask { include: vec![true, false] }).unwrap()
    }

    #[test]
    fn bit_exact_layout() {
        let bytes = encode(&sample());
        let mut expected = Vec::new();
        expected.extend_from_slice(b"CEMB");
        expected.extend_from_slice(&[1, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0]);
        expected.extend_from_slice(&[2, 0, 0, 0, b'a', b'b', 1, 0, 0, 0, b'(']);
        expected.push(0b0000_0001);
        for v in [1.0f32, -2.0, 0.5, 0.25] {
            expected.extend_from_slice(&v.to_le_bytes());
        }
        assert_eq!(bytes, expected);
        assert_eq!(decode(&bytes).unwrap(), sample());
        assert_eq!(validate(&bytes).unwrap(), CembHeader { version: 1, n_tokens: 2, dim: 2 });
    }

    #[test]
    fn rejects_corruption() {
        let good = encode(&sample());
        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(decode(&bad_magic).is_err());
        let mut bad_version = good.clone();
        bad_version[4] = 2;
        assert!(decode(&bad_version).is_err());
        assert!(decode(&good[..good.len() - 1]).is_err());
        let mut trailing = good.clone();
        trailing.push(0);
        assert!(decode(&trailing).is_err());
        let mut pad = good.clone();
        pad[16 + 6 + 5] |= 0b1000_0000;
        assert!(decode(&pad).is_err());
        let mut nan = good.clone();
        let l = nan.len();
        nan[l - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(decode(&nan).is_err());
    }

    #[test]
    fn file_names_are_content_hashes() {
        let name = file_name("x = 1");
        assert_eq!(name.len(), 64 + 5);
        assert!(name.ends_with(".cemb"));
        assert!(name[..64].chars().all(|c| c.is_ascii_hexdigit() && !c.is_ascii_uppercase()));
        // SHA-256 of the empty string.
        assert_eq!(
            content_hash(""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    proptest! {
        #[test]
        fn round_trips_hash_embeddings(code in "[a-z_ +()=:0-9\n]{0,60}") {
            let e = HashEmbedder { dim: 8, ..HashEmbedder::default() }.embed(&code, "python").unwrap();
            prop_assert_eq!(decode(&encode(&e)).unwrap(), e);
        }
    }
}
