//! Bit-exact payload packing and message framing.

use crate::error::{Error, Result};
use crate::ring::Ring;

/// Bytes of framing per message: 4-byte length and 2-byte tag.
pub const FRAME_HEADER_BYTES: u64 = 6;

/// Packs values LSB-first with no padding between fields.
#[derive(Clone, Debug, Default)]
pub struct BitWriter {
    bytes: Vec<u8>,
    acc: u64,
    nacc: u32,
    bits: u64,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity_bits(bits: u64) -> Self {
        BitWriter { bytes: Vec::with_capacity(bits.div_ceil(8) as usize), ..Self::default() }
    }

    /// Appends the low `n` bits of `v` (`n <= 64`).
    pub fn put_bits(&mut self, v: u64, n: u32) {
        debug_assert!(n <= 64);
        if n == 0 {
            return;
        }
        let v = if n == 64 { v } else { v & ((1u64 << n) - 1) };
        self.bits += n as u64;
        let free = 64 - self.nacc;
        if n < free {
            self.acc |= v << self.nacc;
            self.nacc += n;
            return;
        }
        let word = self.acc | if self.nacc == 64 { 0 } else { v << self.nacc };
        self.bytes.extend_from_slice(&word.to_le_bytes());
        let used = free;
        self.nacc = n - used;
        self.acc = if used == 64 { 0 } else { v >> used };
    }

    pub fn put_ring(&mut self, r: Ring) {
        self.put_bits(r.0, 64);
    }

    pub fn put_rings(&mut self, rs: &[Ring]) {
        for &r in rs {
            self.put_ring(r);
        }
    }

    pub fn put_bool(&mut self, b: bool) {
        self.put_bits(b as u64, 1);
    }

    pub fn put_bools(&mut self, bs: &[bool]) {
        for &b in bs {
            self.put_bool(b);
        }
    }

    pub fn put_u64s(&mut self, ws: &[u64]) {
        for &w in ws {
            self.put_bits(w, 64);
        }
    }

    /// Number of payload bits written so far.
    pub fn bit_len(&self) -> u64 {
        self.bits
    }

    pub fn finish(mut self) -> Payload {
        let nbytes = self.bits.div_ceil(8) as usize;
        self.bytes.extend_from_slice(&self.acc.to_le_bytes());
        self.bytes.truncate(nbytes);
        Payload { bytes: self.bytes, bits: self.bits }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Payload {
    pub bytes: Vec<u8>,
    pub bits: u64,
}

pub struct BitReader {
    bytes: Vec<u8>,
    bits: u64,
    pos: u64,
}

impl BitReader {
    pub fn new(p: Payload) -> Self {
        BitReader { bytes: p.bytes, bits: p.bits, pos: 0 }
    }

    pub fn remaining(&self) -> u64 {
        self.bits - self.pos
    }

    pub fn get_bits(&mut self, n: u32) -> Result<u64> {
        if n == 0 {
            return Ok(0);
        }
        if self.remaining() < n as u64 {
            return Err(Error::Protocol(format!("message too short: wanted {n} more bits")));
        }
        let byte = (self.pos / 8) as usize;
        let shift = (self.pos % 8) as u32;
        let mut buf = [0u8; 16];
        let end = (byte + 9).min(self.bytes.len());
        buf[..end - byte].copy_from_slice(&self.bytes[byte..end]);
        let lo = u128::from_le_bytes(buf);
        let v = (lo >> shift) as u64;
        self.pos += n as u64;
        Ok(if n == 64 { v } else { v & ((1u64 << n) - 1) })
    }

    pub fn get_ring(&mut self) -> Result<Ring> {
        self.get_bits(64).map(Ring)
    }

    pub fn get_rings(&mut self, n: usize) -> Result<Vec<Ring>> {
        (0..n).map(|_| self.get_ring()).collect()
    }

    pub fn get_bool(&mut self) -> Result<bool> {
        self.get_bits(1).map(|b| b == 1)
    }

    pub fn get_bools(&mut self, n: usize) -> Result<Vec<bool>> {
        (0..n).map(|_| self.get_bool()).collect()
    }

    pub fn get_u64s(&mut self, n: usize) -> Result<Vec<u64>> {
        (0..n).map(|_| self.get_bits(64)).collect()
    }

    /// Errors if unread bits remain.
    pub fn finish(self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::Protocol(format!("{} trailing bits in message", self.remaining())));
        }
        Ok(())
    }
}

/// Wire form of one message: `len: u32 LE`, `tag: u16 LE`, payload bytes.
pub fn encode_frame(tag: u16, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(payload.len() + FRAME_HEADER_BYTES as usize);
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(&tag.to_le_bytes());
    out.extend_from_slice(payload);
    out
}

/// Parses one frame, returning the tag, payload and bytes consumed.
pub fn decode_frame(buf: &[u8]) -> Result<(u16, &[u8], usize)> {
    if buf.len() < FRAME_HEADER_BYTES as usize {
        return Err(Error::Format("truncated frame header".into()));
    }
    let len = u32::from_le_bytes(buf[..4].try_into().expect("4 bytes")) as usize;
    let tag = u16::from_le_bytes(buf[4..6].try_into().expect("2 bytes"));
    let end = 6 + len;
    if buf.len() < end {
        return Err(Error::Format("truncated frame payload".into()));
    }
    Ok((tag, &buf[6..end], end))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn packs_tightly() {
        let mut w = BitWriter::new();
        w.put_bits(0b101, 3);
        w.put_ring(Ring(u64::MAX - 5));
        w.put_bool(true);
        assert_eq!(w.bit_len(), 68);
        let p = w.finish();
        assert_eq!(p.bytes.len(), 9);
        let mut r = BitReader::new(p);
        assert_eq!(r.get_bits(3).unwrap(), 0b101);
        assert_eq!(r.get_ring().unwrap(), Ring(u64::MAX - 5));
        assert!(r.get_bool().unwrap());
        assert!(r.get_bool().is_err());
    }

    #[test]
    fn trailing_bits_rejected() {
        let mut w = BitWriter::new();
        w.put_bits(3, 2);
        let mut r = BitReader::new(w.finish());
        r.get_bits(1).unwrap();
        assert!(r.finish().is_err());
    }

    #[test]
    fn frame_roundtrip() {
        let f = encode_frame(7, &[1, 2, 3]);
        assert_eq!(f.len(), 9);
        let (tag, body, used) = decode_frame(&f).unwrap();
        assert_eq!((tag, body, used), (7, &[1u8, 2, 3][..], 9));
        assert!(decode_frame(&f[..5]).is_err());
        assert!(decode_frame(&f[..8]).is_err());
    }

    proptest! {
        #[test]
        fn roundtrip(fields in proptest::collection::vec((any::<u64>(), 0u32..=64), 0..50)) {
            let mut w = BitWriter::new();
            for &(v, n) in &fields {
                w.put_bits(v, n);
            }
            let total: u64 = fields.iter().map(|&(_, n)| n as u64).sum();
            prop_assert_eq!(w.bit_len(), total);
            let p = w.finish();
            prop_assert_eq!(p.bytes.len() as u64, total.div_ceil(8));
            let mut r = BitReader::new(p);
            for &(v, n) in &fields {
                let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
                prop_assert_eq!(r.get_bits(n).unwrap(), v & mask);
            }
            prop_assert!(r.finish().is_ok());
        }
    }
}
