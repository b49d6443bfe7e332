use aes::cipher::{Array, BlockCipherEncrypt, KeyInit};
use aes::Aes128;
use rand_core::{impls, RngCore};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PrfKey(pub [u8; 16]);

/// AES-128 in counter mode. Block `j` of the stream for `(tag, ctr)` is
/// `AES_k(tag ‖ ctr ‖ j)`.
pub struct PrfStream {
    cipher: Aes128,
    prefix: [u8; 12],
    block: u32,
    buf: [u64; 2],
    pos: usize,
}

impl PrfStream {
    pub fn new(key: &PrfKey, tag: u32, ctr: u64) -> Self {
        let mut prefix = [0u8; 12];
        prefix[..4].copy_from_slice(&tag.to_le_bytes());
        prefix[4..].copy_from_slice(&ctr.to_le_bytes());
        PrfStream { cipher: Aes128::new(&Array::from(key.0)), prefix, block: 0, buf: [0; 2], pos: 2 }
    }

    fn refill(&mut self) {
        let mut input = [0u8; 16];
        input[..12].copy_from_slice(&self.prefix);
        input[12..].copy_from_slice(&self.block.to_le_bytes());
        self.block = self.block.checked_add(1).expect("PRF stream exhausted");
        let mut block = Array::from(input);
        self.cipher.encrypt_block(&mut block);
        let out: [u8; 16] = block.into();
        self.buf = [
            u64::from_le_bytes(out[..8].try_into().expect("8 bytes")),
            u64::from_le_bytes(out[8..].try_into().expect("8 bytes")),
        ];
        self.pos = 0;
    }
}

impl RngCore for PrfStream {
    fn next_u32(&mut self) -> u32 {
        self.next_u64() as u32
    }

    fn next_u64(&mut self) -> u64 {
        if self.pos == 2 {
            self.refill();
        }
        self.pos += 1;
        self.buf[self.pos - 1]
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        impls::fill_bytes_via_next(self, dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand_core::Error> {
        self.fill_bytes(dest);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aes_known_answer() {
        // FIPS-197 appendix C.1.
        let key = Array::from([0u8, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15]);
        let mut block = Array::from([0x00u8, 0x11, 0x22, 0x33, 0x44, 0x55, 0x66, 0x77, 0x88, 0x99, 0xaa, 0xbb, 0xcc, 0xdd, 0xee, 0xff]);
        Aes128::new(&key).encrypt_block(&mut block);
        let out: [u8; 16] = block.into();
        assert_eq!(out, [0x69, 0xc4, 0xe0, 0xd8, 0x6a, 0x7b, 0x04, 0x30, 0xd8, 0xcd, 0xb7, 0x80, 0x70, 0xb4, 0xc5, 0x5a]);
    }

    #[test]
    fn streams_are_separated() {
        let k = PrfKey([7; 16]);
        let a: Vec<u64> = (0..5).map({
            let mut s = PrfStream::new(&k, 1, 0);
            move |_| s.next_u64()
        }).collect();
        let mut again = PrfStream::new(&k, 1, 0);
        assert!(a.iter().all(|&x| x == again.next_u64()));
        assert_ne!(PrfStream::new(&k, 2, 0).next_u64(), a[0]);
        assert_ne!(PrfStream::new(&k, 1, 1).next_u64(), a[0]);
    }
}
