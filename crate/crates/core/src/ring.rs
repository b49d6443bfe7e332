//! Arithmetic over Z_2^64, fixed-point encoding, and 2-out-of-2 additive sharing.
//!
//! Every secret is an element of the ring of integers modulo 2^64. Reals are
//! embedded as `round(x * 2^f)` with negatives in two's complement, so the
//! ring's wrapping addition doubles as fixed-point addition. Products carry
//! `2f` fractional bits and are brought back with [`truncate_share`].

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bit length of the ring.
pub const RING_BITS: u32 = 64;

/// An element of Z_2^64. All operations wrap.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Ring(pub u64);

impl Ring {
    pub const ZERO: Ring = Ring(0);
    pub const ONE: Ring = Ring(1);

    #[inline]
    pub fn from_i64(v: i64) -> Self {
        Ring(v as u64)
    }

    /// Centered lift into `i64` (the representative in `[-2^63, 2^63)`).
    #[inline]
    pub fn as_i64(self) -> i64 {
        self.0 as i64
    }

    #[inline]
    pub fn bit(self, i: u32) -> bool {
        (self.0 >> i) & 1 == 1
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Ring(rng.gen())
    }
}

impl fmt::Debug for Ring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ring({})", self.as_i64())
    }
}

impl fmt::Display for Ring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_i64())
    }
}

impl From<u64> for Ring {
    fn from(v: u64) -> Self {
        Ring(v)
    }
}

impl Add for Ring {
    type Output = Ring;
    #[inline]
    fn add(self, rhs: Ring) -> Ring {
        Ring(self.0.wrapping_add(rhs.0))
    }
}

impl Sub for Ring {
    type Output = Ring;
    #[inline]
    fn sub(self, rhs: Ring) -> Ring {
        Ring(self.0.wrapping_sub(rhs.0))
    }
}

impl Mul for Ring {
    type Output = Ring;
    #[inline]
    fn mul(self, rhs: Ring) -> Ring {
        Ring(self.0.wrapping_mul(rhs.0))
    }
}

impl Neg for Ring {
    type Output = Ring;
    #[inline]
    fn neg(self) -> Ring {
        Ring(self.0.wrapping_neg())
    }
}

impl AddAssign for Ring {
    #[inline]
    fn add_assign(&mut self, rhs: Ring) {
        *self = *self + rhs;
    }
}

impl SubAssign for Ring {
    #[inline]
    fn sub_assign(&mut self, rhs: Ring) {
        *self = *self - rhs;
    }
}

impl MulAssign for Ring {
    #[inline]
    fn mul_assign(&mut self, rhs: Ring) {
        *self = *self * rhs;
    }
}

impl Sum for Ring {
    fn sum<I: Iterator<Item = Ring>>(iter: I) -> Ring {
        iter.fold(Ring::ZERO, Add::add)
    }
}

impl<'a> Sum<&'a Ring> for Ring {
    fn sum<I: Iterator<Item = &'a Ring>>(iter: I) -> Ring {
        iter.copied().sum()
    }
}

/// Fixed-point parameters. The ring length is fixed at 64 bits; only the
/// number of fractional bits varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedPointConfig {
    pub frac_bits: u32,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        FixedPointConfig { frac_bits: 16 }
    }
}

impl FixedPointConfig {
    pub fn new(frac_bits: u32) -> Result<Self> {
        if frac_bits == 0 || frac_bits >= RING_BITS {
            return Err(Error::Config(format!(
                "fractional bits must lie in 1..{RING_BITS}, got {frac_bits}"
            )));
        }
        Ok(FixedPointConfig { frac_bits })
    }

    /// The reciprocal-square-root family splits exponents into quarters.
    pub fn require_rsqrt_compatible(&self) -> Result<()> {
        if self.frac_bits % 4 != 0 {
            return Err(Error::Config(format!(
                "reciprocal square root needs fractional bits divisible by 4, got {}",
                self.frac_bits
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn scale(&self) -> f64 {
        (self.frac_bits as f64).exp2()
    }

    /// Ring encoding of 1.0.
    #[inline]
    pub fn one(&self) -> Ring {
        Ring(1u64 << self.frac_bits)
    }

    pub fn encode(&self, x: f64) -> Result<Ring> {
        encode_fixed(x, *self)
    }

    pub fn decode(&self, e: Ring) -> f64 {
        decode_fixed(e, *self)
    }

    /// Encoding that panics on overflow, for compile-time-known constants.
    pub fn constant(&self, x: f64) -> Ring {
        self.encode(x).expect("constant fits the fixed-point range")
    }

    pub fn encode_vec(&self, xs: &[f64]) -> Result<Vec<Ring>> {
        xs.iter().map(|&x| self.encode(x)).collect()
    }

    pub fn decode_vec(&self, es: &[Ring]) -> Vec<f64> {
        es.iter().map(|&e| self.decode(e)).collect()
    }
}

/// `round(x * 2^f) mod 2^64`, negatives in two's complement.
pub fn encode_fixed(x: f64, cfg: FixedPointConfig) -> Result<Ring> {
    let limit_bits = RING_BITS - cfg.frac_bits - 1;
    if !x.is_finite() || x.abs() >= (limit_bits as f64).exp2() {
        return Err(Error::FixedPointOverflow { value: x, limit_bits });
    }
    let scaled = (x * cfg.scale()).round();
    Ok(Ring::from_i64(scaled as i64))
}

/// Centered lift to `(-2^63, 2^63]`, divided by `2^f`.
pub fn decode_fixed(e: Ring, cfg: FixedPointConfig) -> f64 {
    let lifted = if e.0 == 1u64 << 63 {
        (63f64).exp2()
    } else {
        e.as_i64() as f64
    };
    lifted / cfg.scale()
}

/// Which of the two computing parties holds a value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PartyId {
    P0,
    P1,
}

impl PartyId {
    #[inline]
    pub fn index(self) -> usize {
        match self {
            PartyId::P0 => 0,
            PartyId::P1 => 1,
        }
    }

    #[inline]
    pub fn other(self) -> PartyId {
        match self {
            PartyId::P0 => PartyId::P1,
            PartyId::P1 => PartyId::P0,
        }
    }
}

/// One party's additive share of a ring value (or a container of them).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Share<T = Ring> {
    pub party: PartyId,
    pub val: T,
}

/// One party's XOR share of a packed bit vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitShare {
    pub party: PartyId,
    pub bits: Vec<bool>,
}

/// Splits `x` into `(rand, x - rand)`.
pub fn share_secret(x: Ring, rand: Ring) -> (Share, Share) {
    (
        Share { party: PartyId::P0, val: rand },
        Share { party: PartyId::P1, val: x - rand },
    )
}

pub fn reconstruct(a: &Share, b: &Share) -> Result<Ring> {
    if a.party == b.party {
        return Err(Error::Protocol("reconstruction needs one share from each party".into()));
    }
    Ok(a.val + b.val)
}

/// Shares every entry of `xs` with fresh randomness from `rng`.
pub fn share_vec<R: Rng + ?Sized>(xs: &[Ring], rng: &mut R) -> (Vec<Ring>, Vec<Ring>) {
    xs.iter()
        .map(|&x| {
            let r = Ring::random(rng);
            (r, x - r)
        })
        .unzip()
}

pub fn reconstruct_vec(a: &[Ring], b: &[Ring]) -> Vec<Ring> {
    a.iter().zip(b).map(|(&x, &y)| x + y).collect()
}

pub fn share_bits(bits: &[bool], mask: &[bool]) -> (BitShare, BitShare) {
    let other = bits.iter().zip(mask).map(|(&b, &m)| b ^ m).collect();
    (
        BitShare { party: PartyId::P0, bits: mask.to_vec() },
        BitShare { party: PartyId::P1, bits: other },
    )
}

pub fn reconstruct_bits(a: &BitShare, b: &BitShare) -> Result<Vec<bool>> {
    if a.party == b.party || a.bits.len() != b.bits.len() {
        return Err(Error::Protocol("bit reconstruction needs matching shares from both parties".into()));
    }
    Ok(a.bits.iter().zip(&b.bits).map(|(&x, &y)| x ^ y).collect())
}

/// Local probabilistic truncation by `frac_bits`.
///
/// Party 0 shifts its share right; party 1 shifts the negation of its share
/// and negates back. The reconstruction is `floor(x / 2^f)` up to one unit in
/// the last place, unless the shares straddle the wrap point, which happens
/// with probability about `|x| / 2^63`.
#[inline]
pub fn truncate_share(party: PartyId, s: Ring, frac_bits: u32) -> Ring {
    match party {
        PartyId::P0 => Ring(s.0 >> frac_bits),
        PartyId::P1 => -Ring((-s).0 >> frac_bits),
    }
}

pub fn truncate_vec(party: PartyId, s: &mut [Ring], frac_bits: u32) {
    for v in s.iter_mut() {
        *v = truncate_share(party, *v, frac_bits);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn f16() -> FixedPointConfig {
        FixedPointConfig::new(16).unwrap()
    }

    #[test]
    fn encode_examples() {
        let cfg = f16();
        assert_eq!(cfg.encode(0.0).unwrap(), Ring(0));
        assert_eq!(cfg.encode(1.0).unwrap(), Ring(65536));
        // round(-1.5 * 2^16) mod 2^64, computed with i128 to stay independent of the cast path.
        let oracle = ((-98304i128).rem_euclid(1i128 << 64)) as u64;
        assert_eq!(oracle, u64::MAX - 98304 + 1);
        assert_eq!(cfg.encode(-1.5).unwrap(), Ring(oracle));
    }

    #[test]
    fn decode_examples() {
        let cfg = f16();
        assert_eq!(cfg.decode(Ring(0)), 0.0);
        assert_eq!(cfg.decode(Ring(65536)), 1.0);
        assert_eq!(cfg.decode(Ring(0u64.wrapping_sub(98304))), -1.5);
        assert_eq!(cfg.decode(Ring(1u64 << 63)), (47f64).exp2());
    }

    #[test]
    fn encode_rejects_overflow() {
        let cfg = f16();
        assert!(cfg.encode((47f64).exp2()).is_err());
        assert!(cfg.encode(-(47f64).exp2()).is_err());
        assert!(cfg.encode(f64::NAN).is_err());
        assert!(cfg.encode((46f64).exp2()).is_ok());
    }

    #[test]
    fn config_validation() {
        assert!(FixedPointConfig::new(0).is_err());
        assert!(FixedPointConfig::new(64).is_err());
        let f18 = FixedPointConfig::new(18).unwrap();
        assert!(f18.require_rsqrt_compatible().is_err());
        assert!(f16().require_rsqrt_compatible().is_ok());
    }

    #[test]
    fn share_examples() {
        let r = Ring(0xdead_beef);
        let (a, b) = share_secret(Ring(0), r);
        assert_eq!((a.val, b.val), (r, -r));
        let (a, b) = share_secret(Ring(7), Ring(3));
        assert_eq!((a.val, b.val), (Ring(3), Ring(4)));
        assert_eq!(reconstruct(&a, &b).unwrap(), Ring(7));
        assert!(reconstruct(&a, &a).is_err());
    }

    #[test]
    fn truncation_of_one() {
        let cfg = f16();
        let mut rng = StdRng::seed_from_u64(1);
        for _ in 0..1000 {
            let (a, b) = share_secret(cfg.one(), Ring::random(&mut rng));
            let t = truncate_share(PartyId::P0, a.val, 16) + truncate_share(PartyId::P1, b.val, 16);
            assert!((t.as_i64() - 1).abs() <= 1, "got {t:?}");
        }
        for _ in 0..1000 {
            let (a, b) = share_secret(Ring(0), Ring::random(&mut rng));
            let t = truncate_share(PartyId::P0, a.val, 16) + truncate_share(PartyId::P1, b.val, 16);
            assert!(t.as_i64().abs() <= 1, "got {t:?}");
        }
    }

    #[test]
    fn truncation_monte_carlo() {
        // Products of two fixed-point values in [-64, 64], truncated back.
        let cfg = f16();
        let mut rng = StdRng::seed_from_u64(2);
        let mut wraps = 0;
        let mut max_err = 0f64;
        for _ in 0..100_000 {
            let x: f64 = rng.gen_range(-64.0..64.0);
            let y: f64 = rng.gen_range(-64.0..64.0);
            let prod = cfg.encode(x).unwrap() * cfg.encode(y).unwrap();
            let (a, b) = share_secret(prod, Ring::random(&mut rng));
            let t = truncate_share(PartyId::P0, a.val, 16) + truncate_share(PartyId::P1, b.val, 16);
            let exact = (prod.as_i64() as f64 / cfg.scale()).floor();
            let diff = (t.as_i64() as f64 - exact).abs();
            if diff > 1.0 {
                wraps += 1;
            } else {
                let got = cfg.decode(t);
                let want = cfg.decode(cfg.encode(x).unwrap()) * cfg.decode(cfg.encode(y).unwrap());
                max_err = max_err.max((got - want).abs());
            }
        }
        assert_eq!(wraps, 0);
        assert!(max_err <= (-15f64).exp2(), "max error {max_err}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn share_reconstructs(x in any::<u64>(), r in any::<u64>()) {
                let (a, b) = share_secret(Ring(x), Ring(r));
                prop_assert_eq!(reconstruct(&a, &b).unwrap(), Ring(x));
            }

            #[test]
            fn encode_decode_close(x in -1.0e9f64..1.0e9) {
                let cfg = FixedPointConfig::default();
                let back = cfg.decode(cfg.encode(x).unwrap());
                prop_assert!((back - x).abs() <= (-17f64).exp2() * (1.0 + 1e-9));
            }

            #[test]
            fn local_ops_commute(x in any::<u64>(), y in any::<u64>(), c in any::<u64>(), r1 in any::<u64>(), r2 in any::<u64>()) {
                let (x0, x1) = share_secret(Ring(x), Ring(r1));
                let (y0, y1) = share_secret(Ring(y), Ring(r2));
                prop_assert_eq!((x0.val + y0.val) + (x1.val + y1.val), Ring(x) + Ring(y));
                prop_assert_eq!(x0.val * Ring(c) + x1.val * Ring(c), Ring(x) * Ring(c));
            }
        }
    }
}
