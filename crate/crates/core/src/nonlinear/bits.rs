//! Boolean machinery on XOR shares, one `u64` word per ring element: AND gates
//! from dealer triples, a Sklansky parallel-prefix adder for bit decomposition,
//! MSB, ReLU and the highest-set-bit one-hot.

use crate::dealer::{BitTriple, Record, Request};
use crate::error::{Error, Result};
use crate::protocols::{mul_elem, osm, tag};
use crate::matrix::RingMatrix;
use crate::ring::Ring;
use crate::runtime::{BitWriter, PartyCtx};

const LEVELS: u32 = 6;

/// Bits whose index has bit `l` set: the right half of every `2^(l+1)` block.
const fn right_half(l: u32) -> u64 {
    let mut m = 0u64;
    let mut i = 0;
    while i < 64 {
        if (i >> l) & 1 == 1 {
            m |= 1 << i;
        }
        i += 1;
    }
    m
}

/// Copies the top bit of each left half across the following right half.
fn spread(v: u64, l: u32) -> u64 {
    let half = 1u32 << l;
    let top_of_left = right_half(l) >> half & !right_half(l) & (right_half(l) >> 1);
    let mut s = (v & top_of_left) << 1;
    for k in 0..l {
        s |= s << (1u32 << k);
    }
    s & right_half(l)
}

/// Batched AND of XOR-shared words.
pub fn and_words(ctx: &mut PartyCtx, x: &[u64], y: &[u64]) -> Result<Vec<u64>> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("AND of {} and {} words", x.len(), y.len())));
    }
    let n = x.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let t: BitTriple = match ctx.dealer(Request::Bits { words: n })? {
        Record::Bits(t) => t,
        other => return Err(Error::TapeMismatch { expected: "bits".into(), found: other.kind().into() }),
    };
    let d: Vec<u64> = (0..n).map(|i| x[i] ^ t.a[i]).collect();
    let e: Vec<u64> = (0..n).map(|i| y[i] ^ t.b[i]).collect();
    let mut w = BitWriter::with_capacity_bits(2 * 64 * n as u64);
    w.put_u64s(&d);
    w.put_u64s(&e);
    let mut rd = ctx.exchange(tag::AND, w)?;
    let d2 = rd.get_u64s(n)?;
    let e2 = rd.get_u64s(n)?;
    rd.finish()?;
    let p0 = ctx.is_p0();
    Ok((0..n)
        .map(|i| {
            let (d, e) = (d[i] ^ d2[i], e[i] ^ e2[i]);
            let z = t.c[i] ^ (d & t.b[i]) ^ (e & t.a[i]);
            if p0 {
                z ^ (d & e)
            } else {
                z
            }
        })
        .collect())
}

/// XOR shares of the bits of the shared ring values.
pub fn bit_decompose(ctx: &mut PartyCtx, x: &[Ring]) -> Result<Vec<u64>> {
    let n = x.len();
    let mine: Vec<u64> = x.iter().map(|r| r.0).collect();
    let zero = vec![0u64; n];
    // Party 0's share is one addend, party 1's the other; each is a valid XOR
    // sharing when the other party contributes zeros.
    let (a, b) = if ctx.is_p0() { (mine.clone(), zero) } else { (zero, mine.clone()) };
    let p = mine;
    let mut g = ctx.scoped("generate", |c| and_words(c, &a, &b))?;
    let mut pp = p.clone();
    ctx.scoped("carry", |c| {
        for l in 0..LEVELS {
            let sg: Vec<u64> = g.iter().map(|&v| spread(v, l)).collect();
            let last = l + 1 == LEVELS;
            let (lhs, rhs) = if last {
                (pp.clone(), sg)
            } else {
                let sp: Vec<u64> = pp.iter().map(|&v| spread(v, l)).collect();
                ([pp.clone(), pp.clone()].concat(), [sg, sp].concat())
            };
            let z = and_words(c, &lhs, &rhs)?;
            for i in 0..n {
                g[i] ^= z[i];
                if !last {
                    // Right halves take P_i & P_j; left halves keep P_i.
                    pp[i] = (pp[i] & !right_half(l)) ^ (z[n + i] & right_half(l));
                }
            }
        }
        Ok::<_, Error>(())
    })?;
    Ok((0..n).map(|i| p[i] ^ (g[i] << 1)).collect())
}

/// Arithmetic shares of XOR-shared bits, via one OSM per bit: `s0 ⊕ s1 =
/// s0 + s1 - 2·s0·s1` with party 0 selecting on `s0` over the shared `s1`.
pub fn b2a(ctx: &mut PartyCtx, bits: &[bool]) -> Result<Vec<Ring>> {
    let n = bits.len();
    let x = if ctx.is_p0() {
        RingMatrix::zeros(n, 1)
    } else {
        RingMatrix::column(bits.iter().map(|&b| Ring(b as u64)).collect())
    };
    let sel = ctx.is_p0().then_some(bits);
    let prod = osm(ctx, sel, &x)?;
    Ok(bits.iter().zip(prod.as_slice()).map(|(&b, &z)| Ring(b as u64) - z - z).collect())
}

/// XOR shares of the sign bits.
pub fn msb(ctx: &mut PartyCtx, x: &[Ring]) -> Result<Vec<bool>> {
    Ok(bit_decompose(ctx, x)?.into_iter().map(|w| w >> 63 == 1).collect())
}

/// Arithmetic shares of `[x >= 0]` (the ReLU derivative).
pub fn drelu(ctx: &mut PartyCtx, x: &[Ring]) -> Result<Vec<Ring>> {
    let p0 = ctx.is_p0();
    let m = ctx.scoped("msb", |c| msb(c, x))?;
    let not_m: Vec<bool> = m.into_iter().map(|b| b ^ p0).collect();
    ctx.scoped("b2a", |c| b2a(c, &not_m))
}

/// ReLU together with its derivative mask.
pub fn relu_with_mask(ctx: &mut PartyCtx, x: &[Ring]) -> Result<(Vec<Ring>, Vec<Ring>)> {
    ctx.scoped("relu", |c| {
        let d = drelu(c, x)?;
        let y = c.scoped("select", |c| mul_elem(c, &d, x, false))?;
        Ok((y, d))
    })
}

pub fn relu(ctx: &mut PartyCtx, x: &[Ring]) -> Result<Vec<Ring>> {
    relu_with_mask(ctx, x).map(|(y, _)| y)
}

/// OR of XOR-shared words: `a ⊕ b ⊕ (a ∧ b)`.
fn prefix_or_low_to_high(ctx: &mut PartyCtx, v: &[u64]) -> Result<Vec<u64>> {
    let mut v = v.to_vec();
    for l in 0..LEVELS {
        let s: Vec<u64> = v.iter().map(|&x| spread(x, l)).collect();
        let both = and_words(ctx, &v, &s)?;
        for i in 0..v.len() {
            v[i] ^= s[i] ^ both[i];
        }
    }
    Ok(v)
}

/// Arithmetic shares of the one-hot vector marking the highest set bit of each
/// value: row `e` of the result has a 1 in column `k` iff bit `k` is the top set
/// bit of `x[e]`. All-zero rows mark zero inputs.
pub fn highest_one_hot(ctx: &mut PartyCtx, x: &[Ring]) -> Result<RingMatrix> {
    ctx.scoped("one-hot", |ctx| {
        let bits = ctx.scoped("bits", |c| bit_decompose(c, x))?;
        // Suffix OR: reverse, prefix OR, reverse back.
        let rev: Vec<u64> = bits.iter().map(|w| w.reverse_bits()).collect();
        let h: Vec<u64> =
            ctx.scoped("suffix-or", |c| prefix_or_low_to_high(c, &rev))?.into_iter().map(|w| w.reverse_bits()).collect();
        let y: Vec<bool> = h.iter().flat_map(|&w| (0..64).map(move |k| ((w ^ (w >> 1)) >> k) & 1 == 1)).collect();
        let a = ctx.scoped("b2a", |c| b2a(c, &y))?;
        RingMatrix::from_vec(x.len(), 64, a)
    })
}
