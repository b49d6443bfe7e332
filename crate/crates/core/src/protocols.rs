//! One-round primitives over additive shares: oblivious permutation (Π_OP),
//! oblivious selection-multiplication (Π_OSM), Beaver multiplication and the
//! multiplication by a diagonal known to party 0.
//!
//! Every function is called by both parties with their own share; arguments
//! that only one party knows are `Option`s that the other passes as `None`.

use crate::dealer::{OpRand, OsmRand, Record, Request, Triple};
use crate::decompose::Permutation;
use crate::error::{Error, Result};
use crate::matrix::RingMatrix;
use crate::ring::Ring;
use crate::runtime::{BitWriter, PartyCtx};

pub mod tag {
    pub const OP: u16 = 0x10;
    pub const OSM: u16 = 0x11;
    pub const PRIV_MULT: u16 = 0x12;
    pub const BEAVER: u16 = 0x13;
    pub const MAT_BEAVER: u16 = 0x14;
    pub const REVEAL: u16 = 0x15;
    pub const AND: u16 = 0x20;
}

fn missing(what: &str) -> Error {
    Error::Protocol(format!("party 0 must supply {what}"))
}

fn op_record(ctx: &mut PartyCtx, k: usize) -> Result<OpRand> {
    match ctx.dealer(Request::Op { k })? {
        Record::Op(r) => Ok(r),
        other => Err(Error::TapeMismatch { expected: "op".into(), found: other.kind().into() }),
    }
}

fn osm_record(ctx: &mut PartyCtx, n: usize) -> Result<OsmRand> {
    match ctx.dealer(Request::Osm { n })? {
        Record::Osm(r) => Ok(r),
        other => Err(Error::TapeMismatch { expected: "osm".into(), found: other.kind().into() }),
    }
}

fn triple_record(ctx: &mut PartyCtx, req: Request) -> Result<Triple> {
    match (ctx.dealer(req)?, req) {
        (Record::Beaver(t), Request::Beaver { .. })
        | (Record::PrivMult(t), Request::PrivMult { .. })
        | (Record::MatBeaver { t, .. }, Request::MatBeaver { .. }) => Ok(t),
        (other, _) => Err(Error::TapeMismatch { expected: format!("{req:?}"), found: other.kind().into() }),
    }
}

/// Π_OP on shared input: shares of `σ·X`, where party 0 holds `σ` and `x` is
/// this party's share of the `k x d` matrix `X`. Each column is an independent
/// instance; all columns travel in the same round.
pub fn op_shared(ctx: &mut PartyCtx, sigma: Option<&Permutation>, x: &RingMatrix) -> Result<RingMatrix> {
    let (k, d) = x.shape();
    let bits = Permutation::index_bits(k);
    let recs: Vec<OpRand> = (0..d).map(|_| op_record(ctx, k)).collect::<Result<_>>()?;
    let mut w = BitWriter::with_capacity_bits((k * d) as u64 * 64);
    if ctx.is_p0() {
        let sigma = sigma.ok_or_else(|| missing("the permutation"))?;
        if sigma.degree() != k {
            return Err(Error::Shape(format!("permutation of degree {} on {k} rows", sigma.degree())));
        }
        let mut deltas = Vec::with_capacity(d);
        for r in &recs {
            let pi = r.pi.as_ref().ok_or_else(|| Error::Protocol("tape lacks pi".into()))?;
            let delta = sigma.compose(&pi.inverse())?;
            for &i in delta.as_slice() {
                w.put_bits(i as u64, bits);
            }
            deltas.push(delta);
        }
        let mut rd = ctx.exchange(tag::OP, w)?;
        let mut out = RingMatrix::zeros(k, d);
        for (j, (r, delta)) in recs.iter().zip(&deltas).enumerate() {
            let dx = rd.get_rings(k)?;
            let sdx = sigma.apply(&dx)?;
            let dpu = delta.apply(&r.pi_u)?;
            let sx0 = sigma.apply(&x.col(j))?;
            out.set_col(j, &(0..k).map(|i| sdx[i] + dpu[i] + sx0[i]).collect::<Vec<_>>());
        }
        rd.finish()?;
        Ok(out)
    } else {
        for (j, r) in recs.iter().enumerate() {
            let col = x.col(j);
            for i in 0..k {
                w.put_ring(col[i] - r.u[i]);
            }
        }
        let mut rd = ctx.exchange(tag::OP, w)?;
        let mut out = RingMatrix::zeros(k, d);
        for (j, r) in recs.iter().enumerate() {
            let idx: Vec<usize> = (0..k).map(|_| rd.get_bits(bits).map(|v| v as usize)).collect::<Result<_>>()?;
            let delta = Permutation::from_vec(idx)?;
            out.set_col(j, &delta.apply(&r.pi_u)?);
        }
        rd.finish()?;
        Ok(out)
    }
}

/// Π_OP on a plaintext `X` held by party 1 (`x` is ignored for party 0 except
/// for its shape).
pub fn op_plain(ctx: &mut PartyCtx, sigma: Option<&Permutation>, x: &RingMatrix) -> Result<RingMatrix> {
    if ctx.is_p0() {
        op_shared(ctx, sigma, &RingMatrix::zeros(x.rows(), x.cols()))
    } else {
        op_shared(ctx, sigma, x)
    }
}

/// Π_OSM: shares of `s_i · X[i, j]` where party 0 holds the row selectors `s`.
/// Each entry is its own instance (one selector bit and one ring element on
/// the wire).
pub fn osm(ctx: &mut PartyCtx, s: Option<&[bool]>, x: &RingMatrix) -> Result<RingMatrix> {
    let (k, d) = x.shape();
    let n = k * d;
    let r = osm_record(ctx, n)?;
    if ctx.is_p0() {
        let s = s.ok_or_else(|| missing("the selector bits"))?;
        if s.len() != k {
            return Err(Error::Shape(format!("{} selector bits for {k} rows", s.len())));
        }
        let mut w = BitWriter::with_capacity_bits(n as u64);
        let ds: Vec<bool> = (0..n).map(|e| s[e / d] ^ r.b[e]).collect();
        w.put_bools(&ds);
        let mut rd = ctx.exchange(tag::OSM, w)?;
        let dx1 = rd.get_rings(n)?;
        rd.finish()?;
        let xs = x.as_slice();
        let out = (0..n)
            .map(|e| {
                let dx = xs[e] - r.u[e] + dx1[e];
                let sel = if s[e / d] { dx } else { Ring::ZERO };
                if ds[e] {
                    sel + r.u[e] - r.bu[e]
                } else {
                    sel + r.bu[e]
                }
            })
            .collect();
        RingMatrix::from_vec(k, d, out)
    } else {
        let mut w = BitWriter::with_capacity_bits(n as u64 * 64);
        for (e, &xe) in x.as_slice().iter().enumerate() {
            w.put_ring(xe - r.u[e]);
        }
        let mut rd = ctx.exchange(tag::OSM, w)?;
        let ds = rd.get_bools(n)?;
        rd.finish()?;
        let out = (0..n).map(|e| if ds[e] { r.u[e] - r.bu[e] } else { r.bu[e] }).collect();
        RingMatrix::from_vec(k, d, out)
    }
}

/// Keeps the first `keep` rows (known to party 0 only) and zeroes the rest.
pub fn select_prefix(ctx: &mut PartyCtx, keep: Option<usize>, x: &RingMatrix) -> Result<RingMatrix> {
    let s: Option<Vec<bool>> = keep.map(|c| (0..x.rows()).map(|i| i < c).collect());
    osm(ctx, s.as_deref(), x)
}

/// `diag(λ) · Y` with `λ` private to party 0. Party 0 masks `λ` with the
/// dealer's `a`, party 1 masks its share of `Y`; both go out in one round.
pub fn priv_mult_rows(ctx: &mut PartyCtx, lambda: Option<&[Ring]>, y: &RingMatrix) -> Result<RingMatrix> {
    let (k, d) = y.shape();
    let n = k * d;
    let t = triple_record(ctx, Request::PrivMult { n })?;
    let ys = y.as_slice();
    let mut w = BitWriter::with_capacity_bits(n as u64 * 64);
    if ctx.is_p0() {
        let lambda = lambda.ok_or_else(|| missing("the diagonal"))?;
        if lambda.len() != k {
            return Err(Error::Shape(format!("{} weights for {k} rows", lambda.len())));
        }
        let e: Vec<Ring> = (0..n).map(|i| lambda[i / d] - t.a[i]).collect();
        w.put_rings(&e);
        let mut rd = ctx.exchange(tag::PRIV_MULT, w)?;
        let f1 = rd.get_rings(n)?;
        rd.finish()?;
        let out = (0..n)
            .map(|i| {
                let f = ys[i] - t.b[i] + f1[i];
                e[i] * f + e[i] * t.b[i] + t.a[i] * f + t.c[i]
            })
            .collect();
        RingMatrix::from_vec(k, d, out)
    } else {
        for i in 0..n {
            w.put_ring(ys[i] - t.b[i]);
        }
        let mut rd = ctx.exchange(tag::PRIV_MULT, w)?;
        let e = rd.get_rings(n)?;
        rd.finish()?;
        RingMatrix::from_vec(k, d, (0..n).map(|i| e[i] * t.b[i] + t.c[i]).collect())
    }
}

/// Opens `(x - a, y - b)` for a batch and returns `(E, F)`.
fn open_pair(ctx: &mut PartyCtx, tag: u16, x: &[Ring], a: &[Ring], y: &[Ring], b: &[Ring]) -> Result<(Vec<Ring>, Vec<Ring>)> {
    let mut w = BitWriter::with_capacity_bits((x.len() + y.len()) as u64 * 64);
    let e: Vec<Ring> = x.iter().zip(a).map(|(&p, &q)| p - q).collect();
    let f: Vec<Ring> = y.iter().zip(b).map(|(&p, &q)| p - q).collect();
    w.put_rings(&e);
    w.put_rings(&f);
    let mut rd = ctx.exchange(tag, w)?;
    let e2 = rd.get_rings(x.len())?;
    let f2 = rd.get_rings(y.len())?;
    rd.finish()?;
    Ok((
        e.iter().zip(&e2).map(|(&p, &q)| p + q).collect(),
        f.iter().zip(&f2).map(|(&p, &q)| p + q).collect(),
    ))
}

/// Elementwise product of two shared vectors; truncates by `f` if asked.
pub fn mul_elem(ctx: &mut PartyCtx, x: &[Ring], y: &[Ring], truncate: bool) -> Result<Vec<Ring>> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("elementwise product of lengths {} and {}", x.len(), y.len())));
    }
    let n = x.len();
    let t = triple_record(ctx, Request::Beaver { n })?;
    let (e, f) = open_pair(ctx, tag::BEAVER, x, &t.a, y, &t.b)?;
    let p0 = ctx.is_p0();
    let mut z: Vec<Ring> = (0..n)
        .map(|i| {
            let z = t.c[i] + e[i] * t.b[i] + f[i] * t.a[i];
            if p0 {
                z + e[i] * f[i]
            } else {
                z
            }
        })
        .collect();
    if truncate {
        ctx.truncate(&mut z);
    }
    Ok(z)
}

pub fn mul_elem_matrix(ctx: &mut PartyCtx, x: &RingMatrix, y: &RingMatrix, truncate: bool) -> Result<RingMatrix> {
    x.check_same_shape(y)?;
    let z = mul_elem(ctx, x.as_slice(), y.as_slice(), truncate)?;
    RingMatrix::from_vec(x.rows(), x.cols(), z)
}

/// Shared matrix product with one matrix-shaped triple.
pub fn matmul(ctx: &mut PartyCtx, x: &RingMatrix, y: &RingMatrix, truncate: bool) -> Result<RingMatrix> {
    let (m, k) = x.shape();
    let (k2, n) = y.shape();
    if k != k2 {
        return Err(Error::Shape(format!("cannot multiply {:?} by {:?}", x.shape(), y.shape())));
    }
    let t = triple_record(ctx, Request::MatBeaver { m, k, n })?;
    let (e, f) = open_pair(ctx, tag::MAT_BEAVER, x.as_slice(), &t.a, y.as_slice(), &t.b)?;
    let e = RingMatrix::from_vec(m, k, e)?;
    let f = RingMatrix::from_vec(k, n, f)?;
    let a = RingMatrix::from_vec(m, k, t.a)?;
    let b = RingMatrix::from_vec(k, n, t.b)?;
    let mut z = RingMatrix::from_vec(m, n, t.c)?.add(&e.matmul(&b)?)?.add(&a.matmul(&f)?)?;
    if ctx.is_p0() {
        z = z.add(&e.matmul(&f)?)?;
    }
    if truncate {
        ctx.truncate(z.as_mut_slice());
    }
    Ok(z)
}

/// `s·x + (1 - s)·other` for an arithmetic-shared 0/1 selector `s` and a public
/// constant `other`: one Beaver product of `s` with `x - other`.
pub fn mux_shared_bit(ctx: &mut PartyCtx, s: &[Ring], x: &[Ring], other: Ring) -> Result<Vec<Ring>> {
    let p0 = ctx.is_p0();
    let shifted: Vec<Ring> = x.iter().map(|&v| if p0 { v - other } else { v }).collect();
    let mut z = mul_elem(ctx, s, &shifted, false)?;
    if p0 {
        for v in &mut z {
            *v += other;
        }
    }
    Ok(z)
}

/// Opens a shared vector to both parties.
pub fn reveal(ctx: &mut PartyCtx, x: &[Ring]) -> Result<Vec<Ring>> {
    let mut w = BitWriter::with_capacity_bits(x.len() as u64 * 64);
    w.put_rings(x);
    let mut rd = ctx.exchange(tag::REVEAL, w)?;
    let other = rd.get_rings(x.len())?;
    rd.finish()?;
    Ok(x.iter().zip(&other).map(|(&a, &b)| a + b).collect())
}

pub fn reveal_matrix(ctx: &mut PartyCtx, x: &RingMatrix) -> Result<RingMatrix> {
    RingMatrix::from_vec(x.rows(), x.cols(), reveal(ctx, x.as_slice())?)
}

/// Local product with a public fixed-point constant, then truncation.
pub fn scale_public(ctx: &PartyCtx, x: &[Ring], c: Ring) -> Vec<Ring> {
    let mut z: Vec<Ring> = x.iter().map(|&v| v * c).collect();
    ctx.truncate(&mut z);
    z
}

/// Adds a public constant (party 0 only).
pub fn add_public(ctx: &PartyCtx, x: &[Ring], c: Ring) -> Vec<Ring> {
    if ctx.is_p0() {
        x.iter().map(|&v| v + c).collect()
    } else {
        x.to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dealer::{Dealer, LiveSource};
    use crate::ring::{share_vec, FixedPointConfig};
    use crate::runtime::run_two_party;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use std::sync::Arc;

    fn sources(seed: u64) -> (LiveSource, LiveSource) {
        LiveSource::pair(&Arc::new(Dealer::from_seed(seed)), 0)
    }

    fn cfg() -> FixedPointConfig {
        FixedPointConfig::default()
    }

    fn shared(m: &RingMatrix, rng: &mut StdRng) -> (RingMatrix, RingMatrix) {
        let (a, b) = share_vec(m.as_slice(), rng);
        (RingMatrix::from_vec(m.rows(), m.cols(), a).unwrap(), RingMatrix::from_vec(m.rows(), m.cols(), b).unwrap())
    }

    fn col(v: &[i64]) -> RingMatrix {
        RingMatrix::column(v.iter().map(|&x| Ring::from_i64(x)).collect())
    }

    #[test]
    fn op_reversal() {
        let (mut s0, mut s1) = sources(1);
        let sigma = Permutation::from_vec(vec![3, 2, 1, 0]).unwrap();
        let x = col(&[10, 20, 30, 40]);
        let (a, b, m) = run_two_party(
            cfg(),
            &mut s0,
            &mut s1,
            |c| op_plain(c, Some(&sigma), &RingMatrix::zeros(4, 1)),
            |c| op_plain(c, None, &x),
        )
        .unwrap();
        assert_eq!(a.add(&b).unwrap(), col(&[40, 30, 20, 10]));
        assert_eq!(m.rounds, 1);
        assert_eq!(m.online_bits, 4 * 64 + 4 * 2);
        assert_eq!(m.offline_bits, 4 * 64);
    }

    #[test]
    fn op_random_shared_and_plain() {
        let mut rng = StdRng::seed_from_u64(2);
        for trial in 0..100 {
            let k = rng.gen_range(1..=64);
            let d = rng.gen_range(1..=3);
            let sigma = Permutation::random(k, &mut rng);
            let x = RingMatrix::from_fn(k, d, |_, _| Ring::random(&mut rng));
            let (x0, x1) = shared(&x, &mut rng);
            let want = sigma.apply_rows(&x).unwrap();
            let (mut s0, mut s1) = sources(trial);
            let (a, b, m) =
                run_two_party(cfg(), &mut s0, &mut s1, |c| op_shared(c, Some(&sigma), &x0), |c| op_shared(c, None, &x1))
                    .unwrap();
            assert_eq!(a.add(&b).unwrap(), want);
            let lg = Permutation::index_bits(k) as u64;
            assert_eq!(m.online_bits, (k * d) as u64 * (64 + lg));
            assert_eq!(m.rounds, 1);
            let (a, b, _) = run_two_party(
                cfg(),
                &mut s0,
                &mut s1,
                |c| op_plain(c, Some(&sigma), &RingMatrix::zeros(k, d)),
                |c| op_plain(c, None, &x),
            )
            .unwrap();
            assert_eq!(a.add(&b).unwrap(), want);
        }
    }

    #[test]
    fn op_masked_permutation_is_uniform() {
        // Fixed σ on k = 3: δσ = σπ⁻¹ should hit all 6 permutations evenly.
        let sigma = Permutation::from_vec(vec![1, 2, 0]).unwrap();
        let d = Dealer::from_seed(3);
        let mut counts = std::collections::HashMap::new();
        let trials = 6000;
        for ctr in 0..trials {
            let Record::Op(r) = d.view(crate::ring::PartyId::P0, ctr, Request::Op { k: 3 }) else { panic!() };
            let delta = sigma.compose(&r.pi.unwrap().inverse()).unwrap();
            *counts.entry(delta.as_slice().to_vec()).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 6);
        let expect = trials as f64 / 6.0;
        let chi2: f64 = counts.values().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
        // 5 degrees of freedom, p = 0.001 critical value.
        assert!(chi2 < 20.52, "chi2 = {chi2}");
    }

    #[test]
    fn osm_cases() {
        let mut rng = StdRng::seed_from_u64(4);
        let f = cfg();
        let x = RingMatrix::column(vec![f.encode(5.0).unwrap(), f.encode(5.0).unwrap()]);
        let (x0, x1) = shared(&x, &mut rng);
        let (mut s0, mut s1) = sources(4);
        let s = [false, true];
        let (a, b, m) = run_two_party(f, &mut s0, &mut s1, |c| osm(c, Some(&s), &x0), |c| osm(c, None, &x1)).unwrap();
        assert_eq!(a.add(&b).unwrap().as_slice(), &[Ring::ZERO, f.encode(5.0).unwrap()]);
        assert_eq!((m.online_bits, m.offline_bits, m.rounds), (2 * 65, 2 * 64, 1));
    }

    #[test]
    fn osm_random_batch() {
        let mut rng = StdRng::seed_from_u64(5);
        let n = 10_000;
        let x = RingMatrix::from_fn(n, 1, |_, _| Ring::random(&mut rng));
        let s: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
        let (x0, x1) = shared(&x, &mut rng);
        let (mut s0, mut s1) = sources(5);
        let (a, b, m) = run_two_party(cfg(), &mut s0, &mut s1, |c| osm(c, Some(&s), &x0), |c| osm(c, None, &x1)).unwrap();
        let got = a.add(&b).unwrap();
        for i in 0..n {
            assert_eq!(got.get(i, 0), if s[i] { x.get(i, 0) } else { Ring::ZERO });
        }
        assert_eq!(m.online_bits, n as u64 * 65);
    }

    #[test]
    fn priv_mult_exact() {
        let mut rng = StdRng::seed_from_u64(6);
        let lambda: Vec<Ring> = (0..5).map(|_| Ring::random(&mut rng)).collect();
        let y = RingMatrix::from_fn(5, 3, |_, _| Ring::random(&mut rng));
        let (y0, y1) = shared(&y, &mut rng);
        let (mut s0, mut s1) = sources(6);
        let (a, b, m) = run_two_party(
            cfg(),
            &mut s0,
            &mut s1,
            |c| priv_mult_rows(c, Some(&lambda), &y0),
            |c| priv_mult_rows(c, None, &y1),
        )
        .unwrap();
        let want = RingMatrix::from_fn(5, 3, |i, j| lambda[i] * y.get(i, j));
        assert_eq!(a.add(&b).unwrap(), want);
        assert_eq!((m.online_bits, m.offline_bits, m.rounds), (2 * 15 * 64, 15 * 64, 1));
    }

    #[test]
    fn beaver_products() {
        let mut rng = StdRng::seed_from_u64(7);
        let f = cfg();
        let x = vec![f.encode(1.5).unwrap(), Ring::ZERO];
        let y = vec![f.encode(2.0).unwrap(), f.encode(-7.25).unwrap()];
        let (x0, x1) = share_vec(&x, &mut rng);
        let (y0, y1) = share_vec(&y, &mut rng);
        let (mut s0, mut s1) = sources(7);
        let (a, b, m) =
            run_two_party(f, &mut s0, &mut s1, |c| mul_elem(c, &x0, &y0, true), |c| mul_elem(c, &x1, &y1, true)).unwrap();
        let z = f.decode_vec(&crate::ring::reconstruct_vec(&a, &b));
        assert!((z[0] - 3.0).abs() <= 2f64.powi(-16));
        assert!(z[1].abs() <= 2f64.powi(-16));
        assert_eq!(m.rounds, 1);

        let xm = RingMatrix::from_fn(4, 4, |_, _| f.encode(rng.gen_range(-4.0..4.0)).unwrap());
        let ym = RingMatrix::from_fn(4, 4, |_, _| f.encode(rng.gen_range(-4.0..4.0)).unwrap());
        let (x0, x1) = shared(&xm, &mut rng);
        let (y0, y1) = shared(&ym, &mut rng);
        let (a, b, m) =
            run_two_party(f, &mut s0, &mut s1, |c| matmul(c, &x0, &y0, true), |c| matmul(c, &x1, &y1, true)).unwrap();
        let got = a.add(&b).unwrap().map(|v| f.decode(v));
        let want = xm.map(|v| f.decode(v)).matmul(&ym.map(|v| f.decode(v))).unwrap();
        assert!(got.max_abs_diff(&want) <= 4.0 * 2f64.powi(-16));
        assert_eq!((m.rounds, m.online_bits), (1, 2 * 32 * 64));
    }

    #[test]
    fn mux() {
        let mut rng = StdRng::seed_from_u64(8);
        let n = 200;
        let s: Vec<Ring> = (0..n).map(|_| Ring(rng.gen_range(0..2))).collect();
        let x: Vec<Ring> = (0..n).map(|_| Ring::random(&mut rng)).collect();
        let other = Ring(12345);
        let (sa, sb) = share_vec(&s, &mut rng);
        let (xa, xb) = share_vec(&x, &mut rng);
        let (mut s0, mut s1) = sources(8);
        let (a, b, _) =
            run_two_party(cfg(), &mut s0, &mut s1, |c| mux_shared_bit(c, &sa, &xa, other), |c| mux_shared_bit(c, &sb, &xb, other))
                .unwrap();
        let z = crate::ring::reconstruct_vec(&a, &b);
        for i in 0..n {
            assert_eq!(z[i], if s[i] == Ring::ONE { x[i] } else { other });
        }
    }
}
