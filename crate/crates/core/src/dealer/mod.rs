//! Offline phase. The dealer expands two PRF keys at a counter into correlated
//! randomness; party 0's part comes from `key0` alone and party 1 receives the
//! single correction message that makes the correlation hold.

mod prf;
mod tape;

pub use prf::{PrfKey, PrfStream};
pub use tape::{read_tapes, write_tapes, Tape};

use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, RngCore, SeedableRng};

use crate::decompose::Permutation;
use crate::error::Result;
use crate::matrix::RingMatrix;
use crate::ring::{PartyId, Ring, RING_BITS};

/// What a protocol asks the dealer for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Request {
    /// Oblivious permutation randomness of degree `k`.
    Op { k: usize },
    /// `n` selection-multiplication tuples.
    Osm { n: usize },
    /// `n` triples where party 0 knows the whole `a`.
    PrivMult { n: usize },
    /// `n` elementwise Beaver triples.
    Beaver { n: usize },
    /// Matrix triple `C = A·B` with `A: m x k`, `B: k x n`.
    MatBeaver { m: usize, k: usize, n: usize },
    /// AND triples, 64 per word.
    Bits { words: usize },
}

impl Request {
    pub fn tag(&self) -> u32 {
        match self {
            Request::Op { .. } => 1,
            Request::Osm { .. } => 2,
            Request::PrivMult { .. } => 3,
            Request::Beaver { .. } => 4,
            Request::MatBeaver { .. } => 5,
            Request::Bits { .. } => 6,
        }
    }

    /// Size of the dealer's correction message to party 1, in bits.
    pub fn offline_bits(&self) -> u64 {
        let l = RING_BITS as u64;
        let elems = match *self {
            Request::Op { k } => k,
            Request::Osm { n } | Request::PrivMult { n } | Request::Beaver { n } => n,
            Request::MatBeaver { m, n, .. } => m * n,
            Request::Bits { words } => words,
        };
        elems as u64 * l
    }
}

/// Π_OP randomness. Party 0: `pi` and a share of `πU`. Party 1: `U` and the
/// other share of `πU`.
#[derive(Clone, Debug, PartialEq)]
pub struct OpRand {
    pub pi: Option<Permutation>,
    pub u: Vec<Ring>,
    pub pi_u: Vec<Ring>,
}

/// Π_OSM randomness. `b` is known to party 0 only (empty for party 1).
#[derive(Clone, Debug, PartialEq)]
pub struct OsmRand {
    pub b: Vec<bool>,
    pub u: Vec<Ring>,
    pub bu: Vec<Ring>,
}

/// Shares of `(a, b, c)` with `c = a·b`. For [`Request::PrivMult`], party 0's
/// `a` is the full value and party 1's `a` is empty.
#[derive(Clone, Debug, PartialEq)]
pub struct Triple {
    pub a: Vec<Ring>,
    pub b: Vec<Ring>,
    pub c: Vec<Ring>,
}

/// XOR shares of AND triples, packed 64 to a word.
#[derive(Clone, Debug, PartialEq)]
pub struct BitTriple {
    pub a: Vec<u64>,
    pub b: Vec<u64>,
    pub c: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Record {
    Op(OpRand),
    Osm(OsmRand),
    PrivMult(Triple),
    Beaver(Triple),
    MatBeaver { m: usize, k: usize, n: usize, t: Triple },
    Bits(BitTriple),
}

impl Record {
    pub fn kind(&self) -> &'static str {
        match self {
            Record::Op(_) => "op",
            Record::Osm(_) => "osm",
            Record::PrivMult(_) => "priv-mult",
            Record::Beaver(_) => "beaver",
            Record::MatBeaver { .. } => "mat-beaver",
            Record::Bits(_) => "bits",
        }
    }
}

fn rings(rng: &mut impl RngCore, n: usize) -> Vec<Ring> {
    (0..n).map(|_| Ring(rng.next_u64())).collect()
}

fn words(rng: &mut impl RngCore, n: usize) -> Vec<u64> {
    (0..n).map(|_| rng.next_u64()).collect()
}

/// Holds both PRF keys. Online it only hands out views; it never receives.
#[derive(Clone, Debug)]
pub struct Dealer {
    key0: PrfKey,
    key1: PrfKey,
}

impl Dealer {
    pub fn new(key0: PrfKey, key1: PrfKey) -> Self {
        Dealer { key0, key1 }
    }

    pub fn from_seed(seed: u64) -> Self {
        let mut rng = StdRng::seed_from_u64(seed);
        Dealer { key0: PrfKey(rng.gen()), key1: PrfKey(rng.gen()) }
    }

    /// The view of `party` for the request at counter `ctr`.
    pub fn view(&self, party: PartyId, ctr: u64, req: Request) -> Record {
        let mut s0 = PrfStream::new(&self.key0, req.tag(), ctr);
        match party {
            PartyId::P0 => self.view0(&mut s0, req),
            PartyId::P1 => {
                let mut s1 = PrfStream::new(&self.key1, req.tag(), ctr);
                self.view1(&mut s0, &mut s1, req)
            }
        }
    }

    pub fn views(&self, ctr: u64, req: Request) -> (Record, Record) {
        (self.view(PartyId::P0, ctr, req), self.view(PartyId::P1, ctr, req))
    }

    fn view0(&self, s0: &mut PrfStream, req: Request) -> Record {
        match req {
            Request::Op { k } => {
                let pi = Permutation::random(k, s0);
                Record::Op(OpRand { pi: Some(pi), u: Vec::new(), pi_u: rings(s0, k) })
            }
            Request::Osm { n } => {
                let b = (0..n).map(|_| s0.gen::<bool>()).collect();
                Record::Osm(OsmRand { b, u: rings(s0, n), bu: rings(s0, n) })
            }
            Request::PrivMult { n } | Request::Beaver { n } => {
                let t = Triple { a: rings(s0, n), b: rings(s0, n), c: rings(s0, n) };
                if matches!(req, Request::PrivMult { .. }) {
                    Record::PrivMult(t)
                } else {
                    Record::Beaver(t)
                }
            }
            Request::MatBeaver { m, k, n } => Record::MatBeaver {
                m,
                k,
                n,
                t: Triple { a: rings(s0, m * k), b: rings(s0, k * n), c: rings(s0, m * n) },
            },
            Request::Bits { words: w } => {
                Record::Bits(BitTriple { a: words(s0, w), b: words(s0, w), c: words(s0, w) })
            }
        }
    }

    fn view1(&self, s0: &mut PrfStream, s1: &mut PrfStream, req: Request) -> Record {
        let p0 = self.view0(s0, req);
        match (req, p0) {
            (Request::Op { k }, Record::Op(v0)) => {
                let u = rings(s1, k);
                let pi_u = v0.pi.expect("party 0 view holds pi").apply(&u).expect("degree k");
                let pi_u1 = pi_u.iter().zip(&v0.pi_u).map(|(&x, &s)| x - s).collect();
                Record::Op(OpRand { pi: None, u, pi_u: pi_u1 })
            }
            (Request::Osm { n }, Record::Osm(v0)) => {
                let u1 = rings(s1, n);
                let bu = (0..n)
                    .map(|i| if v0.b[i] { v0.u[i] + u1[i] - v0.bu[i] } else { -v0.bu[i] })
                    .collect();
                Record::Osm(OsmRand { b: Vec::new(), u: u1, bu })
            }
            (Request::PrivMult { n }, Record::PrivMult(v0)) => {
                let b1 = rings(s1, n);
                let c = (0..n).map(|i| v0.a[i] * (v0.b[i] + b1[i]) - v0.c[i]).collect();
                Record::PrivMult(Triple { a: Vec::new(), b: b1, c })
            }
            (Request::Beaver { n }, Record::Beaver(v0)) => {
                let a1 = rings(s1, n);
                let b1 = rings(s1, n);
                let c = (0..n).map(|i| (v0.a[i] + a1[i]) * (v0.b[i] + b1[i]) - v0.c[i]).collect();
                Record::Beaver(Triple { a: a1, b: b1, c })
            }
            (Request::MatBeaver { m, k, n }, Record::MatBeaver { t: v0, .. }) => {
                let a1 = rings(s1, m * k);
                let b1 = rings(s1, k * n);
                let sum = |x: &[Ring], y: &[Ring], r, c| {
                    RingMatrix::from_vec(r, c, x.iter().zip(y).map(|(&p, &q)| p + q).collect()).expect("shape")
                };
                let prod = sum(&v0.a, &a1, m, k).matmul(&sum(&v0.b, &b1, k, n)).expect("shape");
                let c = prod.as_slice().iter().zip(&v0.c).map(|(&x, &s)| x - s).collect();
                Record::MatBeaver { m, k, n, t: Triple { a: a1, b: b1, c } }
            }
            (Request::Bits { words: w }, Record::Bits(v0)) => {
                let a1 = words(s1, w);
                let b1 = words(s1, w);
                let c = (0..w).map(|i| ((v0.a[i] ^ a1[i]) & (v0.b[i] ^ b1[i])) ^ v0.c[i]).collect();
                Record::Bits(BitTriple { a: a1, b: b1, c })
            }
            _ => unreachable!("view0 returns the record kind of its request"),
        }
    }

    /// Precomputes both parties' tapes for a request sequence starting at `ctr`.
    pub fn tapes(&self, ctr: u64, requests: &[Request]) -> (Tape, Tape) {
        let mut t0 = Tape::new(PartyId::P0, ctr);
        let mut t1 = Tape::new(PartyId::P1, ctr);
        for (i, &req) in requests.iter().enumerate() {
            let (r0, r1) = self.views(ctr + i as u64, req);
            t0.push(req, r0);
            t1.push(req, r1);
        }
        (t0, t1)
    }
}

/// Where a party draws its correlated randomness from.
pub trait RandomnessSource: Send {
    fn next(&mut self, req: Request) -> Result<Record>;
}

/// On-demand generation. Both parties advance their own counter in lockstep,
/// since they issue identical request sequences.
pub struct LiveSource {
    dealer: Arc<Dealer>,
    party: PartyId,
    ctr: u64,
    log: Option<Vec<Request>>,
}

impl LiveSource {
    pub fn new(dealer: Arc<Dealer>, party: PartyId, ctr: u64) -> Self {
        LiveSource { dealer, party, ctr, log: None }
    }

    pub fn pair(dealer: &Arc<Dealer>, ctr: u64) -> (LiveSource, LiveSource) {
        (LiveSource::new(dealer.clone(), PartyId::P0, ctr), LiveSource::new(dealer.clone(), PartyId::P1, ctr))
    }

    /// Remembers every request so tapes can be produced for a later run.
    pub fn recording(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    pub fn counter(&self) -> u64 {
        self.ctr
    }

    pub fn requests(&self) -> &[Request] {
        self.log.as_deref().unwrap_or(&[])
    }
}

impl RandomnessSource for LiveSource {
    fn next(&mut self, req: Request) -> Result<Record> {
        let r = self.dealer.view(self.party, self.ctr, req);
        self.ctr += 1;
        if let Some(log) = &mut self.log {
            log.push(req);
        }
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dealer() -> Dealer {
        Dealer::from_seed(42)
    }

    fn add(a: &[Ring], b: &[Ring]) -> Vec<Ring> {
        a.iter().zip(b).map(|(&x, &y)| x + y).collect()
    }

    #[test]
    fn op_degree_one() {
        let (Record::Op(v0), Record::Op(v1)) = dealer().views(0, Request::Op { k: 1 }) else { panic!() };
        assert!(v0.pi.unwrap().is_identity());
        assert_eq!(add(&v0.pi_u, &v1.pi_u), v1.u);
    }

    #[test]
    fn op_reconstructs_pi_u() {
        let (Record::Op(v0), Record::Op(v1)) = dealer().views(7, Request::Op { k: 8 }) else { panic!() };
        let pi = v0.pi.unwrap();
        assert_eq!(add(&v0.pi_u, &v1.pi_u), pi.apply(&v1.u).unwrap());
        assert!(v1.pi.is_none() && v0.u.is_empty());
    }

    #[test]
    fn deterministic() {
        let d = dealer();
        assert_eq!(d.views(3, Request::Op { k: 16 }), d.views(3, Request::Op { k: 16 }));
        assert_ne!(d.views(3, Request::Op { k: 16 }), d.views(4, Request::Op { k: 16 }));
        assert_ne!(Dealer::from_seed(1).views(3, Request::Beaver { n: 4 }), d.views(3, Request::Beaver { n: 4 }));
    }

    #[test]
    fn osm_tuples() {
        let (Record::Osm(v0), Record::Osm(v1)) = dealer().views(1, Request::Osm { n: 10_000 }) else { panic!() };
        assert!(v1.b.is_empty());
        let mut ones = 0;
        for i in 0..10_000 {
            let u = v0.u[i] + v1.u[i];
            let bu = v0.bu[i] + v1.bu[i];
            assert_eq!(bu, if v0.b[i] { u } else { Ring::ZERO });
            ones += v0.b[i] as usize;
        }
        assert!((4500..5500).contains(&ones));
    }

    #[test]
    fn triples() {
        let d = dealer();
        let (Record::Beaver(t0), Record::Beaver(t1)) = d.views(2, Request::Beaver { n: 50 }) else { panic!() };
        for i in 0..50 {
            assert_eq!((t0.a[i] + t1.a[i]) * (t0.b[i] + t1.b[i]), t0.c[i] + t1.c[i]);
        }
        let (Record::PrivMult(t0), Record::PrivMult(t1)) = d.views(3, Request::PrivMult { n: 50 }) else { panic!() };
        assert!(t1.a.is_empty());
        for i in 0..50 {
            assert_eq!(t0.a[i] * (t0.b[i] + t1.b[i]), t0.c[i] + t1.c[i]);
        }
        let (Record::MatBeaver { t: t0, .. }, Record::MatBeaver { t: t1, .. }) =
            d.views(4, Request::MatBeaver { m: 3, k: 3, n: 3 })
        else {
            panic!()
        };
        let m = |x: &[Ring], y: &[Ring]| RingMatrix::from_vec(3, 3, add(x, y)).unwrap();
        assert_eq!(m(&t0.a, &t1.a).matmul(&m(&t0.b, &t1.b)).unwrap(), m(&t0.c, &t1.c));
        let (Record::Bits(b0), Record::Bits(b1)) = d.views(5, Request::Bits { words: 20 }) else { panic!() };
        for i in 0..20 {
            assert_eq!((b0.a[i] ^ b1.a[i]) & (b0.b[i] ^ b1.b[i]), b0.c[i] ^ b1.c[i]);
        }
    }

    #[test]
    fn offline_sizes() {
        assert_eq!(Request::Op { k: 8 }.offline_bits(), 8 * 64);
        assert_eq!(Request::Osm { n: 1 }.offline_bits(), 64);
        assert_eq!(Request::MatBeaver { m: 2, k: 5, n: 3 }.offline_bits(), 6 * 64);
    }

    #[test]
    fn live_matches_tape() {
        let d = Arc::new(dealer());
        let reqs = [Request::Op { k: 5 }, Request::Osm { n: 3 }, Request::Bits { words: 2 }];
        let (mut l0, mut l1) = LiveSource::pair(&d, 100);
        let (mut t0, mut t1) = d.tapes(100, &reqs);
        for r in reqs {
            assert_eq!(l0.next(r).unwrap(), t0.next(r).unwrap());
            assert_eq!(l1.next(r).unwrap(), t1.next(r).unwrap());
        }
        assert!(t0.next(Request::Op { k: 5 }).is_err());
    }
}
