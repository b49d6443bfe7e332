use std::collections::VecDeque;
use std::io::{Read, Write};

use super::{BitTriple, OpRand, OsmRand, RandomnessSource, Record, Request, Triple};
use crate::decompose::Permutation;
use crate::error::{Error, Result};
use crate::ring::{PartyId, Ring};

const MAGIC: &[u8; 4] = b"VSMM";
const VERSION: u16 = 1;

/// One party's precomputed randomness, consumed front to back.
#[derive(Clone, Debug, PartialEq)]
pub struct Tape {
    party: PartyId,
    counter: u64,
    records: VecDeque<(Request, Record)>,
}

impl Tape {
    pub fn new(party: PartyId, counter: u64) -> Self {
        Tape { party, counter, records: VecDeque::new() }
    }

    pub fn party(&self) -> PartyId {
        self.party
    }

    /// Counter of the first record still on the tape.
    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, req: Request, rec: Record) {
        self.records.push_back((req, rec));
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&self.counter.to_le_bytes())?;
        w.write_all(&[self.party.index() as u8])?;
        put(w, self.records.len() as u64)?;
        for (req, rec) in &self.records {
            write_request(w, req)?;
            write_record(w, rec)?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a randomness tape".into()));
        }
        let mut v = [0u8; 2];
        r.read_exact(&mut v)?;
        if u16::from_le_bytes(v) != VERSION {
            return Err(Error::Format(format!("unsupported tape version {}", u16::from_le_bytes(v))));
        }
        let counter = get(r)?;
        let mut p = [0u8; 1];
        r.read_exact(&mut p)?;
        let party = match p[0] {
            0 => PartyId::P0,
            1 => PartyId::P1,
            x => return Err(Error::Format(format!("bad party byte {x}"))),
        };
        let n = get(r)?;
        let mut records = VecDeque::new();
        for _ in 0..n {
            let req = read_request(r)?;
            let rec = read_record(r, req)?;
            records.push_back((req, rec));
        }
        Ok(Tape { party, counter, records })
    }
}

impl RandomnessSource for Tape {
    fn next(&mut self, req: Request) -> Result<Record> {
        let (have, rec) = self.records.pop_front().ok_or_else(|| Error::TapeExhausted(format!("{req:?}")))?;
        if have != req {
            return Err(Error::TapeMismatch { expected: format!("{req:?}"), found: format!("{have:?}") });
        }
        self.counter += 1;
        Ok(rec)
    }
}

/// Writes both tapes to one file, party 0 first.
pub fn write_tapes(path: &std::path::Path, t0: &Tape, t1: &Tape) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    t0.write_to(&mut w)?;
    t1.write_to(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_tapes(path: &std::path::Path) -> Result<(Tape, Tape)> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    Ok((Tape::read_from(&mut r)?, Tape::read_from(&mut r)?))
}

fn put(w: &mut impl Write, x: u64) -> Result<()> {
    w.write_all(&x.to_le_bytes())?;
    Ok(())
}

fn get(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn put_words(w: &mut impl Write, xs: impl ExactSizeIterator<Item = u64>) -> Result<()> {
    put(w, xs.len() as u64)?;
    for x in xs {
        put(w, x)?;
    }
    Ok(())
}

fn get_words(r: &mut impl Read) -> Result<Vec<u64>> {
    let n = get(r)?;
    if n > 1 << 32 {
        return Err(Error::Format(format!("implausible vector length {n}")));
    }
    (0..n).map(|_| get(r)).collect()
}

fn put_rings(w: &mut impl Write, xs: &[Ring]) -> Result<()> {
    put_words(w, xs.iter().map(|x| x.0))
}

fn get_rings(r: &mut impl Read) -> Result<Vec<Ring>> {
    Ok(get_words(r)?.into_iter().map(Ring).collect())
}

fn write_request(w: &mut impl Write, req: &Request) -> Result<()> {
    w.write_all(&[req.tag() as u8])?;
    let dims: Vec<usize> = match *req {
        Request::Op { k } => vec![k],
        Request::Osm { n } | Request::PrivMult { n } | Request::Beaver { n } => vec![n],
        Request::MatBeaver { m, k, n } => vec![m, k, n],
        Request::Bits { words } => vec![words],
    };
    for d in dims {
        put(w, d as u64)?;
    }
    Ok(())
}

fn read_request(r: &mut impl Read) -> Result<Request> {
    let mut t = [0u8; 1];
    r.read_exact(&mut t)?;
    let mut d = || get(r).map(|x| x as usize);
    Ok(match t[0] {
        1 => Request::Op { k: d()? },
        2 => Request::Osm { n: d()? },
        3 => Request::PrivMult { n: d()? },
        4 => Request::Beaver { n: d()? },
        5 => Request::MatBeaver { m: d()?, k: d()?, n: d()? },
        6 => Request::Bits { words: d()? },
        x => return Err(Error::Format(format!("unknown request tag {x}"))),
    })
}

fn write_triple(w: &mut impl Write, t: &Triple) -> Result<()> {
    put_rings(w, &t.a)?;
    put_rings(w, &t.b)?;
    put_rings(w, &t.c)
}

fn read_triple(r: &mut impl Read) -> Result<Triple> {
    Ok(Triple { a: get_rings(r)?, b: get_rings(r)?, c: get_rings(r)? })
}

fn write_record(w: &mut impl Write, rec: &Record) -> Result<()> {
    match rec {
        Record::Op(v) => {
            match &v.pi {
                Some(p) => put_words(w, p.as_slice().iter().map(|&i| i as u64))?,
                None => put(w, u64::MAX)?,
            }
            put_rings(w, &v.u)?;
            put_rings(w, &v.pi_u)
        }
        Record::Osm(v) => {
            put_words(w, v.b.iter().map(|&b| b as u64))?;
            put_rings(w, &v.u)?;
            put_rings(w, &v.bu)
        }
        Record::PrivMult(t) | Record::Beaver(t) | Record::MatBeaver { t, .. } => write_triple(w, t),
        Record::Bits(b) => {
            put_words(w, b.a.iter().copied())?;
            put_words(w, b.b.iter().copied())?;
            put_words(w, b.c.iter().copied())
        }
    }
}

fn read_record(r: &mut impl Read, req: Request) -> Result<Record> {
    Ok(match req {
        Request::Op { .. } => {
            let n = get(r)?;
            let pi = if n == u64::MAX {
                None
            } else {
                let idx: Result<Vec<usize>> = (0..n).map(|_| get(r).map(|x| x as usize)).collect();
                Some(Permutation::from_vec(idx?)?)
            };
            Record::Op(OpRand { pi, u: get_rings(r)?, pi_u: get_rings(r)? })
        }
        Request::Osm { .. } => {
            let b = get_words(r)?.into_iter().map(|x| x != 0).collect();
            Record::Osm(OsmRand { b, u: get_rings(r)?, bu: get_rings(r)? })
        }
        Request::PrivMult { .. } => Record::PrivMult(read_triple(r)?),
        Request::Beaver { .. } => Record::Beaver(read_triple(r)?),
        Request::MatBeaver { m, k, n } => Record::MatBeaver { m, k, n, t: read_triple(r)? },
        Request::Bits { .. } => Record::Bits(BitTriple { a: get_words(r)?, b: get_words(r)?, c: get_words(r)? }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dealer::Dealer;

    #[test]
    fn binary_roundtrip() {
        let reqs = [
            Request::Op { k: 6 },
            Request::Osm { n: 4 },
            Request::PrivMult { n: 3 },
            Request::Beaver { n: 2 },
            Request::MatBeaver { m: 2, k: 3, n: 1 },
            Request::Bits { words: 2 },
        ];
        let (t0, t1) = Dealer::from_seed(5).tapes(9, &reqs);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tape.bin");
        write_tapes(&path, &t0, &t1).unwrap();
        let (r0, r1) = read_tapes(&path).unwrap();
        assert_eq!((r0, r1), (t0, t1));
    }

    #[test]
    fn mismatch_and_exhaustion() {
        let (mut t0, _) = Dealer::from_seed(5).tapes(0, &[Request::Op { k: 3 }]);
        assert!(matches!(t0.clone().next(Request::Op { k: 4 }), Err(Error::TapeMismatch { .. })));
        t0.next(Request::Op { k: 3 }).unwrap();
        assert!(matches!(t0.next(Request::Op { k: 3 }), Err(Error::TapeExhausted(_))));
    }

    #[test]
    fn rejects_bad_magic() {
        let mut bytes: &[u8] = b"NOPE\x01\x00";
        assert!(matches!(Tape::read_from(&mut bytes), Err(Error::Format(_))));
    }
}
