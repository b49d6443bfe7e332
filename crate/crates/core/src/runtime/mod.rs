//! Two-party harness: each party runs on its own thread and talks over an
//! in-process FIFO link that meters every payload.
//!
//! Rounds follow the critical path. A message sent at local clock `c` carries
//! depth `c + 1`; receiving a message of depth `d` moves the clock to at least
//! `d`. The round count of a run is the largest depth sent, so two messages
//! exchanged simultaneously cost one round.

mod channel;
mod meter;
pub mod wire;

pub use meter::{estimate_time, CommMeter, LabelStats, NetworkModel};
pub use wire::{BitReader, BitWriter, Payload};

use channel::{duplex, Endpoint, Frame};
use meter::PartyMeter;

use crate::dealer::{RandomnessSource, Record, Request};
use crate::error::{Error, Result};
use crate::ring::{truncate_vec, FixedPointConfig, PartyId, Ring};

pub struct PartyCtx<'a> {
    id: PartyId,
    cfg: FixedPointConfig,
    ep: Endpoint,
    source: &'a mut dyn RandomnessSource,
    clock: u64,
    labels: Vec<String>,
    label: String,
    meter: PartyMeter,
}

impl<'a> PartyCtx<'a> {
    #[inline]
    pub fn id(&self) -> PartyId {
        self.id
    }

    #[inline]
    pub fn is_p0(&self) -> bool {
        self.id == PartyId::P0
    }

    #[inline]
    pub fn cfg(&self) -> FixedPointConfig {
        self.cfg
    }

    pub fn send(&mut self, tag: u16, w: BitWriter) {
        let payload = w.finish();
        let depth = self.clock + 1;
        self.meter.on_send(&self.label, payload.bits, payload.bytes.len() as u64, depth);
        self.ep.send(Frame { tag, depth, payload });
    }

    pub fn recv(&mut self, tag: u16) -> Result<BitReader> {
        let f = self.ep.recv()?;
        if f.tag != tag {
            return Err(Error::Protocol(format!("expected message tag {tag}, got {}", f.tag)));
        }
        self.clock = self.clock.max(f.depth);
        Ok(BitReader::new(f.payload))
    }

    /// Sends, then receives the peer's message of the same round.
    pub fn exchange(&mut self, tag: u16, w: BitWriter) -> Result<BitReader> {
        self.send(tag, w);
        self.recv(tag)
    }

    /// Next correlated-randomness record; party 1's correction is metered offline.
    pub fn dealer(&mut self, req: Request) -> Result<Record> {
        let rec = self.source.next(req)?;
        if self.id == PartyId::P1 {
            self.meter.on_offline(&self.label, req.offline_bits());
        }
        Ok(rec)
    }

    /// Runs `f` with `name` appended to the metering label path.
    pub fn scoped<R>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> R) -> R {
        self.labels.push(name.to_string());
        self.label = self.labels.join("/");
        let r = f(self);
        self.labels.pop();
        self.label = self.labels.join("/");
        r
    }

    /// Local truncation of a share by the fractional bits.
    pub fn truncate(&self, v: &mut [Ring]) {
        truncate_vec(self.id, v, self.cfg.frac_bits);
    }

    /// Current critical-path depth of this party.
    pub fn clock(&self) -> u64 {
        self.clock
    }
}

fn join<T>(h: std::thread::ScopedJoinHandle<'_, (Result<T>, PartyMeter)>, party: usize) -> (Result<T>, PartyMeter) {
    h.join().unwrap_or_else(|_| (Err(Error::PartyPanicked { party }), PartyMeter::default()))
}

fn is_secondary(e: &Error) -> bool {
    matches!(e, Error::PeerClosed | Error::Deadlock)
}

/// Runs the two party programs to completion and merges their meters.
pub fn run_two_party<T0, T1, F0, F1>(
    cfg: FixedPointConfig,
    src0: &mut dyn RandomnessSource,
    src1: &mut dyn RandomnessSource,
    f0: F0,
    f1: F1,
) -> Result<(T0, T1, CommMeter)>
where
    T0: Send,
    T1: Send,
    F0: FnOnce(&mut PartyCtx<'_>) -> Result<T0> + Send,
    F1: FnOnce(&mut PartyCtx<'_>) -> Result<T1> + Send,
{
    let (e0, e1) = duplex();
    let ((r0, m0), (r1, m1)) = std::thread::scope(|s| {
        let h0 = s.spawn(move || {
            let mut ctx = PartyCtx::new(PartyId::P0, cfg, e0, src0);
            let r = f0(&mut ctx);
            (r, ctx.into_meter())
        });
        let h1 = s.spawn(move || {
            let mut ctx = PartyCtx::new(PartyId::P1, cfg, e1, src1);
            let r = f1(&mut ctx);
            (r, ctx.into_meter())
        });
        (join(h0, 0), join(h1, 1))
    });
    match (r0, r1) {
        (Ok(a), Ok(b)) => Ok((a, b, PartyMeter::merge(m0, m1))),
        (Err(e), Ok(_)) | (Ok(_), Err(e)) => Err(e),
        (Err(a), Err(b)) => Err(if is_secondary(&a) && !is_secondary(&b) { b } else { a }),
    }
}

impl<'a> PartyCtx<'a> {
    fn new(id: PartyId, cfg: FixedPointConfig, ep: Endpoint, source: &'a mut dyn RandomnessSource) -> Self {
        PartyCtx { id, cfg, ep, source, clock: 0, labels: Vec::new(), label: String::new(), meter: PartyMeter::default() }
    }

    fn into_meter(self) -> PartyMeter {
        // Dropping the endpoint here tells the peer no more messages will come.
        self.meter
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dealer::{Dealer, LiveSource};
    use std::sync::Arc;

    fn sources() -> (LiveSource, LiveSource) {
        LiveSource::pair(&Arc::new(Dealer::from_seed(1)), 0)
    }

    #[test]
    fn empty_protocol() {
        let (mut s0, mut s1) = sources();
        let (_, _, m) = run_two_party(FixedPointConfig::default(), &mut s0, &mut s1, |_| Ok(()), |_| Ok(())).unwrap();
        assert_eq!((m.online_bits, m.rounds, m.messages), (0, 0, 0));
    }

    #[test]
    fn simultaneous_exchange_is_one_round() {
        let (mut s0, mut s1) = sources();
        let prog = |ctx: &mut PartyCtx| {
            let mut w = BitWriter::new();
            w.put_ring(Ring(ctx.id().index() as u64 + 10));
            let mut r = ctx.exchange(1, w)?;
            r.get_ring()
        };
        let (a, b, m) = run_two_party(FixedPointConfig::default(), &mut s0, &mut s1, prog, prog).unwrap();
        assert_eq!((a, b), (Ring(11), Ring(10)));
        assert_eq!((m.rounds, m.online_bits, m.framing_bytes), (1, 128, 12));
    }

    #[test]
    fn ping_pong_is_two_rounds() {
        let (mut s0, mut s1) = sources();
        let (_, _, m) = run_two_party(
            FixedPointConfig::default(),
            &mut s0,
            &mut s1,
            |ctx| {
                ctx.scoped("ping", |c| c.send(1, BitWriter::new()));
                ctx.recv(2).map(|_| ())
            },
            |ctx| {
                ctx.recv(1)?;
                ctx.scoped("pong", |c| c.send(2, BitWriter::new()));
                Ok(())
            },
        )
        .unwrap();
        assert_eq!(m.rounds, 2);
        assert_eq!(m.by_label["pong"].rounds, 1);
    }

    #[test]
    fn deadlock_detected() {
        let (mut s0, mut s1) = sources();
        let r = run_two_party(
            FixedPointConfig::default(),
            &mut s0,
            &mut s1,
            |ctx| ctx.recv(1).map(|_| ()),
            |ctx| ctx.recv(1).map(|_| ()),
        );
        assert!(matches!(r, Err(Error::Deadlock)));
    }

    #[test]
    fn errors_propagate() {
        let (mut s0, mut s1) = sources();
        let r = run_two_party(
            FixedPointConfig::default(),
            &mut s0,
            &mut s1,
            |_| Err::<(), _>(Error::Protocol("boom".into())),
            |ctx| ctx.recv(1).map(|_| ()),
        );
        assert!(matches!(r, Err(Error::Protocol(_))));
        let r = run_two_party(FixedPointConfig::default(), &mut s0, &mut s1, |_| -> Result<()> { panic!("x") }, |_| Ok(()));
        assert!(matches!(r, Err(Error::PartyPanicked { party: 0 })));
    }

    #[test]
    fn wrong_tag() {
        let (mut s0, mut s1) = sources();
        let r = run_two_party(
            FixedPointConfig::default(),
            &mut s0,
            &mut s1,
            |ctx| {
                ctx.send(3, BitWriter::new());
                Ok(())
            },
            |ctx| ctx.recv(1).map(|_| ()),
        );
        assert!(matches!(r, Err(Error::Protocol(_))));
    }

    #[test]
    fn offline_bits_from_party_one() {
        let (mut s0, mut s1) = sources();
        let req = Request::Op { k: 8 };
        let (_, _, m) = run_two_party(
            FixedPointConfig::default(),
            &mut s0,
            &mut s1,
            |ctx| ctx.dealer(req).map(|_| ()),
            |ctx| ctx.dealer(req).map(|_| ()),
        )
        .unwrap();
        assert_eq!(m.offline_bits, 8 * 64);
    }
}
