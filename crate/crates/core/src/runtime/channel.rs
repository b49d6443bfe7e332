use std::collections::VecDeque;
use std::sync::{Arc, Condvar, Mutex};

use super::wire::Payload;
use crate::error::{Error, Result};
use crate::ring::PartyId;

#[derive(Debug)]
pub(crate) struct Frame {
    pub tag: u16,
    pub depth: u64,
    pub payload: Payload,
}

#[derive(Default)]
struct State {
    /// `queues[p]` holds messages addressed to party `p`.
    queues: [VecDeque<Frame>; 2],
    waiting: [bool; 2],
    closed: [bool; 2],
    deadlocked: bool,
}

#[derive(Default)]
struct Shared {
    state: Mutex<State>,
    cv: Condvar,
}

/// One party's end of the duplex FIFO link.
pub(crate) struct Endpoint {
    me: PartyId,
    shared: Arc<Shared>,
}

pub(crate) fn duplex() -> (Endpoint, Endpoint) {
    let shared = Arc::new(Shared::default());
    (Endpoint { me: PartyId::P0, shared: shared.clone() }, Endpoint { me: PartyId::P1, shared })
}

impl Endpoint {
    pub fn send(&self, frame: Frame) {
        let mut st = self.shared.state.lock().expect("channel lock");
        st.queues[self.me.other().index()].push_back(frame);
        self.shared.cv.notify_all();
    }

    pub fn recv(&self) -> Result<Frame> {
        let (me, other) = (self.me.index(), self.me.other().index());
        let mut st = self.shared.state.lock().expect("channel lock");
        loop {
            if let Some(f) = st.queues[me].pop_front() {
                return Ok(f);
            }
            if st.deadlocked {
                return Err(Error::Deadlock);
            }
            if st.closed[other] {
                return Err(Error::PeerClosed);
            }
            if st.waiting[other] && st.queues[other].is_empty() {
                st.deadlocked = true;
                self.shared.cv.notify_all();
                return Err(Error::Deadlock);
            }
            st.waiting[me] = true;
            st = self.shared.cv.wait(st).expect("channel lock");
            st.waiting[me] = false;
        }
    }
}

impl Drop for Endpoint {
    fn drop(&mut self) {
        if let Ok(mut st) = self.shared.state.lock() {
            st.closed[self.me.index()] = true;
            self.shared.cv.notify_all();
        }
    }
}
