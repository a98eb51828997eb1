//! In-process message passing between subdomain workers.
//!
//! Every worker owns an [`Endpoint`]. Messages carry a [`Tag`] and are
//! matched by tag on receipt, so traffic from one peer never stalls a
//! matching message from another. Delivery between a pair of endpoints is
//! FIFO.
//!
//! Accounting follows the subdomain view: a data message whose sending and
//! receiving subdomains differ is an interface message; one that stays
//! inside a subdomain (hand-offs between the workers of one subdomain) is a
//! local message; convergence flags are counted on their own.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::io::Write;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use crossbeam_channel::{unbounded, Receiver, RecvTimeoutError, Sender};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MsgKind {
    /// One subdomain's one-sided flux at an interface (NNWR).
    NeumannJumpHalf,
    /// Flux passed outward from the pivot (DNWR).
    NeumannFlux,
    /// Interface values feeding a Dirichlet trace update.
    DirichletTrace,
    ConvergenceFlag,
    /// Traces carried from one iterate's worker to the next within a subdomain.
    TraceCarry,
}

impl MsgKind {
    pub const ALL: [MsgKind; 5] = [
        MsgKind::NeumannJumpHalf,
        MsgKind::NeumannFlux,
        MsgKind::DirichletTrace,
        MsgKind::ConvergenceFlag,
        MsgKind::TraceCarry,
    ];

    fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            MsgKind::NeumannJumpHalf => "NeumannJumpHalf",
            MsgKind::NeumannFlux => "NeumannFlux",
            MsgKind::DirichletTrace => "DirichletTrace",
            MsgKind::ConvergenceFlag => "ConvergenceFlag",
            MsgKind::TraceCarry => "TraceCarry",
        }
    }
}

const ABORT_POLL: Duration = Duration::from_millis(25);

/// Subdomain id used for the coordinator.
pub const COORDINATOR: usize = 0;

/// Identifies a message within a run together with its origin subdomain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Tag {
    pub kind: MsgKind,
    pub iterate: usize,
    pub block: usize,
    pub interface: usize,
    /// Sending subdomain (`COORDINATOR` for the coordinator).
    pub origin: usize,
}

impl Tag {
    pub fn new(kind: MsgKind, iterate: usize, block: usize, interface: usize, origin: usize) -> Self {
        Self {
            kind,
            iterate,
            block,
            interface,
            origin,
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, k={}, j={}, i={}, from subdomain {})",
            self.kind.name(),
            self.iterate,
            self.block,
            self.interface,
            self.origin
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WrMessage {
    pub tag: Tag,
    /// Block series for data kinds, empty for flags.
    pub payload: Vec<f64>,
    /// Residual piggy-backed on a data message, or carried by a flag.
    pub flag: Option<f64>,
}

impl WrMessage {
    pub fn data(tag: Tag, payload: Vec<f64>) -> Self {
        Self {
            tag,
            payload,
            flag: None,
        }
    }

    pub fn flag(tag: Tag, residual: f64) -> Self {
        Self {
            tag,
            payload: Vec::new(),
            flag: Some(residual),
        }
    }
}

/// Destination of a send: the worker hosting the receiving task and the
/// subdomain that task belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Address {
    pub worker: usize,
    pub subdomain: usize,
}

#[derive(Debug, Default)]
struct Counters {
    interface: [AtomicU64; 5],
    interface_words: [AtomicU64; 5],
    local: AtomicU64,
    local_words: AtomicU64,
    flags: AtomicU64,
}

/// Snapshot of the message counters, read at the end of a run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MsgCounter {
    /// Data messages crossing a subdomain interface.
    pub total_messages: u64,
    /// Payload words of those messages.
    pub total_words: u64,
    /// Interface messages and words per kind.
    pub by_kind: BTreeMap<MsgKind, (u64, u64)>,
    /// Hand-offs between workers of the same subdomain.
    pub local_messages: u64,
    pub local_words: u64,
    /// Stand-alone convergence flags.
    pub flag_messages: u64,
}

impl MsgCounter {
    pub fn messages_of(&self, kind: MsgKind) -> u64 {
        self.by_kind.get(&kind).map_or(0, |c| c.0)
    }

    pub fn words_of(&self, kind: MsgKind) -> u64 {
        self.by_kind.get(&kind).map_or(0, |c| c.1)
    }
}

/// One line of the optional run trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iterate: usize,
    pub block: usize,
    pub interface: usize,
    pub kind: MsgKind,
    pub sender: usize,
    pub receiver: usize,
    pub words: usize,
}

/// Writes records as `k,j,i,kind,sender,receiver,words`.
pub fn write_trace_csv<W: Write>(records: &[TraceRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "k,j,i,kind,sender,receiver,words")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.iterate,
            r.block,
            r.interface,
            r.kind.name(),
            r.sender,
            r.receiver,
            r.words
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportOptions {
    /// How long `recv_match` waits before reporting a deadlock.
    pub timeout: Duration,
    /// Seeded random sleep before each send, up to the given duration.
    pub random_delay: Option<(u64, Duration)>,
    pub record_trace: bool,
}

impl Default for TransportOptions {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(120),
            random_delay: None,
            record_trace: false,
        }
    }
}

struct Shared {
    senders: Vec<Sender<WrMessage>>,
    counters: Counters,
    trace: Option<Mutex<Vec<TraceRecord>>>,
    aborted: AtomicBool,
}

/// Handle kept by the launching thread to read counters after the run.
#[derive(Clone)]
pub struct Network {
    shared: Arc<Shared>,
}

impl Network {
    /// Create `workers` connected endpoints.
    pub fn new(workers: usize, options: &TransportOptions) -> (Network, Vec<Endpoint>) {
        let (senders, receivers): (Vec<_>, Vec<_>) = (0..workers).map(|_| unbounded()).unzip();
        let shared = Arc::new(Shared {
            senders,
            counters: Counters::default(),
            trace: options.record_trace.then(|| Mutex::new(Vec::new())),
            aborted: AtomicBool::new(false),
        });
        let endpoints = receivers
            .into_iter()
            .enumerate()
            .map(|(id, rx)| Endpoint {
                id,
                rx,
                stash: HashMap::new(),
                shared: Arc::clone(&shared),
                timeout: options.timeout,
                delay: options.random_delay.map(|(seed, max)| {
                    (ChaCha8Rng::seed_from_u64(seed ^ (id as u64).wrapping_mul(0x9e37_79b9)), max)
                }),
            })
            .collect();
        (Network { shared }, endpoints)
    }

    pub fn counters(&self) -> MsgCounter {
        let c = &self.shared.counters;
        let mut by_kind = BTreeMap::new();
        let (mut total, mut words) = (0, 0);
        for kind in MsgKind::ALL {
            let m = c.interface[kind.index()].load(Ordering::SeqCst);
            let w = c.interface_words[kind.index()].load(Ordering::SeqCst);
            if m > 0 {
                by_kind.insert(kind, (m, w));
            }
            total += m;
            words += w;
        }
        MsgCounter {
            total_messages: total,
            total_words: words,
            by_kind,
            local_messages: c.local.load(Ordering::SeqCst),
            local_words: c.local_words.load(Ordering::SeqCst),
            flag_messages: c.flags.load(Ordering::SeqCst),
        }
    }

    /// Make every pending and future `recv_match` fail.
    pub fn abort(&self) {
        self.shared.aborted.store(true, Ordering::SeqCst);
    }

    pub fn is_aborted(&self) -> bool {
        self.shared.aborted.load(Ordering::SeqCst)
    }

    pub fn trace(&self) -> Vec<TraceRecord> {
        self.shared
            .trace
            .as_ref()
            .map(|t| t.lock().expect("trace lock").clone())
            .unwrap_or_default()
    }
}

pub struct Endpoint {
    id: usize,
    rx: Receiver<WrMessage>,
    stash: HashMap<Tag, VecDeque<WrMessage>>,
    shared: Arc<Shared>,
    timeout: Duration,
    delay: Option<(ChaCha8Rng, Duration)>,
}

impl Endpoint {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn send(&mut self, to: Address, msg: WrMessage) -> Result<()> {
        if let Some((rng, max)) = &mut self.delay {
            let nanos = rng.gen_range(0..=max.as_nanos() as u64);
            std::thread::sleep(Duration::from_nanos(nanos));
        }
        let tag = msg.tag;
        let words = msg.payload.len();
        let c = &self.shared.counters;
        if tag.kind == MsgKind::ConvergenceFlag {
            c.flags.fetch_add(1, Ordering::SeqCst);
        } else if tag.origin != to.subdomain {
            c.interface[tag.kind.index()].fetch_add(1, Ordering::SeqCst);
            c.interface_words[tag.kind.index()].fetch_add(words as u64, Ordering::SeqCst);
        } else {
            c.local.fetch_add(1, Ordering::SeqCst);
            c.local_words.fetch_add(words as u64, Ordering::SeqCst);
        }
        if let Some(trace) = &self.shared.trace {
            trace.lock().expect("trace lock").push(TraceRecord {
                iterate: tag.iterate,
                block: tag.block,
                interface: tag.interface,
                kind: tag.kind,
                sender: tag.origin,
                receiver: to.subdomain,
                words,
            });
        }
        let tx = self
            .shared
            .senders
            .get(to.worker)
            .ok_or_else(|| Error::Transport(format!("no endpoint {}", to.worker)))?;
        tx.send(msg)
            .map_err(|_| Error::Transport(format!("endpoint {} is closed; {tag} lost", to.worker)))
    }

    /// Block until the message with exactly this tag arrives.
    pub fn recv_match(&mut self, expect: Tag) -> Result<WrMessage> {
        if let Some(queue) = self.stash.get_mut(&expect) {
            if let Some(msg) = queue.pop_front() {
                if queue.is_empty() {
                    self.stash.remove(&expect);
                }
                return Ok(msg);
            }
        }
        let deadline = Instant::now() + self.timeout;
        loop {
            if self.shared.aborted.load(Ordering::SeqCst) {
                return Err(Error::Transport(format!(
                    "run aborted while worker {} waited for {expect}",
                    self.id
                )));
            }
            let left = deadline.saturating_duration_since(Instant::now());
            match self.rx.recv_timeout(left.min(ABORT_POLL)) {
                Err(RecvTimeoutError::Timeout) if !left.is_zero() => {}
                Ok(msg) if msg.tag == expect => return Ok(msg),
                Ok(msg) => self.stash.entry(msg.tag).or_default().push_back(msg),
                Err(RecvTimeoutError::Timeout) => {
                    return Err(Error::Deadlock {
                        expected: format!("{expect} at worker {}", self.id),
                        timeout: self.timeout,
                    })
                }
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(Error::Transport(format!("endpoint {} disconnected", self.id)))
                }
            }
        }
    }

    pub fn abort(&self) {
        self.shared.aborted.store(true, Ordering::SeqCst);
    }

    /// Messages delivered here but never consumed.
    pub fn unmatched(&self) -> usize {
        self.stash.values().map(VecDeque::len).sum::<usize>() + self.rx.len()
    }
}
