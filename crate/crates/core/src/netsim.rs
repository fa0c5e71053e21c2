//! Simulated broadcast network driving a fleet of nodes.
//!
//! `SyncBatch`: every active node steps once per tick, then the whole batch
//! is delivered to everyone. `Async`: a discrete-event loop with sampled
//! latencies, evaluation durations and message loss. Lost records are
//! recovered without a coordinator: every envelope carries the sender's
//! per-origin contiguous-seq summary, receivers ask the sender for anything
//! they lack, and the sender answers with the records (both legs can be
//! lost too). Once evaluation stops, nodes keep exchanging summaries until
//! every node holds every record.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::sync::mpsc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::node::{BroadcastMessage, Diagnostic, NodeConfig, NodeState, StepOutcome};
use crate::rng::{derive_seed, rng_from_seed, Rng};
use crate::surrogate::RecordKey;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum NetworkMode {
    #[default]
    SyncBatch,
    Async,
}

/// Uniform integer tick count in `[min, max]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TickRange {
    pub min: u64,
    pub max: u64,
}

impl TickRange {
    pub const fn fixed(t: u64) -> Self {
        Self { min: t, max: t }
    }

    fn sample(&self, rng: &mut Rng) -> u64 {
        if self.min == self.max {
            self.min
        } else {
            rng.random_range(self.min..=self.max)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub mode: NetworkMode,
    /// Delivery delay per message and receiver (Async).
    pub latency: TickRange,
    /// Ticks between a node's consecutive evaluations (Async).
    pub eval_duration: TickRange,
    /// Independent loss probability per message and receiver (Async).
    pub drop_prob: f64,
    /// Summary-driven repair of lost records.
    pub piggyback: bool,
    /// Give up draining after this many ticks past the last evaluation.
    pub max_drain_ticks: u64,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            mode: NetworkMode::SyncBatch,
            latency: TickRange { min: 1, max: 3 },
            eval_duration: TickRange { min: 1, max: 2 },
            drop_prob: 0.0,
            piggyback: true,
            max_drain_ticks: 100_000,
            seed: 0,
        }
    }
}

impl NetworkConfig {
    pub fn async_with_loss(drop_prob: f64, seed: u64) -> Self {
        Self { mode: NetworkMode::Async, drop_prob, seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.drop_prob) {
            return Err(Error::config("drop_prob must lie in [0, 1)"));
        }
        if self.latency.min > self.latency.max || self.eval_duration.min > self.eval_duration.max {
            return Err(Error::config("tick ranges need min <= max"));
        }
        if self.eval_duration.min == 0 {
            return Err(Error::config("evaluation duration must be at least one tick"));
        }
        Ok(())
    }
}

/// A node spun up mid-run from the broadcast history.
#[derive(Clone, Debug)]
pub struct JoinSpec {
    pub tick: u64,
    pub config: NodeConfig,
    /// Used only if nothing has been broadcast yet.
    pub init_points: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceEntry {
    pub global_index: usize,
    pub tick: u64,
    pub node_id: u32,
    pub seq: u64,
    pub x: Vec<f64>,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JoinEvent {
    pub tick: u64,
    pub node_id: u32,
    pub history_len: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TraceFlag {
    Node(Diagnostic),
    /// Draining stopped at the tick cap with records still missing somewhere.
    DrainIncomplete { tick: u64 },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunTrace {
    pub entries: Vec<TraceEntry>,
    pub joins: Vec<JoinEvent>,
    pub flags: Vec<TraceFlag>,
    /// Point-to-point transmissions attempted / lost.
    pub transmissions: usize,
    pub dropped: usize,
    /// Records re-sent in answer to gap requests.
    pub repaired: usize,
    pub final_tick: u64,
}

#[derive(Debug)]
pub struct RunOutput {
    pub trace: RunTrace,
    pub nodes: Vec<NodeState>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyReport {
    /// `(node_id, records of the trace the node does not hold)`.
    pub missing: Vec<(u32, usize)>,
}

impl ConsistencyReport {
    pub fn consistent(&self) -> bool {
        self.missing.iter().all(|(_, m)| *m == 0)
    }
}

/// Per-node count of trace records absent from its dataset.
pub fn quiesce(trace: &RunTrace, nodes: &[NodeState]) -> ConsistencyReport {
    let missing = nodes
        .iter()
        .map(|n| {
            let held = n.dataset();
            let gap = trace.entries.iter().filter(|e| !held.contains(&RecordKey { node_id: e.node_id, seq: e.seq })).count();
            (n.node_id(), gap)
        })
        .collect();
    ConsistencyReport { missing }
}

fn check_fleet(nodes: &mut [NodeState], joins: &[JoinSpec]) -> Result<()> {
    if nodes.is_empty() {
        return Err(Error::config("a run needs at least one node"));
    }
    nodes.sort_by_key(|n| n.node_id());
    let mut ids: Vec<u32> = nodes.iter().map(|n| n.node_id()).chain(joins.iter().map(|j| j.config.node_id)).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::config("node ids must be unique"));
    }
    Ok(())
}

fn push_diags(trace: &mut RunTrace, diags: Vec<Diagnostic>) {
    trace.flags.extend(diags.into_iter().map(TraceFlag::Node));
}

/// Runs `nodes` until `budget` total evaluations (initial designs included)
/// have been made or every node is exhausted.
pub fn run<F: Fn(&[f64]) -> f64 + ?Sized>(
    nodes: Vec<NodeState>,
    objective: &F,
    config: &NetworkConfig,
    budget: usize,
    joins: Vec<JoinSpec>,
) -> Result<RunOutput> {
    config.validate()?;
    let mut nodes = nodes;
    check_fleet(&mut nodes, &joins)?;
    let init: usize = nodes.iter().map(NodeState::pending_init).sum();
    if budget < init {
        return Err(Error::config(format!("budget {budget} is below the {init} initial-design evaluations")));
    }
    match config.mode {
        NetworkMode::SyncBatch => run_sync(nodes, objective, budget, joins),
        NetworkMode::Async => AsyncSim::new(nodes, config, joins).run(objective, budget),
    }
}

fn run_sync<F: Fn(&[f64]) -> f64 + ?Sized>(
    mut nodes: Vec<NodeState>,
    objective: &F,
    budget: usize,
    mut joins: Vec<JoinSpec>,
) -> Result<RunOutput> {
    joins.sort_by_key(|j| (j.tick, j.config.node_id));
    let mut joins = joins.into_iter().peekable();
    let mut trace = RunTrace::default();
    let mut log: Vec<BroadcastMessage> = Vec::new();
    let mut tick = 0u64;
    loop {
        while let Some(j) = joins.next_if(|j| j.tick <= tick) {
            let node = NodeState::join(&log, j.config, j.init_points)?;
            trace.joins.push(JoinEvent { tick, node_id: node.node_id(), history_len: log.len() });
            let at = nodes.partition_point(|n| n.node_id() < node.node_id());
            nodes.insert(at, node);
        }
        let mut slots = budget.saturating_sub(trace.entries.len());
        let mut round = Vec::new();
        for node in nodes.iter_mut() {
            if slots == 0 {
                break;
            }
            if let StepOutcome::Message { message, diagnostics } = node.step(objective)? {
                push_diags(&mut trace, diagnostics);
                let r = &message.record;
                trace.entries.push(TraceEntry {
                    global_index: trace.entries.len(),
                    tick,
                    node_id: r.node_id,
                    seq: r.seq,
                    x: r.x.clone(),
                    y: r.y,
                });
                round.push(message);
                slots -= 1;
            }
        }
        if round.is_empty() && joins.peek().is_none() {
            break;
        }
        for node in nodes.iter_mut() {
            node.ingest(&round)?;
        }
        log.extend(round);
        tick += 1;
    }
    trace.final_tick = tick;
    Ok(RunOutput { trace, nodes })
}

/// Per-origin length of the contiguous seq prefix held.
type Summary = Vec<(u32, u64)>;

fn summary(node: &NodeState) -> Summary {
    let mut out: BTreeMap<u32, u64> = BTreeMap::new();
    for k in node.dataset().keys() {
        let e = out.entry(k.node_id).or_insert(0);
        if k.seq == *e {
            *e += 1;
        }
    }
    out.into_iter().collect()
}

/// Keys below the sender's prefixes that `node` lacks.
fn gaps(node: &NodeState, theirs: &Summary) -> Vec<RecordKey> {
    let mut out = Vec::new();
    for &(origin, prefix) in theirs {
        for seq in 0..prefix {
            let key = RecordKey { node_id: origin, seq };
            if !node.dataset().contains(&key) {
                out.push(key);
            }
        }
    }
    out
}

#[derive(Debug)]
enum Payload {
    /// A fresh record, a heartbeat (`None`) or repair records.
    Records { records: Vec<BroadcastMessage>, summary: Summary, repair: bool },
    GapRequest { keys: Vec<RecordKey> },
}

#[derive(Debug)]
enum Event {
    Deliver { from: u32, to: u32, payload: Payload },
    Step { node: u32 },
    Join { index: usize },
    Heartbeat,
}

impl Event {
    /// Deliveries first within a tick, so a stepping node sees everything
    /// that has arrived.
    fn rank(&self) -> u8 {
        match self {
            Event::Join { .. } => 0,
            Event::Deliver { .. } => 1,
            Event::Heartbeat => 2,
            Event::Step { .. } => 3,
        }
    }
}

struct AsyncSim<'a> {
    nodes: BTreeMap<u32, NodeState>,
    config: &'a NetworkConfig,
    joins: Vec<Option<JoinSpec>>,
    queue: BinaryHeap<Reverse<(u64, u8, u64)>>,
    events: BTreeMap<u64, Event>,
    counter: u64,
    rng: Rng,
    log: Vec<BroadcastMessage>,
    trace: RunTrace,
    drain_start: u64,
}

impl<'a> AsyncSim<'a> {
    fn new(nodes: Vec<NodeState>, config: &'a NetworkConfig, joins: Vec<JoinSpec>) -> Self {
        let mut sim = Self {
            nodes: nodes.into_iter().map(|n| (n.node_id(), n)).collect(),
            config,
            joins: joins.into_iter().map(Some).collect(),
            queue: BinaryHeap::new(),
            events: BTreeMap::new(),
            counter: 0,
            rng: rng_from_seed(derive_seed(config.seed, &[0x4e45_54])),
            log: Vec::new(),
            trace: RunTrace::default(),
            drain_start: 0,
        };
        let ids: Vec<u32> = sim.nodes.keys().copied().collect();
        for id in ids {
            sim.schedule(0, Event::Step { node: id });
        }
        for i in 0..sim.joins.len() {
            let tick = sim.joins[i].as_ref().unwrap().tick;
            sim.schedule(tick, Event::Join { index: i });
        }
        sim
    }

    fn schedule(&mut self, tick: u64, event: Event) {
        let id = self.counter;
        self.counter += 1;
        self.queue.push(Reverse((tick, event.rank(), id)));
        self.events.insert(id, event);
    }

    /// Sends `payload()` from `from` to `to` unless the link drops it.
    fn send(&mut self, now: u64, from: u32, to: u32, payload: Payload) {
        self.trace.transmissions += 1;
        if self.config.drop_prob > 0.0 && self.rng.random::<f64>() < self.config.drop_prob {
            self.trace.dropped += 1;
            return;
        }
        let delay = self.config.latency.sample(&mut self.rng);
        self.schedule(now + delay, Event::Deliver { from, to, payload });
    }

    fn broadcast(&mut self, now: u64, from: u32, records: Vec<BroadcastMessage>) {
        let peers: Vec<u32> = self.nodes.keys().copied().filter(|id| *id != from).collect();
        let summary = if self.config.piggyback { summary(&self.nodes[&from]) } else { Vec::new() };
        for to in peers {
            let payload = Payload::Records { records: records.clone(), summary: summary.clone(), repair: false };
            self.send(now, from, to, payload);
        }
    }

    fn consistent(&self) -> bool {
        self.nodes.values().all(|n| n.dataset().len() == self.log.len())
    }

    fn handle<F: Fn(&[f64]) -> f64 + ?Sized>(
        &mut self,
        now: u64,
        event: Event,
        objective: &F,
        budget: usize,
        evaluating: bool,
    ) -> Result<()> {
        match event {
            Event::Join { index } => {
                let spec = self.joins[index].take().unwrap();
                let node = NodeState::join(&self.log, spec.config, spec.init_points)?;
                let nid = node.node_id();
                self.trace.joins.push(JoinEvent { tick: now, node_id: nid, history_len: self.log.len() });
                self.nodes.insert(nid, node);
                self.schedule(now, Event::Step { node: nid });
            }
            Event::Step { node } if evaluating && self.trace.entries.len() < budget => {
                let out = self.nodes.get_mut(&node).unwrap().step(objective)?;
                if let StepOutcome::Message { message, diagnostics } = out {
                    push_diags(&mut self.trace, diagnostics);
                    let r = &message.record;
                    self.trace.entries.push(TraceEntry {
                        global_index: self.trace.entries.len(),
                        tick: now,
                        node_id: r.node_id,
                        seq: r.seq,
                        x: r.x.clone(),
                        y: r.y,
                    });
                    self.log.push(message.clone());
                    self.broadcast(now, node, vec![message]);
                    let d = self.config.eval_duration.sample(&mut self.rng);
                    self.schedule(now + d, Event::Step { node });
                }
            }
            Event::Step { .. } => {}
            Event::Deliver { from, to, payload: Payload::Records { records, summary, repair } } => {
                let receiver = self.nodes.get_mut(&to).unwrap();
                receiver.ingest(&records)?;
                if repair {
                    self.trace.repaired += records.len();
                }
                if self.config.piggyback {
                    let missing = gaps(receiver, &summary);
                    if !missing.is_empty() {
                        self.send(now + 1, to, from, Payload::GapRequest { keys: missing });
                    }
                }
            }
            Event::Deliver { from, to, payload: Payload::GapRequest { keys } } => {
                let holder = &self.nodes[&to];
                let records: Vec<BroadcastMessage> = keys
                    .iter()
                    .filter_map(|k| holder.dataset().get(k))
                    .map(|r| BroadcastMessage::new(r.clone()))
                    .collect();
                if !records.is_empty() {
                    let summary = summary(holder);
                    self.send(now, to, from, Payload::Records { records, summary, repair: true });
                }
            }
            Event::Heartbeat => {
                if self.consistent() {
                    return Ok(());
                }
                if now > self.drain_start + self.config.max_drain_ticks {
                    self.trace.flags.push(TraceFlag::DrainIncomplete { tick: now });
                    return Ok(());
                }
                let ids: Vec<u32> = self.nodes.keys().copied().collect();
                for from in ids {
                    self.broadcast(now, from, Vec::new());
                }
                self.schedule(now + 1, Event::Heartbeat);
            }
        }
        Ok(())
    }

    fn run<F: Fn(&[f64]) -> f64 + ?Sized>(mut self, objective: &F, budget: usize) -> Result<RunOutput> {
        let mut evaluating = true;
        while let Some(Reverse((now, _, id))) = self.queue.pop() {
            let event = self.events.remove(&id).expect("queued event");
            self.trace.final_tick = now;
            self.handle(now, event, objective, budget, evaluating)?;
            if evaluating {
                let done = self.trace.entries.len() >= budget || self.nodes.values().all(NodeState::is_exhausted);
                if done && self.joins.iter().all(Option::is_none) {
                    evaluating = false;
                    self.drain_start = now;
                    if self.config.piggyback {
                        self.schedule(now + 1, Event::Heartbeat);
                    }
                }
            }
        }
        Ok(RunOutput { trace: self.trace, nodes: self.nodes.into_values().collect() })
    }
}

enum Command {
    Step,
    Deliver(Vec<BroadcastMessage>),
    Stop,
}

enum Reply {
    Stepped(Box<Result<StepOutcome>>),
    Ingested(Result<usize>),
}

/// SyncBatch with every node in its own thread; the bus is the only link
/// between them. Produces the same trace as [`run`] in SyncBatch mode
/// (joins are not supported here).
pub fn run_threaded<F: Fn(&[f64]) -> f64 + Sync + ?Sized>(
    nodes: Vec<NodeState>,
    objective: &F,
    budget: usize,
) -> Result<RunOutput> {
    let mut nodes = nodes;
    check_fleet(&mut nodes, &[])?;
    std::thread::scope(|scope| {
        let mut links = Vec::new();
        let mut handles = Vec::new();
        for mut node in nodes {
            let (cmd_tx, cmd_rx) = mpsc::channel::<Command>();
            let (rep_tx, rep_rx) = mpsc::channel::<Reply>();
            links.push((cmd_tx, rep_rx));
            handles.push(scope.spawn(move || {
                for cmd in cmd_rx {
                    let reply = match cmd {
                        Command::Step => Reply::Stepped(Box::new(node.step(objective))),
                        Command::Deliver(msgs) => Reply::Ingested(node.ingest(&msgs)),
                        Command::Stop => break,
                    };
                    if rep_tx.send(reply).is_err() {
                        break;
                    }
                }
                node
            }));
        }
        let mut trace = RunTrace::default();
        let mut tick = 0u64;
        let mut alive = vec![true; links.len()];
        let result: Result<()> = (|| loop {
            let slots = budget.saturating_sub(trace.entries.len());
            let order: Vec<usize> = (0..links.len()).filter(|i| alive[*i]).collect();
            let mut round = Vec::new();
            let mut next = 0;
            while round.len() < slots && next < order.len() {
                let batch = &order[next..order.len().min(next + slots - round.len())];
                next += batch.len();
                for i in batch {
                    links[*i].0.send(Command::Step).expect("node thread alive");
                }
                for i in batch {
                    let Reply::Stepped(out) = links[*i].1.recv().expect("node thread alive") else { unreachable!() };
                    match (*out)? {
                        StepOutcome::Message { message, diagnostics } => {
                            push_diags(&mut trace, diagnostics);
                            let r = &message.record;
                            trace.entries.push(TraceEntry {
                                global_index: trace.entries.len(),
                                tick,
                                node_id: r.node_id,
                                seq: r.seq,
                                x: r.x.clone(),
                                y: r.y,
                            });
                            round.push(message);
                        }
                        StepOutcome::Exhausted => alive[*i] = false,
                    }
                }
            }
            if round.is_empty() {
                return Ok(());
            }
            for (tx, _) in &links {
                tx.send(Command::Deliver(round.clone())).expect("node thread alive");
            }
            for (_, rx) in &links {
                let Reply::Ingested(r) = rx.recv().expect("node thread alive") else { unreachable!() };
                r?;
            }
            tick += 1;
        })();
        for (tx, _) in &links {
            let _ = tx.send(Command::Stop);
        }
        let nodes: Vec<NodeState> = handles.into_iter().map(|h| h.join().expect("node thread panicked")).collect();
        result?;
        trace.final_tick = tick;
        Ok(RunOutput { trace, nodes })
    })
}
