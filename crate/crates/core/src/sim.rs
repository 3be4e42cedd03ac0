//! Event-driven simulation of user mobility and subscription choices.
//!
//! Each user carries at most two pending events: its next motion event (end
//! of pause or walk, cell-boundary crossing, or the point 20 m away from the
//! last capacity measurement, whichever comes first) and its next periodic
//! subscription. EMA ticks are not queued; they are replayed in order
//! whenever the estimate is read or the last measurement is replaced, which
//! yields the same values as processing them as events.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::grid::{CellId, Grid, NUM_CELLS};
use crate::logit::{
    choose, draw_gumbel, ema_update, observed_utility, outside_utility, ChoiceParams, SliceWeights,
};
use crate::radio::{CapacityAccumulator, CapacityModel, CapacityStats, ShannonCapacity};
use crate::vec2::Vec2;

/// One step of the streaming time average: `avg` covered `[0, t_prev]`, the
/// count held `count` over `(t_prev, t_now]`.
pub fn update_time_average(avg: f64, t_prev: f64, t_now: f64, count: f64) -> f64 {
    if t_now <= 0.0 {
        return count;
    }
    (t_prev * avg + (t_now - t_prev) * count) / t_now
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Paused,
    Moving,
}

/// Mobility timing; speed 0 means nobody moves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mobility {
    pub speed_mps: f64,
    pub max_pause_s: f64,
    pub max_walk_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserState {
    pub id: u32,
    /// Position at `anchor_time`, in the canonical placement of `current_cell`.
    pub position: Vec2,
    pub anchor_time: f64,
    pub phase: Phase,
    /// Heading in radians; meaningful while moving.
    pub direction: f64,
    pub phase_end_time: f64,
    pub current_cell: CellId,
    /// Option index: 0 is no subscription, `i` is NST `i`.
    pub option: usize,
    /// Unobserved utility of every option, drawn once.
    pub kappa: Box<[f64]>,
    pub c_hat_bps: f64,
    pub c_last_bps: f64,
    /// Displacement since the last capacity measurement.
    pub since_measure: Vec2,
    pub next_subscription_time: f64,
    ema_phase: f64,
    ema_ticks: u64,
    sub_phase: f64,
    sub_ticks: u64,
    pending_edge: usize,
}

impl UserState {
    fn heading(&self) -> Vec2 {
        Vec2::from_angle(self.direction)
    }

    /// Moves the anchor forward to `now`.
    pub fn advance_to(&mut self, now: f64, speed: f64) {
        if self.phase == Phase::Moving && speed > 0.0 {
            let step = self.heading() * (speed * (now - self.anchor_time));
            self.position += step;
            self.since_measure += step;
        }
        self.anchor_time = now;
    }

    fn ema_tick_time(&self, k: u64, period: f64) -> f64 {
        self.ema_phase + k as f64 * period
    }

    /// Applies every EMA tick strictly before `now` (or at `now` too, when
    /// `inclusive`).
    fn catch_up_ema(&mut self, now: f64, inclusive: bool, period: f64, lambda: f64) {
        loop {
            let t = self.ema_tick_time(self.ema_ticks, period);
            if t > now || (!inclusive && t == now) {
                break;
            }
            self.c_hat_bps = ema_update(self.c_hat_bps, self.c_last_bps, lambda);
            self.ema_ticks += 1;
        }
    }

    /// Drops EMA ticks before `now` without applying them.
    fn skip_ema(&mut self, now: f64, period: f64) {
        if self.ema_tick_time(self.ema_ticks, period) < now {
            let k = ((now - self.ema_phase) / period).ceil().max(0.0) as u64;
            self.ema_ticks = self.ema_ticks.max(k);
            while self.ema_tick_time(self.ema_ticks, period) < now {
                self.ema_ticks += 1;
            }
        }
    }
}

/// Random-waypoint phase switch at `now`: a pause lasts `U[0, max_pause]`, a
/// walk `U[0, max_walk]` in a uniform direction. Returns the end time of the
/// new phase.
pub fn rwp_step<R: Rng + ?Sized>(
    user: &mut UserState,
    now: f64,
    rng: &mut R,
    mobility: &Mobility,
) -> f64 {
    user.advance_to(now, mobility.speed_mps);
    match user.phase {
        Phase::Moving => {
            user.phase = Phase::Paused;
            user.phase_end_time = now + mobility.max_pause_s * rng.random::<f64>();
        }
        Phase::Paused => {
            user.phase = Phase::Moving;
            user.direction = std::f64::consts::TAU * rng.random::<f64>();
            user.phase_end_time = now + mobility.max_walk_s * rng.random::<f64>();
        }
    }
    user.phase_end_time
}

/// Cell occupied by a single random-waypoint walker at times
/// `0, interval, 2·interval, ..` up to `duration`. The walker starts paused
/// at a uniform position; no subscription state is simulated.
pub fn sample_trajectory<R: Rng + ?Sized>(
    grid: &Grid,
    mobility: &Mobility,
    duration: f64,
    interval: f64,
    rng: &mut R,
) -> Result<Vec<CellId>> {
    if !(interval > 0.0 && duration >= 0.0) {
        return Err(Error::Domain(format!(
            "trajectory needs interval > 0 and duration >= 0, got {interval} and {duration}"
        )));
    }
    let cell = CellId::from_index(rng.random_range(0..NUM_CELLS));
    let mut u = UserState {
        id: 0,
        position: grid.sample_in_cell(cell, rng),
        anchor_time: 0.0,
        phase: Phase::Paused,
        direction: 0.0,
        phase_end_time: mobility.max_pause_s * rng.random::<f64>(),
        current_cell: cell,
        option: 0,
        kappa: Box::new([]),
        c_hat_bps: 0.0,
        c_last_bps: 0.0,
        since_measure: Vec2::ZERO,
        next_subscription_time: f64::INFINITY,
        ema_phase: 0.0,
        ema_ticks: 0,
        sub_phase: 0.0,
        sub_ticks: 0,
        pending_edge: 0,
    };
    let speed = mobility.speed_mps;
    let samples = (duration / interval).floor() as usize + 1;
    let mut out = Vec::with_capacity(samples);
    let mut now = 0.0;
    while out.len() < samples {
        let mut next = u.phase_end_time;
        let mut crossing = None;
        if u.phase == Phase::Moving && speed > 0.0 {
            let c = grid.crossing(u.current_cell, u.position, u.heading());
            let t = now + c.distance / speed;
            if t < next {
                next = t;
                crossing = Some(c.edge);
            }
        }
        // the cell held over [now, next)
        while out.len() < samples && (out.len() as f64) * interval < next {
            out.push(u.current_cell);
        }
        now = next;
        match crossing {
            Some(edge) => {
                u.advance_to(now, speed);
                let (to, pos) = grid.cross_edge(u.current_cell, edge, u.position);
                u.current_cell = to;
                u.position = pos;
            }
            None => {
                rwp_step(&mut u, now, rng, mobility);
            }
        }
    }
    Ok(out)
}

/// Instantaneous and time-averaged option counts of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellCounters {
    /// `[n_0, n_1, .., n_S]`.
    pub counts: Vec<u32>,
    /// Time averages of `counts` since the estimator start.
    pub averages: Vec<f64>,
    /// Estimator time of the last update.
    pub last_event_time: f64,
}

impl CellCounters {
    pub fn new(options: usize) -> Self {
        CellCounters {
            counts: vec![0; options],
            averages: vec![0.0; options],
            last_event_time: 0.0,
        }
    }

    /// Brings every average up to estimator time `tau` before a count changes.
    pub fn advance(&mut self, tau: f64) {
        debug_assert!(tau >= self.last_event_time);
        for (avg, &n) in self.averages.iter_mut().zip(&self.counts) {
            *avg = update_time_average(*avg, self.last_event_time, tau, n as f64);
        }
        self.last_event_time = tau;
    }

    pub fn population(&self) -> u32 {
        self.counts.iter().sum()
    }

    pub fn mean_population(&self) -> f64 {
        self.averages.iter().sum()
    }
}

/// Utility-maximizing option for a user with estimate `c_hat`, currently on
/// `current`. Each NST is valued at the count it would have after the user
/// joins it.
pub fn best_option(
    kappa: &[f64],
    c_hat: f64,
    counts: &[u32],
    current: usize,
    weights: &SliceWeights,
    params: &ChoiceParams,
) -> usize {
    let total = weights.total();
    let mut observed = Vec::with_capacity(counts.len());
    observed.push(outside_utility(params));
    for (i, &w) in weights.as_slice().iter().enumerate() {
        let opt = i + 1;
        let others = counts[opt] - u32::from(current == opt);
        let rate = w / total * c_hat / (others + 1) as f64;
        observed.push(observed_utility(rate, params).expect("positive rate"));
    }
    choose(&observed, kappa)
}

/// Re-evaluates the user's subscription in its current cell at estimator time
/// `tau`. Counters change only when the choice does.
pub fn subscribe(
    user: &mut UserState,
    counters: &mut CellCounters,
    weights: &SliceWeights,
    params: &ChoiceParams,
    tau: f64,
) -> usize {
    let choice = best_option(
        &user.kappa,
        user.c_hat_bps,
        &counters.counts,
        user.option,
        weights,
        params,
    );
    if choice != user.option {
        counters.advance(tau);
        counters.counts[user.option] -= 1;
        counters.counts[choice] += 1;
        user.option = choice;
    }
    choice
}

/// Moves the user's membership from `from` to `to` at estimator time `tau`,
/// restarts its capacity estimate from `measured_bps`, and subscribes again
/// in the new cell.
#[allow(clippy::too_many_arguments)]
pub fn handle_handover(
    user: &mut UserState,
    from: &mut CellCounters,
    to: &mut CellCounters,
    to_cell: CellId,
    measured_bps: f64,
    weights: &SliceWeights,
    params: &ChoiceParams,
    tau: f64,
) -> usize {
    from.advance(tau);
    to.advance(tau);
    from.counts[user.option] -= 1;
    to.counts[user.option] += 1;
    user.current_cell = to_cell;
    user.c_last_bps = measured_bps;
    user.c_hat_bps = measured_bps;
    user.since_measure = Vec2::ZERO;
    subscribe(user, to, weights, params, tau)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    PhaseEnd,
    Handover,
    Measure,
    Subscribe,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    kind: EventKind,
    user: u32,
}

impl PartialEq for Event {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Event {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, o: &Self) -> Ordering {
        o.time
            .total_cmp(&self.time)
            .then(o.kind.cmp(&self.kind))
            .then(o.user.cmp(&self.user))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub time: f64,
    pub user: u32,
    pub kind: EventKind,
    pub cell: CellId,
    /// Option held after the event.
    pub option: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: CellId,
    pub sigma_hat: f64,
    pub rho_hat: Vec<f64>,
    pub n_hat: f64,
    /// Time averages `[n̂_0, n̂_1, ..]`.
    pub option_averages: Vec<f64>,
    /// Statistics of the estimates used at subscription decisions.
    pub capacity: Option<CapacityStats>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub total: u64,
    pub phase_ends: u64,
    pub handovers: u64,
    pub measurements: u64,
    pub subscriptions: u64,
    pub audits: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub seed: u64,
    pub virtual_time: f64,
    pub warmup: f64,
    pub cells: Vec<CellResult>,
    /// Capacity statistics over all cells.
    pub pooled_capacity: Option<CapacityStats>,
    pub events: EventCounts,
    pub event_log: Option<Vec<EventRecord>>,
}

impl SimResult {
    pub fn mean_sigma_hat(&self) -> f64 {
        self.cells.iter().map(|c| c.sigma_hat).sum::<f64>() / self.cells.len() as f64
    }

    /// Per-NST mean of `ρ̂` over cells.
    pub fn mean_rho_hat(&self) -> Vec<f64> {
        let s = self.cells[0].rho_hat.len();
        (0..s)
            .map(|i| self.cells.iter().map(|c| c.rho_hat[i]).sum::<f64>() / self.cells.len() as f64)
            .collect()
    }

    pub fn mean_n_hat(&self) -> f64 {
        self.cells.iter().map(|c| c.n_hat).sum::<f64>() / self.cells.len() as f64
    }
}

fn indicators(
    cell: CellId,
    counters: &CellCounters,
    capacity: Option<CapacityStats>,
) -> CellResult {
    let n_hat = counters.mean_population();
    let n0 = counters.averages[0];
    let subscribed = n_hat - n0;
    let sigma_hat = if n_hat > 0.0 { subscribed / n_hat } else { 0.0 };
    let rho_hat = counters.averages[1..]
        .iter()
        .map(|&a| {
            if subscribed > 0.0 {
                a / (sigma_hat * n_hat)
            } else {
                0.0
            }
        })
        .collect();
    CellResult {
        cell,
        sigma_hat,
        rho_hat,
        n_hat,
        option_averages: counters.averages.clone(),
        capacity,
    }
}

struct Engine<'a, M> {
    grid: &'a Grid,
    model: &'a M,
    mobility: Mobility,
    weights: SliceWeights,
    params: ChoiceParams,
    lambda: f64,
    t_update: f64,
    t_sub: f64,
    d_update: f64,
    warmup: f64,
    end: f64,
    audit_interval: u64,
    rng: ChaCha8Rng,
    users: Vec<UserState>,
    cells: Vec<CellCounters>,
    capacity: Vec<CapacityAccumulator>,
    heap: BinaryHeap<Event>,
    counts: EventCounts,
    log: Option<Vec<EventRecord>>,
}

/// Path length along unit `heading` until the distance from the last
/// measurement point reaches `d`.
fn distance_to_measure(since: Vec2, heading: Vec2, d: f64) -> f64 {
    let b = since.dot(heading);
    let c = since.norm_sq() - d * d;
    if c >= 0.0 {
        return 0.0;
    }
    -b + (b * b - c).sqrt()
}

impl<'a, M: CapacityModel> Engine<'a, M> {
    fn new(cfg: &ScenarioConfig, grid: &'a Grid, model: &'a M, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let s = &cfg.subscription;
        let options = cfg.num_nsts() + 1;
        Ok(Engine {
            grid,
            model,
            mobility: Mobility {
                speed_mps: cfg.mobility.speed_mps,
                max_pause_s: cfg.mobility.max_pause_s,
                max_walk_s: cfg.mobility.max_walk_s,
            },
            weights: cfg.weights()?,
            params: cfg.choice_params()?,
            lambda: s.ema_lambda,
            t_update: s.update_period_s,
            t_sub: s.subscription_period_s,
            d_update: s.update_distance_m,
            warmup: cfg.run.warmup_s,
            end: cfg.run.duration_s,
            audit_interval: cfg.run.audit_interval,
            rng: ChaCha8Rng::seed_from_u64(seed),
            users: Vec::with_capacity(cfg.total_users()),
            cells: vec![CellCounters::new(options); NUM_CELLS],
            capacity: vec![CapacityAccumulator::default(); NUM_CELLS],
            heap: BinaryHeap::with_capacity(2 * cfg.total_users()),
            counts: EventCounts::default(),
            log: cfg.run.event_log.then(Vec::new),
        })
    }

    fn tau(&self, t: f64) -> f64 {
        (t - self.warmup).max(0.0)
    }

    fn populate(&mut self, per_cell: u32) {
        let options = self.weights.len() + 1;
        let nu = self.params.nu;
        for cell in self.grid.cells() {
            for _ in 0..per_cell {
                let id = self.users.len() as u32;
                let position = self.grid.sample_in_cell(cell.id, &mut self.rng);
                let kappa: Box<[f64]> = (0..options)
                    .map(|_| draw_gumbel(nu, &mut self.rng))
                    .collect();
                let c = self
                    .model
                    .measure(self.grid, cell.id, position, &mut self.rng);
                let phase_end_time = self.mobility.max_pause_s * self.rng.random::<f64>();
                let ema_phase = self.t_update * self.rng.random::<f64>();
                let sub_phase = self.t_sub * self.rng.random::<f64>();
                self.cells[cell.id.index()].counts[0] += 1;
                self.users.push(UserState {
                    id,
                    position,
                    anchor_time: 0.0,
                    phase: Phase::Paused,
                    direction: 0.0,
                    phase_end_time,
                    current_cell: cell.id,
                    option: 0,
                    kappa,
                    c_hat_bps: c,
                    c_last_bps: c,
                    since_measure: Vec2::ZERO,
                    next_subscription_time: sub_phase,
                    ema_phase,
                    ema_ticks: 0,
                    sub_phase,
                    sub_ticks: 0,
                    pending_edge: 0,
                });
            }
        }
    }

    fn record(&mut self, time: f64, user: usize, kind: EventKind) {
        if let Some(log) = &mut self.log {
            let u = &self.users[user];
            log.push(EventRecord {
                time,
                user: u.id,
                kind,
                cell: u.current_cell,
                option: u.option,
            });
        }
    }

    /// Subscription decision of `user` at `now`, sampling the estimate used.
    fn decide(&mut self, user: usize, now: f64) {
        let tau = self.tau(now);
        let u = &mut self.users[user];
        let cell = u.current_cell.index();
        if now >= self.warmup {
            self.capacity[cell].push(u.c_hat_bps);
        }
        subscribe(u, &mut self.cells[cell], &self.weights, &self.params, tau);
        self.counts.subscriptions += 1;
    }

    fn schedule_motion(&mut self, user: usize, now: f64) {
        let speed = self.mobility.speed_mps;
        if speed == 0.0 {
            return;
        }
        let u = &mut self.users[user];
        let mut next = (u.phase_end_time, EventKind::PhaseEnd);
        if u.phase == Phase::Moving {
            let h = u.heading();
            let cross = self.grid.crossing(u.current_cell, u.position, h);
            let candidates = [
                (now + cross.distance / speed, EventKind::Handover),
                (
                    now + distance_to_measure(u.since_measure, h, self.d_update) / speed,
                    EventKind::Measure,
                ),
            ];
            for c in candidates {
                if c.0 < next.0 {
                    next = c;
                }
            }
            u.pending_edge = cross.edge;
        }
        self.heap.push(Event {
            time: next.0,
            kind: next.1,
            user: user as u32,
        });
    }

    fn schedule_subscription(&mut self, user: usize) {
        let u = &mut self.users[user];
        u.next_subscription_time = u.sub_phase + u.sub_ticks as f64 * self.t_sub;
        self.heap.push(Event {
            time: u.next_subscription_time,
            kind: EventKind::Subscribe,
            user: user as u32,
        });
    }

    fn initialize(&mut self, per_cell: u32) {
        self.populate(per_cell);
        let mut order: Vec<usize> = (0..self.users.len()).collect();
        order.shuffle(&mut self.rng);
        for &u in &order {
            self.decide(u, 0.0);
            self.record(0.0, u, EventKind::Subscribe);
        }
        for u in 0..self.users.len() {
            self.schedule_motion(u, 0.0);
            self.schedule_subscription(u);
        }
    }

    fn on_phase_end(&mut self, user: usize, now: f64) {
        rwp_step(&mut self.users[user], now, &mut self.rng, &self.mobility);
        self.counts.phase_ends += 1;
    }

    fn on_handover(&mut self, user: usize, now: f64) {
        let speed = self.mobility.speed_mps;
        let tau = self.tau(now);
        let u = &mut self.users[user];
        u.advance_to(now, speed);
        let from = u.current_cell;
        let (to, pos) = self.grid.cross_edge(from, u.pending_edge, u.position);
        u.position = pos;
        u.skip_ema(now, self.t_update);
        let c = self.model.measure(self.grid, to, pos, &mut self.rng);
        let (a, b) = (from.index(), to.index());
        let (lo, hi) = self.cells.split_at_mut(a.max(b));
        let (from_c, to_c) = if a < b {
            (&mut lo[a], &mut hi[0])
        } else {
            (&mut hi[0], &mut lo[b])
        };
        if now >= self.warmup {
            self.capacity[b].push(c);
        }
        handle_handover(u, from_c, to_c, to, c, &self.weights, &self.params, tau);
        self.counts.handovers += 1;
        self.counts.subscriptions += 1;
    }

    fn on_measure(&mut self, user: usize, now: f64) {
        let u = &mut self.users[user];
        u.advance_to(now, self.mobility.speed_mps);
        u.catch_up_ema(now, false, self.t_update, self.lambda);
        u.c_last_bps = self
            .model
            .measure(self.grid, u.current_cell, u.position, &mut self.rng);
        u.since_measure = Vec2::ZERO;
        self.counts.measurements += 1;
    }

    fn on_subscription(&mut self, user: usize, now: f64) {
        let u = &mut self.users[user];
        u.catch_up_ema(now, true, self.t_update, self.lambda);
        u.sub_ticks += 1;
        self.decide(user, now);
        self.schedule_subscription(user);
    }

    /// Recounts every cell from the user table.
    fn audit(&self, now: f64) -> Result<()> {
        let fail = |detail: String| Err(Error::Audit { time: now, detail });
        let options = self.weights.len() + 1;
        let mut expected = vec![vec![0u32; options]; NUM_CELLS];
        for u in &self.users {
            expected[u.current_cell.index()][u.option] += 1;
            if !self.grid.contains(u.current_cell, u.position) {
                return fail(format!(
                    "user {} at {:?} lies outside cell {}",
                    u.id, u.position, u.current_cell
                ));
            }
        }
        let total: usize = self.cells.iter().map(|c| c.population() as usize).sum();
        if total != self.users.len() {
            return fail(format!("population {total} != {}", self.users.len()));
        }
        for (j, (c, e)) in self.cells.iter().zip(&expected).enumerate() {
            if &c.counts != e {
                return fail(format!(
                    "cell {} counts {:?}, users say {:?}",
                    CellId::from_index(j),
                    c.counts,
                    e
                ));
            }
        }
        Ok(())
    }

    fn run(mut self, per_cell: u32, seed: u64) -> Result<SimResult> {
        self.initialize(per_cell);
        while let Some(ev) = self.heap.pop() {
            if ev.time > self.end {
                break;
            }
            let user = ev.user as usize;
            match ev.kind {
                EventKind::PhaseEnd => self.on_phase_end(user, ev.time),
                EventKind::Handover => self.on_handover(user, ev.time),
                EventKind::Measure => self.on_measure(user, ev.time),
                EventKind::Subscribe => self.on_subscription(user, ev.time),
            }
            if ev.kind != EventKind::Subscribe {
                self.schedule_motion(user, ev.time);
            }
            self.record(ev.time, user, ev.kind);
            self.counts.total += 1;
            if self.audit_interval > 0 && self.counts.total.is_multiple_of(self.audit_interval) {
                // bring positions up to date so the containment check is exact
                let speed = self.mobility.speed_mps;
                for u in &mut self.users {
                    u.advance_to(ev.time, speed);
                }
                self.audit(ev.time)?;
                self.counts.audits += 1;
            }
        }
        let tau_end = self.tau(self.end);
        for c in &mut self.cells {
            c.advance(tau_end);
        }
        let mut pooled = CapacityAccumulator::default();
        let cells = self
            .cells
            .iter()
            .zip(&self.capacity)
            .enumerate()
            .map(|(j, (c, acc))| {
                pooled.merge(acc);
                indicators(CellId::from_index(j), c, acc.stats().ok())
            })
            .collect();
        Ok(SimResult {
            seed,
            virtual_time: self.end,
            warmup: self.warmup,
            cells,
            pooled_capacity: pooled.stats().ok(),
            events: self.counts,
            event_log: self.log,
        })
    }
}

/// Runs one replication with an explicit capacity model.
pub fn run_with<M: CapacityModel>(
    cfg: &ScenarioConfig,
    grid: &Grid,
    model: &M,
    seed: u64,
) -> Result<SimResult> {
    Engine::new(cfg, grid, model, seed)?.run(cfg.network.users_per_cell, seed)
}

/// Runs one replication of the scenario under the full radio model.
pub fn run(cfg: &ScenarioConfig, seed: u64) -> Result<SimResult> {
    cfg.validate()?;
    let grid = Grid::new(cfg.network.isd_m)?;
    let model = ShannonCapacity::new(cfg.radio)?;
    run_with(cfg, &grid, &model, seed)
}
