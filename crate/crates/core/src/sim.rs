//! Discrete-event simulation of the sleeping M/G/1-PS server.
//!
//! With `n` flows present each receives `r / n` b/s. Instead of updating
//! every residual size on each event the simulator tracks the cumulative
//! per-flow service `V(t)`; a flow arriving at `t_a` with size `x` finishes
//! when `V` reaches `V(t_a) + x`, so the next departure is the smallest such
//! tag in a heap.
//!
//! The server sleeps whenever the queue empties and is charged `2 E_sw` at
//! each wake-up (one sleep-to-active and one active-to-sleep transition per
//! cycle). Wake-up takes no time.
//!
//! Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed_from_u64(rng_seed)`: stream 0 drives inter-arrival times and
//! stream 1 drives flow sizes, so runs that differ only in the size
//! distribution see the same arrival instants.
//!
//! Confidence intervals use batch means: the post-warmup arrivals are split
//! into equal batches, each batch covering the time window between its
//! first arrival and the next batch's first arrival.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::par::Execution;
use crate::power::BusyPowerProfile;
use crate::queueing::{average_power, queue_metrics, TrafficParams};

pub const DEFAULT_BATCHES: usize = 20;
pub const DEFAULT_WARMUP: f64 = 0.1;
pub const MIN_ARRIVALS: u64 = 1_000;

const ARRIVAL_STREAM: u64 = 0;
const SIZE_STREAM: u64 = 1;

/// Flow-size law; every variant has mean `L`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SizeDistribution {
    #[default]
    Exponential,
    Deterministic,
    /// Pareto with tail index `shape`, truncated to `[k, spread * k]`.
    BoundedPareto {
        shape: f64,
        spread: f64,
    },
}

impl SizeDistribution {
    fn sampler(self, mean: f64) -> Result<SizeSampler> {
        Ok(match self {
            SizeDistribution::Exponential => {
                SizeSampler::Exp(Exp::new(1.0 / mean).map_err(|e| Error::invalid("mean_file_size", e.to_string()))?)
            }
            SizeDistribution::Deterministic => SizeSampler::Fixed(mean),
            SizeDistribution::BoundedPareto { shape, spread } => {
                if !(shape > 0.0) || shape == 1.0 || !(spread > 1.0) {
                    return Err(Error::invalid(
                        "size_distribution",
                        "bounded Pareto needs shape > 0, shape != 1, spread > 1",
                    ));
                }
                let a = shape;
                let factor = a / (a - 1.0) * (1.0 - spread.powf(1.0 - a)) / (1.0 - spread.powf(-a));
                let lower = mean / factor;
                SizeSampler::Pareto {
                    lower,
                    shape: a,
                    tail_mass: 1.0 - spread.powf(-a),
                }
            }
        })
    }
}

enum SizeSampler {
    Exp(Exp<f64>),
    Fixed(f64),
    Pareto { lower: f64, shape: f64, tail_mass: f64 },
}

impl SizeSampler {
    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            SizeSampler::Exp(d) => d.sample(rng),
            SizeSampler::Fixed(x) => *x,
            SizeSampler::Pareto {
                lower,
                shape,
                tail_mass,
            } => {
                let u: f64 = rng.random();
                lower / (1.0 - u * tail_mass).powf(1.0 / shape)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub traffic: TrafficParams,
    pub rate: f64,
    pub profile: BusyPowerProfile,
    pub size_distribution: SizeDistribution,
    /// Total arrivals, warmup included.
    pub n_arrivals: u64,
    pub warmup_fraction: f64,
    pub rng_seed: u64,
    pub batches: usize,
}

impl SimConfig {
    pub fn new(traffic: TrafficParams, rate: f64, profile: BusyPowerProfile) -> Self {
        SimConfig {
            traffic,
            rate,
            profile,
            size_distribution: SizeDistribution::default(),
            n_arrivals: 100_000,
            warmup_fraction: DEFAULT_WARMUP,
            rng_seed: 42,
            batches: DEFAULT_BATCHES,
        }
    }

    /// Total arrivals so that `post_warmup` remain after the warmup prefix.
    pub fn arrivals_for_post_warmup(post_warmup: u64, warmup_fraction: f64) -> u64 {
        (post_warmup as f64 / (1.0 - warmup_fraction)).ceil() as u64
    }

    fn warmup_count(&self) -> u64 {
        (self.n_arrivals as f64 * self.warmup_fraction).floor() as u64
    }

    pub fn validate(&self) -> Result<()> {
        self.traffic.validate()?;
        let offered = self.traffic.offered_load();
        if !(self.rate > offered) {
            return Err(Error::UnstableQueue {
                rate: self.rate,
                offered,
            });
        }
        if self.n_arrivals < MIN_ARRIVALS {
            return Err(Error::invalid("n_arrivals", format!("must be at least {MIN_ARRIVALS}")));
        }
        if !(0.0..=0.5).contains(&self.warmup_fraction) {
            return Err(Error::invalid("warmup_fraction", "must lie in [0, 0.5]"));
        }
        if self.batches < 2 {
            return Err(Error::invalid("batches", "need at least two batches"));
        }
        if self.n_arrivals - self.warmup_count() < self.batches as u64 {
            return Err(Error::invalid("batches", "more batches than post-warmup arrivals"));
        }
        Ok(())
    }
}

/// Batch-means point estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub batches: usize,
}

impl Estimate {
    fn from_batches(values: &[f64]) -> Estimate {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Estimate {
            mean,
            std_error: (var / n as f64).sqrt(),
            batches: n,
        }
    }

    /// Student-t halfwidth at two-sided `confidence`.
    pub fn halfwidth(&self, confidence: f64) -> f64 {
        if self.batches < 2 || self.std_error == 0.0 {
            return 0.0;
        }
        let t = StudentsT::new(0.0, 1.0, (self.batches - 1) as f64).expect("degrees of freedom are positive");
        t.inverse_cdf(0.5 + confidence / 2.0) * self.std_error
    }

    pub fn contains(&self, value: f64, confidence: f64) -> bool {
        (value - self.mean).abs() <= self.halfwidth(confidence)
    }
}

/// Post-warmup energy split; `total` is accumulated independently.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyLedger {
    pub busy: f64,
    pub sleep: f64,
    pub switching: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimStats {
    pub mean_queue_len: Estimate,
    pub mean_delay: Estimate,
    pub mean_power: Estimate,
    pub busy_fraction: Estimate,
    pub mean_cycle: Estimate,
    /// Wake-ups inside the measurement windows.
    pub cycles_observed: u64,
    pub admitted: u64,
    pub completed: u64,
    pub in_system_at_end: u64,
    pub measured_time: f64,
    pub energy: EnergyLedger,
}

#[derive(Default, Clone)]
struct Window {
    queue_area: f64,
    busy_time: f64,
    sleep_time: f64,
    busy_energy: f64,
    sleep_energy: f64,
    wakeups: u64,
    delay_sum: f64,
    delay_count: u64,
}

#[derive(PartialEq)]
struct Tag {
    finish: f64,
    flow: usize,
}

impl Eq for Tag {}

impl Ord for Tag {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on finish tag, ties by arrival order
        other
            .finish
            .total_cmp(&self.finish)
            .then_with(|| other.flow.cmp(&self.flow))
    }
}

impl PartialOrd for Tag {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Flow {
    arrival: f64,
    batch: Option<usize>,
}

pub fn simulate(cfg: &SimConfig) -> Result<SimStats> {
    run(cfg, None)
}

/// Like [`simulate`], also writing one CSV record per event:
/// `time_s,event,queue_len,energy_j`. The energy column accumulates from
/// the end of warmup, so it reads zero before then. No header is written.
pub fn simulate_traced(cfg: &SimConfig, trace: &mut dyn Write) -> Result<SimStats> {
    run(cfg, Some(trace))
}

/// Independent runs, returned in input order.
pub fn simulate_many(cfgs: &[SimConfig], exec: Execution) -> Vec<Result<SimStats>> {
    exec.map(cfgs, simulate)
}

fn emit(trace: &mut Option<&mut dyn Write>, t: f64, event: &str, n: usize, energy: f64) {
    if let Some(w) = trace.as_mut() {
        // trace output is best effort
        let _ = writeln!(w, "{t},{event},{n},{energy}");
    }
}

fn run(cfg: &SimConfig, mut trace: Option<&mut dyn Write>) -> Result<SimStats> {
    cfg.validate()?;
    let busy_power = cfg.profile.busy_power(cfg.rate)?;
    let sleep_power = cfg.profile.sleep_power();
    let wake_energy = 2.0 * cfg.profile.switch_energy();
    let rate = cfg.rate;

    let mut arrivals_rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    arrivals_rng.set_stream(ARRIVAL_STREAM);
    let mut sizes_rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    sizes_rng.set_stream(SIZE_STREAM);
    let interarrival = Exp::new(cfg.traffic.arrival_rate).map_err(|e| Error::invalid("arrival_rate", e.to_string()))?;
    let sizes = cfg.size_distribution.sampler(cfg.traffic.mean_file_size)?;

    let warmup = cfg.warmup_count();
    let measured = cfg.n_arrivals - warmup;
    let batch_len = measured / cfg.batches as u64;
    let batch_of = |index: u64| -> Option<usize> {
        if index < warmup {
            None
        } else {
            Some((((index - warmup) / batch_len) as usize).min(cfg.batches - 1))
        }
    };

    let mut windows = vec![Window::default(); cfg.batches];
    let mut flows: Vec<Flow> = Vec::with_capacity(cfg.n_arrivals as usize);
    let mut heap = BinaryHeap::new();
    let mut now = 0.0;
    let mut virtual_work = 0.0;
    let mut current: Option<usize> = None;
    let mut energy_total = 0.0;
    let mut completed = 0u64;

    emit(&mut trace, 0.0, "start", 0, 0.0);

    let mut next_arrival = interarrival.sample(&mut arrivals_rng);
    let mut index = 0u64;

    // advance the clock to `to`, integrating queue length and energy
    let advance = |now: &mut f64,
                   to: f64,
                   n: usize,
                   virtual_work: &mut f64,
                   current: Option<usize>,
                   windows: &mut [Window],
                   energy_total: &mut f64| {
        let dt = to - *now;
        if n > 0 {
            *virtual_work += rate * dt / n as f64;
        }
        if let Some(b) = current {
            let w = &mut windows[b];
            if n > 0 {
                w.queue_area += n as f64 * dt;
                w.busy_time += dt;
                w.busy_energy += busy_power * dt;
                *energy_total += busy_power * dt;
            } else {
                w.sleep_time += dt;
                w.sleep_energy += sleep_power * dt;
                *energy_total += sleep_power * dt;
            }
        }
        *now = to;
    };

    loop {
        let n = heap.len();
        let next_departure = heap
            .peek()
            .map(|tag: &Tag| now + (tag.finish - virtual_work).max(0.0) * n as f64 / rate);
        match next_departure {
            Some(t_dep) if t_dep < next_arrival => {
                advance(
                    &mut now,
                    t_dep,
                    n,
                    &mut virtual_work,
                    current,
                    &mut windows,
                    &mut energy_total,
                );
                let tag = heap.pop().expect("peeked");
                let flow = &flows[tag.flow];
                if let Some(b) = flow.batch {
                    windows[b].delay_sum += now - flow.arrival;
                    windows[b].delay_count += 1;
                }
                completed += 1;
                if heap.is_empty() {
                    virtual_work = 0.0;
                }
                emit(&mut trace, now, "departure", heap.len(), energy_total);
            }
            _ => {
                advance(
                    &mut now,
                    next_arrival,
                    n,
                    &mut virtual_work,
                    current,
                    &mut windows,
                    &mut energy_total,
                );
                if index == cfg.n_arrivals {
                    emit(&mut trace, now, "end", n, energy_total);
                    break;
                }
                let batch = batch_of(index);
                current = batch;
                if heap.is_empty() {
                    if let Some(b) = batch {
                        windows[b].wakeups += 1;
                        energy_total += wake_energy;
                    }
                    emit(&mut trace, now, "wake", 0, energy_total);
                }
                let size = sizes.sample(&mut sizes_rng);
                heap.push(Tag {
                    finish: virtual_work + size,
                    flow: flows.len(),
                });
                flows.push(Flow { arrival: now, batch });
                emit(&mut trace, now, "arrival", heap.len(), energy_total);
                index += 1;
                next_arrival = now + interarrival.sample(&mut arrivals_rng);
            }
        }
    }

    let in_system_at_end = heap.len() as u64;
    let completed_by_end = completed;

    // drain the remaining flows so every measured flow has a delay
    while let Some(tag) = heap.peek() {
        let n = heap.len();
        let t_dep = now + (tag.finish - virtual_work).max(0.0) * n as f64 / rate;
        virtual_work += rate * (t_dep - now) / n as f64;
        now = t_dep;
        let tag = heap.pop().expect("peeked");
        let flow = &flows[tag.flow];
        if let Some(b) = flow.batch {
            windows[b].delay_sum += now - flow.arrival;
            windows[b].delay_count += 1;
        }
    }
    if let Some(w) = trace.as_mut() {
        let _ = w.flush();
    }

    let mut ledger = EnergyLedger {
        total: energy_total,
        ..Default::default()
    };
    let mut queue = Vec::with_capacity(cfg.batches);
    let mut delay = Vec::with_capacity(cfg.batches);
    let mut power = Vec::with_capacity(cfg.batches);
    let mut busy = Vec::with_capacity(cfg.batches);
    let mut cycle = Vec::with_capacity(cfg.batches);
    let mut cycles_observed = 0;
    let mut measured_time = 0.0;
    for w in &windows {
        let duration = w.busy_time + w.sleep_time;
        let switching = wake_energy * w.wakeups as f64;
        ledger.busy += w.busy_energy;
        ledger.sleep += w.sleep_energy;
        ledger.switching += switching;
        cycles_observed += w.wakeups;
        measured_time += duration;
        queue.push(w.queue_area / duration);
        delay.push(w.delay_sum / w.delay_count.max(1) as f64);
        power.push((w.busy_energy + w.sleep_energy + switching) / duration);
        busy.push(w.busy_time / duration);
        cycle.push(duration / w.wakeups.max(1) as f64);
    }

    Ok(SimStats {
        mean_queue_len: Estimate::from_batches(&queue),
        mean_delay: Estimate::from_batches(&delay),
        mean_power: Estimate::from_batches(&power),
        busy_fraction: Estimate::from_batches(&busy),
        mean_cycle: Estimate::from_batches(&cycle),
        cycles_observed,
        admitted: cfg.n_arrivals,
        completed: completed_by_end,
        in_system_at_end,
        measured_time,
        energy: ledger,
    })
}

/// One analytic-vs-simulated comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricCheck {
    pub name: &'static str,
    pub analytic: f64,
    pub simulated: f64,
    pub halfwidth: f64,
    pub within: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub confidence: f64,
    pub stats: SimStats,
    pub checks: Vec<MetricCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.within)
    }

    pub fn flagged(&self) -> impl Iterator<Item = &MetricCheck> {
        self.checks.iter().filter(|c| !c.within)
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "metric,analytic,simulated,halfwidth_{},status", self.confidence)?;
        for c in &self.checks {
            writeln!(
                f,
                "{},{},{},{},{}",
                c.name,
                c.analytic,
                c.simulated,
                c.halfwidth,
                if c.within { "ok" } else { "FLAGGED" }
            )?;
        }
        Ok(())
    }
}

pub const VALIDATION_CONFIDENCE: f64 = 0.99;

/// Simulate `cfg` and check the queueing formulas against the 99% intervals.
pub fn validate_against_analytic(cfg: &SimConfig) -> Result<ValidationReport> {
    let stats = simulate(cfg)?;
    compare_with_analytic(cfg, stats, VALIDATION_CONFIDENCE)
}

pub fn compare_with_analytic(cfg: &SimConfig, stats: SimStats, confidence: f64) -> Result<ValidationReport> {
    let q = queue_metrics(&cfg.traffic, cfg.rate)?;
    let p = average_power(&cfg.profile, &cfg.traffic, cfg.rate)?;
    let check = |name, analytic: f64, est: &Estimate| MetricCheck {
        name,
        analytic,
        simulated: est.mean,
        halfwidth: est.halfwidth(confidence),
        within: est.contains(analytic, confidence),
    };
    let checks = vec![
        check("mean_queue_len", q.mean_queue_len, &stats.mean_queue_len),
        check("mean_delay_s", q.mean_delay, &stats.mean_delay),
        check("avg_power_w", p, &stats.mean_power),
        check("rho", q.rho, &stats.busy_fraction),
        check("mean_cycle_s", q.mean_cycle, &stats.mean_cycle),
    ];
    Ok(ValidationReport {
        confidence,
        stats,
        checks,
    })
}
