//! Event-resolved paths shared by both simulators.

use std::fmt::{self, Display};
use std::io::Write;

use crate::error::Result;

/// Which transition produced an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelRef {
    Init,
    Reaction(usize),
    Burst(usize),
}

impl Display for ChannelRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelRef::Init => f.write_str("init"),
            ChannelRef::Reaction(k) => write!(f, "reaction:{k}"),
            ChannelRef::Burst(k) => write!(f, "burst:{k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Completed,
    /// The event cap was reached before the horizon.
    GuardTripped,
}

impl Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Completed => "completed",
            Status::GuardTripped => "guard_tripped",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event<S> {
    pub time: f64,
    pub channel: ChannelRef,
    pub displacement: Vec<S>,
    /// State right after the jump.
    pub state: Vec<S>,
}

/// A recorded path. Chain paths use `S = i64` (copy numbers), limit paths `S = f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S> {
    pub initial: Vec<S>,
    pub events: Vec<Event<S>>,
    pub horizon: f64,
    pub status: Status,
}

impl<S: Copy> Trajectory<S> {
    /// Number of jumps at or before `t`.
    pub fn count_until(&self, t: f64) -> usize {
        self.events.partition_point(|e| e.time <= t)
    }

    /// Post-jump state of the last event at or before `t`, and its time.
    pub fn last_event_before(&self, t: f64) -> (f64, &[S]) {
        match self.count_until(t) {
            0 => (0.0, &self.initial),
            k => (self.events[k - 1].time, &self.events[k - 1].state),
        }
    }
}

impl<S: Copy + Display> Trajectory<S> {
    /// CSV with columns `t,channel[,segment],displacement_i..,state_i..`; row 0 is the initial state.
    pub fn write_csv<W: Write>(&self, out: &mut W, with_segment: bool) -> Result<()> {
        let d = self.initial.len();
        write!(out, "t,channel")?;
        if with_segment {
            write!(out, ",segment")?;
        }
        for i in 0..d {
            write!(out, ",displacement_{i}")?;
        }
        for i in 0..d {
            write!(out, ",state_{i}")?;
        }
        writeln!(out)?;
        write!(out, "0,init")?;
        if with_segment {
            write!(out, ",0")?;
        }
        for _ in 0..d {
            write!(out, ",0")?;
        }
        for s in &self.initial {
            write!(out, ",{s}")?;
        }
        writeln!(out)?;
        for (k, e) in self.events.iter().enumerate() {
            write!(out, "{},{}", e.time, e.channel)?;
            if with_segment {
                write!(out, ",{}", k + 1)?;
            }
            for z in &e.displacement {
                write!(out, ",{z}")?;
            }
            for s in &e.state {
                write!(out, ",{s}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Streaming consumer of a simulated path, so long runs need not store every event.
pub trait PathObserver<S> {
    fn start(&mut self, _initial: &[S]) {}
    fn event(&mut self, time: f64, channel: ChannelRef, displacement: &[S], state: &[S]);
    fn finish(&mut self, _horizon: f64, _status: Status) {}
}

/// Observer that keeps everything.
#[derive(Debug, Default)]
pub struct Recorder<S> {
    initial: Vec<S>,
    events: Vec<Event<S>>,
}

impl<S: Copy> Recorder<S> {
    pub fn new() -> Self {
        Self {
            initial: Vec::new(),
            events: Vec::new(),
        }
    }

    pub fn into_trajectory(self, horizon: f64, status: Status) -> Trajectory<S> {
        Trajectory {
            initial: self.initial,
            events: self.events,
            horizon,
            status,
        }
    }
}

impl<S: Copy> PathObserver<S> for Recorder<S> {
    fn start(&mut self, initial: &[S]) {
        self.initial = initial.to_vec();
    }

    fn event(&mut self, time: f64, channel: ChannelRef, displacement: &[S], state: &[S]) {
        self.events.push(Event {
            time,
            channel,
            displacement: displacement.to_vec(),
            state: state.to_vec(),
        });
    }
}

/// Observer that only counts events.
#[derive(Debug, Default, Clone, Copy)]
pub struct EventCounter(pub usize);

impl<S> PathObserver<S> for EventCounter {
    fn event(&mut self, _: f64, _: ChannelRef, _: &[S], _: &[S]) {
        self.0 += 1;
    }
}

/// Observer recording a piecewise-constant path at fixed, nondecreasing times.
#[derive(Debug, Clone)]
pub struct LatticeGridSampler {
    times: Vec<f64>,
    next: usize,
    current: Vec<i64>,
    values: Vec<i64>,
}

impl LatticeGridSampler {
    pub fn new(times: Vec<f64>) -> Self {
        Self {
            times,
            next: 0,
            current: Vec::new(),
            values: Vec::new(),
        }
    }

    fn record_before(&mut self, until: f64, inclusive: bool) {
        while self.next < self.times.len() {
            let g = self.times[self.next];
            if g > until || (!inclusive && g == until) {
                break;
            }
            self.values.extend_from_slice(&self.current);
            self.next += 1;
        }
    }

    /// States at the grid times, `dim` values per time.
    pub fn into_values(self) -> Vec<i64> {
        self.values
    }
}

impl PathObserver<i64> for LatticeGridSampler {
    fn start(&mut self, initial: &[i64]) {
        self.current = initial.to_vec();
    }

    fn event(&mut self, time: f64, _: ChannelRef, _: &[i64], state: &[i64]) {
        self.record_before(time, false);
        self.current.copy_from_slice(state);
    }

    fn finish(&mut self, horizon: f64, status: Status) {
        if status == Status::Completed {
            self.record_before(horizon, true);
        }
    }
}
