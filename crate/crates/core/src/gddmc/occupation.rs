use crate::distribution::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::trajectory::{ChannelRef, PathObserver, Status, Trajectory};

/// Time spent in each copy number of one coordinate after a burn-in.
///
/// Works as a [`PathObserver`], so occupation measures of very long paths
/// never store the path.
#[derive(Debug, Clone)]
pub struct OccupationAccumulator {
    burn_in: f64,
    coord: usize,
    last_time: f64,
    current: usize,
    time_in: Vec<f64>,
    end: f64,
    status: Option<Status>,
}

impl OccupationAccumulator {
    pub fn new(burn_in: f64) -> Self {
        Self::for_coordinate(burn_in, 0)
    }

    /// Marginal occupation of coordinate `coord`.
    pub fn for_coordinate(burn_in: f64, coord: usize) -> Self {
        Self {
            burn_in,
            coord,
            last_time: 0.0,
            current: 0,
            time_in: Vec::new(),
            end: 0.0,
            status: None,
        }
    }

    fn credit(&mut self, until: f64) {
        let from = self.last_time.max(self.burn_in);
        if until > from {
            if self.current >= self.time_in.len() {
                self.time_in.resize(self.current + 1, 0.0);
            }
            self.time_in[self.current] += until - from;
        }
        self.last_time = until;
    }

    /// Normalized occupation measure on `{n / V}`.
    pub fn into_distribution(self, scale: f64) -> Result<DiscreteDistribution> {
        match self.status {
            Some(Status::Completed) => {}
            Some(Status::GuardTripped) => {
                return Err(Error::invalid("occupation measure needs a completed trajectory"))
            }
            None => return Err(Error::invalid("trajectory was never finished")),
        }
        if self.burn_in >= self.end {
            return Err(Error::EmptyWindow {
                burn_in: self.burn_in,
                end: self.end,
            });
        }
        let first = self.time_in.iter().position(|&w| w > 0.0).unwrap_or(0);
        let last = self.time_in.iter().rposition(|&w| w > 0.0).unwrap_or(0);
        DiscreteDistribution::lattice(scale, first, self.time_in[first..=last].to_vec())
    }
}

impl PathObserver<i64> for OccupationAccumulator {
    fn start(&mut self, initial: &[i64]) {
        self.current = initial[self.coord] as usize;
        self.last_time = 0.0;
    }

    fn event(&mut self, time: f64, _: ChannelRef, _: &[i64], state: &[i64]) {
        self.credit(time);
        self.current = state[self.coord] as usize;
    }

    fn finish(&mut self, horizon: f64, status: Status) {
        if status == Status::Completed {
            self.credit(horizon);
        }
        self.end = horizon;
        self.status = Some(status);
    }
}

/// Occupation measure of a recorded one-dimensional chain path after `burn_in`.
pub fn occupation_pmf(traj: &Trajectory<i64>, scale: f64, burn_in: f64) -> Result<DiscreteDistribution> {
    if traj.initial.len() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: traj.initial.len(),
        });
    }
    if burn_in >= traj.horizon {
        return Err(Error::EmptyWindow {
            burn_in,
            end: traj.horizon,
        });
    }
    let mut acc = OccupationAccumulator::new(burn_in);
    acc.start(&traj.initial);
    for e in &traj.events {
        acc.event(e.time, e.channel, &e.displacement, &e.state);
    }
    acc.finish(traj.horizon, traj.status);
    acc.into_distribution(scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::Event;

    #[test]
    fn point_mass_for_empty_path() {
        let t = Trajectory {
            initial: vec![4],
            events: vec![],
            horizon: 3.0,
            status: Status::Completed,
        };
        let d = occupation_pmf(&t, 10.0, 1.0).unwrap();
        assert_eq!(d.support(), &[0.4]);
        assert_eq!(d.weights(), &[1.0]);
    }

    #[test]
    fn holding_times_weight_the_states() {
        let t = Trajectory {
            initial: vec![0],
            events: vec![Event {
                time: 1.0,
                channel: ChannelRef::Burst(0),
                displacement: vec![1],
                state: vec![1],
            }],
            horizon: 4.0,
            status: Status::Completed,
        };
        let d = occupation_pmf(&t, 1.0, 0.0).unwrap();
        assert_eq!(d.weights(), &[0.25, 0.75]);
        assert!(matches!(occupation_pmf(&t, 1.0, 4.0), Err(Error::EmptyWindow { .. })));
    }
}
