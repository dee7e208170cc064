use crate::error::{Error, Result};
use crate::trajectory::{ChannelRef, PathObserver, Status};

use super::FlowEvaluator;

/// Observer recording the (right-continuous) state at fixed times, following
/// the flow between jumps.
#[derive(Debug)]
pub struct GridSampler<'a> {
    eval: FlowEvaluator<'a>,
    times: Vec<f64>,
    next: usize,
    last_time: f64,
    last_state: Vec<f64>,
    values: Vec<f64>,
    error: Option<Error>,
}

impl<'a> GridSampler<'a> {
    /// `times` must be nondecreasing.
    pub fn new(eval: FlowEvaluator<'a>, times: Vec<f64>) -> Self {
        Self {
            eval,
            times,
            next: 0,
            last_time: 0.0,
            last_state: Vec::new(),
            values: Vec::new(),
            error: None,
        }
    }

    fn record_before(&mut self, until: f64, inclusive: bool) {
        let d = self.last_state.len();
        let mut buf = vec![0.0; d];
        while self.next < self.times.len() {
            let g = self.times[self.next];
            if g > until || (!inclusive && g == until) {
                break;
            }
            if let Err(e) = self.eval.flow_into(&self.last_state, g - self.last_time, &mut buf) {
                self.error.get_or_insert(e);
            }
            self.values.extend_from_slice(&buf);
            self.next += 1;
        }
    }

    /// States at the grid times, `dim` values per time, in order.
    pub fn into_values(self) -> Result<Vec<f64>> {
        match self.error {
            Some(e) => Err(e),
            None => Ok(self.values),
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }
}

impl PathObserver<f64> for GridSampler<'_> {
    fn start(&mut self, initial: &[f64]) {
        self.last_state = initial.to_vec();
        self.last_time = 0.0;
    }

    fn event(&mut self, time: f64, _: ChannelRef, _: &[f64], state: &[f64]) {
        self.record_before(time, false);
        self.last_time = time;
        self.last_state.copy_from_slice(state);
    }

    fn finish(&mut self, horizon: f64, status: Status) {
        if status == Status::Completed {
            self.record_before(horizon, true);
        }
    }
}
