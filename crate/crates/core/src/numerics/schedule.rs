use crate::error::{Error, Result};

/// Stepwise exponential decay: constant until `start`, then multiplied by
/// `decay` once per full `interval` elapsed, frozen from `end` onward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub initial: f64,
    pub decay: f64,
    pub interval: usize,
    pub start: usize,
    pub end: usize,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self {
            initial: 0.001,
            decay: 0.95,
            interval: 50,
            start: 500,
            end: 800,
        }
    }
}

impl LrSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "decay factor {} outside (0, 1]",
                self.decay
            )));
        }
        if self.start > self.end {
            return Err(Error::InvalidConfig(format!(
                "decay start {} after final epoch {}",
                self.start, self.end
            )));
        }
        if self.interval == 0 {
            return Err(Error::InvalidConfig("decay interval must be positive".into()));
        }
        if !(self.initial > 0.0 && self.initial.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "initial learning rate {}",
                self.initial
            )));
        }
        Ok(())
    }

    pub fn decays_at(&self, epoch: usize) -> u32 {
        if epoch < self.start {
            return 0;
        }
        ((epoch.min(self.end) - self.start) / self.interval) as u32
    }
}

pub fn lr_at_epoch(schedule: &LrSchedule, epoch: usize) -> f64 {
    schedule.initial * schedule.decay.powi(schedule.decays_at(epoch) as i32)
}
