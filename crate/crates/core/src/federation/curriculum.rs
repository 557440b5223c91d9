use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Images per class grow linearly over equal-length stages:
/// `N(g) = m·(g − 1) + b` for stage `g` in `1..=stages`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurriculumSchedule {
    pub m: usize,
    pub b: usize,
    pub stages: usize,
    pub total_rounds: usize,
}

impl CurriculumSchedule {
    pub fn new(m: usize, b: usize, stages: usize, total_rounds: usize) -> Result<Self> {
        let s = Self {
            m,
            b,
            stages,
            total_rounds,
        };
        s.validate()?;
        Ok(s)
    }

    /// A schedule that never changes the per-class count.
    pub fn fixed(ipc: usize, total_rounds: usize) -> Result<Self> {
        Self::new(0, ipc, 1, total_rounds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.b == 0 {
            return Err(Error::invalid("curriculum b must be positive"));
        }
        if self.stages == 0 || self.total_rounds == 0 {
            return Err(Error::invalid("curriculum needs at least one stage and one round"));
        }
        if !self.total_rounds.is_multiple_of(self.stages) {
            return Err(Error::invalid(format!(
                "{} stages do not divide {} rounds evenly",
                self.stages, self.total_rounds
            )));
        }
        Ok(())
    }

    pub fn rounds_per_stage(&self) -> usize {
        self.total_rounds / self.stages
    }

    pub fn curriculum_ipc(&self, g: usize) -> Result<usize> {
        if g == 0 || g > self.stages {
            return Err(Error::invalid(format!("stage {g} outside 1..={}", self.stages)));
        }
        Ok(self.m * (g - 1) + self.b)
    }

    /// Stage of the 1-based round `r`.
    pub fn stage_of(&self, r: usize) -> Result<usize> {
        if r == 0 || r > self.total_rounds {
            return Err(Error::invalid(format!("round {r} outside 1..={}", self.total_rounds)));
        }
        Ok((r - 1) / self.rounds_per_stage() + 1)
    }

    pub fn ipc_for_round(&self, r: usize) -> Result<usize> {
        self.curriculum_ipc(self.stage_of(r)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_growth() {
        let s = CurriculumSchedule::new(10, 10, 4, 20).unwrap();
        let got: Vec<usize> = (1..=4).map(|g| s.curriculum_ipc(g).unwrap()).collect();
        assert_eq!(got, [10, 20, 30, 40]);
        assert_eq!(s.ipc_for_round(5).unwrap(), 10);
        assert_eq!(s.ipc_for_round(6).unwrap(), 20);
        assert_eq!(s.ipc_for_round(20).unwrap(), 40);
        assert_eq!(CurriculumSchedule::new(5, 5, 4, 8).unwrap().curriculum_ipc(3).unwrap(), 15);
    }

    #[test]
    fn zero_increment_is_constant() {
        let s = CurriculumSchedule::new(0, 7, 4, 8).unwrap();
        assert!((1..=4).all(|g| s.curriculum_ipc(g).unwrap() == 7));
    }

    #[test]
    fn invalid_schedules() {
        assert!(CurriculumSchedule::new(1, 1, 3, 8).is_err());
        assert!(CurriculumSchedule::new(1, 0, 4, 8).is_err());
        let s = CurriculumSchedule::new(1, 1, 4, 8).unwrap();
        assert!(s.curriculum_ipc(0).is_err());
        assert!(s.curriculum_ipc(5).is_err());
        assert!(s.stage_of(9).is_err());
    }
}
