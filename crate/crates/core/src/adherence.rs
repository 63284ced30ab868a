//! Online point estimate of the adherence level θ.
//!
//! The estimate after `n` informative observations is the sample mean of the
//! indicators `Y = 1[implemented action == recommendation]`. The recursion
//! `θ_{n+1} = (θ_n·n + Y)/(n + 1)` is evaluated on the integer sufficient
//! statistic (number of adherences), so `θ̂·n` is always exactly the count.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const DEFAULT_PRIOR: f64 = 0.5;

/// What one implemented action reveals about adherence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdherenceObservation {
    /// The recommendation was implemented and differed from the baseline.
    Adhered,
    /// The baseline was implemented and differed from the recommendation.
    Deviated,
    /// Recommendation and baseline coincide, so `Y` is not identifiable.
    Uninformative,
}

impl AdherenceObservation {
    /// `Some(1)`, `Some(0)` or `None`.
    pub fn indicator(self) -> Option<u8> {
        match self {
            AdherenceObservation::Adhered => Some(1),
            AdherenceObservation::Deviated => Some(0),
            AdherenceObservation::Uninformative => None,
        }
    }

    pub fn is_informative(self) -> bool {
        self != AdherenceObservation::Uninformative
    }
}

/// Classifies an implemented action against the recommendation and baseline.
pub fn classify_action(taken: usize, recommended: usize, baseline: usize) -> Result<AdherenceObservation> {
    if recommended == baseline {
        if taken == recommended {
            return Ok(AdherenceObservation::Uninformative);
        }
    } else if taken == recommended {
        return Ok(AdherenceObservation::Adhered);
    } else if taken == baseline {
        return Ok(AdherenceObservation::Deviated);
    }
    Err(Error::ProtocolViolation {
        taken,
        recommended,
        baseline,
    })
}

/// Running estimate `(θ̂, n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdherenceEstimate {
    adheres: u64,
    n: u64,
    prior: f64,
}

impl Default for AdherenceEstimate {
    fn default() -> Self {
        AdherenceEstimate {
            adheres: 0,
            n: 0,
            prior: DEFAULT_PRIOR,
        }
    }
}

impl AdherenceEstimate {
    /// Fresh estimate reporting `prior` until the first informative sample.
    pub fn with_prior(prior: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&prior) {
            return Err(invalid(format!("adherence prior must lie in [0, 1], got {prior}")));
        }
        Ok(AdherenceEstimate {
            adheres: 0,
            n: 0,
            prior,
        })
    }

    /// Rebuilds an estimate from its sufficient statistic.
    pub fn from_counts(adheres: u64, n: u64, prior: f64) -> Result<Self> {
        if adheres > n {
            return Err(invalid(format!("{adheres} adherences out of only {n} observations")));
        }
        let mut est = Self::with_prior(prior)?;
        est.adheres = adheres;
        est.n = n;
        Ok(est)
    }

    pub fn theta_hat(&self) -> f64 {
        if self.n == 0 {
            self.prior
        } else {
            self.adheres as f64 / self.n as f64
        }
    }

    /// Number of informative observations.
    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn adheres(&self) -> u64 {
        self.adheres
    }

    pub fn prior(&self) -> f64 {
        self.prior
    }

    /// Returns the estimate after one more observation.
    #[must_use]
    pub fn observe(self, obs: AdherenceObservation) -> Self {
        let mut next = self;
        next.record(obs);
        next
    }

    /// In-place form of [`observe`](Self::observe).
    pub fn record(&mut self, obs: AdherenceObservation) {
        match obs {
            AdherenceObservation::Adhered => {
                self.adheres += 1;
                self.n += 1;
            }
            AdherenceObservation::Deviated => self.n += 1,
            AdherenceObservation::Uninformative => {}
        }
    }
}
