use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WeightsError {
    #[error("weight `{0}` must be finite and non-negative")]
    Negative(&'static str),
    #[error("sample_probability must lie in (0, 1], got {0}")]
    SampleProbability(f64),
    #[error("location_group_factor must be >= 1, got {0}")]
    GroupFactor(f64),
    #[error("best_k must be >= 1")]
    BestK,
}

/// How the next unscheduled activity is picked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivityStrategy {
    /// Uniform draw, no scoring.
    Random,
    /// Worst activity of a random subset drawn with `sample_probability`.
    #[default]
    Sampled,
    /// Worst activity among all unscheduled ones.
    Full,
}

/// How the randomized group of good locations is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocationRule {
    /// Every candidate scoring at most `location_group_factor` × the best.
    #[default]
    Threshold,
    /// The `best_k` lowest-scoring candidates.
    BestK,
}

/// Weights of the activity value `−w1·removed − w2·deps + w3·places + w4·free_places`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActivityWeights {
    pub removed: f64,
    pub dependencies: f64,
    pub places: f64,
    pub places_no_conflict: f64,
}

impl Default for ActivityWeights {
    fn default() -> Self {
        Self {
            removed: 3.0,
            dependencies: 1.0,
            places: 0.05,
            places_no_conflict: 0.2,
        }
    }
}

impl ActivityWeights {
    pub fn scaled(self, k: f64) -> Self {
        Self {
            removed: self.removed * k,
            dependencies: self.dependencies * k,
            places: self.places * k,
            places_no_conflict: self.places_no_conflict * k,
        }
    }

    pub const ZERO: Self = Self {
        removed: 0.0,
        dependencies: 0.0,
        places: 0.0,
        places_no_conflict: 0.0,
    };
}

/// Weights of the six location criteria; every term is non-negative so a
/// location value is never below zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocationWeights {
    pub conflicts: f64,
    pub repeat_evictions: f64,
    pub unreschedulable: f64,
    pub soft: f64,
    pub distance: f64,
    pub user: f64,
}

impl Default for LocationWeights {
    fn default() -> Self {
        Self {
            conflicts: 10.0,
            repeat_evictions: 3.0,
            unreschedulable: 6.0,
            soft: 1.0,
            distance: 0.1,
            user: 1.0,
        }
    }
}

impl LocationWeights {
    pub fn scaled(self, k: f64) -> Self {
        Self {
            conflicts: self.conflicts * k,
            repeat_evictions: self.repeat_evictions * k,
            unreschedulable: self.unreschedulable * k,
            soft: self.soft * k,
            distance: self.distance * k,
            user: self.user * k,
        }
    }

    pub const ONES: Self = Self {
        conflicts: 1.0,
        repeat_evictions: 1.0,
        unreschedulable: 1.0,
        soft: 1.0,
        distance: 1.0,
        user: 1.0,
    };

    pub const ZERO: Self = Self {
        conflicts: 0.0,
        repeat_evictions: 0.0,
        unreschedulable: 0.0,
        soft: 0.0,
        distance: 0.0,
        user: 0.0,
    };
}

/// Every tunable of the solver. Serialized as the weights config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeuristicWeights {
    pub activity: ActivityWeights,
    pub location: LocationWeights,
    pub strategy: ActivityStrategy,
    pub sample_probability: f64,
    pub location_rule: LocationRule,
    pub location_group_factor: f64,
    pub best_k: usize,
    pub tabu_length: usize,
    pub max_iterations: u64,
    /// Above this many candidates the unreschedulable-conflict term is only
    /// computed for the candidates with the fewest conflicts.
    pub prefilter_threshold: usize,
}

impl Default for HeuristicWeights {
    fn default() -> Self {
        Self {
            activity: ActivityWeights::default(),
            location: LocationWeights::default(),
            strategy: ActivityStrategy::Sampled,
            sample_probability: 0.2,
            location_rule: LocationRule::Threshold,
            location_group_factor: 2.0,
            best_k: 5,
            tabu_length: 20,
            max_iterations: 20_000,
            prefilter_threshold: 200,
        }
    }
}

impl HeuristicWeights {
    pub fn with_strategy(mut self, strategy: ActivityStrategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: u64) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    /// Probability with which an activity enters the candidate pool.
    pub fn effective_sample_probability(&self) -> f64 {
        match self.strategy {
            ActivityStrategy::Full => 1.0,
            _ => self.sample_probability,
        }
    }

    pub fn validate(&self) -> Result<(), WeightsError> {
        let a = &self.activity;
        let l = &self.location;
        let named = [
            ("activity.removed", a.removed),
            ("activity.dependencies", a.dependencies),
            ("activity.places", a.places),
            ("activity.places_no_conflict", a.places_no_conflict),
            ("location.conflicts", l.conflicts),
            ("location.repeat_evictions", l.repeat_evictions),
            ("location.unreschedulable", l.unreschedulable),
            ("location.soft", l.soft),
            ("location.distance", l.distance),
            ("location.user", l.user),
        ];
        for (name, w) in named {
            if !(w.is_finite() && w >= 0.0) {
                return Err(WeightsError::Negative(name));
            }
        }
        let p = self.sample_probability;
        if !(p > 0.0 && p <= 1.0) {
            return Err(WeightsError::SampleProbability(p));
        }
        let g = self.location_group_factor;
        if !(g.is_finite() && g >= 1.0) {
            return Err(WeightsError::GroupFactor(g));
        }
        if self.best_k == 0 {
            return Err(WeightsError::BestK);
        }
        Ok(())
    }
}
