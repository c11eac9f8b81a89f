//! Activity and location selection.

use super::state::{SearchError, SolverState};
use super::tabu::TabuStatus;
use super::weights::{ActivityStrategy, LocationRule};
use crate::model::feasibility::{
    conflict_free, fits, for_each_candidate, visit_conflicts, ConflictClass,
};
use crate::model::{soft_violations, ActivityIdx, Location, Problem, ResourceIdx, Schedule};
use rand::Rng;
use serde::Serialize;

/// Inputs of the activity value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ActivityStats {
    pub n_removed: u64,
    pub n_deps: usize,
    pub n_places: usize,
    pub n_places_no_conflict: usize,
}

/// Inputs of the location value.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct LocationStats {
    pub n_conflicts: usize,
    pub n_repeat_evict: usize,
    pub n_conflict_no_resched: usize,
    pub n_soft: usize,
    pub dist_prev: f64,
    pub user_pref: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredLocation {
    pub location: Location,
    pub stats: LocationStats,
    pub score: f64,
    pub tabu: TabuStatus,
}

/// Outcome of [`SolverState::select_location`].
#[derive(Debug, Clone, PartialEq)]
pub struct LocationChoice {
    pub location: Location,
    pub stats: LocationStats,
    pub score: f64,
    /// Candidates before tabu filtering.
    pub candidates: usize,
}

/// Number of admissible locations, and how many of them are conflict-free.
pub(crate) fn count_places(
    problem: &Problem,
    schedule: &Schedule,
    a: ActivityIdx,
) -> (usize, usize) {
    let (mut all, mut free) = (0, 0);
    for_each_candidate(problem, schedule, a, |_, _, class| {
        all += 1;
        if class == ConflictClass::Free {
            free += 1;
        }
    });
    (all, free)
}

/// Whether `c` has at least one hard-feasible location colliding with nothing.
pub(crate) fn has_free_location(problem: &Problem, schedule: &Schedule, c: ActivityIdx) -> bool {
    let sels = problem.selections(c);
    problem
        .fitting(c)
        .iter()
        .any(|&(start, k)| conflict_free(problem, schedule, c, start, &sels[k]))
}

fn conflict_list(
    problem: &Problem,
    schedule: &Schedule,
    a: ActivityIdx,
    start: usize,
    selection: &[ResourceIdx],
) -> Vec<ActivityIdx> {
    let mut out = Vec::new();
    visit_conflicts(problem, schedule, a, start, selection, |b| {
        out.push(b);
        true
    });
    out.sort_unstable();
    out.dedup();
    out
}

/// Count of `conflicts` left without any conflict-free location once `a`
/// sits at `loc` and every conflict is removed. `scratch` must equal the
/// current schedule and is restored before returning.
fn unreschedulable(
    problem: &Problem,
    scratch: &mut Schedule,
    a: ActivityIdx,
    loc: &Location,
    conflicts: &[ActivityIdx],
) -> usize {
    if conflicts.is_empty() {
        return 0;
    }
    let former: Vec<Location> = conflicts
        .iter()
        .map(|c| {
            scratch
                .unassign(problem, *c)
                .expect("conflict is scheduled")
        })
        .collect();
    scratch.assign(problem, a, loc.clone());
    let stuck = conflicts
        .iter()
        .filter(|c| !has_free_location(problem, scratch, **c))
        .count();
    scratch.unassign(problem, a);
    for (c, l) in conflicts.iter().zip(former) {
        scratch.assign(problem, *c, l);
    }
    stuck
}

impl SolverState {
    /// Value of an unscheduled activity; lower means harder to schedule.
    pub fn activity_score(&self, a: ActivityIdx) -> Result<(f64, ActivityStats), SearchError> {
        if !self.is_unscheduled(a) {
            return Err(SearchError::NotUnscheduled(a));
        }
        let (n_places, n_places_no_conflict) = count_places(&self.problem, &self.schedule, a);
        let stats = ActivityStats {
            n_removed: self.history[a.0].n_removed,
            n_deps: self.problem.dependencies_of(a).len(),
            n_places,
            n_places_no_conflict,
        };
        let w = &self.weights.activity;
        let val = -w.removed * stats.n_removed as f64 - w.dependencies * stats.n_deps as f64
            + w.places * stats.n_places as f64
            + w.places_no_conflict * stats.n_places_no_conflict as f64;
        Ok((val, stats))
    }

    /// Picks the next activity to place and, for scored strategies, its value.
    pub fn select_activity(&mut self) -> Result<(ActivityIdx, Option<f64>), SearchError> {
        let n = self.unscheduled.len();
        if n == 0 {
            return Err(SearchError::NothingToSchedule);
        }
        if self.weights.strategy == ActivityStrategy::Random {
            let pick = self.unscheduled[self.rng.gen_range(0..n)];
            return Ok((pick, None));
        }
        let p = self.weights.effective_sample_probability();
        let pool: Vec<ActivityIdx> = if p >= 1.0 {
            self.unscheduled.clone()
        } else {
            let drawn: Vec<ActivityIdx> = self
                .unscheduled
                .clone()
                .into_iter()
                .filter(|_| self.rng.gen_bool(p))
                .collect();
            if drawn.is_empty() {
                vec![self.unscheduled[self.rng.gen_range(0..n)]]
            } else {
                drawn
            }
        };
        let mut best = f64::INFINITY;
        let mut ties = Vec::new();
        for a in pool {
            let (val, _) = self.activity_score(a)?;
            if val < best {
                best = val;
                ties.clear();
                ties.push(a);
            } else if val == best {
                ties.push(a);
            }
        }
        let pick = if ties.len() == 1 {
            ties[0]
        } else {
            ties[self.rng.gen_range(0..ties.len())]
        };
        Ok((pick, Some(best)))
    }

    fn stats_for(
        &self,
        a: ActivityIdx,
        loc: &Location,
        conflicts: &[ActivityIdx],
        n_conflict_no_resched: usize,
    ) -> (f64, LocationStats) {
        let stats = LocationStats {
            n_conflicts: conflicts.len(),
            n_repeat_evict: conflicts
                .iter()
                .filter(|c| self.history[c.0].last_evictor == Some(a))
                .count(),
            n_conflict_no_resched,
            n_soft: soft_violations(&self.problem, a, loc),
            dist_prev: self.history[a.0]
                .last_location
                .as_ref()
                .map_or(0.0, |prev| loc.distance(prev)),
            user_pref: self.problem.activity(a).user_penalty(loc),
        };
        let w = &self.weights.location;
        let val = w.conflicts * stats.n_conflicts as f64
            + w.repeat_evictions * stats.n_repeat_evict as f64
            + w.unreschedulable * stats.n_conflict_no_resched as f64
            + w.soft * stats.n_soft as f64
            + w.distance * stats.dist_prev
            + w.user * stats.user_pref;
        (val, stats)
    }

    /// Value of placing `a` at `loc`; never negative.
    pub fn location_score(
        &self,
        a: ActivityIdx,
        loc: &Location,
    ) -> Result<(f64, LocationStats), SearchError> {
        if !self.is_unscheduled(a) {
            return Err(SearchError::NotUnscheduled(a));
        }
        let valid = self.problem.selections(a).contains(&loc.selection)
            && fits(&self.problem, a, loc.start, &loc.selection);
        let conflicts = conflict_list(&self.problem, &self.schedule, a, loc.start, &loc.selection);
        if !valid || conflicts.iter().any(|c| self.schedule.is_fixed(*c)) {
            return Err(SearchError::NotACandidate(a));
        }
        let mut scratch = self.schedule.clone();
        let stuck = unreschedulable(&self.problem, &mut scratch, a, loc, &conflicts);
        Ok(self.stats_for(a, loc, &conflicts, stuck))
    }

    /// Scores every admissible location of `a`, in enumeration order.
    pub fn score_candidates(&self, a: ActivityIdx) -> Result<Vec<ScoredLocation>, SearchError> {
        if !self.is_unscheduled(a) {
            return Err(SearchError::NotUnscheduled(a));
        }
        let mut raw: Vec<(Location, Vec<ActivityIdx>)> = Vec::new();
        for_each_candidate(&self.problem, &self.schedule, a, |start, sel, class| {
            let conflicts = if class == ConflictClass::Free {
                Vec::new()
            } else {
                conflict_list(&self.problem, &self.schedule, a, start, sel)
            };
            raw.push((Location::new(start, sel.to_vec()), conflicts));
        });

        // Candidates outside the exact set get the upper bound
        // n_conflict_no_resched = n_conflicts.
        let threshold = self.weights.prefilter_threshold;
        let mut exact = vec![true; raw.len()];
        if raw.len() > threshold {
            let mut order: Vec<usize> = (0..raw.len()).collect();
            order.sort_by_key(|&i| raw[i].1.len());
            for &i in &order[threshold..] {
                exact[i] = false;
            }
        }

        let mut scratch = self.schedule.clone();
        Ok(raw
            .into_iter()
            .zip(exact)
            .map(|((loc, conflicts), exact)| {
                let stuck = if exact {
                    unreschedulable(&self.problem, &mut scratch, a, &loc, &conflicts)
                } else {
                    conflicts.len()
                };
                let (score, stats) = self.stats_for(a, &loc, &conflicts, stuck);
                let tabu = self.tabu.status(a, &loc);
                ScoredLocation {
                    location: loc,
                    stats,
                    score,
                    tabu,
                }
            })
            .collect())
    }

    /// Chooses where to put `a`: drop twice-tabu candidates, keep once-tabu
    /// ones only if they are the best, then draw uniformly from the group of
    /// good locations.
    pub fn select_location(&mut self, a: ActivityIdx) -> Result<LocationChoice, SearchError> {
        let scored = self.score_candidates(a)?;
        let candidates = scored.len();
        let mut pool: Vec<ScoredLocation> = scored
            .into_iter()
            .filter(|c| c.tabu != TabuStatus::Twice)
            .collect();
        let min = pool.iter().map(|c| c.score).fold(f64::INFINITY, f64::min);
        pool.retain(|c| c.tabu == TabuStatus::Free || c.score <= min);
        if pool.is_empty() {
            return Err(SearchError::NoLocation(a));
        }
        let group: Vec<usize> = match self.weights.location_rule {
            LocationRule::Threshold => {
                let limit = self.weights.location_group_factor * min;
                (0..pool.len())
                    .filter(|&i| pool[i].score <= limit)
                    .collect()
            }
            LocationRule::BestK => {
                let mut order: Vec<usize> = (0..pool.len()).collect();
                order.sort_by(|&i, &j| pool[i].score.total_cmp(&pool[j].score).then(i.cmp(&j)));
                order.truncate(self.weights.best_k);
                order
            }
        };
        let pick = if group.len() == 1 {
            group[0]
        } else {
            group[self.rng.gen_range(0..group.len())]
        };
        let chosen = pool.swap_remove(pick);
        Ok(LocationChoice {
            location: chosen.location,
            stats: chosen.stats,
            score: chosen.score,
            candidates,
        })
    }
}
