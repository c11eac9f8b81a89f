//! Random school-timetabling instances that are feasible by construction.
//!
//! A complete collision-free witness timetable is packed first; the problem
//! is then read off the witness, so the witness certifies feasibility.
//! Dependencies and soft marks are only added where the witness already
//! satisfies them.

use crate::model::{
    Activity, ActivityIdx, Dependency, DependencyKind, GroupMode, Location, Problem, Resource,
    ResourceGroup, ResourceIdx, Schedule, SlotMark, TimeGrid, TimePreference,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("invalid generator parameters: {0}")]
    Invalid(String),
    #[error("could not pack {target} class-slots after {attempts} attempts")]
    UnattainableFill { target: usize, attempts: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenParams {
    pub n_teachers: usize,
    pub n_classes: usize,
    pub n_rooms: usize,
    pub days: usize,
    pub slots_per_day: usize,
    /// Share of class × slot capacity covered by activities, in percent.
    pub fill_percent: f64,
    pub duration_min: usize,
    pub duration_max: usize,
    /// Expected dependencies per activity.
    pub dependency_density: f64,
    /// Probability that a slot left free by the witness is marked soft.
    pub soft_density: f64,
    /// Up to this many extra rooms are offered besides the witness room.
    pub room_alternatives: usize,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            n_teachers: 20,
            n_classes: 20,
            n_rooms: 20,
            days: 5,
            slots_per_day: 10,
            fill_percent: 50.0,
            duration_min: 1,
            duration_max: 3,
            dependency_density: 0.1,
            soft_density: 0.05,
            room_alternatives: 2,
            seed: 0,
        }
    }
}

impl GenParams {
    pub fn with_fill(mut self, fill_percent: f64) -> Self {
        self.fill_percent = fill_percent;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::Invalid(m.into()));
        if self.n_teachers == 0 || self.n_classes == 0 || self.n_rooms == 0 {
            return bad("resource counts must be positive");
        }
        if self.days == 0 || self.slots_per_day == 0 {
            return bad("grid must be non-empty");
        }
        if !(self.fill_percent > 0.0 && self.fill_percent <= 100.0) {
            return bad("fill_percent must lie in (0, 100]");
        }
        if self.duration_min == 0 || self.duration_min > self.duration_max {
            return bad("duration range must satisfy 1 <= min <= max");
        }
        if self.duration_min > self.slots_per_day {
            return bad("minimum duration exceeds a day");
        }
        for (name, d) in [
            ("dependency_density", self.dependency_density),
            ("soft_density", self.soft_density),
        ] {
            if !(0.0..1.0).contains(&d) {
                return Err(GenError::Invalid(format!("{name} must lie in [0, 1)")));
            }
        }
        Ok(())
    }

    fn total_slots(&self) -> usize {
        self.days * self.slots_per_day
    }

    /// Class-slots the witness must cover.
    pub fn target_load(&self) -> usize {
        let cap = self.n_classes * self.total_slots();
        ((self.fill_percent / 100.0) * cap as f64).round().max(1.0) as usize
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedInstance {
    pub problem: Problem,
    pub witness: Schedule,
}

struct Packed {
    teacher: usize,
    class: usize,
    room: usize,
    start: usize,
    duration: usize,
}

/// Busy table for one resource family.
struct Busy {
    cells: Vec<bool>,
    total: usize,
}

impl Busy {
    fn new(count: usize, total: usize) -> Self {
        Self {
            cells: vec![false; count * total],
            total,
        }
    }

    fn free(&self, r: usize, start: usize, duration: usize) -> bool {
        (start..start + duration).all(|t| !self.cells[r * self.total + t])
    }

    fn take(&mut self, r: usize, start: usize, duration: usize) {
        for t in start..start + duration {
            self.cells[r * self.total + t] = true;
        }
    }

    fn is_busy(&self, r: usize, t: usize) -> bool {
        self.cells[r * self.total + t]
    }
}

fn pack(params: &GenParams, rng: &mut ChaCha8Rng) -> Option<Vec<Packed>> {
    let total = params.total_slots();
    let spd = params.slots_per_day;
    let target = params.target_load();
    let mut teachers = Busy::new(params.n_teachers, total);
    let mut classes = Busy::new(params.n_classes, total);
    let mut rooms = Busy::new(params.n_rooms, total);
    let mut out = Vec::new();
    let mut load = 0;
    let hi_cap = params.duration_max.min(spd);

    while load < target {
        let remaining = target - load;
        if remaining < params.duration_min {
            break;
        }
        let hi = hi_cap.min(remaining);
        let wanted = rng.gen_range(params.duration_min..=hi);
        let mut placed = false;
        'duration: for duration in (params.duration_min..=wanted).rev() {
            let mut class_order: Vec<usize> = (0..params.n_classes).collect();
            class_order.shuffle(rng);
            for class in class_order {
                // Starts that keep the activity inside one day.
                let mut starts: Vec<usize> = (0..total)
                    .filter(|s| s % spd + duration <= spd && classes.free(class, *s, duration))
                    .collect();
                starts.shuffle(rng);
                for start in starts {
                    let free_t: Vec<usize> = (0..params.n_teachers)
                        .filter(|t| teachers.free(*t, start, duration))
                        .collect();
                    let free_r: Vec<usize> = (0..params.n_rooms)
                        .filter(|r| rooms.free(*r, start, duration))
                        .collect();
                    let (Some(&teacher), Some(&room)) = (free_t.choose(rng), free_r.choose(rng))
                    else {
                        continue;
                    };
                    teachers.take(teacher, start, duration);
                    classes.take(class, start, duration);
                    rooms.take(room, start, duration);
                    out.push(Packed {
                        teacher,
                        class,
                        room,
                        start,
                        duration,
                    });
                    load += duration;
                    placed = true;
                    break 'duration;
                }
            }
        }
        if !placed {
            return None;
        }
    }
    Some(out)
}

/// Builds a feasible instance and its witness schedule.
pub fn generate(params: &GenParams) -> Result<GeneratedInstance, GenError> {
    params.validate()?;
    const ATTEMPTS: u32 = 5;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let packed =
        (0..ATTEMPTS)
            .find_map(|_| pack(params, &mut rng))
            .ok_or(GenError::UnattainableFill {
                target: params.target_load(),
                attempts: ATTEMPTS,
            })?;
    Ok(build(params, packed, &mut rng))
}

fn build(params: &GenParams, packed: Vec<Packed>, rng: &mut ChaCha8Rng) -> GeneratedInstance {
    let total = params.total_slots();
    let grid = TimeGrid::new(params.days, params.slots_per_day).expect("validated grid");
    let t_idx = |t: usize| ResourceIdx(t);
    let c_idx = |c: usize| ResourceIdx(params.n_teachers + c);
    let r_idx = |r: usize| ResourceIdx(params.n_teachers + params.n_classes + r);

    // Resource busy tables of the witness, for soft-mark placement.
    let n_res = params.n_teachers + params.n_classes + params.n_rooms;
    let mut busy = Busy::new(n_res, total);
    for p in &packed {
        for r in [t_idx(p.teacher), c_idx(p.class), r_idx(p.room)] {
            busy.take(r.0, p.start, p.duration);
        }
    }

    let mut resources = Vec::with_capacity(n_res);
    for (prefix, kind, count) in [
        ("t", "teacher", params.n_teachers),
        ("c", "class", params.n_classes),
        ("r", "room", params.n_rooms),
    ] {
        for i in 0..count {
            resources.push(Resource {
                id: format!("{prefix}{}", i + 1),
                name: format!("{kind} {}", i + 1),
                kind: kind.into(),
                prefs: TimePreference::neutral(total),
            });
        }
    }
    for (r, res) in resources.iter_mut().enumerate() {
        for t in 0..total {
            if !busy.is_busy(r, t) && rng.gen_bool(params.soft_density) {
                res.prefs.set(t, SlotMark::SoftDiscouraged);
            }
        }
    }

    let mut activities = Vec::with_capacity(packed.len());
    let mut witness_locs = Vec::with_capacity(packed.len());
    for (k, p) in packed.iter().enumerate() {
        let extra = rng.gen_range(0..=params.room_alternatives.min(params.n_rooms - 1));
        let mut others: Vec<usize> = (0..params.n_rooms).filter(|r| *r != p.room).collect();
        others.shuffle(rng);
        let mut rooms: Vec<usize> = others.into_iter().take(extra).collect();
        rooms.push(p.room);
        rooms.sort_unstable();
        let mut prefs = TimePreference::neutral(total);
        for t in 0..total {
            let inside = t >= p.start && t < p.start + p.duration;
            if !inside && rng.gen_bool(params.soft_density) {
                prefs.set(t, SlotMark::SoftDiscouraged);
            }
        }
        activities.push(Activity {
            id: format!("a{}", k + 1),
            name: format!("c{}/t{}", p.class + 1, p.teacher + 1),
            duration: p.duration,
            prefs,
            groups: vec![
                ResourceGroup {
                    mode: GroupMode::Conjunctive,
                    members: vec![t_idx(p.teacher), c_idx(p.class)],
                },
                ResourceGroup {
                    mode: GroupMode::Disjunctive,
                    members: rooms.iter().map(|r| r_idx(*r)).collect(),
                },
            ],
            user_prefs: Vec::new(),
        });
        witness_locs.push(Location::new(
            p.start,
            vec![t_idx(p.teacher), c_idx(p.class), r_idx(p.room)],
        ));
    }

    let dependencies = draw_dependencies(params, &packed, rng);
    let problem = Problem::new(grid, resources, activities, dependencies)
        .expect("generated problem is valid");
    let mut witness = Schedule::new(&problem);
    for (k, loc) in witness_locs.into_iter().enumerate() {
        witness.assign(&problem, ActivityIdx(k), loc);
    }
    GeneratedInstance { problem, witness }
}

fn draw_dependencies(
    params: &GenParams,
    packed: &[Packed],
    rng: &mut ChaCha8Rng,
) -> Vec<Dependency> {
    let mut deps: Vec<Dependency> = Vec::new();
    for (a, pa) in packed.iter().enumerate() {
        if !rng.gen_bool(params.dependency_density) {
            continue;
        }
        let kind = [
            DependencyKind::Before,
            DependencyKind::Meets,
            DependencyKind::Concurrent,
        ][rng.gen_range(0..3)];
        let end_a = pa.start + pa.duration;
        // (first, second) pairs the witness satisfies.
        let mut options: Vec<(usize, usize)> = Vec::new();
        for (b, pb) in packed.iter().enumerate() {
            if b == a {
                continue;
            }
            let end_b = pb.start + pb.duration;
            match kind {
                DependencyKind::Before if pb.class == pa.class => {
                    if end_a <= pb.start {
                        options.push((a, b));
                    } else if end_b <= pa.start {
                        options.push((b, a));
                    }
                }
                DependencyKind::Meets if pb.class == pa.class => {
                    if end_a == pb.start {
                        options.push((a, b));
                    } else if end_b == pa.start {
                        options.push((b, a));
                    }
                }
                // Activities of one class never share a start.
                DependencyKind::Concurrent if pb.start == pa.start => options.push((a, b)),
                _ => {}
            }
        }
        let Some(&(first, second)) = options.choose(rng) else {
            continue;
        };
        let dep = Dependency {
            kind,
            first: ActivityIdx(first),
            second: ActivityIdx(second),
        };
        let duplicate = deps.iter().any(|d| {
            (d.first == dep.first && d.second == dep.second)
                || (d.first == dep.second && d.second == dep.first)
        });
        if !duplicate {
            deps.push(dep);
        }
    }
    deps
}
