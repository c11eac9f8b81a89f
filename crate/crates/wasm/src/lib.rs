//! In-browser demo: a generated instance solved step by step, with manual
//! placement and detachment. Every method returns JSON text.
//!
//! Build with `wasm-pack build crates/wasm --target web --out-dir www/pkg`.

use serde::Serialize;
use std::sync::atomic::AtomicBool;
use timetable_core::generator::{generate, GenParams};
use timetable_core::io::LocationDoc;
use timetable_core::model::hard_feasible;
use timetable_core::search::HeuristicWeights;
use timetable_core::session::{Edit, Session, SnapshotView, ViewKind};
use timetable_core::{Location, Problem};
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct ResourceRow<'a> {
    id: &'a str,
    kind: &'a str,
}

#[derive(Serialize)]
struct Frame<'a> {
    days: usize,
    slots_per_day: usize,
    resources: Vec<ResourceRow<'a>>,
    durations: Vec<(&'a str, usize)>,
    view: SnapshotView,
}

#[wasm_bindgen]
pub struct Demo {
    session: Session,
}

#[wasm_bindgen]
impl Demo {
    /// Generates an instance with `teachers` teachers, classes and rooms at
    /// `fill` percent load.
    #[wasm_bindgen(constructor)]
    pub fn new(teachers: u32, fill: f64, seed: u32) -> Result<Demo, String> {
        let n = teachers as usize;
        let params = GenParams {
            n_teachers: n,
            n_classes: n,
            n_rooms: n,
            days: 5,
            slots_per_day: 6,
            fill_percent: fill,
            seed: seed as u64,
            ..GenParams::default()
        };
        let inst = generate(&params).map_err(|e| e.to_string())?;
        let session = Session::new(inst.problem, HeuristicWeights::default(), seed as u64)
            .map_err(|e| e.to_string())?;
        Ok(Demo { session })
    }

    /// Current schedule plus the grid layout.
    pub fn snapshot(&self) -> String {
        let problem = self.session.state().problem();
        let frame = Frame {
            days: problem.grid().days(),
            slots_per_day: problem.grid().slots_per_day(),
            resources: problem
                .resources()
                .iter()
                .map(|r| ResourceRow {
                    id: &r.id,
                    kind: &r.kind,
                })
                .collect(),
            durations: problem
                .activities()
                .iter()
                .map(|a| (a.id.as_str(), a.duration))
                .collect(),
            view: self.session.snapshot(ViewKind::Latest),
        };
        serde_json::to_string(&frame).expect("frames serialize")
    }

    /// Runs up to `n` iterations; returns the iteration reports.
    pub fn step(&mut self, n: u32) -> String {
        let stop = AtomicBool::new(false);
        let mut reports = Vec::new();
        self.session.run(Some(n as u64), &stop, |event, _| {
            if let timetable_core::session::SessionEvent::Iteration(r) = event {
                reports.push(r);
            }
        });
        serde_json::to_string(&reports).expect("reports serialize")
    }

    /// Pins `activity` at `start`, using a resource choice that includes
    /// `resource`. Returns the repair report or the rejection.
    pub fn place_and_fix(
        &mut self,
        activity: &str,
        resource: &str,
        start: u32,
    ) -> Result<String, String> {
        let location = self.pick_location(activity, resource, start as usize)?;
        self.edit(Edit::PlaceAndFix {
            activity: activity.to_string(),
            location,
        })
    }

    pub fn detach(&mut self, activity: &str) -> Result<String, String> {
        self.edit(Edit::Detach {
            activity: activity.to_string(),
        })
    }

    pub fn unfix(&mut self, activity: &str) -> Result<String, String> {
        self.edit(Edit::Unfix {
            activity: activity.to_string(),
        })
    }

    pub fn is_complete(&self) -> bool {
        self.session.state().is_complete()
    }
}

impl Demo {
    fn edit(&mut self, edit: Edit) -> Result<String, String> {
        self.session
            .apply(edit)
            .map(|r| serde_json::to_string(&r).expect("reports serialize"))
            .map_err(|e| e.to_string())
    }

    fn problem(&self) -> &Problem {
        self.session.state().problem()
    }

    /// First hard-feasible selection containing `resource`, else the first
    /// one containing it so the engine reports why it fails.
    fn pick_location(
        &self,
        activity: &str,
        resource: &str,
        start: usize,
    ) -> Result<LocationDoc, String> {
        let p = self.problem();
        let a = p
            .activity_by_id(activity)
            .ok_or_else(|| format!("unknown activity `{activity}`"))?;
        let r = p
            .resource_by_id(resource)
            .ok_or_else(|| format!("unknown resource `{resource}`"))?;
        let mut matching = p.selections(a).iter().filter(|s| s.contains(&r));
        let first = matching
            .clone()
            .next()
            .ok_or_else(|| format!("activity `{activity}` never uses `{resource}`"))?;
        let chosen = matching
            .find(|s| hard_feasible(p, a, &Location::new(start, s.to_vec())).unwrap_or(false))
            .unwrap_or(first);
        Ok(LocationDoc::from_location(
            p,
            &Location::new(start, chosen.clone()),
        ))
    }
}
