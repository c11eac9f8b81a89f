use crate::model::{shift_after_removal, ActivityIdx, Location};
use serde::Serialize;
use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TabuStatus {
    Free,
    Once,
    Twice,
}

/// FIFO of recent (activity, location) placements.
#[derive(Debug, Clone, PartialEq)]
pub struct TabuList {
    entries: VecDeque<(ActivityIdx, Location)>,
    capacity: usize,
}

impl TabuList {
    pub fn new(capacity: usize) -> Self {
        Self {
            entries: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn count(&self, a: ActivityIdx, loc: &Location) -> usize {
        self.entries
            .iter()
            .filter(|(x, l)| *x == a && l.start == loc.start && l.selection == loc.selection)
            .count()
    }

    pub fn status(&self, a: ActivityIdx, loc: &Location) -> TabuStatus {
        match self.count(a, loc) {
            0 => TabuStatus::Free,
            1 => TabuStatus::Once,
            _ => TabuStatus::Twice,
        }
    }

    /// Records a placement, dropping the oldest pair at capacity.
    pub fn push(&mut self, a: ActivityIdx, loc: Location) {
        if self.capacity == 0 {
            return;
        }
        debug_assert!(self.count(a, &loc) < 2, "third placement of a tabu pair");
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back((a, loc));
    }

    pub fn set_capacity(&mut self, capacity: usize) {
        self.capacity = capacity;
        while self.entries.len() > capacity {
            self.entries.pop_front();
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = &(ActivityIdx, Location)> {
        self.entries.iter()
    }

    pub(crate) fn remove_activity(&mut self, a: ActivityIdx) {
        self.entries.retain(|(x, _)| *x != a);
        for (x, _) in self.entries.iter_mut() {
            *x = shift_after_removal(*x, a);
        }
    }
}
