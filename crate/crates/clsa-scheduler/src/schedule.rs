use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::deps::{SetDependencyGraph, SetId};
use crate::error::Result;
use crate::region::Region;
use crate::sets::SetPartition;

/// One executed set. `end_cycle − start_cycle` equals the region area.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledSet {
    pub layer: String,
    pub duplicate: usize,
    pub set_index: usize,
    pub region: Region,
    pub start_cycle: u64,
    pub end_cycle: u64,
}

impl ScheduledSet {
    pub fn cycles(&self) -> u64 {
        self.end_cycle - self.start_cycle
    }
}

/// Start and end cycle of every set, grouped by base node in topological
/// order. Serializes as a flat JSON array.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schedule {
    pub entries: Vec<ScheduledSet>,
}

impl Schedule {
    pub fn makespan(&self) -> u64 {
        self.entries.iter().map(|e| e.end_cycle).max().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Busy intervals per `(layer, duplicate)`, sorted by start.
    pub fn intervals(&self) -> BTreeMap<(&str, usize), Vec<(u64, u64)>> {
        let mut map: BTreeMap<(&str, usize), Vec<(u64, u64)>> = BTreeMap::new();
        for e in &self.entries {
            map.entry((e.layer.as_str(), e.duplicate))
                .or_default()
                .push((e.start_cycle, e.end_cycle));
        }
        for v in map.values_mut() {
            v.sort_unstable();
        }
        map
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedules always serialize")
    }

    fn from_times(partitions: &[SetPartition], start: &[Vec<u64>]) -> Self {
        let mut entries = Vec::new();
        for (part, starts) in partitions.iter().zip(start) {
            for (i, (region, &s)) in part.sets.iter().zip(starts).enumerate() {
                entries.push(ScheduledSet {
                    layer: part.layer.clone(),
                    duplicate: part.duplicate,
                    set_index: i,
                    region: *region,
                    start_cycle: s,
                    end_cycle: s + region.area() as u64,
                });
            }
        }
        Schedule { entries }
    }
}

/// Earliest start for every set: after its resource predecessor and after all
/// data producers. Non-base operations take no time.
pub fn schedule_asap(deps: &SetDependencyGraph, partitions: &[SetPartition]) -> Result<Schedule> {
    let mut start: Vec<Vec<u64>> = partitions.iter().map(|p| vec![0; p.len()]).collect();
    let mut end: Vec<Vec<u64>> = start.clone();
    for id in deps.topological_order()? {
        let SetId { layer, set } = id;
        let mut s = deps
            .resource_predecessor(id)
            .map_or(0, |p| end[p.layer][p.set]);
        for p in deps.producers(id) {
            s = s.max(end[p.layer][p.set]);
        }
        start[layer][set] = s;
        end[layer][set] = s + partitions[layer].sets[set].area() as u64;
    }
    Ok(Schedule::from_times(partitions, &start))
}

/// Reference schedule: original layers run one after another in topological
/// order; duplicates of one layer run side by side.
pub fn schedule_layer_by_layer(partitions: &[SetPartition]) -> Schedule {
    let mut groups: Vec<(&str, Vec<usize>)> = Vec::new();
    for (i, p) in partitions.iter().enumerate() {
        match groups.iter_mut().find(|(l, _)| *l == p.layer) {
            Some((_, members)) => members.push(i),
            None => groups.push((&p.layer, vec![i])),
        }
    }
    let mut start: Vec<Vec<u64>> = partitions.iter().map(|p| vec![0; p.len()]).collect();
    let mut t = 0;
    for (_, members) in groups {
        let mut group_end = t;
        for i in members {
            let mut clock = t;
            for (k, set) in partitions[i].sets.iter().enumerate() {
                start[i][k] = clock;
                clock += set.area() as u64;
            }
            group_end = group_end.max(clock);
        }
        t = group_end;
    }
    Schedule::from_times(partitions, &start)
}
