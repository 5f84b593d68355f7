use std::collections::BTreeMap;
use std::fmt::Write;

use cim_mapping::MappingPlan;
use clsa_scheduler::Schedule;

const LANE_H: f64 = 14.0;
const LANE_GAP: f64 = 4.0;
const LABEL_W: f64 = 170.0;
const PLOT_W: f64 = 1000.0;
const TOP: f64 = 10.0;
const AXIS_H: f64 = 30.0;

const PALETTE: [&str; 10] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
    "#9c755f", "#bab0ac",
];

/// Round tick step giving at most ten intervals over `span`.
fn tick_step(span: u64) -> u64 {
    let mut step = 1;
    loop {
        for m in [1, 2, 5] {
            if span <= step * m * 10 {
                return step * m;
            }
        }
        step *= 10;
    }
}

/// SVG timeline with one lane per (layer, duplicate) in order of first
/// appearance and one bar per executed set. Lane labels carry the PE range
/// from `plan` when the layer is mapped. Layers share a color across their
/// duplicates.
pub fn emit_gantt(schedule: &Schedule, plan: &MappingPlan) -> String {
    let mut lanes: Vec<(&str, usize)> = Vec::new();
    let mut lane_of = BTreeMap::new();
    let mut colors: BTreeMap<&str, &str> = BTreeMap::new();
    for e in &schedule.entries {
        let key = (e.layer.as_str(), e.duplicate);
        lane_of.entry(key).or_insert_with(|| {
            lanes.push(key);
            lanes.len() - 1
        });
        let next = PALETTE[colors.len() % PALETTE.len()];
        colors.entry(e.layer.as_str()).or_insert(next);
    }
    let makespan = schedule.makespan();
    let scale = if makespan == 0 {
        0.0
    } else {
        PLOT_W / makespan as f64
    };
    let plot_h = lanes.len() as f64 * (LANE_H + LANE_GAP) + LANE_GAP;
    let width = LABEL_W + PLOT_W + 20.0;
    let height = TOP + plot_h + AXIS_H;
    let axis_y = TOP + plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="monospace" font-size="10">"#
    );
    for (i, (layer, dup)) in lanes.iter().enumerate() {
        let y = TOP + LANE_GAP + i as f64 * (LANE_H + LANE_GAP);
        let pes = plan
            .pe_range(layer, *dup)
            .map(|r| format!(" PE {}..{}", r.start, r.end))
            .unwrap_or_default();
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{layer}#{dup}{pes}</text>"#,
            LABEL_W - 6.0,
            y + LANE_H - 3.0
        );
    }
    for e in &schedule.entries {
        let lane = lane_of[&(e.layer.as_str(), e.duplicate)];
        let y = TOP + LANE_GAP + lane as f64 * (LANE_H + LANE_GAP);
        let _ = writeln!(
            s,
            r#"<rect x="{:.3}" y="{:.1}" width="{:.3}" height="{LANE_H}" fill="{}"><title>{} set {} [{}, {})</title></rect>"#,
            LABEL_W + e.start_cycle as f64 * scale,
            y,
            e.cycles() as f64 * scale,
            colors[e.layer.as_str()],
            e.layer,
            e.set_index,
            e.start_cycle,
            e.end_cycle
        );
    }
    let _ = writeln!(
        s,
        r#"<line x1="{LABEL_W}" y1="{TOP}" x2="{LABEL_W}" y2="{axis_y}" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<line x1="{LABEL_W}" y1="{axis_y}" x2="{:.1}" y2="{axis_y}" stroke="black"/>"#,
        LABEL_W + PLOT_W
    );
    let step = tick_step(makespan);
    let mut t = 0;
    while t <= makespan {
        let x = LABEL_W + t as f64 * scale;
        let _ = writeln!(
            s,
            r#"<line x1="{x:.3}" y1="{axis_y}" x2="{x:.3}" y2="{:.1}" stroke="black"/><text x="{x:.3}" y="{:.1}" text-anchor="middle">{t}</text>"#,
            axis_y + 4.0,
            axis_y + 15.0
        );
        t += step;
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">cycle</text>"#,
        LABEL_W + PLOT_W / 2.0,
        axis_y + 27.0
    );
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn steps_are_round() {
        assert_eq!(tick_step(0), 1);
        assert_eq!(tick_step(10), 1);
        assert_eq!(tick_step(11), 2);
        assert_eq!(tick_step(45), 5);
        assert_eq!(tick_step(113061), 20000);
    }
}
