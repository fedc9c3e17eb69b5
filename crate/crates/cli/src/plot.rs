//! Trajectory CSV parsing and SVG rendering: one polyline per agent, a
//! circle at each start, a cross at each final position, diamonds at the
//! formation targets when a scenario is supplied, and wider half-opaque
//! strokes over the spans where an agent was flagged as endangered.

use std::fmt::Write;

use otaform_core::{TrajectoryRecord, Vec2};

use crate::output::TRAJECTORY_HEADER;

/// Eight distinguishable strokes, reused cyclically past eight agents.
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

const CANVAS: f64 = 600.0;
const MARGIN: f64 = 30.0;

#[derive(Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Indexed `[sample][agent]`, like the record it came from.
    pub positions: Vec<Vec<Vec2>>,
    pub references: Vec<Vec<Vec2>>,
    pub danger: Vec<Vec<bool>>,
}

impl Trajectory {
    pub fn n(&self) -> usize {
        self.positions.first().map_or(0, Vec::len)
    }

    pub fn from_record(record: &TrajectoryRecord) -> Self {
        Trajectory {
            times: record.sample_times.clone(),
            positions: record.positions.clone(),
            references: record.references.clone(),
            danger: record.unsafe_flags.clone(),
        }
    }

    /// Strict parse of the CSV `run` writes: exact header, rows grouped in
    /// sample blocks with agents 0..n in order, at least one block.
    pub fn parse_csv(text: &str) -> Result<Self, String> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim_end() == TRAJECTORY_HEADER => {}
            Some((_, h)) => return Err(format!("unexpected header '{h}'")),
            None => return Err("empty file".to_string()),
        }
        let mut rows = Vec::new();
        for (idx, line) in lines {
            if line.is_empty() {
                continue;
            }
            rows.push(parse_row(idx + 1, line)?);
        }
        if rows.is_empty() {
            return Err("no data rows".to_string());
        }
        let n = rows.iter().map(|r| r.id).max().expect("rows is non-empty") + 1;
        if rows.len() % n != 0 {
            return Err(format!(
                "{} rows do not divide into blocks of {n} agents",
                rows.len()
            ));
        }
        let mut t = Trajectory {
            times: Vec::new(),
            positions: Vec::new(),
            references: Vec::new(),
            danger: Vec::new(),
        };
        for block in rows.chunks(n) {
            for (i, row) in block.iter().enumerate() {
                if row.id != i {
                    return Err(format!("expected agent {i} next, found agent {}", row.id));
                }
                if row.time != block[0].time {
                    return Err(format!(
                        "agent {} breaks the sample block at time {}",
                        row.id, block[0].time
                    ));
                }
            }
            t.times.push(block[0].time);
            t.positions.push(block.iter().map(|r| r.position).collect());
            t.references
                .push(block.iter().map(|r| r.reference).collect());
            t.danger.push(block.iter().map(|r| r.danger).collect());
        }
        Ok(t)
    }
}

struct Row {
    time: f64,
    id: usize,
    position: Vec2,
    reference: Vec2,
    danger: bool,
}

fn parse_row(line_no: usize, line: &str) -> Result<Row, String> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 7 {
        return Err(format!(
            "line {line_no}: expected 7 fields, found {}",
            fields.len()
        ));
    }
    let num = |idx: usize| {
        fields[idx]
            .parse::<f64>()
            .map_err(|_| format!("line {line_no}: '{}' is not a number", fields[idx]))
    };
    let id = fields[1]
        .parse::<usize>()
        .map_err(|_| format!("line {line_no}: '{}' is not an agent id", fields[1]))?;
    let danger = match fields[6].trim_end() {
        "0" => false,
        "1" => true,
        other => {
            return Err(format!(
                "line {line_no}: in_danger must be 0 or 1, found '{other}'"
            ))
        }
    };
    Ok(Row {
        time: num(0)?,
        id,
        position: Vec2::new(num(2)?, num(3)?),
        reference: Vec2::new(num(4)?, num(5)?),
        danger,
    })
}

pub fn render_svg(t: &Trajectory, targets: Option<&[Vec2]>, mark_danger: bool) -> String {
    let n = t.n();
    let mut min = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut max = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut grow = |p: Vec2| {
        min.x = min.x.min(p.x);
        min.y = min.y.min(p.y);
        max.x = max.x.max(p.x);
        max.y = max.y.max(p.y);
    };
    for block in &t.positions {
        for &p in block {
            grow(p);
        }
    }
    for &target in targets.unwrap_or(&[]) {
        grow(target);
    }
    // Uniform scale keeps distances isotropic; the y axis flips because SVG
    // grows downward.
    let span = (max.x - min.x).max(max.y - min.y).max(1e-9);
    let scale = (CANVAS - 2.0 * MARGIN) / span;
    let to_px = move |p: Vec2| -> (f64, f64) {
        (
            MARGIN + (p.x - min.x) * scale,
            MARGIN + (max.y - p.y) * scale,
        )
    };

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{CANVAS}" height="{CANVAS}" viewBox="0 0 {CANVAS} {CANVAS}">"#
    )
    .expect("writing to a String cannot fail");
    writeln!(
        svg,
        r#"<rect width="{CANVAS}" height="{CANVAS}" fill="white"/>"#
    )
    .unwrap();
    for i in 0..n {
        let color = PALETTE[i % PALETTE.len()];
        let mut points = String::new();
        for block in &t.positions {
            let (x, y) = to_px(block[i]);
            write!(points, "{x:.2},{y:.2} ").unwrap();
        }
        writeln!(
            svg,
            r#"<polyline class="path" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            points.trim_end()
        )
        .unwrap();
    }
    if mark_danger {
        for i in 0..n {
            let color = PALETTE[i % PALETTE.len()];
            for span in danger_spans(&t.danger, i) {
                let mut d = String::new();
                for (k, s) in span.clone().enumerate() {
                    let (x, y) = to_px(t.positions[s][i]);
                    let op = if k == 0 { 'M' } else { 'L' };
                    write!(d, "{op} {x:.2} {y:.2} ").unwrap();
                }
                writeln!(
                    svg,
                    r#"<path class="danger" d="{}" fill="none" stroke="{color}" stroke-width="4.5" stroke-opacity="0.45"/>"#,
                    d.trim_end()
                )
                .unwrap();
            }
        }
    }
    for i in 0..n {
        let color = PALETTE[i % PALETTE.len()];
        let (x, y) = to_px(t.positions[0][i]);
        writeln!(
            svg,
            r#"<circle class="start" cx="{x:.2}" cy="{y:.2}" r="4" fill="{color}"/>"#
        )
        .unwrap();
    }
    for i in 0..n {
        let color = PALETTE[i % PALETTE.len()];
        let (x, y) = to_px(t.positions[t.positions.len() - 1][i]);
        let r = 5.0;
        writeln!(
            svg,
            r#"<path class="final" d="M {:.2} {:.2} L {:.2} {:.2} M {:.2} {:.2} L {:.2} {:.2}" stroke="{color}" stroke-width="2" fill="none"/>"#,
            x - r, y - r, x + r, y + r, x - r, y + r, x + r, y - r
        )
        .unwrap();
    }
    for &target in targets.unwrap_or(&[]) {
        let (x, y) = to_px(target);
        let r = 6.0;
        writeln!(
            svg,
            r##"<path class="target" d="M {:.2} {:.2} L {:.2} {:.2} L {:.2} {:.2} L {:.2} {:.2} Z" stroke="#333333" stroke-width="1.5" fill="none"/>"##,
            x, y - r, x + r, y, x, y + r, x - r, y
        )
        .unwrap();
    }
    writeln!(svg, "</svg>").unwrap();
    svg
}

/// Sample index ranges to overdraw for agent `i`: maximal runs of flagged
/// samples, widened by one sample at each end so a single flagged sample
/// still yields a visible segment.
fn danger_spans(danger: &[Vec<bool>], i: usize) -> Vec<std::ops::Range<usize>> {
    let len = danger.len();
    let mut spans: Vec<std::ops::Range<usize>> = Vec::new();
    let mut s = 0;
    while s < len {
        if !danger[s][i] {
            s += 1;
            continue;
        }
        let mut e = s;
        while e + 1 < len && danger[e + 1][i] {
            e += 1;
        }
        let start = s.saturating_sub(1);
        let end = (e + 2).min(len);
        // Merge with the previous span if the widened ends now touch.
        match spans.last_mut() {
            Some(prev) if prev.end >= start => prev.end = end,
            _ => spans.push(start..end),
        }
        s = e + 1;
    }
    spans.into_iter().filter(|r| r.len() >= 2).collect()
}
