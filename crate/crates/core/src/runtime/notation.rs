//! Session logs drawn as a score: four pressure lanes, purple rules where a
//! section ends.

use std::fmt::Write as _;
use std::path::Path;

use super::session::{EventKind, SessionLog, SessionMeta, SESSION_FORMAT};
use super::RuntimeError;
use crate::breath::{read_track, PressureFrame, PILLOWS};
use crate::mapping::{CalibrationMap, PressureRange, SectionId};

/// Traces longer than this are decimated to exactly this many points.
pub const MAX_POINTS: usize = 4000;
pub const RULE_COLOR: &str = "#800080";

const WIDTH: f64 = 1200.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const LANE_H: f64 = 100.0;
const LANE_GAP: f64 = 20.0;
const LANE_NAMES: [&str; PILLOWS] = ["p1", "p2", "p3", "p4"];
const TRACE_COLORS: [&str; PILLOWS] = ["#1f4e79", "#2e7d32", "#b85c00", "#7a1f1f"];

/// Indices of an evenly spaced subset of `n` points, first and last kept.
pub fn decimate(n: usize, max: usize) -> Vec<usize> {
    let m = n.min(max);
    match m {
        0 => vec![],
        1 => vec![0],
        _ => (0..m).map(|j| j * (n - 1) / (m - 1)).collect(),
    }
}

/// Reads a session directory, or a bare breath CSV (no events, ranges taken
/// from the data).
pub fn load_for_notation(path: &Path) -> Result<SessionLog, RuntimeError> {
    if path.is_dir() {
        return SessionLog::read_dir(path);
    }
    let bytes = std::fs::read(path).map_err(|e| RuntimeError::io(path, e))?;
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Err(RuntimeError::EmptyLog);
    }
    let frames = read_track(bytes.as_slice())?;
    if frames.is_empty() {
        return Err(RuntimeError::EmptyLog);
    }
    Ok(bare_log(frames))
}

fn bare_log(frames: Vec<PressureFrame>) -> SessionLog {
    let mut ranges = [PressureRange { raw_min: f64::INFINITY, raw_max: f64::NEG_INFINITY }; PILLOWS];
    for f in &frames {
        for (r, v) in ranges.iter_mut().zip(f.values) {
            r.raw_min = r.raw_min.min(v);
            r.raw_max = r.raw_max.max(v);
        }
    }
    for r in &mut ranges {
        // Flat channels draw as a flat line mid-lane.
        if r.raw_max - r.raw_min < 1e-9 {
            r.raw_min -= 0.5;
            r.raw_max += 0.5;
        }
    }
    let rate = if frames.len() > 1 { 1.0 / (frames[1].t - frames[0].t) } else { 100.0 };
    SessionLog {
        events: vec![],
        meta: SessionMeta {
            format: SESSION_FORMAT,
            seed: 0,
            config_hash: String::new(),
            sample_rate: 48_000,
            control_rate_hz: rate,
            block_size: 128,
            samples: 0,
            calibration: CalibrationMap { ranges },
            late_frames: 0,
            keyframes: vec![],
        },
        frames,
    }
}

/// Renders the log as SVG. Output depends only on the log.
pub fn export_notation(log: &SessionLog) -> Result<String, RuntimeError> {
    let frames = &log.frames;
    if frames.is_empty() {
        return Err(RuntimeError::EmptyLog);
    }
    let t0 = frames[0].t;
    let t_end = frames
        .last()
        .map(|f| f.t)
        .into_iter()
        .chain(log.events.iter().map(|e| e.t))
        .fold(t0, f64::max)
        .max(log.meta.duration_s());
    let span = (t_end - t0).max(1e-9);
    let plot_w = WIDTH - LEFT - RIGHT;
    let x_of = |t: f64| LEFT + (t - t0) / span * plot_w;
    let height = TOP + PILLOWS as f64 * (LANE_H + LANE_GAP) + 30.0;
    let bottom = TOP + PILLOWS as f64 * (LANE_H + LANE_GAP) - LANE_GAP;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r##"<rect width="100%" height="100%" fill="#fbfaf7"/>"##);

    let indices = decimate(frames.len(), MAX_POINTS);
    for pillow in 0..PILLOWS {
        let top = TOP + pillow as f64 * (LANE_H + LANE_GAP);
        let r = log.meta.calibration.ranges[pillow];
        let _ = writeln!(
            svg,
            r##"<rect class="lane" x="{LEFT}" y="{top}" width="{plot_w}" height="{LANE_H}" fill="none" stroke="#d8d4cc"/>"##
        );
        let _ = writeln!(svg, r#"<text x="10" y="{:.2}">{}</text>"#, top + LANE_H / 2.0 + 4.0, LANE_NAMES[pillow]);
        let mut points = String::with_capacity(indices.len() * 16);
        for &i in &indices {
            let f = &frames[i];
            let v = ((f.values[pillow] - r.raw_min) / (r.raw_max - r.raw_min)).clamp(0.0, 1.0);
            let _ = write!(points, "{:.2},{:.2} ", x_of(f.t), top + (1.0 - v) * LANE_H);
        }
        let _ = writeln!(
            svg,
            r#"<polyline class="trace" data-pillow="{}" fill="none" stroke="{}" stroke-width="1" points="{}"/>"#,
            pillow + 1,
            TRACE_COLORS[pillow],
            points.trim_end()
        );
    }

    let label = |svg: &mut String, t: f64, id: SectionId| {
        let _ = writeln!(
            svg,
            r#"<text class="section-label" x="{:.2}" y="{:.2}">{} {}</text>"#,
            x_of(t) + 4.0,
            TOP - 12.0,
            id.index() + 1,
            id
        );
    };
    label(&mut svg, t0, SectionId::Connection);
    for e in log.events.iter().filter(|e| e.kind == EventKind::Boundary) {
        let x = x_of(e.t);
        let _ = writeln!(
            svg,
            r#"<line class="section-rule" x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{bottom:.2}" stroke="{RULE_COLOR}" stroke-width="2"/>"#,
            TOP - 8.0
        );
        if let Some(to) = e.to {
            label(&mut svg, e.t, to);
        }
    }

    let step = [1.0, 2.0, 5.0, 10.0, 15.0, 30.0, 60.0, 120.0, 300.0].into_iter().find(|s| span / s <= 12.0).unwrap_or(600.0);
    let mut k = (t0 / step).ceil() as i64;
    while (k as f64) * step <= t_end + 1e-9 {
        let t = k as f64 * step;
        let _ = writeln!(svg, r#"<text class="tick" x="{:.2}" y="{:.2}" text-anchor="middle">{}s</text>"#, x_of(t), bottom + 18.0, t);
        k += 1;
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::session::SessionEvent;
    use crate::runtime::timeline::{AdvanceCause, TimelineEvent};

    fn log_with(n: usize, boundaries: &[f64]) -> SessionLog {
        let frames = (0..n)
            .map(|k| PressureFrame { t: k as f64 * 0.01, seq: k as u64, values: [1000.0 + (k % 7) as f64; 4] })
            .collect();
        let mut log = bare_log(frames);
        let mut from = SectionId::Connection;
        for &t in boundaries {
            let to = from.next().unwrap();
            log.events.push(SessionEvent::from_timeline(&TimelineEvent::Boundary { t, from, to, cause: AdvanceCause::Timed }, 0));
            from = to;
        }
        log.events.push(SessionEvent::from_timeline(&TimelineEvent::End { t: 30.0, from }, 0));
        log
    }

    #[test]
    fn one_purple_rule_per_boundary() {
        let svg = export_notation(&log_with(3000, &[10.0, 20.0])).unwrap();
        assert_eq!(svg.matches(r#"class="section-rule""#).count(), 2);
        assert_eq!(svg.matches(RULE_COLOR).count(), 2);
        assert_eq!(svg.matches(r#"class="section-label""#).count(), 3);
    }

    #[test]
    fn traces_keep_every_point_up_to_the_cap() {
        let svg = export_notation(&log_with(3000, &[])).unwrap();
        for line in svg.lines().filter(|l| l.contains("<polyline")) {
            let pts = line.split("points=\"").nth(1).unwrap().trim_end_matches("\"/>");
            assert_eq!(pts.split(' ').count(), 3000);
        }
        let svg = export_notation(&log_with(10_001, &[])).unwrap();
        let line = svg.lines().find(|l| l.contains("<polyline")).unwrap();
        assert_eq!(line.split("points=\"").nth(1).unwrap().split(' ').count(), MAX_POINTS);
    }

    #[test]
    fn decimation_keeps_ends() {
        let idx = decimate(10_001, 4000);
        assert_eq!(idx.len(), 4000);
        assert_eq!((idx[0], *idx.last().unwrap()), (0, 10_000));
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(decimate(3, 4000), vec![0, 1, 2]);
    }

    #[test]
    fn deterministic_and_rejects_empty() {
        let log = log_with(500, &[1.0]);
        assert_eq!(export_notation(&log).unwrap(), export_notation(&log).unwrap());
        assert!(matches!(export_notation(&log_with(0, &[])), Err(RuntimeError::EmptyLog)));
    }

    #[test]
    fn empty_file_is_an_empty_log() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty.csv");
        std::fs::write(&p, "").unwrap();
        assert!(matches!(load_for_notation(&p), Err(RuntimeError::EmptyLog)));
        std::fs::write(&p, "t,p1,p2,p3,p4\n").unwrap();
        assert!(matches!(load_for_notation(&p), Err(RuntimeError::EmptyLog)));
    }
}
