use std::fmt::Write;

use gip_core::BoundRecord;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const TICKS: usize = 5;
const UB_COLOR: &str = "#c0392b";
const LB_COLOR: &str = "#2471a3";

/// Maps data coordinates onto the plot area.
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn fit(log: &[BoundRecord]) -> Self {
        let x_max = log.iter().map(|r| r.elapsed_s).fold(0.0, f64::max);
        let values = log
            .iter()
            .flat_map(|r| [r.ub, r.lb])
            .filter(|v| v.is_finite());
        let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
        let (lo, hi) = if lo > hi {
            (0.0, 1.0)
        } else if hi - lo < 1e-12 {
            (lo - 1.0, hi + 1.0)
        } else {
            let pad = 0.05 * (hi - lo);
            (lo - pad, hi + pad)
        };
        Self {
            x: (0.0, if x_max > 0.0 { x_max } else { 1.0 }),
            y: (lo, hi),
        }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn series(frame: &Frame, log: &[BoundRecord], value: fn(&BoundRecord) -> f64) -> String {
    log.iter()
        .filter(|r| value(r).is_finite())
        .map(|r| format!("{:.2},{:.2}", frame.px(r.elapsed_s), frame.py(value(r))))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Line chart of the upper and lower bound against elapsed time, one
/// polyline point per log row with a finite value, annotated with the final
/// gap. Output depends only on the log.
pub fn render_svg(log: &[BoundRecord]) -> String {
    let frame = Frame::fit(log);
    let mut svg = String::new();
    let w = &mut svg;
    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(
        w,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    )
    .unwrap();
    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (y0, y1) = (HEIGHT - BOTTOM, TOP);
    writeln!(
        w,
        r#"<path d="M{x0},{y1} V{y0} H{x1}" fill="none" stroke="black"/>"#
    )
    .unwrap();
    for i in 0..=TICKS {
        let t = i as f64 / TICKS as f64;
        let xv = frame.x.0 + t * (frame.x.1 - frame.x.0);
        let yv = frame.y.0 + t * (frame.y.1 - frame.y.0);
        let (px, py) = (frame.px(xv), frame.py(yv));
        writeln!(
            w,
            r#"<line x1="{px:.2}" y1="{y0}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y0 + 5.0,
            y0 + 20.0,
            tick_label(xv)
        )
        .unwrap();
        writeln!(
            w,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{x0}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            py + 4.0,
            tick_label(yv)
        )
        .unwrap();
    }
    writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">elapsed time (s)</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 10.0
    )
    .unwrap();
    writeln!(
        w,
        r#"<text x="15" y="{:.2}" text-anchor="middle" transform="rotate(-90 15 {:.2})">tour cost</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    )
    .unwrap();
    for (name, color, value) in [
        (
            "ub",
            UB_COLOR,
            (|r: &BoundRecord| r.ub) as fn(&BoundRecord) -> f64,
        ),
        ("lb", LB_COLOR, |r: &BoundRecord| r.lb),
    ] {
        writeln!(
            w,
            r#"<polyline class="{name}" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            series(&frame, log, value)
        )
        .unwrap();
    }
    writeln!(
        w,
        r#"<text x="{x0}" y="20" fill="{UB_COLOR}">upper bound</text><text x="{:.2}" y="20" fill="{LB_COLOR}">lower bound</text>"#,
        x0 + 100.0
    )
    .unwrap();
    let gap = log.last().map_or(f64::INFINITY, |r| r.gap_pct);
    let gap_text = if gap.is_finite() {
        format!("final gap {gap:.2} %")
    } else {
        "final gap n/a".to_string()
    };
    writeln!(
        w,
        r#"<text class="gap" x="{x1}" y="20" text-anchor="end">{gap_text}</text>"#
    )
    .unwrap();
    svg.push_str("</svg>\n");
    svg
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}
