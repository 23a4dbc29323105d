//! Hand-written SVG 1.1 plots.

use std::fmt::Write;

use nalgebra::{DMatrix, DVector};
use rfs_swarm::{Mixture, TrajectoryLog};

const PANEL: f64 = 320.0;
const MARGIN: f64 = 36.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

#[derive(Debug, Clone, Copy)]
struct Bounds {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Bounds {
    fn square(half: f64) -> Self {
        Self {
            x0: -half,
            x1: half,
            y0: -half,
            y1: half,
        }
    }

    fn include(&mut self, x: f64, y: f64) {
        if x.is_finite() && y.is_finite() {
            self.x0 = self.x0.min(x - 0.25);
            self.x1 = self.x1.max(x + 0.25);
            self.y0 = self.y0.min(y - 0.25);
            self.y1 = self.y1.max(y + 0.25);
        }
    }
}

/// Plot area of one panel, `left`/`top` in pixels.
#[derive(Debug, Clone, Copy)]
struct Panel {
    left: f64,
    top: f64,
    w: f64,
    h: f64,
    b: Bounds,
}

impl Panel {
    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.b.x0) / (self.b.x1 - self.b.x0) * self.w
    }

    fn py(&self, y: f64) -> f64 {
        self.top + (self.b.y1 - y) / (self.b.y1 - self.b.y0) * self.h
    }

    fn frame(&self, out: &mut String, title: &str) {
        let _ = writeln!(
            out,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#333" stroke-width="1"/>"##,
            self.left, self.top, self.w, self.h
        );
        for t in integer_ticks(self.b.x0, self.b.x1) {
            let x = self.px(t as f64);
            let _ = writeln!(
                out,
                r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#333"/><text x="{x:.2}" y="{:.2}" font-size="10" text-anchor="middle">{t}</text>"##,
                self.top + self.h,
                self.top + self.h + 4.0,
                self.top + self.h + 15.0
            );
        }
        for t in integer_ticks(self.b.y0, self.b.y1) {
            let y = self.py(t as f64);
            let _ = writeln!(
                out,
                r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#333"/><text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{t}</text>"##,
                self.left - 4.0,
                self.left,
                self.left - 6.0,
                y + 3.5
            );
        }
        let _ = writeln!(
            out,
            r##"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"##,
            self.left + self.w / 2.0,
            self.top - 8.0,
            escape(title)
        );
    }

    fn cross(&self, out: &mut String, x: f64, y: f64) {
        let (cx, cy) = (self.px(x), self.py(y));
        let r = 5.0;
        let _ = writeln!(
            out,
            r##"<path d="M{:.2} {:.2}L{:.2} {:.2}M{:.2} {:.2}L{:.2} {:.2}" stroke="black" stroke-width="2"/>"##,
            cx - r,
            cy - r,
            cx + r,
            cy + r,
            cx - r,
            cy + r,
            cx + r,
            cy - r
        );
    }

    fn dot(&self, out: &mut String, x: f64, y: f64, r: f64, fill: &str) {
        let _ = writeln!(
            out,
            r##"<circle cx="{:.2}" cy="{:.2}" r="{r}" fill="{fill}"/>"##,
            self.px(x),
            self.py(y)
        );
    }

    /// Two-sigma ellipse of the position block of `p`.
    fn ellipse(&self, out: &mut String, m: &DVector<f64>, p: &DMatrix<f64>, stroke: &str) {
        let (a, b, c) = (p[(0, 0)], p[(0, 1)], p[(1, 1)]);
        let mid = 0.5 * (a + c);
        let rad = (0.25 * (a - c).powi(2) + b * b).sqrt();
        let (l1, l2) = ((mid + rad).max(0.0), (mid - rad).max(0.0));
        let theta = 0.5 * (2.0 * b).atan2(a - c);
        let sx = self.w / (self.b.x1 - self.b.x0);
        let sy = self.h / (self.b.y1 - self.b.y0);
        let _ = writeln!(
            out,
            r##"<ellipse cx="{:.2}" cy="{:.2}" rx="{:.2}" ry="{:.2}" transform="rotate({:.2} {:.2} {:.2})" fill="none" stroke="{stroke}" stroke-width="1.5"/>"##,
            self.px(m[0]),
            self.py(m[1]),
            2.0 * l1.sqrt() * sx,
            2.0 * l2.sqrt() * sy,
            -theta.to_degrees(),
            self.px(m[0]),
            self.py(m[1])
        );
    }
}

fn integer_ticks(lo: f64, hi: f64) -> Vec<i64> {
    let step = ((hi - lo) / 8.0).ceil().max(1.0) as i64;
    let first = (lo / step as f64).ceil() as i64 * step;
    (0..).map(|k| first + k * step).take_while(|&t| t as f64 <= hi).collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn document(width: f64, height: f64, body: &str) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

fn data_bounds(log: &TrajectoryLog, targets: &Mixture) -> Bounds {
    let mut b = Bounds::square(4.0);
    for means in &log.component_means {
        for m in means {
            b.include(m[0], m[1]);
        }
    }
    for agents in &log.agent_states {
        for a in agents {
            b.include(a.state[0], a.state[1]);
        }
    }
    for t in targets {
        b.include(t.mean()[0], t.mean()[1]);
    }
    b
}

/// Agents, component means with 2σ ellipses, and targets at each requested
/// time, one panel per time.
pub fn snapshots(log: &TrajectoryLog, targets: &Mixture, times: &[f64]) -> String {
    let bounds = data_bounds(log, targets);
    let mut body = String::new();
    for (n, &t) in times.iter().enumerate() {
        let k = log.index_at(t);
        let panel = Panel {
            left: MARGIN + n as f64 * (PANEL + MARGIN),
            top: MARGIN,
            w: PANEL,
            h: PANEL,
            b: bounds,
        };
        panel.frame(&mut body, &format!("time = {:.2} s", log.times[k]));
        for a in &log.agent_states[k] {
            panel.dot(&mut body, a.state[0], a.state[1], 2.0, color(a.component));
        }
        for t in targets {
            panel.cross(&mut body, t.mean()[0], t.mean()[1]);
        }
        for (i, (m, p)) in log.component_means[k].iter().zip(&log.component_covs[k]).enumerate() {
            panel.ellipse(&mut body, m, p, color(i));
            let _ = writeln!(
                body,
                r##"<circle cx="{:.2}" cy="{:.2}" r="4" fill="white" stroke="{}" stroke-width="2"/>"##,
                panel.px(m[0]),
                panel.py(m[1]),
                color(i)
            );
        }
    }
    let n = times.len().max(1) as f64;
    document(MARGIN + n * (PANEL + MARGIN), PANEL + 2.0 * MARGIN, &body)
}

/// Tracks of every component mean over the whole run.
pub fn mean_tracks(log: &TrajectoryLog, targets: &Mixture) -> String {
    let panel = Panel {
        left: MARGIN,
        top: MARGIN,
        w: PANEL * 1.5,
        h: PANEL * 1.5,
        b: data_bounds(log, targets),
    };
    let mut body = String::new();
    let end = log.times.last().copied().unwrap_or(0.0);
    panel.frame(&mut body, &format!("component means, 0 to {end:.2} s"));
    for t in targets {
        panel.cross(&mut body, t.mean()[0], t.mean()[1]);
    }
    let n = log.component_means.first().map_or(0, |m| m.len());
    for i in 0..n {
        let pts: Vec<String> = log
            .component_means
            .iter()
            .map(|means| format!("{:.2},{:.2}", panel.px(means[i][0]), panel.py(means[i][1])))
            .collect();
        let _ = writeln!(
            body,
            r##"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"/>"##,
            pts.join(" "),
            color(i)
        );
        let first = &log.component_means[0][i];
        panel.dot(&mut body, first[0], first[1], 4.0, color(i));
        let _ = writeln!(
            body,
            r##"<text x="{:.2}" y="{:.2}" font-size="11">{}</text>"##,
            panel.px(first[0]) + 6.0,
            panel.py(first[1]) - 6.0,
            i + 1
        );
    }
    document(panel.w + 2.0 * MARGIN, panel.h + 2.0 * MARGIN, &body)
}

fn viridis(t: f64) -> (u8, u8, u8) {
    const STOPS: [(f64, f64, f64); 5] = [
        (68.0, 1.0, 84.0),
        (59.0, 82.0, 139.0),
        (33.0, 145.0, 140.0),
        (94.0, 201.0, 98.0),
        (253.0, 231.0, 37.0),
    ];
    let t = t.clamp(0.0, 1.0) * 4.0;
    let i = (t.floor() as usize).min(3);
    let f = t - i as f64;
    let (a, b) = (STOPS[i], STOPS[i + 1]);
    let lerp = |x: f64, y: f64| (x + (y - x) * f).round() as u8;
    (lerp(a.0, b.0), lerp(a.1, b.1), lerp(a.2, b.2))
}

/// Heatmap of `values` (rows follow `ys`, columns follow `xs`) with target
/// crosses and hollow circles at `others`.
pub fn heatmap(values: &DMatrix<f64>, xs: &[f64], ys: &[f64], targets: &Mixture, others: &[(f64, f64)], title: &str) -> String {
    let half_step = |v: &[f64]| if v.len() > 1 { 0.5 * (v[1] - v[0]).abs() } else { 0.5 };
    let (hx, hy) = (half_step(xs), half_step(ys));
    let b = Bounds {
        x0: xs.first().copied().unwrap_or(0.0) - hx,
        x1: xs.last().copied().unwrap_or(0.0) + hx,
        y0: ys.first().copied().unwrap_or(0.0) - hy,
        y1: ys.last().copied().unwrap_or(0.0) + hy,
    };
    let panel = Panel {
        left: MARGIN + 10.0,
        top: MARGIN,
        w: PANEL * 1.5,
        h: PANEL * 1.5,
        b,
    };
    let finite = values.iter().copied().filter(|v| v.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut body = String::new();
    for (r, &y) in ys.iter().enumerate() {
        for (c, &x) in xs.iter().enumerate() {
            let v = values[(r, c)];
            let fill = if v.is_finite() {
                let (cr, cg, cb) = viridis((v - lo) / span);
                format!("rgb({cr},{cg},{cb})")
            } else {
                "#999".to_string()
            };
            let x0 = panel.px(x - hx);
            let y0 = panel.py(y + hy);
            let _ = writeln!(
                body,
                r##"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"##,
                panel.px(x + hx) - x0 + 0.3,
                panel.py(y - hy) - y0 + 0.3
            );
        }
    }
    panel.frame(&mut body, title);
    for t in targets {
        panel.cross(&mut body, t.mean()[0], t.mean()[1]);
    }
    for &(x, y) in others {
        let _ = writeln!(
            body,
            r##"<circle cx="{:.2}" cy="{:.2}" r="5" fill="none" stroke="white" stroke-width="1.5"/>"##,
            panel.px(x),
            panel.py(y)
        );
    }
    let _ = writeln!(
        body,
        r##"<text x="{:.2}" y="{:.2}" font-size="10">min {lo:.4e}  max {hi:.4e}</text>"##,
        panel.left,
        panel.top + panel.h + 30.0
    );
    document(panel.w + 2.0 * MARGIN + 10.0, panel.h + 2.0 * MARGIN + 10.0, &body)
}
