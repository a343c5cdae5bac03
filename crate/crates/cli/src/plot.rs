//! Dependency-free SVG line plots of PFS curves.
//!
//! Output is a pure function of the parsed rows and the axis flags, so plots
//! diff cleanly and can be compared byte-for-byte in tests.

use std::fmt::Write as _;

use tailselect::harness::CsvRow;

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 460.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 80.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            let v = if log { v.log10() } else { v };
            (a.min(v), b.max(v))
        });
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = 0.04 * (hi - lo);
        Self { lo: lo - pad, hi: hi + pad, log }
    }

    /// Position of `v` in [0, 1] along the axis.
    fn frac(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    /// Tick values inside the axis range.
    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let (a, b) = (self.lo.ceil() as i32, self.hi.floor() as i32);
            if b >= a {
                return (a..=b).map(|e| 10f64.powi(e)).collect();
            }
            return vec![10f64.powf(0.5 * (self.lo + self.hi))];
        }
        let raw = (self.hi - self.lo) / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
        let mut t = (self.lo / step).ceil() * step;
        let mut out = Vec::new();
        while t <= self.hi + 1e-12 * step {
            out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
            t += step;
        }
        out
    }
}

fn label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-3) {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Value drawn for a row: zero PFS on a log axis is shown at 1/(2 trials).
pub fn display_pfs(row: &CsvRow, logy: bool) -> (f64, bool) {
    if logy && row.pfs <= 0.0 {
        (1.0 / (2.0 * row.trials.max(1) as f64), true)
    } else {
        (row.pfs, false)
    }
}

/// Renders one polyline per method, in order of first appearance.
pub fn render_svg(rows: &[CsvRow], logy: bool, logx: bool) -> Result<String, String> {
    if rows.is_empty() {
        return Err("no data rows to plot".into());
    }
    let mut methods: Vec<&str> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    let shown: Vec<(f64, bool)> = rows.iter().map(|r| display_pfs(r, logy)).collect();
    if logx && rows.iter().any(|r| r.budget == 0) {
        return Err("log budget axis needs positive budgets".into());
    }
    let x_axis = Axis::new(rows.iter().map(|r| r.budget as f64), logx);
    let y_axis = Axis::new(shown.iter().map(|s| s.0), logy);
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let px = |v: f64| LEFT + x_axis.frac(v) * pw;
    let py = |v: f64| TOP + (1.0 - y_axis.frac(v)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##);
    for t in x_axis.ticks() {
        let x = px(t);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#333"/>"##,
            TOP + ph,
            TOP + ph + 5.0
        );
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, TOP + ph + 18.0, label(t));
    }
    for t in y_axis.ticks() {
        let y = py(t);
        let _ = writeln!(s, r##"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="#333"/>"##, LEFT - 5.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 8.0, y + 4.0, label(t));
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">sampling budget T{}</text>"#,
        LEFT + pw / 2.0,
        TOP + ph + 38.0,
        if logx { " (log scale)" } else { "" }
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(18 {:.2}) rotate(-90)" text-anchor="middle">PFS{}</text>"#,
        TOP + ph / 2.0,
        if logy { " (log scale)" } else { "" }
    );

    let mut clamped = 0;
    for (j, m) in methods.iter().enumerate() {
        let color = PALETTE[j % PALETTE.len()];
        let mut pts: Vec<(f64, f64, bool)> = rows
            .iter()
            .zip(&shown)
            .filter(|(r, _)| r.method == *m)
            .map(|(r, &(v, c))| (px(r.budget as f64), py(v), c))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let coords: Vec<String> = pts.iter().map(|(x, y, _)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"><title>{}</title></polyline>"#,
            coords.join(" "),
            escape(m)
        );
        for (x, y, c) in &pts {
            let fill = if *c { "white" } else { color };
            clamped += usize::from(*c);
            let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{fill}" stroke="{color}"/>"#);
        }
        let ly = TOP + 10.0 + 20.0 * j as f64;
        let lx = LEFT + pw + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            lx + 24.0
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, lx + 30.0, ly + 4.0, escape(m));
    }
    if clamped > 0 {
        let _ = writeln!(
            s,
            r#"<text class="footnote" x="{LEFT}" y="{:.2}" font-size="11">Hollow markers: {clamped} point(s) with zero observed PFS, drawn at 1/(2 trials).</text>"#,
            HEIGHT - 12.0
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: &str, budget: usize, trials: usize, false_count: usize) -> CsvRow {
        let pfs = false_count as f64 / trials as f64;
        CsvRow { method: method.into(), budget, trials, false_count, pfs, stderr: 0.0 }
    }

    #[test]
    fn two_methods_give_two_polylines() {
        let rows: Vec<CsvRow> =
            ["a", "b"].iter().flat_map(|m| (1..=5).map(move |i| row(m, 1000 * i, 100, 10 + i))).collect();
        let svg = render_svg(&rows, false, false).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(!svg.contains("footnote"));
    }

    #[test]
    fn zero_pfs_is_clamped_on_log_axis() {
        let r = row("a", 1000, 400, 0);
        assert_eq!(display_pfs(&r, true), (1.0 / 800.0, true));
        assert_eq!(display_pfs(&r, false), (0.0, false));
        let svg = render_svg(&[r, row("a", 2000, 400, 4)], true, true).unwrap();
        assert!(svg.contains("footnote") && svg.contains("1 point(s)"));
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(render_svg(&[], false, false).is_err());
    }

    #[test]
    fn output_is_deterministic_and_escaped() {
        let rows = vec![row("a<b", 10, 10, 1), row("a<b", 20, 10, 2)];
        let a = render_svg(&rows, false, false).unwrap();
        assert_eq!(a, render_svg(&rows, false, false).unwrap());
        assert!(a.contains("a&lt;b") && !a.contains("a<b"));
    }

    #[test]
    fn linear_ticks_are_round_numbers() {
        let ax = Axis { lo: 0.0, hi: 1.0, log: false };
        assert_eq!(ax.ticks(), vec![0.0, 0.2, 0.4, 0.6000000000000001, 0.8, 1.0]);
        let ax = Axis { lo: -3.2, hi: -0.1, log: true };
        assert_eq!(ax.ticks(), vec![1e-3, 1e-2, 1e-1]);
    }
}
