//! Static SVG plots: subgroup forest plot, posterior density strips with
//! threshold shading, and study metric bar charts. Hand-rolled SVG 1.1;
//! coordinates come from an invertible linear scale so plotted positions can
//! be checked against the data.

use crate::pipeline::{AnalysisReport, SubgroupEstimate};
use crate::study::StudyResult;

/// Invertible affine map between a data range and pixel range.
#[derive(Debug, Clone, Copy)]
pub struct LinearScale {
    pub d0: f64,
    pub d1: f64,
    pub p0: f64,
    pub p1: f64,
}

impl LinearScale {
    pub fn new(d0: f64, d1: f64, p0: f64, p1: f64) -> Self {
        let (d0, d1) = if (d1 - d0).abs() < 1e-12 {
            (d0 - 0.5, d1 + 0.5)
        } else {
            (d0, d1)
        };
        LinearScale { d0, d1, p0, p1 }
    }

    pub fn to_px(&self, x: f64) -> f64 {
        self.p0 + (x - self.d0) / (self.d1 - self.d0) * (self.p1 - self.p0)
    }

    pub fn to_data(&self, px: f64) -> f64 {
        self.d0 + (px - self.p0) / (self.p1 - self.p0) * (self.d1 - self.d0)
    }
}

fn svg_open(width: f64, height: f64) -> String {
    format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" ",
            "width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n",
            "<rect width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n"
        ),
        width, height
    )
}

fn text_el(x: f64, y: f64, size: f64, anchor: &str, content: &str) -> String {
    format!(
        "<text x=\"{x:.2}\" y=\"{y:.2}\" font-size=\"{size}\" font-family=\"monospace\" text-anchor=\"{anchor}\">{}</text>\n",
        escape(content)
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

const MARGIN_LEFT: f64 = 240.0;
const PLOT_WIDTH: f64 = 480.0;
const ROW_HEIGHT: f64 = 28.0;

fn estimate_range(subgroups: &[SubgroupEstimate]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for sg in subgroups {
        if let (Some(l), Some(h)) = (sg.ci_low, sg.ci_high) {
            lo = lo.min(l);
            hi = hi.max(h);
        }
        if sg.estimate.is_finite() {
            lo = lo.min(sg.estimate);
            hi = hi.max(sg.estimate);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        (-1.0, 1.0)
    } else {
        let pad = 0.08 * (hi - lo).max(1e-6);
        (lo - pad, hi + pad)
    }
}

/// Forest plot: one whisker row per subgroup, overall row on top. Whisker
/// lines carry `class="ci"` with the data values in `data-lo`/`data-hi`.
/// Returns the document and the x scale used.
pub fn render_forest_svg(report: &AnalysisReport) -> (String, LinearScale) {
    let rows = &report.subgroups;
    let height = 60.0 + ROW_HEIGHT * rows.len() as f64;
    let width = MARGIN_LEFT + PLOT_WIDTH + 40.0;
    let (lo, hi) = estimate_range(rows);
    let scale = LinearScale::new(lo, hi, MARGIN_LEFT, MARGIN_LEFT + PLOT_WIDTH);

    let mut out = svg_open(width, height);
    out.push_str(&text_el(10.0, 20.0, 13.0, "start", "subgroup treatment effects"));
    // axis with zero line
    let axis_y = height - 24.0;
    out.push_str(&format!(
        "<line x1=\"{:.2}\" y1=\"{axis_y:.2}\" x2=\"{:.2}\" y2=\"{axis_y:.2}\" stroke=\"black\"/>\n",
        scale.p0, scale.p1
    ));
    for tick in ticks(lo, hi, 6) {
        let x = scale.to_px(tick);
        out.push_str(&format!(
            "<line x1=\"{x:.2}\" y1=\"{axis_y:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
            axis_y + 4.0
        ));
        out.push_str(&text_el(x, axis_y + 16.0, 10.0, "middle", &format!("{tick:.2}")));
    }
    if lo < 0.0 && hi > 0.0 {
        let x0 = scale.to_px(0.0);
        out.push_str(&format!(
            "<line x1=\"{x0:.2}\" y1=\"30\" x2=\"{x0:.2}\" y2=\"{axis_y:.2}\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n"
        ));
    }
    for (i, sg) in rows.iter().enumerate() {
        let y = 44.0 + ROW_HEIGHT * i as f64;
        let label = if sg.k == 0 {
            format!("Overall (n={})", sg.n_k)
        } else {
            format!("k={} {} (n={})", sg.k, sg.rule, sg.n_k)
        };
        let label = if label.len() > 36 {
            format!("{}...", &label[..33])
        } else {
            label
        };
        out.push_str(&text_el(10.0, y + 4.0, 11.0, "start", &label));
        if let (Some(l), Some(h)) = (sg.ci_low, sg.ci_high) {
            let (x1, x2) = (scale.to_px(l), scale.to_px(h));
            out.push_str(&format!(
                "<line class=\"ci\" data-lo=\"{l}\" data-hi=\"{h}\" x1=\"{x1:.4}\" y1=\"{y:.2}\" x2=\"{x2:.4}\" y2=\"{y:.2}\" stroke=\"black\" stroke-width=\"1.5\"/>\n"
            ));
            for x in [x1, x2] {
                out.push_str(&format!(
                    "<line x1=\"{x:.4}\" y1=\"{:.2}\" x2=\"{x:.4}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
                    y - 5.0,
                    y + 5.0
                ));
            }
        }
        if sg.estimate.is_finite() {
            let x = scale.to_px(sg.estimate);
            out.push_str(&format!(
                "<rect x=\"{:.4}\" y=\"{:.2}\" width=\"8\" height=\"8\" fill=\"#2b6cb0\"/>\n",
                x - 4.0,
                y - 4.0
            ));
        }
    }
    out.push_str("</svg>\n");
    (out, scale)
}

/// Posterior density strips, one per subgroup, with regions shaded by the
/// configured thresholds (lowest band green, middle yellow, highest red).
pub fn render_posterior_svg(report: &AnalysisReport) -> String {
    let rows: Vec<&SubgroupEstimate> = report
        .subgroups
        .iter()
        .filter(|s| s.posterior.is_some())
        .collect();
    let strip_h = 64.0;
    let height = 50.0 + strip_h * rows.len().max(1) as f64;
    let width = MARGIN_LEFT + PLOT_WIDTH + 40.0;
    let mut out = svg_open(width, height);
    out.push_str(&text_el(10.0, 20.0, 13.0, "start", "posterior distributions"));

    if rows.is_empty() {
        out.push_str(&text_el(
            10.0,
            40.0,
            11.0,
            "start",
            "no posterior summaries in this configuration",
        ));
        out.push_str("</svg>\n");
        return out;
    }

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for sg in &rows {
        let p = sg.posterior.unwrap();
        lo = lo.min(p.mean - 4.0 * p.var.sqrt());
        hi = hi.max(p.mean + 4.0 * p.var.sqrt());
    }
    for t in &report.config.thresholds {
        lo = lo.min(*t);
        hi = hi.max(*t);
    }
    let scale = LinearScale::new(lo, hi, MARGIN_LEFT, MARGIN_LEFT + PLOT_WIDTH);

    let mut bands: Vec<f64> = report.config.thresholds.clone();
    bands.sort_by(|a, b| a.partial_cmp(b).unwrap());
    bands.dedup();
    let palette = ["#48945a", "#d8b940", "#c75146", "#8b5ca6"];

    for (i, sg) in rows.iter().enumerate() {
        let base = 40.0 + strip_h * i as f64 + strip_h - 14.0;
        let post = sg.posterior.unwrap();
        let sd = post.var.sqrt().max(1e-12);
        let label = if sg.k == 0 {
            "Overall".to_string()
        } else {
            format!("k={} {}", sg.k, sg.rule)
        };
        let label = if label.len() > 36 {
            format!("{}...", &label[..33])
        } else {
            label
        };
        out.push_str(&text_el(10.0, base - 18.0, 11.0, "start", &label));

        // density segments between thresholds, each its own filled path
        let mut edges = vec![lo];
        edges.extend(bands.iter().copied());
        edges.push(hi);
        for (b, window) in edges.windows(2).enumerate() {
            let (a, bnd) = (window[0], window[1]);
            if bnd <= a {
                continue;
            }
            let color = palette[b.min(palette.len() - 1)];
            let steps = 40;
            let mut d = format!("M {:.2} {:.2} ", scale.to_px(a), base);
            for s in 0..=steps {
                let x = a + (bnd - a) * s as f64 / steps as f64;
                let z = (x - post.mean) / sd;
                let density = (-0.5 * z * z).exp();
                let y = base - density * (strip_h - 26.0);
                d.push_str(&format!("L {:.2} {:.2} ", scale.to_px(x), y));
            }
            d.push_str(&format!("L {:.2} {:.2} Z", scale.to_px(bnd), base));
            out.push_str(&format!(
                "<path d=\"{d}\" fill=\"{color}\" fill-opacity=\"0.65\" stroke=\"none\"/>\n"
            ));
        }
        out.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{base:.2}\" x2=\"{:.2}\" y2=\"{base:.2}\" stroke=\"black\"/>\n",
            scale.p0, scale.p1
        ));
        for (idx, p) in sg.probs.iter().enumerate() {
            out.push_str(&text_el(
                scale.p1 + 6.0,
                base - 12.0 * (sg.probs.len() - idx) as f64 + 8.0,
                9.0,
                "start",
                &format!("P(<{})={:.2}", p.threshold, p.less),
            ));
        }
    }
    for t in &bands {
        let x = scale.to_px(*t);
        out.push_str(&format!(
            "<line x1=\"{x:.2}\" y1=\"30\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#555\" stroke-dasharray=\"3 3\"/>\n",
            height - 20.0
        ));
        out.push_str(&text_el(x, height - 8.0, 10.0, "middle", &format!("{t}")));
    }
    out.push_str("</svg>\n");
    out
}

/// Grouped bar chart of one study metric across scenarios and methods.
/// An empty selection still yields a valid document with axes.
pub fn render_study_svg(result: &StudyResult, metric: &str) -> String {
    let rows: Vec<_> = result.rows.iter().filter(|r| r.metric == metric).collect();
    let mut scenarios: Vec<String> = rows.iter().map(|r| r.scenario.clone()).collect();
    scenarios.sort();
    scenarios.dedup();
    let mut methods: Vec<String> = rows.iter().map(|r| r.method.clone()).collect();
    methods.sort();
    methods.dedup();

    let width = 720.0;
    let height = 360.0;
    let (px0, px1, py0, py1) = (80.0, width - 30.0, height - 70.0, 40.0);
    let mut out = svg_open(width, height);
    out.push_str(&text_el(10.0, 20.0, 13.0, "start", metric));
    out.push_str(&format!(
        "<line x1=\"{px0}\" y1=\"{py0}\" x2=\"{px1}\" y2=\"{py0}\" stroke=\"black\"/>\n<line x1=\"{px0}\" y1=\"{py0}\" x2=\"{px0}\" y2=\"{py1}\" stroke=\"black\"/>\n"
    ));

    let mut vmax = rows.iter().map(|r| r.value).fold(0.0f64, f64::max);
    let mut vmin = rows.iter().map(|r| r.value).fold(0.0f64, f64::min);
    if rows.is_empty() {
        vmax = 1.0;
        vmin = 0.0;
    }
    if vmax == vmin {
        vmax = vmin + 1.0;
    }
    let yscale = LinearScale::new(vmin, vmax, py0, py1);
    for tick in ticks(vmin, vmax, 5) {
        let y = yscale.to_px(tick);
        out.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{px0}\" y2=\"{y:.2}\" stroke=\"black\"/>\n",
            px0 - 4.0
        ));
        out.push_str(&text_el(px0 - 8.0, y + 3.0, 10.0, "end", &format!("{tick:.2}")));
    }

    let palette = ["#2b6cb0", "#c75146", "#48945a", "#d8b940", "#8b5ca6"];
    let group_w = (px1 - px0) / scenarios.len().max(1) as f64;
    let bar_w = (group_w * 0.8) / methods.len().max(1) as f64;
    for (si, scenario) in scenarios.iter().enumerate() {
        let gx = px0 + group_w * (si as f64 + 0.1);
        out.push_str(&text_el(
            gx + group_w * 0.4,
            py0 + 16.0,
            9.0,
            "middle",
            scenario,
        ));
        for (mi, method) in methods.iter().enumerate() {
            if let Some(row) = rows
                .iter()
                .find(|r| &r.scenario == scenario && &r.method == method)
            {
                let x = gx + bar_w * mi as f64;
                let y = yscale.to_px(row.value);
                let y0px = yscale.to_px(0.0f64.clamp(vmin, vmax));
                let (top, h) = if y < y0px { (y, y0px - y) } else { (y0px, y - y0px) };
                out.push_str(&format!(
                    "<rect x=\"{x:.2}\" y=\"{top:.2}\" width=\"{:.2}\" height=\"{h:.2}\" fill=\"{}\"/>\n",
                    bar_w * 0.9,
                    palette[mi % palette.len()]
                ));
            }
        }
    }
    for (mi, method) in methods.iter().enumerate() {
        let x = px0 + 110.0 * mi as f64;
        out.push_str(&format!(
            "<rect x=\"{x:.2}\" y=\"{:.2}\" width=\"10\" height=\"10\" fill=\"{}\"/>\n",
            height - 40.0,
            palette[mi % palette.len()]
        ));
        out.push_str(&text_el(x + 14.0, height - 31.0, 10.0, "start", method));
    }
    out.push_str("</svg>\n");
    out
}

fn ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|i| lo + (hi - lo) * i as f64 / n as f64)
        .collect()
}
