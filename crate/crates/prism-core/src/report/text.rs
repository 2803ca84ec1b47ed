//! Plain-text rendering of an analysis report.

use crate::pipeline::{AnalysisReport, SubgroupEstimate, TreeNodeReport};

fn fmt(x: f64) -> String {
    format!("{x:.4}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or("   .  ".to_string(), fmt)
}

fn estimate_line(sg: &SubgroupEstimate) -> String {
    let ci = match (sg.ci_low, sg.ci_high) {
        (Some(lo), Some(hi)) => format!("[{}, {}]", fmt(lo), fmt(hi)),
        _ => "[no CI]".to_string(),
    };
    let est = if sg.flagged {
        ".".to_string()
    } else {
        fmt(sg.estimate)
    };
    let mut line = format!(
        "n={} ({}/{})  arm0={}  arm1={}  est={} {}",
        sg.n_k,
        sg.n0,
        sg.n1,
        fmt(sg.mean0),
        fmt(sg.mean1),
        est,
        ci,
    );
    for p in &sg.probs {
        line.push_str(&format!(
            "  P(<{t})={l:.3} P(>{t})={g:.3}",
            t = p.threshold,
            l = p.less,
            g = p.greater
        ));
    }
    line
}

/// Indented rule tree with one detail line per terminal subgroup.
pub fn render_tree_text(report: &AnalysisReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "analysis: {:?} / {:?}, n={} ({} control / {} test), seed={}\n",
        report.config.configuration,
        report.config.family,
        report.n,
        report.n0,
        report.n1,
        report.manifest.seed
    ));
    let overall = &report.subgroups[0];
    out.push_str(&format!("Overall  {}\n", estimate_line(overall)));
    out.push_str(&format!(
        "tree: {} (alpha={}, max_depth={}, min_node={}), {} subgroup(s)\n",
        report.tree.source,
        report.tree.alpha,
        report.tree.max_depth,
        report.tree.min_node,
        report.tree.k
    ));
    if report.tree.nodes.len() > 1 {
        render_node(report, 0, "", &mut out);
    }
    if let Some(boot) = &report.bootstrap {
        out.push_str(&format!(
            "bootstrap: B={} (redraws={})\n",
            boot.b, boot.redraws
        ));
        for sg in &boot.subgroups {
            out.push_str(&format!(
                "  k={}  smoothed={}  percentile CI [{}, {}]\n",
                sg.k,
                fmt(sg.smoothed_estimate),
                fmt(sg.ci_low),
                fmt(sg.ci_high)
            ));
        }
    }
    out
}

fn node_label(node: &TreeNodeReport, left: bool) -> String {
    let name = node.covariate.clone().unwrap_or_default();
    match node.threshold {
        Some(c) => {
            if left {
                format!("{name} <= {c:.4}")
            } else {
                format!("{name} > {c:.4}")
            }
        }
        None => format!("{name} = {}", u8::from(!left)),
    }
}

fn render_node(report: &AnalysisReport, id: usize, indent: &str, out: &mut String) {
    let node = &report.tree.nodes[id];
    if node.kind == "split" {
        let (l, r) = (node.left.unwrap(), node.right.unwrap());
        let p = node.p_value.unwrap_or(f64::NAN);
        for (child, is_left, connector) in [(l, true, "|-"), (r, false, "`-")] {
            let child_node = &report.tree.nodes[child];
            out.push_str(&format!(
                "{indent}{connector} {} (p={p:.4})",
                node_label(node, is_left)
            ));
            if child_node.kind == "terminal" {
                let k = child_node.subgroup.unwrap();
                let sg = report.subgroups.iter().find(|s| s.k == k).unwrap();
                out.push_str(&format!("\n{indent}     [k={k}] {}\n", estimate_line(sg)));
            } else {
                out.push('\n');
                let next_indent = format!("{indent}{}  ", if is_left { "|" } else { " " });
                render_node(report, child, &next_indent, out);
            }
        }
    }
}

/// Fixed-width table of the subgroup estimates.
pub fn render_estimates_text(report: &AnalysisReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<4} {:<40} {:>6} {:>9} {:>9} {:>9} {:>9} {:>9}\n",
        "k", "rule", "n", "arm0", "arm1", "est", "ci_low", "ci_high"
    ));
    for sg in &report.subgroups {
        let rule = if sg.rule.len() > 40 {
            format!("{}...", &sg.rule[..37])
        } else {
            sg.rule.clone()
        };
        out.push_str(&format!(
            "{:<4} {:<40} {:>6} {:>9} {:>9} {:>9} {:>9} {:>9}\n",
            sg.k,
            rule,
            sg.n_k,
            fmt(sg.mean0),
            fmt(sg.mean1),
            if sg.flagged {
                "  .".to_string()
            } else {
                fmt(sg.estimate)
            },
            fmt_opt(sg.ci_low),
            fmt_opt(sg.ci_high),
        ));
    }
    out
}
