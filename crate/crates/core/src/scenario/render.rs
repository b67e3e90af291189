use std::fmt::Write as _;
use std::path::Path;

use super::{format_number as num, ScenarioFile};
use crate::error::{Error, Result};
use crate::game::Profile;

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// SVG document for `profile` drawn over the scenario's workspace.
///
/// One SVG unit is one workspace unit; the y axis points up as in the
/// workspace, done with a flip transform on the content group.
pub fn svg_string(scenario: &ScenarioFile, profile: &Profile) -> Result<String> {
    if profile.plans.is_empty() {
        return Err(Error::invalid("profile has no plans to render"));
    }
    let ws = &scenario.workspace;
    let (w, h) = (ws.max[0] - ws.min[0], ws.max[1] - ws.min[1]);
    let stroke = w.max(h) / 400.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{} {} {} {}" width="{}" height="{}">"#,
        num(ws.min[0]),
        num(ws.min[1]),
        num(w),
        num(h),
        num(w),
        num(h)
    );
    let _ = writeln!(s, "<title>{}</title>", escape(&scenario.name));
    // y' = min_y + max_y - y
    let _ = writeln!(
        s,
        r#"<g transform="matrix(1 0 0 -1 0 {})">"#,
        num(ws.min[1] + ws.max[1])
    );
    let _ = writeln!(
        s,
        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black" stroke-width="{}"/>"#,
        num(ws.min[0]),
        num(ws.min[1]),
        num(w),
        num(h),
        num(stroke * 2.0)
    );
    for plan in &profile.plans {
        let agent = scenario
            .agents
            .get(plan.agent_id)
            .ok_or_else(|| Error::invalid(format!("plan for agent {} not in scenario", plan.agent_id)))?;
        let color = COLORS[plan.agent_id % COLORS.len()];
        let [hx, hy] = agent.half_extent;
        let last = plan.goal_step.min(plan.expected_trajectory.len() - 1);
        let _ = writeln!(s, r#"<g id="agent{}">"#, plan.agent_id);
        for (t, p) in plan.expected_trajectory[..=last].iter().enumerate() {
            let opacity = 0.1 + 0.4 * (t as f64 + 1.0) / (last as f64 + 1.0);
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{color}" fill-opacity="{}" stroke="none"/>"#,
                num(p.x - hx),
                num(p.y - hy),
                num(2.0 * hx),
                num(2.0 * hy),
                num(opacity)
            );
        }
        let points: Vec<String> = plan.expected_trajectory[..=last]
            .iter()
            .map(|p| format!("{},{}", num(p.x), num(p.y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="{}"/>"#,
            points.join(" "),
            num(stroke * 2.0)
        );
        let [gx, gy] = agent.goal;
        let arm = hx.min(hy) / 2.0;
        let _ = writeln!(
            s,
            r#"<path d="M {} {} L {} {} M {} {} L {} {}" stroke="{color}" stroke-width="{}"/>"#,
            num(gx - arm),
            num(gy - arm),
            num(gx + arm),
            num(gy + arm),
            num(gx - arm),
            num(gy + arm),
            num(gx + arm),
            num(gy - arm),
            num(stroke * 3.0)
        );
        s.push_str("</g>\n");
    }
    s.push_str("</g>\n</svg>\n");
    Ok(s)
}

pub fn render_svg(scenario: &ScenarioFile, profile: &Profile, path: &Path) -> Result<()> {
    let svg = svg_string(scenario, profile)?;
    std::fs::write(path, svg)?;
    Ok(())
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
