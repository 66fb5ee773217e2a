//! Top-down SVG drawings of scenes, states and plans.

use std::fmt::Write;

use improvise::feasibility::SceneSpec;
use improvise::geometry::Pose;
use improvise::planner::Plan;
use improvise::state::WorldState;

const PX_PER_M: f64 = 500.0;
const MARGIN: f64 = 20.0;

struct Canvas<'a> {
    scene: &'a SceneSpec<f64>,
    out: String,
}

impl Canvas<'_> {
    fn x(&self, x: f64) -> f64 {
        MARGIN + (x - self.scene.workspace[0][0]) * PX_PER_M
    }

    /// SVG y grows downward.
    fn y(&self, y: f64) -> f64 {
        MARGIN + (self.scene.workspace[1][1] - y) * PX_PER_M
    }

    fn size(&self) -> (f64, f64) {
        let [lo, hi] = self.scene.workspace;
        (2.0 * MARGIN + (hi[0] - lo[0]) * PX_PER_M, 2.0 * MARGIN + (hi[1] - lo[1]) * PX_PER_M)
    }

    fn object(&mut self, id: &str, half: [f64; 3], pose: &Pose<f64>, fixed: bool) {
        let t = pose.translation();
        let (cx, cy) = (self.x(t[0]), self.y(t[1]));
        let (w, h) = (2.0 * half[0] * PX_PER_M, 2.0 * half[1] * PX_PER_M);
        let deg = -pose.yaw().to_degrees();
        let fill = if fixed { "#999999" } else { "#8fb3d9" };
        let _ = writeln!(
            self.out,
            r#"    <rect class="object" data-id="{id}" x="{:.2}" y="{:.2}" width="{w:.2}" height="{h:.2}" fill="{fill}" stroke="black" transform="rotate({deg:.3} {cx:.2} {cy:.2})"/>"#,
            cx - w / 2.0,
            cy - h / 2.0,
        );
        let _ = writeln!(
            self.out,
            r#"    <text x="{cx:.2}" y="{cy:.2}" font-size="10" text-anchor="middle">{}</text>"#,
            escape(id)
        );
    }

    fn state(&mut self, state: &WorldState<f64>) {
        let scene = self.scene;
        for o in &scene.objects {
            match (&o.pose, state.pose(&o.id)) {
                (Some(p), _) => self.object(o.id.as_str(), o.half_extents, p, true),
                (None, Some(p)) => self.object(o.id.as_str(), o.half_extents, p, false),
                (None, None) => {}
            }
        }
    }

    fn polyline(&mut self, pts: &[Pose<f64>]) {
        let coords: Vec<String> = pts
            .iter()
            .map(|p| {
                let t = p.translation();
                format!("{:.2},{:.2}", self.x(t[0]), self.y(t[1]))
            })
            .collect();
        let _ = writeln!(
            self.out,
            r#"    <polyline class="trajectory" points="{}" fill="none" stroke="crimson" stroke-width="2"/>"#,
            coords.join(" ")
        );
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn document(scene: &SceneSpec<f64>, body: impl FnOnce(&mut Canvas<'_>)) -> String {
    let mut c = Canvas { scene, out: String::new() };
    let (w, h) = c.size();
    let _ = writeln!(
        c.out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#
    );
    let [lo, hi] = scene.workspace;
    let _ = writeln!(
        c.out,
        r#"  <rect class="workspace" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="gray"/>"#,
        c.x(lo[0]),
        c.y(hi[1]),
        (hi[0] - lo[0]) * PX_PER_M,
        (hi[1] - lo[1]) * PX_PER_M
    );
    body(&mut c);
    c.out.push_str("</svg>\n");
    c.out
}

/// One frame showing `state`.
pub fn render_state(scene: &SceneSpec<f64>, state: &WorldState<f64>) -> String {
    document(scene, |c| {
        c.out.push_str("  <g class=\"frame\">\n");
        c.state(state);
        c.out.push_str("  </g>\n");
    })
}

/// One frame per step: the state after the step and the path that led there.
pub fn render_plan(scene: &SceneSpec<f64>, plan: &Plan<f64>) -> String {
    document(scene, |c| {
        if plan.steps.is_empty() {
            c.out.push_str("  <g class=\"frame\" data-step=\"0\">\n");
            c.state(&plan.final_state);
            c.out.push_str("  </g>\n");
        }
        for (i, step) in plan.steps.iter().enumerate() {
            let _ = writeln!(
                c.out,
                r#"  <g class="frame" data-step="{}" data-action="{}">"#,
                i + 1,
                escape(&step.action)
            );
            c.state(&step.goal_state);
            c.polyline(&step.trajectory);
            c.out.push_str("  </g>\n");
        }
    })
}
