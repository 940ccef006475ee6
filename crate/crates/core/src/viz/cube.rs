use std::fmt::Write;

use chrono::DateTime;

use super::color::CATEGORICAL;
use super::svg::{escape, num, Doc};
use super::RenderSpec;
use crate::ingest::{LocationId, LocationTree};
use crate::matrices::StayInterval;

/// One object's stays, in time order.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub label: String,
    pub stays: Vec<StayInterval>,
}

const Z_SCALE: f64 = 1.2;

fn world_positions(tree: &LocationTree) -> Vec<(f64, f64)> {
    let n = tree.len();
    let coords: Option<Vec<(f64, f64)>> = tree.nodes().iter().map(|node| node.coords).collect();
    let raw = coords.unwrap_or_else(|| {
        (0..n)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / n.max(1) as f64;
                (a.cos(), a.sin())
            })
            .collect()
    });
    let (x0, x1) = raw.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (y0, y1) = raw.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    let unit = |v: f64, lo: f64, hi: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
    raw.iter().map(|&(x, y)| (unit(x, x0, x1), unit(y, y0, y1))).collect()
}

/// Vertices of one trajectory as `(location, time)`: the start of every run
/// of consecutive stays at one location, plus the end of the run when there
/// is only one, so a stationary object still draws a segment.
pub(crate) fn trajectory_vertices(stays: &[StayInterval]) -> Vec<(LocationId, i64)> {
    let mut v: Vec<(LocationId, i64)> = Vec::new();
    let mut last_end = 0;
    for s in stays {
        if v.last().map(|p| p.0) != Some(s.location_id) {
            v.push((s.location_id, s.t_start));
        }
        last_end = s.t_end;
    }
    if v.len() == 1 {
        v.push((v[0].0, last_end.max(v[0].1)));
    }
    v
}

fn stamp(t: i64) -> String {
    DateTime::from_timestamp(t, 0).map_or_else(|| t.to_string(), |d| d.format("%Y-%m-%d %H:%M").to_string())
}

/// Isometric space-time cube (30°): ground plane = location coordinates,
/// vertical axis = time, one polyline per object.
pub fn render_timecube(trajectories: &[Trajectory], tree: &LocationTree, spec: &RenderSpec) -> String {
    let mut doc = Doc::new(spec, "time cube");
    let world = world_positions(tree);
    let (t0, t1) = trajectories
        .iter()
        .flat_map(|t| &t.stays)
        .fold((i64::MAX, i64::MIN), |(a, b), s| (a.min(s.t_start), b.max(s.t_end)));
    let (t0, t1) = if t0 <= t1 { (t0, t1) } else { (0, 1) };
    let tz = |t: i64| if t1 > t0 { (t - t0) as f64 / (t1 - t0) as f64 } else { 0.0 };

    let (c30, s30) = (30f64.to_radians().cos(), 30f64.to_radians().sin());
    let (px, py, pw, ph) = spec.plot_area();
    // projected extent of the unit cube: X in [-c30, c30], Y in [-Z_SCALE, 2*s30]
    let scale = (pw / (2.0 * c30)).min(ph / (2.0 * s30 + Z_SCALE));
    let ox = px + pw / 2.0;
    let oy = py + (ph - (2.0 * s30 + Z_SCALE) * scale) / 2.0 + Z_SCALE * scale;
    let project = |x: f64, y: f64, z: f64| (ox + (x - y) * c30 * scale, oy + ((x + y) * s30 - z * Z_SCALE) * scale);

    let axes = [((1.0, 0.0, 0.0), "x"), ((0.0, 1.0, 0.0), "y"), ((0.0, 0.0, 1.0), "time")];
    let (ax, ay) = project(0.0, 0.0, 0.0);
    for ((x, y, z), label) in axes {
        let (bx, by) = project(x, y, z);
        doc.raw(&format!(
            "<line class=\"axis\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#555555\" stroke-width=\"1\"/>",
            num(ax),
            num(ay),
            num(bx),
            num(by)
        ));
        doc.text(bx, by - 4.0, 11.0, "middle", "axis-label", label);
    }
    if !trajectories.is_empty() {
        doc.text(ax + 6.0, ay + 12.0, 9.0, "start", "axis-label", &stamp(t0));
        let (tx, ty) = project(0.0, 0.0, 1.0);
        doc.text(tx + 6.0, ty + 12.0, 9.0, "start", "axis-label", &stamp(t1));
    }

    let mut body = String::new();
    for (k, traj) in trajectories.iter().enumerate() {
        let verts = trajectory_vertices(&traj.stays);
        if verts.is_empty() {
            continue;
        }
        let points: Vec<String> = verts
            .iter()
            .map(|&(loc, t)| {
                let (x, y) = world.get(loc as usize - 1).copied().unwrap_or((0.5, 0.5));
                let (sx, sy) = project(x, y, tz(t));
                format!("{},{}", num(sx), num(sy))
            })
            .collect();
        let _ = writeln!(
            body,
            "<polyline class=\"trajectory\" data-object=\"{}\" points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>",
            escape(&traj.label),
            points.join(" "),
            CATEGORICAL[k % CATEGORICAL.len()]
        );
    }
    if !body.is_empty() {
        doc.raw(body.trim_end());
    }
    if spec.legend() {
        let x = px + pw + 10.0;
        for (k, traj) in trajectories.iter().enumerate() {
            let y = py + 12.0 * (k as f64 + 1.0);
            doc.raw(&format!(
                "<rect class=\"legend\" x=\"{}\" y=\"{}\" width=\"8\" height=\"8\" fill=\"{}\"/>",
                num(x),
                num(y - 8.0),
                CATEGORICAL[k % CATEGORICAL.len()]
            ));
            doc.text(x + 11.0, y, 9.0, "start", "legend-label", &traj.label);
        }
    }
    doc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::LocationSpec;
    use crate::viz::testutil::{by_class, parse};

    fn tree() -> LocationTree {
        LocationTree::build(&[
            LocationSpec::root("a", "station").at(0.0, 0.0),
            LocationSpec::root("b", "station").at(10.0, 0.0),
            LocationSpec::root("c", "station").at(0.0, 10.0),
        ])
        .unwrap()
    }

    fn stay(loc: LocationId, a: i64, b: i64) -> StayInterval {
        StayInterval {
            object: 0,
            location_id: loc,
            t_start: a,
            t_end: b,
        }
    }

    fn points(doc: &str) -> Vec<Vec<(f64, f64)>> {
        let d = parse(doc);
        by_class(&d, "trajectory")
            .iter()
            .map(|n| {
                n.attribute("points")
                    .unwrap()
                    .split(' ')
                    .map(|p| {
                        let (x, y) = p.split_once(',').unwrap();
                        (x.parse().unwrap(), y.parse().unwrap())
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn no_objects_draws_axes_only() {
        let doc = render_timecube(&[], &tree(), &RenderSpec::default());
        let d = parse(&doc);
        assert_eq!(by_class(&d, "axis").len(), 3);
        assert!(by_class(&d, "trajectory").is_empty());
    }

    #[test]
    fn stationary_object_is_vertical() {
        let t = Trajectory {
            label: "still".into(),
            stays: vec![stay(2, 0, 100), stay(2, 100, 900)],
        };
        let p = points(&render_timecube(&[t], &tree(), &RenderSpec::default()));
        assert_eq!(p[0].len(), 2);
        assert_eq!(p[0][0].0, p[0][1].0);
        assert!(p[0][1].1 < p[0][0].1, "later time is drawn higher");
    }

    #[test]
    fn two_hops_give_three_vertices() {
        let t = Trajectory {
            label: "hopper".into(),
            stays: vec![stay(1, 0, 60), stay(2, 60, 120), stay(3, 120, 180)],
        };
        let spec = RenderSpec::default();
        let doc = render_timecube(&[t.clone()], &tree(), &spec);
        assert_eq!(points(&doc)[0].len(), 3);
        assert_eq!(doc, render_timecube(&[t], &tree(), &spec));
    }
}
