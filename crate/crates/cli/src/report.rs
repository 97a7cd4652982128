//! Report rendering: box plots, path overlays, and deceleration curves.
//!
//! Everything is generated from the evaluation CSVs, never from in-memory
//! state, so regenerating a report from the same inputs is byte-identical.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path as FsPath;

use guidetrain_core::env::Episode;
use guidetrain_core::geometry::{eval_path_family, PATH_RESOLUTION};
use guidetrain_core::text::sig9;
use guidetrain_core::Real;

use crate::config::Config;
use crate::stages::read_eval_rows;
use crate::svg::{Frame, Svg};

pub const POLICIES: [&str; 3] = ["baseline", "g-only", "g-plus-h"];
const COLORS: [&str; 3] = ["#777777", "#d9541e", "#1e6fd9"];

/// Linear-interpolation quantile of sorted values.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

struct BoxStats {
    min: f64,
    q1: f64,
    median: f64,
    q3: f64,
    max: f64,
}

fn box_stats(values: &mut Vec<f64>) -> Option<BoxStats> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Some(BoxStats {
        min: values[0],
        q1: quantile(values, 0.25),
        median: quantile(values, 0.5),
        q3: quantile(values, 0.75),
        max: values[values.len() - 1],
    })
}

fn box_plot_svg(title: &str, unit: &str, stats: &[(String, BoxStats)]) -> String {
    let (w, h) = (420.0, 300.0);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (_, s) in stats {
        lo = lo.min(s.min);
        hi = hi.max(s.max);
    }
    if !lo.is_finite() || !hi.is_finite() {
        lo = 0.0;
        hi = 1.0;
    }
    let pad = ((hi - lo) * 0.08).max(1e-6);
    let frame = Frame {
        x_min: 0.0,
        x_max: stats.len() as f64,
        y_min: lo - pad,
        y_max: hi + pad,
        width: w,
        height: h,
        margin: 42.0,
    };
    let mut svg = Svg::new(w, h);
    svg.text(12.0, 20.0, 13.0, &format!("{title} ({unit})"));
    // Axis and scale labels.
    svg.line(frame.x(0.0) - 6.0, frame.y(frame.y_min), frame.x(0.0) - 6.0, frame.y(frame.y_max), "#333333", 1.0);
    for tick in [frame.y_min, (frame.y_min + frame.y_max) / 2.0, frame.y_max] {
        svg.text(2.0, frame.y(tick) + 4.0, 9.0, &format!("{tick:.2}"));
    }
    for (k, (name, s)) in stats.iter().enumerate() {
        let cx = frame.x(k as f64 + 0.5);
        let bw = 36.0;
        let color = COLORS[k % COLORS.len()];
        svg.line(cx, frame.y(s.min), cx, frame.y(s.q1), "#333333", 1.0);
        svg.line(cx, frame.y(s.q3), cx, frame.y(s.max), "#333333", 1.0);
        svg.line(cx - 10.0, frame.y(s.min), cx + 10.0, frame.y(s.min), "#333333", 1.0);
        svg.line(cx - 10.0, frame.y(s.max), cx + 10.0, frame.y(s.max), "#333333", 1.0);
        svg.rect(
            cx - bw / 2.0,
            frame.y(s.q3),
            bw,
            (frame.y(s.q1) - frame.y(s.q3)).max(0.5),
            "#f3f3f3",
            color,
        );
        svg.line(cx - bw / 2.0, frame.y(s.median), cx + bw / 2.0, frame.y(s.median), color, 2.0);
        svg.text(cx - 26.0, h - 12.0, 11.0, name);
    }
    svg.finish()
}

/// Renders the full report bundle into `report_dir`.
pub fn write_report(
    _cfg: &Config,
    eval_dir: &FsPath,
    report_dir: &FsPath,
) -> Result<(), std::io::Error> {
    std::fs::create_dir_all(report_dir)?;
    let rows = read_eval_rows(&eval_dir.join("episodes.csv"))
        .map_err(|e| std::io::Error::other(e.to_string()))?;

    // Box plots per metric, plus a flat CSV of the same numbers.
    let mut stats_csv = String::from("policy,metric,count,min,q1,median,q3,max\n");
    for (metric, title, unit, file) in [
        ("time_s", "Completion time", "s", "box_completion_time.svg"),
        ("frechet_m", "Path error", "m", "box_frechet.svg"),
        ("sal", "Human motion smoothness", "spectral arc length", "box_sal.svg"),
    ] {
        let mut per_policy = Vec::new();
        for policy in POLICIES {
            let mut values: Vec<f64> = rows
                .iter()
                .filter(|r| r.policy == policy)
                .filter_map(|r| match metric {
                    "time_s" => Some(r.time_s),
                    "frechet_m" => Some(r.frechet),
                    _ => r.sal,
                })
                .collect();
            let n = values.len();
            if let Some(s) = box_stats(&mut values) {
                stats_csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    policy,
                    metric,
                    n,
                    sig9(s.min),
                    sig9(s.q1),
                    sig9(s.median),
                    sig9(s.q3),
                    sig9(s.max)
                ));
                per_policy.push((policy.to_string(), s));
            }
        }
        std::fs::write(report_dir.join(file), box_plot_svg(title, unit, &per_policy))?;
    }
    std::fs::write(report_dir.join("box_stats.csv"), stats_csv)?;

    // Path overlays: goal (dashed) vs robot and human traces, first user and
    // trial of each (path, policy) pair.
    let family: BTreeMap<String, Vec<(f64, f64)>> = eval_path_family::<Real>()
        .into_iter()
        .map(|(name, p)| {
            let pts = p
                .resample(PATH_RESOLUTION)
                .expect("goal resample")
                .points()
                .iter()
                .map(|v| (v.x, v.y))
                .collect();
            (name, pts)
        })
        .collect();
    for (path_name, goal_pts) in &family {
        for policy in POLICIES {
            let traj_path = eval_dir
                .join("trajectories")
                .join(format!("traj_{policy}_{path_name}_u0_t0.csv"));
            if !traj_path.exists() {
                continue;
            }
            let episode =
                Episode::<Real>::read_csv(std::io::BufReader::new(std::fs::File::open(&traj_path)?))
                    .map_err(|e| std::io::Error::other(e.to_string()))?;
            let robot: Vec<(f64, f64)> =
                episode.rows.iter().map(|r| (r.robot.x, r.robot.y)).collect();
            let human: Vec<(f64, f64)> =
                episode.rows.iter().map(|r| (r.human.x, r.human.y)).collect();

            let all = goal_pts.iter().chain(&robot).chain(&human);
            let (mut x0, mut x1, mut y0, mut y1) =
                (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
            for &(x, y) in all {
                x0 = x0.min(x);
                x1 = x1.max(x);
                y0 = y0.min(y);
                y1 = y1.max(y);
            }
            let frame = Frame {
                x_min: x0 - 0.2,
                x_max: x1 + 0.2,
                y_min: y0 - 0.2,
                y_max: y1 + 0.2,
                width: 480.0,
                height: 360.0,
                margin: 30.0,
            };
            let map = |pts: &[(f64, f64)]| -> Vec<(f64, f64)> {
                pts.iter().map(|&(x, y)| (frame.x(x), frame.y(y))).collect()
            };
            let mut svg = Svg::new(480.0, 360.0);
            svg.text(10.0, 18.0, 12.0, &format!("{path_name} / {policy}"));
            svg.polyline(&map(goal_pts), "#333333", 1.5, true);
            svg.polyline(&map(&robot), "#d9541e", 1.5, false);
            svg.polyline(&map(&human), "#1e6fd9", 1.5, false);
            svg.text(10.0, 34.0, 10.0, "goal (dashed)  robot (orange)  human (blue)");
            std::fs::write(
                report_dir.join(format!("overlay_{path_name}_{policy}.svg")),
                svg.finish(),
            )?;
        }
    }

    // Deceleration curves from the CSV.
    let decel = std::fs::read_to_string(eval_dir.join("deceleration.csv"))?;
    let mut robot_curves: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    let mut human_curves: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for line in decel.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() < 4 {
            continue;
        }
        let offset: f64 = f[1].parse().unwrap_or(f64::NAN);
        robot_curves
            .entry(f[0].to_string())
            .or_default()
            .push((offset, f[2].parse().unwrap_or(f64::NAN)));
        human_curves
            .entry(f[0].to_string())
            .or_default()
            .push((offset, f[3].parse().unwrap_or(f64::NAN)));
    }
    for (title, curves, file) in [
        ("Robot speed before stop", &robot_curves, "deceleration_robot.svg"),
        ("Human speed before stop", &human_curves, "deceleration_human.svg"),
    ] {
        let mut vmax: f64 = 0.05;
        for pts in curves.values() {
            for &(_, v) in pts {
                if v.is_finite() {
                    vmax = vmax.max(v);
                }
            }
        }
        let frame = Frame {
            x_min: -20.0,
            x_max: -1.0,
            y_min: 0.0,
            y_max: vmax * 1.1,
            width: 480.0,
            height: 280.0,
            margin: 40.0,
        };
        let mut svg = Svg::new(480.0, 280.0);
        svg.text(10.0, 18.0, 12.0, &format!("{title} (m/s vs timesteps before stop)"));
        for (k, policy) in POLICIES.iter().enumerate() {
            if let Some(pts) = curves.get(*policy) {
                let mapped: Vec<(f64, f64)> =
                    pts.iter().map(|&(o, v)| (frame.x(o), frame.y(v))).collect();
                svg.polyline(&mapped, COLORS[k], 1.5, false);
                svg.text(352.0, 34.0 + 14.0 * k as f64, 10.0, policy);
                svg.line(330.0, 30.0 + 14.0 * k as f64, 348.0, 30.0 + 14.0 * k as f64, COLORS[k], 2.0);
            }
        }
        std::fs::write(report_dir.join(file), svg.finish())?;
    }

    // Keep a copy of the box data medians in a machine-friendly summary.
    let mut f = std::io::BufWriter::new(std::fs::File::create(report_dir.join("medians.csv"))?);
    writeln!(f, "policy,metric,median")?;
    for policy in POLICIES {
        for metric in ["time_s", "frechet_m", "sal"] {
            let mut values: Vec<f64> = rows
                .iter()
                .filter(|r| r.policy == policy)
                .filter_map(|r| match metric {
                    "time_s" => Some(r.time_s),
                    "frechet_m" => Some(r.frechet),
                    _ => r.sal,
                })
                .collect();
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            if !values.is_empty() {
                writeln!(f, "{},{},{}", policy, metric, sig9(quantile(&values, 0.5)))?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.25), 1.75);
    }
}
