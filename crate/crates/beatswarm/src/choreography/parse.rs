//! Line-oriented score DSL.
//!
//! ```text
//! # comment
//! swarm 12
//! primitive rotate from 0.0 to 4.0 {angular_displacement=6.283} layout=circle(12,1.5)
//! primitive wave from 4.0 to 8.0 {amplitude=0.3} layout=grid(3,4,1.0)
//! waypoint 2.0 drone 3 -> (1.0, 2.0, 1.5)
//! ```
//!
//! Parsing is total: it either returns a structurally valid [`Score`] or a
//! report carrying only `SyntaxError` entries with line numbers. Semantic
//! problems (unknown primitives, bad beats, limit violations) are the
//! validator's job, so e.g. `primitive warp ...` parses fine.

use super::{Failure, FailureCode, LayoutDirective, Modality, Score, ValidationReport};
use crate::core::Vec3;
use crate::primitives::PrimitiveSpec;
use std::collections::BTreeMap;

/// Default flight altitude for layouts that do not specify one.
pub const DEFAULT_LAYOUT_ALTITUDE: f64 = 1.0;

/// Parses score DSL text. `Err` carries a report whose entries are all
/// `SyntaxError`s; it never panics or aborts early, so one pass reports
/// every malformed line.
pub fn parse_score(text: &str) -> Result<Score, ValidationReport> {
    let mut report = ValidationReport::default();
    let mut segments = Vec::new();
    let mut waypoints: BTreeMap<i64, Vec<(usize, Vec3)>> = BTreeMap::new();
    let mut declared_swarm: Option<usize> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut err = |message: String| {
            report.failures.push(Failure {
                code: FailureCode::SyntaxError,
                location: format!("line {line_no}"),
                drones: vec![],
                message,
            });
        };
        let Some(keyword) = line.split_whitespace().next() else { continue };
        match keyword {
            "swarm" => match line.split_whitespace().nth(1).map(str::parse::<usize>) {
                Some(Ok(n)) if n > 0 => declared_swarm = Some(n),
                _ => err(format!("expected `swarm <count>`, got `{line}`")),
            },
            "primitive" => match parse_primitive_line(line) {
                Ok(segment) => segments.push(segment),
                Err(message) => err(message),
            },
            "waypoint" => match parse_waypoint_line(line) {
                Ok((t, drone, target)) => {
                    waypoints.entry(Score::time_key(t)).or_default().push((drone, target));
                }
                Err(message) => err(message),
            },
            other => err(format!("unknown directive `{other}`")),
        }
    }

    if !segments.is_empty() && !waypoints.is_empty() {
        report.push(
            FailureCode::SyntaxError,
            "score",
            vec![],
            "a score must use a single modality; found both primitive and waypoint lines",
        );
    }
    if segments.is_empty() && waypoints.is_empty() && report.is_empty() {
        report.push(FailureCode::SyntaxError, "score", vec![], "score contains no actions");
    }
    if !report.is_empty() {
        return Err(report);
    }

    // keep segments in time order regardless of line order
    segments.sort_by(|a: &super::Segment, b: &super::Segment| {
        a.spec.t_start.total_cmp(&b.spec.t_start)
    });

    let modality = if segments.is_empty() { Modality::Waypoints } else { Modality::Primitives };
    let inferred = match modality {
        Modality::Primitives => segments.iter().map(|s| s.layout.drone_count()).max().unwrap_or(0),
        Modality::Waypoints => waypoints
            .values()
            .flat_map(|v| v.iter().map(|(d, _)| d + 1))
            .max()
            .unwrap_or(0),
    };
    let swarm_size = declared_swarm.unwrap_or(inferred);

    Ok(Score { modality, swarm_size, segments, waypoints })
}

fn parse_primitive_line(line: &str) -> Result<super::Segment, String> {
    // primitive <name> from <t_i> to <t_f> {k=v,...} layout=<...>
    let body = line.strip_prefix("primitive").unwrap().trim();
    let mut tokens = body.split_whitespace();
    let name = tokens.next().ok_or("missing primitive name")?.to_string();

    let expect = |tok: Option<&str>, want: &str| -> Result<(), String> {
        match tok {
            Some(t) if t == want => Ok(()),
            other => Err(format!("expected `{want}`, got `{}`", other.unwrap_or("end of line"))),
        }
    };
    expect(tokens.next(), "from")?;
    let t_start: f64 = parse_number(tokens.next().ok_or("missing start time")?)?;
    expect(tokens.next(), "to")?;
    let t_end: f64 = parse_number(tokens.next().ok_or("missing end time")?)?;

    let rest: String = tokens.collect::<Vec<_>>().join(" ");
    let (params_text, layout_text) = match rest.find("layout=") {
        Some(pos) => (rest[..pos].trim().to_string(), rest[pos + "layout=".len()..].trim().to_string()),
        None => return Err("missing `layout=`".into()),
    };
    let params = parse_params(&params_text)?;
    let layout = parse_layout(&layout_text)?;

    Ok(super::Segment {
        spec: PrimitiveSpec { name, params, t_start, t_end },
        layout,
    })
}

fn parse_params(text: &str) -> Result<BTreeMap<String, f64>, String> {
    let inner = text
        .strip_prefix('{')
        .and_then(|t| t.strip_suffix('}'))
        .ok_or_else(|| format!("expected `{{param=value,...}}`, got `{text}`"))?
        .trim();
    let mut params = BTreeMap::new();
    if inner.is_empty() {
        return Ok(params);
    }
    for pair in inner.split(',') {
        let mut kv = pair.splitn(2, '=');
        let key = kv.next().unwrap_or("").trim();
        let value = kv.next().ok_or_else(|| format!("parameter `{pair}` has no value"))?.trim();
        if key.is_empty() {
            return Err(format!("empty parameter name in `{pair}`"));
        }
        params.insert(key.to_string(), parse_number(value)?);
    }
    Ok(params)
}

fn parse_layout(text: &str) -> Result<LayoutDirective, String> {
    let open = text.find('(').ok_or_else(|| format!("layout `{text}` missing `(`"))?;
    let close = text.rfind(')').ok_or_else(|| format!("layout `{text}` missing `)`"))?;
    let kind = &text[..open];
    let args: Vec<&str> = text[open + 1..close]
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    let num = |i: usize| -> Result<f64, String> {
        parse_number(args.get(i).copied().ok_or(format!("layout `{kind}` missing argument {i}"))?)
    };
    match kind {
        // circle(n, radius [, cx, cy, z [, phase]])
        "circle" => {
            if !(args.len() == 2 || args.len() == 5 || args.len() == 6) {
                return Err(format!("circle layout takes 2, 5, or 6 arguments, got {}", args.len()));
            }
            let count = num(0)? as usize;
            let radius = num(1)?;
            let center = if args.len() >= 5 {
                Vec3::new(num(2)?, num(3)?, num(4)?)
            } else {
                Vec3::new(0.0, 0.0, DEFAULT_LAYOUT_ALTITUDE)
            };
            let phase = if args.len() == 6 { num(5)? } else { 0.0 };
            Ok(LayoutDirective::Circle { count, radius, center, phase })
        }
        // grid(rows, cols, spacing [, cx, cy, z])
        "grid" => {
            if !(args.len() == 3 || args.len() == 6) {
                return Err(format!("grid layout takes 3 or 6 arguments, got {}", args.len()));
            }
            let rows = num(0)? as usize;
            let cols = num(1)? as usize;
            let spacing = num(2)?;
            let center = if args.len() == 6 {
                Vec3::new(num(3)?, num(4)?, num(5)?)
            } else {
                Vec3::new(0.0, 0.0, DEFAULT_LAYOUT_ALTITUDE)
            };
            Ok(LayoutDirective::Grid { rows, cols, spacing, center })
        }
        other => Err(format!("unknown layout `{other}`")),
    }
}

fn parse_waypoint_line(line: &str) -> Result<(f64, usize, Vec3), String> {
    // waypoint <t> drone <n> -> (x,y,z)
    let body = line.strip_prefix("waypoint").unwrap().trim();
    let mut tokens = body.split_whitespace();
    let t = parse_number(tokens.next().ok_or("missing waypoint time")?)?;
    match tokens.next() {
        Some("drone") => {}
        other => return Err(format!("expected `drone`, got `{}`", other.unwrap_or("end of line"))),
    }
    let drone: usize = tokens
        .next()
        .ok_or("missing drone index")?
        .parse()
        .map_err(|_| "drone index must be a non-negative integer".to_string())?;
    match tokens.next() {
        Some("->") => {}
        other => return Err(format!("expected `->`, got `{}`", other.unwrap_or("end of line"))),
    }
    let tuple: String = tokens.collect::<Vec<_>>().join("");
    let target = parse_tuple(&tuple)?;
    Ok((t, drone, target))
}

fn parse_tuple(text: &str) -> Result<Vec3, String> {
    let inner = text
        .strip_prefix('(')
        .and_then(|t| t.strip_suffix(')'))
        .ok_or_else(|| format!("malformed tuple `{text}`"))?;
    let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("tuple `{text}` must have exactly 3 components"));
    }
    Ok(Vec3::new(parse_number(parts[0])?, parse_number(parts[1])?, parse_number(parts[2])?))
}

fn parse_number(text: &str) -> Result<f64, String> {
    text.parse::<f64>().map_err(|_| format!("`{text}` is not a number"))
}
