//! Plain-text maze format.
//!
//! ```text
//! // comment lines start with two slashes
//! RANDOM_REMOVAL 0.15 5
//! S...
//! .#..
//! ...G
//! REMOVED:
//! 0,1,U
//! *,*,R
//! ```
//!
//! Grid rows use `.` free, `#` obstacle, `S` start, `G` goal. The optional
//! `RANDOM_REMOVAL fraction seed` header must precede the grid. Lines in the
//! `REMOVED:` section are `row,col,action`; `*` in the row or column position
//! matches every row or column.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::{Action, GridSpec, GridWorld};
use crate::{Error, Result};

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::MazeParse {
        line,
        msg: msg.into(),
    }
}

fn parse_coord(tok: &str, bound: usize, line: usize) -> Result<Vec<usize>> {
    let tok = tok.trim();
    if tok == "*" {
        return Ok((0..bound).collect());
    }
    let v: usize = tok
        .parse()
        .map_err(|_| err(line, format!("bad coordinate {tok:?}")))?;
    if v >= bound {
        return Err(err(line, format!("coordinate {v} out of range")));
    }
    Ok(vec![v])
}

/// Parses a maze file into a [`GridSpec`]. Validation of the spec's
/// invariants happens in [`super::build_maze`].
pub fn parse_maze(src: &str) -> Result<GridSpec> {
    let mut rows: Vec<(usize, &str)> = Vec::new();
    let mut removed_lines: Vec<(usize, &str)> = Vec::new();
    let mut random: Option<(f64, u64)> = None;
    let mut in_removed = false;

    for (i, raw) in src.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with("//") {
            continue;
        }
        if in_removed {
            removed_lines.push((line_no, line));
        } else if line == "REMOVED:" {
            in_removed = true;
        } else if let Some(rest) = line.strip_prefix("RANDOM_REMOVAL") {
            if !rows.is_empty() {
                return Err(err(line_no, "RANDOM_REMOVAL must precede the grid"));
            }
            let parts: Vec<&str> = rest.split_whitespace().collect();
            let [frac, seed] = parts[..] else {
                return Err(err(line_no, "expected RANDOM_REMOVAL <fraction> <seed>"));
            };
            let frac: f64 = frac
                .parse()
                .map_err(|_| err(line_no, "bad removal fraction"))?;
            let seed: u64 = seed.parse().map_err(|_| err(line_no, "bad removal seed"))?;
            random = Some((frac, seed));
        } else {
            rows.push((line_no, line));
        }
    }

    let Some(&(_, first)) = rows.first() else {
        return Err(err(0, "no grid rows"));
    };
    let width = first.chars().count();
    let height = rows.len();
    let mut obstacles = BTreeSet::new();
    let mut start = None;
    let mut goal = None;
    for (r, &(line_no, row)) in rows.iter().enumerate() {
        if row.chars().count() != width {
            return Err(err(line_no, format!("row has {} cells, expected {width}", row.chars().count())));
        }
        for (c, ch) in row.chars().enumerate() {
            let cell = r * width + c;
            match ch {
                '.' => {}
                '#' => {
                    obstacles.insert(cell);
                }
                'S' if start.is_none() => start = Some(cell),
                'G' if goal.is_none() => goal = Some(cell),
                'S' | 'G' => return Err(err(line_no, format!("duplicate {ch}"))),
                other => return Err(err(line_no, format!("unknown cell {other:?}"))),
            }
        }
    }
    let start = start.ok_or_else(|| err(0, "missing start S"))?;
    let goal = goal.ok_or_else(|| err(0, "missing goal G"))?;

    let mut removed_actions = BTreeSet::new();
    for (line_no, line) in removed_lines {
        let parts: Vec<&str> = line.split(',').collect();
        let [r, c, a] = parts[..] else {
            return Err(err(line_no, "expected row,col,action"));
        };
        let a = a.trim();
        let action = a
            .chars()
            .next()
            .filter(|_| a.len() == 1)
            .and_then(Action::from_code)
            .ok_or_else(|| err(line_no, format!("bad action {a:?}")))?;
        for row in parse_coord(r, height, line_no)? {
            for col in parse_coord(c, width, line_no)? {
                removed_actions.insert((row * width + col, action));
            }
        }
    }

    let (removal_fraction, seed) = random.unwrap_or((0.0, 0));
    Ok(GridSpec {
        width,
        height,
        obstacles,
        start,
        goal,
        removed_actions,
        removal_fraction,
        seed,
    })
}

/// Writes a built world back to text, listing every unavailable action
/// explicitly (random removals are already materialized).
pub fn write_maze(world: &GridWorld) -> String {
    let mut out = String::new();
    for r in 0..world.height() {
        for c in 0..world.width() {
            let s = world.state(r, c);
            out.push(if s == world.start() {
                'S'
            } else if s == world.goal() {
                'G'
            } else if world.is_obstacle(s) {
                '#'
            } else {
                '.'
            });
        }
        out.push('\n');
    }
    let removed: Vec<_> = (0..world.num_states())
        .flat_map(|i| Action::ALL.into_iter().map(move |a| (i, a)))
        .filter(|&(i, a)| !world.is_available(super::StateId(i), a))
        .collect();
    if !removed.is_empty() {
        out.push_str("REMOVED:\n");
        for (i, a) in removed {
            let (r, c) = world.coords(super::StateId(i));
            let _ = writeln!(out, "{r},{c},{}", a.code());
        }
    }
    out
}
