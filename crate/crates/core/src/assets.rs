//! Bundled maze layouts.
//!
//! `maze1`..`maze5` are 20x20 approximations of the benchmark mazes, written
//! from their verbal descriptions. `desk10` is a 10x10 maze with two
//! obstacles for quick experiments.

use std::path::Path;

use crate::gridworld::{build_maze, parse_maze, GridWorld};
use crate::Result;

const BUILTIN: &[(&str, &str)] = &[
    ("maze1", include_str!("../assets/maze1.maze")),
    ("maze2", include_str!("../assets/maze2.maze")),
    ("maze3", include_str!("../assets/maze3.maze")),
    ("maze4", include_str!("../assets/maze4.maze")),
    ("maze5", include_str!("../assets/maze5.maze")),
    ("desk10", include_str!("../assets/desk10.maze")),
];

pub const BENCHMARK_MAZES: [&str; 5] = ["maze1", "maze2", "maze3", "maze4", "maze5"];

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    BUILTIN.iter().map(|(name, _)| *name)
}

pub fn builtin_source(name: &str) -> Option<&'static str> {
    BUILTIN.iter().find(|(n, _)| *n == name).map(|(_, src)| *src)
}

/// Loads a maze by bundled name, or from a file path otherwise.
pub fn load_maze(name_or_path: &str) -> Result<GridWorld> {
    let spec = match builtin_source(name_or_path) {
        Some(src) => parse_maze(src)?,
        None => parse_maze(&std::fs::read_to_string(Path::new(name_or_path))?)?,
    };
    build_maze(&spec)
}
