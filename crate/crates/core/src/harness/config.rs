use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::embeddings::Method;
use crate::gridworld::GridWorld;
use crate::mdpgraph::expected_samples_full_coverage;
use crate::{Error, Result};

/// How many transitions to sample before building the graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleBudget {
    Count(usize),
    /// Share of the coupon-collector estimate for the world's
    /// (state, action) pairs, rounded to the nearest integer.
    Fraction(f64),
    /// Every valid transition, enumerated rather than sampled.
    Full,
}

impl SampleBudget {
    /// Sample count, or `None` for [`SampleBudget::Full`].
    pub fn resolve(self, world: &GridWorld) -> Option<usize> {
        match self {
            SampleBudget::Count(n) => Some(n),
            SampleBudget::Fraction(f) => {
                Some((f * expected_samples_full_coverage(world.num_state_actions())).round() as usize)
            }
            SampleBudget::Full => None,
        }
    }

    /// File-name-safe label.
    pub fn label(self) -> String {
        match self {
            SampleBudget::Count(n) => format!("s{n}"),
            SampleBudget::Fraction(f) => format!("s{}pct", format_percent(f)),
            SampleBudget::Full => "full".into(),
        }
    }
}

fn format_percent(f: f64) -> String {
    format!("{}", (f * 100.0 * 1e6).round() / 1e6)
}

impl fmt::Display for SampleBudget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SampleBudget::Count(n) => write!(f, "{n}"),
            SampleBudget::Fraction(x) => write!(f, "{}%", format_percent(*x)),
            SampleBudget::Full => f.write_str("full"),
        }
    }
}

impl FromStr for SampleBudget {
    type Err = Error;

    /// `full`, a count such as `1000`, or a percentage such as `25%`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("full") {
            return Ok(SampleBudget::Full);
        }
        if let Some(pct) = s.strip_suffix('%') {
            let f: f64 = pct
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad percentage {s:?}")))?;
            if !(f.is_finite() && f >= 0.0) {
                return Err(Error::Parse(format!("bad percentage {s:?}")));
            }
            return Ok(SampleBudget::Fraction(f / 100.0));
        }
        s.parse()
            .map(SampleBudget::Count)
            .map_err(|_| Error::Parse(format!("bad sample budget {s:?}")))
    }
}

/// One benchmark configuration. `methods` holds several entries when arms
/// are compared on shared seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Built-in maze name or path to a maze file.
    pub maze: String,
    pub methods: Vec<Method>,
    pub d: usize,
    pub samples: SampleBudget,
    pub episodes: usize,
    pub repeats: usize,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            maze: "maze1".into(),
            methods: vec![Method::DeepWalk],
            d: 30,
            samples: SampleBudget::Full,
            episodes: 60,
            repeats: 20,
            seed: 0,
            out: PathBuf::from("out"),
        }
    }
}

pub const CONFIG_KEYS: [&str; 8] = ["maze", "method", "d", "samples", "episodes", "repeats", "seed", "out"];

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse {value:?}")))
}

impl ExperimentConfig {
    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "maze" => self.maze = value.to_string(),
            "method" => {
                self.methods = value
                    .split(',')
                    .map(|m| m.trim().parse())
                    .collect::<Result<Vec<Method>>>()?;
            }
            "d" => self.d = parse_num("d", value)?,
            "samples" => self.samples = value.parse()?,
            "episodes" => self.episodes = parse_num("episodes", value)?,
            "repeats" => self.repeats = parse_num("repeats", value)?,
            "seed" => self.seed = parse_num("seed", value)?,
            "out" => self.out = PathBuf::from(value),
            other => return Err(Error::InvalidConfig(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Parses `key=value` lines over the defaults. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = ExperimentConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected key=value", i + 1)))?;
            config.set(key, value)?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn to_text(&self) -> String {
        let methods: Vec<&str> = self.methods.iter().map(|m| m.tag()).collect();
        format!(
            "maze={}\nmethod={}\nd={}\nsamples={}\nepisodes={}\nrepeats={}\nseed={}\nout={}\n",
            self.maze,
            methods.join(","),
            self.d,
            self.samples,
            self.episodes,
            self.repeats,
            self.seed,
            self.out.display()
        )
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.methods.is_empty() {
            return fail("at least one method is required");
        }
        if self.repeats == 0 || self.episodes == 0 || self.d == 0 {
            return fail("repeats, episodes and d must be at least 1");
        }
        Ok(())
    }

    /// The first method; single-arm operations use it.
    pub fn method(&self) -> Method {
        self.methods.first().copied().unwrap_or(Method::DeepWalk)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_round_trips() {
        let text = "# desk run\nmaze=desk10\nmethod=deepwalk, matrix\nd = 16\nsamples=25%\nepisodes=5\nrepeats=2\nseed=7\nout=/tmp/x\n";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.methods, vec![Method::DeepWalk, Method::Matrix]);
        assert_eq!(c.samples, SampleBudget::Fraction(0.25));
        assert_eq!((c.d, c.episodes, c.repeats, c.seed), (16, 5, 2, 7));
        assert_eq!(ExperimentConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ExperimentConfig::parse("colour=blue").is_err());
        assert!(ExperimentConfig::parse("repeats=0").is_err());
        assert!(ExperimentConfig::parse("d").is_err());
        assert!(ExperimentConfig::parse("method=word2vec").is_err());
        assert!("-5%".parse::<SampleBudget>().is_err());
    }

    #[test]
    fn budgets() {
        assert_eq!("FULL".parse::<SampleBudget>().unwrap(), SampleBudget::Full);
        assert_eq!("1000".parse::<SampleBudget>().unwrap(), SampleBudget::Count(1000));
        assert_eq!(SampleBudget::Fraction(0.1).label(), "s10pct");
        assert_eq!(SampleBudget::Fraction(0.125).to_string(), "12.5%");
    }
}
