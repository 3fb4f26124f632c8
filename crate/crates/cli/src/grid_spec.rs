use std::fmt;
use std::str::FromStr;

use anyhow::{anyhow, Context};
use onesided::grid::Grid;
use serde::{Deserialize, Serialize};

/// `start:end:count`, `count` equal cells covering `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn grid(&self) -> anyhow::Result<Grid> {
        Ok(Grid::spanning(self.start, self.end, self.count)?)
    }

    pub fn with_count(self, count: usize) -> Self {
        Self { count, ..self }
    }
}

impl FromStr for GridSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let [start, end, count] = parts[..] else {
            return Err(anyhow!("grid must be start:end:count, got {s:?}"));
        };
        let spec = Self {
            start: start.parse().context("grid start")?,
            end: end.parse().context("grid end")?,
            count: count.parse().context("grid count")?,
        };
        spec.grid()?;
        Ok(spec)
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.end, self.count)
    }
}
