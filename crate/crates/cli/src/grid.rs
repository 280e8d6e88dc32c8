//! Value lists written as `start:step:stop`, `a,b,c` or a single number.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Endpoint slack for ranges: `stop` is included when it lies within this
/// distance of a grid point.
const INCLUSIVE_TOL: f64 = 1e-12;

/// Cap on range length, to catch a mistyped step.
const MAX_POINTS: usize = 10_000_000;

/// A list of values together with the text it was parsed from, so that an
/// echoed config reproduces the original spelling.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    text: String,
    values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridError(String);

impl fmt::Display for GridError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for GridError {}

fn number(s: &str, whole: &str) -> Result<f64, GridError> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| GridError(format!("`{whole}`: `{}` is not a number", s.trim())))?;
    if !v.is_finite() {
        return Err(GridError(format!("`{whole}`: values must be finite")));
    }
    Ok(v)
}

fn range(start: f64, step: f64, stop: f64, whole: &str) -> Result<Vec<f64>, GridError> {
    if step == 0.0 {
        return Err(GridError(format!("`{whole}`: step must be nonzero")));
    }
    let span = (stop - start) / step;
    if span < -INCLUSIVE_TOL {
        return Err(GridError(format!("`{whole}`: step points away from stop")));
    }
    let n = (span + INCLUSIVE_TOL / step.abs()).floor().max(0.0);
    if n >= MAX_POINTS as f64 {
        return Err(GridError(format!(
            "`{whole}`: more than {MAX_POINTS} points"
        )));
    }
    let n = n as usize;
    let mut v: Vec<f64> = (0..=n).map(|i| start + i as f64 * step).collect();
    // Snap the last point so 0:0.1:0.3 ends at 0.3 rather than 0.30000000000000004.
    if (v[n] - stop).abs() <= INCLUSIVE_TOL.max(1e-9 * step.abs()) {
        v[n] = stop;
    }
    Ok(v)
}

impl FromStr for Grid {
    type Err = GridError;

    fn from_str(s: &str) -> Result<Self, GridError> {
        let text = s.trim();
        if text.is_empty() {
            return Err(GridError("empty grid".into()));
        }
        let values = if text.contains(':') {
            let parts: Vec<&str> = text.split(':').collect();
            let [a, b, c] = parts[..] else {
                return Err(GridError(format!("`{text}`: expected start:step:stop")));
            };
            range(number(a, text)?, number(b, text)?, number(c, text)?, text)?
        } else {
            text.split(',')
                .map(|p| number(p, text))
                .collect::<Result<_, _>>()?
        };
        Ok(Self {
            text: text.to_string(),
            values,
        })
    }
}

impl Grid {
    pub fn single(v: f64) -> Self {
        Self {
            text: format!("{v}"),
            values: vec![v],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl Serialize for Grid {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.text)
    }
}

impl<'de> Deserialize<'de> for Grid {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(v) => Ok(Grid::single(v)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}
