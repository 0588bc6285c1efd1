//! Synthetic scalar fields on a mesh: an ambient level plus geodesic
//! Gaussian bumps.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{IppError, Result};
use crate::field_map::FieldMap;
use crate::fmt::sig9;
use crate::mesh::GeodesicField;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Source {
    pub facet: usize,
    pub amplitude: f64,
    /// Geodesic width, meters.
    pub width: f64,
}

/// Sources drawn uniformly over facets, with amplitude and width uniform in
/// the given closed ranges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomSources {
    pub count: usize,
    pub amplitude: [f64; 2],
    pub width: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FieldSpec {
    #[serde(default)]
    pub ambient: f64,
    #[serde(default)]
    pub sources: Vec<Source>,
    #[serde(default)]
    pub random: Option<RandomSources>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthField {
    values: Vec<f64>,
    sources: Vec<Source>,
}

impl GroundTruthField {
    pub fn from_values(values: Vec<f64>) -> Self {
        Self {
            values,
            sources: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Sources actually used, including randomly drawn ones.
    pub fn sources(&self) -> &[Source] {
        &self.sources
    }

    /// Bound on `|T(i) − T(j)| / d_g(i, j)`: each bump has slope at most
    /// `|A| e^{−1/2} / w` along any geodesic.
    pub fn lipschitz_bound(&self) -> f64 {
        self.sources
            .iter()
            .map(|s| s.amplitude.abs() * (-0.5f64).exp() / s.width)
            .sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("facet_index,value\n");
        for (i, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{i},{}", sig9(*v));
        }
        out
    }

    /// Parse `facet_index,value` rows; every facet in `0..n` must appear once.
    pub fn from_csv(text: &str, n: usize) -> Result<Self> {
        let mut values = vec![f64::NAN; n];
        for (lineno, line) in text.lines().enumerate() {
            let line_no = lineno + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || (lineno == 0 && trimmed.starts_with("facet_index")) {
                continue;
            }
            let bad = |msg: String| IppError::Parse { line: line_no, msg };
            let (i, v) = trimmed
                .split_once(',')
                .ok_or_else(|| bad(format!("expected `index,value`, got `{trimmed}`")))?;
            let i: usize = i.trim().parse().map_err(|_| bad(format!("bad facet index `{i}`")))?;
            let v: f64 = v.trim().parse().map_err(|_| bad(format!("bad value `{v}`")))?;
            if i >= n {
                return Err(bad(format!("facet {i} out of range for {n} facets")));
            }
            if !values[i].is_nan() {
                return Err(bad(format!("facet {i} listed twice")));
            }
            values[i] = v;
        }
        if let Some(missing) = values.iter().position(|v| v.is_nan()) {
            return Err(IppError::Parse {
                line: 0,
                msg: format!("facet {missing} has no value"),
            });
        }
        Ok(Self::from_values(values))
    }
}

pub fn generate_field(geo: &GeodesicField, spec: &FieldSpec, seed: u64) -> Result<GroundTruthField> {
    let n = geo.len();
    let mut sources = spec.sources.clone();
    if let Some(r) = &spec.random {
        if r.count > 0 && n == 0 {
            return Err(IppError::param("random.count", "mesh has no facets"));
        }
        let mut rng = seed::rng(seed, &[0x6774]);
        for _ in 0..r.count {
            sources.push(Source {
                facet: rng.gen_range(0..n),
                amplitude: rng.gen_range(r.amplitude[0]..=r.amplitude[1]),
                width: rng.gen_range(r.width[0]..=r.width[1]),
            });
        }
    }
    for s in &sources {
        if !(s.width > 0.0) {
            return Err(IppError::param("sources.width", format!("must be positive, got {}", s.width)));
        }
        if s.facet >= n {
            return Err(IppError::param("sources.facet", format!("{} out of range for {n} facets", s.facet)));
        }
    }
    let values = (0..n)
        .map(|i| {
            spec.ambient
                + sources
                    .iter()
                    .map(|s| {
                        let d = geo.get(i, s.facet);
                        s.amplitude * (-d * d / (2.0 * s.width * s.width)).exp()
                    })
                    .sum::<f64>()
        })
        .collect();
    Ok(GroundTruthField { values, sources })
}

/// Root mean squared error between the map mean and the truth.
pub fn rmse(map: &FieldMap, truth: &GroundTruthField) -> Result<f64> {
    if map.len() != truth.len() {
        return Err(IppError::Dimension {
            expected: truth.len(),
            got: map.len(),
        });
    }
    if truth.is_empty() {
        return Ok(0.0);
    }
    let sse: f64 = map.mean().iter().zip(&truth.values).map(|(m, t)| (m - t).powi(2)).sum();
    Ok((sse / truth.len() as f64).sqrt())
}
