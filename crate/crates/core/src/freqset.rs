//! Frequency sets with a resolution tolerance.
//!
//! Two frequencies closer than `2Δ` cannot be told apart at resolution `Δ`,
//! so every operation here treats them as the same line. Sets are kept in
//! canonical form: sorted, with adjacent members at least `2Δ` apart.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ApsiError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSet", into = "RawSet")]
pub struct FrequencySet {
    frequencies: Vec<f64>,
    delta: f64,
}

#[derive(Serialize, Deserialize)]
struct RawSet {
    delta: f64,
    frequencies: Vec<f64>,
}

impl TryFrom<RawSet> for FrequencySet {
    type Error = ApsiError;

    fn try_from(raw: RawSet) -> Result<Self> {
        FrequencySet::new(raw.frequencies, raw.delta)
    }
}

impl From<FrequencySet> for RawSet {
    fn from(s: FrequencySet) -> Self {
        RawSet {
            delta: s.delta,
            frequencies: s.frequencies,
        }
    }
}

impl FrequencySet {
    /// Builds a canonical set; members closer than `2·delta` collapse to their mean.
    pub fn new(frequencies: Vec<f64>, delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(ApsiError::invalid(format!(
                "resolution delta must be positive, got {delta}"
            )));
        }
        if let Some(bad) = frequencies.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(ApsiError::invalid(format!(
                "frequency {bad} is not a finite non-negative value"
            )));
        }
        Ok(Self {
            frequencies: canonicalize(frequencies.into_iter().map(|w| (w, 1.0)).collect(), delta),
            delta,
        })
    }

    pub fn empty(delta: f64) -> Result<Self> {
        Self::new(Vec::new(), delta)
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Whether some member lies within `2Δ` of `omega`.
    pub fn contains(&self, omega: f64) -> bool {
        let tol = 2.0 * self.delta;
        self.frequencies.iter().any(|w| (w - omega).abs() < tol)
    }
}

impl fmt::Display for FrequencySet {
    /// `delta=<v>: ω₁,ω₂,...`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "delta={}: ", self.delta)?;
        for (i, w) in self.frequencies.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{w}")?;
        }
        Ok(())
    }
}

/// Merges weighted members until adjacent values are at least `2·delta` apart.
fn canonicalize(mut members: Vec<(f64, f64)>, delta: f64) -> Vec<f64> {
    members.sort_by(|a, b| a.0.total_cmp(&b.0));
    let tol = 2.0 * delta;
    loop {
        let mut merged = Vec::with_capacity(members.len());
        let mut changed = false;
        let mut i = 0;
        while i < members.len() {
            if i + 1 < members.len() && members[i + 1].0 - members[i].0 < tol {
                let (w0, c0) = members[i];
                let (w1, c1) = members[i + 1];
                merged.push(((w0 * c0 + w1 * c1) / (c0 + c1), c0 + c1));
                changed = true;
                i += 2;
            } else {
                merged.push(members[i]);
                i += 1;
            }
        }
        members = merged;
        if !changed {
            return members.into_iter().map(|(w, _)| w).collect();
        }
    }
}

/// Tolerant union; members of `a` and `b` within `2Δ` collapse to their mean.
pub fn union(a: &FrequencySet, b: &FrequencySet) -> FrequencySet {
    let delta = a.delta.max(b.delta);
    let members = a
        .frequencies
        .iter()
        .chain(&b.frequencies)
        .map(|&w| (w, 1.0))
        .collect();
    FrequencySet {
        frequencies: canonicalize(members, delta),
        delta,
    }
}

/// Tolerant intersection: pairs with `|ω_a − ω_b| < 2Δ` contribute their mean.
///
/// Matching is greedy in ascending order and each member is used at most once.
pub fn intersect(a: &FrequencySet, b: &FrequencySet) -> FrequencySet {
    let delta = a.delta.max(b.delta);
    let tol = 2.0 * delta;
    let (x, y) = (&a.frequencies, &b.frequencies);
    let (mut i, mut j) = (0, 0);
    let mut matched = Vec::new();
    while i < x.len() && j < y.len() {
        if (x[i] - y[j]).abs() < tol {
            matched.push(((x[i] + y[j]) / 2.0, 1.0));
            i += 1;
            j += 1;
        } else if x[i] < y[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    FrequencySet {
        frequencies: canonicalize(matched, delta),
        delta,
    }
}

/// Members of `a` with no member of `b` within `2Δ`.
pub fn difference(a: &FrequencySet, b: &FrequencySet) -> FrequencySet {
    let delta = a.delta.max(b.delta);
    let tol = 2.0 * delta;
    let frequencies = a
        .frequencies
        .iter()
        .copied()
        .filter(|w| !b.frequencies.iter().any(|v| (w - v).abs() < tol))
        .collect();
    FrequencySet { frequencies, delta }
}

/// Same cardinality and pairwise agreement within `2·max(Δ)`.
pub fn set_equal(a: &FrequencySet, b: &FrequencySet) -> bool {
    let tol = 2.0 * a.delta.max(b.delta);
    a.len() == b.len()
        && a
            .frequencies
            .iter()
            .zip(&b.frequencies)
            .all(|(x, y)| (x - y).abs() <= tol)
}

/// Link set shared by all inputs and the per-input conditional sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Decorrelation {
    pub link: FrequencySet,
    pub conditional: Vec<FrequencySet>,
}

/// Splits coupled input sets into their common link set and disjoint remainders.
///
/// Fails if, after removing the link, any two conditional sets still intersect.
pub fn decorrelate(inputs: &[FrequencySet]) -> Result<Decorrelation> {
    let [first, rest @ ..] = inputs else {
        return Err(ApsiError::invalid("decorrelation needs at least two input sets"));
    };
    if rest.is_empty() {
        return Err(ApsiError::invalid("decorrelation needs at least two input sets"));
    }
    let link = rest.iter().fold(first.clone(), |acc, s| intersect(&acc, s));
    let conditional: Vec<FrequencySet> = inputs.iter().map(|s| difference(s, &link)).collect();

    let mut residual: Vec<f64> = Vec::new();
    for (i, a) in conditional.iter().enumerate() {
        for b in &conditional[i + 1..] {
            residual.extend_from_slice(intersect(a, b).frequencies());
        }
    }
    if !residual.is_empty() {
        residual.sort_by(f64::total_cmp);
        residual.dedup();
        return Err(ApsiError::DecorrelationFailed { residual });
    }
    Ok(Decorrelation { link, conditional })
}
