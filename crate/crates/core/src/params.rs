//! Named model parameters with estimation-scale transforms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    Identity,
    Log,
    Logit,
}

impl Transform {
    pub fn check(self, value: f64) -> bool {
        match self {
            Transform::Identity => value.is_finite(),
            Transform::Log => value.is_finite() && value > 0.0,
            Transform::Logit => value > 0.0 && value < 1.0,
        }
    }

    /// Natural scale to estimation scale. Assumes `check` passed.
    pub fn forward(self, value: f64) -> f64 {
        match self {
            Transform::Identity => value,
            Transform::Log => value.ln(),
            Transform::Logit => (value / (1.0 - value)).ln(),
        }
    }

    pub fn inverse(self, z: f64) -> f64 {
        match self {
            Transform::Identity => z,
            Transform::Log => z.exp(),
            Transform::Logit => {
                if z >= 0.0 {
                    1.0 / (1.0 + (-z).exp())
                } else {
                    let e = z.exp();
                    e / (1.0 + e)
                }
            }
        }
    }
}

/// How iterated filtering perturbs a parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    /// Perturbed at the start and at every intermediate time.
    Regular,
    /// Initial value parameter: perturbed only at the start of a filtering pass.
    Ivp,
    /// Never perturbed.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub value: f64,
    pub transform: Transform,
    pub kind: ParamKind,
}

impl ParamEntry {
    pub fn new(name: &str, value: f64, transform: Transform, kind: ParamKind) -> Self {
        ParamEntry {
            name: name.to_string(),
            value,
            transform,
            kind,
        }
    }
}

/// Ordered, uniquely named parameter list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ParamEntry>", into = "Vec<ParamEntry>")]
pub struct ParamVector {
    entries: Vec<ParamEntry>,
}

impl TryFrom<Vec<ParamEntry>> for ParamVector {
    type Error = Error;
    fn try_from(entries: Vec<ParamEntry>) -> Result<Self> {
        ParamVector::new(entries)
    }
}

impl From<ParamVector> for Vec<ParamEntry> {
    fn from(p: ParamVector) -> Self {
        p.entries
    }
}

impl ParamVector {
    pub fn new(entries: Vec<ParamEntry>) -> Result<Self> {
        for (i, e) in entries.iter().enumerate() {
            if entries[..i].iter().any(|o| o.name == e.name) {
                return Err(Error::InvalidParams(format!("duplicate name `{}`", e.name)));
            }
            if !e.transform.check(e.value) {
                return Err(Error::DomainError {
                    name: e.name.clone(),
                    value: e.value,
                });
            }
        }
        Ok(ParamVector { entries })
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.name == name)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.index_of(name).map(|i| self.entries[i].value)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.name.as_str())
    }

    /// Natural-scale values in entry order.
    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.value).collect()
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let i = self
            .index_of(name)
            .ok_or_else(|| Error::InvalidParams(format!("unknown parameter `{name}`")))?;
        if !self.entries[i].transform.check(value) {
            return Err(Error::DomainError {
                name: name.to_string(),
                value,
            });
        }
        self.entries[i].value = value;
        Ok(())
    }

    pub fn set_kind(&mut self, name: &str, kind: ParamKind) -> Result<()> {
        let i = self
            .index_of(name)
            .ok_or_else(|| Error::InvalidParams(format!("unknown parameter `{name}`")))?;
        self.entries[i].kind = kind;
        Ok(())
    }

    /// Same names, transforms and kinds with new natural-scale values.
    pub fn with_values(&self, values: &[f64]) -> Result<Self> {
        if values.len() != self.entries.len() {
            return Err(Error::InvalidParams(format!(
                "expected {} values, got {}",
                self.entries.len(),
                values.len()
            )));
        }
        let entries = self
            .entries
            .iter()
            .zip(values)
            .map(|(e, &v)| ParamEntry { value: v, ..e.clone() })
            .collect();
        ParamVector::new(entries)
    }

    pub fn same_structure(&self, other: &ParamVector) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(a, b)| a.name == b.name && a.transform == b.transform && a.kind == b.kind)
    }

    /// Every entry on the estimation scale, fixed ones included.
    pub fn to_estimation_full(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.transform.forward(e.value)).collect()
    }

    /// Inverse of [`to_estimation_full`](Self::to_estimation_full).
    pub fn natural_from_estimation(&self, z: &[f64], out: &mut [f64]) {
        for ((e, &zi), o) in self.entries.iter().zip(z).zip(out.iter_mut()) {
            *o = e.transform.inverse(zi);
        }
    }
}

/// Non-fixed entries mapped to the estimation scale.
pub fn transform_to_estimation_scale(p: &ParamVector) -> Result<Vec<f64>> {
    p.entries
        .iter()
        .filter(|e| e.kind != ParamKind::Fixed)
        .map(|e| {
            if e.transform.check(e.value) {
                Ok(e.transform.forward(e.value))
            } else {
                Err(Error::DomainError {
                    name: e.name.clone(),
                    value: e.value,
                })
            }
        })
        .collect()
}

/// Inverse of [`transform_to_estimation_scale`]: fills the non-fixed entries of `template`.
pub fn inverse_transform(template: &ParamVector, z: &[f64]) -> Result<ParamVector> {
    let mut it = z.iter();
    let mut values = Vec::with_capacity(template.len());
    for e in &template.entries {
        if e.kind == ParamKind::Fixed {
            values.push(e.value);
        } else {
            let zi = it
                .next()
                .ok_or_else(|| Error::InvalidParams("too few estimation-scale values".into()))?;
            values.push(e.transform.inverse(*zi));
        }
    }
    if it.next().is_some() {
        return Err(Error::InvalidParams("too many estimation-scale values".into()));
    }
    template.with_values(&values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pv(name: &str, v: f64, t: Transform) -> ParamVector {
        ParamVector::new(vec![ParamEntry::new(name, v, t, ParamKind::Regular)]).unwrap()
    }

    #[test]
    fn spot_values() {
        assert_eq!(
            transform_to_estimation_scale(&pv("sigma", 1.0, Transform::Log)).unwrap(),
            vec![0.0]
        );
        assert_eq!(
            transform_to_estimation_scale(&pv("rho", 0.5, Transform::Logit)).unwrap(),
            vec![0.0]
        );
        assert_eq!(
            transform_to_estimation_scale(&pv("F", 8.0, Transform::Identity)).unwrap(),
            vec![8.0]
        );
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(
            ParamVector::new(vec![ParamEntry::new("s", 0.0, Transform::Log, ParamKind::Regular)]),
            Err(Error::DomainError { .. })
        ));
        assert!(matches!(
            ParamVector::new(vec![ParamEntry::new("r", 1.0, Transform::Logit, ParamKind::Regular)]),
            Err(Error::DomainError { .. })
        ));
        let mut p = pv("s", 1.0, Transform::Log);
        assert!(p.set("s", -1.0).is_err());
        assert!(p.set("nope", 1.0).is_err());
    }

    #[test]
    fn duplicate_names_rejected() {
        let e = ParamEntry::new("a", 1.0, Transform::Identity, ParamKind::Regular);
        assert!(ParamVector::new(vec![e.clone(), e]).is_err());
    }

    #[test]
    fn fixed_entries_excluded() {
        let p = ParamVector::new(vec![
            ParamEntry::new("a", 2.0, Transform::Log, ParamKind::Regular),
            ParamEntry::new("b", 3.0, Transform::Identity, ParamKind::Fixed),
            ParamEntry::new("c", 0.25, Transform::Logit, ParamKind::Ivp),
        ])
        .unwrap();
        let z = transform_to_estimation_scale(&p).unwrap();
        assert_eq!(z.len(), 2);
        let back = inverse_transform(&p, &z).unwrap();
        assert_eq!(back.get("b"), Some(3.0));
    }

    proptest! {
        #[test]
        fn round_trip(a in 1e-6f64..1e6, r in 1e-6f64..(1.0 - 1e-6), x in -1e6f64..1e6) {
            let p = ParamVector::new(vec![
                ParamEntry::new("a", a, Transform::Log, ParamKind::Regular),
                ParamEntry::new("r", r, Transform::Logit, ParamKind::Ivp),
                ParamEntry::new("x", x, Transform::Identity, ParamKind::Regular),
            ]).unwrap();
            let z = transform_to_estimation_scale(&p).unwrap();
            let back = inverse_transform(&p, &z).unwrap();
            for (e, b) in p.entries().iter().zip(back.entries()) {
                let rel = (e.value - b.value).abs() / e.value.abs().max(1e-300);
                prop_assert!(rel < 1e-12 || (e.value - b.value).abs() < 1e-12, "{} vs {}", e.value, b.value);
            }
        }
    }
}
