use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureKind {
    /// Mass fraction of one waste component, in `[0, 1]`.
    CompositionFraction,
    /// Mass fraction passing a sieve band, in `[0, 1]`.
    ParticleSizeFraction,
    /// Nonnegative physical quantity. When the unit is `fraction` the value is
    /// also capped at 1.
    Physical,
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureKind::CompositionFraction => "composition-fraction",
            FeatureKind::ParticleSizeFraction => "particle-size-fraction",
            FeatureKind::Physical => "physical",
        })
    }
}

pub const FRACTION_UNIT: &str = "fraction";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureDescriptor {
    pub name: String,
    pub unit: String,
    pub kind: FeatureKind,
}

impl FeatureDescriptor {
    pub fn new(name: &str, unit: &str, kind: FeatureKind) -> Self {
        Self {
            name: name.to_owned(),
            unit: unit.to_owned(),
            kind,
        }
    }

    /// Closed interval a value of this feature must lie in.
    pub fn bounds(&self) -> (f64, f64) {
        match self.kind {
            FeatureKind::CompositionFraction | FeatureKind::ParticleSizeFraction => (0.0, 1.0),
            FeatureKind::Physical if self.unit == FRACTION_UNIT => (0.0, 1.0),
            FeatureKind::Physical => (0.0, f64::INFINITY),
        }
    }

    pub fn check(&self, value: f64) -> std::result::Result<(), String> {
        let (lo, hi) = self.bounds();
        if !value.is_finite() {
            return Err("finite values".into());
        }
        if value < lo || value > hi {
            return Err(if hi.is_finite() {
                format!("[{lo}, {hi}]")
            } else {
                format!("[{lo}, inf)")
            });
        }
        Ok(())
    }
}

/// Ordered feature list; the order is the model's input order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSchema {
    #[serde(rename = "feature")]
    features: Vec<FeatureDescriptor>,
}

/// On-disk form of a schema file:
///
/// ```toml
/// [[feature]]
/// name = "food_waste"
/// unit = "fraction"
/// kind = "composition-fraction"
/// ```
impl FeatureSchema {
    pub fn new(features: Vec<FeatureDescriptor>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Schema("schema must list at least one feature".into()));
        }
        let mut seen = HashSet::new();
        for f in &features {
            if f.name.trim().is_empty() {
                return Err(Error::Schema("feature names must be non-empty".into()));
            }
            if !seen.insert(f.name.to_ascii_lowercase()) {
                return Err(Error::Schema(format!("duplicate feature name `{}`", f.name)));
            }
            if is_target_column(&f.name) {
                return Err(Error::Schema(format!("`{}` is reserved for a target column", f.name)));
            }
        }
        Ok(Self { features })
    }

    /// The seventeen-parameter municipal solid waste schema.
    pub fn default_msw() -> Self {
        use FeatureKind::*;
        let f = FeatureDescriptor::new;
        Self::new(vec![
            f("food_waste", FRACTION_UNIT, CompositionFraction),
            f("garden_waste", FRACTION_UNIT, CompositionFraction),
            f("paper_cardboard", FRACTION_UNIT, CompositionFraction),
            f("textiles", FRACTION_UNIT, CompositionFraction),
            f("plastics", FRACTION_UNIT, CompositionFraction),
            f("rubber", FRACTION_UNIT, CompositionFraction),
            f("nappies", FRACTION_UNIT, CompositionFraction),
            f("metal", FRACTION_UNIT, CompositionFraction),
            f("glass", FRACTION_UNIT, CompositionFraction),
            f("other", FRACTION_UNIT, CompositionFraction),
            f("size_10_15_mm", FRACTION_UNIT, ParticleSizeFraction),
            f("size_5_10_mm", FRACTION_UNIT, ParticleSizeFraction),
            f("size_2_5_mm", FRACTION_UNIT, ParticleSizeFraction),
            f("size_lt_2_mm", FRACTION_UNIT, ParticleSizeFraction),
            f("fine_fraction", FRACTION_UNIT, Physical),
            f("moisture_content", FRACTION_UNIT, Physical),
            f("density_kn_m3", "kN/m3", Physical),
        ])
        .expect("default schema is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: FeatureSchema = toml::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        Self::new(raw.features)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("schema serializes")
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[FeatureDescriptor] {
        &self.features
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }

    /// Case-insensitive lookup.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name.eq_ignore_ascii_case(name))
    }
}

pub(crate) fn is_target_column(name: &str) -> bool {
    crate::data::Target::ALL
        .iter()
        .any(|t| t.column().eq_ignore_ascii_case(name))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_has_seventeen_unique_features() {
        let s = FeatureSchema::default_msw();
        assert_eq!(s.len(), 17);
        assert_eq!(s.index_of("DENSITY_KN_M3"), Some(16));
        assert_eq!(s.index_of("food_waste"), Some(0));
    }

    #[test]
    fn toml_round_trip() {
        let s = FeatureSchema::default_msw();
        let text = s.to_toml_string();
        assert!(text.contains("kind = \"composition-fraction\""));
        assert_eq!(FeatureSchema::from_toml_str(&text).unwrap(), s);
    }

    #[test]
    fn rejects_duplicates_and_reserved_names() {
        let d = FeatureDescriptor::new("a", FRACTION_UNIT, FeatureKind::CompositionFraction);
        assert!(FeatureSchema::new(vec![d.clone(), d.clone()]).is_err());
        let t = FeatureDescriptor::new("cohesion_kpa", "kPa", FeatureKind::Physical);
        assert!(FeatureSchema::new(vec![t]).is_err());
        assert!(FeatureSchema::new(vec![]).is_err());
    }

    #[test]
    fn fraction_bounds() {
        let s = FeatureSchema::default_msw();
        let moisture = &s.features()[s.index_of("moisture_content").unwrap()];
        assert!(moisture.check(0.55).is_ok());
        assert!(moisture.check(1.2).is_err());
        let density = &s.features()[16];
        assert!(density.check(7.23).is_ok());
        assert!(density.check(-0.1).is_err());
    }
}
