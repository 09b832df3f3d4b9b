//! Seeded synthetic waste datasets with a known ground-truth strength
//! function.
//!
//! Each feature is drawn independently from its marginal and clipped;
//! composition fractions are then rescaled if they sum past 1. Targets are
//! a planted polynomial of the features plus Gaussian noise, clipped to the
//! configured range.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureKind, FeatureSchema, Target, WasteSample};
use crate::error::{Error, Result};
use crate::numeric::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Marginal {
    Uniform {
        low: f64,
        high: f64,
    },
    Normal {
        mean: f64,
        std: f64,
    },
    /// `offset + scale · Beta(alpha, beta)`.
    ScaledBeta {
        alpha: f64,
        beta: f64,
        scale: f64,
        #[serde(default)]
        offset: f64,
    },
    NormalMixture {
        components: Vec<MixtureComponent>,
    },
}

impl Marginal {
    fn validate(&self, name: &str) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("feature `{name}`: {msg}")));
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        match self {
            Marginal::Uniform { low, high } if !(low.is_finite() && high.is_finite() && low <= high) => {
                bad("uniform needs finite low <= high")
            }
            Marginal::Normal { mean, std } if !(mean.is_finite() && finite_nonneg(*std)) => {
                bad("normal needs a finite mean and std >= 0")
            }
            Marginal::ScaledBeta {
                alpha,
                beta,
                scale,
                offset,
            } if !(*alpha > 0.0 && *beta > 0.0 && alpha.is_finite() && beta.is_finite())
                || !(scale.is_finite() && offset.is_finite()) =>
            {
                bad("scaled beta needs alpha, beta > 0 and finite scale and offset")
            }
            Marginal::NormalMixture { components } => {
                if components.is_empty() {
                    return bad("mixture needs at least one component");
                }
                if components
                    .iter()
                    .any(|c| !(finite_nonneg(c.weight) && c.mean.is_finite() && finite_nonneg(c.std)))
                {
                    return bad("mixture components need weight >= 0, finite mean, std >= 0");
                }
                if components.iter().map(|c| c.weight).sum::<f64>() <= 0.0 {
                    return bad("mixture weights sum to zero");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn sample(&self, rng: &mut Rng) -> f64 {
        match self {
            Marginal::Uniform { low, high } => rng.uniform_range(*low, *high),
            Marginal::Normal { mean, std } => rng.normal(*mean, *std),
            Marginal::ScaledBeta {
                alpha,
                beta,
                scale,
                offset,
            } => offset + scale * rng.beta(*alpha, *beta),
            Marginal::NormalMixture { components } => {
                let total: f64 = components.iter().map(|c| c.weight).sum();
                let mut u = rng.uniform() * total;
                let mut pick = components.last().expect("validated nonempty");
                for c in components {
                    if u < c.weight {
                        pick = c;
                        break;
                    }
                    u -= c.weight;
                }
                rng.normal(pick.mean, pick.std)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMarginal {
    pub name: String,
    #[serde(flatten)]
    pub marginal: Marginal,
    pub clip: [f64; 2],
}

/// `coef · Π features`: a linear term for one feature, an interaction for
/// several.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub features: Vec<String>,
    pub coef: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedFunction {
    pub intercept: f64,
    pub noise_std: f64,
    pub clip: [f64; 2],
    #[serde(rename = "term")]
    pub terms: Vec<Term>,
}

impl PlantedFunction {
    fn validate(&self, target: Target, schema: &FeatureSchema) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(format!("{target} function: {msg}")));
        if !self.intercept.is_finite() || !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return bad("intercept must be finite and noise_std >= 0".into());
        }
        let [lo, hi] = self.clip;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return bad("clip must be finite with low <= high".into());
        }
        if target == Target::Friction && !(lo > 0.0 && hi < 90.0) {
            return bad("friction clip must lie strictly inside (0, 90) degrees".into());
        }
        for t in &self.terms {
            if t.features.is_empty() || !t.coef.is_finite() {
                return bad("every term needs at least one feature and a finite coef".into());
            }
            if let Some(f) = t.features.iter().find(|f| schema.index_of(f).is_none()) {
                return bad(format!("unknown feature `{f}`"));
            }
        }
        Ok(())
    }

    /// Noise-free value, before clipping.
    pub fn eval(&self, schema: &FeatureSchema, features: &[f64]) -> f64 {
        self.intercept
            + self
                .terms
                .iter()
                .map(|t| {
                    t.coef
                        * t.features
                            .iter()
                            .map(|f| features[schema.index_of(f).expect("validated")])
                            .product::<f64>()
                })
                .sum::<f64>()
    }

    /// `∂f/∂x_j` at `features`.
    pub fn partial(&self, schema: &FeatureSchema, features: &[f64], feature: usize) -> f64 {
        let mut d = 0.0;
        for t in &self.terms {
            let idx: Vec<usize> = t.features.iter().map(|f| schema.index_of(f).expect("validated")).collect();
            for (k, &j) in idx.iter().enumerate() {
                if j == feature {
                    let rest: f64 = idx
                        .iter()
                        .enumerate()
                        .filter(|&(l, _)| l != k)
                        .map(|(_, &i)| features[i])
                        .product();
                    d += t.coef * rest;
                }
            }
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    #[serde(rename = "feature")]
    pub features: Vec<FeatureMarginal>,
    pub friction: PlantedFunction,
    pub cohesion: PlantedFunction,
}

fn term(features: &[&str], coef: f64) -> Term {
    Term {
        features: features.iter().map(|s| s.to_string()).collect(),
        coef,
    }
}

fn marginal(name: &str, marginal: Marginal, clip: [f64; 2]) -> FeatureMarginal {
    FeatureMarginal {
        name: name.into(),
        marginal,
        clip,
    }
}

fn beta(alpha: f64, beta: f64, scale: f64) -> Marginal {
    Marginal::ScaledBeta {
        alpha,
        beta,
        scale,
        offset: 0.0,
    }
}

fn normal(mean: f64, std: f64) -> Marginal {
    Marginal::Normal { mean, std }
}

fn mixture(parts: &[(f64, f64, f64)]) -> Marginal {
    Marginal::NormalMixture {
        components: parts
            .iter()
            .map(|&(weight, mean, std)| MixtureComponent { weight, mean, std })
            .collect(),
    }
}

impl Default for GeneratorSpec {
    /// Marginals for the default 17-feature schema and the planted functions
    ///
    /// ```text
    /// friction = 23 − 40·food + 30·plastics − 15·size_lt_2 + 10·size_5_10
    ///            + 2·density − 12·moisture − 20·moisture·food      (± 0.8)
    /// cohesion = 4.1 + 25·textiles + 4·plastics − 5·food + 5·paper
    ///            − 10·nappies − 2·moisture − 3·moisture·food       (± 0.4)
    /// ```
    ///
    /// clipped to [20, 50] degrees and [2, 9] kPa.
    fn default() -> Self {
        let unit = [0.0, 1.0];
        Self {
            features: vec![
                marginal("food_waste", beta(2.0, 6.0, 0.6), [0.0, 0.6]),
                marginal("garden_waste", beta(1.0, 9.0, 0.3), [0.0, 0.3]),
                marginal("paper_cardboard", mixture(&[(0.5, 0.03, 0.01), (0.5, 0.08, 0.02)]), [0.0, 0.3]),
                marginal("textiles", normal(0.04, 0.015), [0.0, 0.15]),
                marginal("plastics", mixture(&[(0.5, 0.45, 0.04), (0.5, 0.62, 0.04)]), [0.0, 0.8]),
                marginal("rubber", beta(1.0, 9.0, 0.2), [0.0, 0.2]),
                marginal("nappies", beta(1.5, 10.0, 0.3), [0.0, 0.3]),
                marginal("metal", beta(1.0, 19.0, 0.2), [0.0, 0.2]),
                marginal("glass", beta(1.0, 9.0, 0.2), [0.0, 0.2]),
                marginal("other", beta(1.5, 10.0, 0.2), [0.0, 0.2]),
                marginal("size_10_15_mm", normal(0.15, 0.04), unit),
                marginal("size_5_10_mm", normal(0.2, 0.05), unit),
                marginal("size_2_5_mm", normal(0.2, 0.05), unit),
                marginal("size_lt_2_mm", normal(0.25, 0.06), unit),
                marginal("fine_fraction", normal(0.1, 0.04), [0.0, 0.4]),
                marginal(
                    "moisture_content",
                    Marginal::ScaledBeta {
                        alpha: 2.0,
                        beta: 6.0,
                        scale: 0.6,
                        offset: 0.4,
                    },
                    unit,
                ),
                marginal("density_kn_m3", normal(7.0, 0.6), [4.0, 10.0]),
            ],
            friction: PlantedFunction {
                intercept: 23.0,
                noise_std: 0.8,
                clip: [20.0, 50.0],
                terms: vec![
                    term(&["food_waste"], -40.0),
                    term(&["plastics"], 30.0),
                    term(&["size_lt_2_mm"], -15.0),
                    term(&["size_5_10_mm"], 10.0),
                    term(&["density_kn_m3"], 2.0),
                    term(&["moisture_content"], -12.0),
                    term(&["moisture_content", "food_waste"], -20.0),
                ],
            },
            cohesion: PlantedFunction {
                intercept: 4.1,
                noise_std: 0.4,
                clip: [2.0, 9.0],
                terms: vec![
                    term(&["textiles"], 25.0),
                    term(&["plastics"], 4.0),
                    term(&["food_waste"], -5.0),
                    term(&["paper_cardboard"], 5.0),
                    term(&["nappies"], -10.0),
                    term(&["moisture_content"], -2.0),
                    term(&["moisture_content", "food_waste"], -3.0),
                ],
            },
        }
    }
}

impl GeneratorSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.message().to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("generator spec serializes")
    }

    pub fn function(&self, target: Target) -> &PlantedFunction {
        match target {
            Target::Friction => &self.friction,
            Target::Cohesion => &self.cohesion,
        }
    }

    /// Checks the spec against `schema` and returns, for each schema feature,
    /// the index of its marginal.
    pub fn validate(&self, schema: &FeatureSchema) -> Result<Vec<usize>> {
        let mut order = Vec::with_capacity(schema.len());
        for d in schema.features() {
            let found: Vec<usize> = (0..self.features.len())
                .filter(|&i| self.features[i].name.eq_ignore_ascii_case(&d.name))
                .collect();
            match found.as_slice() {
                [i] => order.push(*i),
                [] => {
                    return Err(Error::InvalidConfig(format!("no marginal for feature `{}`", d.name)));
                }
                _ => {
                    return Err(Error::InvalidConfig(format!("feature `{}` has several marginals", d.name)));
                }
            }
        }
        if let Some(extra) = self.features.iter().find(|f| schema.index_of(&f.name).is_none()) {
            return Err(Error::InvalidConfig(format!(
                "marginal for `{}`, which is not in the schema",
                extra.name
            )));
        }
        for (d, &i) in schema.features().iter().zip(&order) {
            let f = &self.features[i];
            f.marginal.validate(&f.name)?;
            let [lo, hi] = f.clip;
            let (blo, bhi) = d.bounds();
            if !(lo.is_finite() && hi.is_finite() && lo <= hi && lo >= blo && hi <= bhi) {
                return Err(Error::InvalidConfig(format!(
                    "feature `{}`: clip [{lo}, {hi}] must lie inside [{blo}, {bhi}]",
                    f.name
                )));
            }
        }
        self.friction.validate(Target::Friction, schema)?;
        self.cohesion.validate(Target::Cohesion, schema)?;
        Ok(order)
    }

    /// Noise-free, unclipped `(friction_deg, cohesion_kpa)`.
    pub fn planted_truth(&self, schema: &FeatureSchema, features: &[f64]) -> (f64, f64) {
        (
            self.friction.eval(schema, features),
            self.cohesion.eval(schema, features),
        )
    }
}

/// A generated dataset with the noise-free target values behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub dataset: Dataset,
    pub truth: Vec<(f64, f64)>,
}

/// Draws `n` samples. Pure in `(spec, schema, n, rng state)`.
pub fn generate(spec: &GeneratorSpec, schema: &FeatureSchema, n: usize, rng: &mut Rng) -> Result<SyntheticData> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be >= 1".into()));
    }
    let order = spec.validate(schema)?;
    let composition: Vec<usize> = (0..schema.len())
        .filter(|&j| schema.features()[j].kind == FeatureKind::CompositionFraction)
        .collect();
    let mut samples = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    for _ in 0..n {
        let mut x: Vec<f64> = order
            .iter()
            .map(|&i| {
                let f = &spec.features[i];
                f.marginal.sample(rng).clamp(f.clip[0], f.clip[1])
            })
            .collect();
        let total: f64 = composition.iter().map(|&j| x[j]).sum();
        if total > 1.0 {
            composition.iter().for_each(|&j| x[j] /= total);
        }
        let (fr, co) = spec.planted_truth(schema, &x);
        let [flo, fhi] = spec.friction.clip;
        let [clo, chi] = spec.cohesion.clip;
        let friction = (fr + rng.normal(0.0, spec.friction.noise_std)).clamp(flo, fhi);
        let cohesion = (co + rng.normal(0.0, spec.cohesion.noise_std)).clamp(clo, chi);
        samples.push(WasteSample {
            features: x,
            friction_angle_deg: Some(friction),
            cohesion_kpa: Some(cohesion),
        });
        truth.push((fr, co));
    }
    Ok(SyntheticData {
        dataset: Dataset::new(schema.clone(), samples, Target::Friction)?,
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_data(n: usize, seed: u64) -> SyntheticData {
        generate(&GeneratorSpec::default(), &FeatureSchema::default_msw(), n, &mut Rng::new(seed)).unwrap()
    }

    #[test]
    fn default_marginals() {
        let d = default_data(500, 7).dataset;
        let schema = &d.schema;
        let plastics = schema.index_of("plastics").unwrap();
        let density = schema.index_of("density_kn_m3").unwrap();
        assert!(d.samples.iter().all(|s| (0.0..=0.8).contains(&s.features[plastics])));
        let mean = d.samples.iter().map(|s| s.features[density]).sum::<f64>() / 500.0;
        // 3 sigma of the sample mean: 3 · 0.6 / sqrt(500)
        assert!((mean - 7.0).abs() < 0.15, "density mean {mean}");
    }

    #[test]
    fn compositions_never_exceed_one() {
        let d = default_data(2000, 1).dataset;
        let comp: Vec<usize> = (0..10).collect();
        for s in &d.samples {
            assert!(comp.iter().map(|&j| s.features[j]).sum::<f64>() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn noiseless_targets_equal_the_function() {
        let mut spec = GeneratorSpec::default();
        spec.friction.noise_std = 0.0;
        spec.cohesion.noise_std = 0.0;
        let schema = FeatureSchema::default_msw();
        let out = generate(&spec, &schema, 200, &mut Rng::new(3)).unwrap();
        let mut unclipped = 0;
        for (s, &(f, c)) in out.dataset.samples.iter().zip(&out.truth) {
            assert_eq!(s.friction_angle_deg, Some(f.clamp(20.0, 50.0)));
            assert_eq!(s.cohesion_kpa, Some(c.clamp(2.0, 9.0)));
            unclipped += usize::from((20.0..=50.0).contains(&f));
        }
        assert!(unclipped > 190, "only {unclipped} of 200 inside the friction range");
    }

    #[test]
    fn same_seed_same_data() {
        assert_eq!(default_data(50, 9), default_data(50, 9));
        assert_ne!(default_data(50, 9).dataset, default_data(50, 10).dataset);
    }

    #[test]
    fn planted_signs() {
        let spec = GeneratorSpec::default();
        let schema = FeatureSchema::default_msw();
        let food = schema.index_of("food_waste").unwrap();
        let plastics = schema.index_of("plastics").unwrap();
        let base = default_data(1, 4).dataset.samples[0].features.clone();
        let mut prev_food = f64::INFINITY;
        let mut prev_plastics = f64::NEG_INFINITY;
        for k in 0..=20 {
            let v = k as f64 * 0.03;
            let mut x = base.clone();
            x[food] = v;
            let f = spec.friction.eval(&schema, &x);
            assert!(f < prev_food);
            prev_food = f;
            let mut x = base.clone();
            x[plastics] = v;
            let f = spec.friction.eval(&schema, &x);
            assert!(f > prev_plastics);
            prev_plastics = f;
        }
    }

    #[test]
    fn zeroed_sample_gives_intercepts() {
        let spec = GeneratorSpec::default();
        let (f, c) = spec.planted_truth(&FeatureSchema::default_msw(), &[0.0; 17]);
        assert_eq!((f, c), (23.0, 4.1));
        assert!((20.0..=50.0).contains(&f) && (2.0..=9.0).contains(&c));
    }

    #[test]
    fn partial_derivatives_match_differences() {
        let spec = GeneratorSpec::default();
        let schema = FeatureSchema::default_msw();
        let x = default_data(1, 2).dataset.samples[0].features.clone();
        for j in 0..17 {
            let h = 1e-6;
            let mut up = x.clone();
            up[j] += h;
            let mut down = x.clone();
            down[j] -= h;
            let fd = (spec.friction.eval(&schema, &up) - spec.friction.eval(&schema, &down)) / (2.0 * h);
            assert!((fd - spec.friction.partial(&schema, &x, j)).abs() < 1e-6);
        }
    }

    #[test]
    fn spec_toml_round_trip_and_validation() {
        let spec = GeneratorSpec::default();
        let text = spec.to_toml_string();
        assert_eq!(GeneratorSpec::from_toml_str(&text).unwrap(), spec);
        let mut bad = spec.clone();
        bad.features[0].clip = [0.0, 1.5];
        assert!(bad.validate(&FeatureSchema::default_msw()).is_err());
        let mut bad = spec.clone();
        bad.features.pop();
        let err = bad.validate(&FeatureSchema::default_msw()).unwrap_err();
        assert!(err.to_string().contains("density_kn_m3"), "{err}");
        let mut bad = spec;
        bad.friction.terms.push(term(&["ash"], 1.0));
        assert!(bad.validate(&FeatureSchema::default_msw()).is_err());
    }
}
