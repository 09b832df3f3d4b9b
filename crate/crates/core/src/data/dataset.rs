use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::schema::{is_target_column, FeatureSchema};
use crate::error::{Error, Result};
use crate::numeric::Matrix;

/// Which shear-strength parameter a model predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Friction,
    Cohesion,
}

impl Target {
    pub const ALL: [Target; 2] = [Target::Friction, Target::Cohesion];

    /// Column name in dataset CSV files.
    pub fn column(self) -> &'static str {
        match self {
            Target::Friction => "friction_angle_deg",
            Target::Cohesion => "cohesion_kpa",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Target::Friction => "deg",
            Target::Cohesion => "kPa",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Target::Friction => "friction",
            Target::Cohesion => "cohesion",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "friction" | "friction_angle_deg" => Ok(Target::Friction),
            "cohesion" | "cohesion_kpa" => Ok(Target::Cohesion),
            other => Err(Error::InvalidInput(format!(
                "unknown target `{other}` (expected friction or cohesion)"
            ))),
        }
    }
}

/// One waste specimen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WasteSample {
    pub features: Vec<f64>,
    pub friction_angle_deg: Option<f64>,
    pub cohesion_kpa: Option<f64>,
}

impl WasteSample {
    pub fn target(&self, target: Target) -> Option<f64> {
        match target {
            Target::Friction => self.friction_angle_deg,
            Target::Cohesion => self.cohesion_kpa,
        }
    }

    /// Checks every sample invariant against `schema`. `row` is only used in
    /// error messages.
    pub fn validate(&self, schema: &FeatureSchema, row: usize) -> Result<()> {
        if self.features.len() != schema.len() {
            return Err(Error::LengthMismatch {
                op: "WasteSample::validate",
                expected: schema.len(),
                actual: self.features.len(),
            });
        }
        for (desc, &v) in schema.features().iter().zip(&self.features) {
            desc.check(v).map_err(|bound| Error::OutOfBounds {
                row,
                column: desc.name.clone(),
                value: v,
                bound,
            })?;
        }
        if let Some(phi) = self.friction_angle_deg {
            if !(phi.is_finite() && phi > 0.0 && phi < 90.0) {
                return Err(Error::OutOfBounds {
                    row,
                    column: Target::Friction.column().into(),
                    value: phi,
                    bound: "(0, 90)".into(),
                });
            }
        }
        if let Some(c) = self.cohesion_kpa {
            if !c.is_finite() {
                return Err(Error::OutOfBounds {
                    row,
                    column: Target::Cohesion.column().into(),
                    value: c,
                    bound: "finite values".into(),
                });
            }
        }
        Ok(())
    }
}

/// Samples sharing one schema, with the target currently being modelled.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: FeatureSchema,
    pub samples: Vec<WasteSample>,
    pub target: Target,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CsvOptions {
    pub ignore_extra_columns: bool,
}

impl Dataset {
    pub fn new(schema: FeatureSchema, samples: Vec<WasteSample>, target: Target) -> Result<Self> {
        for (i, s) in samples.iter().enumerate() {
            s.validate(&schema, i + 1)?;
        }
        Ok(Self { schema, samples, target })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn with_target(mut self, target: Target) -> Self {
        self.target = target;
        self
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            target: self.target,
        }
    }

    /// Active-target values; errors if any sample lacks one.
    pub fn targets(&self) -> Result<Vec<f64>> {
        self.samples
            .iter()
            .enumerate()
            .map(|(i, s)| {
                s.target(self.target).ok_or_else(|| {
                    Error::InvalidInput(format!("sample {} has no `{}` value", i + 1, self.target.column()))
                })
            })
            .collect()
    }

    pub fn feature_matrix(&self) -> Matrix {
        let m = self.schema.len();
        let data = self.samples.iter().flat_map(|s| s.features.iter().copied()).collect();
        Matrix::from_raw(self.samples.len(), m, data)
    }

    /// Reads a dataset CSV: header row, one sample per line, feature columns
    /// matched case-insensitively against the schema in any order, optional
    /// `friction_angle_deg` / `cohesion_kpa` columns (empty cells mean absent).
    pub fn load_csv<R: Read>(source: R, schema: &FeatureSchema, options: CsvOptions) -> Result<Dataset> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(source);
        let headers = reader.headers()?.clone();
        if headers.is_empty() || headers.iter().all(str::is_empty) {
            return Err(Error::InvalidInput("missing header row".into()));
        }

        let mut feature_col = vec![None; schema.len()];
        let mut target_col: HashMap<Target, usize> = HashMap::new();
        for (col, name) in headers.iter().enumerate() {
            if let Some(idx) = schema.index_of(name) {
                if feature_col[idx].replace(col).is_some() {
                    return Err(Error::InvalidInput(format!("duplicate column `{name}`")));
                }
            } else if is_target_column(name) {
                let t: Target = name.parse()?;
                if target_col.insert(t, col).is_some() {
                    return Err(Error::InvalidInput(format!("duplicate column `{name}`")));
                }
            } else if !options.ignore_extra_columns {
                return Err(Error::UnknownColumn(name.to_owned()));
            }
        }
        let feature_col: Vec<usize> = feature_col
            .into_iter()
            .zip(schema.names())
            .map(|(c, name)| c.ok_or_else(|| Error::MissingColumn(name.to_owned())))
            .collect::<Result<_>>()?;

        let parse = |record: &csv::StringRecord, row: usize, col: usize| -> Result<Option<f64>> {
            let cell = record.get(col).unwrap_or("");
            if cell.is_empty() {
                return Ok(None);
            }
            cell.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(Some)
                .ok_or_else(|| Error::ParseCell {
                    row,
                    column: headers[col].to_owned(),
                    value: cell.to_owned(),
                })
        };

        let mut samples = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            let row = i + 1;
            let mut features = Vec::with_capacity(schema.len());
            for &col in &feature_col {
                let v = parse(&record, row, col)?.ok_or_else(|| Error::ParseCell {
                    row,
                    column: headers[col].to_owned(),
                    value: String::new(),
                })?;
                features.push(v);
            }
            let target = |t: Target| -> Result<Option<f64>> {
                target_col.get(&t).map_or(Ok(None), |&c| parse(&record, row, c))
            };
            let sample = WasteSample {
                features,
                friction_angle_deg: target(Target::Friction)?,
                cohesion_kpa: target(Target::Cohesion)?,
            };
            sample.validate(schema, row)?;
            samples.push(sample);
        }
        Ok(Dataset {
            schema: schema.clone(),
            samples,
            target: Target::Friction,
        })
    }

    /// Writes the CSV form read by [`Dataset::load_csv`]. Numbers use the
    /// shortest representation that parses back to the same `f64`.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        let mut header: Vec<&str> = self.schema.names().collect();
        header.extend(Target::ALL.iter().map(|t| t.column()));
        w.write_record(&header)?;
        for s in &self.samples {
            let mut rec: Vec<String> = s.features.iter().map(|v| v.to_string()).collect();
            for t in Target::ALL {
                rec.push(s.target(t).map(|v| v.to_string()).unwrap_or_default());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}
