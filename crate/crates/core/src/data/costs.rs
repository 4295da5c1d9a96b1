use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

/// How per-feature values in a schedule turn into acquisition costs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CostMode {
    /// `h(T) = scale * T`
    ClassLinear { scale: f64 },
    /// `h(T) = 10^T`
    ClassExponential,
    /// Values are the costs themselves.
    Explicit,
}

/// Per-feature cost classes (or explicit costs) plus the scaling rule.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSchedule {
    mode: CostMode,
    values: Vec<f64>,
}

impl CostSchedule {
    pub fn class_linear(scale: f64, classes: Vec<u32>) -> Result<Self> {
        Self::with_classes(CostMode::ClassLinear { scale }, classes)
    }

    pub fn class_exponential(classes: Vec<u32>) -> Result<Self> {
        Self::with_classes(CostMode::ClassExponential, classes)
    }

    fn with_classes(mode: CostMode, classes: Vec<u32>) -> Result<Self> {
        if let Some(t) = classes.iter().find(|&&t| t == 0) {
            return Err(Error::Config(format!(
                "cost classes must be positive integers, got {t}"
            )));
        }
        let s = Self {
            mode,
            values: classes.into_iter().map(f64::from).collect(),
        };
        s.costs()?;
        Ok(s)
    }

    pub fn explicit(costs: Vec<f64>) -> Result<Self> {
        let s = Self {
            mode: CostMode::Explicit,
            values: costs,
        };
        s.costs()?;
        Ok(s)
    }

    pub fn mode(&self) -> CostMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Cost classes, or `None` for an explicit schedule.
    pub fn classes(&self) -> Option<Vec<u32>> {
        match self.mode {
            CostMode::Explicit => None,
            _ => Some(self.values.iter().map(|&v| v as u32).collect()),
        }
    }

    pub fn costs(&self) -> Result<Vec<f64>> {
        let costs: Vec<f64> = self
            .values
            .iter()
            .map(|&t| match self.mode {
                CostMode::ClassLinear { scale } => scale * t,
                CostMode::ClassExponential => 10f64.powf(t),
                CostMode::Explicit => t,
            })
            .collect();
        if let Some(c) = costs.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
            return Err(Error::Config(format!("feature cost must be positive, got {c}")));
        }
        Ok(costs)
    }
}

/// On-disk cost specification (TOML).
///
/// ```toml
/// mode = "class-linear"      # class-linear | class-exponential | explicit
/// scale = 100.0              # class-linear only
///
/// [features]                 # feature name -> cost class (or cost)
/// glucose = 2
/// age = 1
/// ```
///
/// Instead of `[features]`, `costs = [6, 8, 4]` lists values in column order.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSpec {
    pub mode: String,
    #[serde(default)]
    pub scale: Option<f64>,
    #[serde(default)]
    pub features: Option<BTreeMap<String, f64>>,
    #[serde(default)]
    pub costs: Option<Vec<f64>>,
}

impl CostSpec {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Resolves the spec against the dataset's column names.
    pub fn resolve(&self, feature_names: &[String]) -> Result<CostSchedule> {
        let values: Vec<f64> = match (&self.features, &self.costs) {
            (Some(map), None) => {
                if let Some(unknown) = map.keys().find(|k| !feature_names.contains(k)) {
                    return Err(Error::Config(format!(
                        "cost spec names unknown feature {unknown:?}"
                    )));
                }
                feature_names
                    .iter()
                    .map(|f| {
                        map.get(f).copied().ok_or_else(|| {
                            Error::Config(format!("cost spec has no entry for feature {f:?}"))
                        })
                    })
                    .collect::<Result<_>>()?
            }
            (None, Some(list)) => {
                if list.len() != feature_names.len() {
                    return Err(Error::Config(format!(
                        "cost list has {} entries for {} features",
                        list.len(),
                        feature_names.len()
                    )));
                }
                list.clone()
            }
            _ => {
                return Err(Error::Config(
                    "cost spec needs exactly one of `features` or `costs`".into(),
                ))
            }
        };
        let classes = || -> Result<Vec<u32>> {
            values
                .iter()
                .map(|&v| {
                    if v >= 1.0 && v.fract() == 0.0 {
                        Ok(v as u32)
                    } else {
                        Err(Error::Config(format!(
                            "cost class must be a positive integer, got {v}"
                        )))
                    }
                })
                .collect()
        };
        match self.mode.as_str() {
            "class-linear" => {
                let scale = self.scale.ok_or_else(|| {
                    Error::Config("class-linear cost spec requires `scale`".into())
                })?;
                CostSchedule::class_linear(scale, classes()?)
            }
            "class-exponential" => CostSchedule::class_exponential(classes()?),
            "explicit" => CostSchedule::explicit(values),
            other => Err(Error::Config(format!("unknown cost mode {other:?}"))),
        }
    }
}
