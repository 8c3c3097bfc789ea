//! JSON input files.
//!
//! A space file describes the outcomes, the `F1` partition, and optionally a
//! utility, probe payoffs, a lift request and a refinement chain:
//!
//! ```json
//! {
//!   "masses": [[1, 4], [1, 4], [1, 4], [1, 4]],
//!   "f1_blocks": [[0, 1], [2, 3]],
//!   "utility": {"kind": "es", "alpha": [1, 2]},
//!   "probes": [[0, 1, 2, 4]]
//! }
//! ```
//!
//! `"uniform": n` may replace `masses`, and `"f1_contiguous": k` may replace
//! `f1_blocks` (k contiguous blocks of equal size). A utility file holds a
//! single `{"utility": …}` object.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{
    validate, Filtration, OutcomeSpace, Partition, RandomVariable, ValidationReport,
};
use crate::utility::{CoherentUtility, DistortionFunction, ProductGrid, ScenarioSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum UtilityDef {
    Expectation,
    Es { alpha: [i64; 2] },
    Power { alpha: f64 },
    Piecewise { knots: Vec<[f64; 2]> },
    Scenario { measures: Vec<Vec<f64>> },
    Product { rows: usize, cols: usize },
}

impl UtilityDef {
    pub fn build(&self) -> Result<CoherentUtility> {
        Ok(match self {
            Self::Expectation => CoherentUtility::expectation(),
            Self::Es { alpha } => CoherentUtility::es(alpha[0], alpha[1])?,
            Self::Power { alpha } => {
                CoherentUtility::Distortion(DistortionFunction::power(*alpha)?)
            }
            Self::Piecewise { knots } => CoherentUtility::Distortion(
                DistortionFunction::piecewise(knots.iter().map(|k| (k[0], k[1])).collect())?,
            ),
            Self::Scenario { measures } => {
                CoherentUtility::Scenario(ScenarioSet::new(measures.clone())?)
            }
            Self::Product { rows, cols } => CoherentUtility::ProductExample(ProductGrid {
                rows: *rows,
                cols: *cols,
            }),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilityFile {
    pub utility: UtilityDef,
}

impl UtilityFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| schema_error("utility file", &e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiftDef {
    pub grid_n: usize,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masses: Option<Vec<[i64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniform: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f1_blocks: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f1_contiguous: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    /// Intermediate partitions `G_1 ⊆ … ⊆ G_k` for multi-period audits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<Vec<Vec<usize>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utility: Option<UtilityDef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probes: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lift: Option<LiftDef>,
}

/// A validated space file.
#[derive(Debug, Clone)]
pub struct LoadedSpace {
    pub space: OutcomeSpace,
    pub filtration: Filtration,
    pub report: ValidationReport,
}

fn schema_error(what: &str, e: &serde_json::Error) -> Error {
    Error::Schema(format!(
        "{what}: line {}, column {}: {e}",
        e.line(),
        e.column()
    ))
}

impl SpaceFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| schema_error("space file", &e))
    }

    pub fn mass_fractions(&self) -> Result<Vec<(i64, i64)>> {
        match (&self.masses, self.uniform) {
            (Some(m), None) => Ok(m.iter().map(|p| (p[0], p[1])).collect()),
            (None, Some(n)) => Ok(vec![(1, n as i64); n]),
            (Some(_), Some(_)) => Err(Error::Schema(
                "field `masses` conflicts with `uniform`".into(),
            )),
            (None, None) => Err(Error::Schema(
                "one of `masses` or `uniform` is required".into(),
            )),
        }
    }

    pub fn f1_partition_blocks(&self, n: usize) -> Result<Vec<Vec<usize>>> {
        match (&self.f1_blocks, self.f1_contiguous) {
            (Some(b), None) => Ok(b.clone()),
            (None, Some(k)) => {
                if k == 0 || !n.is_multiple_of(k) {
                    return Err(Error::Schema(format!(
                        "field `f1_contiguous`: {k} does not divide {n} outcomes"
                    )));
                }
                Ok(Partition::contiguous(n, k)?.blocks().to_vec())
            }
            (Some(_), Some(_)) => Err(Error::Schema(
                "field `f1_blocks` conflicts with `f1_contiguous`".into(),
            )),
            (None, None) => Ok(vec![(0..n).collect()]),
        }
    }

    /// Structural checks without building anything.
    pub fn validation_report(&self) -> Result<ValidationReport> {
        let masses = self.mass_fractions()?;
        let blocks = self.f1_partition_blocks(masses.len())?;
        Ok(validate(&masses, &blocks))
    }

    pub fn load(&self) -> Result<LoadedSpace> {
        let report = self.validation_report()?;
        if !report.is_valid() {
            return Err(Error::InvalidSpace(report));
        }
        let masses = self.mass_fractions()?;
        let mut space = OutcomeSpace::from_fractions(&masses)?;
        if let Some(labels) = &self.labels {
            if labels.len() != masses.len() {
                return Err(Error::Schema(format!(
                    "field `labels`: {} labels for {} outcomes",
                    labels.len(),
                    masses.len()
                )));
            }
            space = OutcomeSpace::new(labels.clone(), space.masses().to_vec())?;
        }
        let filtration =
            Filtration::from_blocks(masses.len(), self.f1_partition_blocks(masses.len())?)?;
        Ok(LoadedSpace {
            space,
            filtration,
            report,
        })
    }

    pub fn utility(&self) -> Result<Option<CoherentUtility>> {
        self.utility.as_ref().map(UtilityDef::build).transpose()
    }

    pub fn probe_vectors(&self) -> Result<Vec<RandomVariable>> {
        self.probes
            .iter()
            .flatten()
            .map(|p| RandomVariable::new(p.clone()))
            .collect()
    }

    pub fn level_partitions(&self, n: usize) -> Result<Vec<Partition>> {
        self.levels
            .iter()
            .flatten()
            .map(|blocks| Partition::new(n, blocks.clone()))
            .collect()
    }
}
