//! Verification reports shared by the experiments and the CLI.

use crate::error::Result;
use crate::stats::{Estimate, Z_THRESHOLD};

/// How a row's pass flag is decided.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Criterion {
    /// `|z| <= 3`.
    Statistical,
    /// `|estimate - theoretical| <= tol`.
    Absolute(f64),
    /// Recorded for inspection with an absolute tolerance; never gates the
    /// overall verdict.
    Informational(f64),
    /// `|z| <= 3` or relative error at most the given fraction.
    StatisticalOrRelative(f64),
    /// `estimate > threshold` (the theoretical column holds the threshold).
    Exceeds,
    /// `z <= limit`: the estimate may fall below the theoretical value by any
    /// amount but exceed it by at most `limit` standard errors.
    AtMostSigma(f64),
}

/// One compared quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub quantity: String,
    pub theoretical: f64,
    pub estimate: Estimate,
    /// For statistical rows the z-score; for tolerance rows the error divided
    /// by the tolerance.
    pub z_score: f64,
    pub pass: bool,
    pub criterion: Criterion,
}

impl ReportRow {
    pub fn statistical(quantity: impl Into<String>, theoretical: f64, estimate: Estimate) -> Result<Self> {
        let z = estimate.z_score(theoretical)?;
        Ok(ReportRow {
            quantity: quantity.into(),
            theoretical,
            estimate,
            z_score: z,
            pass: z.abs() <= Z_THRESHOLD,
            criterion: Criterion::Statistical,
        })
    }

    pub fn absolute(quantity: impl Into<String>, theoretical: f64, value: f64, tol: f64) -> Self {
        Self::with_tolerance(quantity, theoretical, value, Criterion::Absolute(tol))
    }

    pub fn informational(quantity: impl Into<String>, theoretical: f64, value: f64, tol: f64) -> Self {
        Self::with_tolerance(quantity, theoretical, value, Criterion::Informational(tol))
    }

    pub fn statistical_or_relative(
        quantity: impl Into<String>,
        theoretical: f64,
        estimate: Estimate,
        rel: f64,
    ) -> Result<Self> {
        let mut row = Self::statistical(quantity, theoretical, estimate)?;
        row.criterion = Criterion::StatisticalOrRelative(rel);
        row.pass = row.pass || (estimate.value - theoretical).abs() <= rel * theoretical.abs();
        Ok(row)
    }

    pub fn exceeds(quantity: impl Into<String>, threshold: f64, value: f64) -> Self {
        ReportRow {
            quantity: quantity.into(),
            theoretical: threshold,
            estimate: Estimate::exact(value),
            z_score: f64::NAN,
            pass: value > threshold,
            criterion: Criterion::Exceeds,
        }
    }

    pub fn at_most_sigma(quantity: impl Into<String>, theoretical: f64, estimate: Estimate, limit: f64) -> Result<Self> {
        let z = estimate.z_score(theoretical)?;
        Ok(ReportRow {
            quantity: quantity.into(),
            theoretical,
            estimate,
            z_score: z,
            pass: z <= limit,
            criterion: Criterion::AtMostSigma(limit),
        })
    }

    fn with_tolerance(quantity: impl Into<String>, theoretical: f64, value: f64, criterion: Criterion) -> Self {
        let tol = match criterion {
            Criterion::Absolute(t) | Criterion::Informational(t) => t,
            _ => unreachable!("tolerance criteria only"),
        };
        let ratio = (value - theoretical) / tol;
        ReportRow {
            quantity: quantity.into(),
            theoretical,
            estimate: Estimate::exact(value),
            z_score: ratio,
            pass: ratio.abs() <= 1.0,
            criterion,
        }
    }

    /// Whether this row counts towards the report verdict.
    pub fn gates(&self) -> bool {
        !matches!(self.criterion, Criterion::Informational(_))
    }
}

/// A named list of comparisons plus free-form metadata.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerificationReport {
    pub name: String,
    pub rows: Vec<ReportRow>,
    pub metadata: Vec<(String, String)>,
}

impl VerificationReport {
    pub fn new(name: impl Into<String>) -> Self {
        VerificationReport {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn push(&mut self, row: ReportRow) {
        self.rows.push(row);
    }

    pub fn meta(&mut self, key: impl Into<String>, value: impl ToString) {
        self.metadata.push((key.into(), value.to_string()));
    }

    /// All gating rows pass (an empty report passes vacuously).
    pub fn pass(&self) -> bool {
        self.rows.iter().filter(|r| r.gates()).all(|r| r.pass)
    }

    pub fn row(&self, quantity: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.quantity == quantity)
    }

    pub fn extend(&mut self, other: VerificationReport) {
        self.rows.extend(other.rows);
        self.metadata.extend(other.metadata);
    }
}
