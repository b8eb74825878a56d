use serde::{Deserialize, Serialize};

use super::MetricError;

/// Level of measurement, selecting alpha's difference function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Nominal,
    Ordinal,
    Interval,
}

/// Units × raters grid of optional values.
///
/// Raters can be human coders, models, repeated runs or prompt variants.
/// Values are kept as text; ordinal and interval scales parse them as
/// numbers unless an explicit ordinal order is given.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingsMatrix {
    units: Vec<String>,
    raters: Vec<String>,
    /// Row-major: `cells[unit][rater]`.
    cells: Vec<Vec<Option<String>>>,
    scale: Scale,
    order: Option<Vec<String>>,
}

impl RatingsMatrix {
    pub fn new(
        units: Vec<String>,
        raters: Vec<String>,
        cells: Vec<Vec<Option<String>>>,
        scale: Scale,
    ) -> Result<Self, MetricError> {
        if units.is_empty() {
            return Err(MetricError::TooSmall { what: "units", needed: 1, have: 0 });
        }
        if cells.len() != units.len() {
            return Err(MetricError::Shape(format!(
                "{} units but {} rows",
                units.len(),
                cells.len()
            )));
        }
        if let Some((i, row)) = cells.iter().enumerate().find(|(_, r)| r.len() != raters.len()) {
            return Err(MetricError::Shape(format!(
                "row {i} has {} cells, expected {}",
                row.len(),
                raters.len()
            )));
        }
        Ok(RatingsMatrix { units, raters, cells, scale, order: None })
    }

    /// Build from rows of string slices; `None` marks a missing cell.
    pub fn from_rows(rows: &[Vec<Option<&str>>], scale: Scale) -> Result<Self, MetricError> {
        let k = rows.first().map_or(0, Vec::len);
        let units = (0..rows.len()).map(|i| format!("u{i}")).collect();
        let raters = (0..k).map(|j| format!("r{j}")).collect();
        let cells = rows
            .iter()
            .map(|r| r.iter().map(|c| c.map(str::to_string)).collect())
            .collect();
        Self::new(units, raters, cells, scale)
    }

    /// Build from numeric rows; NaN marks a missing cell.
    pub fn from_numeric(rows: &[Vec<f64>], scale: Scale) -> Result<Self, MetricError> {
        let rows: Vec<Vec<Option<String>>> = rows
            .iter()
            .map(|r| r.iter().map(|x| (!x.is_nan()).then(|| format_number(*x))).collect())
            .collect();
        let k = rows.first().map_or(0, Vec::len);
        Self::new(
            (0..rows.len()).map(|i| format!("u{i}")).collect(),
            (0..k).map(|j| format!("r{j}")).collect(),
            rows,
            scale,
        )
    }

    /// Explicit ranking of values for the ordinal scale, lowest first.
    pub fn with_order(mut self, order: Vec<String>) -> Self {
        self.order = Some(order);
        self
    }

    pub fn units(&self) -> &[String] {
        &self.units
    }

    pub fn raters(&self) -> &[String] {
        &self.raters
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    pub fn with_scale(mut self, scale: Scale) -> Self {
        self.scale = scale;
        self
    }

    pub fn cell(&self, unit: usize, rater: usize) -> Option<&str> {
        self.cells[unit][rater].as_deref()
    }

    pub fn rows(&self) -> &[Vec<Option<String>>] {
        &self.cells
    }

    pub fn n_units(&self) -> usize {
        self.units.len()
    }

    pub fn n_raters(&self) -> usize {
        self.raters.len()
    }

    /// Rows picked (with repetition) by index, raters unchanged.
    pub fn select_units(&self, idx: &[usize]) -> RatingsMatrix {
        RatingsMatrix {
            units: idx.iter().map(|&i| self.units[i].clone()).collect(),
            raters: self.raters.clone(),
            cells: idx.iter().map(|&i| self.cells[i].clone()).collect(),
            scale: self.scale,
            order: self.order.clone(),
        }
    }

    /// Columns picked by index, units unchanged.
    pub fn select_raters(&self, idx: &[usize]) -> RatingsMatrix {
        RatingsMatrix {
            units: self.units.clone(),
            raters: idx.iter().map(|&j| self.raters[j].clone()).collect(),
            cells: self
                .cells
                .iter()
                .map(|row| idx.iter().map(|&j| row[j].clone()).collect())
                .collect(),
            scale: self.scale,
            order: self.order.clone(),
        }
    }

    /// Column `j` as a label vector.
    pub fn column(&self, j: usize) -> Vec<Option<String>> {
        self.cells.iter().map(|row| row[j].clone()).collect()
    }

    /// Fraction of units with at least two non-missing values.
    pub fn pairable_fraction(&self) -> f64 {
        let pairable = self
            .cells
            .iter()
            .filter(|row| row.iter().filter(|c| c.is_some()).count() >= 2)
            .count();
        pairable as f64 / self.units.len() as f64
    }

    /// Sort key for a value under this matrix's scale.
    pub(crate) fn numeric_value(&self, v: &str) -> Result<f64, MetricError> {
        if self.scale == Scale::Ordinal {
            if let Some(order) = &self.order {
                return order
                    .iter()
                    .position(|o| o == v)
                    .map(|p| p as f64)
                    .ok_or_else(|| MetricError::NonNumeric(v.to_string()));
            }
        }
        v.trim()
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| MetricError::NonNumeric(v.to_string()))
    }
}

/// Shortest text form that parses back to the same number.
pub(crate) fn format_number(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}
