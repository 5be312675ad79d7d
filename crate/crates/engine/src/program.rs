//! Solver-agnostic program image.
//!
//! A [`Program`] is a minimisation over bounded columns with linear rows
//! `lower <= a·x <= upper` and rotated second-order cones
//! `current · voltage >= p² + q²`. Every row and cone carries a [`RowTag`]
//! naming the constraint family that produced it.

use serde::{Deserialize, Serialize};

pub type ColId = usize;

/// Constraint family label attached to every row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct RowTag(pub &'static str);

impl RowTag {
    pub fn as_str(&self) -> &'static str {
        self.0
    }
}

impl std::fmt::Display for RowTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub lower: f64,
    pub upper: f64,
    pub integer: bool,
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearRow {
    pub terms: Vec<(ColId, f64)>,
    pub lower: f64,
    pub upper: f64,
    pub tag: RowTag,
}

impl LinearRow {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(c, a)| a * x[c]).sum()
    }

    /// Amount by which `x` violates the row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        (self.lower - act).max(act - self.upper).max(0.0)
    }

    pub fn is_equality(&self) -> bool {
        self.lower == self.upper
    }
}

/// Rotated cone `current · voltage >= p² + q²` with `current, voltage >= 0`.
///
/// `key` identifies the physical cone (line and period) independently of
/// column numbering, so cuts can be replayed into a rebuilt program.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotatedCone {
    pub current: ColId,
    pub voltage: ColId,
    pub p: ColId,
    pub q: ColId,
    pub key: u64,
    pub tag: RowTag,
}

impl RotatedCone {
    pub fn point(&self, x: &[f64]) -> ConePoint {
        ConePoint {
            p: x[self.p],
            q: x[self.q],
            current: x[self.current],
            voltage: x[self.voltage],
        }
    }
}

/// Values of the four cone coordinates at a given solution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConePoint {
    pub p: f64,
    pub q: f64,
    pub current: f64,
    pub voltage: f64,
}

impl ConePoint {
    pub fn new(p: f64, q: f64, current: f64, voltage: f64) -> Self {
        Self {
            p,
            q,
            current,
            voltage,
        }
    }

    pub fn flow_sqr(&self) -> f64 {
        self.p * self.p + self.q * self.q
    }

    /// `(p² + q² − i·v) / max(1, p² + q²)`; positive means outside the cone.
    pub fn relative_violation(&self) -> f64 {
        let flow = self.flow_sqr();
        (flow - self.current * self.voltage) / flow.max(1.0)
    }
}

#[derive(Clone, Debug, Default)]
pub struct Program {
    pub columns: Vec<Column>,
    pub rows: Vec<LinearRow>,
    pub cones: Vec<RotatedCone>,
    pub objective_offset: f64,
}

impl Program {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn add_column(&mut self, lower: f64, upper: f64, integer: bool, cost: f64) -> ColId {
        debug_assert!(lower <= upper, "column bounds {lower} > {upper}");
        self.columns.push(Column {
            lower,
            upper,
            integer,
            cost,
        });
        self.columns.len() - 1
    }

    pub fn add_row(
        &mut self,
        tag: RowTag,
        terms: Vec<(ColId, f64)>,
        lower: f64,
        upper: f64,
    ) -> usize {
        self.rows.push(LinearRow {
            terms,
            lower,
            upper,
            tag,
        });
        self.rows.len() - 1
    }

    pub fn add_le(&mut self, tag: RowTag, terms: Vec<(ColId, f64)>, rhs: f64) -> usize {
        self.add_row(tag, terms, f64::NEG_INFINITY, rhs)
    }

    pub fn add_ge(&mut self, tag: RowTag, terms: Vec<(ColId, f64)>, rhs: f64) -> usize {
        self.add_row(tag, terms, rhs, f64::INFINITY)
    }

    pub fn add_eq(&mut self, tag: RowTag, terms: Vec<(ColId, f64)>, rhs: f64) -> usize {
        self.add_row(tag, terms, rhs, rhs)
    }

    pub fn add_cone(&mut self, cone: RotatedCone) {
        self.cones.push(cone);
    }

    pub fn add_cost(&mut self, col: ColId, cost: f64) {
        self.columns[col].cost += cost;
    }

    pub fn has_integers(&self) -> bool {
        self.columns.iter().any(|c| c.integer)
    }

    pub fn integer_columns(&self) -> impl Iterator<Item = ColId> + '_ {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.integer)
            .map(|(j, _)| j)
    }

    pub fn evaluate_objective(&self, x: &[f64]) -> f64 {
        self.objective_offset
            + self
                .columns
                .iter()
                .zip(x)
                .map(|(c, v)| c.cost * v)
                .sum::<f64>()
    }

    /// Largest linear row or bound violation at `x`.
    pub fn max_linear_violation(&self, x: &[f64]) -> f64 {
        let rows = self
            .rows
            .iter()
            .map(|r| r.violation(x))
            .fold(0.0f64, f64::max);
        let bounds = self
            .columns
            .iter()
            .zip(x)
            .map(|(c, &v)| (c.lower - v).max(v - c.upper).max(0.0))
            .fold(0.0f64, f64::max);
        rows.max(bounds)
    }

    pub fn max_cone_violation(&self, x: &[f64]) -> f64 {
        self.cones
            .iter()
            .map(|c| c.point(x).relative_violation())
            .fold(0.0f64, f64::max)
    }

    /// Largest distance of an integer column from the nearest integer.
    pub fn max_integrality_violation(&self, x: &[f64]) -> f64 {
        self.integer_columns()
            .map(|j| (x[j] - x[j].round()).abs())
            .fold(0.0f64, f64::max)
    }

    pub fn rows_with_tag(&self, tag: &str) -> usize {
        self.rows.iter().filter(|r| r.tag.0 == tag).count()
    }

    /// Copy with every integer column fixed to the rounded value in `x`.
    pub fn with_integers_fixed(&self, x: &[f64]) -> Program {
        let mut fixed = self.clone();
        for (j, col) in fixed.columns.iter_mut().enumerate() {
            if col.integer {
                let v = x[j].round().clamp(col.lower, col.upper);
                col.lower = v;
                col.upper = v;
            }
        }
        fixed
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_violation_is_distance_outside_range() {
        let row = LinearRow {
            terms: vec![(0, 1.0), (1, 2.0)],
            lower: 1.0,
            upper: 3.0,
            tag: RowTag("t"),
        };
        assert_eq!(row.violation(&[1.0, 0.5]), 0.0);
        assert_eq!(row.violation(&[0.0, 0.0]), 1.0);
        assert_eq!(row.violation(&[2.0, 1.0]), 1.0);
    }

    #[test]
    fn relative_violation_scaling() {
        // 3-4-5 triangle: tight.
        assert_eq!(ConePoint::new(3.0, 4.0, 25.0, 1.0).relative_violation(), 0.0);
        let v = ConePoint::new(3.0, 4.0, 20.0, 1.0).relative_violation();
        assert!((v - 0.2).abs() < 1e-15);
        assert!(ConePoint::new(3.0, 4.0, 30.0, 1.0).relative_violation() < 0.0);
        // Small flows are measured in absolute terms.
        let v = ConePoint::new(0.1, 0.0, 0.0, 1.0).relative_violation();
        assert!((v - 0.01).abs() < 1e-15);
    }

    #[test]
    fn fixing_integers_rounds_and_clamps() {
        let mut p = Program::new();
        p.add_column(0.0, 1.0, true, 1.0);
        p.add_column(0.0, 5.0, false, 1.0);
        let f = p.with_integers_fixed(&[0.9999, 2.5]);
        assert_eq!((f.columns[0].lower, f.columns[0].upper), (1.0, 1.0));
        assert_eq!((f.columns[1].lower, f.columns[1].upper), (0.0, 5.0));
    }
}
