//! Cone separation: violation scan, supporting-hyperplane cuts and the
//! warm cut pool shared across solves.
//!
//! The rotated cone `i·v >= p² + q²` (with `i, v >= 0`) is the standard cone
//! `‖(2p, 2q, i − v)‖ <= i + v`. For an anchor point with gradient direction
//! `g = (2p*, 2q*, i* − v*)`, Cauchy–Schwarz gives the valid inequality
//! `g·(2p, 2q, i − v) <= ‖g‖ (i + v)` for every cone point.

use std::collections::VecDeque;

use serde::Serialize;

use crate::program::{ColId, ConePoint, LinearRow, Program, RotatedCone, RowTag};

pub const CUT_TAG: RowTag = RowTag("25-cut");

/// Homogeneous linear cut `c_p p + c_q q + c_i i + c_v v <= 0` on one cone.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConeCut {
    pub key: u64,
    pub coeffs: [f64; 4],
}

impl ConeCut {
    pub fn evaluate(&self, point: &ConePoint) -> f64 {
        let [cp, cq, ci, cv] = self.coeffs;
        cp * point.p + cq * point.q + ci * point.current + cv * point.voltage
    }

    pub fn to_row(&self, cone: &RotatedCone) -> LinearRow {
        let [cp, cq, ci, cv] = self.coeffs;
        let mut terms: Vec<(ColId, f64)> = Vec::with_capacity(4);
        for (col, a) in [
            (cone.p, cp),
            (cone.q, cq),
            (cone.current, ci),
            (cone.voltage, cv),
        ] {
            if a != 0.0 {
                terms.push((col, a));
            }
        }
        LinearRow {
            terms,
            lower: f64::NEG_INFINITY,
            upper: 0.0,
            tag: CUT_TAG,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConeViolation {
    /// Index into `Program::cones`.
    pub cone: usize,
    pub violation: f64,
    pub point: ConePoint,
}

/// Cones whose relative violation at `x` exceeds `tol`.
pub fn cone_violations(program: &Program, x: &[f64], tol: f64) -> Vec<ConeViolation> {
    program
        .cones
        .iter()
        .enumerate()
        .filter_map(|(k, cone)| {
            let point = cone.point(x);
            let violation = point.relative_violation();
            (violation > tol).then_some(ConeViolation {
                cone: k,
                violation,
                point,
            })
        })
        .collect()
}

/// Supporting cut built at `anchor`, normalised so the largest coefficient
/// has magnitude one. Returns `None` when the gradient vanishes.
pub fn cut_at(key: u64, anchor: &ConePoint) -> Option<ConeCut> {
    let g = [
        2.0 * anchor.p,
        2.0 * anchor.q,
        anchor.current - anchor.voltage,
    ];
    let norm = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
    if !(norm > 1e-14) {
        return None;
    }
    let mut coeffs = [
        2.0 * g[0] / norm,
        2.0 * g[1] / norm,
        g[2] / norm - 1.0,
        -g[2] / norm - 1.0,
    ];
    let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    for c in &mut coeffs {
        *c /= scale;
    }
    Some(ConeCut { key, coeffs })
}

/// Separating cut for a point outside the cone.
///
/// The anchor is the cone-surface point reached by raising `current` until
/// `current · voltage = p² + q²`; the hyperplane is tangent there and so
/// cuts off the violating point. When `voltage` is not positive the violating
/// point itself is the anchor, and a degenerate gradient falls back to a
/// slightly perturbed anchor.
pub fn separating_cut(key: u64, point: &ConePoint) -> ConeCut {
    let anchor = if point.voltage > 0.0 {
        ConePoint {
            current: point.flow_sqr() / point.voltage,
            ..*point
        }
    } else {
        *point
    };
    cut_at(key, &anchor)
        .or_else(|| cut_at(key, point))
        .unwrap_or_else(|| {
            let eps = 1e-6;
            let nudged = ConePoint {
                p: point.p + eps,
                current: point.current,
                voltage: point.voltage.max(eps),
                q: point.q,
            };
            let lifted = ConePoint {
                current: nudged.flow_sqr() / nudged.voltage,
                ..nudged
            };
            cut_at(key, &lifted).expect("perturbed anchor has a non-zero gradient")
        })
}

/// Cut log entry: the cut and the point it was generated to separate.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CutRecord {
    pub cone: usize,
    pub separated: ConePoint,
    pub cut: ConeCut,
}

pub fn generate_cuts(program: &Program, violations: &[ConeViolation]) -> Vec<CutRecord> {
    violations
        .iter()
        .map(|v| CutRecord {
            cone: v.cone,
            separated: v.point,
            cut: separating_cut(program.cones[v.cone].key, &v.point),
        })
        .collect()
}

/// FIFO-bounded store of cone cuts keyed by physical cone.
#[derive(Clone, Debug)]
pub struct CutPool {
    capacity: usize,
    cuts: VecDeque<ConeCut>,
}

impl Default for CutPool {
    fn default() -> Self {
        Self::with_capacity(100_000)
    }
}

impl CutPool {
    pub fn with_capacity(capacity: usize) -> Self {
        Self {
            capacity,
            cuts: VecDeque::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    pub fn clear(&mut self) {
        self.cuts.clear();
    }

    pub fn push(&mut self, cut: ConeCut) {
        if self.capacity == 0 {
            return;
        }
        while self.cuts.len() >= self.capacity {
            self.cuts.pop_front();
        }
        self.cuts.push_back(cut);
    }

    pub fn iter(&self) -> impl Iterator<Item = &ConeCut> {
        self.cuts.iter()
    }

    /// Rows for every pooled cut whose key matches a cone of `program`.
    pub fn rows_for(&self, program: &Program) -> Vec<LinearRow> {
        if self.cuts.is_empty() {
            return Vec::new();
        }
        let by_key: std::collections::HashMap<u64, &RotatedCone> =
            program.cones.iter().map(|c| (c.key, c)).collect();
        self.cuts
            .iter()
            .filter_map(|cut| by_key.get(&cut.key).map(|cone| cut.to_row(cone)))
            .collect()
    }
}
