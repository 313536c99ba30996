//! Piecewise-linear lookup tables for measured device curves.
//!
//! Device physics enters the model through two sampled curves, growth
//! velocity over temperature and thermal resistance over amorphous
//! thickness. Both are published as figures rather than tables, so the
//! simulator takes editable (x, y) knot lists and interpolates linearly,
//! clamping to the end values outside the sampled range. A single-knot
//! table is a constant function.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct LookupTable {
    points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TableError {
    Empty,
    NonFinite { index: usize },
    NotIncreasing { index: usize },
}

impl fmt::Display for TableError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TableError::Empty => write!(f, "table has no points"),
            TableError::NonFinite { index } => write!(f, "non-finite entry at point {index}"),
            TableError::NotIncreasing { index } => {
                write!(f, "x values must be strictly increasing (point {index})")
            }
        }
    }
}

impl std::error::Error for TableError {}

impl LookupTable {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, TableError> {
        if points.is_empty() {
            return Err(TableError::Empty);
        }
        for (i, &(x, y)) in points.iter().enumerate() {
            if !x.is_finite() || !y.is_finite() {
                return Err(TableError::NonFinite { index: i });
            }
            if i > 0 && x <= points[i - 1].0 {
                return Err(TableError::NotIncreasing { index: i });
            }
        }
        Ok(Self { points })
    }

    /// Constant table (single knot at x = 0).
    pub fn constant(y: f64) -> Self {
        Self {
            points: vec![(0.0, y)],
        }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn max_y(&self) -> f64 {
        self.points.iter().map(|p| p.1).fold(f64::MIN, f64::max)
    }

    /// Linear interpolation with constant extrapolation at both ends.
    pub fn eval(&self, x: f64) -> f64 {
        let pts = &self.points;
        if x <= pts[0].0 {
            return pts[0].1;
        }
        let last = pts.len() - 1;
        if x >= pts[last].0 {
            return pts[last].1;
        }
        let hi = pts.partition_point(|p| p.0 < x);
        let (x0, y0) = pts[hi - 1];
        let (x1, y1) = pts[hi];
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_point_is_constant() {
        let t = LookupTable::constant(2.5);
        assert_eq!(t.eval(-100.0), 2.5);
        assert_eq!(t.eval(0.0), 2.5);
        assert_eq!(t.eval(1e9), 2.5);
    }

    #[test]
    fn interpolates_between_knots() {
        let t = LookupTable::new(vec![(0.0, 0.0), (10.0, 1.0)]).unwrap();
        assert_eq!(t.eval(5.0), 0.5);
        assert_eq!(t.eval(2.5), 0.25);
    }

    #[test]
    fn clamps_outside_domain() {
        let t = LookupTable::new(vec![(1.0, 3.0), (2.0, 7.0)]).unwrap();
        assert_eq!(t.eval(0.0), 3.0);
        assert_eq!(t.eval(9.0), 7.0);
    }

    #[test]
    fn rejects_bad_tables() {
        assert_eq!(LookupTable::new(vec![]), Err(TableError::Empty));
        assert_eq!(
            LookupTable::new(vec![(0.0, 1.0), (0.0, 2.0)]),
            Err(TableError::NotIncreasing { index: 1 })
        );
        assert_eq!(
            LookupTable::new(vec![(0.0, f64::NAN)]),
            Err(TableError::NonFinite { index: 0 })
        );
    }

    proptest! {
        #[test]
        fn eval_stays_within_knot_range(
            ys in proptest::collection::vec(-1e6f64..1e6, 1..8),
            x in -1e7f64..1e7,
        ) {
            let points: Vec<(f64, f64)> =
                ys.iter().enumerate().map(|(i, &y)| (i as f64 * 3.0, y)).collect();
            let t = LookupTable::new(points).unwrap();
            let lo = ys.iter().cloned().fold(f64::MAX, f64::min);
            let hi = ys.iter().cloned().fold(f64::MIN, f64::max);
            let v = t.eval(x);
            prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
        }
    }
}
