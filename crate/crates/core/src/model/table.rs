//! Piecewise-linear lookup tables with end clamping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Locate the segment `[knots[i], knots[i+1]]` containing `x` and the
/// fractional position inside it. Values outside the knot range clamp to
/// the nearest end.
pub(crate) fn locate(knots: &[f64], x: f64) -> (usize, f64) {
    let n = knots.len();
    debug_assert!(n >= 2);
    if x <= knots[0] {
        return (0, 0.0);
    }
    if x >= knots[n - 1] {
        return (n - 2, 1.0);
    }
    // first knot strictly greater than x, minus one
    let i = knots.partition_point(|&k| k <= x) - 1;
    let i = i.min(n - 2);
    let w = (x - knots[i]) / (knots[i + 1] - knots[i]);
    (i, w)
}

fn check_knots(name: &str, knots: &[f64]) -> Result<()> {
    if knots.len() < 2 {
        return Err(Error::Config(format!("{name}: need at least 2 knots")));
    }
    if knots.iter().any(|k| !k.is_finite()) {
        return Err(Error::Config(format!("{name}: non-finite knot")));
    }
    if knots.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!(
            "{name}: knots must be strictly increasing"
        )));
    }
    Ok(())
}

/// One-dimensional table `y(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1D {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Table1D {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let t = Table1D { x, y };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        check_knots("table x", &self.x)?;
        if self.y.len() != self.x.len() {
            return Err(Error::Config(format!(
                "table has {} knots but {} values",
                self.x.len(),
                self.y.len()
            )));
        }
        if self.y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("table: non-finite value".into()));
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (i, w) = locate(&self.x, x);
        self.y[i] + w * (self.y[i + 1] - self.y[i])
    }
}

/// Two-dimensional table over (soc, battery temperature).
///
/// `values[j][i]` is the entry at `tb[j]`, `soc[i]`: one row per
/// temperature knot, matching the CSV layout (header = soc knots, first
/// column = temperature knots).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table2D {
    pub soc: Vec<f64>,
    pub tb: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl Table2D {
    pub fn new(soc: Vec<f64>, tb: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        let t = Table2D { soc, tb, values };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        check_knots("soc knots", &self.soc)?;
        check_knots("tb knots", &self.tb)?;
        if self.values.len() != self.tb.len() {
            return Err(Error::Config(format!(
                "expected {} rows (one per tb knot), found {}",
                self.tb.len(),
                self.values.len()
            )));
        }
        for (j, row) in self.values.iter().enumerate() {
            if row.len() != self.soc.len() {
                return Err(Error::Config(format!(
                    "row {j}: expected {} columns, found {}",
                    self.soc.len(),
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("row {j}: non-finite value")));
            }
        }
        Ok(())
    }

    /// Bilinear interpolation, clamped to the grid hull.
    pub fn eval(&self, soc: f64, tb: f64) -> f64 {
        let (i, ws) = locate(&self.soc, soc);
        let (j, wt) = locate(&self.tb, tb);
        let v = &self.values;
        let lo = v[j][i] + ws * (v[j][i + 1] - v[j][i]);
        let hi = v[j + 1][i] + ws * (v[j + 1][i + 1] - v[j + 1][i]);
        lo + wt * (hi - lo)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Table2D {
            soc: self.soc.clone(),
            tb: self.tb.clone(),
            values: self
                .values
                .iter()
                .map(|row| row.iter().map(|v| v * factor).collect())
                .collect(),
        }
    }

    pub fn min_value(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// True if every row and every column is non-decreasing in its index
    /// when `f` is applied to the entries.
    pub(crate) fn monotone_by(&self, f: impl Fn(f64) -> f64) -> (bool, bool) {
        let v = &self.values;
        let along_soc = v
            .iter()
            .all(|row| row.windows(2).all(|w| f(w[1]) >= f(w[0])));
        let along_tb =
            (0..self.soc.len()).all(|i| v.windows(2).all(|rows| f(rows[1][i]) >= f(rows[0][i])));
        (along_soc, along_tb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn knot_identity_and_midpoint() {
        let t = Table1D::new(vec![0.0, 0.5, 1.0], vec![390.0, 410.0, 420.0]).unwrap();
        assert_eq!(t.eval(0.5), 410.0);
        assert_eq!(t.eval(0.25), 400.0);
        assert_eq!(t.eval(1.0), 420.0);
        assert_eq!(t.eval(0.0), 390.0);
    }

    #[test]
    fn clamps_outside_hull() {
        let t = Table1D::new(vec![0.2, 0.8], vec![1.0, 2.0]).unwrap();
        assert_eq!(t.eval(0.0), 1.0);
        assert_eq!(t.eval(5.0), 2.0);
    }

    #[test]
    fn rejects_bad_knots() {
        assert!(Table1D::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(Table1D::new(vec![0.0], vec![1.0]).is_err());
        assert!(Table1D::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(Table2D::new(vec![0.0, 1.0], vec![0.0, 1.0], vec![vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn bilinear_matches_hand_value() {
        let t = Table2D::new(
            vec![0.0, 1.0],
            vec![0.0, 10.0],
            vec![vec![0.0, 1.0], vec![2.0, 3.0]],
        )
        .unwrap();
        // f = soc + 0.2*tb is reproduced exactly by bilinear interpolation
        assert!((t.eval(0.3, 4.0) - (0.3 + 0.8)).abs() < 1e-12);
        assert_eq!(t.eval(-1.0, 20.0), 2.0);
    }
}
