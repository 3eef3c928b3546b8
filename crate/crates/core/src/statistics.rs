//! Empirical CDFs and medians over codeword stacks.

use serde::{Deserialize, Serialize};

use crate::radiation::PatternStack;
use crate::{Error, Result};

/// Right-continuous step CDF, one step per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    pub sorted_values: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySubset);
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Domain("NaN in CDF input".into()));
        }
        values.sort_by(f64::total_cmp);
        let n = values.len() as f64;
        let probabilities = (1..=values.len()).map(|k| k as f64 / n).collect();
        Ok(Self { sorted_values: values, probabilities })
    }

    pub fn len(&self) -> usize {
        self.sorted_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted_values.is_empty()
    }

    /// P(X <= x).
    pub fn eval(&self, x: f64) -> f64 {
        let k = self.sorted_values.partition_point(|&v| v <= x);
        k as f64 / self.len() as f64
    }

    /// Smallest sample whose cumulative probability reaches `p`.
    pub fn percentile(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("probability {p} outside [0, 1]")));
        }
        let n = self.len();
        let k = ((p * n as f64) - 1e-9).ceil().max(1.0) as usize;
        Ok(self.sorted_values[k.min(n) - 1])
    }

    /// Distinct step points `(value, cumulative probability)`.
    pub fn steps(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (&v, &p) in self.sorted_values.iter().zip(&self.probabilities) {
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 = p,
                _ => out.push((v, p)),
            }
        }
        out
    }
}

/// Lower of the two central order statistics for even counts.
///
/// # Panics
/// On an empty input.
pub fn lower_median(mut values: Vec<f64>) -> f64 {
    assert!(!values.is_empty(), "median of empty set");
    values.sort_by(f64::total_cmp);
    values[(values.len() - 1) / 2]
}

pub fn cdf_at_direction(stack: &PatternStack, subset: &[usize], theta: f64, phi: f64) -> Result<EmpiricalCdf> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    let values = subset.iter().map(|&i| stack.eirp_at(i, theta, phi)).collect::<Result<Vec<_>>>()?;
    EmpiricalCdf::new(values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Cut {
    /// Fixed azimuth, sweep elevation.
    Azimuth(f64),
    /// Fixed elevation, sweep azimuth.
    Elevation(f64),
}

/// Per-angle lower median across the subset along a grid cut.
pub fn median_cut(stack: &PatternStack, subset: &[usize], cut: Cut) -> Result<Vec<(f64, f64)>> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    let g = &stack.grid;
    let on_axis = |axis: &[f64], x: f64| axis.iter().position(|&a| (a - x).abs() < 1e-9);
    match cut {
        Cut::Azimuth(phi) => {
            let j = on_axis(&g.phi, phi).ok_or_else(|| Error::Domain(format!("azimuth {phi} not on grid")))?;
            Ok(g.theta
                .iter()
                .enumerate()
                .map(|(i, &t)| (t, lower_median(subset.iter().map(|&k| stack.db_at_cell(k, g.cell(i, j))).collect())))
                .collect())
        }
        Cut::Elevation(theta) => {
            let i = on_axis(&g.theta, theta).ok_or_else(|| Error::Domain(format!("elevation {theta} not on grid")))?;
            Ok(g.phi
                .iter()
                .enumerate()
                .map(|(j, &p)| (p, lower_median(subset.iter().map(|&k| stack.db_at_cell(k, g.cell(i, j))).collect())))
                .collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::{generate_codebook, CodebookConfig};
    use crate::geometry::{build_layout, ElementPattern, PanelConfig};
    use crate::radiation::{AngularGrid, Reference};
    use proptest::prelude::*;

    #[test]
    fn two_value_cdf() {
        let c = EmpiricalCdf::new(vec![-3.0, -7.0]).unwrap();
        assert_eq!(c.steps(), vec![(-7.0, 0.5), (-3.0, 1.0)]);
        assert_eq!(c.eval(-8.0), 0.0);
        assert_eq!(c.eval(-7.0), 0.5);
        assert_eq!(c.eval(-3.0), 1.0);
    }

    #[test]
    fn identical_values_single_step() {
        let c = EmpiricalCdf::new(vec![2.0; 5]).unwrap();
        assert_eq!(c.steps(), vec![(2.0, 1.0)]);
        assert!(EmpiricalCdf::new(vec![]).is_err());
    }

    #[test]
    fn lower_median_convention() {
        assert_eq!(lower_median(vec![4.0, 1.0, 3.0, 2.0]), 2.0);
        assert_eq!(lower_median(vec![5.0, 1.0, 3.0]), 3.0);
    }

    #[test]
    fn cuts_on_a_small_stack() {
        let panel = PanelConfig { n1: 2, n2: 2, ..PanelConfig::reference_4x4() };
        let layout = build_layout(&panel).unwrap();
        let book = generate_codebook(&CodebookConfig::new(2, 2, 2)).unwrap();
        let grid = AngularGrid::new((-20.0, 20.0), (-20.0, 20.0), 5.0).unwrap();
        let s = PatternStack::build(&layout, &ElementPattern::default(), &book, &grid, Reference::GlobalMax).unwrap();
        let single = median_cut(&s, &[3], Cut::Azimuth(5.0)).unwrap();
        for (k, (t, v)) in single.iter().enumerate() {
            assert_eq!(*t, grid.theta[k]);
            assert_eq!(*v, s.eirp_at(3, *t, 5.0).unwrap());
        }
        assert!(median_cut(&s, &[3], Cut::Azimuth(2.0)).is_err());
        assert_eq!(median_cut(&s, &[0, 1], Cut::Elevation(0.0)).unwrap().len(), grid.n_phi());
        let cdf = cdf_at_direction(&s, &[0, 1, 2], 5.0, 5.0).unwrap();
        assert_eq!(cdf.len(), 3);
    }

    proptest! {
        #[test]
        fn cdf_is_monotone_and_percentile_inverts(values in prop::collection::vec(-100.0f64..10.0, 1..60)) {
            let c = EmpiricalCdf::new(values.clone()).unwrap();
            let n = values.len() as f64;
            prop_assert!(c.sorted_values.windows(2).all(|w| w[0] <= w[1]));
            prop_assert_eq!(*c.probabilities.last().unwrap(), 1.0);
            prop_assert!((c.probabilities[0] - 1.0 / n).abs() < 1e-15);
            for (v, p) in c.steps() {
                prop_assert_eq!(c.eval(v), p);
                prop_assert_eq!(c.percentile(p).unwrap(), v);
            }
        }
    }
}
