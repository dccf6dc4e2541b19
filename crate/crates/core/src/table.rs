//! Convergence tables emitted by the sweeps.

use std::fmt::Write as _;

/// How the `extrapolated` column was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extrapolation {
    /// Quadratic through the last three rows, evaluated at `1 - s = 0`.
    OneMinusS,
    /// Quadratic through the last three rows, evaluated at `s = 0`.
    S,
    None,
}

impl Extrapolation {
    pub fn tag(&self) -> &'static str {
        match self {
            Extrapolation::OneMinusS => "richardson(1-s)",
            Extrapolation::S => "richardson(s)",
            Extrapolation::None => "none",
        }
    }

    fn variable(&self, param: f64) -> f64 {
        match self {
            Extrapolation::OneMinusS => 1.0 - param,
            Extrapolation::S | Extrapolation::None => param,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub param: f64,
    pub value: f64,
    pub extrapolated: Option<f64>,
    pub reference: f64,
    pub rel_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub method: Extrapolation,
}

/// Value at `t = 0` of the quadratic (or line, for two points) through `pts`.
pub fn extrapolate_to_zero(pts: &[(f64, f64)]) -> f64 {
    let mut p: Vec<f64> = pts.iter().map(|q| q.1).collect();
    let t: Vec<f64> = pts.iter().map(|q| q.0).collect();
    // Neville's tableau at 0.
    for level in 1..p.len() {
        for i in (level..p.len()).rev() {
            let (ti, tj) = (t[i], t[i - level]);
            p[i] = (ti * p[i - 1] - tj * p[i]) / (ti - tj);
        }
    }
    *p.last().unwrap_or(&f64::NAN)
}

fn relative(best: f64, reference: f64) -> Option<f64> {
    if reference != 0.0 {
        Some((best - reference).abs() / reference.abs())
    } else if best == 0.0 {
        Some(0.0)
    } else {
        None
    }
}

impl ConvergenceTable {
    /// Builds a table whose row `i >= 2` carries the extrapolation through rows
    /// `i-2, i-1, i`. `rel_error` compares the extrapolated value when present
    /// and the raw value otherwise.
    pub fn extrapolated(params: &[f64], values: &[f64], references: &[f64], method: Extrapolation) -> Self {
        let mut rows = Vec::with_capacity(params.len());
        for i in 0..params.len() {
            let extrapolated = (method != Extrapolation::None && i >= 2).then(|| {
                let pts: Vec<(f64, f64)> = (i - 2..=i).map(|j| (method.variable(params[j]), values[j])).collect();
                extrapolate_to_zero(&pts)
            });
            let best = extrapolated.unwrap_or(values[i]);
            rows.push(ConvergenceRow {
                param: params[i],
                value: values[i],
                extrapolated,
                reference: references[i],
                rel_error: relative(best, references[i]),
            });
        }
        Self { rows, method }
    }

    /// A table of distances with reference 0 and no extrapolation.
    pub fn distances(params: &[f64], values: &[f64]) -> Self {
        let rows = params
            .iter()
            .zip(values)
            .map(|(&param, &value)| ConvergenceRow { param, value, extrapolated: None, reference: 0.0, rel_error: None })
            .collect();
        Self { rows, method: Extrapolation::None }
    }

    pub fn last(&self) -> Option<&ConvergenceRow> {
        self.rows.last()
    }

    /// Extrapolated value of the last row, or its raw value.
    pub fn final_estimate(&self) -> Option<f64> {
        self.last().map(|r| r.extrapolated.unwrap_or(r.value))
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = String::from("param,value,extrapolated,reference,rel_error\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{},{}", r.param, r.value, opt(r.extrapolated), r.reference, opt(r.rel_error));
        }
        out
    }

    /// One-line description of the last row.
    pub fn summary(&self, label: &str) -> String {
        match self.last() {
            None => format!("{label}: empty table"),
            Some(r) => {
                let opt = |v: Option<f64>| v.map(|x| format!("{x:.6e}")).unwrap_or_else(|| "-".into());
                format!(
                    "{label}: {} rows, last param {} value {:.6e} extrapolated {} reference {:.6e} rel_error {} [{}]",
                    self.rows.len(),
                    r.param,
                    r.value,
                    opt(r.extrapolated),
                    r.reference,
                    opt(r.rel_error),
                    self.method.tag()
                )
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neville_is_exact_for_quadratics() {
        let f = |t: f64| 3.0 - 2.0 * t + 5.0 * t * t;
        let pts: Vec<(f64, f64)> = [0.25, 0.125, 0.0625].iter().map(|&t| (t, f(t))).collect();
        assert!((extrapolate_to_zero(&pts) - 3.0).abs() < 1e-13);
        assert!((extrapolate_to_zero(&pts[..2]) - 3.0).abs() < 0.2);
    }

    #[test]
    fn table_columns_and_csv() {
        let s = [0.75, 0.875, 0.9375];
        let v: Vec<f64> = s.iter().map(|s| 2.0 + (1.0 - s)).collect();
        let t = ConvergenceTable::extrapolated(&s, &v, &[2.0; 3], Extrapolation::OneMinusS);
        assert!(t.rows[0].extrapolated.is_none() && t.rows[1].extrapolated.is_none());
        assert!((t.rows[2].extrapolated.unwrap() - 2.0).abs() < 1e-13);
        assert!(t.rows[2].rel_error.unwrap() < 1e-13);
        let csv = t.to_csv();
        assert!(csv.starts_with("param,value,extrapolated,reference,rel_error\n0.75,2.25,,2,0.125\n"));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn distance_table_has_blank_columns() {
        let t = ConvergenceTable::distances(&[0.5, 0.75], &[0.1, 0.0]);
        assert_eq!(t.to_csv(), "param,value,extrapolated,reference,rel_error\n0.5,0.1,,0,\n0.75,0,,0,\n");
    }
}
