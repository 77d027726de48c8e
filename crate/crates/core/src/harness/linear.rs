//! Stepwise multiple linear regression baseline with p-value feature
//! selection.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::features::{Column, ColumnKind, FeatureMatrix};

/// Prepare a matrix for the linear model: every numeric column whose
/// observed values are all positive gains a natural-log companion,
/// categorical columns are one-hot expanded, and every missing cell
/// (including in the log columns) becomes 0.
pub fn augment_log_features(m: &FeatureMatrix) -> FeatureMatrix {
    let mut columns: Vec<Column> = Vec::new();
    for col in m.columns() {
        match col.kind {
            ColumnKind::Numeric => {
                let observed: Vec<f64> = col.values.iter().filter_map(|v| *v).collect();
                columns.push(Column {
                    name: col.name.clone(),
                    kind: ColumnKind::Numeric,
                    group: col.group,
                    values: col.values.iter().map(|v| Some(v.unwrap_or(0.0))).collect(),
                    dict: None,
                });
                let loggable = !observed.is_empty() && observed.iter().all(|&v| v > 0.0);
                if loggable {
                    columns.push(Column {
                        name: format!("log_{}", col.name),
                        kind: ColumnKind::Numeric,
                        group: col.group,
                        values: col
                            .values
                            .iter()
                            .map(|v| Some(v.map(f64::ln).unwrap_or(0.0)))
                            .collect(),
                        dict: None,
                    });
                }
            }
            ColumnKind::Categorical => {
                let dict = col.dict.as_ref().expect("categorical column has dict");
                for (i, cat) in dict.names().iter().enumerate() {
                    let id = (i + 1) as f64;
                    columns.push(Column {
                        name: format!("{}={cat}", col.name),
                        kind: ColumnKind::Numeric,
                        group: col.group,
                        values: col
                            .values
                            .iter()
                            .map(|v| Some(if *v == Some(id) { 1.0 } else { 0.0 }))
                            .collect(),
                        dict: None,
                    });
                }
            }
        }
    }
    FeatureMatrix::from_columns(columns, m.row_keys().to_vec())
        .expect("augmented columns are well-formed")
}

/// Fitted linear model: intercept plus coefficients over named columns.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub terms: Vec<(String, f64)>,
    /// Two-sided coefficient p-values of the final fit, aligned to terms.
    pub p_values: Vec<f64>,
}

impl LinearModel {
    pub fn predict(&self, m: &FeatureMatrix) -> Result<Vec<f64>> {
        let cols: Vec<usize> = self
            .terms
            .iter()
            .map(|(name, _)| {
                m.columns()
                    .iter()
                    .position(|c| &c.name == name)
                    .ok_or_else(|| Error::Contract(format!("matrix lacks model column {name:?}")))
            })
            .collect::<Result<_>>()?;
        Ok((0..m.n_rows())
            .map(|row| {
                self.intercept
                    + self
                        .terms
                        .iter()
                        .zip(&cols)
                        .map(|((_, coef), &c)| coef * m.value(row, c).unwrap_or(0.0))
                        .sum::<f64>()
            })
            .collect())
    }
}

struct OlsFit {
    intercept: f64,
    coefficients: Vec<f64>,
    /// Per-coefficient two-sided p-values (intercept excluded).
    p_values: Vec<f64>,
}

/// OLS through QR, p-values from t statistics on n - p - 1 degrees of
/// freedom. None when the design is singular or under-determined.
fn ols(m: &FeatureMatrix, features: &[usize], y: &[f64]) -> Option<OlsFit> {
    let n = y.len();
    let p = features.len();
    if n < p + 2 {
        return None;
    }
    let mut design = DMatrix::zeros(n, p + 1);
    for row in 0..n {
        design[(row, 0)] = 1.0;
        for (j, &c) in features.iter().enumerate() {
            design[(row, j + 1)] = m.value(row, c).unwrap_or(0.0);
        }
    }
    let y_vec = DVector::from_column_slice(y);

    let qr = design.clone().qr();
    let r = qr.r();
    // Near-zero diagonal of R flags linear dependence.
    let scale = r.diagonal().amax();
    if scale == 0.0 {
        return None;
    }
    for i in 0..p + 1 {
        if r[(i, i)].abs() < 1e-10 * scale {
            return None;
        }
    }
    let qty = qr.q().transpose() * &y_vec;
    let beta = r
        .view((0, 0), (p + 1, p + 1))
        .solve_upper_triangular(&qty.rows(0, p + 1))?;

    let residuals = &y_vec - &design * &beta;
    let rss: f64 = residuals.iter().map(|v| v * v).sum();
    let df = (n - p - 1) as f64;
    let sigma2 = rss / df;

    // (X'X)^-1 = R^-1 R^-T from the thin QR factor.
    let r_square = r.view((0, 0), (p + 1, p + 1)).into_owned();
    let identity = DMatrix::identity(p + 1, p + 1);
    let r_inv = r_square.solve_upper_triangular(&identity)?;
    let xtx_inv = &r_inv * r_inv.transpose();

    let t_dist = StudentsT::new(0.0, 1.0, df).ok()?;
    let p_values = (1..p + 1)
        .map(|i| {
            let se = (sigma2 * xtx_inv[(i, i)]).sqrt();
            if se == 0.0 {
                if beta[i] == 0.0 {
                    f64::NAN
                } else {
                    0.0
                }
            } else {
                let t = beta[i] / se;
                2.0 * (1.0 - t_dist.cdf(t.abs()))
            }
        })
        .collect();

    Some(OlsFit {
        intercept: beta[0],
        coefficients: beta.iter().skip(1).copied().collect(),
        p_values,
    })
}

/// Forward-backward stepwise OLS: add the excluded feature with the
/// smallest coefficient p-value while it is below `p_enter`, then drop
/// included features whose p-value exceeds `p_exit`, until neither step
/// applies. Features that make the design singular are skipped for that
/// step.
pub fn stepwise_linreg(
    m: &FeatureMatrix,
    y: &[f64],
    p_enter: f64,
    p_exit: f64,
) -> Result<LinearModel> {
    if y.len() != m.n_rows() {
        return Err(Error::Contract(format!(
            "{} targets for {} rows",
            y.len(),
            m.n_rows()
        )));
    }
    if y.is_empty() {
        return Err(Error::Contract("empty target vector".into()));
    }

    let n_cols = m.n_cols();
    let mut included: Vec<usize> = Vec::new();
    let max_steps = 2 * n_cols + 10;

    for _ in 0..max_steps {
        let mut changed = false;

        // Forward step.
        let mut best: Option<(usize, f64)> = None;
        for candidate in 0..n_cols {
            if included.contains(&candidate) {
                continue;
            }
            let mut with = included.clone();
            with.push(candidate);
            if let Some(fit) = ols(m, &with, y) {
                let p = *fit.p_values.last().expect("candidate p-value");
                if p.is_finite() && best.is_none_or(|(_, bp)| p < bp) {
                    best = Some((candidate, p));
                }
            }
        }
        if let Some((candidate, p)) = best {
            if p < p_enter {
                included.push(candidate);
                changed = true;
            }
        }

        // Backward steps.
        loop {
            if included.is_empty() {
                break;
            }
            let Some(fit) = ols(m, &included, y) else { break };
            let worst = fit
                .p_values
                .iter()
                .enumerate()
                .filter(|(_, p)| p.is_finite())
                .max_by(|a, b| a.1.total_cmp(b.1));
            match worst {
                Some((idx, &p)) if p > p_exit => {
                    included.remove(idx);
                    changed = true;
                }
                _ => break,
            }
        }

        if !changed {
            break;
        }
    }

    if included.is_empty() {
        let intercept = y.iter().sum::<f64>() / y.len() as f64;
        return Ok(LinearModel {
            intercept,
            terms: Vec::new(),
            p_values: Vec::new(),
        });
    }
    let fit = ols(m, &included, y)
        .ok_or_else(|| Error::Contract("final stepwise design became singular".into()))?;
    Ok(LinearModel {
        intercept: fit.intercept,
        terms: included
            .iter()
            .zip(&fit.coefficients)
            .map(|(&c, &coef)| (m.column(c).name.clone(), coef))
            .collect(),
        p_values: fit.p_values,
    })
}
