use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::chi2::chi_square_sf;
use crate::matrix::FeatureMatrix;

const EM_MAX_ITERS: usize = 100;
const EM_REL_TOL: f64 = 1e-6;
const RIDGE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct McarTestResult {
    pub participant_id: String,
    pub d2: f64,
    pub df: i64,
    /// `None` when skipped.
    pub p_value: Option<f64>,
    pub n_patterns: usize,
    pub skipped: bool,
    pub reason: Option<String>,
    /// Observed-data log-likelihood at each EM iterate.
    pub em_loglik: Vec<f64>,
}

impl McarTestResult {
    fn skip(pid: &str, d2: f64, df: i64, n_patterns: usize, reason: &str, em_loglik: Vec<f64>) -> Self {
        Self {
            participant_id: pid.into(),
            d2,
            df,
            p_value: None,
            n_patterns,
            skipped: true,
            reason: Some(reason.into()),
            em_loglik,
        }
    }
}

struct Pattern {
    observed: Vec<usize>,
    rows: Vec<usize>,
}

fn sub_matrix(s: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| s[(rows[i], cols[j])])
}

fn sub_vector(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_fn(idx.len(), |i, _| v[idx[i]])
}

/// Cholesky of a symmetric block, retrying once with a ridge scaled to its
/// trace.
fn factor(s: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let n = s.nrows();
    if let Some(c) = s.clone().cholesky() {
        return Some(c);
    }
    let ridge = RIDGE * s.trace() / n as f64;
    if !(ridge > 0.0) {
        return None;
    }
    (s + DMatrix::identity(n, n) * ridge).cholesky()
}

struct Em {
    mu: DVector<f64>,
    sigma: DMatrix<f64>,
    loglik: Vec<f64>,
}

/// Expectation–maximisation for a multivariate normal with missing values.
/// `x` holds zeros at missing cells; returns `None` when a covariance block
/// cannot be factored.
fn em(x: &DMatrix<f64>, patterns: &[Pattern]) -> Option<Em> {
    let (n, p) = x.shape();
    let mut mu = DVector::zeros(p);
    let mut var = DVector::zeros(p);
    for c in 0..p {
        let vals: Vec<f64> = patterns
            .iter()
            .filter(|pt| pt.observed.contains(&c))
            .flat_map(|pt| pt.rows.iter().map(move |&r| x[(r, c)]))
            .collect();
        let m = vals.iter().sum::<f64>() / vals.len() as f64;
        mu[c] = m;
        var[c] = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / vals.len() as f64;
    }
    let mut sigma = DMatrix::from_diagonal(&var);
    let mut loglik = Vec::new();
    let ln_2pi = libm::log(2.0 * core::f64::consts::PI);

    for _ in 0..EM_MAX_ITERS {
        let mut t1 = DVector::zeros(p);
        let mut t2 = DMatrix::zeros(p, p);
        let mut ll = 0.0;
        for pt in patterns {
            let o = &pt.observed;
            let m: Vec<usize> = (0..p).filter(|c| !o.contains(c)).collect();
            let chol = factor(sub_matrix(&sigma, o, o))?;
            let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|d| libm::log(*d)).sum::<f64>();
            let s_mo = sub_matrix(&sigma, &m, o);
            // Regression of missing on observed coordinates.
            let beta = chol.solve(&s_mo.transpose()).transpose();
            let cond = sub_matrix(&sigma, &m, &m) - &beta * s_mo.transpose();
            let mu_o = sub_vector(&mu, o);
            let mu_m = sub_vector(&mu, &m);
            for &r in &pt.rows {
                let xo = DVector::from_fn(o.len(), |i, _| x[(r, o[i])]);
                let resid = &xo - &mu_o;
                ll -= 0.5 * (o.len() as f64 * ln_2pi + log_det + resid.dot(&chol.solve(&resid)));
                let xm = &mu_m + &beta * &resid;
                let mut full = DVector::zeros(p);
                for (i, &c) in o.iter().enumerate() {
                    full[c] = xo[i];
                }
                for (i, &c) in m.iter().enumerate() {
                    full[c] = xm[i];
                }
                t1 += &full;
                t2 += &full * full.transpose();
                for (i, &ci) in m.iter().enumerate() {
                    for (j, &cj) in m.iter().enumerate() {
                        t2[(ci, cj)] += cond[(i, j)];
                    }
                }
            }
        }
        let prev = loglik.last().copied();
        loglik.push(ll);
        if let Some(prev) = prev {
            if ((ll - prev) / prev).abs() < EM_REL_TOL {
                break;
            }
        }
        let nf = n as f64;
        mu = t1 / nf;
        sigma = t2 / nf - &mu * mu.transpose();
        sigma = (&sigma + sigma.transpose()) * 0.5;
        if !(mu.iter().chain(sigma.iter()).all(|v| v.is_finite())) {
            return None;
        }
    }
    Some(Em { mu, sigma, loglik })
}

/// Little's chi-square test of MCAR on one participant's matrix.
/// Features with no observation and rows with no observation are ignored.
pub fn little_mcar_test(participant_id: &str, m: &FeatureMatrix) -> McarTestResult {
    let cols = m.active_columns();
    let p = cols.len();
    let mut groups: BTreeMap<Vec<bool>, Vec<usize>> = BTreeMap::new();
    for r in 0..m.n_rows() {
        let mask: Vec<bool> = cols.iter().map(|&c| m.is_observed(r, c)).collect();
        if mask.iter().any(|&b| b) {
            groups.entry(mask).or_default().push(r);
        }
    }
    let rows: Vec<usize> = groups.values().flatten().copied().collect();
    let n = rows.len();
    let mut sorted_rows = rows.clone();
    sorted_rows.sort_unstable();
    // d² is affine invariant; standardising first makes the EM stopping rule
    // see the same problem under any per-feature rescaling.
    let centre: Vec<(f64, f64)> = cols
        .iter()
        .map(|&c| {
            let obs = m.column_observed(c);
            let mean = crate::numeric::mean(&obs).unwrap_or(0.0);
            let sd = crate::numeric::std_dev(&obs).unwrap_or(0.0);
            (mean, if sd > 0.0 { sd } else { 1.0 })
        })
        .collect();
    let x = DMatrix::from_fn(n, p, |i, j| {
        m.get(sorted_rows[i], cols[j]).map_or(0.0, |v| (v - centre[j].0) / centre[j].1)
    });
    let patterns: Vec<Pattern> = groups
        .iter()
        .map(|(mask, rs)| Pattern {
            observed: (0..p).filter(|&j| mask[j]).collect(),
            rows: rs.iter().map(|r| sorted_rows.binary_search(r).expect("present")).collect(),
        })
        .collect();
    let n_patterns = patterns.len();
    let df = patterns.iter().map(|pt| pt.observed.len() as i64).sum::<i64>() - p as i64;

    if df <= 0 {
        return McarTestResult::skip(participant_id, 0.0, df.max(0), n_patterns, "df <= 0", Vec::new());
    }
    if n < p + 2 {
        return McarTestResult::skip(participant_id, 0.0, df, n_patterns, "fewer than p + 2 rows", Vec::new());
    }
    let Some(fit) = em(&x, &patterns) else {
        return McarTestResult::skip(participant_id, 0.0, df, n_patterns, "covariance is singular", Vec::new());
    };
    let ridge = RIDGE * fit.sigma.trace() / p as f64;
    let sigma = &fit.sigma + DMatrix::identity(p, p) * ridge;

    let mut d2 = 0.0;
    for pt in &patterns {
        let o = &pt.observed;
        let Some(chol) = sub_matrix(&sigma, o, o).cholesky() else {
            return McarTestResult::skip(participant_id, 0.0, df, n_patterns, "covariance is singular", fit.loglik);
        };
        let mut mean = DVector::zeros(o.len());
        for &r in &pt.rows {
            for (i, &c) in o.iter().enumerate() {
                mean[i] += x[(r, c)];
            }
        }
        mean /= pt.rows.len() as f64;
        let diff = mean - sub_vector(&fit.mu, o);
        d2 += pt.rows.len() as f64 * diff.dot(&chol.solve(&diff));
    }
    let d2 = d2.max(0.0);
    McarTestResult {
        participant_id: participant_id.into(),
        d2,
        df,
        p_value: chi_square_sf(d2, df).ok(),
        n_patterns,
        skipped: false,
        reason: None,
        em_loglik: fit.loglik,
    }
}
