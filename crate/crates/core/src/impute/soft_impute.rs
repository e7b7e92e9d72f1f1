use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SVD};
use serde::{Deserialize, Serialize};

use super::{check_columns, FittedImputer, ImputeError};
use crate::matrix::FeatureMatrix;
use crate::numeric::MinMaxScaler;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SoftImputeConfig {
    /// Absolute shrinkage; overrides `lambda_fraction` when set.
    pub lambda: Option<f64>,
    /// Shrinkage as a fraction of the largest singular value of the
    /// mean-filled scaled matrix.
    pub lambda_fraction: f64,
    pub max_rank: Option<usize>,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for SoftImputeConfig {
    fn default() -> Self {
        Self {
            lambda: None,
            lambda_fraction: 0.02,
            max_rank: None,
            max_iters: 200,
            tol: 1e-5,
        }
    }
}

impl SoftImputeConfig {
    pub fn validate(&self) -> Result<(), ImputeError> {
        if let Some(l) = self.lambda {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(ImputeError::InvalidConfig("lambda must be finite and >= 0".into()));
            }
        }
        if !(self.lambda_fraction >= 0.0 && self.lambda_fraction.is_finite()) {
            return Err(ImputeError::InvalidConfig("lambda_fraction must be finite and >= 0".into()));
        }
        if self.max_iters == 0 {
            return Err(ImputeError::InvalidConfig("max_iters must be at least 1".into()));
        }
        if self.max_rank == Some(0) {
            return Err(ImputeError::InvalidConfig("max_rank must be at least 1".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(ImputeError::InvalidConfig("tol must be >= 0".into()));
        }
        Ok(())
    }
}

/// Fitted low-rank model in the min-max scaled domain of the active
/// (ever-observed) columns.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftImputeFit {
    n_cols: usize,
    active: Vec<usize>,
    scaler: MinMaxScaler,
    col_means: Vec<f64>,
    pub lambda: f64,
    /// Right singular vectors (active × rank) and their shrink ratios.
    v: DMatrix<f64>,
    ratios: Vec<f64>,
    max_iters: usize,
    tol: f64,
    fitted_input: FeatureMatrix,
    fitted_output: FeatureMatrix,
    /// ½‖P_Ω(X − Z)‖² + λ‖Z‖_* after each iteration.
    pub objective: Vec<f64>,
    pub iterations: usize,
}

struct Shrunk {
    z: DMatrix<f64>,
    v: DMatrix<f64>,
    ratios: Vec<f64>,
    nuclear: f64,
}

fn shrink(w: DMatrix<f64>, lambda: f64, max_rank: usize) -> Result<Shrunk, ImputeError> {
    let svd = SVD::try_new(w, true, true, f64::EPSILON, 10_000)
        .ok_or_else(|| ImputeError::SoftImputeFailed("SVD did not converge".into()))?;
    let (u, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));
    order.truncate(max_rank);
    let mut z = DMatrix::zeros(u.nrows(), vt.ncols());
    let mut v = DMatrix::zeros(vt.ncols(), order.len());
    let mut ratios = Vec::with_capacity(order.len());
    let mut nuclear = 0.0;
    for (j, &i) in order.iter().enumerate() {
        let s = svd.singular_values[i];
        let shrunk = (s - lambda).max(0.0);
        ratios.push(if s > 0.0 { shrunk / s } else { 0.0 });
        v.set_column(j, &vt.row(i).transpose());
        if shrunk > 0.0 {
            z += u.column(i) * vt.row(i) * shrunk;
            nuclear += shrunk;
        }
    }
    if z.iter().any(|x| !x.is_finite()) {
        return Err(ImputeError::SoftImputeFailed("non-finite reconstruction".into()));
    }
    Ok(Shrunk { z, v, ratios, nuclear })
}

/// Change of the filled entries relative to the norm of the whole working
/// matrix; filled entries near zero would otherwise never meet `tol`.
fn relative_change(old: &[f64], new: &[f64], scale_sq: f64) -> f64 {
    let diff: f64 = old.iter().zip(new).map(|(a, b)| (a - b) * (a - b)).sum();
    if scale_sq > 0.0 {
        libm::sqrt(diff / scale_sq)
    } else {
        libm::sqrt(diff)
    }
}

impl SoftImputeFit {
    pub fn fit(m: &FeatureMatrix, cfg: &SoftImputeConfig) -> Result<Self, ImputeError> {
        let active = m.active_columns();
        let (n, pa) = (m.n_rows(), active.len());
        let mut lo = Vec::with_capacity(pa);
        let mut hi = Vec::with_capacity(pa);
        for &c in &active {
            let obs = m.column_observed(c);
            lo.push(obs.iter().copied().fold(f64::INFINITY, f64::min));
            hi.push(obs.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        }
        let scaler = MinMaxScaler::new(lo, hi);
        let mut col_means = Vec::with_capacity(pa);
        for (j, &c) in active.iter().enumerate() {
            let obs = m.column_observed(c);
            col_means.push(obs.iter().map(|&v| scaler.scale(j, v)).sum::<f64>() / obs.len() as f64);
        }

        let mut fit = Self {
            n_cols: m.n_cols(),
            active: active.clone(),
            scaler,
            col_means,
            lambda: cfg.lambda.unwrap_or(0.0),
            v: DMatrix::zeros(pa, 0),
            ratios: Vec::new(),
            max_iters: cfg.max_iters,
            tol: cfg.tol,
            fitted_input: m.clone(),
            fitted_output: m.clone(),
            objective: Vec::new(),
            iterations: 0,
        };
        if n == 0 || pa == 0 {
            return Ok(fit);
        }

        let observed = |r: usize, j: usize| m.get(r, active[j]);
        let x = DMatrix::from_fn(n, pa, |r, j| observed(r, j).map_or(0.0, |v| fit.scaler.scale(j, v)));
        let missing: Vec<(usize, usize)> = (0..n)
            .flat_map(|r| (0..pa).map(move |j| (r, j)))
            .filter(|&(r, j)| observed(r, j).is_none())
            .collect();
        let mut z = DMatrix::from_fn(n, pa, |r, j| if observed(r, j).is_some() { x[(r, j)] } else { fit.col_means[j] });

        let max_rank = cfg.max_rank.unwrap_or(n.min(pa)).min(n.min(pa));
        if cfg.lambda.is_none() {
            let sv = SVD::try_new(z.clone(), false, false, f64::EPSILON, 10_000)
                .ok_or_else(|| ImputeError::SoftImputeFailed("SVD did not converge".into()))?;
            fit.lambda = cfg.lambda_fraction * sv.singular_values.max();
        }

        for it in 0..cfg.max_iters {
            let mut w = z.clone();
            for r in 0..n {
                for j in 0..pa {
                    if observed(r, j).is_some() {
                        w[(r, j)] = x[(r, j)];
                    }
                }
            }
            let s = shrink(w, fit.lambda, max_rank)?;
            let old: Vec<f64> = missing.iter().map(|&(r, j)| z[(r, j)]).collect();
            let new: Vec<f64> = missing.iter().map(|&(r, j)| s.z[(r, j)]).collect();
            let scale_sq = z.norm_squared();
            let mut resid = 0.0;
            for r in 0..n {
                for j in 0..pa {
                    if observed(r, j).is_some() {
                        let d = x[(r, j)] - s.z[(r, j)];
                        resid += d * d;
                    }
                }
            }
            fit.objective.push(0.5 * resid + fit.lambda * s.nuclear);
            z = s.z;
            fit.v = s.v;
            fit.ratios = s.ratios;
            fit.iterations = it + 1;
            if missing.is_empty() || relative_change(&old, &new, scale_sq) < cfg.tol {
                break;
            }
        }

        fit.fitted_output = m.filled_with(|r, c| {
            let j = active.iter().position(|&a| a == c)?;
            Some(fit.scaler.unscale(j, z[(r, j)].clamp(0.0, 1.0)))
        });
        Ok(fit)
    }

    /// Fold a row into the fitted subspace: alternate filling the missing
    /// entries and projecting through `V diag(ratios) Vᵀ`.
    fn complete_row(&self, row: &[Option<f64>]) -> Vec<Option<f64>> {
        let pa = self.active.len();
        let obs: Vec<Option<f64>> = self
            .active
            .iter()
            .enumerate()
            .map(|(j, &c)| row[c].map(|v| self.scaler.scale(j, v)))
            .collect();
        let mut z = DVector::from_fn(pa, |j, _| obs[j].unwrap_or(self.col_means[j]));
        let proj = &self.v * DMatrix::from_diagonal(&DVector::from_vec(self.ratios.clone())) * self.v.transpose();
        for _ in 0..self.max_iters {
            let w = DVector::from_fn(pa, |j, _| obs[j].unwrap_or(z[j]));
            let next = &proj * w;
            let old: Vec<f64> = (0..pa).filter(|&j| obs[j].is_none()).map(|j| z[j]).collect();
            let new: Vec<f64> = (0..pa).filter(|&j| obs[j].is_none()).map(|j| next[j]).collect();
            let scale_sq = z.norm_squared();
            z = next;
            if relative_change(&old, &new, scale_sq) < self.tol {
                break;
            }
        }
        let mut out = row.to_vec();
        for (j, &c) in self.active.iter().enumerate() {
            if out[c].is_none() {
                out[c] = Some(self.scaler.unscale(j, z[j].clamp(0.0, 1.0)));
            }
        }
        out
    }
}

impl FittedImputer for SoftImputeFit {
    fn transform(&self, m: &FeatureMatrix) -> Result<FeatureMatrix, ImputeError> {
        check_columns(m, self.n_cols)?;
        if *m == self.fitted_input {
            return Ok(self.fitted_output.clone());
        }
        let mut out = m.clone();
        for r in 0..m.n_rows() {
            if m.row(r).iter().all(Option::is_some) {
                continue;
            }
            for (c, v) in self.complete_row(m.row(r)).into_iter().enumerate() {
                out.set(r, c, v);
            }
        }
        Ok(out)
    }

    fn parameters(&self) -> Vec<f64> {
        let mut p = alloc::vec![self.lambda];
        p.extend_from_slice(&self.scaler.min);
        p.extend_from_slice(&self.scaler.max);
        p.extend_from_slice(&self.col_means);
        p.extend_from_slice(&self.ratios);
        p.extend(self.v.iter().copied());
        p
    }
}

pub fn impute_soft_impute(m: &FeatureMatrix, cfg: &SoftImputeConfig) -> Result<FeatureMatrix, ImputeError> {
    cfg.validate()?;
    SoftImputeFit::fit(m, cfg)?.transform(m)
}

#[cfg(test)]
mod tests {
    use super::super::testutil::{m, random_matrix};
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn full_shrinkage_gives_feature_minimum() {
        let input = m(&[&[Some(1.0), Some(5.0)], &[Some(3.0), None], &[None, Some(9.0)]]);
        let cfg = SoftImputeConfig {
            lambda: Some(1e6),
            ..SoftImputeConfig::default()
        };
        let out = impute_soft_impute(&input, &cfg).unwrap();
        assert_eq!(out.get(1, 1), Some(5.0));
        assert_eq!(out.get(2, 0), Some(1.0));
    }

    #[test]
    fn rank_one_completion() {
        // outer([1,2,3],[1,1,1]) with two interior entries removed. Scaling
        // maps each column to (0, 0.5, 1), still rank one; an entry outside
        // its column's observed range could not be reached through the clip.
        let input = m(&[
            &[Some(1.0), Some(1.0), Some(1.0)],
            &[Some(2.0), None, None],
            &[Some(3.0), Some(3.0), Some(3.0)],
        ]);
        let cfg = SoftImputeConfig {
            lambda: Some(1e-4),
            max_iters: 5000,
            tol: 1e-12,
            ..SoftImputeConfig::default()
        };
        let out = impute_soft_impute(&input, &cfg).unwrap();
        assert!((out.get(1, 1).unwrap() - 2.0).abs() < 1e-2, "{:?}", out.get(1, 1));
        assert!((out.get(1, 2).unwrap() - 2.0).abs() < 1e-2, "{:?}", out.get(1, 2));
    }

    #[test]
    fn complete_matrix_unchanged() {
        let input = m(&[&[Some(1.0), Some(2.0)], &[Some(4.0), Some(3.0)]]);
        assert_eq!(impute_soft_impute(&input, &SoftImputeConfig::default()).unwrap(), input);
    }

    #[test]
    fn unseen_rows_are_folded_in() {
        let train = random_matrix(3, 20, 4, 0.2);
        let fit = SoftImputeFit::fit(&train, &SoftImputeConfig::default()).unwrap();
        let test = m(&[&[Some(0.0), None, Some(2.0), None]]);
        let out = fit.transform(&test).unwrap();
        assert_eq!(out.get(0, 0), Some(0.0));
        assert!(out.get(0, 1).is_some() && out.get(0, 3).is_some());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn objective_is_non_increasing(seed in 0u64..10_000, rows in 2usize..20, cols in 2usize..6, frac in 0.0f64..0.5) {
            let input = random_matrix(seed, rows, cols, 0.3);
            let cfg = SoftImputeConfig { lambda_fraction: frac, ..SoftImputeConfig::default() };
            let fit = SoftImputeFit::fit(&input, &cfg).unwrap();
            for w in fit.objective.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-9) + 1e-12, "{:?}", fit.objective);
            }
        }
    }
}
