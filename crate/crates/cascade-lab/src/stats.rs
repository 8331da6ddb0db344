//! Statistical verification instruments: normal goodness of fit,
//! finite-dimensional covariance, regularity estimators, and the empirical
//! characteristic function.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::cascade::PathRealization;
use crate::error::{Error, Result};
use crate::moments::compensated_sum;

/// Asymptotic Kolmogorov-Smirnov acceptance threshold at alpha = 0.01.
pub fn ks_threshold(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

/// Standard normal CDF via the Zelen-Severo five-term rational
/// approximation (Abramowitz & Stegun 26.2.17), |error| < 7.5e-8.
pub fn normal_cdf(x: f64) -> f64 {
    const P: f64 = 0.2316419;
    const B1: f64 = 0.319381530;
    const B2: f64 = -0.356563782;
    const B3: f64 = 1.781477937;
    const B4: f64 = -1.821255978;
    const B5: f64 = 1.330274429;
    let z = x.abs();
    let t = 1.0 / (1.0 + P * z);
    let poly = t * (B1 + t * (B2 + t * (B3 + t * (B4 + t * B5))));
    let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let upper = pdf * poly;
    if x >= 0.0 {
        1.0 - upper
    } else {
        upper
    }
}

/// Sup distance between the empirical CDF of `sample` and the standard
/// normal CDF. Needs at least 10 points.
pub fn ks_statistic(sample: &[f64]) -> Result<f64> {
    if sample.len() < 10 {
        return Err(Error::UndersizedSample {
            len: sample.len(),
            min: 10,
        });
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("samples must not contain NaN"));
    let n = sorted.len() as f64;
    let mut sup = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = normal_cdf(x);
        sup = sup.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(sup)
}

/// Centered sample covariance of per-trial rows (population divisor).
/// Row k holds the normalized path values of trial k at the gridpoints.
pub fn fdd_covariance(rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if rows.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let dims = rows[0].len();
    let n = rows.len() as f64;
    let means: Vec<f64> = (0..dims)
        .map(|j| compensated_sum(rows.iter().map(|r| r[j])) / n)
        .collect();
    let mut cov = vec![vec![0.0; dims]; dims];
    for i in 0..dims {
        for j in i..dims {
            let c =
                compensated_sum(rows.iter().map(|r| (r[i] - means[i]) * (r[j] - means[j]))) / n;
            cov[i][j] = c;
            cov[j][i] = c;
        }
    }
    Ok(cov)
}

/// Least-squares slope with its standard error.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub stderr: f64,
}

fn fit_line(xs: &[f64], ys: &[f64]) -> SlopeFit {
    let m = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / m;
    let ym = ys.iter().sum::<f64>() / m;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - xm) * (x - xm);
        sxy += (x - xm) * (y - ym);
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let mut rss = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let r = y - (intercept + slope * x);
        rss += r * r;
    }
    let stderr = if xs.len() > 2 {
        (rss / ((m - 2.0) * sxx)).sqrt()
    } else {
        0.0
    };
    SlopeFit { slope, stderr }
}

fn log_base(x: f64, b: u32) -> f64 {
    x.ln() / (b as f64).ln()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).expect("oscillations are finite"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn check_window(path: &PathRealization, jmin: u32, jmax: u32) -> Result<()> {
    if jmin < 1 || jmax <= jmin || jmax + 2 > path.level {
        return Err(Error::DegenerateWindow {
            jmin,
            jmax,
            level: path.level,
        });
    }
    Ok(())
}

/// Max-minus-min of the path over each generation-j cell.
fn cell_oscillations(path: &PathRealization, j: u32) -> Vec<f64> {
    let b = path.b as usize;
    let cells = b.pow(j);
    let width = path.cells() / cells;
    let mut out = Vec::with_capacity(cells);
    for k in 0..cells {
        let seg = &path.values[k * width..=(k + 1) * width];
        let mut lo = seg[0];
        let mut hi = seg[0];
        for &v in &seg[1..] {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        out.push(hi - lo);
    }
    out
}

/// Global Hoelder exponent estimate: slope of log_b(median cell
/// oscillation at generation j) against -j over j = jmin..=jmax. The median
/// tames heavy-tailed leaf effects.
pub fn oscillation_exponent(path: &PathRealization, jmin: u32, jmax: u32) -> Result<SlopeFit> {
    check_window(path, jmin, jmax)?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for j in jmin..=jmax {
        let med = median(cell_oscillations(path, j));
        xs.push(-(j as f64));
        ys.push(log_base(med, path.b));
    }
    Ok(fit_line(&xs, &ys))
}

/// Graph box-counting dimension estimate: slope of log_b N_j against j,
/// with N_j counted column-wise as 1 + ceil(oscillation / b^-j) boxes of
/// side b^-j per generation-j cell.
pub fn box_dimension(path: &PathRealization, jmin: u32, jmax: u32) -> Result<SlopeFit> {
    check_window(path, jmin, jmax)?;
    let bf = path.b as f64;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for j in jmin..=jmax {
        let eps = bf.powi(-(j as i32));
        let mut boxes = 0u64;
        for osc in cell_oscillations(path, j) {
            boxes += 1 + (osc / eps).ceil() as u64;
        }
        xs.push(j as f64);
        ys.push(log_base(boxes as f64, path.b));
    }
    Ok(fit_line(&xs, &ys))
}

/// Modulus of the empirical characteristic function at each t.
pub fn ecf(sample: &[f64], ts: &[f64]) -> Vec<f64> {
    let n = sample.len() as f64;
    ts.iter()
        .map(|&t| {
            let re = compensated_sum(sample.iter().map(|&x| (t * x).cos()));
            let im = compensated_sum(sample.iter().map(|&x| (t * x).sin()));
            (re / n).hypot(im / n)
        })
        .collect()
}

/// Raw sample moments of orders 1..=qmax (qmax <= 8).
pub fn empirical_moments(sample: &[f64], qmax: u32) -> Result<Vec<f64>> {
    if qmax > 8 {
        return Err(Error::MomentOrder { q: qmax, cap: 8 });
    }
    if sample.is_empty() {
        return Err(Error::UndersizedSample { len: 0, min: 1 });
    }
    let n = sample.len() as f64;
    Ok((1..=qmax)
        .map(|q| compensated_sum(sample.iter().map(|&x| x.powi(q as i32))) / n)
        .collect())
}

/// Run parameters echoed into every report.
#[derive(Clone, Debug, Serialize)]
pub struct ReportParams {
    pub b: u32,
    pub h: f64,
    pub n: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
    pub trials: usize,
    pub master_seed: u64,
}

/// Monte Carlo summary of one ensemble experiment.
///
/// The JSON form carries params, ks, moments, covariance (row-major with its
/// gridpoints), slopes and the proxy deficit; the raw endpoint samples stay
/// in memory only.
#[derive(Clone, Debug, Serialize)]
pub struct EnsembleReport {
    pub params: ReportParams,
    pub ks: f64,
    pub moments: Vec<f64>,
    pub covariance: CovarianceBlock,
    pub slopes: BTreeMap<String, SlopeFit>,
    pub deficit: Option<f64>,
    #[serde(skip)]
    pub endpoint_samples: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CovarianceBlock {
    pub gridpoints: Vec<f64>,
    /// Row-major entries, dims = gridpoints.len().
    pub values: Vec<f64>,
}

impl EnsembleReport {
    pub fn new(
        params: ReportParams,
        endpoint_samples: Vec<f64>,
        gridpoints: Vec<f64>,
        grid_rows: &[Vec<f64>],
        qmax: u32,
        deficit: Option<f64>,
    ) -> Result<Self> {
        let ks = ks_statistic(&endpoint_samples)?;
        let moments = empirical_moments(&endpoint_samples, qmax)?;
        let cov = fdd_covariance(grid_rows)?;
        let values = cov.into_iter().flatten().collect();
        Ok(Self {
            params,
            ks,
            moments,
            covariance: CovarianceBlock { gridpoints, values },
            slopes: BTreeMap::new(),
            deficit,
            endpoint_samples,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::{simulate_path, CascadeParams};
    use crate::rng::SeedSpec;

    // Reference values of the standard normal CDF (20 points).
    const PHI_TABLE: [(f64, f64); 20] = [
        (-6.0, 9.8658764503769809e-10),
        (-5.0, 2.8665157187919391e-07),
        (-4.0, 3.1671241833119924e-05),
        (-3.0, 1.3498980316300946e-03),
        (-2.5, 6.2096653257761349e-03),
        (-2.0, 2.2750131948179209e-02),
        (-1.5, 6.6807201268858071e-02),
        (-1.0, 1.5865525393145705e-01),
        (-0.5, 3.0853753872598688e-01),
        (-0.1, 4.6017216272297101e-01),
        (0.0, 5.0000000000000000e-01),
        (0.1, 5.3982783727702899e-01),
        (0.5, 6.9146246127401312e-01),
        (1.0, 8.4134474606854293e-01),
        (1.5, 9.3319279873114191e-01),
        (2.0, 9.7724986805182079e-01),
        (2.5, 9.9379033467422384e-01),
        (3.0, 9.9865010196836990e-01),
        (4.0, 9.9996832875816688e-01),
        (6.0, 9.9999999901341230e-01),
    ];

    #[test]
    fn normal_cdf_against_table() {
        for (x, phi) in PHI_TABLE {
            let err = (normal_cdf(x) - phi).abs();
            assert!(err <= 1e-7, "Phi({x}) error {err}");
        }
    }

    #[test]
    fn ks_quantile_construction() {
        // Exact normal quantiles at (k - 1/2)/N give statistic ~ 1/(2N).
        let n = 1000;
        let sample: Vec<f64> = (1..=n)
            .map(|k| inverse_phi((k as f64 - 0.5) / n as f64))
            .collect();
        let d = ks_statistic(&sample).unwrap();
        assert!(d <= 0.002, "quantile-sample KS {d}");
    }

    // Bisection inverse of the approximated CDF, good to ~1e-10.
    fn inverse_phi(p: f64) -> f64 {
        let (mut lo, mut hi) = (-8.0f64, 8.0f64);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if normal_cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn ks_point_mass_is_half() {
        let sample = vec![0.0; 100];
        assert!((ks_statistic(&sample).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ks_undersized() {
        assert!(matches!(
            ks_statistic(&[0.0; 5]),
            Err(Error::UndersizedSample { .. })
        ));
    }

    #[test]
    fn ks_permutation_invariant_and_shift_sensitive() {
        let n = 200;
        let sample: Vec<f64> = (1..=n)
            .map(|k| inverse_phi((k as f64 - 0.5) / n as f64))
            .collect();
        let mut shuffled = sample.clone();
        shuffled.reverse();
        shuffled.swap(3, 77);
        assert_eq!(
            ks_statistic(&sample).unwrap(),
            ks_statistic(&shuffled).unwrap()
        );
        let shifted: Vec<f64> = sample.iter().map(|x| x + 2.0).collect();
        assert!(ks_statistic(&shifted).unwrap() > ks_statistic(&sample).unwrap());
    }

    #[test]
    fn covariance_zero_for_deterministic_ensemble() {
        let rows: Vec<Vec<f64>> = (0..50).map(|_| vec![0.25, 0.5, 1.0]).collect();
        let cov = fdd_covariance(&rows).unwrap();
        for row in &cov {
            for &c in row {
                assert_eq!(c, 0.0);
            }
        }
    }

    #[test]
    fn covariance_symmetric_nonneg_diag() {
        let rows: Vec<Vec<f64>> = (0..500)
            .map(|k| {
                let x = ((k * 37 + 11) % 101) as f64 / 101.0 - 0.5;
                vec![x, x * x, -x + 0.1]
            })
            .collect();
        let cov = fdd_covariance(&rows).unwrap();
        for i in 0..3 {
            assert!(cov[i][i] >= 0.0);
            for j in 0..3 {
                assert_eq!(cov[i][j], cov[j][i]);
            }
        }
    }

    #[test]
    fn slopes_exact_for_identity_path() {
        let params = CascadeParams::new(2, 1.0).unwrap();
        let path = simulate_path(&params, 12, &SeedSpec::new(0)).unwrap();
        let osc = oscillation_exponent(&path, 2, 8).unwrap();
        assert!((osc.slope - 1.0).abs() <= 1e-12, "osc slope {}", osc.slope);
        let boxd = box_dimension(&path, 2, 8).unwrap();
        assert!((boxd.slope - 1.0).abs() <= 1e-12, "box slope {}", boxd.slope);
    }

    #[test]
    fn slopes_invariant_under_shift_and_scale_on_identity_path() {
        let params = CascadeParams::new(2, 1.0).unwrap();
        let base = simulate_path(&params, 12, &SeedSpec::new(0)).unwrap();
        let mut shifted = base.clone();
        for v in &mut shifted.values {
            *v += 5.0;
        }
        let mut scaled = base.clone();
        for v in &mut scaled.values {
            *v *= 4.0;
        }
        let s0 = oscillation_exponent(&base, 2, 8).unwrap().slope;
        let s1 = oscillation_exponent(&shifted, 2, 8).unwrap().slope;
        assert!((s0 - s1).abs() <= 1e-12);
        let b0 = box_dimension(&base, 2, 8).unwrap();
        let b1 = box_dimension(&shifted, 2, 8).unwrap();
        assert!((b0.slope - b1.slope).abs() <= 1e-12);
        // Scaling by b^2 changes counts but not the fitted slope beyond
        // its standard error.
        let b2 = box_dimension(&scaled, 2, 8).unwrap();
        assert!(
            (b2.slope - b0.slope).abs() <= b2.stderr.max(1e-12),
            "scaled slope {} vs {} (stderr {})",
            b2.slope,
            b0.slope,
            b2.stderr
        );
    }

    #[test]
    fn window_validation() {
        let params = CascadeParams::new(2, 0.7).unwrap();
        let path = simulate_path(&params, 8, &SeedSpec::new(1)).unwrap();
        assert!(oscillation_exponent(&path, 4, 4).is_err());
        assert!(oscillation_exponent(&path, 2, 7).is_err());
        assert!(box_dimension(&path, 0, 3).is_err());
        assert!(oscillation_exponent(&path, 2, 6).is_ok());
    }

    #[test]
    fn ecf_degenerate_cases() {
        let zeros = vec![0.0; 64];
        for m in ecf(&zeros, &[0.5, 1.0, 10.0]) {
            assert!((m - 1.0).abs() < 1e-12);
        }
        let any = vec![0.3, -1.2, 0.8];
        assert!((ecf(&any, &[0.0])[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empirical_moment_edge_cases() {
        let ones = vec![1.0; 32];
        assert_eq!(empirical_moments(&ones, 4).unwrap(), vec![1.0; 4]);
        let pm: Vec<f64> = (0..64).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let m = empirical_moments(&pm, 4).unwrap();
        assert_eq!(m[0], 0.0);
        assert_eq!(m[1], 1.0);
        assert_eq!(m[2], 0.0);
        assert_eq!(m[3], 1.0);
        assert!(empirical_moments(&ones, 9).is_err());
    }

    #[test]
    fn report_serializes_expected_fields() {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|k| vec![k as f64 / 40.0 - 0.5, k as f64 / 20.0 - 1.0])
            .collect();
        let samples: Vec<f64> = (0..40).map(|k| k as f64 / 10.0 - 2.0).collect();
        let report = EnsembleReport::new(
            ReportParams {
                b: 2,
                h: 0.25,
                n: 8,
                m: None,
                trials: 40,
                master_seed: 7,
            },
            samples,
            vec![0.5, 1.0],
            &rows,
            4,
            None,
        )
        .unwrap();
        let json = report.to_json();
        for field in ["params", "ks", "moments", "covariance", "slopes", "deficit"] {
            assert!(json.contains(field), "missing {field} in {json}");
        }
        assert!(!json.contains("endpoint_samples"));
    }
}
