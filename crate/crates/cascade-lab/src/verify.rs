//! Named verification checks grouped into the `exact`, `clt` and `holder`
//! suites. Each check compares one observed number against a target within
//! a tolerance pinned at compile time; reports serialize deterministically
//! (no timing, no thread counts) so repeated runs are byte-identical.

use serde::Serialize;

use crate::cascade::{simulate_path, CascadeParams};
use crate::ensemble::{remainder_grid_samples, walk_centered_endpoints, walk_grid_samples};
use crate::error::Result;
use crate::fclt::{clt_step, clt_walk, remainder_path, tilde_walk, variance_deficit, xi_sequence};
use crate::moments::{brute_force_moment, exact_moment, limit_even_moment, second_moment};
use crate::normalization::{a_n, sigma};
use crate::rng::SeedSpec;
use crate::stats::{
    box_dimension, empirical_moments, fdd_covariance, ks_statistic, ks_threshold,
    oscillation_exponent,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Exact,
    Clt,
    Holder,
    All,
}

impl Suite {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "exact" => Some(Self::Exact),
            "clt" => Some(Self::Clt),
            "holder" => Some(Self::Holder),
            "all" => Some(Self::All),
            _ => None,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Self::Exact => "exact",
            Self::Clt => "clt",
            Self::Holder => "holder",
            Self::All => "all",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub observed: f64,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: impl Into<String>, observed: f64, target: f64, tolerance: f64) -> Self {
        let pass = (observed - target).abs() <= tolerance && observed.is_finite();
        Self {
            name: name.into(),
            observed,
            target,
            tolerance,
            pass,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct VerifyConfig {
    pub trials: usize,
    pub master_seed: u64,
    pub jmin: u32,
    pub jmax: u32,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            trials: 10_000,
            master_seed: 1,
            jmin: 4,
            jmax: 12,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub suite: String,
    pub trials: usize,
    pub master_seed: u64,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl VerifyReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

/// Runs one suite and assembles its report.
pub fn run_suite(suite: Suite, cfg: &VerifyConfig) -> Result<VerifyReport> {
    let checks = match suite {
        Suite::Exact => exact_suite()?,
        Suite::Clt => clt_suite(cfg)?,
        Suite::Holder => holder_suite(cfg)?,
        Suite::All => {
            let mut all = exact_suite()?;
            all.extend(clt_suite(cfg)?);
            all.extend(holder_suite(cfg)?);
            all
        }
    };
    let passed = checks.iter().all(|c| c.pass);
    Ok(VerifyReport {
        suite: suite.label().to_string(),
        trials: cfg.trials,
        master_seed: cfg.master_seed,
        checks,
        passed,
    })
}

fn rel_dev(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Moment-oracle equivalence: the generation recursion against full-tree
/// enumeration at every admissible small configuration.
pub fn oracle_equivalence_check() -> Result<Check> {
    let mut worst = 0.0f64;
    for h in [-1.0, 0.0, 0.25, 0.5, 0.7, 1.0] {
        for n in 0..=3u32 {
            for q in 1..=6u32 {
                let e = exact_moment(2, h, q, n)?;
                let o = brute_force_moment(2, h, q, n)?;
                worst = worst.max(rel_dev(e, o));
            }
        }
    }
    Ok(Check::new("moment-oracle-equivalence", worst, 0.0, 1e-10))
}

/// Closed-form identity checks between a_n, sigma_H and the second moment.
pub fn closed_form_checks() -> Result<Vec<Check>> {
    let hs_anti = [-2.0, -1.0, -0.5, 0.0, 0.25, 0.4];
    let mut geo = 0.0f64;
    let mut crit = 0.0f64;
    let mut m2 = 0.0f64;
    for b in [2u32, 3, 4] {
        let bf = b as f64;
        for &h in &hs_anti {
            let s2 = sigma(b, h)?.powi(2);
            let c = bf.powf(1.0 - 2.0 * h);
            for n in 1..=40u32 {
                let a2 = a_n(b, h, n)?.powi(2);
                let rhs = s2 * (c.powf(n as f64) - 1.0);
                geo = geo.max((a2 - rhs).abs() / rhs.abs());
                let sm = second_moment(b, h, n)?;
                m2 = m2.max((sm - (a2 + 1.0)).abs() / sm.abs());
            }
        }
        let s = sigma(b, 0.5)?;
        for n in 1..=40u32 {
            let lhs = a_n(b, 0.5, n)?;
            let rhs = s * (n as f64).sqrt();
            crit = crit.max((lhs - rhs).abs() / rhs.abs());
            let sm = second_moment(b, 0.5, n)?;
            m2 = m2.max((sm - (lhs * lhs + 1.0)).abs() / sm.abs());
        }
    }
    Ok(vec![
        Check::new("a-n-squared-geometric-identity", geo, 0.0, 1e-12),
        Check::new("a-n-critical-sqrt-identity", crit, 0.0, 1e-12),
        Check::new("second-moment-identity", m2, 0.0, 1e-12),
    ])
}

/// Limit even moments against the Gaussian moments (2p-1)!!.
pub fn gaussian_limit_check() -> Result<Check> {
    let gauss = [1.0, 3.0, 15.0, 105.0, 945.0];
    let mut worst = 0.0f64;
    for b in [2u32, 3, 4] {
        for p in 1..=5u32 {
            let m = limit_even_moment(b, 2 * p)?;
            worst = worst.max((m - gauss[p as usize - 1]).abs() / gauss[p as usize - 1]);
        }
    }
    Ok(Check::new("gaussian-limit-moments", worst, 0.0, 1e-10))
}

/// Cross-module identities tying the walks to the cascade paths.
pub fn cross_module_checks() -> Result<Vec<Check>> {
    // Walk values against the rescaled cascade path at every gridpoint.
    let mut walk_dev = 0.0f64;
    for (h, n) in [(0.25f64, 12u32), (0.4, 12), (0.5, 12)] {
        let params = CascadeParams::new(2, h)?;
        for seed in [1u64, 2] {
            let s = SeedSpec::new(seed);
            let walk = clt_walk(&params, n, &s)?;
            let path = simulate_path(&params, n, &s)?;
            let factor = if h == 0.5 {
                1.0 / (sigma(2, h)? * (n as f64).sqrt())
            } else {
                2.0f64.powf(n as f64 * (h - 0.5)) / sigma(2, h)?
            };
            for (w, v) in walk.path.iter().zip(path.values.iter()) {
                let scaled = v * factor;
                walk_dev = walk_dev.max((w - scaled).abs() / scaled.abs().max(1.0));
            }
        }
    }
    // Remainder and tilde processes agree at t = 1 on shared randomness.
    let mut rem_dev = 0.0f64;
    let params = CascadeParams::new(2, 0.7)?;
    for seed in [1u64, 2, 3] {
        let s = SeedSpec::new(seed);
        let r = *remainder_path(&params, 6, 10, &s)?.path.last().unwrap();
        let t = *tilde_walk(&params, 6, 10, &s)?.path.last().unwrap();
        rem_dev = rem_dev.max((r - t).abs() / r.abs().max(1.0));
    }
    // The path is the running sum of xi_k * b^(-nH), bit for bit.
    let mut cum_dev = 0.0f64;
    for (b, h, n) in [(2u32, 0.7f64, 10u32), (3, 0.3, 6)] {
        let params = CascadeParams::new(b, h)?;
        let s = SeedSpec::new(4);
        let xi = xi_sequence(&params, n, &s)?;
        let path = simulate_path(&params, n, &s)?;
        let unit = params.leaf_unit(n);
        let mut acc = 0.0;
        for (k, &x) in xi.iter().enumerate() {
            acc += x as f64 * unit;
            if acc != path.values[k + 1] {
                cum_dev = cum_dev.max((acc - path.values[k + 1]).abs());
            }
        }
    }
    Ok(vec![
        Check::new("walk-equals-scaled-path", walk_dev, 0.0, 1e-12),
        Check::new("remainder-equals-tilde-at-one", rem_dev, 0.0, 1e-12),
        Check::new("xi-cumsum-equals-path", cum_dev, 0.0, 0.0),
    ])
}

pub fn exact_suite() -> Result<Vec<Check>> {
    let mut checks = vec![oracle_equivalence_check()?];
    checks.extend(closed_form_checks()?);
    checks.push(gaussian_limit_check()?);
    checks.extend(cross_module_checks()?);
    Ok(checks)
}

const WIENER_GRID: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

fn covariance_check(name: &str, rows: &[Vec<f64>], tol: f64) -> Result<Check> {
    let cov = fdd_covariance(rows)?;
    let mut worst = 0.0f64;
    for (i, &s) in WIENER_GRID.iter().enumerate() {
        for (j, &t) in WIENER_GRID.iter().enumerate() {
            worst = worst.max((cov[i][j] - s.min(t)).abs());
        }
    }
    Ok(Check::new(name, worst, 0.0, tol))
}

fn endpoint_law_checks(prefix: &str, samples: &[f64], trials: usize) -> Result<Vec<Check>> {
    let ks = ks_statistic(samples)?;
    let m = empirical_moments(samples, 4)?;
    Ok(vec![
        Check::new(format!("{prefix}-ks"), ks, 0.0, ks_threshold(trials)),
        Check::new(format!("{prefix}-variance"), m[1], 1.0, 0.05),
        Check::new(format!("{prefix}-third-moment"), m[2], 0.0, 0.15),
        Check::new(format!("{prefix}-fourth-moment"), m[3], 3.0, 0.4),
    ])
}

/// The desk-scale weak-convergence suite: endpoint laws in the
/// antipersistent and critical regimes, Wiener finite-dimensional
/// covariance for three processes, and the remainder law under the proxy
/// deficit.
pub fn clt_suite(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let trials = cfg.trials;
    let master = cfg.master_seed;
    let fdd_tol = 4.0 / (trials as f64).sqrt();
    let mut checks = Vec::new();

    // Antipersistent walk at (b=2, H=0.25, n=14): one ensemble feeds both
    // the endpoint law and the covariance grid.
    let params = CascadeParams::new(2, 0.25)?;
    let n = 14;
    let rows = walk_grid_samples(&params, n, trials, master, &WIENER_GRID)?;
    let shift = (2.0f64).powf(n as f64 * 0.25) * clt_step(&params, n)?;
    let centered: Vec<f64> = rows.iter().map(|r| r[3] - shift).collect();
    checks.extend(endpoint_law_checks("theorem1", &centered, trials)?);
    checks.push(covariance_check(
        "wiener-fdd-antipersistent",
        &rows,
        fdd_tol,
    )?);

    // Critical regime at (b=2, H=0.5, n=16): endpoint law only.
    let params = CascadeParams::new(2, 0.5)?;
    let centered = walk_centered_endpoints(&params, 16, trials, master)?;
    checks.extend(endpoint_law_checks("theorem1-critical", &centered, trials)?);

    // Fair-sign walk at H = -inf, n = 14.
    let params = CascadeParams::new(2, f64::NEG_INFINITY)?;
    let rows = walk_grid_samples(&params, 14, trials, master, &WIENER_GRID)?;
    checks.push(covariance_check("wiener-fdd-fair-walk", &rows, fdd_tol)?);

    // Persistent remainder at (b=2, H=0.7, n=6, m=15): one ensemble feeds
    // the covariance grid and the rescaled endpoint law.
    let params = CascadeParams::new(2, 0.7)?;
    let (rn, rm) = (6, 15);
    let rows = remainder_grid_samples(&params, rn, rm, trials, master, &WIENER_GRID)?;
    checks.push(covariance_check("wiener-fdd-remainder", &rows, fdd_tol)?);
    let deficit = variance_deficit(2, 0.7, rm);
    let endpoints: Vec<f64> = rows.iter().map(|r| r[3]).collect();
    let m = empirical_moments(&endpoints, 2)?;
    checks.push(Check::new(
        "remainder-variance-deficit",
        m[1],
        deficit,
        0.05,
    ));
    let rescaled: Vec<f64> = endpoints.iter().map(|x| x / deficit.sqrt()).collect();
    checks.push(Check::new(
        "remainder-ks-rescaled",
        ks_statistic(&rescaled)?,
        0.0,
        ks_threshold(trials),
    ));
    Ok(checks)
}

/// Regularity of single persistent paths at n = 18: oscillation exponent
/// near H, graph box dimension near 2 - H, both exact at H = 1.
pub fn holder_suite(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let n = 18;
    let seed = SeedSpec::new(cfg.master_seed);
    let (jmin, jmax) = (cfg.jmin, cfg.jmax);
    let box_jmax = jmax.saturating_sub(2).max(jmin + 1);
    let mut checks = Vec::new();
    for h in [0.7f64, 0.95] {
        let params = CascadeParams::new(2, h)?;
        let path = simulate_path(&params, n, &seed)?;
        let osc = oscillation_exponent(&path, jmin, jmax)?;
        checks.push(Check::new(
            format!("holder-oscillation-H{h}"),
            osc.slope,
            h,
            0.1,
        ));
        let boxd = box_dimension(&path, jmin, box_jmax)?;
        checks.push(Check::new(
            format!("box-dimension-H{h}"),
            boxd.slope,
            2.0 - h,
            0.15,
        ));
    }
    let params = CascadeParams::new(2, 1.0)?;
    let path = simulate_path(&params, n, &seed)?;
    checks.push(Check::new(
        "holder-oscillation-H1-exact",
        oscillation_exponent(&path, jmin, jmax)?.slope,
        1.0,
        1e-12,
    ));
    checks.push(Check::new(
        "box-dimension-H1-exact",
        box_dimension(&path, jmin, box_jmax)?.slope,
        1.0,
        1e-12,
    ));
    Ok(checks)
}
