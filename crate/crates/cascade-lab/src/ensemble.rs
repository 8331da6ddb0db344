//! Deterministic parallel ensembles.
//!
//! Trials parallelize across a rayon pool; every trial draws from streams
//! derived purely from (master, trialIndex, level) and results are collected
//! in trial order, so the output is bit-identical whatever the thread count.
//! Samplers stream the deepest generation instead of storing it, since only
//! prefix sums at a few checkpoints are needed.

use rayon::prelude::*;

use crate::cascade::{expand_products, grid_cells, CascadeParams};
use crate::error::{Error, Result};
use crate::fclt::clt_step;
use crate::normalization::sigma;
use crate::rng::{sign_threshold, SeedSpec};

/// Per-thread sign-product buffers, reused across trials.
struct Scratch {
    cur: Vec<i8>,
    next: Vec<i8>,
}

impl Scratch {
    fn new() -> Self {
        Self {
            cur: Vec::new(),
            next: Vec::new(),
        }
    }

    /// Fills `cur` with the generation-`level` sign products.
    fn fill(&mut self, params: &CascadeParams, level: u32, seed: &SeedSpec) {
        self.cur.clear();
        self.cur.push(1);
        let b = params.b as usize;
        for l in 1..=level {
            let mut rng = seed.level_stream(l);
            expand_products(&self.cur, b, params.plus_prob, &mut rng, &mut self.next);
            std::mem::swap(&mut self.cur, &mut self.next);
        }
    }

    /// Expands from the stored generation to `level`, streaming the final
    /// generation's products into `sink` without storing them.
    fn stream_final(
        &mut self,
        params: &CascadeParams,
        stored: u32,
        level: u32,
        seed: &SeedSpec,
        mut sink: impl FnMut(i8),
    ) {
        debug_assert!(level > stored);
        let b = params.b as usize;
        for l in stored + 1..level {
            let mut rng = seed.level_stream(l);
            expand_products(&self.cur, b, params.plus_prob, &mut rng, &mut self.next);
            std::mem::swap(&mut self.cur, &mut self.next);
        }
        let mut rng = seed.level_stream(level);
        if params.plus_prob >= 1.0 {
            for &p in &self.cur {
                for _ in 0..b {
                    sink(p);
                }
            }
            return;
        }
        let thr = sign_threshold(params.plus_prob);
        for &p in &self.cur {
            for _ in 0..b {
                let s = if rng.next_u64() < thr { p } else { -p };
                sink(s);
            }
        }
    }
}

/// Maps gridpoints to 1-based leaf counts on the generation-`level` grid.
fn checkpoints_for(gridpoints: &[f64], cells: u64, level: u32) -> Result<Vec<u64>> {
    gridpoints
        .iter()
        .map(|&t| {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::OutOfDomain { t });
            }
            let exact = t * cells as f64;
            let r = exact.round();
            if (r - exact).abs() > 1e-9 || r < 1.0 {
                return Err(Error::OffGrid { t, level });
            }
            Ok(r as u64)
        })
        .collect()
}

/// Prefix sums of streamed products at ascending checkpoints.
struct PrefixTap<'a> {
    checkpoints: &'a [u64],
    sums: Vec<i64>,
    running: i64,
    count: u64,
    at: usize,
}

impl<'a> PrefixTap<'a> {
    fn new(checkpoints: &'a [u64]) -> Self {
        Self {
            checkpoints,
            sums: Vec::with_capacity(checkpoints.len()),
            running: 0,
            count: 0,
            at: 0,
        }
    }

    #[inline]
    fn push(&mut self, sign: i8) {
        self.running += sign as i64;
        self.count += 1;
        while self.at < self.checkpoints.len() && self.checkpoints[self.at] == self.count {
            self.sums.push(self.running);
            self.at += 1;
        }
    }
}

/// Sorts checkpoints ascending, remembering how to restore caller order.
fn sorted_with_perm(cps: &[u64]) -> (Vec<u64>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..cps.len()).collect();
    idx.sort_by_key(|&i| cps[i]);
    let sorted: Vec<u64> = idx.iter().map(|&i| cps[i]).collect();
    (sorted, idx)
}

fn unpermute(values: Vec<i64>, perm: &[usize]) -> Vec<i64> {
    let mut out = vec![0i64; values.len()];
    for (slot, &orig) in perm.iter().enumerate() {
        out[orig] = values[slot];
    }
    out
}

/// Leaf prefix sums S_r of one trial at the given checkpoints.
fn trial_prefix_sums(
    params: &CascadeParams,
    n: u32,
    seed: &SeedSpec,
    sorted_cps: &[u64],
    scratch: &mut Scratch,
) -> Vec<i64> {
    scratch.fill(params, n - 1, seed);
    let mut tap = PrefixTap::new(sorted_cps);
    let b = params.b as usize;
    let mut rng = seed.level_stream(n);
    if params.plus_prob >= 1.0 {
        for &p in &scratch.cur {
            for _ in 0..b {
                tap.push(p);
            }
        }
    } else {
        let thr = sign_threshold(params.plus_prob);
        for &p in &scratch.cur {
            for _ in 0..b {
                let s = if rng.next_u64() < thr { p } else { -p };
                tap.push(s);
            }
        }
    }
    tap.sums
}

/// Normalized walk values X_n(t) at the gridpoints, one row per trial.
pub fn walk_grid_samples(
    params: &CascadeParams,
    n: u32,
    trials: usize,
    master: u64,
    gridpoints: &[f64],
) -> Result<Vec<Vec<f64>>> {
    if trials == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let step = clt_step(params, n)?;
    let cells = grid_cells(params.b, n)?;
    let cps = checkpoints_for(gridpoints, cells, n)?;
    let (sorted, perm) = sorted_with_perm(&cps);
    let rows: Vec<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map_init(Scratch::new, |scratch, t| {
            let seed = SeedSpec::for_trial(master, t as u64);
            let sums = trial_prefix_sums(params, n, &seed, &sorted, scratch);
            unpermute(sums, &perm)
                .into_iter()
                .map(|s| s as f64 * step)
                .collect()
        })
        .collect();
    Ok(rows)
}

/// Centered normalized endpoints (S - b^(nH)) / normalizer, the fluctuation
/// of the walk around its known mean E(S) = b^(nH). At H = -inf the center
/// is 0.
pub fn walk_centered_endpoints(
    params: &CascadeParams,
    n: u32,
    trials: usize,
    master: u64,
) -> Result<Vec<f64>> {
    if trials == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let step = clt_step(params, n)?;
    let cells = grid_cells(params.b, n)?;
    let center = (params.b as f64).powf(n as f64 * params.h);
    let cps = [cells];
    let out: Vec<f64> = (0..trials)
        .into_par_iter()
        .map_init(Scratch::new, |scratch, t| {
            let seed = SeedSpec::for_trial(master, t as u64);
            let sums = trial_prefix_sums(params, n, &seed, &cps, scratch);
            (sums[0] as f64 - center) * step
        })
        .collect();
    Ok(out)
}

/// Normalized remainder values at the gridpoints, one row per trial. The
/// gridpoints must lie on the generation-n grid so that B_n needs no
/// interpolation.
pub fn remainder_grid_samples(
    params: &CascadeParams,
    n: u32,
    m: u32,
    trials: usize,
    master: u64,
    gridpoints: &[f64],
) -> Result<Vec<Vec<f64>>> {
    if trials == 0 {
        return Err(Error::EmptyEnsemble);
    }
    if !(params.h > 0.5 && params.h < 1.0) {
        return Err(Error::WrongRegime {
            h: params.h,
            expected: "1/2 < H < 1",
        });
    }
    if m < 1 {
        return Err(Error::Capacity {
            what: "remainder proxy depth",
            requested: 0,
            limit: crate::cascade::MAX_GRID_CELLS as u128,
        });
    }
    let b = params.b;
    let base_cells = grid_cells(b, n)?;
    let deep_cells = grid_cells(b, n + m)?;
    let base_cps = checkpoints_for(gridpoints, base_cells, n)?;
    let deep_cps = checkpoints_for(gridpoints, deep_cells, n + m)?;
    let (base_sorted, base_perm) = sorted_with_perm(&base_cps);
    let (deep_sorted, deep_perm) = sorted_with_perm(&deep_cps);
    let base_unit = params.leaf_unit(n);
    let deep_unit = params.leaf_unit(n + m);
    let inv_norm = 1.0 / (sigma(b, params.h)? * (b as f64).powf(n as f64 * (0.5 - params.h)));
    let rows: Vec<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map_init(Scratch::new, |scratch, t| {
            let seed = SeedSpec::for_trial(master, t as u64);
            scratch.fill(params, n, &seed);
            let mut base_tap = PrefixTap::new(&base_sorted);
            for &p in &scratch.cur {
                base_tap.push(p);
            }
            let base_sums = unpermute(base_tap.sums, &base_perm);
            let mut deep_tap = PrefixTap::new(&deep_sorted);
            scratch.stream_final(params, n, n + m, &seed, |s| deep_tap.push(s));
            let deep_sums = unpermute(deep_tap.sums, &deep_perm);
            base_sums
                .into_iter()
                .zip(deep_sums)
                .map(|(sb, sd)| (sd as f64 * deep_unit - sb as f64 * base_unit) * inv_norm)
                .collect()
        })
        .collect();
    Ok(rows)
}

/// Centered normalized total-mass samples (Z_n - 1)/normalizer for finite
/// H <= 1/2; identical in law to the walk endpoints but scaled on the
/// cascade side.
pub fn mass_centered_endpoints(
    params: &CascadeParams,
    n: u32,
    trials: usize,
    master: u64,
) -> Result<Vec<f64>> {
    if !params.is_finite_h() {
        return Err(Error::UndefinedPath);
    }
    walk_centered_endpoints(params, n, trials, master)
}
