//! Random-walk reformulations of the cascade and the persistent-regime
//! remainder processes.
//!
//! The leaf sign products xi_k turn the generation-n path into a correlated
//! +/-1 walk; dividing its piecewise linear interpolation by sigma_H *
//! sqrt(b^n) (sigma_(1/2) * sqrt(n b^n) at criticality) gives the CLT
//! process. In the persistent regime the discrepancy to the limit is
//! approximated by the depth-(n+m) proxy on the same sign stream, and the
//! companion walk with steps (Z_m(w) - 1) * xi_k matches it exactly at t = 1.

use crate::cascade::{grid_cells, path_from_products, products_to_level, CascadeParams};
use crate::error::{Error, Result};
use crate::normalization::sigma;
use crate::rng::SeedSpec;

/// One realized walk: steps and the normalized piecewise linear path.
#[derive(Clone, Debug)]
pub struct WalkRealization {
    pub b: u32,
    pub h: f64,
    /// Grid generation of `path`: b^level + 1 values.
    pub level: u32,
    /// Step sequence: +/-1 for the plain walk, reals for the tilde variant,
    /// the deep-level sign products for the remainder process.
    pub xi: Vec<f64>,
    /// Normalized path values at the gridpoints; path[0] = 0.
    pub path: Vec<f64>,
    pub seed: u64,
}

/// Products of the n tree signs along the path to each leaf, sharing the
/// sign streams with the cascade construction: for finite H the leaf
/// increment of B_n equals xi_k * b^(-nH) exactly. H = -inf is admissible.
pub fn xi_sequence(params: &CascadeParams, n: u32, seed: &SeedSpec) -> Result<Vec<i8>> {
    if n < 1 {
        return Err(Error::Capacity {
            what: "walk level",
            requested: 0,
            limit: crate::cascade::MAX_GRID_CELLS as u128,
        });
    }
    products_to_level(params, n, seed, |_, _| {})
}

pub(crate) fn clt_step(params: &CascadeParams, n: u32) -> Result<f64> {
    if params.h > 0.5 {
        return Err(Error::WrongRegime {
            h: params.h,
            expected: "H <= 1/2 (including -inf)",
        });
    }
    let cells = grid_cells(params.b, n)? as f64;
    let s = sigma(params.b, params.h)?;
    let norm = if params.h == 0.5 {
        s * (n as f64 * cells).sqrt()
    } else {
        s * cells.sqrt()
    };
    Ok(1.0 / norm)
}

/// The CLT process X_n: the xi walk interpolated linearly and divided by
/// sigma_H sqrt(b^n), or sigma_(1/2) sqrt(n b^n) at H = 1/2.
pub fn clt_walk(params: &CascadeParams, n: u32, seed: &SeedSpec) -> Result<WalkRealization> {
    let step = clt_step(params, n)?;
    let xi = xi_sequence(params, n, seed)?;
    let mut path = Vec::with_capacity(xi.len() + 1);
    path.push(0.0);
    let mut acc = 0.0;
    for &x in &xi {
        acc += x as f64 * step;
        path.push(acc);
    }
    Ok(WalkRealization {
        b: params.b,
        h: params.h,
        level: n,
        xi: xi.iter().map(|&x| x as f64).collect(),
        path,
        seed: seed.trial_seed(),
    })
}

/// Variance deficit 1 - b^(m(1-2H)) of the depth-m proxy standing in for
/// the limit process. Reported alongside every remainder experiment.
pub fn variance_deficit(b: u32, h: f64, m: u32) -> f64 {
    1.0 - (b as f64).powf(m as f64 * (1.0 - 2.0 * h))
}

/// Depth-(n+m) tree data shared by the remainder and tilde processes.
struct DeepTree {
    /// Sign products at generation n.
    xi_base: Vec<i8>,
    /// B_n values on its own grid.
    base_values: Vec<f64>,
    /// Sign products at generation n + m.
    deep_products: Vec<i8>,
}

fn grow_deep_tree(params: &CascadeParams, n: u32, m: u32, seed: &SeedSpec) -> Result<DeepTree> {
    grid_cells(params.b, n + m)?;
    let mut xi_base = Vec::new();
    let deep_products = products_to_level(params, n + m, seed, |level, prods| {
        if level == n {
            xi_base = prods.to_vec();
        }
    })?;
    let base = path_from_products(params, n, &xi_base, seed.trial_seed());
    Ok(DeepTree {
        xi_base,
        base_values: base.values,
        deep_products,
    })
}

fn require_persistent(params: &CascadeParams) -> Result<()> {
    if params.h > 0.5 && params.h <= 1.0 {
        Ok(())
    } else {
        Err(Error::WrongRegime {
            h: params.h,
            expected: "1/2 < H <= 1",
        })
    }
}

/// At H = 1 the subtrees are deterministic with unit mass, so both the
/// remainder and its companion walk vanish identically; sigma_1 = 0 makes
/// the generic normalization 0/0 there.
fn zero_walk(params: &CascadeParams, level: u32, cells: usize, seed: &SeedSpec) -> WalkRealization {
    WalkRealization {
        b: params.b,
        h: params.h,
        level,
        xi: vec![0.0; cells],
        path: vec![0.0; cells + 1],
        seed: seed.trial_seed(),
    }
}

/// The normalized discrepancy (B_(n+m) - B_n) / (sigma_H b^(n(1/2-H))) on
/// the generation-(n+m) grid, both paths grown from one sign stream. The
/// depth-m proxy carries the variance deficit 1 - b^(m(1-2H)) at t = 1.
pub fn remainder_path(
    params: &CascadeParams,
    n: u32,
    m: u32,
    seed: &SeedSpec,
) -> Result<WalkRealization> {
    require_persistent(params)?;
    if n < 1 {
        return Err(Error::Capacity {
            what: "remainder level",
            requested: 0,
            limit: crate::cascade::MAX_GRID_CELLS as u128,
        });
    }
    if params.h == 1.0 {
        let cells = grid_cells(params.b, n + m)? as usize;
        return Ok(zero_walk(params, n + m, cells, seed));
    }
    let tree = grow_deep_tree(params, n, m, seed)?;
    let b = params.b;
    let inv_norm = 1.0 / (sigma(b, params.h)? * (b as f64).powf(n as f64 * (0.5 - params.h)));
    let deep_unit = params.leaf_unit(n + m);
    let block = (b as u64).pow(m) as usize;
    let cells = tree.deep_products.len();
    let mut path = Vec::with_capacity(cells + 1);
    path.push(0.0);
    let mut acc = 0.0;
    for (j, &p) in tree.deep_products.iter().enumerate() {
        acc += p as f64 * deep_unit;
        let deep_index = j + 1;
        // B_n at t = deep_index * b^(-(n+m)), interpolated on its own grid.
        let k = deep_index / block;
        let offset = deep_index % block;
        let base = if offset == 0 {
            tree.base_values[k]
        } else {
            let frac = offset as f64 / block as f64;
            tree.base_values[k] + frac * (tree.base_values[k + 1] - tree.base_values[k])
        };
        path.push((acc - base) * inv_norm);
    }
    Ok(WalkRealization {
        b,
        h: params.h,
        level: n + m,
        xi: tree.deep_products.iter().map(|&x| x as f64).collect(),
        path,
        seed: seed.trial_seed(),
    })
}

/// The companion walk of the remainder: steps (Z_m(w) - 1) * xi_w over the
/// generation-n leaves, subtree masses taken at depth m from the same
/// stream, normalized by sigma_H sqrt(b^n).
pub fn tilde_walk(
    params: &CascadeParams,
    n: u32,
    m: u32,
    seed: &SeedSpec,
) -> Result<WalkRealization> {
    require_persistent(params)?;
    if n < 1 || m < 1 {
        return Err(Error::Capacity {
            what: "tilde level",
            requested: 0,
            limit: crate::cascade::MAX_GRID_CELLS as u128,
        });
    }
    if params.h == 1.0 {
        let cells = grid_cells(params.b, n)? as usize;
        return Ok(zero_walk(params, n, cells, seed));
    }
    let tree = grow_deep_tree(params, n, m, seed)?;
    let b = params.b;
    let block = (b as u64).pow(m) as usize;
    let subtree_unit = (b as f64).powf(-(m as f64) * params.h);
    let step = 1.0 / (sigma(b, params.h)? * ((b as u64).pow(n) as f64).sqrt());
    let mut xi = Vec::with_capacity(tree.xi_base.len());
    for (k, &xk) in tree.xi_base.iter().enumerate() {
        let mut block_sum = 0i64;
        for &p in &tree.deep_products[k * block..(k + 1) * block] {
            block_sum += p as i64;
        }
        // Subtree products are deep products divided by the leaf sign, so
        // the mass is b^(-mH) * xi_k * block_sum.
        let mass = subtree_unit * (xk as i64 * block_sum) as f64;
        xi.push((mass - 1.0) * xk as f64);
    }
    let mut path = Vec::with_capacity(xi.len() + 1);
    path.push(0.0);
    let mut acc = 0.0;
    for &x in &xi {
        acc += x * step;
        path.push(acc);
    }
    Ok(WalkRealization {
        b,
        h: params.h,
        level: n,
        xi,
        path,
        seed: seed.trial_seed(),
    })
}
