//! Construction of the bilateral cascade: sign trees on b-adic grids and the
//! piecewise linear paths they refine, plus the non-random generator cartoon.
//!
//! Each generation multiplies every cell's slope by an independent sign that
//! is +1 with probability (1 + b^(H-1))/2. Levels are never stored as a
//! tree; one running sign-product array of the current generation is enough.

use crate::error::{Error, Result};
use crate::rng::{sign_threshold, SeedSpec, SplitMix64};

/// Refuse grids above 2^28 cells. The deepest figure (2^27 cells) fits.
pub const MAX_GRID_CELLS: u64 = 1 << 28;

/// Global configuration of one cascade: base, exponent and the sign law.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CascadeParams {
    /// Integer base b >= 2.
    pub b: u32,
    /// Exponent H in [-inf, 1]. `f64::NEG_INFINITY` is admissible.
    pub h: f64,
    /// Multiplier mean p = b^(H-1), in [0, 1].
    pub p: f64,
    /// Probability of a +1 sign, (1 + p)/2.
    pub plus_prob: f64,
    /// Probability of a -1 sign, 1 - plus_prob.
    pub minus_prob: f64,
}

impl CascadeParams {
    /// Derives the sign law from (b, H). H = -inf is the fair-sign case.
    pub fn new(b: u32, h: f64) -> Result<Self> {
        if b < 2 {
            return Err(Error::InvalidBase { b });
        }
        if h.is_nan() || h > 1.0 {
            return Err(Error::InvalidExponent { h });
        }
        let p = (b as f64).powf(h - 1.0);
        let plus_prob = (1.0 + p) / 2.0;
        // 1 - plus_prob is exact here (plus_prob in [1/2, 1]), so the two
        // probabilities sum to 1 exactly.
        let minus_prob = 1.0 - plus_prob;
        Ok(Self {
            b,
            h,
            p,
            plus_prob,
            minus_prob,
        })
    }

    pub fn is_finite_h(&self) -> bool {
        self.h.is_finite()
    }

    /// Leaf increment modulus b^(-nH) of a generation-n path.
    pub fn leaf_unit(&self, level: u32) -> f64 {
        (self.b as f64).powf(-(level as f64) * self.h)
    }
}

/// Number of generation-`level` cells, guarded against desk-scale blowup.
pub fn grid_cells(b: u32, level: u32) -> Result<u64> {
    let cells = (b as u128)
        .checked_pow(level)
        .ok_or(Error::Capacity {
            what: "grid",
            requested: u128::MAX,
            limit: MAX_GRID_CELLS as u128,
        })?;
    if cells > MAX_GRID_CELLS as u128 {
        return Err(Error::Capacity {
            what: "grid",
            requested: cells,
            limit: MAX_GRID_CELLS as u128,
        });
    }
    Ok(cells as u64)
}

/// One generation of tree signs in lexicographic cell order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelSigns {
    pub b: u32,
    pub level: u32,
    /// Exactly b^level entries, each +1 or -1.
    pub signs: Vec<i8>,
}

/// Draws the b^level independent signs of one tree generation.
///
/// Fully determined by (params, level, seed): repeat calls are bit-identical.
pub fn sample_sign_level(params: &CascadeParams, level: u32, seed: &SeedSpec) -> Result<LevelSigns> {
    if level < 1 {
        return Err(Error::Capacity {
            what: "sign level",
            requested: 0,
            limit: MAX_GRID_CELLS as u128,
        });
    }
    let cells = grid_cells(params.b, level)?;
    let mut rng = seed.level_stream(level);
    let mut signs = Vec::with_capacity(cells as usize);
    if params.plus_prob >= 1.0 {
        signs.resize(cells as usize, 1);
    } else {
        let thr = sign_threshold(params.plus_prob);
        for _ in 0..cells {
            signs.push(draw_sign(&mut rng, thr));
        }
    }
    Ok(LevelSigns {
        b: params.b,
        level,
        signs,
    })
}

#[inline]
fn draw_sign(rng: &mut SplitMix64, thr: u64) -> i8 {
    if rng.next_u64() < thr {
        1
    } else {
        -1
    }
}

/// One realized cascade path B_n: values on the b-adic grid of generation n.
#[derive(Clone, Debug, PartialEq)]
pub struct PathRealization {
    pub b: u32,
    pub h: f64,
    pub level: u32,
    /// b^level + 1 values at the gridpoints k * b^(-level); values[0] = 0.
    pub values: Vec<f64>,
    /// Derived trial seed that reproduces this realization.
    pub seed: u64,
}

impl PathRealization {
    /// The level-0 path: the unit ramp from (0,0) to (1,1).
    pub fn unit(b: u32, h: f64) -> Result<Self> {
        let params = CascadeParams::new(b, h)?;
        if !params.is_finite_h() {
            return Err(Error::UndefinedPath);
        }
        Ok(Self {
            b,
            h,
            level: 0,
            values: vec![0.0, 1.0],
            seed: 0,
        })
    }

    pub fn cells(&self) -> usize {
        self.values.len() - 1
    }

    /// Linear interpolation between adjacent grid values.
    pub fn evaluate(&self, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::OutOfDomain { t });
        }
        let cells = self.cells();
        let u = t * cells as f64;
        let k = u.floor() as usize;
        if k >= cells {
            return Ok(self.values[cells]);
        }
        let frac = u - k as f64;
        Ok(self.values[k] + frac * (self.values[k + 1] - self.values[k]))
    }

    /// Total increment Z_n = B_n(1).
    pub fn total_mass(&self) -> f64 {
        *self.values.last().expect("paths hold at least two values")
    }

    /// Leaf sign products recovered from the stored values. The increment
    /// modulus is pinned to b^(-nH), so only the sign is read off.
    pub fn sign_products(&self) -> Vec<i8> {
        self.values
            .windows(2)
            .map(|w| if w[1] >= w[0] { 1 } else { -1 })
            .collect()
    }
}

/// One refinement step: every generation-n cell splits into b children, each
/// child increment being the parent sign product times its own sign, scaled
/// by b^(-(n+1)H).
pub fn refine(path: &PathRealization, child_signs: &LevelSigns) -> Result<PathRealization> {
    if child_signs.b != path.b {
        return Err(Error::BaseMismatch {
            path_b: path.b,
            signs_b: child_signs.b,
        });
    }
    if child_signs.level != path.level + 1 {
        return Err(Error::Refinement {
            path_level: path.level,
            signs_level: child_signs.level,
        });
    }
    let b = path.b as usize;
    let parent_products = path.sign_products();
    debug_assert_eq!(parent_products.len() * b, child_signs.signs.len());
    let child_level = child_signs.level;
    let unit = CascadeParams::new(path.b, path.h)?.leaf_unit(child_level);
    let mut values = Vec::with_capacity(child_signs.signs.len() + 1);
    values.push(0.0);
    let mut acc = 0.0;
    for (k, &parent) in parent_products.iter().enumerate() {
        for i in 0..b {
            let sign = parent * child_signs.signs[k * b + i];
            acc += sign as f64 * unit;
            values.push(acc);
        }
    }
    Ok(PathRealization {
        b: path.b,
        h: path.h,
        level: child_level,
        values,
        seed: path.seed,
    })
}

/// Expands the running sign-product array by one generation, drawing the
/// child signs from `rng`. `out` receives b * parents.len() products.
pub(crate) fn expand_products(
    parents: &[i8],
    b: usize,
    plus_prob: f64,
    rng: &mut SplitMix64,
    out: &mut Vec<i8>,
) {
    out.clear();
    out.reserve(parents.len() * b);
    if plus_prob >= 1.0 {
        for &p in parents {
            for _ in 0..b {
                out.push(p);
            }
        }
        return;
    }
    let thr = sign_threshold(plus_prob);
    for &p in parents {
        for _ in 0..b {
            out.push(p * draw_sign(rng, thr));
        }
    }
}

/// Runs the sign-product recursion down to `level`, calling `tap` with each
/// generation's products along the way.
pub(crate) fn products_to_level(
    params: &CascadeParams,
    level: u32,
    seed: &SeedSpec,
    mut tap: impl FnMut(u32, &[i8]),
) -> Result<Vec<i8>> {
    grid_cells(params.b, level)?;
    let b = params.b as usize;
    let mut cur: Vec<i8> = vec![1];
    let mut next: Vec<i8> = Vec::new();
    for l in 1..=level {
        let mut rng = seed.level_stream(l);
        expand_products(&cur, b, params.plus_prob, &mut rng, &mut next);
        std::mem::swap(&mut cur, &mut next);
        tap(l, &cur);
    }
    Ok(cur)
}

/// Simulates B_n in a single pass: n refinement steps from the unit ramp,
/// sharing the per-level sign streams with `sample_sign_level`.
pub fn simulate_path(params: &CascadeParams, n: u32, seed: &SeedSpec) -> Result<PathRealization> {
    if !params.is_finite_h() {
        return Err(Error::UndefinedPath);
    }
    if n < 1 {
        return Err(Error::Capacity {
            what: "path level",
            requested: 0,
            limit: MAX_GRID_CELLS as u128,
        });
    }
    let products = products_to_level(params, n, seed, |_, _| {})?;
    Ok(path_from_products(params, n, &products, seed.trial_seed()))
}

pub(crate) fn path_from_products(
    params: &CascadeParams,
    level: u32,
    products: &[i8],
    seed_token: u64,
) -> PathRealization {
    let unit = params.leaf_unit(level);
    let mut values = Vec::with_capacity(products.len() + 1);
    values.push(0.0);
    let mut acc = 0.0;
    for &p in products {
        acc += p as f64 * unit;
        values.push(acc);
    }
    PathRealization {
        b: params.b,
        h: params.h,
        level,
        values,
        seed: seed_token,
    }
}

/// Deterministic base-4 cartoon of the Wiener path: recursive substitution
/// of the four-segment generator through (0,0), (1/4,1/2), (1/2,0),
/// (3/4,1/2), (1,1). Descending segments take the generator flipped
/// vertically, which is what the affine image with a negative rise gives.
pub fn cartoon_wbm(stages: u32) -> Result<PathRealization> {
    if stages < 1 {
        return Err(Error::Capacity {
            what: "cartoon stage",
            requested: 0,
            limit: MAX_GRID_CELLS as u128,
        });
    }
    grid_cells(4, stages)?;
    // Generator ordinates on the quarter grid, relative to a unit rise.
    const GEN: [f64; 5] = [0.0, 0.5, 0.0, 0.5, 1.0];
    let mut values = vec![0.0, 1.0];
    for _ in 0..stages {
        let mut refined = Vec::with_capacity((values.len() - 1) * 4 + 1);
        refined.push(values[0]);
        for w in values.windows(2) {
            let (y0, y1) = (w[0], w[1]);
            let rise = y1 - y0;
            for g in &GEN[1..] {
                refined.push(y0 + rise * g);
            }
        }
        values = refined;
    }
    Ok(PathRealization {
        b: 4,
        h: 0.5,
        level: stages,
        values,
        seed: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const REL: f64 = 1e-12;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn derive_params_deterministic_case() {
        let p = CascadeParams::new(2, 1.0).unwrap();
        assert_eq!(p.p, 1.0);
        assert_eq!(p.plus_prob, 1.0);
        assert_eq!(p.minus_prob, 0.0);
    }

    #[test]
    fn derive_params_fair_case() {
        let p = CascadeParams::new(2, f64::NEG_INFINITY).unwrap();
        assert_eq!(p.p, 0.0);
        assert_eq!(p.plus_prob, 0.5);
    }

    #[test]
    fn derive_params_half() {
        let p = CascadeParams::new(2, 0.5).unwrap();
        assert!(close(p.p, 0.7071067811865476, REL));
        assert!(close(p.plus_prob, 0.8535533905932738, REL));
        assert_eq!(p.plus_prob + p.minus_prob, 1.0);
    }

    #[test]
    fn derive_params_rejects_bad_input() {
        assert!(matches!(
            CascadeParams::new(1, 0.5),
            Err(Error::InvalidBase { .. })
        ));
        assert!(matches!(
            CascadeParams::new(2, 1.5),
            Err(Error::InvalidExponent { .. })
        ));
        assert!(matches!(
            CascadeParams::new(2, f64::NAN),
            Err(Error::InvalidExponent { .. })
        ));
    }

    #[test]
    fn signs_deterministic_and_all_plus_at_h_one() {
        let params = CascadeParams::new(2, 1.0).unwrap();
        let s = sample_sign_level(&params, 3, &SeedSpec::new(9)).unwrap();
        assert_eq!(s.signs, vec![1; 8]);

        let params = CascadeParams::new(2, 0.5).unwrap();
        let seed = SeedSpec::new(123);
        let a = sample_sign_level(&params, 10, &seed).unwrap();
        let b = sample_sign_level(&params, 10, &seed).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.signs.len(), 1024);
        assert!(a.signs.iter().all(|&s| s == 1 || s == -1));
    }

    #[test]
    fn sign_mean_concentrates_on_p() {
        // E(sign) = p; binomial 4-sigma band at 4096 draws.
        let params = CascadeParams::new(2, 0.5).unwrap();
        let s = sample_sign_level(&params, 12, &SeedSpec::new(7)).unwrap();
        let mean = s.signs.iter().map(|&x| x as f64).sum::<f64>() / 4096.0;
        assert!(
            (mean - params.p).abs() <= 4.0 * (1.0f64 / 4096.0).sqrt(),
            "empirical sign mean {mean} too far from p = {}",
            params.p
        );
    }

    #[test]
    fn refine_identity_case() {
        let path = PathRealization::unit(2, 1.0).unwrap();
        let signs = LevelSigns {
            b: 2,
            level: 1,
            signs: vec![1, 1],
        };
        let p1 = refine(&path, &signs).unwrap();
        assert_eq!(p1.values, vec![0.0, 0.5, 1.0]);
        let signs2 = LevelSigns {
            b: 2,
            level: 2,
            signs: vec![1, 1, 1, 1],
        };
        let p2 = refine(&p1, &signs2).unwrap();
        assert_eq!(p2.values, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn refine_hand_values_at_half() {
        let path = PathRealization::unit(2, 0.5).unwrap();
        let r = 0.5f64.sqrt();
        let p = refine(
            &path,
            &LevelSigns {
                b: 2,
                level: 1,
                signs: vec![1, -1],
            },
        )
        .unwrap();
        assert!(close(p.values[1], r, REL));
        assert!(p.values[2].abs() < 1e-15);
        let p = refine(
            &path,
            &LevelSigns {
                b: 2,
                level: 1,
                signs: vec![1, 1],
            },
        )
        .unwrap();
        assert!(close(p.values[1], r, REL));
        assert!(close(p.values[2], 2.0 * r, REL));
    }

    #[test]
    fn refine_rejects_level_mismatch() {
        let path = PathRealization::unit(2, 0.5).unwrap();
        let bad = LevelSigns {
            b: 2,
            level: 2,
            signs: vec![1, 1, 1, 1],
        };
        assert!(matches!(refine(&path, &bad), Err(Error::Refinement { .. })));
    }

    #[test]
    fn simulate_is_iterated_refine() {
        for (b, h) in [(2u32, 0.6), (2, 0.25), (3, 0.4)] {
            let params = CascadeParams::new(b, h).unwrap();
            let seed = SeedSpec::new(31);
            let direct = simulate_path(&params, 6, &seed).unwrap();
            let mut path = PathRealization::unit(b, h).unwrap();
            for level in 1..=6 {
                let signs = sample_sign_level(&params, level, &seed).unwrap();
                path = refine(&path, &signs).unwrap();
            }
            assert_eq!(direct.values, path.values, "b={b} H={h}");
        }
    }

    #[test]
    fn simulate_identity_at_h_one() {
        let params = CascadeParams::new(2, 1.0).unwrap();
        let p = simulate_path(&params, 5, &SeedSpec::new(77)).unwrap();
        for (k, v) in p.values.iter().enumerate() {
            assert_eq!(*v, k as f64 / 32.0);
        }
    }

    #[test]
    fn leaf_increment_modulus_is_unit() {
        let params = CascadeParams::new(2, 0.7).unwrap();
        let p = simulate_path(&params, 8, &SeedSpec::new(3)).unwrap();
        let unit = 2.0f64.powf(-8.0 * 0.7);
        for w in p.values.windows(2) {
            assert!(
                close((w[1] - w[0]).abs(), unit, 1e-12),
                "increment {} vs unit {unit}",
                (w[1] - w[0]).abs()
            );
        }
    }

    #[test]
    fn simulate_rejects_neg_infinity() {
        let params = CascadeParams::new(2, f64::NEG_INFINITY).unwrap();
        assert!(matches!(
            simulate_path(&params, 4, &SeedSpec::new(0)),
            Err(Error::UndefinedPath)
        ));
    }

    #[test]
    fn capacity_guard_trips() {
        assert!(matches!(grid_cells(2, 29), Err(Error::Capacity { .. })));
        assert!(grid_cells(2, 28).is_ok());
    }

    #[test]
    fn evaluate_interpolates() {
        let p = PathRealization {
            b: 2,
            h: 0.5,
            level: 1,
            values: vec![0.0, 0.5f64.sqrt(), 0.0],
            seed: 0,
        };
        assert_eq!(p.evaluate(0.0).unwrap(), 0.0);
        assert!(close(p.evaluate(0.25).unwrap(), 0.5f64.sqrt() / 2.0, REL));
        assert_eq!(p.evaluate(0.5).unwrap(), 0.5f64.sqrt());
        assert_eq!(p.evaluate(1.0).unwrap(), 0.0);
        assert!(matches!(p.evaluate(1.5), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn total_mass_martingale_mean() {
        // E(Z_n) = 1: 4-sigma band over 10^4 trials.
        let params = CascadeParams::new(2, 0.25).unwrap();
        let trials = 10_000u64;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for t in 0..trials {
            let z = simulate_path(&params, 10, &SeedSpec::for_trial(11, t))
                .unwrap()
                .total_mass();
            sum += z;
            sumsq += z * z;
        }
        let mean = sum / trials as f64;
        let sd = (sumsq / trials as f64 - mean * mean).sqrt();
        assert!(
            (mean - 1.0).abs() <= 4.0 * sd / (trials as f64).sqrt(),
            "ensemble mean {mean} (sd {sd}) incompatible with E(Z) = 1"
        );
    }

    #[test]
    fn derivative_correlation_is_p() {
        // Signs of matching child/parent increments correlate at p.
        let params = CascadeParams::new(2, 0.5).unwrap();
        let seed = SeedSpec::new(19);
        let n = 11;
        let parent = simulate_path(&params, n, &seed).unwrap();
        let child = simulate_path(&params, n + 1, &seed).unwrap();
        let ps = parent.sign_products();
        let cs = child.sign_products();
        let cells = cs.len();
        let mut acc = 0.0;
        for (j, &c) in cs.iter().enumerate() {
            acc += (c * ps[j / 2]) as f64;
        }
        let corr = acc / cells as f64;
        let tol = 4.0 / (cells as f64).sqrt();
        assert!(
            (corr - params.p).abs() <= tol,
            "derivative correlation {corr} vs p = {} (tol {tol})",
            params.p
        );
    }

    #[test]
    fn one_step_martingale_consistency() {
        // Averaged over child draws, the refined increment over a parent
        // cell reproduces the parent increment.
        let params = CascadeParams::new(2, 0.3).unwrap();
        let parent = simulate_path(&params, 2, &SeedSpec::new(5)).unwrap();
        let parent_incr = parent.values[1] - parent.values[0];
        let trials = 40_000u64;
        let mut sum = 0.0;
        for t in 0..trials {
            let signs = sample_sign_level(&params, 3, &SeedSpec::for_trial(100, t)).unwrap();
            let refined = refine(&parent, &signs).unwrap();
            sum += refined.values[2] - refined.values[0];
        }
        let mean = sum / trials as f64;
        // Child sum has sd <= 2 * unit; 5-sigma band.
        let unit = params.leaf_unit(3);
        let tol = 5.0 * 2.0 * unit / (trials as f64).sqrt();
        assert!(
            (mean - parent_incr).abs() <= tol,
            "conditional mean {mean} vs parent increment {parent_incr} (tol {tol})"
        );
    }

    #[test]
    fn cartoon_generator_and_recursion() {
        let c1 = cartoon_wbm(1).unwrap();
        assert_eq!(c1.values, vec![0.0, 0.5, 0.0, 0.5, 1.0]);
        let c2 = cartoon_wbm(2).unwrap();
        assert_eq!(c2.values.len(), 17);
        assert_eq!(c2.values[0], 0.0);
        assert_eq!(*c2.values.last().unwrap(), 1.0);
        // One substitution into the first segment: t = 1/16 -> 1/4.
        assert_eq!(c2.evaluate(1.0 / 16.0).unwrap(), 0.25);
        // Increment modulus 4^(-s/2) = 2^-s.
        for w in c2.values.windows(2) {
            assert_eq!((w[1] - w[0]).abs(), 0.25);
        }
        let c4 = cartoon_wbm(4).unwrap();
        assert_eq!(c4.values.len(), 4usize.pow(4) + 1);
        assert_eq!(*c4.values.last().unwrap(), 1.0);
    }
}
