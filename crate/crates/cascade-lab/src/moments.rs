//! Exact moments of the total mass Z_n = B_n(1).
//!
//! The finite-n moments follow a closed recursion over generations coupling
//! each order q to all smaller orders through a multinomial sum over sign
//! compositions; even-order limit moments of the renormalized mass follow
//! their own recursion seeded by M_2 = 1. A full-tree enumeration serves as
//! the independent oracle at small depth.

use std::collections::BTreeMap;

use crate::cascade::CascadeParams;
use crate::error::{Error, Result};

/// Order cap for the exact recursion; the multinomial sums blow up past it.
pub const MAX_MOMENT_ORDER: u32 = 16;

/// Sign-count cap for the brute-force oracle (2^20 configurations).
pub const MAX_BRUTE_FORCE_SIGNS: u32 = 20;

const MAX_COMPOSITIONS: usize = 1 << 20;

/// Neumaier compensated accumulator.
#[derive(Clone, Copy, Default)]
pub(crate) struct Accumulator {
    sum: f64,
    comp: f64,
}

impl Accumulator {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = Accumulator::default();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// All compositions of `total` into `parts` nonnegative integers, each at
/// most `cap`, in lexicographic order.
fn compositions(total: u32, parts: u32, cap: u32) -> Vec<Vec<u32>> {
    fn rec(total: u32, parts: u32, cap: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if parts == 1 {
            if total <= cap {
                prefix.push(total);
                out.push(prefix.clone());
                prefix.pop();
            }
            return;
        }
        for first in 0..=total.min(cap) {
            prefix.push(first);
            rec(total - first, parts - 1, cap, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(total, parts, cap, &mut Vec::new(), &mut out);
    out
}

fn factorial(n: u32) -> f64 {
    (1..=n as u64).product::<u64>() as f64
}

fn multinomial(total: u32, parts: &[u32]) -> f64 {
    let mut v = factorial(total);
    for &p in parts {
        v /= factorial(p);
    }
    v
}

fn validate_finite(b: u32, h: f64) -> Result<()> {
    if b < 2 {
        return Err(Error::InvalidBase { b });
    }
    if h.is_nan() || h > 1.0 || !h.is_finite() {
        return Err(Error::InvalidExponent { h });
    }
    Ok(())
}

/// E(Z_n^2) by iterating E(Z_k^2) = b^(1-2H) E(Z_(k-1)^2) + (b-1)/b from
/// E(Z_0^2) = 1.
pub fn second_moment(b: u32, h: f64, n: u32) -> Result<f64> {
    validate_finite(b, h)?;
    let bf = b as f64;
    let r = bf.powf(1.0 - 2.0 * h);
    let add = (bf - 1.0) / bf;
    let mut m = 1.0;
    for _ in 0..n {
        m = r * m + add;
    }
    Ok(m)
}

/// E(ε^q): b^(H-1) for odd q, 1 for even q (and for q = 0).
fn eps_moment(p: f64, q: u32) -> f64 {
    if q % 2 == 1 {
        p
    } else {
        1.0
    }
}

/// The table of E(Z_n'^q') for q' <= q, n' <= n, filled generation by
/// generation. Row q' = 1 is identically 1 (martingale mean), row n' = 0 is
/// identically 1 (Z_0 = 1).
fn moment_table(b: u32, h: f64, qmax: u32, nmax: u32) -> Result<Vec<Vec<f64>>> {
    validate_finite(b, h)?;
    if qmax > MAX_MOMENT_ORDER {
        return Err(Error::MomentOrder {
            q: qmax,
            cap: MAX_MOMENT_ORDER,
        });
    }
    let p = (b as f64).powf(h - 1.0);
    let bf = b as f64;
    // Compositions of q into b parts, all parts < q, shared across n.
    let mut comps: Vec<Vec<(f64, Vec<u32>)>> = Vec::with_capacity(qmax as usize + 1);
    let mut count = 0usize;
    for q in 0..=qmax {
        let list = if q >= 2 {
            compositions(q, b, q - 1)
                .into_iter()
                .map(|beta| (multinomial(q, &beta), beta))
                .collect()
        } else {
            Vec::new()
        };
        count += list.len();
        if count > MAX_COMPOSITIONS {
            return Err(Error::Capacity {
                what: "moment compositions",
                requested: count as u128,
                limit: MAX_COMPOSITIONS as u128,
            });
        }
        comps.push(list);
    }
    let mut table = vec![vec![1.0; nmax as usize + 1]; qmax as usize + 1];
    for n in 0..nmax as usize {
        for q in 2..=qmax {
            let lead = bf.powf(1.0 - (q as f64) * h) * eps_moment(p, q) * table[q as usize][n];
            let mut acc = Accumulator::default();
            for (gamma, beta) in &comps[q as usize] {
                let mut term = *gamma;
                for &bk in beta {
                    term *= eps_moment(p, bk) * table[bk as usize][n];
                }
                acc.add(term);
            }
            table[q as usize][n + 1] = lead + bf.powf(-h * q as f64) * acc.value();
        }
    }
    Ok(table)
}

/// E(Z_n^q) through the generation recursion. q is capped at 16.
pub fn exact_moment(b: u32, h: f64, q: u32, n: u32) -> Result<f64> {
    if q < 1 {
        return Err(Error::MomentOrder { q, cap: MAX_MOMENT_ORDER });
    }
    let table = moment_table(b, h, q, n)?;
    Ok(table[q as usize][n as usize])
}

/// Limit moments M_2p of the renormalized mass: M_2 = 1 and, for p >= 2,
///
///   M_2p = (b^p - b)^-1 * sum over compositions of p into b parts < p of
///          (2p)!/prod (2 alpha_k)! * prod M_(2 alpha_k).
///
/// These coincide with the N(0,1) even moments (2p-1)!!.
pub fn limit_even_moment(b: u32, two_p: u32) -> Result<f64> {
    if b < 2 {
        return Err(Error::InvalidBase { b });
    }
    if two_p == 0 || two_p % 2 != 0 {
        return Err(Error::MomentOrder {
            q: two_p,
            cap: MAX_MOMENT_ORDER,
        });
    }
    let pmax = two_p / 2;
    if two_p > MAX_MOMENT_ORDER {
        return Err(Error::MomentOrder {
            q: two_p,
            cap: MAX_MOMENT_ORDER,
        });
    }
    let mut m = vec![1.0; pmax as usize + 1]; // m[p] = M_2p, m[0] = 1
    for p in 2..=pmax {
        let mut acc = Accumulator::default();
        for alpha in compositions(p, b, p - 1) {
            let mut g = factorial(2 * p);
            for &ak in &alpha {
                g /= factorial(2 * ak);
            }
            let mut term = g;
            for &ak in &alpha {
                term *= m[ak as usize];
            }
            acc.add(term);
        }
        m[p as usize] = acc.value() / ((b as f64).powi(p as i32) - b as f64);
    }
    Ok(m[pmax as usize])
}

/// E(Z_n Z_m) = E(Z_min^2) by the tower property of the martingale.
pub fn covariance(b: u32, h: f64, n: u32, m: u32) -> Result<f64> {
    second_moment(b, h, n.min(m))
}

/// Exact weighted enumeration of Z_n^q over every sign assignment of the
/// depth-n tree. The independent oracle for `exact_moment`; sign count
/// (b^(n+1) - b)/(b - 1) is capped at 20.
pub fn brute_force_moment(b: u32, h: f64, q: u32, n: u32) -> Result<f64> {
    validate_finite(b, h)?;
    if n == 0 {
        return Ok(1.0);
    }
    let mut node_count = 0u64;
    let mut offsets = Vec::with_capacity(n as usize);
    for l in 1..=n {
        offsets.push(node_count);
        node_count += (b as u64).pow(l);
    }
    if node_count > MAX_BRUTE_FORCE_SIGNS as u64 {
        return Err(Error::Capacity {
            what: "brute-force signs",
            requested: node_count as u128,
            limit: MAX_BRUTE_FORCE_SIGNS as u128,
        });
    }
    let params = CascadeParams::new(b, h)?;
    let s = node_count as u32;
    // Weight factors per +/- count, exact powers of the two probabilities.
    let mut plus_pow = vec![1.0; s as usize + 1];
    let mut minus_pow = vec![1.0; s as usize + 1];
    for i in 1..=s as usize {
        plus_pow[i] = plus_pow[i - 1] * params.plus_prob;
        minus_pow[i] = minus_pow[i - 1] * params.minus_prob;
    }
    let scale = (b as f64).powf(-h);

    fn mass(
        signs: u64,
        offsets: &[u64],
        b: u64,
        scale: f64,
        depth: usize,
        max_depth: usize,
        node: u64,
    ) -> f64 {
        if depth == max_depth {
            return 1.0;
        }
        let mut acc = 0.0;
        for i in 0..b {
            let child = node * b + i;
            let sign = if (signs >> (offsets[depth] + child)) & 1 == 0 {
                1.0
            } else {
                -1.0
            };
            acc += sign * mass(signs, offsets, b, scale, depth + 1, max_depth, child);
        }
        scale * acc
    }

    let mut acc = Accumulator::default();
    for config in 0u64..1 << s {
        let minus = config.count_ones() as usize;
        let weight = plus_pow[s as usize - minus] * minus_pow[minus];
        if weight == 0.0 {
            continue;
        }
        let z = mass(config, &offsets, b as u64, scale, 0, n as usize, 0);
        acc.add(weight * z.powi(q as i32));
    }
    Ok(acc.value())
}

/// Tabulated exact moments for one (b, H): entries E(Z_n^q) and limit
/// moments M_2p, keyed for deterministic CSV emission.
#[derive(Clone, Debug)]
pub struct MomentTable {
    pub b: u32,
    pub h: f64,
    /// (q, n) -> E(Z_n^q).
    pub entries: BTreeMap<(u32, u32), f64>,
    /// 2p -> M_2p.
    pub limits: BTreeMap<u32, f64>,
}

impl MomentTable {
    pub fn build(b: u32, h: f64, qmax: u32, nmax: u32) -> Result<Self> {
        let table = moment_table(b, h, qmax, nmax)?;
        let mut entries = BTreeMap::new();
        for q in 1..=qmax {
            for n in 0..=nmax {
                entries.insert((q, n), table[q as usize][n as usize]);
            }
        }
        Ok(Self {
            b,
            h,
            entries,
            limits: BTreeMap::new(),
        })
    }

    pub fn with_limits(mut self, pmax: u32) -> Result<Self> {
        for p in 1..=pmax {
            self.limits.insert(2 * p, limit_even_moment(self.b, 2 * p)?);
        }
        Ok(self)
    }
}
