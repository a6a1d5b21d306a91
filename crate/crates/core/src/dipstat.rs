//! Hartigan's dip test of unimodality.
//!
//! The dip is the sup-distance between the empirical distribution function
//! and the closest unimodal distribution function. It is computed with the
//! greatest-convex-minorant / least-concave-majorant iteration of Hartigan &
//! Hartigan (AS 217), working in units of `1/(2n)` until the end.
//!
//! Significance comes from Monte-Carlo draws of the same size from the
//! uniform distribution, the least favourable unimodal null.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MIN_BOOTSTRAP: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum DipError {
    #[error("dip test needs at least 2 finite values, got {0}")]
    InsufficientSample(usize),
    #[error("n_boot must be at least {MIN_BOOTSTRAP}, got {0}")]
    InvalidBootstrap(usize),
}

/// Dip statistic with its Monte-Carlo p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipResult {
    #[serde(rename = "D")]
    pub dip: f64,
    pub p_value: f64,
    pub n: usize,
    pub n_boot: usize,
    pub seed: u64,
}

/// Dip of `sample`; non-finite values are ignored.
///
/// A sample whose values are all equal returns the lower bound `1/(2n)`.
pub fn dip_statistic(sample: &[f64]) -> Result<f64, DipError> {
    let mut x: Vec<f64> = sample.iter().copied().filter(|v| v.is_finite()).collect();
    if x.len() < 2 {
        return Err(DipError::InsufficientSample(x.len()));
    }
    x.sort_by(f64::total_cmp);
    if x[0] == x[x.len() - 1] {
        warn!("dip test on {} identical values; returning the lower bound", x.len());
    }
    Ok(dip_sorted(&x))
}

/// Dip of an already sorted sample of length ≥ 2.
pub fn dip_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    // 1-based copy keeps the index arithmetic of the algorithm readable.
    let mut x = Vec::with_capacity(n + 1);
    x.push(f64::NAN);
    x.extend_from_slice(sorted);

    let two_n = 2.0 * n as f64;
    let mut dip = 1.0f64;
    if n < 2 || x[n] == x[1] {
        return dip / two_n;
    }

    // mn[j]: predecessor of j on the convex minorant of points 1..=j.
    let mut mn = vec![0usize; n + 1];
    mn[1] = 1;
    for j in 2..=n {
        mn[j] = j - 1;
        loop {
            let a = mn[j];
            let b = mn[a];
            if a == 1 || (x[j] - x[a]) * ((a - b) as f64) < (x[a] - x[b]) * ((j - a) as f64) {
                break;
            }
            mn[j] = b;
        }
    }
    // mj[k]: successor of k on the concave majorant of points k..=n.
    let mut mj = vec![0usize; n + 1];
    mj[n] = n;
    for k in (1..n).rev() {
        mj[k] = k + 1;
        loop {
            let a = mj[k];
            let b = mj[a];
            if a == n || (x[k] - x[a]) * ((b - a) as f64) > (x[a] - x[b]) * ((a - k) as f64) {
                break;
            }
            mj[k] = b;
        }
    }

    let mut gcm = vec![0usize; n + 2];
    let mut lcm = vec![0usize; n + 2];
    let (mut low, mut high) = (1usize, n);
    loop {
        // Knots of the convex minorant from `high` down to `low`.
        gcm[1] = high;
        let mut i = 1;
        while gcm[i] > low {
            gcm[i + 1] = mn[gcm[i]];
            i += 1;
        }
        let l_gcm = i;
        let mut ig = l_gcm;
        let mut ix = ig - 1;

        // Knots of the concave majorant from `low` up to `high`.
        lcm[1] = low;
        i = 1;
        while lcm[i] < high {
            lcm[i + 1] = mj[lcm[i]];
            i += 1;
        }
        let l_lcm = i;
        let mut ih = l_lcm;
        let mut iv = 2;

        // Largest distance between the two fits on [low, high].
        let mut d = 0.0f64;
        if l_gcm != 2 || l_lcm != 2 {
            loop {
                let gcm_ix = gcm[ix];
                let lcm_iv = lcm[iv];
                if gcm_ix > lcm_iv {
                    let g1 = gcm[ix + 1];
                    let dx = (lcm_iv as f64 - g1 as f64 + 1.0)
                        - (x[lcm_iv] - x[g1]) * (gcm_ix - g1) as f64 / (x[gcm_ix] - x[g1]);
                    iv += 1;
                    if dx >= d {
                        d = dx;
                        ig = ix + 1;
                        ih = iv - 1;
                    }
                } else {
                    let l1 = lcm[iv - 1];
                    let dx = (x[gcm_ix] - x[l1]) * (lcm_iv - l1) as f64 / (x[lcm_iv] - x[l1])
                        - (gcm_ix as f64 - l1 as f64 - 1.0);
                    ix -= 1;
                    if dx >= d {
                        d = dx;
                        ig = ix + 1;
                        ih = iv;
                    }
                }
                ix = ix.max(1);
                iv = iv.min(l_lcm);
                if gcm[ix] == lcm[iv] {
                    break;
                }
            }
        } else {
            d = 1.0;
        }
        if d < dip {
            break;
        }

        // Dip of the convex minorant part.
        let mut dip_l = 0.0f64;
        for j in ig..l_gcm {
            let (jb, je) = (gcm[j + 1], gcm[j]);
            let mut max_t = 1.0f64;
            if je - jb > 1 && x[je] != x[jb] {
                let slope = (je - jb) as f64 / (x[je] - x[jb]);
                for jj in jb..=je {
                    max_t = max_t.max((jj - jb + 1) as f64 - (x[jj] - x[jb]) * slope);
                }
            }
            dip_l = dip_l.max(max_t);
        }
        // Dip of the concave majorant part.
        let mut dip_u = 0.0f64;
        for j in ih..l_lcm {
            let (jb, je) = (lcm[j], lcm[j + 1]);
            let mut max_t = 1.0f64;
            if je - jb > 1 && x[je] != x[jb] {
                let slope = (je - jb) as f64 / (x[je] - x[jb]);
                for jj in jb..=je {
                    max_t = max_t.max((x[jj] - x[jb]) * slope - (jj as f64 - jb as f64 - 1.0));
                }
            }
            dip_u = dip_u.max(max_t);
        }
        dip = dip.max(dip_l.max(dip_u));

        if low == gcm[ig] && high == lcm[ih] {
            break;
        }
        low = gcm[ig];
        high = lcm[ih];
    }
    dip / two_n
}

/// Monte-Carlo p-value of dip `d` against uniform samples of size `n`:
/// `(1 + #{null dips >= d}) / (n_boot + 1)`.
///
/// Replicate `b` draws from its own ChaCha stream `(seed, b)`, so the result
/// does not depend on thread scheduling.
pub fn dip_pvalue(d: f64, n: usize, n_boot: usize, seed: u64) -> Result<f64, DipError> {
    if n < 2 {
        return Err(DipError::InsufficientSample(n));
    }
    if n_boot < MIN_BOOTSTRAP {
        return Err(DipError::InvalidBootstrap(n_boot));
    }
    let exceed = (0..n_boot as u64)
        .into_par_iter()
        .map_init(
            || vec![0.0f64; n],
            |buf, b| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(b);
                for v in buf.iter_mut() {
                    *v = rng.random::<f64>();
                }
                buf.sort_by(f64::total_cmp);
                usize::from(dip_sorted(buf) >= d)
            },
        )
        .sum::<usize>();
    Ok((1 + exceed) as f64 / (n_boot + 1) as f64)
}

/// Dip statistic and p-value in one call.
pub fn dip_test(sample: &[f64], n_boot: usize, seed: u64) -> Result<DipResult, DipError> {
    let dip = dip_statistic(sample)?;
    let n = sample.iter().filter(|v| v.is_finite()).count();
    let p_value = dip_pvalue(dip, n, n_boot, seed)?;
    Ok(DipResult {
        dip,
        p_value,
        n,
        n_boot,
        seed,
    })
}
