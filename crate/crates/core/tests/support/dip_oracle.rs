//! Brute-force dip: the smallest sup-distance between the empirical CDF and a
//! unimodal CDF, found by linear programming over piecewise-linear fits.
//!
//! The fit is parameterized by its values at the distinct sample points plus
//! two far-away tail knots pinned to 0 and 1. For every choice of the peak
//! segment, the slopes must rise up to it and fall after it; the dip is the
//! smallest feasible tolerance over all peak choices.

use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};

pub fn oracle_dip(sample: &[f64]) -> f64 {
    let n = sample.len();
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    if x[0] == x[n - 1] {
        return 1.0 / (2.0 * n as f64);
    }
    let mut z: Vec<f64> = Vec::new();
    let mut cum: Vec<f64> = Vec::new();
    for (i, &v) in x.iter().enumerate() {
        if z.last() == Some(&v) {
            *cum.last_mut().unwrap() = (i + 1) as f64 / n as f64;
        } else {
            z.push(v);
            cum.push((i + 1) as f64 / n as f64);
        }
    }
    let range = z[z.len() - 1] - z[0];
    let far = 1e4 * range;
    let k = z.len();
    // knots: tail, z_1..z_k, tail
    let mut knots = Vec::with_capacity(k + 2);
    knots.push(z[0] - far);
    knots.extend_from_slice(&z);
    knots.push(z[k - 1] + far);
    let segs = knots.len() - 1;

    let mut best = f64::INFINITY;
    for peak in 0..segs {
        let mut lp = Problem::new(OptimizationDirection::Minimize);
        let t = lp.add_var(1.0, (0.0, 1.0));
        let mut g = Vec::with_capacity(knots.len());
        g.push(lp.add_var(0.0, (0.0, 0.0)));
        for _ in 0..k {
            g.push(lp.add_var(0.0, (0.0, 1.0)));
        }
        g.push(lp.add_var(0.0, (1.0, 1.0)));
        for j in 0..k {
            let below = if j == 0 { 0.0 } else { cum[j - 1] };
            // G_j + t >= C_j
            let mut e = LinearExpr::empty();
            e.add(g[j + 1], 1.0);
            e.add(t, 1.0);
            lp.add_constraint(e, ComparisonOp::Ge, cum[j]);
            // G_j - t <= C_{j-1}
            let mut e = LinearExpr::empty();
            e.add(g[j + 1], 1.0);
            e.add(t, -1.0);
            lp.add_constraint(e, ComparisonOp::Le, below);
        }
        for s in 0..segs {
            let mut e = LinearExpr::empty();
            e.add(g[s + 1], 1.0);
            e.add(g[s], -1.0);
            lp.add_constraint(e, ComparisonOp::Ge, 0.0);
        }
        // slope(s) = (G[s+1]-G[s])/h_s; compare consecutive slopes
        for s in 0..segs - 1 {
            let h0 = knots[s + 1] - knots[s];
            let h1 = knots[s + 2] - knots[s + 1];
            // slope(s+1) - slope(s), scaled by h0*h1
            let mut e = LinearExpr::empty();
            e.add(g[s + 2], h0);
            e.add(g[s + 1], -h0 - h1);
            e.add(g[s], h1);
            if s < peak {
                lp.add_constraint(e, ComparisonOp::Ge, 0.0);
            } else {
                lp.add_constraint(e, ComparisonOp::Le, 0.0);
            }
        }
        if let Ok(sol) = lp.solve() {
            best = best.min(sol.objective());
        }
    }
    best.max(1.0 / (2.0 * n as f64))
}
