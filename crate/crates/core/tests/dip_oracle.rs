mod support {
    pub mod dip_oracle;
}

use polarlens_core::dipstat::dip_statistic;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::dip_oracle::oracle_dip;

const TOL: f64 = 1e-6;

#[test]
fn oracle_two_points() {
    assert!((oracle_dip(&[0.0, 1.0]) - 0.25).abs() < 1e-9);
}

#[test]
fn matches_oracle_on_all_small_integer_subsets() {
    let mut checked = 0;
    let mut worst = 0.0f64;
    let mut above_floor = 0;
    for mask in 0u32..(1 << 11) {
        let size = mask.count_ones();
        if !(2..=8).contains(&size) {
            continue;
        }
        let x: Vec<f64> = (0..11).filter(|b| mask & (1 << b) != 0).map(f64::from).collect();
        let fast = dip_statistic(&x).unwrap();
        let slow = oracle_dip(&x);
        worst = worst.max((fast - slow).abs());
        assert!((fast - slow).abs() < TOL, "{x:?}: fast {fast} oracle {slow}");
        if slow > 1.0 / (2.0 * x.len() as f64) + 1e-6 {
            above_floor += 1;
        }
        checked += 1;
    }
    assert_eq!(checked, 1969);
    assert!(above_floor > 500, "only {above_floor} samples above the floor");
    eprintln!("max deviation {worst:e}");
}

#[test]
fn matches_oracle_on_random_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..300 {
        let n = rng.random_range(2..25);
        let bimodal = rng.random_bool(0.5);
        let x: Vec<f64> = (0..n)
            .map(|_| {
                let v: f64 = rng.random();
                if bimodal && rng.random_bool(0.5) {
                    v + 3.0
                } else {
                    v
                }
            })
            .collect();
        let fast = dip_statistic(&x).unwrap();
        let slow = oracle_dip(&x);
        assert!((fast - slow).abs() < TOL, "{x:?}: fast {fast} oracle {slow}");
    }
}
