//! Alignment probability against exact rational arithmetic.

use boost_core::oo::{alignment_probability, compute_s};
use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

fn choose(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

fn exact_ap(n: usize, g: usize, s: usize, k: usize) -> f64 {
    let mut num = BigUint::zero();
    for i in k..=g.min(s) {
        if s - i <= n - g {
            num += choose(g, i) * choose(n - g, s - i);
        }
    }
    let r = BigRational::new(num.into(), choose(n, s).into());
    r.to_f64().unwrap()
}

#[test]
fn reference_case() {
    let ap = alignment_probability(100, 10, 20, 1).unwrap();
    // The complement of choosing no good design.
    let direct = 1.0 - BigRational::new(choose(90, 20).into(), choose(100, 20).into()).to_f64().unwrap();
    assert!((ap - direct).abs() < 1e-12);
    assert!((ap - 0.904_883_727_569_21).abs() < 1e-12, "{ap}");
    assert!(alignment_probability(100, 10, 19, 1).unwrap() < 0.90);
    assert_eq!(compute_s(100, 10, 1, 0.90).unwrap(), 20);
}

#[test]
fn matches_exact_over_grid() {
    for n in [5, 17, 40, 90, 100, 200] {
        for g in [1, 2, n / 10, n / 3, n] {
            let g = g.max(1);
            for s in [1, 3, n / 5, n / 2, n] {
                let s = s.max(1);
                for k in 1..=g.min(s).min(4) {
                    let got = alignment_probability(n, g, s, k).unwrap();
                    let want = exact_ap(n, g, s, k);
                    assert!((got - want).abs() < 1e-10, "AP({n},{g},{s},{k}) = {got}, exact {want}");
                }
            }
        }
    }
}

#[test]
fn compute_s_matches_exact_scan() {
    for (n, g, k, target) in [(100, 10, 1, 0.9), (90, 9, 1, 0.9), (200, 20, 2, 0.95), (50, 5, 1, 0.5)] {
        let want = (k..=n).find(|&s| exact_ap(n, g, s, k) >= target).unwrap();
        assert_eq!(compute_s(n, g, k, target).unwrap(), want, "({n}, {g}, {k}, {target})");
    }
}
