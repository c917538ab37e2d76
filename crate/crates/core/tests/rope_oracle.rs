use confound_audit_core::cv::{rope_compare, Decision};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StudentT};

/// Posterior masses estimated by sampling `mean + scale · T(n − 1)`.
fn monte_carlo(d: &[f64], rho: f64, r: f64, draws: usize, rng: &mut ChaCha20Rng) -> (f64, f64, f64) {
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let scale = ((1.0 / n + rho / (1.0 - rho)) * var).sqrt();
    let t = StudentT::new(n - 1.0).unwrap();
    let (mut left, mut rope, mut right) = (0usize, 0usize, 0usize);
    for _ in 0..draws {
        let x = mean + scale * t.sample(rng);
        if x < -r {
            left += 1;
        } else if x > r {
            right += 1;
        } else {
            rope += 1;
        }
    }
    let f = draws as f64;
    (left as f64 / f, rope as f64 / f, right as f64 / f)
}

#[test]
fn posterior_masses_match_monte_carlo() {
    let mut r = ChaCha20Rng::seed_from_u64(31);
    for case in 0..20 {
        let n = r.gen_range(5..=50);
        let shift = r.gen_range(-0.05..0.05);
        let a: Vec<f64> = (0..n).map(|_| 0.7 + r.gen_range(-0.05..0.05)).collect();
        let b: Vec<f64> = a.iter().map(|v| v - shift + r.gen_range(-0.04..0.04)).collect();
        let res = rope_compare(&a, &b, 0.01, 0.2, 0.95).unwrap();
        let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let (l, m, h) = monte_carlo(&d, 0.2, 0.01, 100_000, &mut r);
        assert!((res.p_left - l).abs() <= 0.01, "case {case}: left {} vs {l}", res.p_left);
        assert!((res.p_rope - m).abs() <= 0.01, "case {case}: rope {} vs {m}", res.p_rope);
        assert!((res.p_right - h).abs() <= 0.01, "case {case}: right {} vs {h}", res.p_right);
    }
}

#[test]
fn swapping_operands_mirrors_the_posterior() {
    let mut r = ChaCha20Rng::seed_from_u64(32);
    for _ in 0..50 {
        let n = r.gen_range(3..30);
        let a: Vec<f64> = (0..n).map(|_| r.gen_range(0.4..0.9)).collect();
        let b: Vec<f64> = (0..n).map(|_| r.gen_range(0.4..0.9)).collect();
        let ab = rope_compare(&a, &b, 0.01, 0.2, 0.95).unwrap();
        let ba = rope_compare(&b, &a, 0.01, 0.2, 0.95).unwrap();
        assert_eq!(ab.p_left, ba.p_right);
        assert_eq!(ab.p_right, ba.p_left);
        assert_eq!(ab.p_rope, ba.p_rope);
    }
}

#[test]
fn identical_scores_are_equivalent() {
    let a = [0.8, 0.7, 0.75, 0.9];
    let res = rope_compare(&a, &a, 0.01, 0.2, 0.95).unwrap();
    assert_eq!(res.p_rope, 1.0);
    assert_eq!(res.decision, Decision::PracticallyEquivalent);
}

#[test]
fn clear_gap_is_meaningful() {
    let a = [0.9, 0.92, 0.91, 0.93, 0.9];
    let b = [0.6, 0.61, 0.6, 0.62, 0.59];
    assert_eq!(rope_compare(&a, &b, 0.01, 0.2, 0.95).unwrap().decision, Decision::MeaningfullyHigher);
    assert_eq!(rope_compare(&b, &a, 0.01, 0.2, 0.95).unwrap().decision, Decision::MeaningfullyLower);
}
