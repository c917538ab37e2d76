use confound_audit_core::metrics::{aucroc, pearson, r2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn auc_by_pairs(labels: &[f64], scores: &[f64]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for i in 0..labels.len() {
        for j in 0..labels.len() {
            if labels[i] == 1.0 && labels[j] == 0.0 {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

#[test]
fn auc_equals_pair_counting_with_ties() {
    let mut r = ChaCha20Rng::seed_from_u64(21);
    let mut done = 0;
    while done < 200 {
        let n = r.gen_range(2..=50);
        let labels: Vec<f64> = (0..n).map(|_| r.gen_range(0..2) as f64).collect();
        if labels.iter().all(|&l| l == labels[0]) {
            continue;
        }
        // Few distinct values, so ties are common.
        let scores: Vec<f64> = (0..n).map(|_| r.gen_range(0..6) as f64 * 0.25).collect();
        assert_eq!(aucroc(&labels, &scores).unwrap(), auc_by_pairs(&labels, &scores));
        done += 1;
    }
}

#[test]
fn single_class_auc_is_undefined() {
    assert!(aucroc(&[1.0, 1.0, 1.0], &[0.1, 0.2, 0.3]).is_err());
}

#[test]
fn r2_and_pearson_match_direct_formulas() {
    let mut r = ChaCha20Rng::seed_from_u64(22);
    for _ in 0..100 {
        let n = r.gen_range(3..100);
        let a: Vec<f64> = (0..n).map(|_| r.gen_range(-10.0..10.0)).collect();
        let b: Vec<f64> = a.iter().map(|v| 0.3 * v + r.gen_range(-5.0..5.0)).collect();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (ma, mb) = (mean(&a), mean(&b));
        let sxy: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let sxx: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let syy: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        assert!((pearson(&a, &b).unwrap() - sxy / (sxx * syy).sqrt()).abs() <= 1e-12);
        let rss: f64 = a.iter().zip(&b).map(|(t, p)| (t - p).powi(2)).sum();
        assert!((r2(&a, &b).unwrap() - (1.0 - rss / sxx)).abs() <= 1e-12);
    }
}

#[test]
fn constant_truth_makes_r2_undefined() {
    assert!(r2(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).is_err());
}
