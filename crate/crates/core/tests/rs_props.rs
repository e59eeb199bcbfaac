use cpcode::rs_baseline::{condition_number, equally_spaced, rs_decode, RsConfig, RsResponse};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn oracle_condition(points: &[f64]) -> f64 {
    let n = points.len();
    let v = DMatrix::from_fn(n, n, |r, c| points[r].powi(c as i32));
    // sigma_max / sigma_min from the eigenvalues of V^T V
    let eig = (v.transpose() * &v).symmetric_eigenvalues();
    (eig.max() / eig.min()).sqrt()
}

fn responses(points: &[f64], blocks: &[Vec<f64>]) -> Vec<RsResponse<f64>> {
    points
        .iter()
        .map(|&z| {
            let mut value = vec![0.0; blocks[0].len()];
            for (j, b) in blocks.iter().enumerate() {
                for (o, v) in value.iter_mut().zip(b) {
                    *o += z.powi(j as i32) * v;
                }
            }
            RsResponse { point: z, value }
        })
        .collect()
}

#[test]
fn condition_number_matches_eigen_oracle() {
    let p = [-1.0, 0.0, 1.0];
    assert!((condition_number(&p) - oracle_condition(&p)).abs() < 1e-9 * oracle_condition(&p));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let k = rng.random_range(2..6);
        let pts: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (a, b) = (condition_number(&pts), oracle_condition(&pts));
        assert!((a - b).abs() < 1e-6 * b, "{a} vs {b}");
    }
}

#[test]
fn worst_subset_of_21_points_is_ill_conditioned() {
    let grid = equally_spaced::<f64>(21);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    // contiguous runs plus random subsets
    for start in 0..=11 {
        worst = worst.max(condition_number(&grid[start..start + 10]));
    }
    for _ in 0..2000 {
        let idx = rand::seq::index::sample(&mut rng, 21, 10);
        let pts: Vec<f64> = idx.iter().map(|i| grid[i]).collect();
        worst = worst.max(condition_number(&pts));
    }
    assert!(worst >= 1e4, "{worst}");
}

#[test]
fn any_delta_responses_recover_exactly() {
    let cfg = RsConfig::<f64>::new(4, 6, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let blocks: Vec<Vec<f64>> = (0..6).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let all = responses(cfg.points(), &blocks);
    for m in 0u32..1 << 8 {
        if m.count_ones() != 6 {
            continue;
        }
        let pick: Vec<_> = (0..8).filter(|i| m >> i & 1 == 1).map(|i| all[i].clone()).collect();
        let got = rs_decode(&pick, 6).unwrap();
        for (g, w) in got.iter().flatten().zip(blocks.iter().flatten()) {
            assert!((g - w).abs() < 1e-9);
        }
    }
}

#[test]
fn zero_point_response_gives_first_block() {
    let blocks = vec![vec![2.0, -1.0], vec![0.5, 4.0], vec![-3.0, 1.0]];
    let resp = responses(&[0.0, 0.5, -0.7], &blocks);
    assert_eq!(resp[0].value, blocks[0]);
    let got = rs_decode(&resp, 3).unwrap();
    assert!((got[0][0] - 2.0).abs() < 1e-12);
}

#[test]
fn noise_amplification_is_bounded_by_conditioning() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let grid = equally_spaced::<f64>(21);
    let mut violations = 0;
    for _ in 0..200 {
        let idx = rand::seq::index::sample(&mut rng, 21, 8);
        let pts: Vec<f64> = idx.iter().map(|i| grid[i]).collect();
        let blocks: Vec<Vec<f64>> = (0..8).map(|_| vec![rng.random_range(-1.0..1.0)]).collect();
        let clean = responses(&pts, &blocks);
        let noisy: Vec<RsResponse<f64>> = clean
            .iter()
            .map(|r| RsResponse { point: r.point, value: vec![r.value[0] * (1.0 + 1e-6 * rng.random_range(-1.0..1.0))] })
            .collect();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let yin: Vec<f64> = clean.iter().map(|r| r.value[0]).collect();
        let din: Vec<f64> = clean.iter().zip(&noisy).map(|(a, b)| a.value[0] - b.value[0]).collect();
        let got: Vec<f64> = rs_decode(&noisy, 8).unwrap().concat();
        let truth: Vec<f64> = blocks.concat();
        let dout: Vec<f64> = got.iter().zip(&truth).map(|(a, b)| a - b).collect();
        let amp = (norm(&dout) / norm(&truth)) / (norm(&din) / norm(&yin));
        if amp > condition_number(&pts) * (1.0 + 1e-6) {
            violations += 1;
        }
    }
    assert_eq!(violations, 0);
}
