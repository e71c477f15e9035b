use connbench::gauss::Rng;
use connbench::symlin::{eig_sym, frobenius_distance, inverse_spd, min_eigenvalue, project_psd, SymMatrix};
use proptest::prelude::*;

fn random_symmetric(p: usize, seed: u64) -> SymMatrix {
    let mut rng = Rng::new(seed);
    SymMatrix::from_upper_fn(p, |_, _| rng.uniform_range(-2.0, 2.0))
}

fn random_spd(p: usize, seed: u64) -> SymMatrix {
    let mut rng = Rng::new(seed);
    let a: Vec<f64> = (0..p * p).map(|_| rng.standard_normal()).collect();
    SymMatrix::from_upper_fn(p, |i, j| {
        let dot: f64 = (0..p).map(|k| a[i * p + k] * a[j * p + k]).sum();
        dot / p as f64 + if i == j { 0.5 } else { 0.0 }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn eigen_reconstruction(p in 1usize..=20, seed in any::<u64>()) {
        let m = random_symmetric(p, seed);
        let eig = eig_sym(&m);
        prop_assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        let back = eig.reassemble(|l| l);
        prop_assert!(frobenius_distance(&m, &back) <= 1e-8 * m.frobenius_norm().max(1e-300));
        // columns orthonormal
        for a in 0..p {
            for b in a..p {
                let dot: f64 = eig.vector(a).iter().zip(eig.vector(b)).map(|(x, y)| x * y).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                prop_assert!((dot - want).abs() < 1e-10);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn psd_projection_is_idempotent(p in 1usize..=12, floor in 0.0f64..0.5, seed in any::<u64>()) {
        let once = project_psd(&random_symmetric(p, seed), floor);
        let twice = project_psd(&once, floor);
        prop_assert!(once.max_abs_diff(&twice) <= 1e-10);
        prop_assert!(min_eigenvalue(&once) >= floor - 1e-10);
    }

    #[test]
    fn psd_projection_beats_feasible_perturbations(p in 2usize..=6, floor in 0.0f64..0.3, seed in any::<u64>()) {
        let m = random_symmetric(p, seed);
        let proj = project_psd(&m, floor);
        let best = frobenius_distance(&m, &proj);
        let mut rng = Rng::new(seed ^ 0x5eed);
        for _ in 0..50 {
            let scale = rng.uniform_range(1e-3, 0.5);
            let q = proj.combine(1.0, &SymMatrix::from_upper_fn(p, |_, _| rng.uniform_range(-scale, scale)), 1.0);
            if min_eigenvalue(&q) >= floor {
                prop_assert!(best <= frobenius_distance(&m, &q) + 1e-12);
            }
        }
    }

    #[test]
    fn double_inverse(p in 1usize..=15, seed in any::<u64>()) {
        let m = random_spd(p, seed);
        let back = inverse_spd(&inverse_spd(&m).unwrap()).unwrap();
        prop_assert!(back.max_abs_diff(&m) <= 1e-7);
    }
}
