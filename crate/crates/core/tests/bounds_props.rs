use proptest::prelude::*;
use tucker_core::bounds::{
    deflation_ratio, largest_singular_value_floor, phi_k, psi_k, smallest_singular_value_floor, BoundParams,
};

fn params(beta: f64, gamma: f64) -> BoundParams {
    let spectra: Vec<Vec<f64>> = (0..3).map(|_| (1..=12).map(|i| 1.0 / i as f64).collect()).collect();
    BoundParams::new(vec![12; 3], vec![3; 3], vec![2; 3], vec![vec![0.0]; 3], spectra).with_knobs(Some(2), beta, gamma)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shifted_ratio_products_shrink(
        top in prop::collection::vec(0.1f64..10.0, 2..6),
        fracs in prop::collection::vec(0.0f64..0.5, 1..6),
    ) {
        let mut s = top;
        s.sort_by(|a, b| b.total_cmp(a));
        s.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
        prop_assume!(s.len() >= 2);
        let smallest = s[s.len() - 1].powi(2);
        // A valid trace: nondecreasing shifts below the smallest squared value.
        let mut alphas: Vec<f64> = fracs.iter().map(|f| f * smallest).filter(|&a| a > 0.0).collect();
        alphas.sort_by(f64::total_cmp);
        prop_assume!(!alphas.is_empty());
        for j in 0..s.len() {
            for i in j + 1..s.len() {
                let (si, sj) = (s[i] * s[i], s[j] * s[j]);
                for &a in &alphas {
                    prop_assert!(deflation_ratio(si, sj, a) < si / sj);
                }
                let product: f64 = alphas.iter().map(|&a| deflation_ratio(si, sj, a)).product();
                prop_assert!(product < (si / sj).powi(alphas.len() as i32));
            }
        }
    }
}

#[test]
fn failure_probabilities_decrease_in_the_knobs() {
    let grid = [1.5, 2.0, 2.5, 3.0, 4.0, 6.0];
    // Adjacent points may tie once a term drops below the ulp of the others.
    for k in 0..3 {
        for &b in &grid {
            for w in grid.windows(2) {
                let lo = params(b, w[0]);
                let hi = params(b, w[1]);
                assert!(phi_k(&hi, k).unwrap() <= phi_k(&lo, k).unwrap());
                assert!(psi_k(&hi, k).unwrap() <= psi_k(&lo, k).unwrap());
                let lo = params(w[0], b);
                let hi = params(w[1], b);
                assert!(phi_k(&hi, k).unwrap() <= phi_k(&lo, k).unwrap());
                assert!(psi_k(&hi, k).unwrap() <= psi_k(&lo, k).unwrap());
            }
            let (first, last) = (grid[0], grid[grid.len() - 1]);
            assert!(phi_k(&params(b, last), k).unwrap() < phi_k(&params(b, first), k).unwrap());
            assert!(psi_k(&params(last, b), k).unwrap() < psi_k(&params(first, b), k).unwrap());
        }
    }
    for n in [1, 3, 6] {
        let floors: Vec<f64> = [2.0, 2.5, 3.0].iter().map(|&g| largest_singular_value_floor(n, g).unwrap()).collect();
        assert!(floors.windows(2).all(|w| w[0] <= w[1]) && floors[0] < floors[2], "{floors:?}");
        let floors: Vec<f64> =
            [2.0, 2.5, 3.0].iter().map(|&b| smallest_singular_value_floor(n, n, b).unwrap()).collect();
        assert!(floors.windows(2).all(|w| w[0] <= w[1]) && floors[0] < floors[2], "{floors:?}");
    }
}
