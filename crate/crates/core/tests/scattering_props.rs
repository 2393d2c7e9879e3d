mod common;

use dnascape::dp::to_graph;
use dnascape::scattering::{lazy_walk, scatter, wavelets, Aggregation, Order, ScatteringConfig};
use nalgebra::DMatrix;
use proptest::prelude::*;

use common::{arb_lengths, arb_structure};

fn arb_graph() -> impl Strategy<Value = dnascape::StateGraph> {
    arb_lengths().prop_flat_map(arb_structure).prop_map(|s| to_graph(&s))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn walk_is_column_stochastic_with_degree_fixed_point(g in arb_graph()) {
        let p = lazy_walk(&g).unwrap();
        let n = g.node_count();
        for j in 0..n {
            prop_assert!((p.column(j).sum() - 1.0).abs() < 1e-12);
            prop_assert!(p.column(j).iter().all(|&x| x >= 0.0));
        }
        let d = nalgebra::DVector::from_iterator(n, g.degrees().iter().map(|&x| x as f64));
        prop_assert!((&p * &d - &d).amax() < 1e-12);
    }

    #[test]
    fn wavelets_telescope_back_to_the_walk(g in arb_graph(), scales in 1u32..5) {
        let p = lazy_walk(&g).unwrap();
        let (psi, powers) = wavelets(&p, scales);
        let d = nalgebra::DVector::from_iterator(g.node_count(), g.degrees().iter().map(|&x| x as f64));
        let mut sum: DMatrix<f64> = powers.last().unwrap().clone();
        for m in &psi {
            sum += m;
            // 1ᵀ Ψ_j = 0 and Ψ_j d = 0
            for c in m.column_iter() {
                prop_assert!(c.sum().abs() < 1e-10);
            }
            prop_assert!((m * &d).amax() < 1e-10);
        }
        prop_assert!((sum - p).amax() < 1e-12);
    }

    #[test]
    fn feature_sizes_and_lowpass_mass(g in arb_graph(), scales in 1u32..4, second in any::<bool>()) {
        let n = g.node_count();
        let j = scales as usize;
        let order = if second { Order::Second } else { Order::First };
        let filters = 1 + j + if second { j * (j - 1) / 2 } else { 0 };
        let node = ScatteringConfig { scales, lowpass_power: 8, order, aggregation: Aggregation::NodeWise };
        let v = scatter(&g, &node).unwrap();
        prop_assert_eq!(v.values.len(), filters * n * n);
        prop_assert!(v.values.iter().all(|x| x.is_finite() && *x >= 0.0));

        let moments = ScatteringConfig { aggregation: Aggregation::Moments(vec![1, 2]), ..node };
        let m = scatter(&g, &moments).unwrap();
        prop_assert_eq!(m.values.len(), filters * n * 2);
        // low-pass responses are probability vectors: first moment is one
        for signal in 0..n {
            prop_assert!((m.values[2 * signal] - 1.0).abs() < 1e-10);
            prop_assert!(m.values[2 * signal + 1] <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn scattering_is_a_function_of_the_graph(g in arb_graph()) {
        let c = ScatteringConfig { order: Order::Second, ..ScatteringConfig::default() };
        prop_assert_eq!(scatter(&g, &c).unwrap(), scatter(&g.clone(), &c).unwrap());
    }
}
