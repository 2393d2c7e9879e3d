mod common;

use dnascape::dp::{ged, to_graph, StrandSet};
use dnascape::embed::Embedding;
use dnascape::eval::{
    avg_distortion, dbscan, diameter, embedding_points, filter_by_cumulative_time, kinetic_traps,
    local_preservation, NOISE,
};
use dnascape::multistrand::{build_dataset, Dataset, ProbabilityMode, RawTrajectory};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

use common::{gaussian, reference_dbscan, rng, structure_from_noise};

/// Random trajectories over a pool of hairpin-ish structures of `GCGCATGC`.
fn dataset(pool: usize, runs: usize, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let strands = StrandSet::from_header("GCGCATGC").unwrap();
    let mut dps: Vec<String> = Vec::new();
    while dps.len() < pool {
        let noise: Vec<u8> = (0..8).map(|_| r.random()).collect();
        let dp = structure_from_noise(&[8], &noise).dp().to_string();
        if !dps.contains(&dp) {
            dps.push(dp);
        }
    }
    let energy: Vec<f64> = (0..dps.len()).map(|_| r.random_range(-6.0..0.0)).collect();
    let raw = (0..runs)
        .map(|index| {
            let len = r.random_range(1..20);
            let mut t = 0.0;
            let steps = (0..len)
                .map(|_| {
                    let s = r.random_range(0..dps.len());
                    let step = (dps[s].clone(), t, energy[s]);
                    t += r.random_range(1e-7..1e-5);
                    step
                })
                .collect();
            RawTrajectory { index: index as u64, steps }
        })
        .collect();
    build_dataset(strands, raw, ProbabilityMode::Visits).unwrap()
}

fn layout(n: usize, seed: u64) -> Embedding {
    let mut r = rng(seed);
    Embedding::new(DMatrix::from_fn(n, 2, |_, _| gaussian(&mut r)))
}

fn moved(e: &Embedding, c: f64, angle: f64, shift: f64) -> Embedding {
    let (co, si) = (angle.cos(), angle.sin());
    let z = &e.coords;
    Embedding::new(DMatrix::from_fn(z.nrows(), 2, |i, col| {
        let (x, y) = (z[(i, 0)], z[(i, 1)]);
        c * if col == 0 { co * x - si * y } else { si * x + co * y } + shift
    }))
}

fn arb_points() -> impl Strategy<Value = (Vec<Vec<f64>>, f64, usize)> {
    (1usize..5, 1usize..120, 0.05f64..1.5, 1usize..7, any::<u64>()).prop_map(|(dim, n, eps, m, seed)| {
        let mut r = rng(seed);
        // a coarse lattice forces exact ties at the eps boundary
        let lattice = seed % 3 == 0;
        let pts = (0..n)
            .map(|_| {
                (0..dim)
                    .map(|_| if lattice { r.random_range(0..8) as f64 * 0.25 } else { 2.0 * gaussian(&mut r) })
                    .collect()
            })
            .collect();
        (pts, if lattice { 0.25 * (1 + seed as usize % 4) as f64 } else { eps }, m)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn dbscan_matches_brute_force((points, eps, m) in arb_points()) {
        let got = dbscan(&points, eps, m).unwrap();
        prop_assert_eq!(&got.labels, &reference_dbscan(&points, eps, m));
        let max = got.labels.iter().copied().max().unwrap_or(NOISE);
        prop_assert_eq!(got.n_clusters as i64, max + 1);
    }

    #[test]
    fn distortion_ignores_scale_and_rigid_motion(
        seed in any::<u64>(), c in 0.01f64..100.0, angle in 0.0f64..6.3, shift in -10.0f64..10.0,
    ) {
        let data = dataset(12, 6, seed);
        let e = layout(data.states.len(), seed);
        let a = avg_distortion(&e, &data.trajectories).unwrap();
        let b = avg_distortion(&moved(&e, c, angle, shift), &data.trajectories).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1e-12), "{a} vs {b}");
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn time_filters_nest(seed in any::<u64>(), t1 in 0.0f64..5e-5, t2 in 0.0f64..5e-5) {
        let data = dataset(15, 8, seed);
        let (lo, hi) = (t1.min(t2), t1.max(t2));
        let a = filter_by_cumulative_time(&data.states, lo).unwrap();
        let b = filter_by_cumulative_time(&data.states, hi).unwrap();
        prop_assert!(b.iter().all(|s| a.contains(s)));
        prop_assert_eq!(filter_by_cumulative_time(&data.states, 0.0).unwrap().len(), data.states.len());
        let cum = data.states.cumulative_holding_time();
        prop_assert!((0..cum.len()).all(|s| (cum[s] >= hi) == b.contains(&s)));
    }

    #[test]
    fn full_neighbourhood_is_the_all_pairs_mean(seed in any::<u64>()) {
        let data = dataset(10, 5, seed);
        let n = data.states.len();
        prop_assume!(n >= 2);
        let e = layout(n, seed);
        let graphs = data.states.graphs();
        let energies = data.states.energies();
        let t = local_preservation(&e, energies, &graphs, &[n - 1]).unwrap();
        let (mut se, mut sg) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    se += (energies[i] - energies[j]).abs();
                    sg += ged(&graphs[i], &graphs[j]).unwrap() as f64;
                }
            }
        }
        let pairs = (n * (n - 1)) as f64;
        prop_assert!((t.energy_diff[0] - se / pairs).abs() <= 1e-12 * (se / pairs).max(1.0));
        prop_assert!((t.ged_diff[0] - sg / pairs).abs() <= 1e-12 * (sg / pairs).max(1.0));
    }

    #[test]
    fn traps_are_cluster_minima_in_time_order(seed in any::<u64>()) {
        let data = dataset(30, 12, seed);
        let n = data.states.len();
        let e = layout(n, seed);
        let ids: Vec<usize> = (0..n).collect();
        let cr = dbscan(&embedding_points(&e, &ids), 0.8, 2).unwrap();
        prop_assume!(cr.n_clusters > 0);
        let traps = kinetic_traps(&cr, &data.states).unwrap();
        prop_assert_eq!(traps.len(), cr.n_clusters);
        let en = data.states.energies();
        for t in &traps {
            let members: Vec<usize> = (0..n).filter(|&i| cr.labels[i] == t.cluster).collect();
            prop_assert_eq!(t.size, members.len());
            prop_assert!(members.iter().all(|&m| en[m] > en[t.state] || (en[m] == en[t.state] && m >= t.state)));
            prop_assert_eq!(&t.dp, data.states.structure(t.state).dp());
        }
        prop_assert!(traps.windows(2).all(|w| w[0].cumulative_time >= w[1].cumulative_time));
    }

    #[test]
    fn diameter_is_the_largest_pairwise_distance(n in 1usize..60, seed in any::<u64>()) {
        let e = layout(n, seed);
        let mut best: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                best = best.max(e.distance(i, j));
            }
        }
        prop_assert_eq!(diameter(&e), best);
    }
}

#[test]
fn graphs_follow_structures() {
    let data = dataset(10, 4, 1);
    let g = data.states.graphs();
    for (i, s) in data.states.structures().iter().enumerate() {
        assert_eq!(g[i], to_graph(s));
    }
}
