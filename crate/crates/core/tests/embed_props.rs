mod common;

use dnascape::distances::{Metric, Neighbor, NeighborTable, WeightTable};
use dnascape::embed::{
    phate, smacof, stress_embed, MdsInit, Objective, PhateConfig, PhateInput, SmacofOptions,
    StressConfig, StressInit,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

use common::{gaussian, rng};

#[derive(Debug)]
struct Problem {
    mpt: NeighborTable,
    w: WeightTable,
    ged: NeighborTable,
    z: DMatrix<f64>,
}

fn table(metric: Metric, n: usize, k: usize, seed: u64, scale: f64) -> NeighborTable {
    let mut r = rng(seed);
    let rows = (0..n)
        .map(|i| {
            let mut ids: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            ids.shuffle(&mut r);
            ids.truncate(k);
            let mut row: Vec<Neighbor> = ids
                .into_iter()
                .map(|id| Neighbor { id, dist: scale * r.random_range(0.1..3.0) })
                .collect();
            row.sort_by(|a, b| a.dist.total_cmp(&b.dist).then(a.id.cmp(&b.id)));
            row
        })
        .collect();
    NeighborTable { metric, k, rows }
}

fn problem(n: usize, k: usize, seed: u64) -> Problem {
    let mpt = table(Metric::Mpt, n, k, seed, 1.0);
    let ged = table(Metric::Ged, n, k, seed ^ 0x9e37, 4.0);
    let mut r = rng(seed.wrapping_add(1));
    let p: Vec<f64> = (0..n).map(|_| r.random_range(0.01..1.0)).collect();
    let w = WeightTable::from_probabilities(&mpt, &p);
    let z = DMatrix::from_fn(n, 2, |_, _| 3.0 * gaussian(&mut r));
    Problem { mpt, w, ged, z }
}

fn arb_problem() -> impl Strategy<Value = Problem> {
    (3usize..14, any::<u64>()).prop_flat_map(|(n, seed)| (1..n).prop_map(move |k| problem(n, k, seed)))
}

fn config() -> StressConfig {
    StressConfig { mpt_weight: 0.7, ged_weight: 0.3, ..StressConfig::default() }
}

// direct sum over stored pairs
fn loss_oracle(p: &Problem, z: &DMatrix<f64>, delta: f64, eps: f64) -> f64 {
    let d = |i: usize, j: usize| (z.row(i) - z.row(j)).norm();
    let mut a = 0.0;
    for (i, row) in p.mpt.rows.iter().enumerate() {
        for (s, nb) in row.iter().enumerate() {
            a += p.w.rows[i][s] * (d(i, nb.id) - nb.dist).powi(2);
        }
    }
    let b: f64 = p.ged.pairs().map(|(i, j, t)| (d(i, j) - t).powi(2)).sum();
    delta * a + eps * b
}

fn rigid(z: &DMatrix<f64>, angle: f64, flip: bool, shift: (f64, f64)) -> DMatrix<f64> {
    let (c, s) = (angle.cos(), angle.sin());
    DMatrix::from_fn(z.nrows(), 2, |i, col| {
        let (x, y) = (z[(i, 0)], if flip { -z[(i, 1)] } else { z[(i, 1)] });
        if col == 0 { c * x - s * y + shift.0 } else { s * x + c * y + shift.1 }
    })
}

fn pairwise(z: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(z.nrows(), z.nrows(), |i, j| (z.row(i) - z.row(j)).norm())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn objective_matches_direct_sum(p in arb_problem()) {
        let obj = Objective::new(&p.mpt, &p.w, &p.ged, &config()).unwrap();
        let got = obj.value(&p.z).unwrap();
        let want = loss_oracle(&p, &p.z, 0.7, 0.3);
        prop_assert!((got - want).abs() <= 1e-12 * want.max(1.0));
    }

    #[test]
    fn objective_is_rigid_motion_invariant(
        p in arb_problem(), angle in 0.0f64..6.3, flip in any::<bool>(), dx in -50.0f64..50.0, dy in -50.0f64..50.0,
    ) {
        let obj = Objective::new(&p.mpt, &p.w, &p.ged, &config()).unwrap();
        let a = obj.value(&p.z).unwrap();
        let b = obj.value(&rigid(&p.z, angle, flip, (dx, dy))).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0), "{a} vs {b}");
    }

    #[test]
    fn gradient_matches_finite_differences(p in arb_problem()) {
        let obj = Objective::new(&p.mpt, &p.w, &p.ged, &config()).unwrap();
        let (_, g) = obj.value_and_gradient(&p.z).unwrap();
        let h = 1e-6;
        let scale = g.amax().max(1e-3);
        for i in 0..p.z.nrows() {
            for c in 0..2 {
                let (mut up, mut down) = (p.z.clone(), p.z.clone());
                up[(i, c)] += h;
                down[(i, c)] -= h;
                let fd = (obj.value(&up).unwrap() - obj.value(&down).unwrap()) / (2.0 * h);
                prop_assert!((fd - g[(i, c)]).abs() <= 1e-5 * scale, "({i},{c}): {fd} vs {}", g[(i, c)]);
            }
        }
    }

    #[test]
    fn descent_never_increases_the_loss(p in arb_problem()) {
        let cfg = StressConfig { max_iter: 200, ..config() };
        let res = stress_embed(&p.mpt, &p.w, &p.ged, &cfg, &StressInit::Coords(p.z.clone())).unwrap();
        prop_assert!(res.loss_trace.windows(2).all(|w| w[1] <= w[0]));
        let last = *res.loss_trace.last().unwrap();
        prop_assert!((last - loss_oracle(&p, &res.embedding.coords, 0.7, 0.3)).abs() <= 1e-9 * last.max(1.0));
    }

    #[test]
    fn smacof_stress_is_monotone_and_reported_exactly(n in 3usize..25, seed in any::<u64>()) {
        let mut r = rng(seed);
        let x = DMatrix::from_fn(n, 4, |_, _| gaussian(&mut r));
        let d = pairwise(&x);
        let res = smacof(&d, &SmacofOptions { init: MdsInit::Random, seed, ..SmacofOptions::default() }).unwrap();
        prop_assert!(res.stress_trace.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-15));
        let e = pairwise(&res.coords);
        let mut oracle = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                oracle += (e[(i, j)] - d[(i, j)]).powi(2);
            }
        }
        prop_assert!((res.final_stress() - oracle).abs() <= 1e-10 * oracle.max(1e-9));
    }
}

fn features(n: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng(seed);
    DMatrix::from_fn(n, 6, |i, _| gaussian(&mut r) + if i % 3 == 0 { 4.0 } else { 0.0 })
}

#[test]
fn phate_is_permutation_equivariant() {
    for seed in 0..4 {
        let x = features(45, seed);
        let mut perm: Vec<usize> = (0..45).collect();
        perm.shuffle(&mut rng(seed + 100));
        let xp = DMatrix::from_fn(45, 6, |i, c| x[(perm[i], c)]);
        let cfg = PhateConfig::default();
        let a = phate(PhateInput::Features(&x), &cfg).unwrap();
        let b = phate(PhateInput::Features(&xp), &cfg).unwrap();
        assert_eq!(a.t, b.t);
        let (da, db) = (pairwise(&a.embedding.coords), pairwise(&b.embedding.coords));
        let tol = 1e-6 * da.amax();
        for i in 0..45 {
            for j in 0..45 {
                assert!((da[(perm[i], perm[j])] - db[(i, j)]).abs() <= tol, "seed {seed} ({i},{j})");
            }
        }
    }
}

#[test]
fn phate_ignores_feature_scale_and_offset() {
    // bandwidths are set per point from the k-th neighbour, so the kernel
    // depends only on distance ratios
    let x = features(40, 9);
    let y = x.map(|v| 250.0 * v - 17.0);
    let cfg = PhateConfig::default();
    let a = phate(PhateInput::Features(&x), &cfg).unwrap();
    let b = phate(PhateInput::Features(&y), &cfg).unwrap();
    assert_eq!(a.t, b.t);
    let (da, db) = (pairwise(&a.embedding.coords), pairwise(&b.embedding.coords));
    assert!((da - db).amax() <= 1e-6 * pairwise(&a.embedding.coords).amax());
}
