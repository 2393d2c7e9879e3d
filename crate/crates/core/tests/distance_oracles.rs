mod common;

use dnascape::distances::{
    dijkstra_k, ged_knn, ged_pair, mpt_knn, ForestConfig, Neighbor, SearchMode, WeightedDigraph,
};
use dnascape::dp::{to_graph, StateGraph};
use proptest::prelude::*;

use common::{arb_structure, bellman_ford, walk_structures};

fn arb_digraph() -> impl Strategy<Value = WeightedDigraph> {
    (2usize..20).prop_flat_map(|n| {
        proptest::collection::vec(proptest::collection::vec((0..n, 1e-9f64..1e-6), 0..4), n)
            .prop_map(|out| WeightedDigraph {
                out: out
                    .into_iter()
                    .enumerate()
                    .map(|(i, row)| row.into_iter().filter(|&(j, _)| j != i).collect())
                    .collect(),
            })
    })
}

fn dense_l1(a: &StateGraph, b: &StateGraph) -> f64 {
    (a.adjacency() - b.adjacency()).abs().sum()
}

fn sorted_truth(row: Vec<Neighbor>, k: usize) -> Vec<f64> {
    let mut d: Vec<f64> = row.into_iter().map(|x| x.dist).collect();
    d.sort_by(f64::total_cmp);
    d.truncate(k);
    d
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn dijkstra_matches_bellman_ford(g in arb_digraph(), k in 1usize..25) {
        let n = g.node_count();
        let table = mpt_knn(&g, &(0..n).collect::<Vec<_>>(), k);
        for s in 0..n {
            let truth = bellman_ford(&g, s);
            let reachable: Vec<Neighbor> = (0..n)
                .filter(|&j| j != s && truth[j].is_finite())
                .map(|j| Neighbor { id: j, dist: truth[j] })
                .collect();
            let want = sorted_truth(reachable, k);
            let row = &table.rows[s];
            prop_assert_eq!(row.len(), want.len());
            for (got, w) in row.iter().zip(&want) {
                prop_assert!((got.dist - w).abs() <= 1e-12 * w.max(1e-12));
                prop_assert!((truth[got.id] - got.dist).abs() <= 1e-12 * got.dist.max(1e-12));
            }
            prop_assert!(row.windows(2).all(|w| (w[0].dist, w[0].id) < (w[1].dist, w[1].id)));
            prop_assert_eq!(&dijkstra_k(&g, s, k), row);
        }
    }

    #[test]
    fn exact_ged_table_matches_brute_force(
        structs in proptest::collection::vec(arb_structure(vec![6, 5]), 2..14),
        k in 1usize..6,
    ) {
        let graphs: Vec<StateGraph> = structs.iter().map(to_graph).collect();
        let table = ged_knn(&graphs, k, SearchMode::Exact).unwrap();
        for (i, row) in table.rows.iter().enumerate() {
            let all: Vec<Neighbor> = (0..graphs.len())
                .filter(|&j| j != i)
                .map(|j| Neighbor { id: j, dist: dense_l1(&graphs[i], &graphs[j]) })
                .collect();
            let want = sorted_truth(all, k);
            let got: Vec<f64> = row.iter().map(|x| x.dist).collect();
            prop_assert_eq!(got, want);
            for x in row {
                prop_assert_eq!(ged_pair(&graphs[i], &graphs[x.id]).unwrap(), x.dist);
            }
        }
    }
}

#[test]
fn forest_recall_on_walk_structures() {
    let graphs: Vec<StateGraph> = walk_structures(&[20, 20], 2000, 200, 3).iter().map(to_graph).collect();
    let k = 10;
    let exact = ged_knn(&graphs, k, SearchMode::Exact).unwrap();
    let approx = ged_knn(&graphs, k, SearchMode::RandomProjection(ForestConfig::default())).unwrap();
    let mut hits = 0usize;
    for (e, a) in exact.rows.iter().zip(&approx.rows) {
        // count by distance so ties at the k-th rank do not penalize
        let kth = e.last().unwrap().dist;
        hits += a.iter().filter(|x| x.dist <= kth).count().min(k);
    }
    let recall = hits as f64 / (k * graphs.len()) as f64;
    assert!(recall >= 0.9, "recall {recall}");
}
