use ndarray::Array2;
use proptest::prelude::*;

use rho_core::spectral::eigendecompose;
use rho_core::{node_homophily, Graph};

fn graph_strategy() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1usize..40).prop_flat_map(|n| (Just(n), prop::collection::vec((0..n, 0..n), 0..(3 * n))))
}

fn dot(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

proptest! {
    #[test]
    fn csr_invariants_hold((n, edges) in graph_strategy()) {
        let g = Graph::from_edges(&edges, n).unwrap();
        let offsets = g.row_offsets();
        prop_assert_eq!(offsets.len(), n + 1);
        for v in 0..n {
            prop_assert!(offsets[v] <= offsets[v + 1]);
            prop_assert_eq!(g.degree(v), offsets[v + 1] - offsets[v]);
            let row = g.neighbors(v);
            prop_assert!(row.windows(2).all(|w| w[0] < w[1]));
            for &u in row {
                prop_assert!(u != v);
                prop_assert!(g.has_edge(u, v));
            }
        }
        prop_assert_eq!(g, Graph::from_edges(&edges, n).unwrap());
    }

    #[test]
    fn laplacian_symmetric_and_psd((n, edges) in graph_strategy(), seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let g = Graph::from_edges(&edges, n).unwrap();
        let op = g.laplacian();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, 2), |_| rng.random_range(-1.0..1.0));
        let y = Array2::from_shape_fn((n, 2), |_| rng.random_range(-1.0..1.0));
        let lx = op.apply(x.view()).unwrap();
        let ly = op.apply(y.view()).unwrap();
        prop_assert!((dot(&lx, &y) - dot(&x, &ly)).abs() < 1e-10);
        prop_assert!(dot(&x, &lx) >= -1e-10);
    }

    #[test]
    fn scaled_ones_span_the_kernel((n, edges) in graph_strategy()) {
        // The null vector is D^1/2 1; it reduces to the all-ones vector on
        // regular graphs.
        let g = Graph::from_edges(&edges, n).unwrap();
        let x = Array2::from_shape_fn((n, 1), |(i, _)| (g.degree(i) as f64 + 1.0).sqrt());
        let lx = g.laplacian().apply(x.view()).unwrap();
        prop_assert!(lx.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn spectrum_in_range((n, edges) in graph_strategy()) {
        let g = Graph::from_edges(&edges, n).unwrap();
        let dec = eigendecompose(&g).unwrap();
        prop_assert!(dec.eigenvalues.iter().all(|&l| (-1e-10..2.0).contains(&l)));
        prop_assert!(dec.eigenvalues[0].abs() < 1e-8);
    }

    #[test]
    fn homophily_report_partitions_nodes((n, edges) in graph_strategy(), bits in any::<u64>()) {
        let g = Graph::from_edges(&edges, n).unwrap();
        let labels: Vec<u8> = (0..n).map(|i| ((bits >> (i % 64)) & 1) as u8).collect();
        let report = node_homophily(&g, &labels).unwrap();
        prop_assert_eq!(report.values.len() + report.excluded.len(), n);
        prop_assert!(report.values.iter().all(|&(_, h)| (0.0..=1.0).contains(&h)));
        prop_assert!(report.excluded.iter().all(|&v| g.degree(v) == 0));
    }
}
