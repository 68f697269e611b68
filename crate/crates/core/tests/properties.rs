use proptest::prelude::*;
use std::sync::Arc;

use lsgraph::curve::hardy_weinberg_arclength;
use lsgraph::distribution::{BetaParams, Underlying};
use lsgraph::graph::{lsm_latent_positions, sample_lsm, sample_rdpg, AdjacencyMatrix, LsmSpec};
use lsgraph::hypothesis::ks_statistic;
use lsgraph::inference::{clamp_to_interior, fit_beta, lsm_m_estimate};
use lsgraph::io::{format_edge_list, parse_edge_list};
use lsgraph::spectral::procrustes;

fn unit_vectors(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, d).prop_filter_map("nonzero", |v| {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        (n > 1e-3).then(|| v.iter().map(|x| x / n).collect())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sampled_graphs_are_hollow_symmetric_binary(t in prop::collection::vec(0.0f64..=1.0, 2..30), seed in any::<u64>()) {
        let curve = hardy_weinberg_arclength();
        let x = lsm_latent_positions(&curve, &t).unwrap();
        let a = sample_rdpg(&x, 1.0, seed).unwrap();
        let b = sample_rdpg(&x, 1.0, seed).unwrap();
        prop_assert_eq!(&a, &b);
        for i in 0..a.n() {
            prop_assert_eq!(a.get(i, i), 0.0);
            for j in 0..a.n() {
                let v = a.get(i, j);
                prop_assert!(v == 0.0 || v == 1.0);
                prop_assert_eq!(v, a.get(j, i));
            }
        }
    }

    #[test]
    fn edge_list_round_trip(n in 1usize..40, raw in prop::collection::vec((0usize..40, 0usize..40), 0..80)) {
        let edges: Vec<(usize, usize)> = raw.into_iter().filter(|(i, j)| i != j && *i < n && *j < n).collect();
        let a = AdjacencyMatrix::from_edges(n, &edges).unwrap();
        prop_assert_eq!(parse_edge_list(&format_edge_list(&a)).unwrap(), a);
    }

    #[test]
    fn ks_symmetric_bounded_and_rank_based(
        y1 in prop::collection::vec(-5.0f64..5.0, 1..40),
        y2 in prop::collection::vec(-5.0f64..5.0, 1..40),
    ) {
        let d = ks_statistic(&y1, &y2);
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(d, ks_statistic(&y2, &y1));
        let f = |v: &Vec<f64>| v.iter().map(|x| x.exp() + 3.0 * x).collect::<Vec<_>>();
        prop_assert_eq!(d, ks_statistic(&f(&y1), &f(&y2)));
    }

    #[test]
    fn clamped_values_are_interior(y in prop::collection::vec(0.0f64..=1.0, 1..50), eps in 1e-9f64..0.1) {
        let (c, moved) = clamp_to_interior(&y, eps).unwrap();
        prop_assert!(c.iter().all(|v| *v >= eps && *v <= 1.0 - eps));
        let expected = y.iter().filter(|v| **v < eps || **v > 1.0 - eps).count();
        prop_assert_eq!(moved, expected);
    }

    #[test]
    fn beta_fit_reaches_stationary_point(a in 0.5f64..6.0, b in 0.5f64..6.0, seed in any::<u64>()) {
        use rand_distr::{Beta, Distribution};
        let mut rng = lsgraph::rng::rng_from_seed(seed);
        let dist = Beta::new(a, b).unwrap();
        let y: Vec<f64> = (0..300).map(|_| dist.sample(&mut rng)).collect();
        let (y, _) = clamp_to_interior(&y, 1e-6).unwrap();
        let fit = fit_beta(&y).unwrap();
        prop_assert!(fit.converged);
        prop_assert!(fit.score_norm < 1e-8, "score {}", fit.score_norm);
    }

    #[test]
    fn procrustes_returns_orthogonal_map(rows in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 3..20)) {
        let x = lsgraph::graph::LatentPositionMatrix::from_rows(&rows).unwrap();
        let y = lsgraph::graph::LatentPositionMatrix::from_rows(
            &rows.iter().map(|r| vec![r[1], -r[0], r[2] + 0.1]).collect::<Vec<_>>(),
        ).unwrap();
        let w = procrustes(&x, &y).unwrap().w;
        let err = (w.transpose() * &w - nalgebra::DMatrix::<f64>::identity(3, 3)).norm();
        prop_assert!(err < 1e-10);
    }

    #[test]
    fn pullback_is_lipschitz_in_the_tube(s in 0.0f64..=1.0, normal in unit_vectors(3), step in unit_vectors(3), r in 0.0f64..0.99, h in 1e-6f64..1e-3) {
        let curve = hardy_weinberg_arclength();
        let base = curve.point(s).unwrap();
        let tangent = curve.base().derivative(curve.base_param(s));
        let tn = tangent.iter().map(|v| v * v).sum::<f64>().sqrt();
        let dot: f64 = normal.iter().zip(&tangent).map(|(a, b)| a * b / tn).sum();
        let mut nrm: Vec<f64> = normal.iter().zip(&tangent).map(|(a, b)| a - dot * b / tn).collect();
        let nn = nrm.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assume!(nn > 1e-3);
        nrm.iter_mut().for_each(|v| *v /= nn);
        let radius = r * curve.tube().r1;
        let x: Vec<f64> = base.iter().zip(&nrm).map(|(p, q)| p + radius * q).collect();
        let y: Vec<f64> = x.iter().zip(&step).map(|(p, q)| p + h * q).collect();
        let ds = (curve.project(&x).s - curve.project(&y).s).abs();
        // Nearest-point maps are (1 - r1/rho)^-1 Lipschitz inside the tube,
        // r1 <= rho/4, and s is arclength over the total length.
        let bound = 4.0 / (3.0 * curve.length());
        prop_assert!(ds <= bound * h + 1e-9, "ds {} vs {}", ds, bound * h);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn m_estimate_ignores_row_order(seed in any::<u64>(), shift in 1usize..100) {
        let curve = Arc::new(hardy_weinberg_arclength());
        let spec = LsmSpec {
            curve: curve.clone(),
            underlying: Underlying::Beta(BetaParams::new(1.5, 2.5).unwrap()),
            n: 150,
            sparsity: 1.0,
        };
        let s = sample_lsm(&spec, seed).unwrap();
        let noisy = lsgraph::graph::LatentPositionMatrix::from_rows(
            &s.latent.to_rows().iter().enumerate().map(|(i, r)| {
                r.iter().enumerate().map(|(k, v)| v + 0.01 * (((i * 7 + k * 3) % 11) as f64 / 11.0 - 0.5)).collect()
            }).collect::<Vec<_>>(),
        ).unwrap();
        let perm: Vec<usize> = (0..150).map(|i| (i * 7 + shift) % 150).collect();
        let e1 = lsm_m_estimate(&noisy, &curve, 1e-6).unwrap();
        let e2 = lsm_m_estimate(&noisy.permuted(&perm), &curve, 1e-6).unwrap();
        prop_assert!((e1.fit.theta.a - e2.fit.theta.a).abs() < 1e-10);
        prop_assert!((e1.fit.theta.b - e2.fit.theta.b).abs() < 1e-10);
    }
}
