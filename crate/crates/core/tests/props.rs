mod common;

use common::brute_force_minimal;
use depin::certificate::Model;
use depin::field::{ObstacleField, ObstacleShape, StrengthDistribution};
use depin::mcf::{breakdown, Jet};
use depin::percolation::{minimal_lipschitz_surface, minimal_lipschitz_surface_with_order, SiteField, Torus};
use depin::qew::LocalProfileQew;
use depin::sim::{comparison_check, Grid, Simulation};
use proptest::prelude::*;

fn small_sites() -> impl Strategy<Value = SiteField> {
    (prop_oneof![(1usize..=6).prop_map(|s| vec![s]), (1usize..=2, 1usize..=3).prop_map(|(a, b)| vec![a, b])], 1usize..=4)
        .prop_flat_map(|(dims, cap)| {
            let len: usize = dims.iter().product::<usize>() * cap;
            (Just(dims), Just(cap), proptest::collection::vec(proptest::bool::weighted(0.8), len))
        })
        .prop_map(|(dims, cap, open)| {
            SiteField::from_fn(Torus::new(dims).unwrap(), cap, |k, j| open[k * cap + j - 1])
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn surface_is_the_brute_force_minimum(sites in small_sites()) {
        let oracle = brute_force_minimal(&sites);
        match minimal_lipschitz_surface(&sites) {
            Ok(l) => {
                l.validate(&sites).unwrap();
                prop_assert_eq!(Some(l.heights().to_vec()), oracle);
            }
            Err(_) => prop_assert_eq!(oracle, None),
        }
    }

    #[test]
    fn sweep_order_does_not_matter(sites in small_sites(), key in any::<u64>()) {
        let len = sites.torus().len();
        let mut order: Vec<usize> = (0..len).collect();
        // Fisher-Yates with a splitmix-style key so the permutation is shrinkable
        let mut state = key;
        for i in (1..len).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (state >> 33) as usize % (i + 1));
        }
        let a = minimal_lipschitz_surface(&sites).map(|l| l.heights().to_vec()).ok();
        let b = minimal_lipschitz_surface_with_order(&sites, &order).map(|l| l.heights().to_vec()).ok();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn opening_sites_never_raises_the_surface(sites in small_sites(), extra in 0usize..64) {
        let cap = sites.height_cap();
        let len = sites.torus().len();
        let target = extra % (len * cap);
        let more = SiteField::from_fn(sites.torus().clone(), cap, |k, j| sites.is_open(k, j) || k * cap + j - 1 == target);
        if let Ok(l) = minimal_lipschitz_surface(&sites) {
            let m = minimal_lipschitz_surface(&more).unwrap();
            prop_assert!(m.heights().iter().zip(l.heights()).all(|(a, b)| a <= b));
        }
    }

    #[test]
    fn profile_is_nondecreasing_and_continuous(
        n in 1usize..=3,
        r_in in 0.05f64..1.0,
        ratio in 1.05f64..5.0,
        f_in in 0.1f64..50.0,
        f_out in -5.0f64..-1e-3,
    ) {
        let p = LocalProfileQew::new(n, r_in, r_in * ratio, f_in, f_out).unwrap();
        prop_assert_eq!(p.v_local(r_in), 0.0);
        prop_assert!((p.v_local(0.0) + p.depth()).abs() <= 1e-12 * p.depth().max(1.0));
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=200 {
            let r = p.r_out * k as f64 / 200.0;
            let v = p.v_local(r);
            prop_assert!(v >= prev - 1e-12 * v.abs().max(1.0), "r {} v {} prev {}", r, v, prev);
            prev = v;
        }
        prop_assert!(p.v_out(p.r_out).unwrap().1.abs() <= 1e-12 * f_out.abs() * p.r_out);
    }

    #[test]
    fn breakdown_reassembles_curvature(
        n in 1usize..=3,
        w in proptest::collection::vec(-2.0f64..2.0, 12),
        g in proptest::collection::vec(-0.5f64..0.5, 12),
    ) {
        let jet = |v: &[f64]| {
            let mut hess = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    hess[i * n + j] = 0.5 * (v[3 + i * 3 + j] + v[3 + j * 3 + i]);
                }
            }
            Jet { grad: v[..n].to_vec(), hess }
        };
        let (w, g) = (jet(&w), jet(&g));
        let b = breakdown(&w, &g);
        let exact = w.add(&g).mean_curvature();
        prop_assert!((b.total() - exact).abs() <= 1e-12 * (1.0 + exact.abs()), "{} vs {}", b.total(), exact);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn qew_steps_preserve_order(
        seed in 1u64..1000,
        base in proptest::collection::vec(-1.0f64..3.0, 64),
        gap in proptest::collection::vec(0.0f64..0.5, 64),
        force in -2.0f64..6.0,
    ) {
        let shape = ObstacleShape::new(1, 0.25, 0.4, 0.2).unwrap();
        let dist = StrengthDistribution::Constant { value: 10.0 };
        let field = ObstacleField::sample_periodic(&[8.0], (0.4, 8.0), 1.0, dist, shape, seed).unwrap();
        let sim = Simulation::new(Grid::new(1, 64, 8.0).unwrap(), field, Model::Qew).unwrap();
        let high: Vec<f64> = base.iter().zip(&gap).map(|(a, b)| a + b).collect();
        prop_assert!(comparison_check(&sim, base, high, force, 50).unwrap());
    }
}
