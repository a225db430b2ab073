use clusterperm::blocks::stacked_family;
use clusterperm::dyadic::{pvalue_from_statistics, PreparedTest};
use clusterperm::missing::{
    biclique_decompose, max_biclique_exact, max_biclique_greedy, procedure2, procedure2_family, BicliqueCover, Mask,
    Solver,
};
use clusterperm::model::{permute_rows, Cell, DyadArray, Permutation};
use clusterperm::multiway::{layout_blocks, MultiIndexDataset, Record};
use clusterperm::permgroup::{build_cyclic_family, build_two_way_group, verify_group, CyclicFamilySpec};
use clusterperm::projector::{projector_matrix_svd, RankTol, ResidualProjector};
use clusterperm::rng::{stream, sub_seed};
use clusterperm::sim::{gen_dyadic_dataset, mc_map, CovTransform, DyadicDgp};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn mask_strategy(max_side: usize) -> impl Strategy<Value = Mask> {
    (1..=max_side, 1..=max_side).prop_flat_map(|(r, c)| {
        proptest::collection::vec(any::<bool>(), r * c).prop_map(move |bits| Mask::new(r, c, bits).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cyclic_family_is_a_group(n in 1usize..40, k in 1usize..12, seed in any::<u64>()) {
        let family = build_cyclic_family(&CyclicFamilySpec::range(n, k, seed).unwrap());
        prop_assert_eq!(family.len(), k + 1);
        prop_assert!(verify_group(&family));
        for g in &family {
            prop_assert!(g.compose(&g.inverse()).unwrap().is_identity());
        }
    }

    #[test]
    fn inverse_member_is_in_the_family(n in 2usize..40, k in 1usize..10, seed in any::<u64>()) {
        let family = build_cyclic_family(&CyclicFamilySpec::range(n, k, seed).unwrap());
        for r in 0..=k {
            let inv = family[r].inverse();
            prop_assert_eq!(&inv, &family[(k + 1 - r) % (k + 1)]);
        }
    }

    #[test]
    fn stacked_two_way_members_permute_cells(m in 2usize..12, n in 2usize..12, k in 1usize..6, seed in any::<u64>()) {
        let family = build_two_way_group(m, n, k, seed).unwrap();
        for map in family.stacked_maps() {
            let mut seen = map.clone();
            seen.sort_unstable();
            prop_assert_eq!(seen, (0..m * n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn projector_annihilates_both_designs(n_obs in 12usize..80, p in 1usize..4, seed in any::<u64>()) {
        let mut rng = stream(seed, "prop-projector", 0);
        let mut x = DMatrix::from_fn(n_obs, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        x.column_mut(0).fill(1.0);
        let map: Vec<usize> = (0..n_obs).map(|r| (r * 7 + 3) % n_obs).collect();
        let map = if n_obs % 7 == 0 { (0..n_obs).rev().collect() } else { map };
        let xp = permute_rows(&x, &map);
        let proj = ResidualProjector::new(&x, &xp, RankTol::Default).unwrap();
        prop_assert!(proj.project_matrix(&x).unwrap().amax() < 1e-10);
        prop_assert!(proj.project_matrix(&xp).unwrap().amax() < 1e-10);
        let v = proj.complement();
        let gram = v.transpose() * &v;
        prop_assert!((gram - DMatrix::identity(proj.dim(), proj.dim())).amax() < 1e-10);
    }

    #[test]
    fn greedy_is_valid_and_bounded_by_exact(mask in mask_strategy(9), seed in any::<u64>()) {
        prop_assume!(!mask.is_empty());
        let exact = max_biclique_exact(&mask).unwrap();
        let greedy = max_biclique_greedy(&mask, 5, seed).unwrap();
        prop_assert!(mask.is_fully_observed(&greedy.rows, &greedy.cols));
        prop_assert!(greedy.size() <= exact.size());
    }

    #[test]
    fn decomposition_blocks_are_disjoint(mask in mask_strategy(12), seed in any::<u64>(), min_block in 1usize..4) {
        let cover = biclique_decompose(&mask, Solver::Greedy { restarts: 4, seed }, min_block).unwrap();
        prop_assert!(cover.is_valid_for(&mask));
        for b in &cover.blocks {
            prop_assert!(b.rows.len() >= min_block && b.cols.len() >= min_block);
        }
        prop_assert!(cover.cell_count() <= mask.count());
    }

    #[test]
    fn pvalue_lies_on_the_grid(a in proptest::collection::vec(0.0f64..10.0, 1..30), seed in any::<u64>()) {
        let mut rng = stream(seed, "prop-grid", 0);
        let b: Vec<f64> = a.iter().map(|_| rng.random_range(0.0..10.0)).collect();
        let p = pvalue_from_statistics(&a, &b).unwrap();
        let scaled = p * (a.len() + 1) as f64;
        prop_assert!((scaled - scaled.round()).abs() < 1e-9);
        prop_assert!(p >= 1.0 / (a.len() + 1) as f64 && p <= 1.0);
    }
}

#[test]
fn procedure2_family_is_a_group_on_a_block_diagonal_mask() {
    let mask = Mask::from_fn(12, 10, |i, j| (i <= 6) == (j <= 5));
    let cover = biclique_decompose(&mask, Solver::Exact, 2).unwrap();
    assert_eq!(cover.blocks.len(), 2);
    let family = procedure2_family(&cover, 4, 3).unwrap();
    assert!(verify_group(&family));
}

#[test]
fn layout_family_is_a_group() {
    let mut records = Vec::new();
    for (i, j, count) in [(1, 1, 5), (1, 2, 3), (2, 2, 6)] {
        for l in 1..=count {
            records.push(Record { i, j, l, y: l as f64, d: vec![0.1 * l as f64], x: vec![1.0] });
        }
    }
    let data = MultiIndexDataset::new(records, 2, 2).unwrap();
    let blocks = layout_blocks(&data, 2, 11).unwrap();
    let family: Vec<Permutation> = stacked_family(&blocks, data.records().len()).unwrap();
    assert!(verify_group(&family));
}

/// Two 20 x 20 fully observed blocks on a 40 x 40 grid; K = 19 moves every
/// row and column of both blocks, so the test is far from degenerate.
#[test]
fn procedure2_size_on_block_structured_missingness() {
    let mask = Mask::from_fn(40, 40, |i, j| (i <= 20) == (j <= 20));
    let cover = BicliqueCover {
        blocks: vec![
            clusterperm::missing::Biclique { rows: (1..=20).collect(), cols: (1..=20).collect() },
            clusterperm::missing::Biclique { rows: (21..=40).collect(), cols: (21..=40).collect() },
        ],
    };
    let dgp = DyadicDgp::table1(40, CovTransform::Normal, 0.15);
    let reps = 200;
    let pvals = mc_map(reps, 5, |s| {
        let mut array = gen_dyadic_dataset(&dgp, sub_seed(s, "data", 0))?.array;
        for i in 1..=40 {
            for j in 1..=40 {
                if !mask.get(i, j) {
                    array.clear(i, j)?;
                }
            }
        }
        Ok(procedure2(&array, &mask, &cover, 19, sub_seed(s, "group", 0))?.pval)
    })
    .unwrap();
    let rate = pvals.iter().filter(|&&p| p <= 0.05).count() as f64 / reps as f64;
    let se = (0.05f64 * 0.95 / reps as f64).sqrt();
    assert!(rate <= 0.05 + 3.0 * se, "rate {rate}");
    assert!(pvals.iter().any(|&p| p < 0.5), "test never moved away from 1");
}

/// Statistics from the linear summaries against `‖Dᵀ P (y − D b0)‖` with the
/// dense projector of the SVD route.
#[test]
fn prepared_statistics_match_dense_projector() {
    let mut rng = stream(8, "direct", 0);
    let (m, n) = (10, 10);
    let array = DyadArray::from_fn(m, n, |_, _| {
        let x1: f64 = rng.sample(StandardNormal);
        let d1: f64 = rng.sample(StandardNormal);
        let d2: f64 = rng.sample(StandardNormal);
        let e: f64 = rng.sample(StandardNormal);
        Cell { y: x1 + 0.3 * d1 + e, d: vec![d1, d2], x: vec![1.0, x1] }
    })
    .unwrap();
    let design = array.stack_all().unwrap();
    let family = build_two_way_group(m, n, 4, 2).unwrap();
    let prepared = PreparedTest::from_family(&design.x, &design.d, &design.y, &family, RankTol::Default).unwrap();
    for b0 in [DVector::zeros(2), DVector::from_vec(vec![0.3, -1.2])] {
        let (a, b) = prepared.statistics(&b0);
        let resid = &design.y - &design.d * &b0;
        for (k, map) in family.stacked_maps().iter().enumerate() {
            let xg = permute_rows(&design.x, map);
            let (p, _) = projector_matrix_svd(&design.x, &xg, RankTol::Default).unwrap();
            let resid_g = DVector::from_fn(resid.len(), |r, _| resid[map[r]]);
            let direct_a = (design.d.transpose() * &p * &resid).norm();
            let direct_b = (design.d.transpose() * &p * &resid_g).norm();
            assert!((a[k] - direct_a).abs() < 1e-9 * direct_a.max(1.0), "a_{k}: {} vs {direct_a}", a[k]);
            assert!((b[k] - direct_b).abs() < 1e-9 * direct_b.max(1.0), "b_{k}");
        }
    }
}
