use proptest::prelude::*;

use truncfock::fock::{car_ccr_residual, FockBasis, Statistics};
use truncfock::linalg::{c, trace, CVec};
use truncfock::localization::{localize_via_formula, trace_complementarity_check};
use truncfock::onebody::{ims_identity_residual, ims_partition, kinetic_operator, LocalizationOperator, OneBodyOperator, OneBodySpace, TwoBodyKernel, WindowProfile};
use truncfock::random;
use truncfock::solvers::exact::ground_state;
use truncfock::solvers::finite_rank::hf_energy;
use truncfock::states::{blocks_from_density_matrices, density_matrix, density_matrix_table, random_nbody, random_state, MixedState};

fn stats() -> impl Strategy<Value = Statistics> {
    prop_oneof![Just(Statistics::Fermion), Just(Statistics::Boson)]
}

fn vector(r: usize) -> impl Strategy<Value = CVec> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), r)
        .prop_filter("nonzero", |v| v.iter().any(|(a, b)| a.abs() + b.abs() > 1e-3))
        .prop_map(|v| {
            let f = CVec::from_iterator(v.len(), v.into_iter().map(|(a, b)| truncfock::linalg::C64::new(a, b)));
            &f / c(f.norm())
        })
}

fn localizer(seed: u64, r: usize) -> LocalizationOperator {
    let mut rng = random::rng(seed);
    let scale = random::uniform(&mut rng, 0.2, 1.0);
    LocalizationOperator::new(random::contraction(&mut rng, r, scale)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn car_holds_on_every_pair(f in vector(4), g in vector(4)) {
        let basis = FockBasis::new(4, 3, Statistics::Fermion).unwrap();
        prop_assert!(car_ccr_residual(&basis, &f, &g).unwrap() <= 1e-12);
    }

    #[test]
    fn ccr_holds_below_the_top_sector(f in vector(3), g in vector(3)) {
        let basis = FockBasis::new(3, 4, Statistics::Boson).unwrap();
        prop_assert!(car_ccr_residual(&basis, &f, &g).unwrap() <= 1e-12);
    }

    #[test]
    fn density_matrices_determine_the_state(seed in any::<u64>(), r in 1usize..6, n in 1usize..4, s in stats(), rank in 1usize..4) {
        prop_assume!(s == Statistics::Boson || n <= r);
        let basis = FockBasis::new(r, n, s).unwrap();
        let state = random_state(&mut random::rng(seed), &basis, rank);
        let back = blocks_from_density_matrices(&basis, &density_matrix_table(&basis, &state).unwrap()).unwrap();
        prop_assert!(back.max_block_deviation(&state) <= 1e-10);
    }

    #[test]
    fn nbody_traces_are_binomial(seed in any::<u64>(), n in 1usize..4, s in stats()) {
        let basis = FockBasis::new(4, n, s).unwrap();
        let st = MixedState::nbody(&basis, n, &random_nbody(&mut random::rng(seed), &basis, n)).unwrap();
        for p in 0..=n {
            let tr = trace(&density_matrix(&basis, &st, p, p).unwrap().matrix).re;
            prop_assert!((tr - truncfock::linalg::binomial(n, p)).abs() <= 1e-10);
        }
    }

    #[test]
    fn localization_yields_a_state(seed in any::<u64>(), r in 2usize..5, n in 1usize..4, s in stats()) {
        prop_assume!(s == Statistics::Boson || n <= r);
        let basis = FockBasis::new(r, n, s).unwrap();
        let state = random_state(&mut random::rng(seed), &basis, 2);
        let out = localize_via_formula(&basis, &state, &localizer(seed ^ 1, r)).unwrap();
        prop_assert!((out.trace() - 1.0).abs() <= 1e-10);
        prop_assert!(out.min_eigenvalue() >= -1e-10);
    }

    #[test]
    fn localized_sectors_are_complementary(seed in any::<u64>(), n in 1usize..4, s in stats()) {
        let basis = FockBasis::new(3, n, s).unwrap();
        let st = MixedState::nbody(&basis, n, &random_nbody(&mut random::rng(seed), &basis, n)).unwrap();
        prop_assert!(trace_complementarity_check(&basis, &st, n, &localizer(seed ^ 2, 3)).unwrap() <= 1e-10);
    }

    #[test]
    fn ims_splits_any_hermitian_operator(seed in any::<u64>(), sites in 4usize..14, frac in 0.1f64..0.45, smooth in any::<bool>()) {
        let space = OneBodySpace::lattice(1, sites, sites as f64).unwrap();
        let a = OneBodyOperator::new(random::hermitian(&mut random::rng(seed), sites), "a").unwrap();
        let profile = if smooth { WindowProfile::Smooth } else { WindowProfile::Sharp };
        let (chi, eta) = ims_partition(&space, frac * sites as f64, profile).unwrap();
        prop_assert!(ims_identity_residual(&a, &chi, &eta).unwrap() <= 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn slater_energies_bound_the_ground_state(seed in any::<u64>(), g in 0.0f64..3.0) {
        let space = OneBodySpace::lattice(1, 5, 5.0).unwrap();
        let h = kinetic_operator(&space).unwrap();
        let w = TwoBodyKernel::soft_coulomb(&space, Statistics::Fermion, g, 1.0).unwrap();
        let basis = FockBasis::new(5, 2, Statistics::Fermion).unwrap();
        let exact = ground_state(&basis, &h, &w, 2).unwrap().energy;
        let phi = random::frame(&mut random::rng(seed), 5, 2);
        prop_assert!(hf_energy(&h, &w, &(&phi * phi.adjoint())) >= exact - 1e-10);
    }
}
