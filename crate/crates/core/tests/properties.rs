use chcon::bounds::{self, CapacityBracket, OverheadValue};
use chcon::channel::random::{random_channel, random_channel_any_rank, random_nonunital_qubit, random_unital_qubit};
use chcon::channel::bloch::to_bloch_affine;
use chcon::channel::validate_channel;
use chcon::contraction::{self, SearchOptions};
use chcon::decompose::{self, is_entanglement_breaking};
use chcon::entanglement::{self, random_separable_channel, BipartiteState, SeparableChannel, SepOptions};
use chcon::linalg::{self, Keep};
use chcon::{rng, DensityState, KrausChannel, Tolerances};
use proptest::prelude::*;

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

fn max_diff(a: &linalg::CMatrix, b: &linalg::CMatrix) -> f64 {
    linalg::max_abs(&(a - b))
}

proptest! {
    #![proptest_config(cfg(256))]

    #[test]
    fn choi_round_trip_preserves_action(seed in any::<u64>(), d in 2usize..=4, env in 1usize..=4) {
        let mut r = rng::stream(seed, 0);
        let ch = random_channel(d, d, env, &mut r);
        let back = ch.choi().to_kraus(1e-12).unwrap();
        for _ in 0..3 {
            let rho = DensityState::random(d, d, &mut r);
            prop_assert!(max_diff(&ch.apply(rho.matrix()), &back.apply(rho.matrix())) < 1e-9);
        }
    }

    #[test]
    fn random_channels_are_valid(seed in any::<u64>(), din in 2usize..=4, dout in 2usize..=4, env in 1usize..=5) {
        prop_assume!(dout * env >= din);
        let ch = random_channel(din, dout, env, &mut rng::stream(seed, 0));
        let report = validate_channel(ch.kraus(), &Tolerances::default()).unwrap();
        prop_assert!(report.passed, "{report:?}");
        let c = ch.choi();
        prop_assert!((c.trace() - din as f64).abs() < 1e-9);
        // output factor first, so tracing it out leaves the input identity
        let reduced = linalg::partial_trace(c.matrix(), dout, din, Keep::Second);
        prop_assert!(max_diff(&reduced, &linalg::identity(din)) < 1e-9);
    }

    #[test]
    fn bloch_form_reconstructs_qubit_channels(seed in any::<u64>()) {
        let ch = random_channel_any_rank(2, true, &mut rng::stream(seed, 0));
        let affine = to_bloch_affine(&ch).unwrap();
        for k in 0..3 {
            for s in [1.0, -1.0] {
                let mut r = [0.0; 3];
                r[k] = s;
                let rho = DensityState::from_bloch(r).unwrap();
                prop_assert!(linalg::trace_norm_herm(&(affine.apply(rho.matrix()) - ch.apply(rho.matrix()))) < 1e-7);
            }
        }
    }

    #[test]
    fn tensor_and_compose_match_pointwise_action(seed in any::<u64>(), d in 2usize..=3) {
        let mut r = rng::stream(seed, 0);
        let a = random_channel(d, d, 2, &mut r);
        let b = random_channel(d, d, 3, &mut r);
        let rho = DensityState::random(d, d, &mut r);
        let sigma = DensityState::random(d, 1, &mut r);
        let joint = a.tensor(&b).apply(&linalg::kron(rho.matrix(), sigma.matrix()));
        prop_assert!(max_diff(&joint, &linalg::kron(&a.apply(rho.matrix()), &b.apply(sigma.matrix()))) < 1e-10);
        let ab = a.compose(&b).unwrap();
        prop_assert!(max_diff(&ab.apply(rho.matrix()), &a.apply(&b.apply(rho.matrix()))) < 1e-10);
    }

    #[test]
    fn divergences_contract_and_dominate(seed in any::<u64>(), d in 2usize..=3) {
        let mut r = rng::stream(seed, 0);
        let ch = random_channel(d, d, 1 + d, &mut r);
        let rank = 1 + (seed % d as u64) as usize;
        let rho = DensityState::random(d, rank, &mut r);
        let sigma = DensityState::random(d, d, &mut r);
        let t_rho = ch.apply_state(&rho).unwrap();
        let t_sigma = ch.apply_state(&sigma).unwrap();
        let chi_in = contraction::chi2_divergence(&rho, &sigma).unwrap();
        let chi_out = contraction::chi2_divergence(&t_rho, &t_sigma).unwrap();
        let td_in = contraction::trace_distance(&rho, &sigma).unwrap();
        let td_out = contraction::trace_distance(&t_rho, &t_sigma).unwrap();
        prop_assert!(chi_out <= chi_in + 1e-8, "{chi_out} > {chi_in}");
        prop_assert!(td_out <= td_in + 1e-10);
        prop_assert!(td_in * td_in <= chi_in + 1e-8);
    }

    #[test]
    fn chi2_is_jointly_convex(seed in any::<u64>(), w in 0.0f64..=1.0) {
        let mut r = rng::stream(seed, 0);
        let (r1, r2) = (DensityState::random(2, 1, &mut r), DensityState::random(2, 2, &mut r));
        let (s1, s2) = (DensityState::random(2, 2, &mut r), DensityState::random(2, 2, &mut r));
        let mix = |a: &DensityState, b: &DensityState| DensityState::new(a.matrix().scale(w) + b.matrix().scale(1.0 - w)).unwrap();
        let lhs = contraction::chi2_divergence(&mix(&r1, &r2), &mix(&s1, &s2)).unwrap();
        let rhs = w * contraction::chi2_divergence(&r1, &s1).unwrap() + (1.0 - w) * contraction::chi2_divergence(&r2, &s2).unwrap();
        prop_assert!(lhs <= rhs + 1e-8);
    }

    #[test]
    fn unital_split_reconstructs(seed in any::<u64>()) {
        let ch = random_unital_qubit(&mut rng::stream(seed, 0));
        prop_assume!(!ch.is_unitary(1e-9));
        let split = decompose::unital_split(&ch).unwrap();
        prop_assert!(split.reconstruction_error(&ch).unwrap() < 1e-7);
        prop_assert!(is_entanglement_breaking(&split.eb_part).unwrap());
        prop_assert!(split.p1 > 0.0);
    }

    #[test]
    fn memory_time_is_monotone(n in 1u32..40, p1 in 0.01f64..1.0, p2 in 0.01f64..1.0) {
        let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
        let a = bounds::memory_time_bound_from_p(n, lo).unwrap();
        let b = bounds::memory_time_bound_from_p(n, hi).unwrap();
        let c = bounds::memory_time_bound_from_p(n + 1, lo).unwrap();
        prop_assert!(a.log2_threshold >= b.log2_threshold);
        prop_assert!(c.log2_threshold >= a.log2_threshold);
    }

    #[test]
    fn overhead_is_monotone(n in 1u64..1000, log_t in 0.0f64..200.0, p in 0.01f64..1.0, upper in 0.05f64..=1.0) {
        let mut bracket = CapacityBracket::trivial();
        bracket.upper = upper;
        let value = |n: u64, t: f64| match bounds::overhead_lower_bound(n, t, p, &bracket).unwrap().bound {
            OverheadValue::Bound { value, .. } => value,
            OverheadValue::Impossible { .. } => f64::INFINITY,
        };
        let t = log_t.exp2();
        let base = value(n, t);
        prop_assert!(value(n + 1, t) >= base);
        prop_assert!(value(n, 2.0 * t) >= base);
        prop_assert!(base >= n as f64 / upper - 1e-9);
    }
}

proptest! {
    #![proptest_config(cfg(128))]

    #[test]
    fn eta_estimates_are_ordered(seed in any::<u64>(), d in 2usize..=3) {
        let ch = random_channel_any_rank(d, false, &mut rng::stream(seed, 0));
        let opts = SearchOptions { seed, restarts: 12, ..SearchOptions::default() };
        let eta = contraction::eta_tr(&ch, &opts).unwrap().value;
        let mid = contraction::eta_tr_upper_minoutev(&ch, &opts).unwrap().value;
        let top = contraction::eta_tr_upper_choi(&ch).unwrap().value;
        prop_assert!(eta <= mid + 1e-6, "{eta} > {mid}");
        prop_assert!(mid <= top + 1e-6, "{mid} > {top}");
        let chi = contraction::eta_chi_lower(&ch, 16, seed).unwrap().value;
        let cap = if d == 2 { eta } else { mid };
        prop_assert!(chi <= cap + 1e-6, "{chi} > {cap}");
    }

    #[test]
    fn p_constant_is_positive_off_the_unitaries(seed in any::<u64>(), unital in any::<bool>()) {
        let mut r = rng::stream(seed, 0);
        let ch = if unital { random_unital_qubit(&mut r) } else { random_nonunital_qubit(&mut r) };
        prop_assume!(!ch.is_unitary(1e-9));
        let opts = decompose::P2Options { seed, candidates: 16, refine: 1 };
        let rep = decompose::p_constant(&ch, &opts).unwrap();
        prop_assert!(rep.p > 0.0 && rep.p <= 1.0);
    }
}

proptest! {
    #![proptest_config(cfg(64))]

    #[test]
    fn chisep_never_grows_under_separable_channels(seed in any::<u64>(), local in any::<bool>()) {
        let mut r = rng::stream(seed, 0);
        let state = BipartiteState::random(2, 2, 1 + (seed % 3) as usize, &mut r);
        let t = if local {
            SeparableChannel::local(&random_channel(2, 2, 2, &mut r), &random_channel(2, 2, 2, &mut r))
        } else {
            random_separable_channel(2, 2, &mut r)
        };
        let opts = SepOptions::default();
        let before = entanglement::chisep(&state, &opts).unwrap().value;
        let after = entanglement::chisep(&t.apply(&state).unwrap(), &opts).unwrap().value;
        prop_assert!(after <= before + 1e-6, "{after} > {before}");
        let d = entanglement::dsep(&state, &opts).unwrap().value;
        prop_assert!(d * d <= before + 1e-6);
    }
}

#[test]
fn coherent_information_endpoints() {
    let cfg = bounds::SearchConfig::default();
    let id = bounds::coherent_info_lower(&KrausChannel::identity(2), &cfg).unwrap().value;
    assert!((id - 1.0).abs() < 1e-6);
    let spec = chcon::ChannelSpec::from_json(r#"{"preset":"depolarizing","p":1.0}"#).unwrap();
    let dep = bounds::coherent_info_lower(&spec.to_channel().unwrap(), &cfg).unwrap().value;
    assert!(dep.abs() < 1e-6);
}
