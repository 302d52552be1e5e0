use proptest::prelude::*;
use stealthpath::adversary::{estimate_alpha_beta, optimal_detect, OptimalDetector, StrategySpec};
use stealthpath::codec::*;
use stealthpath::oracle::*;
use stealthpath::probkit::{tv_distance, BlockDistribution, ConditionalKernel, Distribution, JointDistribution, TypicalityParams};
use stealthpath::ratesolver::{solve_b, JamSet, NetworkModel, Solved, SolverConfig};
use stealthpath::Exec;

fn bits(p: f64, c: usize, z: usize) -> NetworkModel {
    NetworkModel::independent(z, &vec![Distribution::bernoulli(p).unwrap(); c]).unwrap()
}

fn direct(p_x: &JointDistribution, n: usize, messages: u128, seed: u64) -> DirectCode {
    build_direct_code(p_x, CodeParams::with_messages(n, messages, seed).unwrap(), CodeOptions::default()).unwrap()
}

fn layered(model: &NetworkModel, kernel: &ConditionalKernel, p_u: &Distribution, n: usize, messages: u128, seed: u64) -> LayeredCode {
    build_layered_code(p_u, kernel, model.link_alphabet_sizes(), CodeParams::with_messages(n, messages, seed).unwrap(), CodeOptions::default())
        .unwrap()
}

fn j(links: &[usize]) -> JamSet {
    JamSet::new(links.to_vec())
}

#[test]
fn one_codeword_gives_a_point_mass() {
    let m = bits(0.5, 3, 1);
    let code = direct(m.innocent(), 3, 1, 5);
    let act = exact_active_marginal(CodeRef::Direct(&code), &j(&[1]), MARGINAL_BUDGET).unwrap();
    let x = code.codeword(1).unwrap();
    let at = act.index_of(&[x[1].clone()]).unwrap();
    for (i, &p) in act.mass().iter().enumerate() {
        assert_eq!(p, if i == at { 1.0 } else { 0.0 });
    }
}

#[test]
fn two_codewords_average_their_point_masses() {
    let m = NetworkModel::independent(0, &[Distribution::uniform(3).unwrap()]).unwrap();
    let code = direct(m.innocent(), 1, 2, 9);
    let act = exact_active_marginal(CodeRef::Direct(&code), &j(&[0]), MARGINAL_BUDGET).unwrap();
    let mut expect = [0.0; 3];
    for msg in 1..=2 {
        expect[code.codeword(msg).unwrap()[0].as_slice()[0] as usize] += 0.5;
    }
    assert_eq!(act.mass(), &expect);
}

#[test]
fn constant_kernel_erases_the_codebook() {
    let m = bits(0.3, 2, 0);
    let row = Distribution::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
    let kernel = ConditionalKernel::constant(3, row.clone()).unwrap();
    let p_u = Distribution::uniform(3).unwrap();
    let n = 4;
    let code = layered(&m, &kernel, &p_u, n, 37, 2);
    let act = exact_active_marginal(CodeRef::Layered(&code), &j(&[0, 1]), MARGINAL_BUDGET).unwrap();
    let expect = BlockDistribution::iid(vec![2, 2], n, row.mass()).unwrap();
    for (a, e) in act.mass().iter().zip(expect.mass()) {
        assert!((a - e).abs() < 1e-15);
    }
}

#[test]
fn innocent_kernel_leaves_no_gap() {
    let m = bits(0.3, 3, 1);
    let kernel = ConditionalKernel::constant(2, m.innocent().to_distribution()).unwrap();
    let code = layered(&m, &kernel, &Distribution::uniform(2).unwrap(), 6, 100, 1);
    for jam in m.jam_family().iter() {
        let g = exact_stealth_gap(CodeRef::Layered(&code), &m, jam, MARGINAL_BUDGET).unwrap();
        assert!(g.gap < 1e-12, "{jam}: {}", g.gap);
    }
}

#[test]
fn mismatched_codes_show_the_single_letter_gap() {
    let m = bits(0.5, 3, 1);
    let p_x = JointDistribution::product(&vec![Distribution::bernoulli(0.8).unwrap(); 3]);
    let jam = j(&[0]);
    // 2^14 codewords: each cell of the n=1 type is within 0.02 of its mean w.p. > 1 - 1e-6
    let g1 = exact_stealth_gap(CodeRef::Direct(&direct(&p_x, 1, 1 << 14, 3)), &m, &jam, MARGINAL_BUDGET).unwrap().gap;
    assert!((g1 - 0.3).abs() < 0.02, "{g1}");
    let g2 = exact_stealth_gap(CodeRef::Direct(&direct(&p_x, 2, 1 << 14, 3)), &m, &jam, MARGINAL_BUDGET).unwrap().gap;
    // the two-letter product gap is 1/2 (|.64-.25| + 2|.16-.25| + |.04-.25|) = 0.39
    assert!((g2 - 0.39).abs() < 0.03, "{g2}");
    assert!(g1 <= g2);
}

#[test]
fn single_codeword_detector_identity() {
    // with one codeword x, V = 1 - P_inn(x), so the best alpha + beta is P_inn(x)
    let m = NetworkModel::with_budget_bypass(1, JointDistribution::product(&[Distribution::bernoulli(0.3).unwrap()])).unwrap();
    for seed in 0..4 {
        let code = direct(m.innocent(), 2, 1, seed);
        let x = code.codeword(1).unwrap();
        let p_inn: f64 = x[0].as_slice().iter().map(|&s| if s == 1 { 0.3 } else { 0.7 }).product();
        let best = exhaustive_best_detector(CodeRef::Direct(&code), &m, &j(&[0]), DETECTOR_BUDGET).unwrap();
        assert!(best.exhaustive);
        assert_eq!(best.observations, 4);
        assert!((best.sum - p_inn).abs() < 1e-15);
        assert!((best.one_minus_gap - p_inn).abs() < 1e-15);
    }
}

#[test]
fn detector_extremes() {
    let p = [0.25, 0.25, 0.5, 0.0];
    let same = brute_force_best_detector(&p, &p).unwrap();
    assert!((same.sum - 1.0).abs() < 1e-15);
    let q = [0.0, 0.0, 0.0, 1.0];
    let apart = brute_force_best_detector(&p, &q).unwrap();
    assert_eq!((apart.alpha, apart.beta), (0.0, 0.0));
    assert!(brute_force_best_detector(&[0.0; 17], &[0.0; 17]).is_err());
}

#[test]
fn budgets_are_enforced() {
    let m = bits(0.5, 3, 1);
    let code = direct(m.innocent(), 24, 4, 1);
    let err = exact_active_marginal(CodeRef::Direct(&code), &j(&[0]), MARGINAL_BUDGET).unwrap_err();
    assert!(matches!(err, OracleError::Budget { .. }), "{err}");
    let code = direct(m.innocent(), 17, 4, 1);
    assert!(exhaustive_best_detector(CodeRef::Direct(&code), &m, &j(&[0]), DETECTOR_BUDGET).is_err());
}

fn random_instance() -> impl Strategy<Value = (NetworkModel, Vec<f64>, usize, u128, u64, usize)> {
    (prop::collection::vec(0.02f64..1.0, 8), prop::collection::vec(0.0f64..1.0, 8), 1usize..=4, 1u128..40, any::<u64>(), 0usize..4)
        .prop_map(|(w, v, n, msgs, seed, ji)| {
            let t: f64 = w.iter().sum();
            let model = NetworkModel::new(1, JointDistribution::new(vec![2, 2, 2], w.iter().map(|x| x / t).collect()).unwrap()).unwrap();
            let s: f64 = v.iter().sum::<f64>() + 1e-9;
            (model, v.iter().map(|x| (x + 1e-9 / 8.0) / s).collect(), n, msgs, seed, ji)
        })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn best_detector_is_one_minus_gap((model, px, n, msgs, seed, ji) in random_instance()) {
        let p_x = JointDistribution::new(vec![2, 2, 2], px).unwrap();
        let code = direct(&p_x, n, msgs, seed);
        let jam = model.jam_family().sets()[ji].clone();
        let best = exhaustive_best_detector(CodeRef::Direct(&code), &model, &jam, DETECTOR_BUDGET).unwrap();
        let gap = exact_stealth_gap(CodeRef::Direct(&code), &model, &jam, MARGINAL_BUDGET).unwrap().gap;
        prop_assert!((best.sum - (1.0 - gap)).abs() <= 1e-12);
        prop_assert!((best.sum - best.one_minus_gap).abs() <= 1e-12);
        let act = exact_active_marginal(CodeRef::Direct(&code), &jam, MARGINAL_BUDGET).unwrap();
        prop_assert!((act.mass().iter().sum::<f64>() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn no_detector_beats_the_gap(
        (model, px, _n, msgs, seed, ji) in random_instance(),
        n in 1usize..=8,
        flags in prop::collection::vec(any::<bool>(), 256),
    ) {
        let p_x = JointDistribution::new(vec![2, 2, 2], px).unwrap();
        let code = direct(&p_x, n, msgs, seed);
        let jam = model.jam_family().sets()[1 + ji % 3].clone();
        let act = exact_active_marginal(CodeRef::Direct(&code), &jam, MARGINAL_BUDGET).unwrap();
        let inn = innocent_block_marginal(&model, &jam, n, MARGINAL_BUDGET).unwrap();
        let gap = tv_distance(act.mass(), inn.mass());
        let (a, b) = detector_errors(inn.mass(), act.mass(), &flags[..act.mass().len()]);
        prop_assert!(a + b >= 1.0 - gap - 1e-12);
        // the likelihood-ratio test attains the bound
        let lr: Vec<bool> = (0..act.mass().len())
            .map(|i| optimal_detect(&act.block(i), &inn, &act).unwrap() == 1)
            .collect();
        let (a, b) = detector_errors(inn.mass(), act.mass(), &lr);
        prop_assert!((a + b - (1.0 - gap)).abs() <= 1e-12);
    }

    #[test]
    fn layered_marginals_are_distributions(w in prop::collection::vec(0.01f64..1.0, 8), n in 1usize..=5, seed in any::<u64>()) {
        let m = bits(0.5, 3, 1);
        let normalized = |r: &[f64]| { let s: f64 = r.iter().sum(); Distribution::new(r.iter().map(|x| x / s).collect()).unwrap() };
        let kernel = ConditionalKernel::new(vec![normalized(&w), Distribution::uniform(8).unwrap()]).unwrap();
        let code = layered(&m, &kernel, &Distribution::bernoulli(0.4).unwrap(), n, 20, seed);
        for jam in m.jam_family().iter() {
            let act = exact_active_marginal(CodeRef::Layered(&code), jam, MARGINAL_BUDGET).unwrap();
            prop_assert!((act.mass().iter().sum::<f64>() - 1.0).abs() <= 1e-10);
        }
    }
}

#[test]
fn layered_marginal_matches_brute_force() {
    // sum over messages and every kernel draw on all links, then marginalize
    let m = bits(0.5, 2, 0);
    let kernel = ConditionalKernel::new(vec![
        Distribution::new(vec![0.5, 0.25, 0.25, 0.0]).unwrap(),
        Distribution::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap(),
    ])
    .unwrap();
    let n = 3;
    let code = layered(&m, &kernel, &Distribution::uniform(2).unwrap(), n, 5, 77);
    let act = exact_active_marginal(CodeRef::Layered(&code), &j(&[1]), MARGINAL_BUDGET).unwrap();
    let mut expect = vec![0.0; 8];
    for msg in 1..=5u128 {
        let u = code.u_codeword(msg).unwrap();
        for xs in 0..64usize {
            let atoms: Vec<usize> = (0..n).map(|t| (xs >> (2 * (n - 1 - t))) & 3).collect();
            let p: f64 = atoms.iter().zip(u.as_slice()).map(|(&a, &s)| kernel.row(s as usize).prob(a)).product();
            let idx = atoms.iter().fold(0, |acc, &a| acc * 2 + (a & 1));
            expect[idx] += p / 5.0;
        }
    }
    for (a, e) in act.mass().iter().zip(&expect) {
        assert!((a - e).abs() < 1e-14);
    }
}

#[test]
fn partition_resums_to_the_gap() {
    let m = bits(0.5, 3, 1);
    let p_x = JointDistribution::product(&vec![Distribution::bernoulli(0.6).unwrap(); 3]);
    for n in [4, 8, 12] {
        let code = direct(&p_x, n, 500, n as u64);
        for jam in m.jam_family().iter() {
            let part = typicality_partition(CodeRef::Direct(&code), &m, jam, TypicalityParams::new(0.2).unwrap(), MARGINAL_BUDGET).unwrap();
            assert!((part.typical + part.atypical - part.total).abs() < 1e-12);
            assert!(part.atypical <= part.atypical_bound + 1e-15);
            assert!(part.typical_mass_active <= 1.0 + 1e-12 && part.typical_mass_innocent <= 1.0 + 1e-12);
        }
    }
}

#[test]
fn passthrough_without_collisions_never_errs_when_active() {
    // "no collision": codewords differ outside every candidate jam set
    let m = bits(0.5, 3, 1);
    let keeps: Vec<Vec<usize>> = m.jam_family().maximal().map(|s| s.complement(3)).collect();
    let distinct = |code: &DirectCode| {
        keeps.iter().all(|keep| {
            let r: std::collections::HashSet<Vec<_>> =
                (1..=16).map(|i| keep.iter().map(|&l| code.codeword(i).unwrap()[l].clone()).collect()).collect();
            r.len() == 16
        })
    };
    let code = (0..).map(|seed| direct(m.innocent(), 6, 16, seed)).find(distinct).unwrap();
    let jam = Jamming::Overwrite { strategy: StrategySpec::new("passthrough") };
    for js in m.jam_family().iter() {
        let e = exact_error_probability(CodeRef::Direct(&code), &m, js, &jam, Decoder::Overwrite, ERROR_BUDGET, Exec::Parallel).unwrap();
        assert_eq!(e.active, 0.0, "{js}");
        assert!(e.innocent > 0.0 && e.total == e.innocent + e.active);
    }
}

fn binomial_ok(freq: f64, exact: f64, trials: f64) -> bool {
    let se = (exact * (1.0 - exact) / trials).sqrt();
    (freq - exact).abs() <= 3.0 * se + 1e-12
}

#[test]
fn erasure_error_matches_monte_carlo() {
    let m = bits(0.5, 3, 1);
    let kernel = ConditionalKernel::identity(8).unwrap();
    let code = layered(&m, &kernel, &m.innocent().to_distribution(), 3, 6, 4);
    let tp = TypicalityParams::new(0.5).unwrap();
    let none = JamSet::empty();
    let exact = exact_error_probability(CodeRef::Layered(&code), &m, &none, &Jamming::Erasure, Decoder::Erasure(tp), ERROR_BUDGET, Exec::Parallel)
        .unwrap();
    let trials = 100_000u64;
    let (mut inn, mut act) = (0u64, 0u64);
    for i in 0..trials {
        let tx = encode(&code, &m, Status::Innocent, 0, i).unwrap();
        if decode_erasure(&code, &ReceivedWord::clean(&tx), &m, tp).unwrap().verdict != Verdict::Innocent {
            inn += 1;
        }
        let msg = 1 + (i % 6) as u128;
        let tx = encode(&code, &m, Status::Active, msg, i + trials).unwrap();
        if decode_erasure(&code, &ReceivedWord::clean(&tx), &m, tp).unwrap().verdict != Verdict::Message(msg) {
            act += 1;
        }
    }
    let t = trials as f64;
    assert!(binomial_ok(inn as f64 / t, exact.innocent, t), "{} vs {}", inn as f64 / t, exact.innocent);
    assert!(binomial_ok(act as f64 / t, exact.active, t), "{} vs {}", act as f64 / t, exact.active);
}

#[test]
fn optimal_detector_monte_carlo_matches_exact() {
    let m = bits(0.5, 3, 1);
    let p_x = JointDistribution::product(&vec![Distribution::bernoulli(0.6).unwrap(); 3]);
    let code = direct(&p_x, 6, 50, 21);
    let jam = j(&[2]);
    let act = exact_active_marginal(CodeRef::Direct(&code), &jam, MARGINAL_BUDGET).unwrap();
    let inn = innocent_block_marginal(&m, &jam, 6, MARGINAL_BUDGET).unwrap();
    let flags: Vec<bool> = act.mass().iter().zip(inn.mass()).map(|(a, i)| a > i).collect();
    let (alpha, beta) = detector_errors(inn.mass(), act.mass(), &flags);
    let det = OptimalDetector::new(inn, act).unwrap();
    let trials = 100_000;
    let stats = estimate_alpha_beta(&det, &m, &code, &jam, trials, 8, Exec::Parallel).unwrap();
    assert!(binomial_ok(stats.alpha, alpha, trials as f64), "{} vs {alpha}", stats.alpha);
    assert!(binomial_ok(stats.beta, beta, trials as f64), "{} vs {beta}", stats.beta);
}

#[test]
fn grid_finds_the_known_optima() {
    let g = grid_solve_b(&bits(0.5, 3, 1), 1e-2, Exec::Parallel).unwrap();
    assert_eq!(g.dimension, 4);
    assert!((g.value - 2.0).abs() <= 1e-2);
    // independence is optimal by subadditivity: 2 h(0.3)
    let h = -(0.3f64 * 0.3f64.log2() + 0.7 * 0.7f64.log2());
    let g = grid_solve_b(&bits(0.3, 3, 1), 1e-2, Exec::Parallel).unwrap();
    assert!((g.value - 2.0 * h).abs() <= 1e-2 && (2.0 * h - 1.76259).abs() < 1e-5);
    let g = grid_solve_b(&bits(0.3, 2, 0), 1e-2, Exec::Parallel).unwrap();
    assert_eq!(g.dimension, 3);
    assert!((g.value - 2.0).abs() < 1e-12);
}

#[test]
fn grid_rejects_large_problems() {
    assert!(matches!(grid_solve_b(&bits(0.5, 3, 0), 0.1, Exec::Sequential), Err(OracleError::DimensionTooLarge { found: 7, .. })));
    let m = NetworkModel::independent(1, &vec![Distribution::uniform(3).unwrap(); 3]).unwrap();
    assert!(matches!(grid_solve_b(&m, 0.1, Exec::Sequential), Err(OracleError::AlphabetTooLarge { .. })));
    assert!(grid_solve_b(&bits(0.5, 3, 1), 0.0, Exec::Sequential).is_err());
}

#[test]
fn grid_agrees_with_solve_b_on_binary_links() {
    let mut models = vec![bits(0.5, 3, 1), bits(0.3, 3, 1), bits(0.2, 2, 0)];
    for w in [[3.0, 1.0, 1.0, 2.0, 1.0, 2.0, 2.0, 4.0], [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 3.0], [5.0, 1.0, 2.0, 1.0, 1.0, 2.0, 1.0, 5.0]] {
        let t: f64 = w.iter().sum();
        let inn = JointDistribution::new(vec![2, 2, 2], w.iter().map(|x| x / t).collect()).unwrap();
        models.push(NetworkModel::new(1, inn).unwrap());
    }
    for m in &models {
        let grid = grid_solve_b(m, 1e-2, Exec::Parallel).unwrap();
        match solve_b(m, &SolverConfig::with_seed(3)).unwrap() {
            Solved::Feasible(s) => assert!((s.value - grid.value).abs() <= 5e-3, "{} vs {}", s.value, grid.value),
            Solved::Infeasible(r) => panic!("infeasible: {r:?}"),
        }
    }
}
