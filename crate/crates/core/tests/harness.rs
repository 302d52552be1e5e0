use stealthpath::adversary::StrategySpec;
use stealthpath::codec::{build_direct_code, CodeOptions, CodeParams, CodeRef, Decoder};
use stealthpath::harness::*;
use stealthpath::oracle::{exact_error_probability, exhaustive_best_detector, exact_stealth_gap, Jamming, ERROR_BUDGET, MARGINAL_BUDGET};
use stealthpath::probkit::Distribution;
use stealthpath::ratesolver::{JamSet, NetworkModel, SolverConfig};
use stealthpath::{rng, Exec};

fn bits(p: f64, c: usize, z: usize) -> NetworkModel {
    NetworkModel::independent(z, &vec![Distribution::bernoulli(p).unwrap(); c]).unwrap()
}

fn overwrite_cfg(model: NetworkModel, n: usize, rate: RateRule, jam: JamRule, strategies: &[&str], trials: u64) -> ExperimentConfig {
    ExperimentConfig {
        schema: CONFIG_SCHEMA,
        model,
        scheme: ExperimentScheme::OverwriteDirect,
        code: CodeSweep { n: vec![n], rates: vec![rate], design: CodeDesign::Innocent, options: CodeOptions::default() },
        gamma: vec![0.1],
        adversary: AdversaryConfig { jam_sets: jam, strategies: strategies.iter().map(|&s| StrategySpec::new(s)).collect() },
        detector: "optimal-oracle".into(),
        trials,
        master_seed: 2024,
        solver: SolverConfig::with_seed(1),
        record_trials: false,
    }
}

fn csv_bytes(rows: &[MetricsRow]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).unwrap();
    buf
}

#[test]
fn zero_trials_are_rejected() {
    let mut cfg = overwrite_cfg(bits(0.5, 3, 1), 4, RateRule::Absolute(1.0), JamRule::WorstOverFamily, &["uniform-random"], 10);
    cfg.trials = 0;
    assert!(matches!(cfg.validate(), Err(HarnessError::Validation(_))));
    assert!(matches!(run_experiment(&cfg, Exec::Sequential), Err(HarnessError::Validation(_))));
}

#[test]
fn bad_configs_are_rejected() {
    let base = overwrite_cfg(bits(0.5, 3, 1), 4, RateRule::Absolute(1.0), JamRule::WorstOverFamily, &["uniform-random"], 10);
    let mut c = base.clone();
    c.schema = 2;
    assert!(c.validate().is_err());
    let mut c = base.clone();
    c.adversary.strategies.clear();
    assert!(c.validate().is_err());
    let mut c = base.clone();
    c.adversary.strategies = vec![StrategySpec::new("no-such-strategy")];
    assert!(c.validate().is_err());
    let mut c = base.clone();
    c.adversary.jam_sets = JamRule::Fixed(vec![0, 1]);
    assert!(c.validate().is_err());
    let mut c = base.clone();
    c.scheme = ExperimentScheme::ErasureLayered;
    assert!(c.validate().is_err(), "erasure runs take no strategies");
    let mut c = base.clone();
    c.detector = "psychic".into();
    assert!(c.validate().is_err());
    let mut c = base;
    c.gamma = vec![0.0];
    assert!(c.validate().is_err());
}

#[test]
fn parses_a_json_config() {
    let text = r#"{
        "schema": 1,
        "model": {"link_count": 2, "adversary_budget": 0, "link_alphabet_sizes": [2, 2],
                  "innocent": {"alphabet_size": 4, "factor_sizes": [2, 2], "mass": [0.25, 0.25, 0.25, 0.25]}},
        "scheme": "overwrite-direct",
        "code": {"n": [4], "rates": [{"absolute": 1.0}], "design": "innocent"},
        "adversary": {"jam_sets": "worst-over-family", "strategies": ["passthrough", {"id": "spoof-codeword", "gamma": 0.2}]},
        "trials": 20,
        "master_seed": 9
    }"#;
    let cfg = ExperimentConfig::from_json(text).unwrap();
    assert_eq!(cfg.trials, 20);
    assert_eq!(cfg.gamma, vec![0.1]);
    assert_eq!(cfg.detector, "optimal-oracle");
    assert_eq!(cfg.adversary.strategies[1].gamma, Some(0.2));
    let bad = text.replace("\"schema\": 1", "\"schema\": 7");
    assert!(ExperimentConfig::from_json(&bad).is_err());
    let unknown = text.replace("\"trials\": 20", "\"trials\": 20, \"colour\": 3");
    assert!(ExperimentConfig::from_json(&unknown).is_err());
}

#[test]
fn same_config_gives_identical_csv() {
    let cfg = overwrite_cfg(
        bits(0.5, 3, 1),
        6,
        RateRule::Absolute(1.0),
        JamRule::WorstOverFamily,
        &["uniform-random", "resample-innocent", "spoof-consistent"],
        300,
    );
    let a = run_experiment(&cfg, Exec::Parallel).unwrap();
    let b = run_experiment(&cfg, Exec::Parallel).unwrap();
    let s = run_experiment(&cfg, Exec::Sequential).unwrap();
    assert_eq!(a.rows.len(), 3);
    assert_eq!(csv_bytes(&a.rows), csv_bytes(&b.rows));
    assert_eq!(csv_bytes(&a.rows), csv_bytes(&s.rows));
}

#[test]
fn erasure_runs_are_deterministic_too() {
    let cfg = ExperimentConfig {
        scheme: ExperimentScheme::ErasureLayered,
        code: CodeSweep { n: vec![8], rates: vec![RateRule::BoundMinusEpsilon(0.5)], design: CodeDesign::Solve, options: CodeOptions::default() },
        gamma: vec![0.3],
        adversary: AdversaryConfig { jam_sets: JamRule::WorstOverFamily, strategies: vec![] },
        ..overwrite_cfg(bits(0.5, 3, 1), 8, RateRule::Absolute(1.0), JamRule::WorstOverFamily, &[], 200)
    };
    let a = run_experiment(&cfg, Exec::Parallel).unwrap();
    let b = run_experiment(&cfg, Exec::Sequential).unwrap();
    assert_eq!(a.rows.len(), 1);
    assert_eq!(a.rows[0].strategy, "erasure");
    assert_eq!(a.rows[0].status, "ok");
    assert_eq!(csv_bytes(&a.rows), csv_bytes(&b.rows));
}

#[test]
fn worst_over_family_is_the_max_of_fixed_runs() {
    let model = bits(0.5, 3, 1);
    let strategies = ["uniform-random", "spoof-codeword"];
    let worst = overwrite_cfg(model.clone(), 6, RateRule::Absolute(1.2), JamRule::WorstOverFamily, &strategies, 400);
    let rows = run_experiment(&worst, Exec::Parallel).unwrap().rows;
    let mut fixed_rows = Vec::new();
    for j in model.jam_family().sets() {
        let cfg = ExperimentConfig { adversary: AdversaryConfig { jam_sets: JamRule::Fixed(j.links().to_vec()), ..worst.adversary.clone() }, ..worst.clone() };
        fixed_rows.push(run_experiment(&cfg, Exec::Parallel).unwrap().rows);
    }
    for (k, row) in rows.iter().enumerate() {
        let per: Vec<&MetricsRow> = fixed_rows.iter().map(|r| &r[k]).collect();
        let max_err = per.iter().map(|r| r.p_err_hat.unwrap()).fold(0.0, f64::max);
        assert_eq!(row.p_err_hat.unwrap(), max_err);
        let max_gap = per.iter().map(|r| r.stealth_gap.unwrap()).fold(0.0, f64::max);
        assert_eq!(row.stealth_gap.unwrap(), max_gap);
        let min_ab = per.iter().map(|r| r.alpha_hat.unwrap() + r.beta_hat.unwrap()).fold(f64::INFINITY, f64::min);
        assert!((row.alpha_hat.unwrap() + row.beta_hat.unwrap() - min_ab).abs() < 1e-12);
        assert!(per.iter().any(|r| r.jam_set == row.jam_set && r.p_err_hat == row.p_err_hat));
    }
}

#[test]
fn rate_rules_resolve() {
    let cfg = SolverConfig::with_seed(7);
    let m = bits(0.5, 3, 1);
    let r = rate_rule_resolve(RateRule::BoundMinusEpsilon(0.2), &m, ExperimentScheme::OverwriteDirect, &cfg).unwrap();
    assert!((r - 1.8).abs() <= cfg.opt_tol, "{r}");
    assert_eq!(rate_rule_resolve(RateRule::Absolute(1.0), &m, ExperimentScheme::OverwriteDirect, &cfg).unwrap(), 1.0);
}

fn infeasible_model() -> NetworkModel {
    NetworkModel::independent(1, &[Distribution::uniform(2).unwrap(), Distribution::point(2, 0).unwrap(), Distribution::point(2, 0).unwrap()]).unwrap()
}

#[test]
fn infeasible_models_give_failure_rows() {
    let m = infeasible_model();
    let sc = SolverConfig::with_seed(4);
    assert_eq!(
        rate_rule_resolve(RateRule::BoundMinusEpsilon(0.1), &m, ExperimentScheme::OverwriteDirect, &sc),
        Err(HarnessError::Infeasible)
    );
    let mut cfg = overwrite_cfg(m, 4, RateRule::BoundMinusEpsilon(0.1), JamRule::WorstOverFamily, &["uniform-random", "passthrough"], 10);
    cfg.solver = sc;
    let rows = run_experiment(&cfg, Exec::Sequential).unwrap().rows;
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert_eq!(r.status, "failed: infeasible");
        assert!(r.p_err_hat.is_none() && r.rate_bits.is_none());
    }
}

#[test]
fn failures_stay_local_to_their_point() {
    // n * R = 130 bits cannot be built; the n = 4 point still runs
    let mut cfg = overwrite_cfg(bits(0.5, 3, 1), 4, RateRule::Absolute(2.5), JamRule::WorstOverFamily, &["passthrough"], 20);
    cfg.code.n = vec![52, 4];
    let rows = run_experiment(&cfg, Exec::Sequential).unwrap().rows;
    assert!(rows[0].status.starts_with("failed: "));
    assert_eq!(rows[1].status, "ok");
}

fn sample_row() -> MetricsRow {
    MetricsRow {
        scheme: "overwrite-direct".into(),
        n: 8,
        rate_bits: Some(1.25),
        gamma: 0.1,
        jam_rule: "fixed".into(),
        jam_set: "{2}".into(),
        strategy: "spoof-codeword(gamma=0.1)".into(),
        trials: 1000,
        p_err_hat: Some(0.0123),
        p_err_ci: Some(0.004),
        alpha_hat: Some(0.31),
        beta_hat: Some(0.29),
        ab_ci: Some(0.04),
        stealth_gap: None,
        status: "ok".into(),
        p_err_innocent: Some(0.0),
        p_err_active: Some(0.0123),
    }
}

#[test]
fn empty_rows_give_a_header_only_csv() {
    let text = String::from_utf8(csv_bytes(&[])).unwrap();
    assert_eq!(text.lines().count(), 1);
    let header: Vec<&str> = text.trim_end().split(',').collect();
    assert_eq!(&header[..14], &[
        "scheme", "n", "rate_bits", "gamma", "jam_rule", "jam_set", "strategy", "trials", "p_err_hat", "p_err_ci", "alpha_hat", "beta_hat",
        "ab_ci", "stealth_gap"
    ]);
    assert_eq!(header, CSV_COLUMNS);
}

#[test]
fn one_row_gives_two_lines() {
    let text = String::from_utf8(csv_bytes(&[sample_row()])).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("overwrite-direct,8,1.25,0.1,fixed,{2},spoof-codeword(gamma=0.1),1000,0.0123,"));
}

#[test]
fn json_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rows.json");
    let mut other = sample_row();
    other.rate_bits = None;
    other.stealth_gap = Some(0.1 + 0.2);
    other.status = "failed: infeasible".into();
    let rows = vec![sample_row(), other];
    export(&rows, Format::Json, &path).unwrap();
    assert_eq!(read_rows_json(&path).unwrap(), rows);
    export(&rows, Format::Csv, &dir.path().join("rows.csv")).unwrap();
}

#[test]
fn io_failures_name_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("missing").join("rows.csv");
    match export(&[], Format::Csv, &path) {
        Err(HarnessError::Io { path: p, .. }) => assert!(p.contains("missing")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn half_widths() {
    assert_eq!(binomial_half_width(0, 100), 0.03);
    assert_eq!(binomial_half_width(100, 100), 0.03);
    assert!((binomial_half_width(50, 100) - 1.96 * 0.05).abs() < 1e-12);
}

#[test]
fn recorded_trials_match_the_row() {
    let mut cfg = overwrite_cfg(bits(0.5, 2, 0), 4, RateRule::Absolute(1.0), JamRule::WorstOverFamily, &["passthrough"], 50);
    cfg.record_trials = true;
    let out = run_experiment(&cfg, Exec::Parallel).unwrap();
    assert_eq!(out.trials.len(), 100);
    let errors = out.trials.iter().filter(|t| t.decode_error).count() as f64;
    assert_eq!(out.rows[0].p_err_hat.unwrap(), errors / 50.0);
    assert!(out.trials.iter().all(|t| t.detector_verdict.is_some()));
    assert!(out.trials.iter().filter(|t| t.hypothesis == 0).all(|t| t.message == 0));
}

// Frequencies against exact values: a direct code built from the innocent law
// with one jammed link and an enumerable strategy.
#[test]
fn rows_cover_the_exact_values() {
    let model = bits(0.3, 3, 1);
    let n = 3;
    let mut checked = 0;
    for strategy in ["resample-innocent", "uniform-random", "passthrough"] {
        let cfg = overwrite_cfg(model.clone(), n, RateRule::Absolute(1.0), JamRule::Fixed(vec![1]), &[strategy], 4000);
        let row = run_experiment(&cfg, Exec::Parallel).unwrap().rows.remove(0);
        assert_eq!(row.status, "ok");
        let seed = rng::derive_seed(cfg.master_seed, "codebook", 0);
        let code = build_direct_code(model.innocent(), CodeParams::new(n, 1.0, seed).unwrap(), CodeOptions::default()).unwrap();
        let j = JamSet::new(vec![1]);
        let jamming = Jamming::Overwrite { strategy: StrategySpec::new(strategy) };
        let exact = exact_error_probability(CodeRef::Direct(&code), &model, &j, &jamming, Decoder::Overwrite, ERROR_BUDGET, Exec::Parallel).unwrap();
        let ci = row.p_err_ci.unwrap();
        assert!((row.p_err_hat.unwrap() - exact.total).abs() <= ci, "{strategy}: {} vs {} ± {ci}", row.p_err_hat.unwrap(), exact.total);
        let gap = exact_stealth_gap(CodeRef::Direct(&code), &model, &j, MARGINAL_BUDGET).unwrap().gap;
        assert!((row.stealth_gap.unwrap() - gap).abs() < 1e-12);
        let best = exhaustive_best_detector(CodeRef::Direct(&code), &model, &j, MARGINAL_BUDGET).unwrap();
        let ab = row.alpha_hat.unwrap() + row.beta_hat.unwrap();
        assert!((ab - best.sum).abs() <= row.ab_ci.unwrap(), "{ab} vs {}", best.sum);
        checked += 1;
    }
    assert_eq!(checked, 3);
}

// Fails at desk scale: with gamma = 0.1 the sent u(m) is itself atypical for
// every n here (its 8-ary type deviates by about 0.26 in L1 at n = 64), so the
// active error is 1 throughout and the innocent budget overruns grow with n.
#[test]
#[ignore = "unattainable at n <= 64; see the decisions ledger"]
fn erasure_error_shrinks_with_blocklength() {
    let model = bits(0.5, 3, 1);
    let options = CodeOptions { search_budget: 1 << 20, ..CodeOptions::default() };
    let cfg = ExperimentConfig {
        scheme: ExperimentScheme::ErasureLayered,
        code: CodeSweep { n: vec![16, 32, 64], rates: vec![RateRule::BoundMinusEpsilon(0.2)], design: CodeDesign::Solve, options },
        adversary: AdversaryConfig { jam_sets: JamRule::WorstOverFamily, strategies: vec![] },
        detector: "none".into(),
        ..overwrite_cfg(model, 16, RateRule::Absolute(1.0), JamRule::WorstOverFamily, &[], 300)
    };
    let rows = run_experiment(&cfg, Exec::Parallel).unwrap().rows;
    let p: Vec<f64> = rows.iter().map(|r| r.p_err_hat.unwrap()).collect();
    assert!(p.windows(2).all(|w| w[1] <= w[0]), "{p:?}");
}

#[test]
fn scans_agree_with_the_experiment() {
    let cfg = overwrite_cfg(bits(0.3, 3, 1), 4, RateRule::Absolute(1.0), JamRule::WorstOverFamily, &["resample-innocent"], 100);
    let row = run_experiment(&cfg, Exec::Parallel).unwrap().rows.remove(0);
    let scan = stealth_scan(&cfg, Exec::Parallel).unwrap();
    assert_eq!(scan.len(), 4);
    let max_gap = scan.iter().map(|r| r.stealth_gap.unwrap()).fold(0.0, f64::max);
    assert!((row.stealth_gap.unwrap() - max_gap).abs() < 1e-12);
    let oracle = oracle_scan(&cfg, Exec::Parallel).unwrap();
    assert_eq!(oracle.len(), 4);
    let worst = oracle.iter().map(|r| r.p_err.unwrap()).fold(0.0, f64::max);
    assert!((row.p_err_hat.unwrap() - worst).abs() <= row.p_err_ci.unwrap(), "{} vs {worst}", row.p_err_hat.unwrap());
}
