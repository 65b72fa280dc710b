use delayreg::config::{GainsFile, ScenarioConfig};
use delayreg::example::{self, EXPECTED_OBSERVER_GAIN, EXPECTED_STATE_GAIN, GAIN_TOLERANCE, REPRODUCING_GAMMA};
use delayreg::synthesis::{check_assumptions, compute_gains, synthesize, Mode};

fn max_dev(got: &[f64], want: &[f64]) -> f64 {
    got.iter().zip(want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

fn joint_row(gains: &delayreg::synthesis::GainSet) -> Vec<f64> {
    let k = gains.joint();
    (0..k.cols()).map(|j| k.get(0, j)).collect()
}

#[test]
fn fixture_satisfies_all_assumptions() {
    let prob = example::problem().unwrap();
    let report = check_assumptions(&prob.plant, &prob.exo, &prob.graph).unwrap();
    assert!(report.all_passed(), "{report}");
    assert_eq!(prob.delays.r(), 2);
    assert_eq!(prob.im.nz(), 2);
}

#[test]
fn state_gain_reproduced_at_nearby_gamma() {
    let prob = example::problem().unwrap();
    let mut params = prob.params.clone();
    params.gamma = REPRODUCING_GAMMA;
    let gains = compute_gains(&prob.plant, &prob.graph, &prob.im, prob.delays, &params).unwrap();
    let dev = max_dev(&joint_row(&gains), &EXPECTED_STATE_GAIN);
    assert!(dev <= GAIN_TOLERANCE, "deviation {dev:e}");
}

#[test]
fn state_gain_at_configured_gamma() {
    let prob = example::problem().unwrap();
    let gains = compute_gains(&prob.plant, &prob.graph, &prob.im, prob.delays, &prob.params).unwrap();
    let want = [0.09398, -0.12005, -0.04127, -0.12428];
    assert!(max_dev(&joint_row(&gains), &want) < 1e-4);
}

#[test]
fn observer_gain_matches_printed_value() {
    let prob = example::problem().unwrap();
    let mut params = prob.params.clone();
    params.mode = Mode::Output;
    let gains = compute_gains(&prob.plant, &prob.graph, &prob.im, prob.delays, &params).unwrap();
    let l = gains.observer().unwrap();
    let got = [l.get(0, 0), l.get(1, 0)];
    assert!(max_dev(&got, &EXPECTED_OBSERVER_GAIN) <= 1e-9, "{got:?}");
}

#[test]
fn both_modes_certify_stable() {
    let prob = example::problem().unwrap();
    for (mode, dim) in [(Mode::State, 48), (Mode::Output, 72)] {
        let mut params = prob.params.clone();
        params.mode = mode;
        let (_, cert) = synthesize(&prob.plant, &prob.graph, &prob.im, prob.delays, &params).unwrap();
        assert!(cert.stable);
        assert_eq!(cert.lifted_dim, dim);
        assert!((cert.spectral_radius - 0.951599).abs() < 1e-5, "{}", cert.spectral_radius);
    }
}

#[test]
fn delay_free_variant_synthesizes() {
    let mut cfg = example::config();
    cfg.delays.r_con = 0;
    cfg.delays.r_com = 0;
    cfg.synthesis.auto_tune = true;
    let prob = cfg.build().unwrap();
    let (gains, cert) = synthesize(&prob.plant, &prob.graph, &prob.im, prob.delays, &prob.params).unwrap();
    assert!(cert.stable);
    assert_eq!(gains.r_used, 0);
    assert_eq!(cert.lifted_dim, 16);
}

#[test]
fn gains_file_is_deterministic_and_round_trips() {
    let prob = example::problem().unwrap();
    let mut params = prob.params.clone();
    params.mode = Mode::Output;
    let render = || {
        let (gains, cert) = synthesize(&prob.plant, &prob.graph, &prob.im, prob.delays, &params).unwrap();
        GainsFile::new(Mode::Output, &gains, Some(&cert)).to_toml_string().unwrap()
    };
    let text = render();
    assert_eq!(text, render());
    let parsed = GainsFile::parse(&text).unwrap();
    assert_eq!(parsed.to_toml_string().unwrap(), text);
    let gains = parsed.to_gain_set().unwrap();
    assert_eq!(gains.observer_r, Some(0));
}

#[test]
fn fixture_text_round_trips() {
    let cfg = ScenarioConfig::parse(example::CONFIG_TOML).unwrap();
    assert_eq!(cfg, example::config());
    assert_eq!(ScenarioConfig::parse(&cfg.to_toml_string().unwrap()).unwrap(), cfg);
}
