//! Final populations frozen from an independent piecewise DOP853 integration
//! (relative tolerance 1e-12) of the same master equation.

use sastirap::dynamics::{evolve, evolve_on, output_grid, ProtocolConfig};
use sastirap::pulses::{CdMode, CounterdiabaticParams, StirapParams};
use sastirap::units::{mhz, rate_per_us};
use sastirap::{DecoherenceRates, QutritState};

const TOL: f64 = 1e-7;

fn params(sigma: f64, t_s: f64) -> StirapParams {
    StirapParams::new(mhz(25.5), sigma, t_s)
}

fn drive(mode: CdMode) -> Option<CounterdiabaticParams> {
    Some(CounterdiabaticParams {
        mode,
        ..CounterdiabaticParams::ideal(mhz(185.0))
    })
}

fn relaxation() -> DecoherenceRates {
    DecoherenceRates::relaxation(rate_per_us(0.6), rate_per_us(0.83)).unwrap()
}

fn assert_close(got: [f64; 3], want: [f64; 3]) {
    for k in 0..3 {
        assert!((got[k] - want[k]).abs() < TOL, "p{k}: {got:?} vs {want:?}");
    }
}

fn final_pops(cfg: &ProtocolConfig) -> [f64; 3] {
    evolve(cfg, &QutritState::ground(), 1.0)
        .unwrap()
        .final_state()
        .populations()
}

#[test]
fn ideal_sastirap() {
    let cfg = ProtocolConfig::new(
        params(20.0, -30.0),
        drive(CdMode::IdealEffective),
        DecoherenceRates::none(),
    );
    assert_close(
        final_pops(&cfg),
        [5.030_858_071_210e-5, 1.485_989_810_858e-6, 0.999_948_205_429_5],
    );
}

#[test]
fn plain_stirap() {
    let cfg = ProtocolConfig::new(params(20.0, -30.0), None, DecoherenceRates::none());
    assert_close(
        final_pops(&cfg),
        [0.136_287_328_986, 0.014_334_891_274, 0.849_377_779_741],
    );
}

#[test]
fn two_photon_sastirap() {
    let cfg = ProtocolConfig::new(params(20.0, -30.0), drive(CdMode::TwoPhoton), DecoherenceRates::none());
    assert_close(
        final_pops(&cfg),
        [7.627_570_964_593e-4, 6.591_546_395_761e-5, 0.999_171_327_439_6],
    );
}

#[test]
fn two_photon_with_relaxation() {
    let cfg = ProtocolConfig::new(params(20.0, -30.0), drive(CdMode::TwoPhoton), relaxation());
    assert_close(
        final_pops(&cfg),
        [0.019_741_365_340_1, 0.041_384_692_736, 0.938_873_941_923_9],
    );
}

#[test]
fn relaxation_readout_and_window_end() {
    let sa = ProtocolConfig::new(params(20.0, -30.0), drive(CdMode::IdealEffective), relaxation());
    let times = output_grid(sa.t_start, sa.t_end, 1.0, &[20.0]).unwrap();
    let a = evolve_on(&sa, &QutritState::ground(), &times).unwrap();
    assert_close(
        a.state_at(20.0).unwrap().populations(),
        [0.018_584_265_344, 0.014_868_747_719, 0.966_546_986_936],
    );
    assert_close(
        a.final_state().populations(),
        [0.019_151_841_834, 0.041_999_602_109, 0.938_848_556_057],
    );
    let plain = ProtocolConfig { cd: None, ..sa };
    let b = evolve_on(&plain, &QutritState::ground(), &times).unwrap();
    assert_close(
        b.state_at(20.0).unwrap().populations(),
        [0.144_473_515_801, 0.032_364_137_738, 0.823_162_346_461],
    );
    assert_close(
        b.final_state().populations(),
        [0.153_013_048_17, 0.049_008_157_147, 0.797_978_794_682],
    );
}

#[test]
fn intuitive_ordering_falls_short() {
    let cfg = ProtocolConfig::new(params(20.0, 30.0), None, DecoherenceRates::none());
    let p = final_pops(&cfg);
    assert_close(p, [0.136_287_328_985_4, 0.317_984_118_089_1, 0.545_728_552_925_5]);
    assert!(p[2] < 0.849_377_779_741 - 0.2);
}

#[test]
fn slow_pulses_reach_adiabatic_limit() {
    let cfg = ProtocolConfig::new(params(80.0, -120.0), None, DecoherenceRates::none());
    let p = final_pops(&cfg);
    assert_close(p, [0.001_416_934_756_6, 0.001_045_026_609_7, 0.997_538_038_633_6]);
    assert!(p[2] > 0.99);
}

#[test]
fn fast_corner_transfer_time() {
    let p = params(10.0, -30.0);
    let cfg = ProtocolConfig::new(p, drive(CdMode::IdealEffective), DecoherenceRates::none());
    let traj = evolve(&cfg, &QutritState::ground(), 0.01).unwrap();
    let t = sastirap::adiabatic::transfer_time(&traj.times, &traj.populations()).unwrap();
    assert!((t - 11.288_711_055_381_757).abs() < 1e-6, "{t}");
}
