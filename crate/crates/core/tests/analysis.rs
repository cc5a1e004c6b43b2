use prethermal_core::analysis::{fit_power_law, stroboscopic_average};
use prethermal_core::floquet::IntegratorSettings;
use prethermal_core::lattice::{bloch_bands, PlaneWaveBasis};
use prethermal_core::tdse::{evolve, ObservableSpec, SampleMode, SampleSpec, TimeSeries};
use prethermal_core::units::DriveParams;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

#[test]
fn noisy_power_law_fit() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let noise = Normal::new(0.0, 0.05).unwrap();
    let times: Vec<f64> = (1..=100).map(|k| 20.0 * k as f64).collect();
    let values = times.iter().map(|t| 0.02 * t.powf(0.25) * (1.0 + noise.sample(&mut rng))).collect();
    let mut s = TimeSeries::new(times, SampleMode::External);
    s.push_channel("value", values).unwrap();
    let fit = fit_power_law(&s, "value", (20.0, 2000.0)).unwrap();
    assert!((fit.exponent - 0.25).abs() < 0.02, "{}", fit.exponent);
    assert_eq!(fit.samples, 100);
    assert!(fit_power_law(&s, "value", (10.0, 2000.0)).is_err());
    assert!(fit_power_law(&s, "value", (20.0, 80.0)).is_err());
}

#[test]
fn undriven_average_is_one_for_any_burn_in() {
    let basis = PlaneWaveBasis::new(12, 0.0).unwrap();
    let psi0 = bloch_bands(10.0, &basis).ground_state();
    let d = DriveParams::new(10.0, 0.0, 1.3).unwrap();
    let obs = ObservableSpec { b_max: 2, peak_max: 1 };
    let s = evolve(&psi0, &d, &basis, 60.0 * d.period(), SampleSpec::Stroboscopic, &obs, &IntegratorSettings::default()).unwrap();
    for burn_in in [0, 10, 40] {
        let avg = stroboscopic_average(&s, burn_in).unwrap();
        let f0 = avg.iter().find(|a| a.name == "f0").unwrap();
        assert!((f0.mean - 1.0).abs() < 1e-10);
        assert!(f0.std_dev < 1e-10);
    }
    assert!(stroboscopic_average(&s, 55).is_err());
}
