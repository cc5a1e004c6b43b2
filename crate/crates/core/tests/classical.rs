use prethermal_core::classical::{linearized_monodromy, mathieu_parameters, nonlinear_trajectory, checked_monodromy};
use prethermal_core::units::DriveParams;
use proptest::prelude::*;

/// Least-squares slope of `ys` against `xs`.
fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn small_amplitude_growth_matches_monodromy() {
    for &(alpha, omega) in &[(0.2, 2.0), (0.5, 2.1), (1.0, 1.0)] {
        let drive = DriveParams::new(10.0, alpha, omega).unwrap();
        let m = linearized_monodromy(&drive, 4096).unwrap();
        assert!(!m.stable, "({alpha}, {omega}) should be unstable");

        let periods = 10;
        let per_period = 4000;
        let traj = nonlinear_trajectory(&drive, 1e-6, 0.0, periods as f64 * drive.period(), periods * per_period).unwrap();
        let w0 = drive.omega0();
        let (mut ts, mut logs) = (Vec::new(), Vec::new());
        for nu in 3..=periods {
            let k = nu * per_period;
            let amp = (traj.theta[k].powi(2) + (traj.theta_dot[k] / w0).powi(2)).sqrt();
            ts.push(traj.times[k]);
            logs.push(amp.ln());
        }
        let fitted = slope(&ts, &logs);
        let predicted = m.growth_rate();
        assert!((fitted / predicted - 1.0).abs() < 0.05, "({alpha}, {omega}): fitted {fitted}, monodromy {predicted}");
    }
}

#[test]
fn large_omega_is_stable() {
    for alpha in [0.1, 1.0, 10.0] {
        let drive = DriveParams::new(10.0, alpha, 10.0).unwrap();
        let (a, q) = mathieu_parameters(&drive);
        assert!(a < 0.05 && q < 0.25);
        assert!(checked_monodromy(&drive).unwrap().stable);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn monodromy_is_area_preserving(la in -1.0f64..1.0, lw in -1.0f64..1.0, phase in 0.0f64..6.3) {
        let drive = DriveParams::new(10.0, 10f64.powf(la), 10f64.powf(lw)).unwrap().with_phase(phase).unwrap();
        let m = checked_monodromy(&drive).unwrap();
        prop_assert!((m.det - 1.0).abs() < 1e-8, "det {}", m.det);
        prop_assert_eq!(m.stable, m.trace.abs() <= 2.0);
    }

    #[test]
    fn verdict_survives_step_doubling(la in -1.0f64..1.0, lw in -1.0f64..1.0) {
        let drive = DriveParams::new(10.0, 10f64.powf(la), 10f64.powf(lw)).unwrap();
        let coarse = linearized_monodromy(&drive, 2048).unwrap();
        let fine = linearized_monodromy(&drive, 4096).unwrap();
        // Cells sitting on the boundary itself may legitimately flip.
        if (coarse.trace.abs() - 2.0).abs() > 1e-6 {
            prop_assert_eq!(coarse.stable, fine.stable);
        }
    }
}
