//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

use std::f64::consts::PI;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use nanofiber_core::analysis::{
    fit_coincidences, fit_exponential, fit_vtype_spectrum, mean_atom_number, transit_time, CoincidenceFitOptions,
    GeometryConfig, VTypeFitOptions,
};
use nanofiber_core::bloch::{
    dip_metrics, excitation_spectrum, spectral_fwhm, two_level_steady, vtype_steady, DensityMatrix, Emitter,
    VTypeScheme,
};
use nanofiber_core::correlations::{dominant_oscillation, g2_curve, CoincidenceModel};
use nanofiber_core::curves::{linspace, Histogram};
use nanofiber_core::montecarlo::{
    decay_scan, excited_population_average, DetectorConfig, GatingConfig, HbtExperiment, OccupancyModel,
};
use nanofiber_core::orbit::{radius_from_frequency, RadiusMode};
use nanofiber_core::params::{rabi_from_intensity, AtomParams, DriveParams};
use nanofiber_core::vdw::{distance_for_shift, surface_line_shape, DistanceDistribution, VdwConfig};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn atom() -> AtomParams {
    AtomParams::default()
}

fn single_atom_hbt(atoms: u32, duration: f64) -> HbtExperiment {
    HbtExperiment {
        emitter: Emitter::two_level(&atom()),
        drive: DriveParams::resonant(13.0),
        occupancy: OccupancyModel::Fixed { atoms },
        gating: GatingConfig::continuous(),
        detector: DetectorConfig::default(),
        duration,
        bin_width: 1.0,
        max_delay: 150.0,
    }
}

fn plateau(hist: &Histogram, from: f64) -> f64 {
    let c = hist.centers();
    let v: Vec<f64> = c
        .iter()
        .zip(hist.counts())
        .filter(|(t, _)| t.abs() >= from)
        .map(|(_, &n)| n as f64)
        .collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn antibunching() -> Outcome {
    let g = g2_curve(&Emitter::two_level(&atom()), &DriveParams::resonant(13.0), &[0.0, 10.0])
        .map_err(|e| e.to_string())?;
    let start = Instant::now();
    let exp = single_atom_hbt(1, 20_000.0);
    let out = exp.run(11).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let total = out.histogram.total();
    let ratio = out.histogram.zero_bin() as f64 / plateau(&out.histogram, 100.0);
    check(
        g.values[0] == 0.0 && total >= 100_000 && ratio < 0.05 && secs < 120.0,
        format!(
            "g2(0) = {}, coincidences {total}, zero bin / plateau = {ratio:.4} (< 0.05), {secs:.1} s (< 120)",
            g.values[0]
        ),
    )
}

fn n_atom_dip() -> Outcome {
    let worst = (1..=10u32)
        .map(|n| {
            let m = CoincidenceModel {
                n_atoms: n,
                amplitude: 3.7,
                background: 0.0,
            };
            (m.normalized_dip() - (1.0 - 1.0 / f64::from(n))).abs()
        })
        .fold(0.0, f64::max);
    let exp = single_atom_hbt(2, 5_000.0);
    let out = exp.run(12).map_err(|e| e.to_string())?;
    let opts = CoincidenceFitOptions {
        background: Some(exp.accidental_background(out.singles)),
        ..CoincidenceFitOptions::default()
    };
    let fit = fit_coincidences(&out.histogram, &opts).map_err(|e| e.to_string())?;
    check(
        worst <= 1e-12 && fit.n_atoms == 2,
        format!(
            "max |dip - (1 - 1/N)| = {worst:.1e} for N = 1..10; two-atom Monte-Carlo ({} coincidences) fits N = {}",
            out.histogram.total(),
            fit.n_atoms
        ),
    )
}

fn rabi_recovery() -> Outcome {
    let gamma = 1.0 / 0.030;
    let emitter = Emitter::TwoLevel { gamma };
    let centers = linspace(-150.0, 150.0, 301);
    // bin-centre model with Poisson noise, roughly 150 counts on the plateau
    let g = g2_curve(&emitter, &DriveParams::resonant(13.0), &linspace(0.0, 150.0, 151)).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    let mut ok = true;
    for n in [1u32, 2] {
        let model = CoincidenceModel {
            n_atoms: n,
            amplitude: 140.0 / f64::from(n * n),
            background: 10.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(u64::from(n));
        let counts = centers
            .iter()
            .map(|t| Poisson::new(model.eval(g.at(t.abs())).max(1e-9)).unwrap().sample(&mut rng) as u64)
            .collect();
        let hist = Histogram::from_counts(1.0, counts).map_err(|e| e.to_string())?;
        let opts = CoincidenceFitOptions {
            gamma,
            background: Some(10.0),
            ..CoincidenceFitOptions::default()
        };
        let fit = fit_coincidences(&hist, &opts).map_err(|e| e.to_string())?;
        let rabi = fit.result.value("rabi").unwrap();
        ok &= fit.n_atoms == n && (rabi - 13.0).abs() <= 0.5;
        parts.push(format!("N={n}: fit N={} rabi={rabi:.3} MHz", fit.n_atoms));
    }
    let delays = linspace(0.0, 400.0, 801);
    let curve = g2_curve(&emitter, &DriveParams::resonant(13.0), &delays).map_err(|e| e.to_string())?;
    let f = dominant_oscillation(&delays, &curve.values, (0.0, 400.0)).map_err(|e| e.to_string())?;
    let omega = 2.0 * PI * 13.0;
    let expected = (omega * omega - (gamma / 4.0).powi(2)).sqrt() / (2.0 * PI);
    let rel = (f - expected).abs() / expected;
    ok &= rel < 0.05;
    parts.push(format!("oscillation {f:.3} MHz vs {expected:.3} ({:.2}% off, < 5%)", 100.0 * rel));
    check(ok, parts.join("; "))
}

fn dwell_decay() -> Outcome {
    let start = Instant::now();
    let gating = GatingConfig {
        off_period: 1000.0,
        cycle_period: 21_000.0,
        gate_delay: 0.0,
        gate_width: 50.0,
    };
    let detector = DetectorConfig {
        detection_efficiency: 0.05,
        ..DetectorConfig::default()
    };
    let scan = decay_scan(
        &Emitter::two_level(&atom()),
        &DriveParams::resonant(5.0),
        &OccupancyModel::poisson_with_mean(0.2, 180.0),
        &gating,
        &detector,
        10_000,
        21,
    )
    .map_err(|e| e.to_string())?;
    let counts: Vec<f64> = scan.counts.iter().map(|&c| c as f64).collect();
    let fit = fit_exponential(&scan.delays, &counts, None).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let tau = fit.parameter("tau").unwrap();
    check(
        fit.converged && (tau.value - 180.0).abs() <= 18.0 && secs < 60.0,
        format!(
            "tau = {:.1} +/- {:.1} us (180 +/- 18), {} counts, {secs:.1} s (< 60)",
            tau.value,
            tau.uncertainty,
            scan.counts.iter().sum::<u64>()
        ),
    )
}

fn vtype_dip() -> Outcome {
    let scheme = VTypeScheme::default().with_split(1.5);
    let natural = atom().linewidth_mhz();
    let fine = linspace(-15.0, 15.0, 3001);
    let coarse = linspace(-15.0, 15.0, 121);
    let mut ok = true;
    let mut parts = Vec::new();
    let mut last_depth = 0.0;
    for intensity in [0.7, 3.5, 7.0] {
        let rabi = rabi_from_intensity(intensity, &atom(), 1.0 / 1.4).map_err(|e| e.to_string())?;
        let spec = excitation_spectrum(&Emitter::VType(scheme), rabi, &fine).map_err(|e| e.to_string())?;
        let Some(dip) = dip_metrics(&spec, 0.0) else {
            return Err(format!("no central dip at {intensity} mW/cm^2"));
        };
        let data = excitation_spectrum(&Emitter::VType(scheme), rabi, &coarse).map_err(|e| e.to_string())?;
        let fit = fit_vtype_spectrum(&data, &VTypeFitOptions::default()).map_err(|e| e.to_string())?;
        let split = fit.value("delta_split").unwrap();
        ok &= dip.width < natural && dip.depth > last_depth && (split - 1.5).abs() <= 0.2;
        last_depth = dip.depth;
        parts.push(format!(
            "{intensity} mW/cm^2: width {:.3} MHz, depth {:.4}, fitted split {split:.4}",
            dip.width, dip.depth
        ));
    }
    check(ok, parts.join("; "))
}

fn weak_drive_linewidth() -> Outcome {
    let step = 0.01;
    // wide enough that the wings are negligible at the grid edges
    let grid = linspace(-200.0, 200.0, 40_001);
    let spec = excitation_spectrum(&Emitter::two_level(&atom()), 0.01, &grid).map_err(|e| e.to_string())?;
    let w = spectral_fwhm(&spec).map_err(|e| e.to_string())?;
    let natural = atom().linewidth_mhz();
    check(
        (w - natural).abs() <= step,
        format!("FWHM {w:.4} MHz vs {natural:.4} (grid step {step})"),
    )
}

fn vdw_mapping() -> Outcome {
    let cfg = VdwConfig::default();
    let near = distance_for_shift(-15.0, &cfg).map_err(|e| e.to_string())?;
    let far = distance_for_shift(-1.0, &cfg).map_err(|e| e.to_string())?;
    let gamma = atom().linewidth_mhz();
    let grid = linspace(-300.0, 30.0, 3301);
    let trace_a = surface_line_shape(&DistanceDistribution::uniform(10.0, 100.0, 901).unwrap(), &cfg, gamma, &grid)
        .map_err(|e| e.to_string())?;
    let trace_b = surface_line_shape(&DistanceDistribution::uniform(50.0, 100.0, 501).unwrap(), &cfg, gamma, &grid)
        .map_err(|e| e.to_string())?;
    let tail = trace_a.value_at(-150.0) / trace_b.value_at(-150.0);
    let peak = |s: &nanofiber_core::curves::Spectrum| s.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    let (b_pos, b_val) = peak(&trace_b);
    let (_, a_val) = peak(&trace_a);
    let b_width = spectral_fwhm(&trace_b).map_err(|e| e.to_string())?;
    check(
        (40.0..42.0).contains(&near)
            && (far - 100.0).abs() < 1e-9
            && tail > 10.0
            && b_pos.abs() < 4.0
            && b_width <= 15.0
            && b_val > 1.5 * a_val,
        format!(
            "-15 MHz -> {near:.2} nm, -1 MHz -> {far:.1} nm; A/B at -150 MHz = {tail:.0}; B peak at {b_pos:.2} MHz, FWHM {b_width:.2} MHz, B/A peak = {:.2}",
            b_val / a_val
        ),
    )
}

fn estimators() -> Outcome {
    let n = mean_atom_number(0.7e9, &GeometryConfig::default()).map_err(|e| e.to_string())?;
    let t = transit_time(10.0, 1.0).map_err(|e| e.to_string())?;
    let r = radius_from_frequency(1.5, &RadiusMode::AnchoredScaling { r_ref: 30.0, nu_ref: 1.5 })
        .map_err(|e| e.to_string())?;
    check(
        (n - 0.0264).abs() < 5e-5 && (t - 10.0).abs() < 1e-12 && (r - 30.0).abs() < 1e-12,
        format!("mean atom number {n:.4}, transit {t} us, radius {r} nm"),
    )
}

fn oracle_equivalence() -> Outcome {
    let emitter = Emitter::two_level(&atom());
    let drive = DriveParams::resonant(13.0);
    let checkpoints: Vec<f64> = (1..=10).map(|k| 0.01 * k as f64).collect();
    let mc = excited_population_average(&emitter, &drive, &checkpoints, 20_000, 5).map_err(|e| e.to_string())?;
    let system = emitter.system(&drive).map_err(|e| e.to_string())?;
    let mut times = vec![0.0];
    times.extend(&checkpoints);
    let rho = system
        .evolve(&DensityMatrix::basis(2, emitter.ground_level()), &times)
        .map_err(|e| e.to_string())?;
    let worst = mc
        .iter()
        .zip(&rho[1..])
        .map(|(est, r)| (est.mean - r.population(1)).abs() / est.std_err)
        .fold(0.0, f64::max);

    let split = 100.0 * atom().linewidth_mhz();
    let scheme = VTypeScheme {
        gamma: atom().gamma_pop,
        delta_split: split,
        p: 0.0,
        drive_ratio: 1.0,
        ground_split: None,
    };
    let v = vtype_steady(&scheme, &DriveParams::new(0.5 * split, 13.0)).map_err(|e| e.to_string())?;
    let two = two_level_steady(&DriveParams::resonant(13.0), &atom()).map_err(|e| e.to_string())?;
    let rel = (v.population(1) - two.rho_ee).abs() / two.rho_ee;
    check(
        worst < 3.0 && rel < 0.01,
        format!("worst MC deviation {worst:.2} standard errors over 10 checkpoints (< 3); V-type vs two-level {:.3}% (< 1%)", 100.0 * rel),
    )
}

fn determinism_and_conservation() -> Outcome {
    let exp = HbtExperiment {
        occupancy: OccupancyModel::poisson_with_mean(2.0, 180.0),
        gating: GatingConfig::default(),
        ..single_atom_hbt(1, 4_000.0)
    };
    let run = |threads: usize| -> Result<Vec<u8>, String> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| e.to_string())?;
        pool.install(|| {
            let out = exp.run(99).map_err(|e| e.to_string())?;
            let mut bytes = Vec::new();
            out.histogram.write_csv(&mut bytes).map_err(|e| e.to_string())?;
            bytes.extend(format!("{} {:?}", out.emitted, out.singles).bytes());
            Ok(bytes)
        })
    };
    let reference = run(1)?;
    let identical = [4, 8].iter().map(|&t| run(t)).collect::<Result<Vec<_>, _>>()?.iter().all(|b| *b == reference);

    let mut worst_trace = 0.0f64;
    let mut worst_herm = 0.0f64;
    let systems = [
        Emitter::two_level(&atom()).system(&DriveParams::new(3.0, 13.0)),
        Emitter::VType(VTypeScheme::default()).system(&DriveParams::resonant(6.0)),
    ];
    for sys in systems {
        let sys = sys.map_err(|e| e.to_string())?;
        let prop = sys.rk4_propagator(1e-4);
        let mut rho = DensityMatrix::basis(sys.dim(), 0);
        for _ in 0..100_000 {
            rho = prop.apply(&rho);
            worst_trace = worst_trace.max((rho.trace().re - 1.0).abs() + rho.trace().im.abs());
            worst_herm = worst_herm.max(rho.hermiticity_defect());
        }
    }
    check(
        identical && worst_trace < 1e-9 && worst_herm < 1e-12,
        format!(
            "1/4/8 workers byte-identical: {identical}; trace drift {worst_trace:.1e} (< 1e-9), Hermiticity defect {worst_herm:.1e} (< 1e-12) over 1e5 steps"
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("antibunching", antibunching),
        ("n-atom dip", n_atom_dip),
        ("rabi recovery", rabi_recovery),
        ("dwell decay", dwell_decay),
        ("v-type dip", vtype_dip),
        ("weak-drive linewidth", weak_drive_linewidth),
        ("vdw mapping", vdw_mapping),
        ("estimators", estimators),
        ("oracle equivalence", oracle_equivalence),
        ("determinism and conservation", determinism_and_conservation),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS  {:>2} {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {:>2} {name}: {detail}", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
