use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;

use nanofiber_core::analysis::{
    fit_coincidences, fit_exponential, fit_vtype_spectrum, localized_atom_count_from_spectra, mean_atom_number,
    transit_time, CoincidenceFitOptions, GeometryConfig, VTypeFitOptions,
};
use nanofiber_core::bloch::{dip_metrics, excitation_spectrum, spectral_fwhm, Emitter};
use nanofiber_core::correlations::g2_curve;
use nanofiber_core::curves::{linspace, Histogram, Spectrum};
use nanofiber_core::montecarlo::{decay_scan, DecayScan, GatingConfig, HbtExperiment, OccupancyModel};
use nanofiber_core::orbit::{radius_from_frequency, stationary_orbit, stationary_orbits, RadiusMode};
use nanofiber_core::vdw::{surface_line_shape, DistanceDistribution};

use crate::config::RunConfig;
use crate::{
    Cli, Command, DecayArgs, DriveArgs, EmitterModel, EstimateCommand, FitCommand, G2Args, HbtArgs, OrbitArgs,
    OutputArg, SpectrumArgs, SpectrumModel, Failure,
};

type Outcome = Result<(), Failure>;

pub fn run(cli: Cli) -> Outcome {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    match cli.command {
        Command::Spectrum(a) => spectrum(cfg, a),
        Command::G2(a) => g2(cfg, a),
        Command::Hbt(a) => hbt(cfg, a),
        Command::Decay(a) => decay(cfg, a),
        Command::Orbit(a) => orbit(cfg, a),
        Command::Fit(f) => fit(cfg, f),
        Command::Estimate(e) => estimate(cfg, e),
    }
}

fn seed(cfg: &RunConfig, command: &str) -> Result<u64, Failure> {
    cfg.seed
        .ok_or_else(|| Failure::Usage(format!("{command} is stochastic: pass --seed or set `seed` in the config")))
}

fn apply_drive(cfg: &mut RunConfig, a: &DriveArgs) -> Outcome {
    if let Some(r) = a.rabi {
        cfg.drive.rabi = r;
        cfg.drive.intensity = None;
    }
    if let Some(i) = a.intensity {
        cfg.drive.intensity = Some(i);
    }
    if let Some(s) = a.rabi_scale {
        cfg.drive.rabi_scale = s;
    }
    if let Some(d) = a.detuning {
        cfg.drive.detuning = d;
    }
    let mut scheme = cfg.scheme();
    if let Some(d) = a.delta_split {
        scheme.delta_split = d;
    }
    if let Some(p) = a.p {
        scheme.p = p;
    }
    cfg.scheme = Some(scheme);
    cfg.validate()
}

fn write_output(out: &OutputArg, body: impl FnOnce(&mut dyn Write) -> Outcome) -> Outcome {
    match &out.output {
        Some(path) => {
            let file = File::create(path)
                .map_err(|e| Failure::Usage(format!("cannot create {}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            body(&mut w)?;
            w.flush().map_err(|e| Failure::Usage(format!("writing {}: {e}", path.display())))
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            body(&mut w)?;
            w.flush().map_err(|e| Failure::Usage(e.to_string()))
        }
    }
}

fn write_json<T: Serialize>(out: &OutputArg, value: &T) -> Outcome {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Numerical(e.to_string()))?;
    write_output(out, |w| writeln!(w, "{text}").map_err(|e| Failure::Usage(e.to_string())))
}

fn read_input(path: &Path) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    let res = if path == Path::new("-") {
        io::stdin().read_to_end(&mut buf)
    } else {
        File::open(path).and_then(|mut f| f.read_to_end(&mut buf))
    };
    res.map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(buf)
}

fn spectrum(mut cfg: RunConfig, a: SpectrumArgs) -> Outcome {
    apply_drive(&mut cfg, &a.drive)?;
    let g = cfg.grid;
    let grid = linspace(a.from.unwrap_or(g.from), a.to.unwrap_or(g.to), a.points.unwrap_or(g.points));
    let rabi = cfg.drive_params()?.rabi;
    let spec = match a.model {
        SpectrumModel::TwoLevel => excitation_spectrum(&Emitter::two_level(&cfg.atom), rabi, &grid)?,
        SpectrumModel::Vtype => excitation_spectrum(&Emitter::VType(cfg.scheme()), rabi, &grid)?,
        SpectrumModel::VdwSurface => {
            let s = cfg.surface;
            let dist = DistanceDistribution::uniform(a.d_min.unwrap_or(s.d_min), a.d_max.unwrap_or(s.d_max), s.d_points)?;
            surface_line_shape(&dist, &cfg.vdw(), cfg.atom.linewidth_mhz(), &grid)?
        }
    };
    write_output(&a.out, |w| Ok(spec.write_csv(w)?))?;
    let width = spectral_fwhm(&spec).map(|w| format!("{w:.3} MHz")).unwrap_or_else(|_| "n/a".into());
    let dip = dip_metrics(&spec, 0.0)
        .map(|d| format!(", central dip width {:.3} MHz depth {:.4}", d.width, d.depth))
        .unwrap_or_default();
    eprintln!("spectrum: {} points, FWHM {width}{dip}", spec.len());
    Ok(())
}

fn emitter(cfg: &RunConfig, model: EmitterModel) -> Emitter {
    match model {
        EmitterModel::TwoLevel => Emitter::two_level(&cfg.atom),
        EmitterModel::Vtype => Emitter::VType(cfg.scheme()),
    }
}

fn g2(mut cfg: RunConfig, a: G2Args) -> Outcome {
    apply_drive(&mut cfg, &a.drive)?;
    if !(a.step > 0.0) || !(a.max_delay > 0.0) {
        return Err(Failure::Usage("--step and --max-delay must be > 0".into()));
    }
    let n = (a.max_delay / a.step).round() as usize + 1;
    let delays = linspace(0.0, a.step * (n - 1) as f64, n);
    let curve = g2_curve(&emitter(&cfg, a.model), &cfg.drive_params()?, &delays)?;
    write_output(&a.out, |w| Ok(curve.write_csv(w)?))?;
    eprintln!("g2: {n} delays, g2(0) = {}", curve.values[0]);
    Ok(())
}

fn hbt(mut cfg: RunConfig, a: HbtArgs) -> Outcome {
    apply_drive(&mut cfg, &a.drive)?;
    let seed = seed(&cfg, "hbt")?;
    let mut detector = cfg.detector;
    if let Some(e) = a.efficiency {
        detector.detection_efficiency = e;
    }
    let exp = HbtExperiment {
        emitter: Emitter::two_level(&cfg.atom),
        drive: cfg.drive_params()?,
        occupancy: match a.mean_atoms {
            Some(atoms) => OccupancyModel::Fixed { atoms },
            None => cfg.occupancy,
        },
        gating: if a.continuous { GatingConfig::continuous() } else { cfg.gating },
        detector,
        duration: a.duration.unwrap_or(cfg.hbt.duration),
        bin_width: a.bin_width.unwrap_or(cfg.hbt.bin_width),
        max_delay: a.max_delay.unwrap_or(cfg.hbt.max_delay),
    };
    exp.occupancy.validate()?;
    exp.detector.validate()?;
    let out = exp.run(seed)?;
    write_output(&a.out, |w| Ok(out.histogram.write_csv(w)?))?;
    eprintln!(
        "hbt: {} photons emitted, singles {} / {}, {} coincidences, zero-delay bin {}, accidental background {:.4} per bin",
        out.emitted,
        out.singles[0],
        out.singles[1],
        out.histogram.total(),
        out.histogram.zero_bin(),
        exp.accidental_background(out.singles)
    );
    Ok(())
}

fn decay(cfg: RunConfig, a: DecayArgs) -> Outcome {
    let seed = seed(&cfg, "decay")?;
    let d = cfg.decay;
    let (mean, dwell) = match d.occupancy {
        OccupancyModel::Poisson { dwell_mean, .. } => (d.occupancy.mean_occupancy(), dwell_mean),
        OccupancyModel::Fixed { atoms } => (f64::from(atoms), f64::INFINITY),
    };
    let occupancy = if a.occupancy.is_some() || a.dwell.is_some() {
        let dwell = a.dwell.unwrap_or(if dwell.is_finite() { dwell } else { 180.0 });
        OccupancyModel::poisson_with_mean(a.occupancy.unwrap_or(mean), dwell)
    } else {
        d.occupancy
    };
    occupancy.validate()?;
    let mut detector = cfg.detector;
    detector.detection_efficiency = a.efficiency.unwrap_or(d.detection_efficiency);
    detector.validate()?;
    let drive = nanofiber_core::params::DriveParams::resonant(a.rabi.unwrap_or(d.rabi));
    let scan = decay_scan(
        &Emitter::two_level(&cfg.atom),
        &drive,
        &occupancy,
        &d.gating,
        &detector,
        a.cycles.unwrap_or(d.cycles),
        seed,
    )?;
    write_output(&a.out, |w| Ok(scan.write_csv(w)?))?;
    eprintln!(
        "decay: {} cycles, {} gates of {} us, {} counts",
        scan.n_cycles,
        scan.delays.len(),
        scan.gate_width,
        scan.counts.iter().sum::<u64>()
    );
    Ok(())
}

fn orbit(cfg: RunConfig, a: OrbitArgs) -> Outcome {
    let params = cfg.orbit();
    if let Some(f) = a.frequency {
        let mode = match (a.r_ref, a.nu_ref, cfg.radius_mode) {
            (Some(r_ref), Some(nu_ref), _) => RadiusMode::AnchoredScaling { r_ref, nu_ref },
            (_, _, Some(m)) => m,
            _ => {
                return Err(Failure::Usage(
                    "--frequency needs --r-ref and --nu-ref or a [radius_mode] config section".into(),
                ))
            }
        };
        let r = radius_from_frequency(f, &mode)?;
        #[derive(Serialize)]
        struct Radius {
            frequency_mhz: f64,
            radius_nm: f64,
            mode: RadiusMode,
        }
        write_json(&a.out, &Radius { frequency_mhz: f, radius_nm: r, mode })?;
        eprintln!("orbit: {f} MHz -> {r:.3} nm");
        return Ok(());
    }
    let ls: Vec<f64> = match (a.l, a.sweep) {
        (Some(l), None) => vec![l],
        (None, Some(n)) if n >= 1 => {
            if !(a.l_min > 0.0 && a.l_max >= a.l_min) {
                return Err(Failure::Usage("need 0 < --l-min <= --l-max".into()));
            }
            linspace(a.l_min.ln(), a.l_max.ln(), n).into_iter().map(f64::exp).collect()
        }
        _ => return Err(Failure::Usage("give exactly one of --L, --sweep-l N (N >= 1) or --frequency".into())),
    };
    if let [l] = ls[..] {
        // surfaces the no-orbit error for a single angular momentum
        stationary_orbit(l, &params)?;
    }
    let mut rows = Vec::new();
    for &l in &ls {
        match stationary_orbits(l, &params) {
            Ok(sols) => rows.extend(sols.into_iter().map(|s| (l, s))),
            Err(nanofiber_core::error::Error::NoOrbit { .. }) if ls.len() > 1 => {}
            Err(e) => return Err(e.into()),
        }
    }
    write_output(&a.out, |w| {
        let io = |e: io::Error| Failure::Usage(e.to_string());
        writeln!(w, "L,radius_nm,orbit_frequency_MHz,radial_frequency_MHz,stability").map_err(io)?;
        for (l, s) in &rows {
            writeln!(
                w,
                "{l},{},{},{},{}",
                s.radius, s.orbit_frequency, s.radial_frequency, s.stability
            )
            .map_err(io)?;
        }
        Ok(())
    })?;
    eprintln!("orbit: {} stationary orbits over {} angular momenta", rows.len(), ls.len());
    Ok(())
}

fn fit(cfg: RunConfig, f: FitCommand) -> Outcome {
    match f {
        FitCommand::Exp { input, out } => {
            let scan = DecayScan::read_csv(read_input(&input)?.as_slice())?;
            let counts: Vec<f64> = scan.counts.iter().map(|&c| c as f64).collect();
            let r = fit_exponential(&scan.delays, &counts, None)?;
            write_json(&out, &r)?;
            let tau = r.parameter("tau").expect("tau present");
            eprintln!("fit exp: tau = {:.3} +/- {:.3} us (converged: {})", tau.value, tau.uncertainty, r.converged);
        }
        FitCommand::Coincidences {
            input,
            background,
            candidates,
            rabi_guess,
            out,
        } => {
            let hist = Histogram::read_csv(read_input(&input)?.as_slice())?;
            let opts = CoincidenceFitOptions {
                gamma: cfg.atom.gamma_pop,
                detuning: cfg.drive.detuning,
                candidates: candidates.unwrap_or(cfg.fit.candidates),
                background: background.or(cfg.fit.background),
                rabi_guess,
            };
            let r = fit_coincidences(&hist, &opts)?;
            write_json(&out, &r)?;
            eprintln!(
                "fit coincidences: N = {}, rabi = {:.3} MHz, antibunching: {}",
                r.n_atoms,
                r.result.value("rabi").unwrap_or(0.0),
                r.antibunching
            );
        }
        FitCommand::Vtype {
            input,
            delta_guess,
            rabi_guess,
            p,
            out,
        } => {
            let spec = Spectrum::read_csv(read_input(&input)?.as_slice())?;
            let mut scheme = cfg.scheme();
            if let Some(p) = p {
                scheme.p = p;
            }
            scheme.validate()?;
            let opts = VTypeFitOptions {
                scheme,
                delta_guess,
                rabi_guess,
                weights: None,
            };
            let r = fit_vtype_spectrum(&spec, &opts)?;
            write_json(&out, &r)?;
            let d = r.parameter("delta_split").expect("delta_split present");
            eprintln!("fit vtype: delta_split = {:.4} +/- {:.4} MHz", d.value, d.uncertainty);
        }
    }
    Ok(())
}

fn estimate(cfg: RunConfig, e: EstimateCommand) -> Outcome {
    let out = OutputArg { output: None };
    match e {
        EstimateCommand::Atoms { density, length } => {
            let geom = GeometryConfig {
                observation_length: length.unwrap_or(cfg.geometry.observation_length),
                ..cfg.geometry
            };
            let n = mean_atom_number(density, &geom)?;
            #[derive(Serialize)]
            struct Atoms {
                density_cm3: f64,
                geometry: GeometryConfig,
                shell_volume_um3: f64,
                mean_atom_number: f64,
            }
            write_json(
                &out,
                &Atoms {
                    density_cm3: density,
                    geometry: geom,
                    shell_volume_um3: geom.shell_volume(),
                    mean_atom_number: n,
                },
            )
        }
        EstimateCommand::Transit { speed, length } => {
            let t = transit_time(speed, length)?;
            write_json(&out, &serde_json::json!({ "speed_cm_s": speed, "length_um": length, "transit_time_us": t }))
        }
        EstimateCommand::Localized { many, single } => {
            let a = Spectrum::read_csv(read_input(&many)?.as_slice())?;
            let b = Spectrum::read_csv(read_input(&single)?.as_slice())?;
            let n = localized_atom_count_from_spectra(&a, &b)?;
            write_json(
                &out,
                &serde_json::json!({ "integrated_many": a.integral(), "integrated_single": b.integral(), "atom_count": n }),
            )
        }
    }
}
