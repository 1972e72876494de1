use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lm::{Separable, SeparableFit};
use crate::bloch::{dip_metrics, excitation_spectrum, spectral_fwhm, Emitter, VTypeScheme};
use crate::correlations::g2_curve;
use crate::curves::{Histogram, Spectrum};
use crate::error::{ensure_positive, Error, Result};
use crate::params::{AtomParams, DriveParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParameter {
    pub name: String,
    pub value: f64,
    /// One standard deviation from the local quadratic model.
    pub uncertainty: f64,
    /// Held constant during the fit (given, or a discrete hypothesis).
    #[serde(default)]
    pub fixed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: String,
    pub parameters: Vec<FitParameter>,
    /// sqrt of the weighted sum of squared residuals.
    pub residual_norm: f64,
    pub degrees_of_freedom: usize,
    pub iterations: usize,
    pub converged: bool,
}

impl FitResult {
    pub fn parameter(&self, name: &str) -> Option<&FitParameter> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.parameter(name).map(|p| p.value)
    }

    pub fn uncertainty(&self, name: &str) -> Option<f64> {
        self.parameter(name).map(|p| p.uncertainty)
    }

    pub fn reduced_chi2(&self) -> f64 {
        if self.degrees_of_freedom > 0 {
            self.residual_norm.powi(2) / self.degrees_of_freedom as f64
        } else {
            0.0
        }
    }

    /// Builds the result from a separable fit. With `absolute_sigma` the
    /// weights are taken as inverse variances; otherwise the covariance is
    /// scaled by the reduced chi-square.
    fn from_separable(model: &str, names: &[&str], fit: &SeparableFit, n_data: usize, absolute_sigma: bool) -> Self {
        let values: Vec<f64> = fit.nonlinear.iter().chain(&fit.linear).copied().collect();
        let dof = n_data.saturating_sub(values.len());
        let s2 = if absolute_sigma {
            1.0
        } else if dof > 0 {
            fit.ssr / dof as f64
        } else {
            0.0
        };
        let parameters = names
            .iter()
            .zip(&values)
            .enumerate()
            .map(|(k, (name, &value))| FitParameter {
                name: name.to_string(),
                value,
                uncertainty: (fit.covariance[(k, k)].max(0.0) * s2).sqrt(),
                fixed: false,
            })
            .collect();
        Self {
            model: model.to_string(),
            parameters,
            residual_norm: fit.ssr.sqrt(),
            degrees_of_freedom: dof,
            iterations: fit.iterations,
            converged: fit.converged && fit.ssr.is_finite(),
        }
    }

    fn push_fixed(&mut self, name: &str, value: f64) {
        self.parameters.push(FitParameter {
            name: name.to_string(),
            value,
            uncertainty: 0.0,
            fixed: true,
        });
    }
}

fn poisson_sqrt_weights(y: &[f64]) -> Vec<f64> {
    y.iter().map(|v| 1.0 / v.max(1.0).sqrt()).collect()
}

/// A * exp(-t / tau) + B by weighted least squares. Weights default to
/// Poisson, 1 / max(y, 1). Parameters: A, tau, B.
pub fn fit_exponential(times: &[f64], counts: &[f64], weights: Option<&[f64]>) -> Result<FitResult> {
    let n = times.len();
    if n < 4 {
        return Err(Error::Data(format!("exponential fit needs at least 4 points, got {n}")));
    }
    if counts.len() != n || weights.is_some_and(|w| w.len() != n) {
        return Err(Error::Data("times, counts and weights must have equal length".into()));
    }
    if counts.iter().chain(times).any(|v| !v.is_finite()) || counts.iter().any(|&c| c < 0.0) {
        return Err(Error::Data("counts must be finite and >= 0".into()));
    }
    let (lo, hi) = counts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &c| (a.min(c), b.max(c)));
    if hi - lo <= 1e-12 * hi.abs().max(1.0) {
        return Err(Error::DegenerateFit("data are constant".into()));
    }
    let sqrt_w = match weights {
        Some(w) => {
            if w.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::Data("weights must be >= 0".into()));
            }
            w.iter().map(|v| v.sqrt()).collect()
        }
        None => poisson_sqrt_weights(counts),
    };
    let tau0 = log_linear_tau(times, counts);
    let problem = Separable {
        y: counts,
        sqrt_w,
        columns: |x: &[f64]| {
            let tau = x[0];
            (tau > 0.0).then(|| vec![times.iter().map(|t| (-t / tau).exp()).collect(), vec![1.0; n]])
        },
    };
    let starts = [0.5, 1.0, 2.0].map(|k| vec![k * tau0]);
    let fit = problem.fit(&starts, &[tau0])?;
    let mut out = FitResult::from_separable("exponential", &["tau", "A", "B"], &fit, n, true);
    out.parameters.swap(0, 1);
    Ok(out)
}

/// Decay constant from a straight-line fit of ln(y - min y) over the points
/// well above the floor; falls back to a third of the time span.
fn log_linear_tau(t: &[f64], y: &[f64]) -> f64 {
    let span = t.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v)) - t.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    let floor = y.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    let top = y.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v)) - floor;
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(y)
        .filter(|(_, v)| **v - floor > 0.05 * top)
        .map(|(t, v)| (*t, (v - floor).ln()))
        .collect();
    let fallback = (span / 3.0).max(f64::MIN_POSITIVE);
    if pts.len() < 2 {
        return fallback;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    if slope < 0.0 && slope.is_finite() {
        -1.0 / slope
    } else {
        fallback
    }
}

/// Settings for [`fit_coincidences`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoincidenceFitOptions {
    /// Population decay rate, 1/us.
    pub gamma: f64,
    /// Drive detuning, MHz.
    pub detuning: f64,
    /// Atom numbers to try; 0 is the background-only hypothesis.
    pub candidates: Vec<u32>,
    /// Known flat background per bin. The atom number is only identifiable
    /// when this is given: with a free background, A N (N - 1) + B can
    /// absorb any N and the smallest equally good N wins.
    pub background: Option<f64>,
    /// Overrides the peak-delay heuristic, MHz.
    pub rabi_guess: Option<f64>,
}

impl Default for CoincidenceFitOptions {
    fn default() -> Self {
        Self {
            gamma: AtomParams::default().gamma_pop,
            detuning: 0.0,
            candidates: (0..=5).collect(),
            background: None,
            rabi_guess: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub n_atoms: u32,
    pub chi2: f64,
    /// chi2 + 2 * (free parameters).
    pub aic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceFit {
    /// Parameters N (fixed), rabi, amplitude, background.
    pub result: FitResult,
    pub n_atoms: u32,
    /// Dip amplitude more than three standard deviations above zero.
    pub antibunching: bool,
    pub candidates: Vec<CandidateScore>,
}

/// Bin-averaged single-emitter g2 for a symmetric histogram, cached by
/// Rabi frequency.
struct BinnedG2 {
    emitter: Emitter,
    detuning: f64,
    bin_width: f64,
    half_bins: usize,
    cache: Mutex<HashMap<u64, Arc<Vec<f64>>>>,
}

impl BinnedG2 {
    fn eval(&self, rabi: f64) -> Option<Arc<Vec<f64>>> {
        let rabi = rabi.abs();
        if let Some(v) = self.cache.lock().unwrap().get(&rabi.to_bits()) {
            return Some(v.clone());
        }
        let h = self.half_bins as i64;
        let half_step = 0.5 * self.bin_width;
        let delays: Vec<f64> = (0..=2 * h + 1).map(|k| k as f64 * half_step).collect();
        let g = g2_curve(&self.emitter, &DriveParams::new(self.detuning, rabi), &delays).ok()?;
        let v = &g.values;
        // Simpson average over each bin, using g2(-tau) = g2(tau)
        let binned: Vec<f64> = (-h..=h)
            .map(|j| {
                let at = |k: i64| v[k.unsigned_abs() as usize];
                (at(2 * j - 1) + 4.0 * at(2 * j) + at(2 * j + 1)) / 6.0
            })
            .collect();
        let binned = Arc::new(binned);
        self.cache.lock().unwrap().insert(rabi.to_bits(), binned.clone());
        Some(binned)
    }
}

/// Rabi frequency (MHz) from the delay of the first coincidence maximum
/// after the zero-delay dip: the damped oscillation peaks near half a period.
fn rabi_from_peak_delay(hist: &Histogram, gamma: f64) -> Option<f64> {
    let c = hist.counts();
    let h = hist.half_bins();
    let sym: Vec<f64> = (0..=h).map(|k| 0.5 * (c[h + k] + c[h - k]) as f64).collect();
    let smooth: Vec<f64> = (0..sym.len())
        .map(|k| {
            let lo = k.saturating_sub(2);
            let hi = (k + 2).min(sym.len() - 1);
            sym[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    let peak = (1..smooth.len().saturating_sub(1)).find(|&k| smooth[k] > smooth[k - 1] && smooth[k] >= smooth[k + 1])?;
    let tau = peak as f64 * hist.bin_width();
    let f = 1e3 / (2.0 * tau);
    let damping = gamma / (8.0 * std::f64::consts::PI);
    Some((f * f + damping * damping).sqrt())
}

/// Fits A [N g2(tau) + N (N - 1)] + B to a coincidence histogram for each
/// candidate N and keeps the lowest chi2 + 2k (ties go to the smaller N).
/// Rabi frequency, A and (unless given) B are continuous parameters.
pub fn fit_coincidences(hist: &Histogram, opts: &CoincidenceFitOptions) -> Result<CoincidenceFit> {
    ensure_positive("gamma", opts.gamma)?;
    if hist.total() == 0 {
        return Err(Error::Data("histogram is empty".into()));
    }
    if opts.candidates.is_empty() {
        return Err(Error::InvalidParameter {
            name: "candidates",
            reason: "need at least one atom-number hypothesis".into(),
        });
    }
    let span = hist.half_bins() as f64 * hist.bin_width();
    if span < 2e3 / opts.gamma {
        return Err(Error::Data(format!(
            "histogram reaches {span} ns; it must span at least two lifetimes ({} ns)",
            2e3 / opts.gamma
        )));
    }
    let y_raw: Vec<f64> = hist.counts().iter().map(|&c| c as f64).collect();
    let sqrt_w = poisson_sqrt_weights(&y_raw);
    let y: Vec<f64> = match opts.background {
        Some(b) => y_raw.iter().map(|v| v - b).collect(),
        None => y_raw.clone(),
    };
    let g2 = BinnedG2 {
        emitter: Emitter::TwoLevel { gamma: opts.gamma },
        detuning: opts.detuning,
        bin_width: hist.bin_width(),
        half_bins: hist.half_bins(),
        cache: Mutex::new(HashMap::new()),
    };

    let heuristic = opts
        .rabi_guess
        .or_else(|| rabi_from_peak_delay(hist, opts.gamma))
        .unwrap_or(10.0);
    let scan: Vec<f64> = (0..25).map(|k| 0.5 * 1.2f64.powi(k)).collect();

    let mut candidates = opts.candidates.clone();
    candidates.sort_unstable();
    candidates.dedup();
    let fits: Vec<(u32, Result<FitResult>)> = candidates
        .par_iter()
        .map(|&n| (n, fit_one_n(n, &g2, &y, &sqrt_w, opts.background, heuristic, &scan)))
        .collect();

    let mut scores = Vec::new();
    let mut best: Option<(f64, u32, FitResult)> = None;
    for (n, fit) in fits {
        let fit = fit?;
        let free = fit.parameters.iter().filter(|p| !p.fixed).count();
        let chi2 = fit.residual_norm.powi(2);
        let aic = chi2 + 2.0 * free as f64;
        scores.push(CandidateScore { n_atoms: n, chi2, aic });
        let better = match &best {
            None => true,
            Some((b, _, _)) => aic < b - 1e-9 * b.abs().max(1.0),
        };
        if better {
            best = Some((aic, n, fit));
        }
    }
    let (_, n_atoms, result) = best.expect("at least one candidate");
    let antibunching = n_atoms > 0 && {
        let a = result.parameter("amplitude").expect("amplitude present");
        a.value > 3.0 * a.uncertainty
    };
    Ok(CoincidenceFit {
        result,
        n_atoms,
        antibunching,
        candidates: scores,
    })
}

fn fit_one_n(
    n: u32,
    g2: &BinnedG2,
    y: &[f64],
    sqrt_w: &[f64],
    background: Option<f64>,
    heuristic: f64,
    scan: &[f64],
) -> Result<FitResult> {
    let m = y.len();
    let model = "n-atom-coincidence";
    if n == 0 {
        // flat: B alone, or nothing when B is given
        let (b, var, chi2) = match background {
            Some(_) => (0.0, 0.0, y.iter().zip(sqrt_w).map(|(v, s)| (v * s).powi(2)).sum::<f64>()),
            None => {
                let sw: f64 = sqrt_w.iter().map(|s| s * s).sum();
                let b = y.iter().zip(sqrt_w).map(|(v, s)| v * s * s).sum::<f64>() / sw;
                let chi2 = y.iter().zip(sqrt_w).map(|(v, s)| ((v - b) * s).powi(2)).sum();
                (b, 1.0 / sw, chi2)
            }
        };
        let mut r = FitResult {
            model: model.into(),
            parameters: Vec::new(),
            residual_norm: f64::sqrt(chi2),
            degrees_of_freedom: m - usize::from(background.is_none()),
            iterations: 0,
            converged: true,
        };
        r.push_fixed("N", 0.0);
        r.push_fixed("rabi", 0.0);
        r.push_fixed("amplitude", 0.0);
        match background {
            Some(bg) => r.push_fixed("background", bg),
            None => r.parameters.push(FitParameter {
                name: "background".into(),
                value: b,
                uncertainty: var.sqrt(),
                fixed: false,
            }),
        }
        return Ok(r);
    }
    let nf = f64::from(n);
    let problem = Separable {
        y,
        sqrt_w: sqrt_w.to_vec(),
        columns: |x: &[f64]| {
            let g = g2.eval(x[0])?;
            let col: Vec<f64> = g.iter().map(|v| nf * v + nf * (nf - 1.0)).collect();
            Some(if background.is_some() { vec![col] } else { vec![col, vec![1.0; m]] })
        },
    };
    // starting points: the heuristic plus the two best points of a coarse scan
    let mut ranked: Vec<(f64, f64)> = scan.iter().map(|&r| (problem.cost(&[r]), r)).collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut starts = vec![vec![heuristic]];
    starts.extend(ranked.iter().take(2).map(|p| vec![p.1]));
    let fit = problem.fit(&starts, &[1.0])?;
    let names: &[&str] = if background.is_some() {
        &["rabi", "amplitude"]
    } else {
        &["rabi", "amplitude", "background"]
    };
    let mut r = FitResult::from_separable(model, names, &fit, m, true);
    r.parameters[0].value = r.parameters[0].value.abs();
    if let Some(bg) = background {
        r.push_fixed("background", bg);
    }
    r.parameters.insert(
        0,
        FitParameter {
            name: "N".into(),
            value: nf,
            uncertainty: 0.0,
            fixed: true,
        },
    );
    Ok(r)
}

/// Settings for [`fit_vtype_spectrum`]. The scheme supplies the fixed decay
/// rate, cross-damping and arm ratio; its `delta_split` is ignored.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VTypeFitOptions {
    pub scheme: VTypeScheme,
    /// MHz; overrides the dip-width heuristic.
    pub delta_guess: Option<f64>,
    /// MHz; overrides the linewidth heuristic.
    pub rabi_guess: Option<f64>,
    /// Per-point weights; uniform when absent.
    pub weights: Option<Vec<f64>>,
}

/// offset + amplitude * (V-type emission rate) fitted over the upper-level
/// splitting and the Rabi frequency. Parameters: delta_split, rabi,
/// amplitude, offset.
pub fn fit_vtype_spectrum(spec: &Spectrum, opts: &VTypeFitOptions) -> Result<FitResult> {
    let scheme = opts.scheme;
    scheme.validate()?;
    let x = spec.detunings();
    let y = spec.values();
    let m = x.len();
    let linewidth = scheme.gamma * (1.0 + scheme.p) / (2.0 * std::f64::consts::PI);
    let inside = x.iter().filter(|d| d.abs() <= 0.5 * linewidth).count();
    if inside < 5 {
        return Err(Error::Data(format!(
            "need at least 5 points within one linewidth ({linewidth:.3} MHz) of line centre, got {inside}"
        )));
    }
    let sqrt_w: Vec<f64> = match &opts.weights {
        Some(w) if w.len() == m && w.iter().all(|v| *v >= 0.0) => w.iter().map(|v| v.sqrt()).collect(),
        Some(_) => return Err(Error::Data("one nonnegative weight per spectrum point required".into())),
        None => vec![1.0; m],
    };

    let rabi0 = opts.rabi_guess.unwrap_or_else(|| {
        let w = spectral_fwhm(spec).unwrap_or(linewidth);
        (w * w - linewidth * linewidth).max(0.25 * linewidth * linewidth).sqrt() / 2.0
    });
    let delta0 = opts
        .delta_guess
        .or_else(|| dip_metrics(spec, 0.0).map(|d| d.width))
        .unwrap_or(1.0);

    let problem = Separable {
        y,
        sqrt_w,
        columns: |p: &[f64]| {
            let s = VTypeScheme {
                delta_split: p[0].abs(),
                ..scheme
            };
            let e = excitation_spectrum(&Emitter::VType(s), p[1].abs(), x).ok()?;
            Some(vec![e.values().to_vec(), vec![1.0; m]])
        },
    };
    let mut grid = Vec::new();
    for d in [0.5 * delta0, delta0, 2.0 * delta0, 0.5, 1.5, 3.0, 6.0] {
        for r in [0.6 * rabi0, rabi0, 1.6 * rabi0] {
            grid.push(vec![d, r]);
        }
    }
    let mut ranked: Vec<(f64, Vec<f64>)> = grid.into_iter().map(|p| (problem.cost(&p), p)).collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0));
    let starts: Vec<Vec<f64>> = ranked.into_iter().take(3).map(|p| p.1).collect();
    let fit = problem.fit(&starts, &[0.1, 0.1])?;
    let mut r = FitResult::from_separable(
        "vtype-spectrum",
        &["delta_split", "rabi", "amplitude", "offset"],
        &fit,
        m,
        opts.weights.is_some(),
    );
    r.parameters[0].value = r.parameters[0].value.abs();
    r.parameters[1].value = r.parameters[1].value.abs();
    Ok(r)
}
