//! Effective-potential model of an atom orbiting a surface charge: induced
//! dipole attraction, centrifugal barrier and an optional surface term.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::params::{AtomParams, ELEMENTARY_CHARGE, EPSILON_0, HBAR, PLANCK};

const NM: f64 = 1e-9;
/// Radial search bracket, nm.
const SEARCH_LO: f64 = 1.0;
const SEARCH_HI: f64 = 1000.0;
const SCAN_POINTS: usize = 600;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrbitParams {
    /// C.
    pub charge: f64,
    /// Static polarizability, C m^2 / V.
    pub alpha_pol: f64,
    /// kg.
    pub mass: f64,
    /// Surface C3 over h, kHz um^3.
    pub c3_surface: f64,
    /// Exponent of the attractive -C_n / r^n term: 2, 3 or 4.
    pub power_law_n: u32,
    /// C_n in J m^n. When absent, n = 4 uses the point-charge value and other
    /// exponents are matched to it at `match_radius`.
    pub coefficient: Option<f64>,
    /// nm.
    pub match_radius: f64,
    /// Distance from the orbit centre to the surface (nm), so the surface
    /// term is -C3 / (r + offset)^3. `None` leaves the surface term out.
    pub surface_offset: Option<f64>,
}

impl Default for OrbitParams {
    fn default() -> Self {
        Self::for_atom(&AtomParams::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
}

impl std::fmt::Display for Stability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitSolution {
    /// nm.
    pub radius: f64,
    /// MHz.
    pub orbit_frequency: f64,
    /// sqrt(|U''| / m) / 2 pi in MHz; for an unstable orbit this is the
    /// barrier curvature.
    pub radial_frequency: f64,
    pub stability: Stability,
    /// dU/dr at the root relative to the centrifugal force there.
    pub force_residual: f64,
}

impl OrbitParams {
    pub fn for_atom(atom: &AtomParams) -> Self {
        Self {
            charge: ELEMENTARY_CHARGE,
            alpha_pol: atom.alpha_pol,
            mass: atom.mass,
            c3_surface: atom.c3_ground,
            power_law_n: 4,
            coefficient: None,
            match_radius: 30.0,
            surface_offset: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("orbit.charge", self.charge)?;
        ensure_positive("orbit.alpha_pol", self.alpha_pol)?;
        ensure_positive("orbit.mass", self.mass)?;
        ensure_positive("orbit.c3_surface", self.c3_surface)?;
        ensure_positive("orbit.match_radius", self.match_radius)?;
        if let Some(c) = self.coefficient {
            ensure_positive("orbit.coefficient", c)?;
        }
        if let Some(o) = self.surface_offset {
            ensure_positive("orbit.surface_offset", o)?;
        }
        if !(2..=4).contains(&self.power_law_n) {
            return Err(Error::InvalidParameter {
                name: "orbit.power_law_n",
                reason: format!("must be 2, 3 or 4, got {}", self.power_law_n),
            });
        }
        Ok(())
    }

    /// Charge-induced dipole coefficient alpha q^2 / (32 pi^2 eps0^2), J m^4.
    pub fn point_charge_c4(&self) -> f64 {
        let pi = std::f64::consts::PI;
        self.alpha_pol * self.charge * self.charge / (32.0 * pi * pi * EPSILON_0 * EPSILON_0)
    }

    /// C_n in J m^n.
    pub fn cn(&self) -> f64 {
        self.coefficient.unwrap_or_else(|| {
            let shift = self.power_law_n as i32 - 4;
            self.point_charge_c4() * (self.match_radius * NM).powi(shift)
        })
    }

    /// U, dU/dr, d2U/dr2 in SI at radius `r` (m) for angular momentum `l`
    /// (units of hbar).
    fn terms(&self, r: f64, l: f64) -> [f64; 3] {
        let n = self.power_law_n as i32;
        let nf = f64::from(self.power_law_n);
        let c = self.cn();
        let k = HBAR * HBAR * l * l / self.mass;
        let mut u = -c / r.powi(n) + 0.5 * k / (r * r);
        let mut du = nf * c / r.powi(n + 1) - k / r.powi(3);
        let mut d2u = -nf * (nf + 1.0) * c / r.powi(n + 2) + 3.0 * k / r.powi(4);
        if let Some(offset) = self.surface_offset {
            let c3 = self.c3_surface * PLANCK * 1e3 * 1e-18;
            let d = r + offset * NM;
            u -= c3 / d.powi(3);
            du += 3.0 * c3 / d.powi(4);
            d2u -= 12.0 * c3 / d.powi(5);
        }
        [u, du, d2u]
    }
}

fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("radius must be > 0 nm, got {r}")))
    }
}

/// Effective potential at `r` nm for angular momentum `l` (units of hbar),
/// in MHz (energy over h).
pub fn effective_potential(r: f64, l: f64, params: &OrbitParams) -> Result<f64> {
    params.validate()?;
    check_radius(r)?;
    Ok(params.terms(r * NM, l)[0] / PLANCK * 1e-6)
}

/// dU_eff/dr in MHz per nm.
pub fn effective_force(r: f64, l: f64, params: &OrbitParams) -> Result<f64> {
    params.validate()?;
    check_radius(r)?;
    Ok(params.terms(r * NM, l)[1] * NM / PLANCK * 1e-6)
}

/// Stationary points of U_eff in the search bracket, innermost first.
pub fn stationary_orbits(l: f64, params: &OrbitParams) -> Result<Vec<OrbitSolution>> {
    params.validate()?;
    ensure_positive("L", l)?;
    let ratio = (SEARCH_HI / SEARCH_LO).ln();
    let grid: Vec<f64> = (0..SCAN_POINTS)
        .map(|i| SEARCH_LO * NM * (ratio * i as f64 / (SCAN_POINTS - 1) as f64).exp())
        .collect();
    let force = |r: f64| params.terms(r, l)[1];
    let mut out = Vec::new();
    for w in grid.windows(2) {
        let (mut a, mut b) = (w[0], w[1]);
        let (fa, fb) = (force(a), force(b));
        if fa == 0.0 {
            out.push(solution(a, l, params));
            continue;
        }
        if fa.signum() == fb.signum() {
            continue;
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if force(m).signum() == fa.signum() {
                a = m;
            } else {
                b = m;
            }
        }
        let r = if force(a).abs() <= force(b).abs() { a } else { b };
        out.push(solution(r, l, params));
    }
    Ok(out)
}

/// Innermost stationary orbit for angular momentum `l`.
pub fn stationary_orbit(l: f64, params: &OrbitParams) -> Result<OrbitSolution> {
    stationary_orbits(l, params)?
        .into_iter()
        .next()
        .ok_or(Error::NoOrbit {
            lo_nm: SEARCH_LO,
            hi_nm: SEARCH_HI,
        })
}

fn solution(r: f64, l: f64, params: &OrbitParams) -> OrbitSolution {
    let [_, du, d2u] = params.terms(r, l);
    let centrifugal = HBAR * HBAR * l * l / (params.mass * r.powi(3));
    let two_pi = 2.0 * std::f64::consts::PI;
    OrbitSolution {
        radius: r / NM,
        orbit_frequency: HBAR * l / (two_pi * params.mass * r * r) * 1e-6,
        radial_frequency: (d2u.abs() / params.mass).sqrt() / two_pi * 1e-6,
        stability: if d2u > 0.0 { Stability::Stable } else { Stability::Unstable },
        force_residual: du.abs() / centrifugal,
    }
}

/// Orbit solutions over a list of angular momenta; entries without an orbit
/// are skipped.
pub fn orbit_sweep(ls: &[f64], params: &OrbitParams) -> Result<Vec<(f64, OrbitSolution)>> {
    let mut out = Vec::new();
    for &l in ls {
        match stationary_orbit(l, params) {
            Ok(s) => out.push((l, s)),
            Err(Error::NoOrbit { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Least-squares slope of ln(orbit frequency) against ln(radius) over `n`
/// log-spaced angular momenta in [l_lo, l_hi].
pub fn frequency_radius_exponent(l_lo: f64, l_hi: f64, n: usize, params: &OrbitParams) -> Result<f64> {
    ensure_positive("l_lo", l_lo)?;
    if !(l_hi > l_lo) || n < 2 {
        return Err(Error::InvalidParameter {
            name: "l_hi",
            reason: "need l_hi > l_lo and at least two points".into(),
        });
    }
    let ls: Vec<f64> = (0..n)
        .map(|i| l_lo * (l_hi / l_lo).powf(i as f64 / (n - 1) as f64))
        .collect();
    let pts: Vec<(f64, f64)> = orbit_sweep(&ls, params)?
        .iter()
        .map(|(_, s)| (s.radius.ln(), s.orbit_frequency.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::NoOrbit {
            lo_nm: SEARCH_LO,
            hi_nm: SEARCH_HI,
        });
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// How an observed frequency is turned into an orbit radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RadiusMode {
    /// Circular motion at `speed` m/s: r = v / (2 pi f).
    FixedSpeed { speed: f64 },
    /// r = r_ref * nu_ref / f with r_ref in nm and nu_ref in MHz.
    AnchoredScaling { r_ref: f64, nu_ref: f64 },
}

/// Orbit radius (nm) for a frequency in MHz.
pub fn radius_from_frequency(freq: f64, mode: &RadiusMode) -> Result<f64> {
    ensure_positive("frequency", freq)?;
    match *mode {
        RadiusMode::FixedSpeed { speed } => {
            ensure_positive("speed", speed)?;
            Ok(speed / (2.0 * std::f64::consts::PI * freq * 1e6) / NM)
        }
        RadiusMode::AnchoredScaling { r_ref, nu_ref } => {
            ensure_positive("r_ref", r_ref)?;
            ensure_positive("nu_ref", nu_ref)?;
            Ok(r_ref * nu_ref / freq)
        }
    }
}
