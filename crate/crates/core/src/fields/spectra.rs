//! Target spectra and coherence functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    U,
    V,
    W,
}

impl Component {
    pub const ALL: [Component; 3] = [Component::U, Component::V, Component::W];

    pub fn index(self) -> usize {
        match self {
            Component::U => 0,
            Component::V => 1,
            Component::W => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Component::U => "u",
            Component::V => "v",
            Component::W => "w",
        }
    }
}

/// Statistics of the turbulent wind at deck level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TurbulenceSpec {
    /// Mean wind speed U [m/s].
    pub mean_speed: f64,
    /// Turbulence intensities (I_u, I_v, I_w).
    pub intensity: [f64; 3],
    /// Integral length scales (L_u, L_v, L_w) [m].
    pub length_scale: [f64; 3],
    /// Davenport decay coefficients (C_u, C_v, C_w).
    pub davenport_decay: [f64; 3],
    /// [kg/m^3]
    pub air_density: f64,
}

impl Default for TurbulenceSpec {
    fn default() -> Self {
        Self {
            mean_speed: 20.0,
            intensity: [0.10, 0.075, 0.05],
            length_scale: [170.0, 60.0, 30.0],
            davenport_decay: [10.0, 10.0, 10.0],
            air_density: 1.25,
        }
    }
}

impl TurbulenceSpec {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.mean_speed > 0.0) {
            bad.push(format!("mean_speed must be positive (got {})", self.mean_speed));
        }
        for c in Component::ALL {
            let i = c.index();
            if !(self.intensity[i] >= 0.0) {
                bad.push(format!("intensity[{}] must be >= 0", c.name()));
            }
            if !(self.length_scale[i] > 0.0) {
                bad.push(format!("length_scale[{}] must be positive", c.name()));
            }
            if !(self.davenport_decay[i] > 0.0) {
                bad.push(format!("davenport_decay[{}] must be positive", c.name()));
            }
        }
        if !(self.air_density > 0.0) {
            bad.push("air_density must be positive".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad))
        }
    }

    pub fn sigma(&self, c: Component) -> f64 {
        self.intensity[c.index()] * self.mean_speed
    }
}

/// One-sided von Karman PSD of a turbulence component [(m/s)^2/Hz].
pub fn von_karman_psd(f: f64, spec: &TurbulenceSpec, c: Component) -> f64 {
    let sigma = spec.sigma(c);
    if sigma == 0.0 {
        return 0.0;
    }
    let a = spec.length_scale[c.index()] / spec.mean_speed;
    let x = f.abs() * a;
    match c {
        Component::U => 4.0 * sigma * sigma * a / (1.0 + 70.8 * x * x).powf(5.0 / 6.0),
        Component::V | Component::W => {
            4.0 * sigma * sigma * a * (1.0 + 755.2 * x * x) / (1.0 + 283.2 * x * x).powf(11.0 / 6.0)
        }
    }
}

/// Davenport root-coherence `exp(-C f dx / U)`.
pub fn davenport_coherence(f: f64, dx: f64, mean_speed: f64, decay: f64) -> f64 {
    (-decay * f * dx / mean_speed).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IsoClass {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
    H,
}

impl IsoClass {
    fn rank(self) -> i32 {
        self as i32
    }

    /// Geometric-centre displacement PSD at n0 = 0.1 cycles/m [m^3].
    pub fn reference_psd(self) -> f64 {
        16.0e-6 * 4f64.powi(self.rank())
    }

    /// Class band [lower, upper) of G_d(n0) [m^3].
    pub fn band(self) -> (f64, f64) {
        let c = self.reference_psd();
        (0.5 * c, 2.0 * c)
    }
}

/// Reference wavenumber n0 [cycles/m].
pub const ISO_N0: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoughnessSpec {
    pub iso_class: IsoClass,
    /// Overrides the class centre value when set [m^3].
    pub reference_psd: Option<f64>,
    pub waviness_exponent: f64,
    /// Decay constant of the lateral coherence `exp(-d n dy)`.
    pub transverse_decay: f64,
    /// (n_min, n_max) [cycles/m].
    pub wavenumber_band: (f64, f64),
}

impl Default for RoughnessSpec {
    fn default() -> Self {
        Self {
            iso_class: IsoClass::B,
            reference_psd: None,
            waviness_exponent: 2.0,
            transverse_decay: 4.0,
            wavenumber_band: (0.01, 1.0),
        }
    }
}

impl RoughnessSpec {
    pub fn gd_n0(&self) -> f64 {
        self.reference_psd.unwrap_or_else(|| self.iso_class.reference_psd())
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let (lo, hi) = self.iso_class.band();
        let g = self.gd_n0();
        if !(g >= lo && g < hi) {
            bad.push(format!(
                "reference_psd {g:e} outside class {:?} band [{lo:e}, {hi:e})",
                self.iso_class
            ));
        }
        let (n0, n1) = self.wavenumber_band;
        if !(n0 > 0.0 && n0 < n1) {
            bad.push(format!("wavenumber_band ({n0}, {n1}) must satisfy 0 < n_min < n_max"));
        }
        if !(self.transverse_decay >= 0.0) {
            bad.push("transverse_decay must be >= 0".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad))
        }
    }
}

/// ISO 8608 displacement PSD G_d(n) [m^3].
pub fn iso8608_psd(n: f64, spec: &RoughnessSpec) -> f64 {
    spec.gd_n0() * (n / ISO_N0).powf(-spec.waviness_exponent)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Adaptive Simpson quadrature used as an independent integration oracle.
    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
    }

    #[test]
    fn zero_intensity_gives_zero_psd() {
        let spec = TurbulenceSpec {
            intensity: [0.0, 0.1, 0.1],
            ..Default::default()
        };
        for f in [0.0, 0.01, 1.0, 10.0] {
            assert_eq!(von_karman_psd(f, &spec, Component::U), 0.0);
        }
    }

    #[test]
    fn psd_integrates_to_variance() {
        // Integrate in log-frequency, f = e^s, over [1e-7, 1e4] Hz; the
        // tails beyond carry < 0.1 % of the variance for these scales.
        let spec = TurbulenceSpec {
            mean_speed: 20.0,
            intensity: [0.10, 0.10, 0.10],
            ..Default::default()
        };
        for c in Component::ALL {
            let g = |s: f64| {
                let f = s.exp();
                von_karman_psd(f, &spec, c) * f
            };
            let var = adaptive_simpson(&g, (1e-7f64).ln(), (1e4f64).ln(), 1e-10);
            let sigma2 = spec.sigma(c).powi(2);
            assert!((var / sigma2 - 1.0).abs() < 0.01, "{c:?}: {var} vs {sigma2}");
        }
        assert_eq!(spec.sigma(Component::U), 2.0);
    }

    #[test]
    fn davenport_limits_and_value() {
        assert_eq!(davenport_coherence(0.3, 0.0, 20.0, 10.0), 1.0);
        assert_eq!(davenport_coherence(0.0, 50.0, 20.0, 10.0), 1.0);
        let g = davenport_coherence(0.1, 20.0, 20.0, 10.0);
        assert!((g - (-1f64).exp()).abs() < 1e-15);
        assert!((g - 0.3679).abs() < 1e-4);
    }

    #[test]
    fn iso_reference_values() {
        let spec = RoughnessSpec::default();
        assert_eq!(iso8608_psd(ISO_N0, &spec), 64e-6);
        assert!((iso8608_psd(2.0 * ISO_N0, &spec) - 16e-6).abs() < 1e-18);
        assert_eq!(IsoClass::A.reference_psd() * 4.0, IsoClass::B.reference_psd());
        assert!(spec.validate().is_ok());
        let bad = RoughnessSpec {
            reference_psd: Some(200e-6),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
