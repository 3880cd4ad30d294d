use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::Error;
use crate::Result;

fn valid_projection(m: i8) -> bool {
    matches!(m, -1 | 0 | 1)
}

/// One basis level |mS, mI> of the nine-level pair.
///
/// Basis order is mS-major, both projections descending:
/// index = (1 - mS) * 3 + (1 - mI), so |+1,+1> is index 0 and |-1,-1> is 8.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Level {
    m_s: i8,
    m_i: i8,
}

impl Level {
    pub fn new(m_s: i8, m_i: i8) -> Result<Self> {
        if !valid_projection(m_s) || !valid_projection(m_i) {
            return Err(Error::domain(format!(
                "quantum numbers must be in {{-1, 0, +1}}, got mS={m_s}, mI={m_i}"
            )));
        }
        Ok(Level { m_s, m_i })
    }

    pub fn m_s(&self) -> i8 {
        self.m_s
    }

    pub fn m_i(&self) -> i8 {
        self.m_i
    }

    pub fn index(&self) -> usize {
        ((1 - self.m_s) * 3 + (1 - self.m_i)) as usize
    }

    pub fn from_index(index: usize) -> Result<Self> {
        if index >= 9 {
            return Err(Error::domain(format!("level index {index} out of range")));
        }
        Ok(Level {
            m_s: 1 - (index / 3) as i8,
            m_i: 1 - (index % 3) as i8,
        })
    }
}

fn fmt_proj(m: i8) -> String {
    if m > 0 {
        format!("+{m}")
    } else {
        format!("{m}")
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", fmt_proj(self.m_s), fmt_proj(self.m_i))
    }
}

/// Drive channel: microwave pulses move the electron spin, rf pulses the
/// nuclear spin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    Mw,
    Rf,
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Channel::Mw => write!(f, "mw"),
            Channel::Rf => write!(f, "rf"),
        }
    }
}

/// A driven two-level subspace.
///
/// Microwave transitions change mS by one and keep mI; rf transitions keep
/// mS and change mI by one. Anything else is rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    channel: Channel,
    from: Level,
    to: Level,
}

impl Transition {
    pub fn new(channel: Channel, from: Level, to: Level) -> Result<Self> {
        let ds = (from.m_s() - to.m_s()).abs();
        let di = (from.m_i() - to.m_i()).abs();
        let ok = match channel {
            Channel::Mw => ds == 1 && di == 0,
            Channel::Rf => ds == 0 && di == 1,
        };
        if !ok {
            return Err(Error::domain(format!(
                "{channel} transition {from} -> {to} violates the channel selection rule"
            )));
        }
        Ok(Transition { channel, from, to })
    }

    pub fn mw(from: (i8, i8), to: (i8, i8)) -> Result<Self> {
        Transition::new(Channel::Mw, Level::new(from.0, from.1)?, Level::new(to.0, to.1)?)
    }

    pub fn rf(from: (i8, i8), to: (i8, i8)) -> Result<Self> {
        Transition::new(Channel::Rf, Level::new(from.0, from.1)?, Level::new(to.0, to.1)?)
    }

    pub fn channel(&self) -> Channel {
        self.channel
    }

    pub fn from(&self) -> Level {
        self.from
    }

    pub fn to(&self) -> Level {
        self.to
    }

    /// True if the transition touches the given level.
    pub fn involves(&self, level: Level) -> bool {
        self.from == level || self.to == level
    }

    /// The level the two transitions share, if any.
    pub fn shared_level(&self, other: &Transition) -> Option<Level> {
        [self.from, self.to]
            .into_iter()
            .find(|l| other.involves(*l))
    }

    /// All six driveable transitions of a channel, in basis order.
    pub fn channel_transitions(channel: Channel) -> Vec<Transition> {
        let mut out = Vec::with_capacity(6);
        match channel {
            Channel::Mw => {
                for target_ms in [1i8, -1] {
                    for m_i in [1i8, 0, -1] {
                        out.push(Transition::mw((0, m_i), (target_ms, m_i)).unwrap());
                    }
                }
            }
            Channel::Rf => {
                for m_s in [1i8, 0, -1] {
                    out.push(Transition::rf((m_s, 1), (m_s, 0)).unwrap());
                    out.push(Transition::rf((m_s, 0), (m_s, -1)).unwrap());
                }
            }
        }
        out
    }
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} -> {}", self.channel, self.from, self.to)
    }
}

/// Static couplings and field of the NV-N14 pair.
///
/// The Hamiltonian is diagonal in the product basis; transverse hyperfine
/// terms are neglected away from the level anticrossings. Level energies are
/// E/h in MHz:
///
/// E = D*mS^2 + ge*B*mS + Q*mI^2 + gn*B*mI + A*mS*mI
///
/// with ge*B evaluated in MHz (GHz/T times mT) and gn*B in MHz
/// (MHz/T times mT divided by 1000).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinSystem {
    /// Zero-field splitting D of the electron spin, MHz.
    #[serde(default = "default_zfs")]
    pub zero_field_splitting_mhz: f64,
    /// Nuclear quadrupole splitting Q, MHz.
    #[serde(default = "default_quadrupole")]
    pub quadrupole_mhz: f64,
    /// Longitudinal hyperfine coupling A, MHz.
    #[serde(default = "default_hyperfine")]
    pub hyperfine_mhz: f64,
    /// Electron gyromagnetic ratio, GHz/T (equivalently MHz/mT).
    #[serde(default = "default_gamma_e")]
    pub gamma_e_ghz_per_t: f64,
    /// Nuclear gyromagnetic ratio, MHz/T.
    #[serde(default = "default_gamma_n")]
    pub gamma_n_mhz_per_t: f64,
    /// Static field along the NV axis, mT.
    #[serde(default = "default_b_field")]
    pub b_field_mt: f64,
}

fn default_zfs() -> f64 {
    2870.0
}
fn default_quadrupole() -> f64 {
    4.945
}
fn default_hyperfine() -> f64 {
    2.16
}
fn default_gamma_e() -> f64 {
    28.025
}
fn default_gamma_n() -> f64 {
    3.077
}
fn default_b_field() -> f64 {
    30.0
}

impl Default for SpinSystem {
    fn default() -> Self {
        SpinSystem {
            zero_field_splitting_mhz: default_zfs(),
            quadrupole_mhz: default_quadrupole(),
            hyperfine_mhz: default_hyperfine(),
            gamma_e_ghz_per_t: default_gamma_e(),
            gamma_n_mhz_per_t: default_gamma_n(),
            b_field_mt: default_b_field(),
        }
    }
}

impl SpinSystem {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("zero_field_splitting_mhz", self.zero_field_splitting_mhz),
            ("quadrupole_mhz", self.quadrupole_mhz),
            ("hyperfine_mhz", self.hyperfine_mhz),
            ("gamma_e_ghz_per_t", self.gamma_e_ghz_per_t),
            ("gamma_n_mhz_per_t", self.gamma_n_mhz_per_t),
            ("b_field_mt", self.b_field_mt),
        ];
        for (name, v) in named {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::domain(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn with_b_field(mut self, b_field_mt: f64) -> Self {
        self.b_field_mt = b_field_mt;
        self
    }

    pub fn with_hyperfine(mut self, hyperfine_mhz: f64) -> Self {
        self.hyperfine_mhz = hyperfine_mhz;
        self
    }

    /// Electron Zeeman shift ge*B, MHz.
    fn electron_zeeman_mhz(&self) -> f64 {
        self.gamma_e_ghz_per_t * self.b_field_mt
    }

    /// Nuclear Zeeman shift gn*B, MHz.
    fn nuclear_zeeman_mhz(&self) -> f64 {
        self.gamma_n_mhz_per_t * self.b_field_mt / 1000.0
    }

    /// Diagonal energy E/h of a level, MHz.
    pub fn level_energy(&self, level: Level) -> f64 {
        let ms = level.m_s() as f64;
        let mi = level.m_i() as f64;
        self.zero_field_splitting_mhz * ms * ms
            + self.electron_zeeman_mhz() * ms
            + self.quadrupole_mhz * mi * mi
            + self.nuclear_zeeman_mhz() * mi
            + self.hyperfine_mhz * ms * mi
    }

    /// Magnitude of the energy difference across a transition, MHz.
    pub fn transition_frequency(&self, transition: &Transition) -> f64 {
        (self.level_energy(transition.to()) - self.level_energy(transition.from())).abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_index_is_ms_major_descending() {
        let order = [
            (1, 1),
            (1, 0),
            (1, -1),
            (0, 1),
            (0, 0),
            (0, -1),
            (-1, 1),
            (-1, 0),
            (-1, -1),
        ];
        for (idx, (ms, mi)) in order.into_iter().enumerate() {
            let level = Level::new(ms, mi).unwrap();
            assert_eq!(level.index(), idx);
            assert_eq!(Level::from_index(idx).unwrap(), level);
        }
    }

    #[test]
    fn rejects_bad_quantum_numbers() {
        assert!(Level::new(2, 0).is_err());
        assert!(Level::new(0, -2).is_err());
        assert!(Level::from_index(9).is_err());
    }

    #[test]
    fn channel_selection_rules() {
        assert!(Transition::mw((0, 1), (-1, 1)).is_ok());
        assert!(Transition::mw((0, 1), (-1, 0)).is_err());
        assert!(Transition::mw((1, 0), (-1, 0)).is_err());
        assert!(Transition::rf((-1, 1), (-1, 0)).is_ok());
        assert!(Transition::rf((-1, 1), (-1, -1)).is_err());
        assert!(Transition::rf((0, 1), (1, 1)).is_err());
    }

    #[test]
    fn six_transitions_per_channel() {
        assert_eq!(Transition::channel_transitions(Channel::Mw).len(), 6);
        assert_eq!(Transition::channel_transitions(Channel::Rf).len(), 6);
    }

    #[test]
    fn zero_field_splitting_between_ms_manifolds() {
        let sys = SpinSystem::default().with_b_field(0.0);
        let e0 = sys.level_energy(Level::new(0, 0).unwrap());
        let e1 = sys.level_energy(Level::new(-1, 0).unwrap());
        assert_eq!(e1 - e0, 2870.0);
        assert_eq!(e0, 0.0);
    }

    #[test]
    fn mw_frequency_decreases_with_field_below_crossing() {
        let sys = SpinSystem::default().with_b_field(30.0);
        let t = Transition::mw((0, 0), (-1, 0)).unwrap();
        // 2870 - 28.025 * 30
        assert!((sys.transition_frequency(&t) - 2029.25).abs() < 1e-9);
        let lower = SpinSystem::default().with_b_field(10.0);
        assert!(sys.transition_frequency(&t) < lower.transition_frequency(&t));
    }

    #[test]
    fn rf_frequency_near_quadrupole_at_low_field() {
        let sys = SpinSystem::default().with_b_field(0.0);
        let t = Transition::rf((0, 1), (0, 0)).unwrap();
        let f = sys.transition_frequency(&t);
        assert!((f - sys.quadrupole_mhz).abs() < 1e-12);
        assert!((f - 5.0).abs() < 0.1);
    }

    #[test]
    fn rf_frequency_in_lower_manifold_at_field() {
        let sys = SpinSystem::default().with_b_field(30.0);
        let t = Transition::rf((-1, 1), (-1, 0)).unwrap();
        let f = sys.transition_frequency(&t);
        // Q - A + gn*B evaluated with the default constants.
        let expected = 4.945 - 2.16 + 3.077 * 30.0 / 1000.0;
        assert!((f - expected).abs() < 1e-9);
        assert!((f - 2.89).abs() < 0.02);
    }

    #[test]
    fn mw_lines_spaced_by_hyperfine() {
        let sys = SpinSystem::default().with_b_field(30.0).with_hyperfine(2.2);
        let f = |mi: i8| {
            sys.transition_frequency(&Transition::mw((0, mi), (-1, mi)).unwrap())
        };
        let (fp, f0, fm) = (f(1), f(0), f(-1));
        assert!((f0 - fp - 2.2).abs() < 1e-9);
        assert!((fm - f0 - 2.2).abs() < 1e-9);
    }

    #[test]
    fn manifold_spread_is_twice_hyperfine() {
        for b in [0.0, 5.7, 30.2, 77.7] {
            let sys = SpinSystem::default().with_b_field(b);
            let fp = sys.transition_frequency(&Transition::mw((0, 1), (-1, 1)).unwrap());
            let fm = sys.transition_frequency(&Transition::mw((0, -1), (-1, -1)).unwrap());
            let spread = (fp - fm).abs();
            let rel = (spread - 2.0 * sys.hyperfine_mhz).abs() / (2.0 * sys.hyperfine_mhz);
            assert!(rel < 1e-12, "spread {spread} at B={b}");
        }
    }

    #[test]
    fn rejects_negative_couplings() {
        let mut sys = SpinSystem::default();
        sys.hyperfine_mhz = -1.0;
        assert!(sys.validate().is_err());
        let mut sys = SpinSystem::default();
        sys.b_field_mt = f64::NAN;
        assert!(sys.validate().is_err());
    }
}
