//! Conversions between laboratory/spectroscopic units and atomic units.
//!
//! Every quantity inside the crate is in atomic units (ħ = e = mₑ = 1). Only
//! the four dimension pairs below are supported; anything else is rejected.

use core::fmt;

/// Energy of one wavenumber (cm⁻¹) in hartree.
pub const WAVENUMBER_TO_AU: f64 = 4.556335e-6;
/// One debye in atomic units of dipole moment (e·a₀).
pub const DEBYE_TO_AU: f64 = 0.3934303;
/// Atomic unit of time in seconds.
pub const AU_TIME_SECONDS: f64 = 2.4188843265857e-17;
/// One nanosecond in atomic units of time.
pub const NS_TO_AU: f64 = 1.0e-9 / AU_TIME_SECONDS;
/// One ns² in atomic units of time², the unit used for chirp rates.
pub const NS2_TO_AU2: f64 = NS_TO_AU * NS_TO_AU;

/// The frozen conversion table, exposed as a value for callers that want to
/// echo it into output manifests.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitConstants {
    pub wavenumber_to_au: f64,
    pub debye_to_au: f64,
    pub second_to_au: f64,
    pub ns_to_au: f64,
    pub ns2_to_au2: f64,
}

impl UnitConstants {
    pub const FROZEN: UnitConstants = UnitConstants {
        wavenumber_to_au: WAVENUMBER_TO_AU,
        debye_to_au: DEBYE_TO_AU,
        second_to_au: 1.0 / AU_TIME_SECONDS,
        ns_to_au: NS_TO_AU,
        ns2_to_au2: NS2_TO_AU2,
    };
}

impl Default for UnitConstants {
    fn default() -> Self {
        Self::FROZEN
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Dimension {
    Energy,
    Dipole,
    Time,
    /// time², the dimension of a spectral chirp rate
    Chirp,
}

/// A unit tag. Each dimension has one laboratory unit and the atomic unit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Unit {
    /// cm⁻¹
    Wavenumber,
    /// hartree
    AuEnergy,
    /// debye
    Debye,
    /// e·a₀
    AuDipole,
    Nanosecond,
    AuTime,
    /// ns²
    Nanosecond2,
    /// (a.u. time)²
    AuTime2,
}

impl Unit {
    pub const ALL: [Unit; 8] = [
        Unit::Wavenumber,
        Unit::AuEnergy,
        Unit::Debye,
        Unit::AuDipole,
        Unit::Nanosecond,
        Unit::AuTime,
        Unit::Nanosecond2,
        Unit::AuTime2,
    ];

    pub fn dimension(self) -> Dimension {
        match self {
            Unit::Wavenumber | Unit::AuEnergy => Dimension::Energy,
            Unit::Debye | Unit::AuDipole => Dimension::Dipole,
            Unit::Nanosecond | Unit::AuTime => Dimension::Time,
            Unit::Nanosecond2 | Unit::AuTime2 => Dimension::Chirp,
        }
    }

    /// Size of one of this unit in atomic units.
    fn in_au(self) -> f64 {
        match self {
            Unit::Wavenumber => WAVENUMBER_TO_AU,
            Unit::Debye => DEBYE_TO_AU,
            Unit::Nanosecond => NS_TO_AU,
            Unit::Nanosecond2 => NS2_TO_AU2,
            Unit::AuEnergy | Unit::AuDipole | Unit::AuTime | Unit::AuTime2 => 1.0,
        }
    }

    /// Short textual tag, as accepted in configuration files.
    pub fn tag(self) -> &'static str {
        match self {
            Unit::Wavenumber => "cm^-1",
            Unit::AuEnergy => "au",
            Unit::Debye => "D",
            Unit::AuDipole => "au",
            Unit::Nanosecond => "ns",
            Unit::AuTime => "au",
            Unit::Nanosecond2 => "ns^2",
            Unit::AuTime2 => "au",
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dim = match self.dimension() {
            Dimension::Energy => "energy",
            Dimension::Dipole => "dipole",
            Dimension::Time => "time",
            Dimension::Chirp => "chirp",
        };
        write!(f, "{} ({})", self.tag(), dim)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UnsupportedConversion {
    pub from: Unit,
    pub to: Unit,
}

impl fmt::Display for UnsupportedConversion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cannot convert from {} to {}", self.from, self.to)
    }
}

#[cfg(feature = "std")]
impl std::error::Error for UnsupportedConversion {}

/// Converts `value` between two units of the same dimension.
pub fn convert(value: f64, from: Unit, to: Unit) -> Result<f64, UnsupportedConversion> {
    if from.dimension() != to.dimension() {
        return Err(UnsupportedConversion { from, to });
    }
    if from == to {
        return Ok(value);
    }
    if to.in_au() == 1.0 {
        Ok(value * from.in_au())
    } else {
        Ok(value / to.in_au())
    }
}

/// cm⁻¹ → hartree
pub fn wavenumber(value: f64) -> f64 {
    value * WAVENUMBER_TO_AU
}

/// D → e·a₀
pub fn debye(value: f64) -> f64 {
    value * DEBYE_TO_AU
}

/// ns → a.u. time
pub fn ns(value: f64) -> f64 {
    value * NS_TO_AU
}

/// ns² → a.u. time²
pub fn ns2(value: f64) -> f64 {
    value * NS2_TO_AU2
}

/// a.u. time² → ns²
pub fn to_ns2(value: f64) -> f64 {
    value / NS2_TO_AU2
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn ns_constant_to_twelve_digits() {
        let expected = 1.0e-9 / 2.4188843265857e-17;
        assert!(rel(NS_TO_AU, expected) < 1e-12);
        assert!(rel(NS_TO_AU, 4.134137e7) < 1e-6);
        assert!(rel(NS2_TO_AU2, expected * expected) < 1e-12);
    }

    #[test]
    fn rotational_constant_in_hartree() {
        // 0.20286 × 4.556335e-6
        let b = convert(0.20286, Unit::Wavenumber, Unit::AuEnergy).unwrap();
        assert!(rel(b, 9.242981e-7) < 1e-6);
        // twice B is the cavity frequency to within 1e-4
        let omega_c = (1.66379e-6 + 2.03353e-6) / 2.0;
        assert!(((2.0 * b - omega_c) / omega_c).abs() < 1e-4);
    }

    #[test]
    fn transform_limited_duration() {
        // the quoted pair 13.0851 ns ≈ 5.409e8 a.u. agrees to its printed precision
        let tau0 = convert(13.0851, Unit::Nanosecond, Unit::AuTime).unwrap();
        assert!(rel(tau0, 5.409e8) < 2e-4);
        let back = convert(5.409e8, Unit::AuTime, Unit::Nanosecond).unwrap();
        assert!((back - 13.0837).abs() < 1e-4);
    }

    #[test]
    fn zero_maps_to_zero() {
        for u in Unit::ALL {
            for v in Unit::ALL {
                if u.dimension() == v.dimension() {
                    assert_eq!(convert(0.0, u, v).unwrap(), 0.0);
                }
            }
        }
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        let err = convert(1.0, Unit::Debye, Unit::Nanosecond).unwrap_err();
        let msg = alloc::format!("{err}");
        assert!(msg.contains("D (dipole)") && msg.contains("ns (time)"), "{msg}");
        assert!(convert(1.0, Unit::Nanosecond, Unit::Nanosecond2).is_err());
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn pairs() -> impl Strategy<Value = (Unit, Unit)> {
            prop_oneof![
                Just((Unit::Wavenumber, Unit::AuEnergy)),
                Just((Unit::Debye, Unit::AuDipole)),
                Just((Unit::Nanosecond, Unit::AuTime)),
                Just((Unit::Nanosecond2, Unit::AuTime2)),
            ]
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(1000))]

            #[test]
            fn round_trip(x in -1e6f64..1e6, (a, b) in pairs(), flip in any::<bool>()) {
                let (a, b) = if flip { (b, a) } else { (a, b) };
                let back = convert(convert(x, a, b).unwrap(), b, a).unwrap();
                prop_assert!((back - x).abs() <= 1e-12 * x.abs());
            }

            #[test]
            fn homogeneous(x in -1e3f64..1e3, s in -1e3f64..1e3, (a, b) in pairs()) {
                let lhs = convert(s * x, a, b).unwrap();
                let rhs = s * convert(x, a, b).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1e-300));
            }
        }
    }
}
