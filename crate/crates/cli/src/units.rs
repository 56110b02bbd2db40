//! Physical quantities with units, accepted in config files and on the
//! command line and stored in SI.
//!
//! In JSON a bare number is taken as SI (meters, radians); a string must
//! carry a unit suffix. On the command line the unit is mandatory.

use std::fmt;
use std::str::FromStr;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Angle,
}

impl Dimension {
    fn units(self) -> &'static [(&'static str, f64)] {
        match self {
            Dimension::Length => &[("nm", 1e-9), ("um", 1e-6), ("µm", 1e-6), ("mm", 1e-3), ("m", 1.0)],
            Dimension::Angle => &[("deg", std::f64::consts::PI / 180.0), ("rad", 1.0)],
        }
    }

    fn name(self) -> &'static str {
        match self {
            Dimension::Length => "length",
            Dimension::Angle => "angle",
        }
    }
}

/// Parses `"<number><unit>"`, optional whitespace between, into SI.
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64, String> {
    let text = text.trim();
    let number = text.trim_end_matches(|c: char| c.is_alphabetic());
    if number.len() == text.len() {
        return Err(format!(
            "`{text}` has no unit; expected a {} such as {}",
            dim.name(),
            example(dim)
        ));
    }
    let unit = &text[number.len()..];
    let value: f64 = number
        .trim()
        .parse()
        .map_err(|_| format!("`{text}`: `{}` is not a number", number.trim()))?;
    if !value.is_finite() {
        return Err(format!("`{text}` is not finite"));
    }
    let unit = unit.trim();
    for (name, scale) in dim.units() {
        if *name == unit {
            return Ok(value * scale);
        }
    }
    let other = match dim {
        Dimension::Length => Dimension::Angle,
        Dimension::Angle => Dimension::Length,
    };
    if other.units().iter().any(|(n, _)| *n == unit) {
        return Err(format!(
            "`{text}` is {} {}, expected {} {}",
            article(other),
            other.name(),
            article(dim),
            dim.name()
        ));
    }
    let known: Vec<&str> = dim.units().iter().map(|u| u.0).collect();
    Err(format!(
        "`{text}`: unknown unit `{unit}` (known: {})",
        known.join(", ")
    ))
}

fn example(dim: Dimension) -> &'static str {
    match dim {
        Dimension::Length => "`5mm`",
        Dimension::Angle => "`32.9deg`",
    }
}

fn article(dim: Dimension) -> &'static str {
    match dim {
        Dimension::Angle => "an",
        Dimension::Length => "a",
    }
}

macro_rules! quantity {
    ($name:ident, $dim:expr, $doc:literal) => {
        #[doc = $doc]
        #[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
        pub struct $name(pub f64);

        impl $name {
            pub fn si(self) -> f64 {
                self.0
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                parse_quantity(s, $dim).map($name)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_f64(self.0)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                struct V;
                impl<'de> Visitor<'de> for V {
                    type Value = $name;

                    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                        write!(f, "a {} in SI units or a string with a unit", $dim.name())
                    }

                    fn visit_f64<E: de::Error>(self, v: f64) -> Result<$name, E> {
                        Ok($name(v))
                    }

                    fn visit_i64<E: de::Error>(self, v: i64) -> Result<$name, E> {
                        Ok($name(v as f64))
                    }

                    fn visit_u64<E: de::Error>(self, v: u64) -> Result<$name, E> {
                        Ok($name(v as f64))
                    }

                    fn visit_str<E: de::Error>(self, v: &str) -> Result<$name, E> {
                        parse_quantity(v, $dim).map($name).map_err(E::custom)
                    }
                }
                d.deserialize_any(V)
            }
        }
    };
}

quantity!(Length, Dimension::Length, "A length in meters.");
quantity!(Angle, Dimension::Angle, "An angle in radians.");

/// Comma-separated list of quantities, as given to `--values`.
pub fn parse_list(text: &str, dim: Dimension) -> Result<Vec<f64>, String> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_quantity(s, dim))
        .collect()
}
