//! JSON emission with fixed-width scientific floats.
//!
//! All command outputs go through [`to_string`] so that a float re-read from
//! disk is bit-identical to the one written. 17 significant digits are enough
//! to round-trip any finite f64.

use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};
use std::io;

pub struct SciFormatter;

impl Formatter for SciFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{:.16e}", value)
    }
}

/// Serialize with compact layout and 17-digit scientific floats.
pub fn to_string<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = Serializer::with_formatter(&mut out, SciFormatter);
    value
        .serialize(&mut ser)
        .expect("in-memory serialization does not fail");
    String::from_utf8(out).expect("serializer emits utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_bitwise() {
        let cases = [
            0.1f64 + 0.2,
            1.0 / 3.0,
            1e-300,
            -0.0,
            std::f64::consts::PI,
            2f64.powi(-1074),
            1.7976931348623157e308,
        ];
        for &x in &cases {
            let text = to_string(&x);
            let back: f64 = serde_json::from_str(&text).unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "failed for {text}");
        }
    }

    #[test]
    fn structures_stay_compact() {
        #[derive(Serialize)]
        struct Row {
            name: &'static str,
            value: f64,
        }
        let text = to_string(&Row { name: "a", value: 0.5 });
        assert_eq!(text, "{\"name\":\"a\",\"value\":5.0000000000000000e-1}");
    }
}
