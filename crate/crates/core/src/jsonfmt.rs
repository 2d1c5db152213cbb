//! JSON emission with fixed float formatting.

use std::io;
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};

/// Formatter printing every float with 17 significant digits so `f64` values
/// round-trip exactly and repeated runs emit byte-identical files.
struct SigDigitFormatter;

impl Formatter for SigDigitFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.write_f64(writer, f64::from(value))
    }
}

/// Serializes with deterministic field order (declaration order) and
/// 17-significant-digit floats.
pub fn to_json_string<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut out = Vec::new();
    let mut serializer = Serializer::with_formatter(&mut out, SigDigitFormatter);
    value.serialize(&mut serializer)?;
    Ok(String::from_utf8(out).expect("serde_json emits utf-8"))
}

pub fn write_json_file<T: Serialize>(path: impl AsRef<Path>, value: &T) -> io::Result<()> {
    let mut text = to_json_string(value)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
    text.push('\n');
    std::fs::write(path, text)
}
