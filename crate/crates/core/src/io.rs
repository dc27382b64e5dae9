//! Byte-stable text output: JSON with 17 significant digits and plain CSV.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::search::ScanTable;

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "nan".into()
    }
}

/// Pretty JSON whose floats carry 17 significant digits.
struct Digits17<'a>(PrettyFormatter<'a>);

impl Formatter for Digits17<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(format!("{value:.16e}").as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes `value` as indented JSON with a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser =
        serde_json::Serializer::with_formatter(&mut buf, Digits17(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .expect("serializing to memory cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

/// Comma-separated rows under a fixed header.
pub fn csv<R: AsRef<[String]>>(header: &[&str], rows: &[R]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.as_ref().join(","));
        out.push('\n');
    }
    out
}

/// `theta_1,…,theta_g,detN`; cells inside a margin print `nan`. With a
/// threshold only cells with |det N| above it are kept.
pub fn scan_csv(table: &ScanTable, threshold: Option<f64>) -> String {
    let names: Vec<String> = (1..=table.g).map(|k| format!("theta_{k}")).collect();
    let mut header: Vec<&str> = names.iter().map(String::as_str).collect();
    header.push("detN");
    let rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .filter(|r| match threshold {
            Some(th) => r.det_n.is_some_and(|d| d.abs() > th),
            None => true,
        })
        .map(|r| {
            r.theta
                .iter()
                .map(|&x| fmt_f64(x))
                .chain(std::iter::once(
                    r.det_n.map_or_else(|| "nan".into(), fmt_f64),
                ))
                .collect()
        })
        .collect();
    csv(&header, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::ScanRow;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let j = to_json(&x);
            assert_eq!(serde_json::from_str::<f64>(&j).unwrap(), x);
        }
        assert_eq!(to_json(&vec![0.5]), "[\n  5.0000000000000000e-1\n]\n");
    }

    #[test]
    fn scan_csv_layout() {
        let t = ScanTable {
            g: 2,
            rows: vec![
                ScanRow {
                    theta: vec![0.5, 1.0],
                    det_n: Some(0.25),
                },
                ScanRow {
                    theta: vec![1.0, 0.5],
                    det_n: None,
                },
            ],
        };
        let out = scan_csv(&t, None);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], "theta_1,theta_2,detN");
        assert_eq!(lines[2], "1.0000000000000000e0,5.0000000000000000e-1,nan");
        assert_eq!(scan_csv(&t, Some(0.1)).lines().count(), 2);
    }
}
