//! Output documents: compact JSON with 17 significant digits, or CSV.

use std::io;

use serde_json::ser::Formatter;
use serde_json::{Map, Value};

/// Formats a finite float with 17 significant digits, positional when the
/// exponent is moderate, trailing zeros removed.
pub fn format_f64(v: f64) -> String {
    if v == 0.0 {
        return if v.is_sign_negative() { "-0.0".into() } else { "0.0".into() };
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let digits = digits.trim_end_matches('0');
    let digits = if digits.is_empty() { "0" } else { digits };
    let sign = if negative { "-" } else { "" };
    if (-5..17).contains(&exp) {
        let body = if exp >= 0 {
            let point = exp as usize + 1;
            if digits.len() > point {
                format!("{}.{}", &digits[..point], &digits[point..])
            } else {
                format!("{}{}.0", digits, "0".repeat(point - digits.len()))
            }
        } else {
            format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
        };
        format!("{sign}{body}")
    } else {
        let tail = if digits.len() > 1 { &digits[1..] } else { "0" };
        format!("{sign}{}.{}e{}", &digits[..1], tail, exp)
    }
}

struct Sig17;

impl Formatter for Sig17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            writer.write_all(format_f64(value).as_bytes())
        } else {
            writer.write_all(b"null")
        }
    }
}

/// Compact JSON text of a value, floats at 17 significant digits.
pub fn to_json(value: &Value) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17);
    serde::Serialize::serialize(value, &mut ser).expect("in-memory JSON");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Number(n) => match n.as_f64() {
            Some(f) if n.is_f64() => format_f64(f),
            _ => n.to_string(),
        },
        other => to_json(other),
    }
}

/// CSV with a header row; `rows` are objects sharing the keys of the first.
pub fn to_csv(rows: &[Map<String, Value>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    if let Some(first) = rows.first() {
        let header: Vec<&str> = first.keys().map(String::as_str).collect();
        w.write_record(&header).expect("in-memory CSV");
        for row in rows {
            let rec: Vec<String> = header.iter().map(|k| row.get(*k).map(cell).unwrap_or_default()).collect();
            w.write_record(&rec).expect("in-memory CSV");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV")).expect("CSV is UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.5, 1.0 / 3.0, -2.0 * 2f64.ln() + 1.0, 1e-7, 123456.789, 1e20, 6.02e-23, 1.0, 100.0] {
            let s = format_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(format_f64(0.5), "0.5");
        assert_eq!(format_f64(1.0), "1.0");
        assert_eq!(format_f64(100.0), "100.0");
        assert_eq!(format_f64(1.0 / 3.0), "0.33333333333333331");
        assert_eq!(format_f64(2.5e-7), "2.4999999999999999e-7");
        assert_eq!(format_f64(2f64.powi(-30)), "9.3132257461547852e-10");
        assert_eq!(format_f64(2f64.powi(60)), "1.152921504606847e18");
        assert_eq!(format_f64(-0.125), "-0.125");
    }

    #[test]
    fn json_uses_formatter() {
        let v = serde_json::json!({"b": 0.1, "a": [1, f64::NAN]});
        assert_eq!(to_json(&v), r#"{"a":[1,null],"b":0.10000000000000001}"#);
    }

    #[test]
    fn csv_has_header() {
        let rows: Vec<Map<String, Value>> = (0..2)
            .map(|x| serde_json::json!({"x": x, "value": 0.5}).as_object().unwrap().clone())
            .collect();
        assert_eq!(to_csv(&rows), "value,x\n0.5,0\n0.5,1\n");
    }
}
