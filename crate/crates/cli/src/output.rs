use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::failure::Outcome;

pub const SIGNIFICANT_DIGITS: usize = 12;

/// `%.12g`-style text for a float.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..SIGNIFICANT_DIGITS as i32).contains(&exp) {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(mut s: String) -> String {
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    s
}

/// Rounds a float to the printed precision.
pub fn round_num(x: f64) -> f64 {
    if x.is_finite() {
        fmt_num(x).parse().expect("formatted float parses")
    } else {
        x
    }
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().map(round_num).and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON with floats rounded to the printed precision. Non-finite values become `null`.
pub fn to_json<T: Serialize>(value: &T) -> Outcome<String> {
    let mut v = serde_json::to_value(value)?;
    round_value(&mut v);
    let mut text = serde_json::to_string_pretty(&v)?;
    text.push('\n');
    Ok(text)
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Outcome<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}

const SVG_WIDTH: f64 = 640.0;
const SVG_HEIGHT: f64 = 420.0;
const SVG_MARGIN: f64 = 50.0;

fn polyline(points: &[(f64, f64)]) -> String {
    let w = SVG_WIDTH - 2.0 * SVG_MARGIN;
    let h = SVG_HEIGHT - 2.0 * SVG_MARGIN;
    let mut d = String::new();
    for (i, (x, y)) in points.iter().enumerate() {
        let px = SVG_MARGIN + x.clamp(0.0, 1.0) * w;
        let py = SVG_HEIGHT - SVG_MARGIN - y.clamp(0.0, 1.0) * h;
        d.push_str(&format!("{}{px:.2},{py:.2}", if i == 0 { "M" } else { " L" }));
    }
    d
}

/// Line plot on the unit square: `solid` drawn solid, `dashed` drawn dashed.
pub fn curve_svg(solid: &[(f64, f64)], dashed: &[(f64, f64)], x_label: &str, y_label: &str) -> String {
    let x0 = SVG_MARGIN;
    let y0 = SVG_HEIGHT - SVG_MARGIN;
    let x1 = SVG_WIDTH - SVG_MARGIN;
    let y1 = SVG_MARGIN;
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_WIDTH}\" height=\"{SVG_HEIGHT}\" viewBox=\"0 0 {SVG_WIDTH} {SVG_HEIGHT}\">\n"
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    out.push_str(&format!(
        "<path d=\"M{x0},{y1} L{x0},{y0} L{x1},{y0}\" fill=\"none\" stroke=\"black\"/>\n"
    ));
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let px = x0 + t * (x1 - x0);
        let py = y0 - t * (y0 - y1);
        out.push_str(&format!(
            "<text x=\"{px:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">{t}</text>\n",
            y0 + 18.0
        ));
        out.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"end\">{t}</text>\n",
            x0 - 6.0,
            py + 4.0
        ));
    }
    out.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"14\" text-anchor=\"middle\">{x_label}</text>\n",
        (x0 + x1) / 2.0,
        SVG_HEIGHT - 10.0
    ));
    out.push_str(&format!(
        "<text x=\"14\" y=\"{:.2}\" font-size=\"14\" text-anchor=\"middle\">{y_label}</text>\n",
        (y0 + y1) / 2.0
    ));
    out.push_str(&format!(
        "<path d=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>\n",
        polyline(solid)
    ));
    out.push_str(&format!(
        "<path d=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\" stroke-dasharray=\"6,4\"/>\n",
        polyline(dashed)
    ));
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_like_percent_g() {
        assert_eq!(fmt_num(0.5), "0.5");
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(-0.0), "0");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_num(2.0 / 3.0 * 1e-7), "6.66666666667e-8");
        assert_eq!(fmt_num(123456789012345.0), "1.23456789012e14");
        assert_eq!(fmt_num(f64::INFINITY), "inf");
        assert_eq!(fmt_num(99.99999999999997), "100");
    }

    #[test]
    fn json_rounding_keeps_integers() {
        let text = to_json(&serde_json::json!({"a": 1.0 / 3.0, "b": 7, "c": f64::NAN})).unwrap();
        assert!(text.contains("0.333333333333"));
        assert!(text.contains("\"b\": 7"));
        assert!(text.contains("\"c\": null"));
    }

    #[test]
    fn svg_has_both_styles() {
        let svg = curve_svg(&[(0.0, 1.0), (1.0, 0.0)], &[(0.0, 1.0), (1.0, 0.5)], "delta", "q");
        assert_eq!(svg.matches("<path").count(), 3);
        assert!(svg.contains("stroke-dasharray"));
    }
}
