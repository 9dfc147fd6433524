//! Plain CSV helpers: reals with 17 significant digits, a header row, and a
//! leading `#` comment carrying the configuration.

use std::fmt::Write as _;

/// A real with 17 significant digits, `.` as decimal separator.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Joins reals with commas.
pub fn fmt_row(values: &[f64]) -> String {
    values.iter().map(|&v| fmt_real(v)).collect::<Vec<_>>().join(",")
}

/// `# key=value key=value ...`, keys kept in the given order.
pub fn config_comment<K: AsRef<str>, V: AsRef<str>>(pairs: &[(K, V)]) -> String {
    let mut line = String::from("#");
    for (k, v) in pairs {
        let _ = write!(line, " {}={}", k.as_ref(), v.as_ref());
    }
    line
}

/// Quotes a field if it contains a comma, quote or newline.
pub fn escape_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip() {
        for x in [std::f64::consts::PI, -1e-300, 0.1, 123456.789, 0.0] {
            assert_eq!(fmt_real(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_real(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn comment_line() {
        assert_eq!(config_comment(&[("M", "3"), ("r", "0.5")]), "# M=3 r=0.5");
    }

    #[test]
    fn escaping() {
        assert_eq!(escape_field("a,b"), "\"a,b\"");
        assert_eq!(escape_field("say \"x\""), "\"say \"\"x\"\"\"");
        assert_eq!(escape_field("plain"), "plain");
    }
}
