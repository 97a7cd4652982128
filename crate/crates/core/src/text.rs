//! Deterministic number formatting for the CSV interchange files.
//!
//! Report files carry decimal text with 9 significant digits. Checkpoint
//! files instead use Rust's shortest round-trip `Display`, which restores
//! `f64` values bit-exactly; see [`crate::checkpoint`].

/// Formats with 9 significant digits as plain decimal text.
pub fn sig9(v: f64) -> String {
    if v == 0.0 {
        return "0.00000000".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    // Keep plain decimal notation within a sane magnitude window, otherwise
    // fall back to scientific with 9 significant digits.
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        format!("{:.*}", decimals, v)
    } else {
        format!("{:.8e}", v)
    }
}

/// Parses a float written by [`sig9`] or by checkpoint `Display`.
pub fn parse_f64(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(sig9(4.0), "4.00000000");
        assert_eq!(sig9(0.095), "0.0950000000");
        assert_eq!(sig9(-1.5), "-1.50000000");
        assert_eq!(sig9(123.456789123), "123.456789");
        assert_eq!(sig9(0.0), "0.00000000");
    }

    #[test]
    fn large_magnitudes_round_trip_closely() {
        for &v in &[1.0e12, -3.7e-7, 2.5e9, 0.333333333333] {
            let parsed = parse_f64(&sig9(v)).unwrap();
            assert!((parsed - v).abs() <= v.abs() * 1e-8);
        }
    }
}
