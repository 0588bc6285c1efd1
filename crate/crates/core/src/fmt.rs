//! Locale-independent numeric formatting for emitted CSV files.

/// Nine significant digits in scientific notation, e.g. `1.23456789e-3`.
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        // avoid "-0.00000000e0" for negative zero
        return "0.00000000e0".to_string();
    }
    format!("{x:.8e}")
}

#[cfg(test)]
mod tests {
    use super::sig9;

    #[test]
    fn nine_digits() {
        assert_eq!(sig9(1.0), "1.00000000e0");
        assert_eq!(sig9(-0.0), "0.00000000e0");
        assert_eq!(sig9(123456789.4), "1.23456789e8");
        assert_eq!(sig9(0.0164840).parse::<f64>().unwrap(), 0.016484);
    }
}
