/// Display form with six significant digits; trailing zeros are dropped.
/// Integer parts are never rounded away, so 3194692 prints whole. Very large
/// or small magnitudes switch to scientific notation.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let exp: i32 = sci[sci.find('e').expect("exponent") + 1..].parse().expect("integer exponent");
    if !(-5..15).contains(&exp) {
        return sci;
    }
    let decimals = (5 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = format!("| {} |\n|{}|\n", header.join(" | "), header.iter().map(|_| "---").collect::<Vec<_>>().join("|"));
    for r in rows {
        out.push_str(&format!("| {} |\n", r.join(" | ")));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(2.2360679775), "2.23607");
        assert_eq!(sig6(3194692.0), "3194692");
        assert_eq!(sig6(-113315.0), "-113315");
        assert_eq!(sig6(0.81653330), "0.816533");
        assert_eq!(sig6(1.5), "1.5");
        assert_eq!(sig6(999999.7), "1000000");
        assert_eq!(sig6(1.0e-7), "1.00000e-7");
        assert_eq!(sig6(f64::NAN), "NaN");
    }

    #[test]
    fn markdown_table_shape() {
        let t = table(&["a", "b"], &[vec!["1".into(), "2".into()]]);
        assert_eq!(t, "| a | b |\n|---|---|\n| 1 | 2 |\n");
    }
}
