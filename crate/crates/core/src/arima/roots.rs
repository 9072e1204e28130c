use num_complex::Complex64;

/// Roots of the monic polynomial `x^n + a[0] x^{n-1} + ... + a[n-1]`
/// (Durand-Kerner iteration).
pub fn poly_roots(a: &[f64]) -> Vec<Complex64> {
    let n = a.len();
    match n {
        0 => return Vec::new(),
        1 => return vec![Complex64::new(-a[0], 0.0)],
        _ => {}
    }
    let eval = |x: Complex64| a.iter().fold(Complex64::new(1.0, 0.0), |acc, &c| acc * x + c);
    let bound = 1.0 + a.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..n).map(|k| seed.powu(k as u32) * bound.min(2.0)).collect();
    for _ in 0..1000 {
        let mut change = 0.0f64;
        for i in 0..n {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    denom *= roots[i] - roots[j];
                }
            }
            if denom.norm() == 0.0 {
                denom = Complex64::new(1e-12, 0.0);
            }
            let delta = eval(roots[i]) / denom;
            roots[i] -= delta;
            change = change.max(delta.norm());
        }
        if change < 1e-14 {
            break;
        }
    }
    roots
}

/// Moduli of the roots of `1 - phi_1 z - ... - phi_p z^p`. Trailing zero
/// coefficients lower the degree (roots at infinity are omitted).
pub fn ar_root_moduli(phi: &[f64]) -> Vec<f64> {
    let neg: Vec<f64> = phi.iter().map(|v| -v).collect();
    reciprocal_moduli(&neg)
}

/// Moduli of the roots of `1 + theta_1 z + ... + theta_q z^q`.
pub fn ma_root_moduli(theta: &[f64]) -> Vec<f64> {
    reciprocal_moduli(theta)
}

/// Roots of `1 + b_1 z + ... + b_k z^k` are the reciprocals of the roots of
/// the monic `x^k + b_1 x^{k-1} + ... + b_k`.
fn reciprocal_moduli(b: &[f64]) -> Vec<f64> {
    let k = b.iter().rposition(|v| *v != 0.0).map_or(0, |i| i + 1);
    let mut moduli: Vec<f64> = poly_roots(&b[..k]).into_iter().map(|r| 1.0 / r.norm()).collect();
    moduli.sort_by(f64::total_cmp);
    moduli
}
