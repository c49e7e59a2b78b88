/// Outcome of a central-difference gradient comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Index of the worst coordinate, if any were compared.
    pub worst: Option<usize>,
    pub checked: usize,
    /// Coordinates skipped because the function is not smooth around them.
    pub skipped: usize,
}

/// Compares `analytic` against `(f(θ+ε) − f(θ−ε)) / 2ε` coordinate-wise.
///
/// The relative error of a coordinate is `|a − n| / max(|a|, |n|, floor)`.
/// A coordinate is skipped when the one-sided slopes disagree by more than
/// `kink_tol` relative to their magnitude, which happens exactly when the
/// perturbation crosses a non-differentiable point such as a relu kink.
pub fn grad_check<F>(mut f: F, params: &[f64], analytic: &[f64], eps: f64, floor: f64) -> GradCheckReport
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(params.len(), analytic.len(), "gradient length mismatch");
    let kink_tol = 1e-2;
    let mut theta = params.to_vec();
    let f0 = f(&theta);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
        skipped: 0,
    };
    for k in 0..theta.len() {
        let orig = theta[k];
        theta[k] = orig + eps;
        let fp = f(&theta);
        theta[k] = orig - eps;
        let fm = f(&theta);
        theta[k] = orig;

        let right = (fp - f0) / eps;
        let left = (f0 - fm) / eps;
        let scale = right.abs().max(left.abs()).max(floor);
        if (right - left).abs() > kink_tol * scale && (right - left).abs() > 1e3 * eps * scale.max(1.0) {
            report.skipped += 1;
            continue;
        }
        let numeric = (fp - fm) / (2.0 * eps);
        let rel = (numeric - analytic[k]).abs() / analytic[k].abs().max(numeric.abs()).max(floor);
        report.checked += 1;
        if report.worst.is_none() || rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst = Some(k);
        }
    }
    report
}
