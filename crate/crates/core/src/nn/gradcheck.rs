//! Finite-difference validation of analytic gradients.

/// Central difference `(f(x+h) - f(x-h)) / 2h` of a scalar function at `x`.
pub fn central_difference<F: FnMut(f64) -> f64>(mut f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Symmetric relative error with an absolute floor so that near-zero pairs
/// compare absolutely instead of blowing up.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-6)
}

#[derive(Debug, Clone)]
pub struct GradCheckEntry {
    pub block: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub entries: Vec<GradCheckEntry>,
    pub max_rel_err: f64,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err < self.tolerance
    }

    /// Worst offender, handy for failure messages.
    pub fn worst(&self) -> Option<&GradCheckEntry> {
        self.entries
            .iter()
            .max_by(|a, b| a.rel_err.partial_cmp(&b.rel_err).unwrap())
    }

    /// Max relative error per named block, in first-appearance order.
    pub fn per_block_max(&self) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = Vec::new();
        for e in &self.entries {
            match out.iter_mut().find(|(name, _)| *name == e.block) {
                Some((_, m)) => *m = m.max(e.rel_err),
                None => out.push((e.block.clone(), e.rel_err)),
            }
        }
        out
    }
}

/// Checks every coordinate of `analytic` against a central difference of
/// `loss` evaluated on `params`. `blocks` names consecutive slices of the
/// flat parameter vector (sizes must sum to its length) so failures can be
/// attributed. `params` is restored to its original values.
pub fn check_gradients<F>(
    params: &mut [f64],
    analytic: &[f64],
    blocks: &[(&str, usize)],
    h: f64,
    tolerance: f64,
    mut loss: F,
) -> GradCheckReport
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(params.len(), analytic.len());
    let total: usize = blocks.iter().map(|&(_, n)| n).sum();
    assert_eq!(total, params.len(), "block sizes must cover the parameter vector");

    let mut entries = Vec::with_capacity(params.len());
    let mut max_rel_err = 0.0f64;
    let mut idx = 0;
    for &(name, len) in blocks {
        for k in 0..len {
            let original = params[idx];
            params[idx] = original + h;
            let plus = loss(params);
            params[idx] = original - h;
            let minus = loss(params);
            params[idx] = original;
            let numeric = (plus - minus) / (2.0 * h);
            let rel_err = relative_error(analytic[idx], numeric);
            max_rel_err = max_rel_err.max(rel_err);
            entries.push(GradCheckEntry {
                block: name.to_string(),
                index: k,
                analytic: analytic[idx],
                numeric,
                rel_err,
            });
            idx += 1;
        }
    }
    GradCheckReport { entries, max_rel_err, tolerance }
}
