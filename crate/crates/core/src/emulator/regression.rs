//! Cubic least-squares map from surrogate values to logit utilities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest sample that supports the cubic basis with a spare degree of freedom.
pub const MIN_CUBIC_POINTS: usize = 5;
const RANK_TOLERANCE: f64 = 1e-10;

/// OLS coefficients, held on the standardised basis `z = (f - center) / scale`
/// and reported on the raw basis as `beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub beta: [f64; 4],
    pub center: f64,
    pub scale: f64,
    pub gamma: [f64; 4],
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl RegressionFit {
    /// A fit given directly on the raw basis.
    pub fn from_beta(beta: [f64; 4]) -> Self {
        RegressionFit { beta, center: 0.0, scale: 1.0, gamma: beta, warnings: Vec::new() }
    }

    fn from_standardized(gamma: [f64; 4], center: f64, scale: f64, warnings: Vec<String>) -> Self {
        let b = 1.0 / scale;
        let a = -center / scale;
        let [g0, g1, g2, g3] = gamma;
        let beta = [
            g0 + g1 * a + g2 * a * a + g3 * a * a * a,
            g1 * b + 2.0 * g2 * a * b + 3.0 * g3 * a * a * b,
            g2 * b * b + 3.0 * g3 * a * b * b,
            g3 * b * b * b,
        ];
        RegressionFit { beta, center, scale, gamma, warnings }
    }

    pub fn evaluate(&self, f: f64) -> f64 {
        let z = (f - self.center) / self.scale;
        let [g0, g1, g2, g3] = self.gamma;
        g0 + z * (g1 + z * (g2 + z * g3))
    }

    pub fn is_linear(&self) -> bool {
        self.gamma[2] == 0.0 && self.gamma[3] == 0.0
    }
}

/// Least-squares fit of `logits ~ 1 + f + f^2 + f^3`.
///
/// Falls back to a straight line when there are fewer than
/// [`MIN_CUBIC_POINTS`] points or the standardised design is rank deficient.
pub fn regression_adjust(fhat: &[f64], logits: &[f64]) -> Result<RegressionFit> {
    if fhat.len() != logits.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} surrogate values, {} logits",
            fhat.len(),
            logits.len()
        )));
    }
    if fhat.is_empty() {
        return Err(Error::invalid("regression needs at least one point"));
    }
    if fhat.iter().chain(logits).any(|v| !v.is_finite()) {
        return Err(Error::invalid("regression inputs must be finite"));
    }
    let n = fhat.len() as f64;
    let center = fhat.iter().sum::<f64>() / n;
    let var = fhat.iter().map(|f| (f - center).powi(2)).sum::<f64>() / n;
    let mean_eta = logits.iter().sum::<f64>() / n;
    let mut warnings = Vec::new();
    let scale = var.sqrt();
    // spread at rounding level counts as constant
    if !(scale > 1e-12 * center.abs().max(1.0)) {
        warnings.push("surrogate values are constant; adjustment is the mean logit".to_string());
        return Ok(RegressionFit::from_standardized([mean_eta, 0.0, 0.0, 0.0], center, 1.0, warnings));
    }
    let z: Vec<f64> = fhat.iter().map(|f| (f - center) / scale).collect();

    if fhat.len() >= MIN_CUBIC_POINTS {
        let design: Vec<[f64; 4]> = z.iter().map(|&z| [1.0, z, z * z, z * z * z]).collect();
        if let Some(g) = least_squares(&design, logits) {
            return Ok(RegressionFit::from_standardized(g, center, scale, warnings));
        }
        warnings.push("cubic design is rank deficient; using a linear adjustment".to_string());
    } else {
        warnings.push(format!(
            "{} points are too few for the cubic adjustment; using a linear adjustment",
            fhat.len()
        ));
    }
    let design: Vec<[f64; 2]> = z.iter().map(|&z| [1.0, z]).collect();
    match least_squares(&design, logits) {
        Some(g) => Ok(RegressionFit::from_standardized([g[0], g[1], 0.0, 0.0], center, scale, warnings)),
        None => {
            warnings.push("linear design is rank deficient; adjustment is the mean logit".to_string());
            Ok(RegressionFit::from_standardized([mean_eta, 0.0, 0.0, 0.0], center, scale, warnings))
        }
    }
}

/// Householder QR solve; `None` when a pivot is negligible.
fn least_squares<const K: usize>(design: &[[f64; K]], y: &[f64]) -> Option<[f64; K]> {
    let n = design.len();
    if n < K {
        return None;
    }
    // column-major copy
    let mut a: Vec<Vec<f64>> = (0..K).map(|c| design.iter().map(|row| row[c]).collect()).collect();
    let mut b = y.to_vec();
    let col_norms: Vec<f64> = a.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let mut diag = [0.0; K];
    for k in 0..K {
        let norm = a[k][k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > RANK_TOLERANCE * col_norms[k].max(1.0)) {
            return None;
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        diag[k] = alpha;
        if vnorm2 == 0.0 {
            continue;
        }
        for col in a.iter_mut().skip(k + 1) {
            let dot: f64 = v.iter().zip(&col[k..]).map(|(p, q)| p * q).sum();
            let s = 2.0 * dot / vnorm2;
            for (c, vi) in col[k..].iter_mut().zip(&v) {
                *c -= s * vi;
            }
        }
        let dot: f64 = v.iter().zip(&b[k..]).map(|(p, q)| p * q).sum();
        let s = 2.0 * dot / vnorm2;
        for (c, vi) in b[k..].iter_mut().zip(&v) {
            *c -= s * vi;
        }
    }
    let mut x = [0.0; K];
    for k in (0..K).rev() {
        let mut acc = b[k];
        for j in k + 1..K {
            acc -= a[j][k] * x[j];
        }
        x[k] = acc / diag[k];
    }
    Some(x)
}
