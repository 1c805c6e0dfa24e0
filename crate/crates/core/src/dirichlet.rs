//! Dirichlet sampling and log-density on the probability simplex.

use rand_distr::{Distribution, Gamma};

use crate::RngStream;

/// Draws from Dirichlet(`alpha`).
///
/// Gamma variates are combined in log space, so concentrations well below one
/// do not collapse the whole draw to zeros. Individual coordinates can still
/// underflow to exactly zero.
pub fn sample(alpha: &[f64], rng: &mut RngStream) -> Vec<f64> {
    let logs: Vec<f64> = alpha.iter().map(|&a| log_gamma_variate(a, rng)).collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logs.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= sum);
    out
}

fn log_gamma_variate(shape: f64, rng: &mut RngStream) -> f64 {
    debug_assert!(shape > 0.0, "Dirichlet concentration {shape}");
    if shape >= 1.0 {
        Gamma::new(shape, 1.0).unwrap().sample(rng).ln()
    } else {
        // G(a) = G(a + 1) * U^(1/a)
        let g = Gamma::new(shape + 1.0, 1.0).unwrap().sample(rng).ln();
        let u = 1.0 - rng.uniform();
        g + u.ln() / shape
    }
}

/// Log-density of Dirichlet(`alpha`) at `x`.
///
/// A coordinate whose concentration is exactly one contributes nothing, even
/// when the coordinate is zero.
pub fn ln_density(x: &[f64], alpha: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), alpha.len());
    let total: f64 = alpha.iter().sum();
    let mut lp = libm::lgamma(total);
    for (&xi, &ai) in x.iter().zip(alpha) {
        lp -= libm::lgamma(ai);
        if ai != 1.0 {
            lp += (ai - 1.0) * xi.ln();
        }
    }
    lp
}

/// Dirichlet mean `alpha / sum(alpha)`.
pub fn mean(alpha: &[f64]) -> Vec<f64> {
    let total: f64 = alpha.iter().sum();
    alpha.iter().map(|a| a / total).collect()
}
