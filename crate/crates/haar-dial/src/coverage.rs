//! Fabrication-tolerance coverage: the probability that every component of a
//! dialled circuit stays inside its reachable range when each reflectivity is
//! offset by Gaussian noise.
//!
//! A component with cdf exponent e = n - i keeps its dialled value reachable
//! when the offset magnitude a leaves [a, 1 - a] inside the support, which
//! happens with probability (1 - a)^e - a^e. Coverage multiplies these
//! factors over the whole mesh and averages over noise draws. Factor
//! exponents form the same multiset for every scheme, so coverage is
//! scheme independent.

use rand::distr::Distribution;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::sampler::{RngStream, StreamKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorMode {
    /// Every component draws its own offset.
    PerComponent,
    /// One offset per trial is shared by the whole mesh.
    Shared,
}

impl ErrorMode {
    pub fn name(self) -> &'static str {
        match self {
            ErrorMode::PerComponent => "per-component",
            ErrorMode::Shared => "shared",
        }
    }
}

impl fmt::Display for ErrorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ErrorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<ErrorMode> {
        match s {
            "per-component" => Ok(ErrorMode::PerComponent),
            "shared" => Ok(ErrorMode::Shared),
            other => Err(Error::Validation(format!("unknown error mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverageConfig {
    pub m_max: usize,
    pub sigmas: Vec<f64>,
    pub trials: usize,
    pub error_mode: ErrorMode,
    pub seed: u64,
}

impl CoverageConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m_max < 2 {
            return Err(Error::Validation(format!(
                "m_max must be at least 2, got {}",
                self.m_max
            )));
        }
        if self.trials < 1 {
            return Err(Error::Validation("need at least one trial".into()));
        }
        if self.sigmas.is_empty() {
            return Err(Error::Validation("need at least one sigma".into()));
        }
        for &s in &self.sigmas {
            if !s.is_finite() || !(0.0..0.5).contains(&s) {
                return Err(Error::Validation(format!(
                    "sigma must lie in [0, 0.5), got {s}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverageRow {
    pub m: usize,
    pub sigma: f64,
    pub coverage: f64,
    pub stderr: f64,
}

/// Probability that the marginal of component i of block n survives an
/// offset of magnitude |eps|: (1 - |eps|)^(n-i) - |eps|^(n-i), clamped at 0.
/// An offset of 0.5 or more empties the admissible range; that is a result,
/// not an error.
pub fn truncated_mass(n: usize, i: usize, eps: f64) -> Result<f64> {
    if n < 2 || i < 1 || i >= n {
        return Err(Error::Domain(format!(
            "component index {i} outside 1..{} for block {n}",
            n.max(1) - 1
        )));
    }
    if !eps.is_finite() {
        return Err(Error::Domain("offset must be finite".into()));
    }
    let a = eps.abs();
    if a >= 0.5 {
        return Ok(0.0);
    }
    let e = (n - i) as i32;
    Ok(((1.0 - a).powi(e) - a.powi(e)).max(0.0))
}

/// Walk trial-major over the per-trial coverage values. For each trial the
/// noise stream is consumed in block order n = 2..m_max, i = 1..n-1, so the
/// value at mode count m only ever sees the draws of its own prefix; the
/// same draws serve every sigma. Both facts make coverage monotone in m and
/// in sigma trial by trial, not just on average.
fn for_each_trial_value<F>(
    m_max: usize,
    sigmas: &[f64],
    trials: usize,
    error_mode: ErrorMode,
    seed: u64,
    mut sink: F,
) -> Result<()>
where
    F: FnMut(usize, usize, usize, f64),
{
    for trial in 0..trials {
        let stream = RngStream::new(seed, trial as u32, 0, 0, StreamKind::Coverage);
        let mut rng = stream.rng();
        let shared_z: f64 = match error_mode {
            ErrorMode::Shared => StandardNormal.sample(&mut rng),
            ErrorMode::PerComponent => 0.0,
        };
        let mut log_products = vec![0.0f64; sigmas.len()];
        for n in 2..=m_max {
            for i in 1..n {
                let z: f64 = match error_mode {
                    ErrorMode::PerComponent => StandardNormal.sample(&mut rng),
                    ErrorMode::Shared => shared_z,
                };
                for (s_idx, &sigma) in sigmas.iter().enumerate() {
                    let mass = truncated_mass(n, i, sigma * z)?;
                    log_products[s_idx] += if mass > 0.0 {
                        mass.ln()
                    } else {
                        f64::NEG_INFINITY
                    };
                }
            }
            for (s_idx, &lp) in log_products.iter().enumerate() {
                sink(trial, n, s_idx, lp.exp());
            }
        }
    }
    Ok(())
}

/// Coverage for every (m, sigma) pair with m from 2 to m_max. Rows are
/// ordered m-major. Thanks to common noise draws the column at a fixed sigma
/// is non-increasing in m and the row at a fixed m is non-increasing in
/// sigma, trial by trial.
pub fn coverage_curve(cfg: &CoverageConfig) -> Result<Vec<CoverageRow>> {
    cfg.validate()?;
    let n_m = cfg.m_max - 1;
    let n_s = cfg.sigmas.len();
    let mut sums = vec![0.0f64; n_m * n_s];
    let mut sums_sq = vec![0.0f64; n_m * n_s];
    for_each_trial_value(
        cfg.m_max,
        &cfg.sigmas,
        cfg.trials,
        cfg.error_mode,
        cfg.seed,
        |_trial, m, s_idx, value| {
            let cell = (m - 2) * n_s + s_idx;
            sums[cell] += value;
            sums_sq[cell] += value * value;
        },
    )?;
    let nt = cfg.trials as f64;
    let mut rows = Vec::with_capacity(n_m * n_s);
    for m in 2..=cfg.m_max {
        for (s_idx, &sigma) in cfg.sigmas.iter().enumerate() {
            let cell = (m - 2) * n_s + s_idx;
            let mean = sums[cell] / nt;
            let stderr = if cfg.trials > 1 {
                let var = ((sums_sq[cell] / nt - mean * mean) * nt / (nt - 1.0)).max(0.0);
                (var / nt).sqrt()
            } else {
                0.0
            };
            rows.push(CoverageRow {
                m,
                sigma,
                coverage: mean,
                stderr,
            });
        }
    }
    Ok(rows)
}

/// Coverage at a single (m, sigma). Exactly the corresponding entry of
/// `coverage_curve`, because trials consume their noise stream in the same
/// prefix order regardless of m_max.
pub fn coverage(
    m: usize,
    sigma: f64,
    trials: usize,
    error_mode: ErrorMode,
    seed: u64,
) -> Result<f64> {
    let cfg = CoverageConfig {
        m_max: m,
        sigmas: vec![sigma],
        trials,
        error_mode,
        seed,
    };
    let rows = coverage_curve(&cfg)?;
    Ok(rows.last().expect("curve has at least one row").coverage)
}

/// Per-trial coverage values at a single (m, sigma), for distribution-level
/// checks.
pub fn coverage_trials(
    m: usize,
    sigma: f64,
    trials: usize,
    error_mode: ErrorMode,
    seed: u64,
) -> Result<Vec<f64>> {
    let cfg = CoverageConfig {
        m_max: m,
        sigmas: vec![sigma],
        trials,
        error_mode,
        seed,
    };
    cfg.validate()?;
    let mut values = vec![0.0f64; trials];
    for_each_trial_value(m, &cfg.sigmas, trials, error_mode, seed, |t, mm, _s, v| {
        if mm == m {
            values[t] = v;
        }
    })?;
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::adaptive_simpson;
    use crate::sampler::marginal_exponent;
    use crate::circuit::Scheme;

    #[test]
    fn truncated_mass_examples() {
        // Uniform marginal loses exactly the two clipped tails.
        assert_eq!(truncated_mass(2, 1, 0.1).unwrap(), 0.8);
        assert_eq!(truncated_mass(5, 2, 0.0).unwrap(), 1.0);
        assert_eq!(truncated_mass(5, 2, 0.5).unwrap(), 0.0);
        assert_eq!(truncated_mass(5, 2, 0.7).unwrap(), 0.0);
        assert_eq!(
            truncated_mass(4, 1, -0.2).unwrap(),
            truncated_mass(4, 1, 0.2).unwrap()
        );
        assert!(truncated_mass(3, 0, 0.1).is_err());
        assert!(truncated_mass(3, 3, 0.1).is_err());
        assert!(truncated_mass(3, 1, f64::NAN).is_err());
    }

    #[test]
    fn truncated_mass_matches_quadrature() {
        for n in [2usize, 3, 7, 20] {
            for i in 1..n.min(4) {
                for eps in [0.0, 0.01, 0.2, 0.49] {
                    let e = (n - i) as f64;
                    let pdf = move |r: f64| e * (1.0 - r).powi((n - i - 1) as i32);
                    let direct = adaptive_simpson(&pdf, eps, 1.0 - eps, 1e-13);
                    let mass = truncated_mass(n, i, eps).unwrap();
                    assert!(
                        (mass - direct).abs() < 1e-10,
                        "n={n} i={i} eps={eps}: {mass} vs {direct}"
                    );
                }
            }
        }
    }

    #[test]
    fn zero_noise_gives_full_coverage() {
        let rows = coverage_curve(&CoverageConfig {
            m_max: 6,
            sigmas: vec![0.0],
            trials: 50,
            error_mode: ErrorMode::PerComponent,
            seed: 1,
        })
        .unwrap();
        for row in rows {
            assert_eq!(row.coverage, 1.0);
            assert_eq!(row.stderr, 0.0);
        }
    }

    #[test]
    fn coverage_is_monotone_in_m_trial_by_trial() {
        for mode in [ErrorMode::PerComponent, ErrorMode::Shared] {
            let small = coverage_trials(4, 0.02, 200, mode, 7).unwrap();
            let large = coverage_trials(7, 0.02, 200, mode, 7).unwrap();
            for (s, l) in small.iter().zip(&large) {
                assert!(l <= s, "{mode}: trial went up from {s} to {l}");
            }
            let mean_small: f64 = small.iter().sum::<f64>() / 200.0;
            let mean_large: f64 = large.iter().sum::<f64>() / 200.0;
            assert!(mean_large < mean_small);
        }
    }

    #[test]
    fn coverage_is_monotone_in_sigma_trial_by_trial() {
        let lo = coverage_trials(6, 0.001, 200, ErrorMode::PerComponent, 7).unwrap();
        let hi = coverage_trials(6, 0.01, 200, ErrorMode::PerComponent, 7).unwrap();
        for (a, b) in lo.iter().zip(&hi) {
            assert!(b <= a);
        }
    }

    #[test]
    fn single_point_matches_curve_entry_bitwise() {
        let cfg = CoverageConfig {
            m_max: 8,
            sigmas: vec![0.003, 0.01],
            trials: 100,
            error_mode: ErrorMode::PerComponent,
            seed: 13,
        };
        let rows = coverage_curve(&cfg).unwrap();
        let single = coverage(5, 0.01, 100, ErrorMode::PerComponent, 13).unwrap();
        let row = rows
            .iter()
            .find(|r| r.m == 5 && r.sigma == 0.01)
            .unwrap();
        assert_eq!(single.to_bits(), row.coverage.to_bits());
    }

    #[test]
    fn factor_multiset_is_scheme_independent() {
        for m in [4usize, 6, 7] {
            let mut tri: Vec<usize> = Vec::new();
            let mut rect: Vec<usize> = Vec::new();
            for n in 2..=m {
                for i in 1..n {
                    tri.push(marginal_exponent(m, Scheme::TriangularAdjacent, n, i).unwrap());
                    rect.push(marginal_exponent(m, Scheme::Rectangular, n, i).unwrap());
                }
            }
            tri.sort_unstable();
            rect.sort_unstable();
            assert_eq!(tri, rect, "m={m}");
            // Identical exponent multisets give bitwise-identical products
            // when multiplied in sorted order.
            let eps = 0.07;
            let prod = |es: &[usize]| -> f64 {
                es.iter()
                    .map(|&e| truncated_mass(e + 1, 1, eps).unwrap())
                    .product()
            };
            assert_eq!(prod(&tri).to_bits(), prod(&rect).to_bits());
        }
    }

    #[test]
    fn log_accumulation_matches_direct_product() {
        // One shared trial, small mesh: recompute the product directly.
        let vals = coverage_trials(6, 0.01, 1, ErrorMode::Shared, 99).unwrap();
        let stream = RngStream::new(99, 0, 0, 0, StreamKind::Coverage);
        let mut rng = stream.rng();
        let z: f64 = StandardNormal.sample(&mut rng);
        let mut direct = 1.0f64;
        for n in 2..=6 {
            for i in 1..n {
                direct *= truncated_mass(n, i, 0.01 * z).unwrap();
            }
        }
        assert!((vals[0] - direct).abs() < 1e-12 * direct.max(1e-30));
    }

    #[test]
    fn config_validation_errors() {
        let bad_sigma = CoverageConfig {
            m_max: 4,
            sigmas: vec![0.6],
            trials: 10,
            error_mode: ErrorMode::Shared,
            seed: 0,
        };
        assert!(bad_sigma.validate().is_err());
        let no_trials = CoverageConfig {
            m_max: 4,
            sigmas: vec![0.1],
            trials: 0,
            error_mode: ErrorMode::Shared,
            seed: 0,
        };
        assert!(no_trials.validate().is_err());
        let tiny = CoverageConfig {
            m_max: 1,
            sigmas: vec![0.1],
            trials: 10,
            error_mode: ErrorMode::Shared,
            seed: 0,
        };
        assert!(tiny.validate().is_err());
    }

    #[test]
    fn coverage_values_stay_in_unit_interval() {
        for mode in [ErrorMode::PerComponent, ErrorMode::Shared] {
            let rows = coverage_curve(&CoverageConfig {
                m_max: 10,
                sigmas: vec![0.0, 0.001, 0.05, 0.3],
                trials: 100,
                error_mode: mode,
                seed: 3,
            })
            .unwrap();
            for row in rows {
                assert!((0.0..=1.0).contains(&row.coverage));
                assert!(row.stderr >= 0.0);
            }
        }
    }
}
