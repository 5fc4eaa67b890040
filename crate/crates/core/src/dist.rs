//! One-dimensional feature distributions.
//!
//! A [`FeatureDistribution`] is the class-conditional density of the scalar
//! feature: Gaussian, Beta on `[0, 1]`, or a tabulated density with linear
//! interpolation between grid points. All three expose the density, the CDF,
//! the quantile function, and a support interval; unbounded supports are
//! clamped to `mean ± 12·stddev`, beyond which the tail mass is below 1e-30
//! and therefore below every tolerance used in this crate.
//!
//! [`verify_mlr`] checks the strict monotone likelihood ratio property
//! between a pair of distributions on a grid spanning their common
//! effective support.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};

use crate::error::{Error, Result};
use crate::special::{erf_inv, erfc};

/// Width of the clamped support of a Gaussian, in standard deviations.
const GAUSSIAN_CLAMP_SIGMAS: f64 = 12.0;

/// Densities below this are treated as zero when intersecting supports.
pub const EFFECTIVE_DENSITY_FLOOR: f64 = 1e-12;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const SQRT_TAU: f64 = 2.5066282746310002; // sqrt(2π)

/// A one-dimensional class-conditional feature density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistSpec", into = "DistSpec")]
pub enum FeatureDistribution {
    Gaussian {
        mean: f64,
        stddev: f64,
    },
    Beta {
        shape_a: f64,
        shape_b: f64,
    },
    Tabulated {
        grid: Vec<f64>,
        density: Vec<f64>,
        /// Cumulative trapezoid integral of `density`, normalized to end at 1.
        cum: Vec<f64>,
    },
}

/// Wire form of a distribution literal, e.g.
/// `{"kind":"gaussian","mean":-5,"stddev":5}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum DistSpec {
    Gaussian { mean: f64, stddev: f64 },
    Beta { a: f64, b: f64 },
    Tabulated { grid: Vec<f64>, density: Vec<f64> },
}

impl TryFrom<DistSpec> for FeatureDistribution {
    type Error = Error;
    fn try_from(spec: DistSpec) -> Result<Self> {
        match spec {
            DistSpec::Gaussian { mean, stddev } => FeatureDistribution::gaussian(mean, stddev),
            DistSpec::Beta { a, b } => FeatureDistribution::beta(a, b),
            DistSpec::Tabulated { grid, density } => FeatureDistribution::tabulated(grid, density),
        }
    }
}

impl From<FeatureDistribution> for DistSpec {
    fn from(d: FeatureDistribution) -> Self {
        match d {
            FeatureDistribution::Gaussian { mean, stddev } => DistSpec::Gaussian { mean, stddev },
            FeatureDistribution::Beta { shape_a, shape_b } => DistSpec::Beta {
                a: shape_a,
                b: shape_b,
            },
            FeatureDistribution::Tabulated { grid, density, .. } => {
                DistSpec::Tabulated { grid, density }
            }
        }
    }
}

impl FeatureDistribution {
    pub fn gaussian(mean: f64, stddev: f64) -> Result<Self> {
        if !mean.is_finite() || !stddev.is_finite() || stddev <= 0.0 {
            return Err(Error::InvalidDistribution(format!(
                "gaussian requires finite mean and stddev > 0, got mean={mean}, stddev={stddev}"
            )));
        }
        Ok(FeatureDistribution::Gaussian { mean, stddev })
    }

    pub fn beta(shape_a: f64, shape_b: f64) -> Result<Self> {
        if !(shape_a > 0.0 && shape_b > 0.0) || !shape_a.is_finite() || !shape_b.is_finite() {
            return Err(Error::InvalidDistribution(format!(
                "beta requires positive shapes, got a={shape_a}, b={shape_b}"
            )));
        }
        Ok(FeatureDistribution::Beta { shape_a, shape_b })
    }

    /// Builds a tabulated density with linear interpolation between grid
    /// points. The density is renormalized on load, so config files only
    /// need finite precision.
    pub fn tabulated(grid: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != density.len() {
            return Err(Error::InvalidDistribution(format!(
                "tabulated requires matching grid/density of length >= 2, got {} and {}",
                grid.len(),
                density.len()
            )));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidDistribution(
                "tabulated grid must be finite and strictly increasing".into(),
            ));
        }
        if density.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::InvalidDistribution(
                "tabulated density values must be finite and non-negative".into(),
            ));
        }
        let mut cum = vec![0.0; grid.len()];
        for i in 1..grid.len() {
            let w = grid[i] - grid[i - 1];
            cum[i] = cum[i - 1] + 0.5 * (density[i] + density[i - 1]) * w;
        }
        let total = cum[grid.len() - 1];
        if total <= 0.0 {
            return Err(Error::InvalidDistribution(
                "tabulated density integrates to zero".into(),
            ));
        }
        let density: Vec<f64> = density.iter().map(|d| d / total).collect();
        for c in cum.iter_mut() {
            *c /= total;
        }
        Ok(FeatureDistribution::Tabulated { grid, density, cum })
    }

    /// Support interval; unbounded tails are clamped (see module docs).
    pub fn support(&self) -> (f64, f64) {
        match self {
            FeatureDistribution::Gaussian { mean, stddev } => (
                mean - GAUSSIAN_CLAMP_SIGMAS * stddev,
                mean + GAUSSIAN_CLAMP_SIGMAS * stddev,
            ),
            FeatureDistribution::Beta { .. } => (0.0, 1.0),
            FeatureDistribution::Tabulated { grid, .. } => (grid[0], grid[grid.len() - 1]),
        }
    }

    /// Density at `x`; zero outside the support.
    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            FeatureDistribution::Gaussian { mean, stddev } => {
                let z = (x - mean) / stddev;
                (-0.5 * z * z).exp() / (stddev * SQRT_TAU)
            }
            FeatureDistribution::Beta { shape_a, shape_b } => {
                if !(0.0..=1.0).contains(&x) {
                    return 0.0;
                }
                if x == 0.0 {
                    return match shape_a.partial_cmp(&1.0).unwrap() {
                        std::cmp::Ordering::Greater => 0.0,
                        std::cmp::Ordering::Equal => *shape_b,
                        std::cmp::Ordering::Less => f64::INFINITY,
                    };
                }
                if x == 1.0 {
                    return match shape_b.partial_cmp(&1.0).unwrap() {
                        std::cmp::Ordering::Greater => 0.0,
                        std::cmp::Ordering::Equal => *shape_a,
                        std::cmp::Ordering::Less => f64::INFINITY,
                    };
                }
                ((shape_a - 1.0) * x.ln() + (shape_b - 1.0) * (1.0 - x).ln()
                    - ln_beta(*shape_a, *shape_b))
                .exp()
            }
            FeatureDistribution::Tabulated { grid, density, .. } => {
                let n = grid.len();
                if x < grid[0] || x > grid[n - 1] {
                    return 0.0;
                }
                let i = segment_index(grid, x);
                let w = grid[i + 1] - grid[i];
                let t = (x - grid[i]) / w;
                density[i] + (density[i + 1] - density[i]) * t
            }
        }
    }

    /// P(X <= x). Exactly 0 below the support and 1 above it; infinite
    /// arguments are accepted.
    pub fn cdf(&self, x: f64) -> f64 {
        if x == f64::NEG_INFINITY {
            return 0.0;
        }
        if x == f64::INFINITY {
            return 1.0;
        }
        match self {
            FeatureDistribution::Gaussian { mean, stddev } => {
                let z = (x - mean) / stddev;
                0.5 * erfc(-z / SQRT_2)
            }
            FeatureDistribution::Beta { shape_a, shape_b } => {
                if x <= 0.0 {
                    0.0
                } else if x >= 1.0 {
                    1.0
                } else {
                    beta_reg(*shape_a, *shape_b, x)
                }
            }
            FeatureDistribution::Tabulated { grid, density, cum } => {
                let n = grid.len();
                if x <= grid[0] {
                    return 0.0;
                }
                if x >= grid[n - 1] {
                    return 1.0;
                }
                let i = segment_index(grid, x);
                let w = grid[i + 1] - grid[i];
                let t = x - grid[i];
                let slope = (density[i + 1] - density[i]) / w;
                (cum[i] + density[i] * t + 0.5 * slope * t * t).min(1.0)
            }
        }
    }

    /// Smallest `x` with `cdf(x) >= p`. At `p = 0` and `p = 1` the support
    /// endpoints are returned.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!(
                "quantile requires p in [0, 1], got {p}"
            )));
        }
        let (lo, hi) = self.support();
        if p == 0.0 {
            return Ok(lo);
        }
        if p == 1.0 {
            return Ok(hi);
        }
        Ok(match self {
            FeatureDistribution::Gaussian { mean, stddev } => {
                (mean + stddev * SQRT_2 * erf_inv(2.0 * p - 1.0)).clamp(lo, hi)
            }
            FeatureDistribution::Beta { .. } => crate::root::invert_cdf(
                |x| self.cdf(x),
                Some(|x| self.pdf(x)),
                lo,
                hi,
                p,
                1e-14,
            ),
            FeatureDistribution::Tabulated { grid, density, cum } => {
                // First index whose cumulative reaches p; inverting inside
                // the segment to its left keeps flat (zero-density)
                // stretches resolved to their smallest admissible x.
                let n = grid.len();
                let j = cum.partition_point(|c| *c < p).clamp(1, n - 1);
                let i = j - 1;
                let w = grid[i + 1] - grid[i];
                let d0 = density[i];
                let slope = (density[i + 1] - d0) / w;
                let dp = p - cum[i];
                let t = if dp <= 0.0 {
                    0.0
                } else if slope.abs() < 1e-300 {
                    if d0 <= 0.0 {
                        0.0
                    } else {
                        dp / d0
                    }
                } else {
                    let disc = (d0 * d0 + 2.0 * slope * dp).max(0.0);
                    (disc.sqrt() - d0) / slope
                };
                (grid[i] + t.clamp(0.0, w)).min(grid[i + 1])
            }
        })
    }

    /// Draws one sample. Gaussian uses Box–Muller; the bounded kinds invert
    /// the CDF at a uniform draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            FeatureDistribution::Gaussian { mean, stddev } => {
                let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
                let u2: f64 = rng.random();
                let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
                mean + stddev * z
            }
            _ => {
                let u: f64 = rng.random();
                self.quantile(u).expect("u in [0,1]")
            }
        }
    }
}

/// Index of the grid segment containing `x` (grid strictly increasing,
/// `x` within range).
fn segment_index(grid: &[f64], x: f64) -> usize {
    match grid.binary_search_by(|g| g.partial_cmp(&x).unwrap()) {
        Ok(i) => i.min(grid.len() - 2),
        Err(i) => (i - 1).min(grid.len() - 2),
    }
}

/// Outcome of a monotone likelihood ratio check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlrCheck {
    pub holds: bool,
    /// Leftmost grid point at which strict increase of `g1/g0` fails.
    pub first_violation: Option<f64>,
}

/// Grid check that `g1(x)/g0(x)` is strictly increasing over the common
/// effective support (both densities above [`EFFECTIVE_DENSITY_FLOOR`]).
///
/// Errors when the supports do not overlap or the effective set is empty.
pub fn verify_mlr(
    g0: &FeatureDistribution,
    g1: &FeatureDistribution,
    grid_size: usize,
) -> Result<MlrCheck> {
    if grid_size < 2 {
        return Err(Error::InvalidParameter("grid_size must be >= 2".into()));
    }
    let (lo0, hi0) = g0.support();
    let (lo1, hi1) = g1.support();
    let lo = lo0.max(lo1);
    let hi = hi0.min(hi1);
    if !(hi > lo) {
        return Err(Error::EmptyCommonSupport);
    }
    let step = (hi - lo) / (grid_size - 1) as f64;
    let mut prev: Option<f64> = None;
    let mut seen = 0usize;
    for i in 0..grid_size {
        let x = lo + step * i as f64;
        let d0 = g0.pdf(x);
        let d1 = g1.pdf(x);
        if d0 <= EFFECTIVE_DENSITY_FLOOR || d1 <= EFFECTIVE_DENSITY_FLOOR {
            continue;
        }
        let log_ratio = d1.ln() - d0.ln();
        if let Some(p) = prev {
            if log_ratio <= p {
                return Ok(MlrCheck {
                    holds: false,
                    first_violation: Some(x),
                });
            }
        }
        prev = Some(log_ratio);
        seen += 1;
    }
    if seen < 2 {
        return Err(Error::EmptyCommonSupport);
    }
    Ok(MlrCheck {
        holds: true,
        first_violation: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(m: f64, s: f64) -> FeatureDistribution {
        FeatureDistribution::gaussian(m, s).unwrap()
    }

    #[test]
    fn standard_normal_mode_density() {
        let d = gaussian(0.0, 1.0);
        assert!((d.pdf(0.0) - 0.3989422804).abs() < 1e-9);
    }

    #[test]
    fn uniform_beta_density() {
        let d = FeatureDistribution::beta(1.0, 1.0).unwrap();
        assert!((d.pdf(0.3) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flat_tabulated_density() {
        let d = FeatureDistribution::tabulated(vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        assert!((d.pdf(0.5) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_cdf_values() {
        let d = gaussian(0.0, 1.0);
        assert!((d.cdf(0.0) - 0.5).abs() < 1e-12);
        // Φ(-2), high-precision reference value
        let d = gaussian(5.0, 5.0);
        assert!((d.cdf(-5.0) - 0.02275013194817920720).abs() < 1e-14);
    }

    #[test]
    fn symmetric_beta_cdf() {
        let d = FeatureDistribution::beta(2.0, 2.0).unwrap();
        assert!((d.cdf(0.5) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gaussian_quantiles() {
        let d = gaussian(0.0, 1.0);
        assert!(d.quantile(0.5).unwrap().abs() < 1e-12);
        let d = FeatureDistribution::beta(1.0, 1.0).unwrap();
        assert!((d.quantile(0.25).unwrap() - 0.25).abs() < 1e-10);
        // 97.5% of N(2, 3): 2 + 3·1.959964
        let d = gaussian(2.0, 3.0);
        assert!((d.quantile(0.975).unwrap() - 7.879891954).abs() < 1e-6);
    }

    #[test]
    fn quantile_endpoints_are_support_bounds() {
        let d = gaussian(1.0, 2.0);
        assert_eq!(d.quantile(0.0).unwrap(), 1.0 - 24.0);
        assert_eq!(d.quantile(1.0).unwrap(), 1.0 + 24.0);
    }

    #[test]
    fn mlr_equal_variance_gaussians() {
        let g0 = gaussian(-5.0, 5.0);
        let g1 = gaussian(5.0, 5.0);
        assert!(verify_mlr(&g0, &g1, 2048).unwrap().holds);
    }

    #[test]
    fn mlr_fails_for_unequal_variances() {
        let g0 = gaussian(0.0, 1.0);
        let g1 = gaussian(0.0, 2.0);
        let check = verify_mlr(&g0, &g1, 2048).unwrap();
        assert!(!check.holds);
        assert!(check.first_violation.is_some());
    }

    #[test]
    fn mlr_beta_pair() {
        let g0 = FeatureDistribution::beta(2.0, 5.0).unwrap();
        let g1 = FeatureDistribution::beta(5.0, 2.0).unwrap();
        assert!(verify_mlr(&g0, &g1, 2048).unwrap().holds);
    }

    #[test]
    fn mlr_self_is_false() {
        let g = gaussian(0.0, 1.0);
        assert!(!verify_mlr(&g, &g, 512).unwrap().holds);
    }

    #[test]
    fn tabulated_renormalizes_on_load() {
        let d = FeatureDistribution::tabulated(vec![0.0, 1.0, 2.0], vec![3.0, 3.0, 3.0]).unwrap();
        assert!((d.cdf(2.0) - 1.0).abs() < 1e-15);
        assert!((d.pdf(1.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn tabulated_zero_region_quantile_takes_left_edge() {
        // density zero on [1, 2]; mass 0.5 on each side
        let d = FeatureDistribution::tabulated(
            vec![0.0, 0.9, 1.0, 2.0, 2.1, 3.0],
            vec![1.0, 1.0, 0.0, 0.0, 1.0, 1.0],
        )
        .unwrap();
        let x = d.quantile(d.cdf(1.0)).unwrap();
        assert!((x - 1.0).abs() < 1e-8, "expected left edge, got {x}");
    }

    #[test]
    fn dist_literal_round_trip() {
        let d = gaussian(-5.0, 5.0);
        let s = serde_json::to_string(&d).unwrap();
        assert!(s.contains("\"kind\":\"gaussian\""));
        let back: FeatureDistribution = serde_json::from_str(&s).unwrap();
        assert_eq!(d, back);

        let b: FeatureDistribution = serde_json::from_str(r#"{"kind":"beta","a":2,"b":5}"#).unwrap();
        assert_eq!(b, FeatureDistribution::beta(2.0, 5.0).unwrap());
    }
}
