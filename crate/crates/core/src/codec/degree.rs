use rand::Rng;

use super::CodecError;

/// How many source packets a codeword combines.
#[derive(Clone, Debug, PartialEq)]
pub enum DegreeDistribution {
    /// Dense random linear code: every coefficient drawn uniformly.
    UniformRlc,
    /// LT-style sparse code with robust soliton degrees.
    SparseLt { c: f64, delta: f64 },
}

impl DegreeDistribution {
    pub const DEFAULT_LT_C: f64 = 0.1;
    pub const DEFAULT_LT_DELTA: f64 = 0.5;

    pub fn default_lt() -> Self {
        DegreeDistribution::SparseLt {
            c: Self::DEFAULT_LT_C,
            delta: Self::DEFAULT_LT_DELTA,
        }
    }

    pub fn validate(&self) -> Result<(), CodecError> {
        match *self {
            DegreeDistribution::UniformRlc => Ok(()),
            DegreeDistribution::SparseLt { c, delta } => {
                if !(c.is_finite() && c > 0.0) {
                    return Err(CodecError::InvalidDistribution(format!(
                        "robust soliton c must be > 0, got {c}"
                    )));
                }
                if !(delta > 0.0 && delta < 1.0) {
                    return Err(CodecError::InvalidDistribution(format!(
                        "robust soliton delta must lie in (0, 1), got {delta}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Probability of each degree 1..=k (index 0 is degree 1).
    pub fn pmf(&self, k: usize) -> Result<Vec<f64>, CodecError> {
        self.validate()?;
        if k == 0 {
            return Err(CodecError::EmptyPage);
        }
        Ok(match *self {
            DegreeDistribution::UniformRlc => {
                let mut p = vec![0.0; k];
                p[k - 1] = 1.0;
                p
            }
            DegreeDistribution::SparseLt { c, delta } => robust_soliton(k, c, delta),
        })
    }

    pub fn mean(&self, k: usize) -> Result<f64, CodecError> {
        Ok(self
            .pmf(k)?
            .iter()
            .enumerate()
            .map(|(i, p)| (i + 1) as f64 * p)
            .sum())
    }
}

/// Robust soliton mass function μ(1..=k).
///
/// μ ∝ ρ + τ with the ideal soliton ρ(1) = 1/k, ρ(d) = 1/(d(d−1)), and the
/// spike τ(d) = R/(dk) for d < k/R, τ(k/R) = R·ln(R/δ)/k, R = c·ln(k/δ)·√k.
pub fn robust_soliton(k: usize, c: f64, delta: f64) -> Vec<f64> {
    let kf = k as f64;
    let mut mu = vec![0.0f64; k];
    mu[0] = 1.0 / kf;
    for d in 2..=k {
        mu[d - 1] = 1.0 / (d as f64 * (d as f64 - 1.0));
    }
    let r = c * (kf / delta).ln() * kf.sqrt();
    if r > 0.0 {
        let spike = ((kf / r).round() as usize).clamp(1, k);
        for d in 1..spike {
            mu[d - 1] += r / (d as f64 * kf);
        }
        mu[spike - 1] += (r * (r / delta).ln() / kf).max(0.0);
    }
    let z: f64 = mu.iter().sum();
    mu.iter_mut().for_each(|m| *m /= z);
    mu
}

/// Degree sampler with a precomputed CDF.
#[derive(Clone, Debug)]
pub struct DegreeSampler {
    dist: DegreeDistribution,
    k: usize,
    cdf: Vec<f64>,
}

impl DegreeSampler {
    pub fn new(dist: DegreeDistribution, k: usize) -> Result<Self, CodecError> {
        let pmf = dist.pmf(k)?;
        let mut acc = 0.0;
        let cdf = pmf
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(DegreeSampler { dist, k, cdf })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn distribution(&self) -> &DegreeDistribution {
        &self.dist
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if let DegreeDistribution::UniformRlc = self.dist {
            return self.k;
        }
        let u: f64 = rng.gen();
        let idx = self.cdf.partition_point(|&c| c <= u);
        idx.min(self.k - 1) + 1
    }
}

/// Draws one degree in `1..=k`.
pub fn sample_degree<R: Rng + ?Sized>(
    dist: &DegreeDistribution,
    k: usize,
    rng: &mut R,
) -> Result<usize, CodecError> {
    Ok(DegreeSampler::new(dist.clone(), k)?.sample(rng))
}
