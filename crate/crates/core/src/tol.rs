/// Numerical tolerances threaded through every constructor and check.
///
/// `eps` is the absolute tolerance for Hermiticity, positivity, trace and
/// completeness checks. Rank decisions on a PSD operator treat an eigenvalue
/// as zero when it does not exceed `rank_rel * λ_max`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tolerance {
    pub eps: f64,
    pub rank_rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            eps: 1e-9,
            rank_rel: 1e-9,
        }
    }
}

impl Tolerance {
    pub fn new(eps: f64, rank_rel: f64) -> Self {
        Tolerance { eps, rank_rel }
    }

    /// Absolute rank threshold for a spectrum whose largest eigenvalue is `lambda_max`.
    pub fn rank_tol(&self, lambda_max: f64) -> f64 {
        self.rank_rel * lambda_max.max(0.0)
    }

    /// Tolerance for premise checks fed by two spectral decompositions.
    pub fn premise(&self) -> f64 {
        10.0 * self.eps
    }
}
