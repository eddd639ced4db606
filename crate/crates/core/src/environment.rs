//! Loan-environment dynamics: base rate to log-normal mean, cluster default
//! propensity and loan price.

use crate::config::MarketParams;
use crate::error::{Error, Result};

/// `mu = ln(ir + 1) * c`.
pub fn compute_mu(ir: f64, mu_scale: f64) -> Result<f64> {
    if !(ir > -1.0) {
        return Err(Error::Domain(format!("base rate {ir} must exceed -1")));
    }
    Ok((ir + 1.0).ln() * mu_scale)
}

/// Relative performance `q` of loan cluster `ls` (1-based) out of `n_clusters`:
/// the log-normal CDF evaluated at `5 (n + 1 - ls) / n`, written with `erfc`.
pub fn compute_cluster_q(ls: usize, n_clusters: usize, mu: f64, sigma2: f64) -> Result<f64> {
    if ls == 0 || ls > n_clusters {
        return Err(Error::Index {
            index: ls,
            max: n_clusters,
        });
    }
    let n = n_clusters as f64;
    let x = (5.0 * (n + 1.0 - ls as f64) / n).ln();
    Ok(0.5 * libm::erfc((x - mu) / (2.0 * sigma2).sqrt()))
}

/// Loan price `(pr + q)(1 + vol)`.
pub fn price_cluster(q: f64, prime_rate: f64, volatility: f64) -> f64 {
    (prime_rate + q) * (1.0 + volatility)
}

/// Current `q` and price of every cluster, index 0 holding `ls = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterQuotes {
    pub q: Vec<f64>,
    pub price: Vec<f64>,
}

impl ClusterQuotes {
    pub fn at_rate(ir: f64, params: &MarketParams) -> Result<Self> {
        let mu = compute_mu(ir, params.mu_scale)?;
        let q = (1..=params.n_clusters)
            .map(|ls| compute_cluster_q(ls, params.n_clusters, mu, params.sigma2))
            .collect::<Result<Vec<_>>>()?;
        let price = q
            .iter()
            .map(|&q| price_cluster(q, params.prime_rate, params.volatility))
            .collect();
        Ok(Self { q, price })
    }
}
