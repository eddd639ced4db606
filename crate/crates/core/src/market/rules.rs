//! Closed-form rules of the monthly cycle.
//!
//! Rates and spreads are annual fractions. Amounts are plain `f64` currency.

use crate::error::{Error, Result};

/// Equal-frequency bucketing of `values` into `1..=buckets`. The item ranked
/// first goes to bucket 1. Ties keep input order, so callers pass agents in id
/// order for a deterministic result.
pub fn rank_buckets(values: &[f64], descending: bool, buckets: u8) -> Vec<u8> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let ord = values[a].total_cmp(&values[b]);
        if descending {
            ord.reverse()
        } else {
            ord
        }
    });
    let mut out = vec![0u8; n];
    for (rank, &i) in order.iter().enumerate() {
        out[i] = (rank * buckets as usize / n) as u8 + 1;
    }
    out
}

/// Ratings from capital-ratio rank, one notch down for a below-mean
/// shareholder-return target. Inputs are the live banks in id order.
pub fn bank_ratings(tcr: &[f64], sr: &[f64], bands: u8) -> Result<Vec<u8>> {
    if tcr.is_empty() {
        return Err(Error::EmptyPopulation("no active banks to rate"));
    }
    let mean_sr = sr.iter().sum::<f64>() / sr.len() as f64;
    let mut ratings = rank_buckets(tcr, true, bands);
    for (r, &s) in ratings.iter_mut().zip(sr) {
        if s < mean_sr {
            *r += 1;
        }
    }
    Ok(ratings)
}

/// Downside deviation of realized returns below the expectation, averaged
/// over the available history.
pub fn downside_risk(returns: &[f64], expectation: f64) -> f64 {
    if returns.is_empty() {
        return 0.0;
    }
    let sum: f64 = returns
        .iter()
        .map(|r| {
            let d = (r - expectation).min(0.0);
            d * d
        })
        .sum();
    (sum / returns.len() as f64).sqrt()
}

/// New funds available this month: wealth minus what the previous months of
/// the investment window already committed, never negative.
pub fn new_funds(wealth: f64, committed_in_window: f64) -> f64 {
    (wealth - committed_in_window).max(0.0)
}

/// Splits `amount` into `n` equal tranches; the last one absorbs rounding so
/// the parts add back to `amount`.
pub fn split_tranches(amount: f64, n: usize) -> Vec<f64> {
    if amount <= 0.0 || n == 0 {
        return Vec::new();
    }
    let each = amount / n as f64;
    let mut parts = vec![each; n];
    parts[n - 1] = amount - each * (n - 1) as f64;
    parts
}

/// Maximum deposits that keep the target capital ratio: `C (1/TCR - 1)`.
pub fn borrowing_limit(capital: f64, tcr: f64) -> Result<f64> {
    if !(tcr > 0.0) || tcr > 1.0 {
        return Err(Error::Config(format!("target capital ratio {tcr} outside (0, 1]")));
    }
    Ok(capital.max(0.0) * (1.0 / tcr - 1.0))
}

/// Outcome of one rating group's funding auction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clearing {
    pub funding_spread: f64,
    pub min_rex: f64,
    pub max_rex: f64,
    pub weighted_rex: f64,
    /// Signed demand/supply ratio used in the spread formula.
    pub ratio: f64,
}

/// Funding spread of a group given its investors' `(Rex, funds offered)` and
/// the banks' aggregate demand. `None` when nobody offers funds or nobody
/// demands them.
pub fn clear_group(members: &[(f64, f64)], demand: f64) -> Option<Clearing> {
    let supply: f64 = members.iter().map(|m| m.1).sum();
    if members.is_empty() || supply <= 0.0 || demand <= 0.0 {
        return None;
    }
    let min_rex = members.iter().map(|m| m.0).fold(f64::INFINITY, f64::min);
    let max_rex = members.iter().map(|m| m.0).fold(f64::NEG_INFINITY, f64::max);
    let weighted_rex = members.iter().map(|m| m.0 * m.1).sum::<f64>() / supply;
    let (z, y, w, ratio) = if demand < supply {
        (min_rex, weighted_rex, min_rex, demand / supply)
    } else {
        (weighted_rex, max_rex, max_rex, -supply / demand)
    };
    let funding_spread = ratio * (y - z) + w;
    Some(Clearing {
        funding_spread,
        min_rex,
        max_rex,
        weighted_rex,
        ratio,
    })
}

/// Deposit acceptance probability for a rating distance.
pub fn match_probability(distance: usize, table: &[f64]) -> f64 {
    table.get(distance).copied().unwrap_or(0.0)
}

/// Deposit-weighted funding spread of the live vintages, `None` when there
/// are no deposits.
pub fn total_funding_spread<I>(vintages: I) -> Option<f64>
where
    I: IntoIterator<Item = (f64, f64)>,
{
    let (num, den) = vintages
        .into_iter()
        .fold((0.0, 0.0), |(n, d), (amount, fs)| (n + amount * fs, d + amount));
    (den > 0.0).then(|| num / den)
}

/// Required lending return over the base rate.
pub fn benchmark_return(
    capital: f64,
    deposits: f64,
    shareholder_return: f64,
    bonus_ratio: f64,
    cost_of_borrowing: f64,
    ir: f64,
) -> Result<f64> {
    if bonus_ratio >= 1.0 {
        return Err(Error::Config(format!("bonus ratio {bonus_ratio} must be below 1")));
    }
    let funded = capital + deposits;
    if !(funded > 0.0) {
        return Err(Error::Domain("benchmark return needs positive capital plus deposits".into()));
    }
    Ok((capital * shareholder_return / (1.0 - bonus_ratio) + deposits * cost_of_borrowing) / funded
        - ir)
}

/// Gaussian lending acceptance with the price gap measured in percentage points.
pub fn lending_acceptance(benchmark: f64, price: f64, sigma_pp: f64) -> f64 {
    let z = (benchmark - price) * 100.0 / sigma_pp;
    (-0.5 * z * z).exp() / (sigma_pp * (2.0 * std::f64::consts::PI).sqrt())
}

/// Interest earned over the investment period on a matured tranche.
pub fn period_interest(amount: f64, annual_rate: f64, t_inv: u32) -> f64 {
    amount * annual_rate * (t_inv as f64 / 12.0)
}

/// Expected credit loss booked at redemption.
pub fn credit_loss(amount: f64, q: f64, recovery: f64) -> f64 {
    amount * q * (1.0 - recovery)
}

/// Monthly remuneration owed on capital.
pub fn capital_remuneration(capital: f64, spread: f64, ir: f64) -> f64 {
    capital * (spread + ir) / 12.0
}

/// Pro-rata share of a failed bank's interbank book charged to each survivor
/// of its rating. `None` when the survivors hold no interbank exposure.
pub fn interbank_shares(failed_interbank: f64, survivors: &[f64]) -> Option<Vec<f64>> {
    let total: f64 = survivors.iter().sum();
    if total <= 0.0 {
        return None;
    }
    Some(survivors.iter().map(|ib| failed_interbank * ib / total).collect())
}

/// Net result and capital change of a bank's month: bonus taken only from a
/// positive net income, dividend only from a positive net result.
pub fn close_bank_books(net_income: f64, bonus_ratio: f64, dividend_ratio: f64) -> (f64, f64) {
    let net_result = if net_income > 0.0 {
        net_income * (1.0 - bonus_ratio)
    } else {
        net_income
    };
    let retained = if net_result > 0.0 {
        net_result * (1.0 - dividend_ratio)
    } else {
        net_result
    };
    (net_result, retained)
}

/// Wealth change of an investor: the distribution ratio applies only to a
/// positive net result.
pub fn investor_wealth_change(income: f64, loss: f64, distribution_ratio: f64) -> f64 {
    let net = income - loss;
    if net > 0.0 {
        net * (1.0 - distribution_ratio)
    } else {
        net
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn single_bank_rating_is_one() {
        assert_eq!(bank_ratings(&[0.13], &[0.1], 10).unwrap(), vec![1]);
        assert!(matches!(bank_ratings(&[], &[], 10), Err(Error::EmptyPopulation(_))));
    }

    #[test]
    fn ten_banks_rate_by_capital_ratio() {
        // Ranking oracle: with distinct TCRs and equal SR, rank i gets rating i + 1.
        let tcr: Vec<f64> = (0..10).map(|i| 0.20 - 0.01 * i as f64).collect();
        let sr = vec![0.1; 10];
        let mut shuffled: Vec<usize> = vec![3, 7, 0, 9, 1, 5, 2, 8, 4, 6];
        let got = bank_ratings(&tcr, &sr, 10).unwrap();
        assert_eq!(got, (1..=10).collect::<Vec<u8>>());
        // Permuting the input permutes the output.
        let tcr_p: Vec<f64> = shuffled.iter().map(|&i| tcr[i]).collect();
        let got_p = bank_ratings(&tcr_p, &sr, 10).unwrap();
        for (k, i) in shuffled.drain(..).enumerate() {
            assert_eq!(got_p[k], got[i]);
        }
    }

    #[test]
    fn below_mean_return_notches_down() {
        let r = bank_ratings(&[0.2, 0.1], &[0.05, 0.15], 10).unwrap();
        assert_eq!(r, vec![2, 6]);
    }

    #[test]
    fn downside_risk_examples() {
        assert_eq!(downside_risk(&[0.05, 0.07], 0.04), 0.0);
        let r = vec![0.03; 24];
        assert_relative_eq!(downside_risk(&r, 0.04), 0.01, max_relative = 1e-12);
        assert_eq!(downside_risk(&[], 0.04), 0.0);
    }

    #[test]
    fn tranche_split() {
        assert_eq!(new_funds(100.0, 60.0), 40.0);
        assert_eq!(new_funds(50.0, 60.0), 0.0);
        let t = split_tranches(40.0, 10);
        assert_eq!(t.len(), 10);
        assert_relative_eq!(t[0], 4.0);
        assert_relative_eq!(t.iter().sum::<f64>(), 40.0, max_relative = 1e-15);
        assert_eq!(split_tranches(50.0, 10), vec![5.0; 10]);
        assert!(split_tranches(0.0, 10).is_empty());
    }

    #[test]
    fn borrowing_limit_examples() {
        assert_relative_eq!(borrowing_limit(8.0, 0.08).unwrap(), 92.0, max_relative = 1e-12);
        assert_eq!(borrowing_limit(5.0, 1.0).unwrap(), 0.0);
        assert_relative_eq!(borrowing_limit(10.0, 0.125).unwrap(), 70.0, max_relative = 1e-12);
        assert!(borrowing_limit(10.0, 0.0).is_err());
    }

    #[test]
    fn clearing_branches() {
        let members = [(0.02, 100.0), (0.04, 100.0)];
        let under = clear_group(&members, 100.0).unwrap();
        assert_relative_eq!(under.weighted_rex, 0.03, max_relative = 1e-12);
        assert_relative_eq!(under.funding_spread, 0.025, max_relative = 1e-12);
        let over = clear_group(&members, 400.0).unwrap();
        assert_relative_eq!(over.funding_spread, 0.035, max_relative = 1e-12);
        let flood = clear_group(&[(0.02, 1e12), (0.04, 1e12)], 1.0).unwrap();
        assert_relative_eq!(flood.funding_spread, 0.02, max_relative = 1e-9);
        assert!(clear_group(&[], 10.0).is_none());
        assert!(clear_group(&members, 0.0).is_none());
        assert!(clear_group(&[(0.02, 0.0)], 10.0).is_none());
    }

    #[test]
    fn funding_spread_weighting() {
        assert_eq!(total_funding_spread([(50.0, 0.03)]), Some(0.03));
        let tfs = total_funding_spread([(100.0, 0.01), (300.0, 0.03)]).unwrap();
        assert_relative_eq!(tfs, 0.025, max_relative = 1e-12);
        assert_eq!(total_funding_spread(std::iter::empty()), None);
    }

    #[test]
    fn benchmark_examples() {
        assert_relative_eq!(
            benchmark_return(10.0, 0.0, 0.1, 0.0, 0.05, 0.02).unwrap(),
            0.08,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            benchmark_return(10.0, 90.0, 0.10, 0.0, 0.04, 0.02).unwrap(),
            0.026,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            benchmark_return(10.0, 90.0, 0.10, 0.5, 0.04, 0.02).unwrap(),
            0.036,
            max_relative = 1e-12
        );
        assert!(benchmark_return(10.0, 90.0, 0.1, 1.0, 0.04, 0.02).is_err());
    }

    #[test]
    fn lending_kernel() {
        assert_relative_eq!(lending_acceptance(0.05, 0.05, 1.0), 0.398_942_280_4, max_relative = 1e-9);
        assert_relative_eq!(lending_acceptance(0.05, 0.07, 1.0), 0.053_990_966_5, max_relative = 1e-9);
        assert_relative_eq!(lending_acceptance(0.07, 0.05, 1.0), 0.053_990_966_5, max_relative = 1e-9);
    }

    #[test]
    fn redemption_examples() {
        assert_relative_eq!(period_interest(100.0, 0.05 + 0.02, 48), 28.0, max_relative = 1e-12);
        assert_relative_eq!(credit_loss(100.0, 0.5, 0.4), 30.0, max_relative = 1e-12);
        assert_relative_eq!(period_interest(10.0, 0.03, 48), 1.2, max_relative = 1e-12);
    }

    #[test]
    fn capital_remuneration_examples() {
        assert_relative_eq!(capital_remuneration(1200.0, 0.01, 0.0), 1.0, max_relative = 1e-12);
        assert_eq!(capital_remuneration(0.0, 0.01, 0.05), 0.0);
        assert_relative_eq!(capital_remuneration(100.0, 0.01, 0.05), 0.5, max_relative = 1e-12);
    }

    #[test]
    fn interbank_pro_rata() {
        let s = interbank_shares(50.0, &[100.0, 300.0]).unwrap();
        assert_relative_eq!(s[0], 12.5);
        assert_relative_eq!(s[1], 37.5);
        assert_eq!(interbank_shares(0.0, &[100.0]).unwrap(), vec![0.0]);
        assert!(interbank_shares(50.0, &[0.0, 0.0]).is_none());
    }

    #[test]
    fn books() {
        let (net, kept) = close_bank_books(10.0, 0.2, 0.95);
        assert_relative_eq!(net, 8.0);
        assert_relative_eq!(kept, 0.4, max_relative = 1e-12);
        assert_eq!(close_bank_books(-3.0, 0.2, 0.95), (-3.0, -3.0));
        assert_relative_eq!(investor_wealth_change(10.0, 2.0, 0.9), 0.8, max_relative = 1e-12);
        assert_eq!(investor_wealth_change(1.0, 5.0, 0.9), -4.0);
    }
}
