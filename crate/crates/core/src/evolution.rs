//! Evolutionary operators: investor culture dissemination and bank strategy
//! infection. Both run after the books close and are no-ops when evolution is
//! disabled in the config.

use rand::Rng;

use crate::config::EvolutionParams;
use crate::market::{Bank, BankStatus, Investor};

/// Raises the return expectation of every investor whose realized
/// performance trails the benchmark investor, taken at `benchmark_centile`
/// counting from the best performer. Returns how many investors moved.
pub fn disseminate_culture<R: Rng>(
    investors: &mut [Investor],
    ir: f64,
    params: &EvolutionParams,
    rng: &mut R,
) -> usize {
    if investors.len() < 2 {
        return 0;
    }
    let perf: Vec<f64> = investors.iter().map(Investor::realized_performance).collect();
    let mut order: Vec<usize> = (0..investors.len()).collect();
    order.sort_by(|&a, &b| perf[b].total_cmp(&perf[a]).then(a.cmp(&b)));
    let pos = ((params.benchmark_centile * investors.len() as f64).ceil() as usize).clamp(1, investors.len()) - 1;
    let benchmark = perf[order[pos]];
    let step = params.a / 4.0 * (params.b * ir).exp();

    let mut moved = 0;
    for (inv, &p) in investors.iter_mut().zip(&perf) {
        if p < benchmark && rng.random::<f64>() < params.dissemination_probability {
            inv.return_expectation += step;
            moved += 1;
        }
    }
    moved
}

/// Index of the active bank with the highest trailing net income, lowest id
/// on ties.
pub fn most_profitable(banks: &[Bank]) -> Option<usize> {
    banks
        .iter()
        .filter(|b| b.status == BankStatus::Active)
        .fold(None, |best: Option<&Bank>, b| match best {
            Some(cur) if cur.trailing_net_income() >= b.trailing_net_income() => Some(cur),
            _ => Some(b),
        })
        .map(|b| b.id)
}

/// Each active bank independently catches the most profitable bank's
/// strategy with the monthly infection probability. The pair is copied as a
/// unit, and only when the donor's combined shareholder-return plus bonus
/// target is higher. Returns the ids that changed strategy.
pub fn infect_strategies<R: Rng>(banks: &mut [Bank], params: &EvolutionParams, rng: &mut R) -> Vec<usize> {
    let active = banks.iter().filter(|b| b.status == BankStatus::Active).count();
    if active < 2 {
        return Vec::new();
    }
    let Some(donor) = most_profitable(banks) else {
        return Vec::new();
    };
    let (sr, bn) = (banks[donor].shareholder_return, banks[donor].bonus_ratio);
    let p = params.monthly_infection_probability();
    let mut changed = Vec::new();
    for b in banks.iter_mut().filter(|b| b.status == BankStatus::Active) {
        if rng.random::<f64>() >= p || b.id == donor {
            continue;
        }
        if sr + bn > b.shareholder_return + b.bonus_ratio {
            b.shareholder_return = sr;
            b.bonus_ratio = bn;
            changed.push(b.id);
        }
    }
    changed
}
