use std::collections::VecDeque;

use rand::Rng;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BankStatus {
    Active,
    /// Lost all investor funding; may return once it attracts deposits again.
    Assisted,
    /// Removed from all later dynamics.
    Bankrupt,
}

/// A bank's strategy identity: shareholder return and bonus ratio, each kept
/// to four decimal places (stored in units of 1e-4).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StrategyKey {
    pub shareholder_return: i64,
    pub bonus_ratio: i64,
}

impl StrategyKey {
    pub fn new(shareholder_return: f64, bonus_ratio: f64) -> Self {
        Self {
            shareholder_return: (shareholder_return * 1e4).round() as i64,
            bonus_ratio: (bonus_ratio * 1e4).round() as i64,
        }
    }

    pub fn label(&self) -> String {
        format!(
            "SR={:.4}/BN={:.4}",
            self.shareholder_return as f64 * 1e-4,
            self.bonus_ratio as f64 * 1e-4
        )
    }
}

/// Per-cycle P&L accumulators of a bank.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct BankFlows {
    pub income: f64,
    pub loss: f64,
    pub capital_cost: f64,
    pub interbank_loss: f64,
    pub borrowing_cost: f64,
    pub net_income: f64,
    pub net_result: f64,
    /// Change in capital booked at close.
    pub retained: f64,
}

/// Deposits a bank took in one month, with the funding spread they pay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepositVintage {
    pub month: i32,
    pub amount: f64,
    pub funding_spread: f64,
}

#[derive(Debug, Clone)]
pub struct Bank {
    pub id: usize,
    pub capital: f64,
    pub target_capital_ratio: f64,
    pub shareholder_return: f64,
    pub bonus_ratio: f64,
    pub rating: u8,
    pub status: BankStatus,
    pub total_deposits: f64,
    /// Live lending placed in loan clusters.
    pub loans: f64,
    /// Live lending placed in the interbank market.
    pub interbank: f64,
    pub limit: f64,
    /// Funding spread of the bank's rating group this cycle, if the group cleared.
    pub funding_spread: Option<f64>,
    pub cost_of_borrowing: f64,
    pub total_funding_spread: f64,
    /// Set when TFS could not be recomputed because the bank holds no deposits.
    pub tfs_stale: bool,
    pub benchmark: f64,
    pub vintages: VecDeque<DepositVintage>,
    /// Deposits received in the current cycle.
    pub new_deposits: f64,
    pub flows: BankFlows,
    /// Net income of the most recent months, newest last.
    pub net_income_history: VecDeque<f64>,
    pub ever_funded: bool,
}

impl Bank {
    pub fn new(id: usize, capital: f64, tcr: f64, sr: f64, bn: f64) -> Self {
        Self {
            id,
            capital,
            target_capital_ratio: tcr,
            shareholder_return: sr,
            bonus_ratio: bn,
            rating: 1,
            status: BankStatus::Active,
            total_deposits: 0.0,
            loans: 0.0,
            interbank: 0.0,
            limit: 0.0,
            funding_spread: None,
            cost_of_borrowing: 0.0,
            total_funding_spread: 0.0,
            tfs_stale: false,
            benchmark: 0.0,
            vintages: VecDeque::new(),
            new_deposits: 0.0,
            flows: BankFlows::default(),
            net_income_history: VecDeque::new(),
            ever_funded: false,
        }
    }

    pub fn is_live(&self) -> bool {
        self.status != BankStatus::Bankrupt
    }

    pub fn strategy(&self) -> StrategyKey {
        StrategyKey::new(self.shareholder_return, self.bonus_ratio)
    }

    pub fn trailing_net_income(&self) -> f64 {
        self.net_income_history.iter().sum()
    }

    pub fn capital_ratio(&self) -> f64 {
        let denom = self.capital + self.total_deposits;
        if denom > 0.0 {
            self.capital / denom
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct InvestorFlows {
    pub income: f64,
    pub loss: f64,
    /// Principal returned or written off this cycle.
    pub principal: f64,
}

/// Equal tranches opened in the same month.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrancheRun {
    pub month: i32,
    pub amount: f64,
    pub count: u32,
    /// Tranches of this run already offered in the current allocation pass.
    tried: u32,
}

impl TrancheRun {
    fn available(&self) -> u32 {
        self.count - self.tried
    }
}

/// Idle tranches of one investor, oldest first, stored as runs of equal
/// tranches, with their running total.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OpenTranches {
    runs: Vec<TrancheRun>,
    count: u32,
    total: f64,
}

impl OpenTranches {
    /// Number of idle tranches.
    pub fn len(&self) -> usize {
        self.count as usize
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Sum of the idle amounts.
    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn runs(&self) -> &[TrancheRun] {
        &self.runs
    }

    /// Appends a tranche opened in `month`, which must not precede the newest one.
    pub fn push(&mut self, month: i32, amount: f64) {
        debug_assert!(self.runs.last().is_none_or(|r| r.month <= month));
        match self.runs.last_mut() {
            Some(r) if r.month == month && r.amount.to_bits() == amount.to_bits() => r.count += 1,
            _ => self.runs.push(TrancheRun {
                month,
                amount,
                count: 1,
                tried: 0,
            }),
        }
        self.count += 1;
        self.total += amount;
    }

    /// Drops the tranches opened before `oldest` and returns their sum.
    pub fn expire_before(&mut self, oldest: i32) -> f64 {
        let n = self.runs.partition_point(|r| r.month < oldest);
        let mut gone = 0.0;
        for r in self.runs.drain(..n) {
            gone += r.amount * r.count as f64;
            self.count -= r.count;
        }
        self.settle(gone);
        gone
    }

    /// Draws a run with probability proportional to its tranches not yet
    /// offered in the current pass. `max_run` bounds the size of any run.
    pub(crate) fn sample_run<R: Rng + ?Sized>(&self, rng: &mut R, max_run: u32) -> usize {
        loop {
            let i = rng.random_range(0..self.runs.len());
            if rng.random_range(0..max_run) < self.runs[i].available() {
                return i;
            }
        }
    }

    /// Removes one untried tranche of run `i` and returns its amount.
    pub(crate) fn take(&mut self, i: usize) -> f64 {
        let amount = self.runs[i].amount;
        self.runs[i].count -= 1;
        if self.runs[i].count == 0 {
            self.runs.remove(i);
        }
        self.count -= 1;
        self.settle(amount);
        amount
    }

    /// Marks one tranche of run `i` as offered without success.
    pub(crate) fn defer(&mut self, i: usize) {
        self.runs[i].tried += 1;
    }

    pub(crate) fn end_pass(&mut self) {
        for r in &mut self.runs {
            r.tried = 0;
        }
    }

    fn settle(&mut self, removed: f64) {
        if self.count == 0 {
            self.total = 0.0;
        } else {
            self.total -= removed;
        }
    }
}

#[derive(Debug, Clone)]
pub struct Investor {
    pub id: usize,
    pub wealth: f64,
    pub return_expectation: f64,
    pub risk_appetite: f64,
    pub appetite_group: u8,
    /// Realized annualized returns, newest last, at most `memory` long.
    pub returns: VecDeque<f64>,
    /// New funds opened in each of the previous `t_inv - 1` months, newest last.
    pub allocations: VecDeque<f64>,
    /// Tranches waiting for a bank.
    pub open_tranches: OpenTranches,
    pub flows: InvestorFlows,
    /// `(net result, wealth)` per month for performance ranking, newest last.
    pub performance: VecDeque<(f64, f64)>,
}

impl Investor {
    pub fn new(id: usize, wealth: f64, rex: f64) -> Self {
        Self {
            id,
            wealth,
            return_expectation: rex,
            risk_appetite: 0.0,
            appetite_group: 1,
            returns: VecDeque::new(),
            allocations: VecDeque::new(),
            open_tranches: OpenTranches::default(),
            flows: InvestorFlows::default(),
            performance: VecDeque::new(),
        }
    }

    /// Net result over the performance window divided by mean wealth.
    pub fn realized_performance(&self) -> f64 {
        if self.performance.is_empty() {
            return 0.0;
        }
        let net: f64 = self.performance.iter().map(|p| p.0).sum();
        let mean_wealth =
            self.performance.iter().map(|p| p.1).sum::<f64>() / self.performance.len() as f64;
        if mean_wealth > 0.0 {
            net / mean_wealth
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoanCluster {
    /// 1-based cluster index.
    pub index: usize,
    pub q: f64,
    pub price: f64,
    pub market_cap: f64,
    pub total_lent: f64,
}

/// Investor money placed in a bank.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepositTranche {
    pub investor: u32,
    pub bank: u32,
    pub amount: f64,
    pub cost_of_borrowing: f64,
    /// Month index; negative months belong to the book held at start-up.
    pub origination: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    /// 0-based cluster slot.
    Cluster(u16),
    Interbank,
}

/// Bank money lent to a loan cluster or the interbank market.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoanTranche {
    pub bank: u32,
    pub placement: Placement,
    pub amount: f64,
    /// Loan price frozen at origination (unused for interbank).
    pub price: f64,
    pub base_rate: f64,
    pub origination: i32,
}
