use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Uniform};

use super::agents::*;
use super::rules::{self, Clearing};
use crate::config::SimConfig;
use crate::environment::ClusterQuotes;
use crate::error::{Error, Result};
use crate::evolution;

/// Amounts below this are treated as zero when deciding whether a bank still
/// holds deposits.
const DUST: f64 = 1e-9;

/// Sub-streams of a run's generator. Each `(cycle, op)` pair owns an
/// independent ChaCha stream, so adding draws to one operation never shifts
/// the draws seen by another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum RngOp {
    Init = 0,
    Deposits = 1,
    Lending = 2,
    Dissemination = 3,
    Infection = 4,
    Snapshot = 5,
}

pub(crate) fn op_rng(seed: u64, cycle: u32, op: RngOp) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((cycle as u64) << 8) | op as u64);
    rng
}

/// Ledger bucketed by maturity month.
#[derive(Debug, Clone)]
struct MaturityBook<T> {
    slots: Vec<Vec<T>>,
}

impl<T> MaturityBook<T> {
    fn new(horizon: u32) -> Self {
        Self {
            slots: (0..=horizon).map(|_| Vec::new()).collect(),
        }
    }

    fn slot(&self, month: i32) -> usize {
        month.rem_euclid(self.slots.len() as i32) as usize
    }

    fn push(&mut self, maturity: i32, record: T) {
        let s = self.slot(maturity);
        self.slots[s].push(record);
    }

    fn take(&mut self, month: i32) -> Vec<T> {
        let s = self.slot(month);
        std::mem::take(&mut self.slots[s])
    }

    fn iter(&self) -> impl Iterator<Item = &T> {
        self.slots.iter().flatten()
    }

    fn extract_if(&mut self, mut pred: impl FnMut(&T) -> bool) -> Vec<T> {
        let mut out = Vec::new();
        for slot in &mut self.slots {
            let mut i = 0;
            while i < slot.len() {
                if pred(&slot[i]) {
                    out.push(slot.swap_remove(i));
                } else {
                    i += 1;
                }
            }
        }
        out
    }
}

/// Prefix sums over non-negative integer weights, for drawing an index with
/// probability proportional to its weight.
#[derive(Debug, Clone)]
struct Fenwick {
    tree: Vec<i64>,
    weights: Vec<i64>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Self {
            tree: vec![0; n + 1],
            weights: vec![0; n],
        }
    }

    fn add(&mut self, i: usize, delta: i64) {
        self.weights[i] += delta;
        let mut j = i + 1;
        while j < self.tree.len() {
            self.tree[j] += delta;
            j += j & j.wrapping_neg();
        }
    }

    fn weight(&self, i: usize) -> i64 {
        self.weights[i]
    }

    fn total(&self) -> i64 {
        self.weights.iter().sum()
    }

    /// Index holding the `r`-th unit of weight, and the offset within it.
    fn find(&self, mut r: i64) -> (usize, i64) {
        let n = self.tree.len() - 1;
        let mut pos = 0;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= r {
                pos = next;
                r -= self.tree[next];
            }
            step >>= 1;
        }
        (pos, r)
    }
}

/// Funding auction result for one rating group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupClearing {
    pub group: u8,
    pub supply: f64,
    pub demand: f64,
    pub clearing: Clearing,
}

/// What happened in one cycle.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CycleEvents {
    pub cycle: u32,
    pub failures: Vec<usize>,
    pub assistances: Vec<usize>,
    pub recoveries: Vec<usize>,
    /// Bankruptcies whose interbank book found no survivor to absorb it.
    pub unabsorbed_interbank: usize,
    /// Banks whose TFS was carried over because they held no deposits.
    pub stale_spreads: usize,
    pub deposits_placed: f64,
    pub deposits_idle: f64,
    pub lent_to_clusters: f64,
    pub lent_interbank: f64,
}

/// Per-cycle accounting evidence, collected only when auditing is enabled.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CycleAudit {
    pub clearings: Vec<GroupClearing>,
    /// `(bank, TD before allocation, TD after allocation, Lim)`.
    pub limits: Vec<(usize, f64, f64, f64)>,
    /// `(bank, capital change, net result, dividend ratio applied)`.
    pub capital: Vec<(usize, f64, f64, f64)>,
    /// `(bank, origination month, borrowing cost, investor income)` per matured vintage.
    pub vintages: Vec<(usize, i32, f64, f64)>,
    /// `(parent amount, sum of its tranches, tranche count)`.
    pub partitions: Vec<(f64, f64, usize)>,
}

/// One realization of the market: agents, ledgers, clock and generator seed.
#[derive(Debug, Clone)]
pub struct MarketState {
    config: SimConfig,
    rates: Vec<f64>,
    seed: u64,
    cycle: u32,
    pub banks: Vec<Bank>,
    pub investors: Vec<Investor>,
    pub clusters: Vec<LoanCluster>,
    deposits: MaturityBook<DepositTranche>,
    loans: MaturityBook<LoanTranche>,
    audit: Option<CycleAudit>,
}

impl MarketState {
    /// Draws the initial populations. `rates[k]` is the base rate of cycle `k`.
    pub fn new(config: SimConfig, rates: Vec<f64>, seed: u64) -> Result<Self> {
        config.validate()?;
        let p = &config.population;
        let t_inv = config.market.investment_period;
        let mut rng = op_rng(seed, u32::MAX, RngOp::Init);
        let capital = LogNormal::new(p.capital_median.ln(), p.capital_sigma)
            .map_err(|e| Error::Config(format!("capital distribution: {e}")))?;
        let wealth = LogNormal::new(p.wealth_median.ln(), p.wealth_sigma)
            .map_err(|e| Error::Config(format!("wealth distribution: {e}")))?;
        let uniform = |r: [f64; 2]| {
            Uniform::new_inclusive(r[0], r[1]).map_err(|e| Error::Config(format!("range {r:?}: {e}")))
        };
        let (tcr, sr, bn, rex) = (
            uniform(p.tcr_range)?,
            uniform(p.sr_range)?,
            uniform(p.bn_range)?,
            uniform(p.rex_range)?,
        );

        let banks: Vec<Bank> = (0..p.n_banks)
            .map(|id| {
                let c = capital.sample(&mut rng);
                let t = tcr.sample(&mut rng);
                let s = sr.sample(&mut rng);
                let b = bn.sample(&mut rng);
                Bank::new(id, c, t, s, b)
            })
            .collect();
        let investors: Vec<Investor> = (0..p.n_investors)
            .map(|id| {
                let f = wealth.sample(&mut rng);
                let mut inv = Investor::new(id, f, rex.sample(&mut rng));
                inv.allocations = std::iter::repeat_n(f / t_inv as f64, t_inv as usize - 1).collect();
                inv
            })
            .collect();

        let total_wealth: f64 = investors.iter().map(|i| i.wealth).sum();
        let n = config.market.n_clusters;
        let cap = p.market_capacity_ratio * total_wealth / n as f64;
        let clusters = (1..=n)
            .map(|index| LoanCluster {
                index,
                q: 0.0,
                price: 0.0,
                market_cap: cap,
                total_lent: 0.0,
            })
            .collect();

        let mut state = Self {
            rates,
            seed,
            cycle: 0,
            banks,
            investors,
            clusters,
            deposits: MaturityBook::new(t_inv),
            loans: MaturityBook::new(t_inv),
            audit: None,
            config,
        };
        state.seed_books()?;
        Ok(state)
    }

    /// Builds the book the market holds on entry: every investor's ladder of
    /// the previous `t_inv - 1` months is tranched, placed with banks and lent
    /// on at the first month's base rate, so deposits and loans mature
    /// throughout the opening months. No income, cost or capital change is
    /// booked for these months.
    fn seed_books(&mut self) -> Result<()> {
        let ir = *self
            .rates
            .first()
            .ok_or_else(|| Error::MissingRate("first cycle".into()))?;
        let t_inv = self.config.market.investment_period;
        let nt = self.config.investor_tranches();
        self.assign_bank_ratings()?;
        self.update_investor_appetite();
        self.compute_borrowing_limits()?;
        self.quote_clusters(ir)?;
        let mut scratch = CycleEvents::default();
        for k in (1..t_inv).rev() {
            let month = -(k as i32);
            for b in &mut self.banks {
                b.new_deposits = 0.0;
            }
            for inv in &mut self.investors {
                let ladder = inv.allocations[(t_inv - 1 - k) as usize];
                for a in rules::split_tranches(ladder, nt) {
                    inv.open_tranches.push(month, a);
                }
            }
            self.clear_funding_market(ir);
            let mut rng = op_rng(self.seed, u32::MAX - k, RngOp::Deposits);
            self.allocate_deposits(month, &mut rng, &mut scratch);
            self.update_total_funding_spreads(&mut scratch);
            self.compute_benchmarks(ir)?;
            let mut rng = op_rng(self.seed, u32::MAX - k, RngOp::Lending);
            self.allocate_lending(month, ir, &mut rng, &mut scratch);
        }
        for b in &mut self.banks {
            b.new_deposits = 0.0;
        }
        Ok(())
    }

    fn quote_clusters(&mut self, ir: f64) -> Result<()> {
        let quotes = ClusterQuotes::at_rate(ir, &self.config.market)?;
        for (c, (&q, &price)) in self.clusters.iter_mut().zip(quotes.q.iter().zip(&quotes.price)) {
            c.q = q;
            c.price = price;
        }
        Ok(())
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Index of the next cycle to run.
    pub fn cycle(&self) -> u32 {
        self.cycle
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// Collect a [`CycleAudit`] on every following cycle.
    pub fn enable_audit(&mut self) {
        self.audit = Some(CycleAudit::default());
    }

    /// Audit of the most recent cycle, if auditing is on.
    pub fn last_audit(&self) -> Option<&CycleAudit> {
        self.audit.as_ref()
    }

    pub fn live_deposits(&self) -> impl Iterator<Item = &DepositTranche> {
        self.deposits.iter()
    }

    pub fn live_loans(&self) -> impl Iterator<Item = &LoanTranche> {
        self.loans.iter()
    }

    /// Runs one monthly cycle and advances the clock.
    pub fn run_cycle(&mut self) -> Result<CycleEvents> {
        let t = self.cycle;
        let ir = *self
            .rates
            .get(t as usize)
            .ok_or_else(|| Error::MissingRate(format!("cycle {t}")))?;
        if let Some(a) = self.audit.as_mut() {
            *a = CycleAudit::default();
        }
        let mut events = CycleEvents {
            cycle: t,
            ..Default::default()
        };
        for b in &mut self.banks {
            b.flows = BankFlows::default();
            b.new_deposits = 0.0;
        }
        for inv in &mut self.investors {
            inv.flows = InvestorFlows::default();
        }

        let (matured_deposits, matured_loans) = self.detach_maturities(t as i32);

        self.assign_bank_ratings()?;
        self.update_investor_appetite();
        self.open_investor_tranches(t as i32);
        self.compute_borrowing_limits()?;
        self.clear_funding_market(ir);
        let month = t as i32;
        let mut rng = op_rng(self.seed, t, RngOp::Deposits);
        self.allocate_deposits(month, &mut rng, &mut events);
        self.update_total_funding_spreads(&mut events);
        self.compute_benchmarks(ir)?;
        self.quote_clusters(ir)?;
        let mut rng = op_rng(self.seed, t, RngOp::Lending);
        self.allocate_lending(month, ir, &mut rng, &mut events);
        self.redeem_loans(&matured_loans);
        self.remunerate_capital(ir);
        let failed = self.test_solvency(&mut events);
        self.apply_interbank_losses(&failed, &mut events);
        self.write_off_failed(&failed);
        self.redeem_bank_borrowing(&matured_deposits);
        self.close_books();

        if self.config.evolution.enabled {
            let params = self.config.evolution.clone();
            let mut rng = op_rng(self.seed, t, RngOp::Dissemination);
            evolution::disseminate_culture(&mut self.investors, ir, &params, &mut rng);
            let mut rng = op_rng(self.seed, t, RngOp::Infection);
            evolution::infect_strategies(&mut self.banks, &params, &mut rng);
        }

        self.cycle += 1;
        Ok(events)
    }

    /// Pulls the tranches maturing this month out of the books so this
    /// cycle's limits and headroom already reflect the repaid principal.
    fn detach_maturities(&mut self, t: i32) -> (Vec<DepositTranche>, Vec<LoanTranche>) {
        let origin = t - self.config.market.investment_period as i32;
        let deposits = self.deposits.take(t);
        let loans = self.loans.take(t);
        for b in &mut self.banks {
            if b.vintages.front().is_some_and(|v| v.month <= origin) {
                while b.vintages.front().is_some_and(|v| v.month <= origin) {
                    b.vintages.pop_front();
                }
                b.total_deposits = b.vintages.iter().map(|v| v.amount).sum();
            }
        }
        for l in &loans {
            let b = &mut self.banks[l.bank as usize];
            match l.placement {
                Placement::Cluster(c) => {
                    b.loans -= l.amount;
                    let cl = &mut self.clusters[c as usize];
                    cl.total_lent = (cl.total_lent - l.amount).max(0.0);
                }
                Placement::Interbank => b.interbank -= l.amount,
            }
        }
        for b in &mut self.banks {
            if b.loans.abs() < DUST {
                b.loans = 0.0;
            }
            if b.interbank.abs() < DUST {
                b.interbank = 0.0;
            }
        }
        (deposits, loans)
    }

    fn assign_bank_ratings(&mut self) -> Result<()> {
        let live: Vec<usize> = (0..self.banks.len()).filter(|&i| self.banks[i].is_live()).collect();
        if live.is_empty() {
            return Ok(());
        }
        let tcr: Vec<f64> = live.iter().map(|&i| self.banks[i].target_capital_ratio).collect();
        let sr: Vec<f64> = live.iter().map(|&i| self.banks[i].shareholder_return).collect();
        let ratings = rules::bank_ratings(&tcr, &sr, self.config.market.rating_bands)?;
        for (&i, r) in live.iter().zip(ratings) {
            self.banks[i].rating = r;
        }
        Ok(())
    }

    fn update_investor_appetite(&mut self) {
        let q: Vec<f64> = self
            .investors
            .iter_mut()
            .map(|inv| {
                inv.risk_appetite = rules::downside_risk(inv.returns.make_contiguous(), inv.return_expectation);
                inv.risk_appetite
            })
            .collect();
        let groups = rules::rank_buckets(&q, false, self.config.market.appetite_groups);
        for (inv, g) in self.investors.iter_mut().zip(groups) {
            inv.appetite_group = g;
        }
    }

    /// Idle tranches opened `t_inv` or more months ago are withdrawn: their
    /// month has left the allocation window, so the money comes back as new
    /// funds.
    fn open_investor_tranches(&mut self, t: i32) {
        let t_inv = self.config.market.investment_period;
        let window = t_inv as usize - 1;
        let nt = self.config.investor_tranches();
        let oldest = t - window as i32;
        for inv in &mut self.investors {
            inv.open_tranches.expire_before(oldest);
            let committed: f64 = inv.allocations.iter().sum();
            let fresh = rules::new_funds(inv.wealth, committed);
            inv.allocations.push_back(fresh);
            while inv.allocations.len() > window {
                inv.allocations.pop_front();
            }
            let parts = rules::split_tranches(fresh, nt);
            if let Some(a) = self.audit.as_mut() {
                if fresh > 0.0 {
                    a.partitions.push((fresh, parts.iter().sum(), parts.len()));
                }
            }
            for a in parts {
                inv.open_tranches.push(t, a);
            }
        }
    }

    fn compute_borrowing_limits(&mut self) -> Result<()> {
        for b in self.banks.iter_mut().filter(|b| b.is_live()) {
            b.limit = rules::borrowing_limit(b.capital, b.target_capital_ratio)?;
        }
        Ok(())
    }

    fn group_count(&self) -> usize {
        (self.config.market.rating_bands as usize + 1).max(self.config.market.appetite_groups as usize)
    }

    fn clear_funding_market(&mut self, ir: f64) {
        let groups = self.group_count();
        let mut members: Vec<Vec<(f64, f64)>> = vec![Vec::new(); groups + 1];
        for inv in &self.investors {
            let offered = inv.open_tranches.total();
            if offered > 0.0 {
                members[inv.appetite_group as usize].push((inv.return_expectation, offered));
            }
        }
        let mut demand = vec![0.0; groups + 1];
        for b in self.banks.iter().filter(|b| b.is_live()) {
            demand[b.rating as usize] += (b.limit - b.total_deposits).max(0.0);
        }
        let clearings: Vec<Option<Clearing>> = (0..=groups)
            .map(|g| rules::clear_group(&members[g], demand[g]))
            .collect();
        if let Some(a) = self.audit.as_mut() {
            for g in 1..=groups {
                if let Some(c) = clearings[g] {
                    a.clearings.push(GroupClearing {
                        group: g as u8,
                        supply: members[g].iter().map(|m| m.1).sum(),
                        demand: demand[g],
                        clearing: c,
                    });
                }
            }
        }
        for b in self.banks.iter_mut().filter(|b| b.is_live()) {
            b.funding_spread = clearings[b.rating as usize].map(|c| c.funding_spread);
            b.cost_of_borrowing = ir + b.funding_spread.unwrap_or(b.total_funding_spread);
        }
    }

    fn allocate_deposits(&mut self, t: i32, rng: &mut ChaCha8Rng, events: &mut CycleEvents) {
        let probs = self.config.market.match_probabilities.clone();
        let reach = probs.len();
        let maturity = t + self.config.market.investment_period as i32;

        let before: Vec<f64> = self.banks.iter().map(|b| b.total_deposits).collect();
        let groups = self.group_count();
        let mut candidates: Vec<Vec<u32>> = vec![Vec::new(); groups + 1];
        for b in self.banks.iter().filter(|b| b.is_live() && b.funding_spread.is_some()) {
            if b.limit - b.total_deposits <= 0.0 {
                continue;
            }
            for (g, cands) in candidates.iter_mut().enumerate().skip(1) {
                let d = (b.rating as usize).abs_diff(g);
                if d < reach && probs[d] > 0.0 {
                    cands.push(b.id as u32);
                }
            }
        }

        // Idle tranches are offered in uniformly random order: each draw
        // picks one of the tranches not yet offered this pass, all equally
        // likely. Investors whose group has no bank left in reach drop out.
        let mut weights = Fenwick::new(self.investors.len());
        let mut members: Vec<Vec<u32>> = vec![Vec::new(); groups + 1];
        for inv in &self.investors {
            let g = inv.appetite_group as usize;
            if !inv.open_tranches.is_empty() && !candidates[g].is_empty() {
                weights.add(inv.id, inv.open_tranches.len() as i64);
                members[g].push(inv.id as u32);
            }
        }
        let max_run = self.investors.iter().flat_map(|i| i.open_tranches.runs()).map(|r| r.count).max().unwrap_or(1);
        let mut remaining = weights.total();
        while remaining > 0 {
            let (investor, _) = weights.find(rng.random_range(0..remaining));
            let inv = &mut self.investors[investor];
            let run = inv.open_tranches.sample_run(rng, max_run);
            let amount = inv.open_tranches.runs()[run].amount;
            let g = inv.appetite_group as usize;
            let cands = &mut candidates[g];
            let mut placed = false;
            let mut k = 0;
            while k < cands.len() {
                let j = rng.random_range(k..cands.len());
                cands.swap(k, j);
                let bank = &mut self.banks[cands[k] as usize];
                // A bank that cannot take this tranche is full for the group
                // until the next cycle.
                if amount >= bank.limit - bank.total_deposits {
                    cands.swap_remove(k);
                    continue;
                }
                let p = rules::match_probability((bank.rating as usize).abs_diff(g), &probs);
                if rng.random::<f64>() < p {
                    bank.total_deposits += amount;
                    bank.new_deposits += amount;
                    bank.ever_funded = true;
                    if bank.status == BankStatus::Assisted {
                        bank.status = BankStatus::Active;
                        events.recoveries.push(bank.id);
                    }
                    self.deposits.push(
                        maturity,
                        DepositTranche {
                            investor: investor as u32,
                            bank: bank.id as u32,
                            amount,
                            cost_of_borrowing: bank.cost_of_borrowing,
                            origination: t,
                        },
                    );
                    events.deposits_placed += amount;
                    placed = true;
                    break;
                }
                k += 1;
            }
            let inv = &mut self.investors[investor];
            if placed {
                inv.open_tranches.take(run);
            } else {
                inv.open_tranches.defer(run);
            }
            weights.add(investor, -1);
            remaining -= 1;
            if candidates[g].is_empty() {
                for &m in &members[g] {
                    let w = weights.weight(m as usize);
                    weights.add(m as usize, -w);
                    remaining -= w;
                }
                members[g].clear();
            }
        }
        for inv in &mut self.investors {
            inv.open_tranches.end_pass();
            events.deposits_idle += inv.open_tranches.total();
        }

        for b in self.banks.iter_mut() {
            if b.new_deposits > 0.0 {
                b.vintages.push_back(DepositVintage {
                    month: t,
                    amount: b.new_deposits,
                    funding_spread: b.funding_spread.unwrap_or(0.0),
                });
            }
        }
        if let Some(a) = self.audit.as_mut() {
            for b in self.banks.iter().filter(|b| b.is_live()) {
                a.limits.push((b.id, before[b.id], b.total_deposits, b.limit));
            }
        }
    }

    fn update_total_funding_spreads(&mut self, events: &mut CycleEvents) {
        for b in self.banks.iter_mut().filter(|b| b.is_live()) {
            match rules::total_funding_spread(b.vintages.iter().map(|v| (v.amount, v.funding_spread))) {
                Some(tfs) => {
                    b.total_funding_spread = tfs;
                    b.tfs_stale = false;
                }
                None => {
                    b.tfs_stale = true;
                    events.stale_spreads += 1;
                }
            }
        }
    }

    fn compute_benchmarks(&mut self, ir: f64) -> Result<()> {
        for b in self.banks.iter_mut().filter(|b| b.is_live()) {
            if b.capital + b.total_deposits > 0.0 {
                b.benchmark = rules::benchmark_return(
                    b.capital,
                    b.total_deposits,
                    b.shareholder_return,
                    b.bonus_ratio,
                    b.cost_of_borrowing,
                    ir,
                )?;
            }
        }
        Ok(())
    }

    fn allocate_lending(&mut self, t: i32, ir: f64, rng: &mut ChaCha8Rng, events: &mut CycleEvents) {
        let nt = self.config.lending_tranches();
        let t_inv = self.config.market.investment_period;
        let sigma = self.config.market.lending_sigma_pp;

        let mut tranches: Vec<(u32, f64)> = Vec::new();
        for b in self.banks.iter().filter(|b| b.is_live() && b.new_deposits > 0.0) {
            let parts = rules::split_tranches(b.new_deposits, nt);
            if let Some(a) = self.audit.as_mut() {
                a.partitions.push((b.new_deposits, parts.iter().sum(), parts.len()));
            }
            tranches.extend(parts.into_iter().map(|a| (b.id as u32, a)));
        }
        if tranches.is_empty() {
            return;
        }
        tranches.shuffle(rng);
        let maturity = t + t_inv as i32;

        // Clusters each bank visits, closest price first, with acceptance odds.
        let mut preference: Vec<Option<Vec<(u16, f64)>>> = vec![None; self.banks.len()];
        for (bank, amount) in tranches {
            let bank = bank as usize;
            let bk = self.banks[bank].benchmark;
            let prefs = preference[bank].get_or_insert_with(|| {
                let mut v: Vec<(u16, f64)> = self
                    .clusters
                    .iter()
                    .enumerate()
                    .map(|(i, c)| (i as u16, rules::lending_acceptance(bk, c.price, sigma)))
                    .collect();
                v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                v
            });
            let mut placement = Placement::Interbank;
            for &(c, p) in prefs.iter() {
                let cl = &self.clusters[c as usize];
                if amount < cl.market_cap - cl.total_lent && rng.random::<f64>() < p {
                    placement = Placement::Cluster(c);
                    break;
                }
            }
            let price = match placement {
                Placement::Cluster(c) => {
                    let cl = &mut self.clusters[c as usize];
                    cl.total_lent += amount;
                    self.banks[bank].loans += amount;
                    events.lent_to_clusters += amount;
                    cl.price
                }
                Placement::Interbank => {
                    self.banks[bank].interbank += amount;
                    events.lent_interbank += amount;
                    0.0
                }
            };
            self.loans.push(
                maturity,
                LoanTranche {
                    bank: bank as u32,
                    placement,
                    amount,
                    price,
                    base_rate: ir,
                    origination: t,
                },
            );
        }
    }

    fn redeem_loans(&mut self, matured: &[LoanTranche]) {
        let m = &self.config.market;
        for l in matured {
            let b = &mut self.banks[l.bank as usize];
            if !b.is_live() {
                continue;
            }
            match l.placement {
                Placement::Cluster(c) => {
                    b.flows.income += rules::period_interest(l.amount, l.price + l.base_rate, m.investment_period);
                    b.flows.loss += rules::credit_loss(l.amount, self.clusters[c as usize].q, m.recovery);
                }
                Placement::Interbank => {
                    b.flows.income +=
                        rules::period_interest(l.amount, m.interbank_spread + l.base_rate, m.investment_period);
                }
            }
        }
    }

    fn remunerate_capital(&mut self, ir: f64) {
        let spr = self.config.market.interbank_spread;
        for b in self.banks.iter_mut().filter(|b| b.is_live()) {
            b.flows.capital_cost = rules::capital_remuneration(b.capital, spr, ir);
        }
    }

    fn test_solvency(&mut self, events: &mut CycleEvents) -> Vec<usize> {
        let min_ratio = self.config.market.min_capital_ratio;
        let mut failed = Vec::new();
        for b in self.banks.iter_mut().filter(|b| b.is_live()) {
            if b.total_deposits.abs() < DUST {
                b.total_deposits = 0.0;
            }
            if b.capital <= 0.0 || b.capital_ratio() < min_ratio {
                b.status = BankStatus::Bankrupt;
                failed.push(b.id);
            } else if b.total_deposits == 0.0 && b.ever_funded && b.status == BankStatus::Active {
                b.status = BankStatus::Assisted;
                events.assistances.push(b.id);
            }
        }
        events.failures.clone_from(&failed);
        failed
    }

    fn apply_interbank_losses(&mut self, failed: &[usize], events: &mut CycleEvents) {
        for &f in failed {
            let exposure = self.banks[f].interbank;
            if exposure <= 0.0 {
                continue;
            }
            let rating = self.banks[f].rating;
            let survivors: Vec<usize> = self
                .banks
                .iter()
                .filter(|b| b.is_live() && b.rating == rating && b.interbank > 0.0)
                .map(|b| b.id)
                .collect();
            let ibs: Vec<f64> = survivors.iter().map(|&i| self.banks[i].interbank).collect();
            match rules::interbank_shares(exposure, &ibs) {
                Some(shares) => {
                    for (i, s) in survivors.into_iter().zip(shares) {
                        self.banks[i].flows.interbank_loss += s;
                    }
                }
                None => events.unabsorbed_interbank += 1,
            }
        }
    }

    /// A failed bank leaves the market: investors lose the principal still
    /// deposited with it and its loans stop counting against cluster capacity.
    fn write_off_failed(&mut self, failed: &[usize]) {
        if failed.is_empty() {
            return;
        }
        let is_failed = |bank: u32| failed.contains(&(bank as usize));
        for d in self.deposits.extract_if(|d| is_failed(d.bank)) {
            let inv = &mut self.investors[d.investor as usize];
            inv.flows.loss += d.amount;
            inv.flows.principal += d.amount;
        }
        for l in self.loans.extract_if(|l| is_failed(l.bank)) {
            if let Placement::Cluster(c) = l.placement {
                let cl = &mut self.clusters[c as usize];
                cl.total_lent = (cl.total_lent - l.amount).max(0.0);
            }
        }
        for &f in failed {
            let b = &mut self.banks[f];
            b.total_deposits = 0.0;
            b.loans = 0.0;
            b.interbank = 0.0;
            b.vintages.clear();
        }
    }

    fn redeem_bank_borrowing(&mut self, matured: &[DepositTranche]) {
        let t_inv = self.config.market.investment_period;
        let mut per_vintage: Vec<(usize, i32, f64, f64)> = Vec::new();
        for d in matured {
            let inv = &mut self.investors[d.investor as usize];
            inv.flows.principal += d.amount;
            let bank = &mut self.banks[d.bank as usize];
            if !bank.is_live() {
                inv.flows.loss += d.amount;
                continue;
            }
            let cost = rules::period_interest(d.amount, d.cost_of_borrowing, t_inv);
            bank.flows.borrowing_cost += cost;
            inv.flows.income += cost;
            if self.audit.is_some() {
                match per_vintage.iter_mut().find(|v| v.0 == d.bank as usize && v.1 == d.origination) {
                    Some(v) => {
                        v.2 += cost;
                        v.3 += d.amount * d.cost_of_borrowing * (t_inv as f64 / 12.0);
                    }
                    None => per_vintage.push((
                        d.bank as usize,
                        d.origination,
                        cost,
                        d.amount * d.cost_of_borrowing * (t_inv as f64 / 12.0),
                    )),
                }
            }
        }
        if let Some(a) = self.audit.as_mut() {
            a.vintages = per_vintage;
        }
    }

    fn close_books(&mut self) {
        let m = &self.config.market;
        let profit_window = self.config.evolution.profit_window as usize;
        let memory = m.memory as usize;
        let return_window = self.config.evolution.return_window as usize;
        let years = m.investment_period as f64 / 12.0;

        for b in self.banks.iter_mut().filter(|b| b.is_live()) {
            let f = &mut b.flows;
            f.net_income = f.income - f.loss - f.capital_cost - f.interbank_loss - f.borrowing_cost;
            let (net_result, retained) = rules::close_bank_books(f.net_income, b.bonus_ratio, m.dividend_ratio);
            f.net_result = net_result;
            f.retained = retained;
            let before = b.capital;
            b.capital += retained;
            if let Some(a) = self.audit.as_mut() {
                let div = if net_result > 0.0 { m.dividend_ratio } else { 0.0 };
                a.capital.push((b.id, b.capital - before, net_result, div));
            }
            b.net_income_history.push_back(f.net_income);
            while b.net_income_history.len() > profit_window {
                b.net_income_history.pop_front();
            }
        }

        for inv in &mut self.investors {
            let f = inv.flows;
            inv.wealth += rules::investor_wealth_change(f.income, f.loss, m.investor_distribution_ratio);
            if f.principal > 0.0 {
                inv.returns.push_back((f.income - f.loss) / f.principal / years);
                while inv.returns.len() > memory {
                    inv.returns.pop_front();
                }
            }
            inv.performance.push_back((f.income - f.loss, inv.wealth));
            while inv.performance.len() > return_window {
                inv.performance.pop_front();
            }
        }
    }
}
