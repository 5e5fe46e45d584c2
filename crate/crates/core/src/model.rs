//! Agent-level state and the pure arithmetic of the wealth and trust dynamics:
//! wealth updates, payoffs, decision-weight decay, and reputations.

use std::fmt;

/// Error raised when an operation's input contract is violated.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    NonFinite { what: &'static str },
    OutOfRange { what: &'static str },
    IndexOutOfRange { what: &'static str, index: usize, len: usize },
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::NonFinite { what } => write!(f, "{what} must be finite"),
            ModelError::OutOfRange { what } => write!(f, "{what} is out of range"),
            ModelError::IndexOutOfRange { what, index, len } => {
                write!(f, "{what} index {index} out of range (len {len})")
            }
        }
    }
}

impl std::error::Error for ModelError {}

/// Whether an agent solicits projects or is solicited for them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Investor,
    Initiator,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Investor => "investor",
            Role::Initiator => "initiator",
        }
    }
}

/// One agent: liquid budget, the fraction of it committed to any project it
/// joins, per-settlement income, and its role.
#[derive(Debug, Clone)]
pub struct AgentState {
    pub budget: f64,
    pub invest_proportion: f64,
    pub income: f64,
    pub role: Role,
}

impl AgentState {
    pub fn new(budget: f64, invest_proportion: f64, income: f64, role: Role) -> Self {
        AgentState { budget, invest_proportion, income, role }
    }

    /// Amount this agent puts into a project it joins right now.
    pub fn commitment(&self) -> f64 {
        self.budget * self.invest_proportion
    }
}

/// Behavioral parameters: `memory` is the per-step decay exponent on decision
/// weights (large = short memory), `greediness` the inverse-temperature weight
/// on past payoffs in the acceptance probability.
#[derive(Debug, Clone, Copy)]
pub struct BehaviorParams {
    pub memory: f64,
    pub greediness: f64,
}

/// Dense investor x initiator matrix of decision weights.
///
/// Entry (k, j) is investor k's exponentially decayed memory of payoffs earned
/// from initiator j's projects. All entries start at zero. Mutated only by the
/// simulation runner; analysis reads snapshots.
#[derive(Debug, Clone)]
pub struct WeightMatrix {
    entries: Vec<f64>,
    investors: usize,
    initiators: usize,
}

impl WeightMatrix {
    pub fn new(investors: usize, initiators: usize) -> Self {
        WeightMatrix {
            entries: vec![0.0; investors * initiators],
            investors,
            initiators,
        }
    }

    pub fn investor_count(&self) -> usize {
        self.investors
    }

    pub fn initiator_count(&self) -> usize {
        self.initiators
    }

    pub fn get(&self, investor: usize, initiator: usize) -> f64 {
        self.entries[investor * self.initiators + initiator]
    }

    pub fn set(&mut self, investor: usize, initiator: usize, value: f64) {
        self.entries[investor * self.initiators + initiator] = value;
    }

    pub fn add(&mut self, investor: usize, initiator: usize, delta: f64) {
        self.entries[investor * self.initiators + initiator] += delta;
    }

    /// Decision weights of one investor toward every initiator.
    pub fn row(&self, investor: usize) -> &[f64] {
        let start = investor * self.initiators;
        &self.entries[start..start + self.initiators]
    }

    /// Multiply every entry by `factor` (the per-step memory decay).
    pub fn decay(&mut self, factor: f64) {
        for w in &mut self.entries {
            *w *= factor;
        }
    }

    pub fn grand_total(&self) -> f64 {
        self.entries.iter().sum()
    }

    /// Pairs with strictly positive weight, row-major order.
    pub fn positive_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries.iter().enumerate().filter_map(move |(i, &w)| {
            (w > 0.0).then(|| (i / self.initiators, i % self.initiators, w))
        })
    }
}

/// Row and column sums of the weight matrix: every initiator's and every
/// investor's reputation. Both vectors total to the matrix grand sum.
#[derive(Debug, Clone)]
pub struct ReputationReport {
    pub initiator_reputation: Vec<f64>,
    pub investor_reputation: Vec<f64>,
}

fn ensure_finite(value: f64, what: &'static str) -> Result<(), ModelError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::NonFinite { what })
    }
}

fn ensure_range(ok: bool, what: &'static str) -> Result<(), ModelError> {
    if ok {
        Ok(())
    } else {
        Err(ModelError::OutOfRange { what })
    }
}

/// One wealth update: the budget's invested fraction scales by the return,
/// then income is added. Returns the new budget `x·(1 + r·q) + a`.
pub fn apply_wealth_update(
    budget: f64,
    proportion: f64,
    roi: f64,
    income: f64,
) -> Result<f64, ModelError> {
    ensure_finite(budget, "budget")?;
    ensure_finite(proportion, "proportion")?;
    ensure_finite(roi, "return")?;
    ensure_finite(income, "income")?;
    ensure_range(budget >= 0.0, "budget")?;
    ensure_range((0.0..=1.0).contains(&proportion), "proportion")?;
    ensure_range((-1.0..=1.0).contains(&roi), "return")?;
    ensure_range(income >= 0.0, "income")?;
    Ok(budget * (1.0 + roi * proportion) + income)
}

/// Signed payoff an agent books from one settled project: `x·q·r`.
pub fn compute_payoff(budget: f64, proportion: f64, roi: f64) -> Result<f64, ModelError> {
    ensure_finite(budget, "budget")?;
    ensure_finite(proportion, "proportion")?;
    ensure_finite(roi, "return")?;
    ensure_range(budget >= 0.0, "budget")?;
    ensure_range((0.0..=1.0).contains(&proportion), "proportion")?;
    ensure_range((-1.0..=1.0).contains(&roi), "return")?;
    Ok(budget * proportion * roi)
}

/// One decision-weight step: decay the old weight by `e^(-gamma)` and deposit
/// the fresh payoff on top.
pub fn decay_and_deposit_weight(weight: f64, payoff: f64, gamma: f64) -> Result<f64, ModelError> {
    ensure_finite(weight, "weight")?;
    ensure_finite(payoff, "payoff")?;
    ensure_finite(gamma, "memory")?;
    ensure_range(gamma >= 0.0, "memory")?;
    Ok(payoff + weight * (-gamma).exp())
}

/// Reputation of initiator `j`: total decision weight all investors hold
/// toward it (column sum).
pub fn compute_initiator_reputation(
    weights: &WeightMatrix,
    initiator: usize,
) -> Result<f64, ModelError> {
    if initiator >= weights.initiator_count() {
        return Err(ModelError::IndexOutOfRange {
            what: "initiator",
            index: initiator,
            len: weights.initiator_count(),
        });
    }
    Ok((0..weights.investor_count())
        .map(|k| weights.get(k, initiator))
        .sum())
}

/// Reputation of investor `k`: total decision weight it holds toward all
/// initiators (row sum). Diagnostic only; nothing in the dynamics reads it.
pub fn compute_investor_reputation(
    weights: &WeightMatrix,
    investor: usize,
) -> Result<f64, ModelError> {
    if investor >= weights.investor_count() {
        return Err(ModelError::IndexOutOfRange {
            what: "investor",
            index: investor,
            len: weights.investor_count(),
        });
    }
    Ok(weights.row(investor).iter().sum())
}

/// Both reputation vectors in one pass.
pub fn reputation_report(weights: &WeightMatrix) -> ReputationReport {
    let mut initiator_reputation = vec![0.0; weights.initiator_count()];
    let mut investor_reputation = vec![0.0; weights.investor_count()];
    for k in 0..weights.investor_count() {
        let row = weights.row(k);
        let mut row_sum = 0.0;
        for (j, &w) in row.iter().enumerate() {
            initiator_reputation[j] += w;
            row_sum += w;
        }
        investor_reputation[k] = row_sum;
    }
    ReputationReport {
        initiator_reputation,
        investor_reputation,
    }
}
