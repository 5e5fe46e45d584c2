//! Project lifecycle: solicitation in random order, Boltzmann acceptance via
//! roulette wheel, threshold test, and settlement of launched projects.

use std::fmt;

use crate::model::{apply_wealth_update, compute_payoff, AgentState, ModelError, WeightMatrix};
use crate::rng::{shuffle, RandomStream};

#[derive(Debug, Clone, PartialEq)]
pub enum ProjectError {
    Model(ModelError),
    NonFinite { what: &'static str },
    OutOfRange { what: &'static str },
    IndexOutOfRange { what: &'static str, index: usize, len: usize },
    NotLaunched { status: ProjectStatus },
}

impl fmt::Display for ProjectError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProjectError::Model(e) => e.fmt(f),
            ProjectError::NonFinite { what } => write!(f, "{what} must be finite"),
            ProjectError::OutOfRange { what } => write!(f, "{what} is out of range"),
            ProjectError::IndexOutOfRange { what, index, len } => {
                write!(f, "{what} index {index} out of range (len {len})")
            }
            ProjectError::NotLaunched { status } => {
                write!(f, "cannot settle a project in status {status}")
            }
        }
    }
}

impl std::error::Error for ProjectError {}

impl From<ModelError> for ProjectError {
    fn from(e: ModelError) -> Self {
        ProjectError::Model(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectStatus {
    Collecting,
    Launched,
    Aborted,
    Settled,
}

impl ProjectStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ProjectStatus::Collecting => "collecting",
            ProjectStatus::Launched => "launched",
            ProjectStatus::Aborted => "aborted",
            ProjectStatus::Settled => "settled",
        }
    }
}

impl fmt::Display for ProjectStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An investor that joined a project and the amount it committed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Participant {
    pub investor: usize,
    pub committed: f64,
}

/// One investment project's lifecycle record.
///
/// `participants` lists accepted investors only; the initiator's own stake is
/// tracked separately and is part of `total_committed`.
#[derive(Debug, Clone)]
pub struct Project {
    pub id: u64,
    pub initiator: usize,
    pub participants: Vec<Participant>,
    pub initiator_commitment: f64,
    pub total_committed: f64,
    pub threshold: f64,
    pub status: ProjectStatus,
    pub return_value: Option<f64>,
}

/// Outcome of one solicitation round.
#[derive(Debug, Clone)]
pub struct ProjectOutcome {
    pub project: Project,
    pub contacted: usize,
    pub accepted: usize,
}

/// Payoff deposit owed to the decision weight of one (investor, initiator)
/// pair after settlement.
#[derive(Debug, Clone, Copy)]
pub struct Deposit {
    pub investor: usize,
    pub initiator: usize,
    pub payoff: f64,
}

/// What a settlement did: per-pair weight deposits plus bookkeeping totals.
#[derive(Debug, Clone)]
pub struct Settlement {
    pub project_id: u64,
    pub return_value: f64,
    pub deposits: Vec<Deposit>,
    pub initiator_payoff: f64,
    pub payoff_total: f64,
    pub income_total: f64,
}

/// Probability that an investor with decision weights `weight_row` accepts an
/// offer from initiator `j`: a Boltzmann distribution over its initiators,
/// `e^(beta·w_j) / sum_i e^(beta·w_i)`.
///
/// Exponents are shifted by the row maximum before exponentiation so large
/// weights cannot overflow.
pub fn acceptance_probability(
    weight_row: &[f64],
    initiator: usize,
    greediness: f64,
) -> Result<f64, ProjectError> {
    if initiator >= weight_row.len() {
        return Err(ProjectError::IndexOutOfRange {
            what: "initiator",
            index: initiator,
            len: weight_row.len(),
        });
    }
    if !greediness.is_finite() {
        return Err(ProjectError::NonFinite { what: "greediness" });
    }
    let mut max_exponent = f64::NEG_INFINITY;
    for &w in weight_row {
        if !w.is_finite() {
            return Err(ProjectError::NonFinite { what: "weight" });
        }
        max_exponent = max_exponent.max(greediness * w);
    }
    // Weight rows are mostly exact zeros in large runs; share one exp() for
    // all of them. Summation order is unchanged.
    let zero_term = (-max_exponent).exp();
    let mut denom = 0.0;
    for &w in weight_row {
        denom += if w == 0.0 { zero_term } else { (greediness * w - max_exponent).exp() };
    }
    let w = weight_row[initiator];
    let numer = if w == 0.0 { zero_term } else { (greediness * w - max_exponent).exp() };
    Ok(numer / denom)
}

/// Full acceptance distribution of one investor over all initiators.
pub fn acceptance_distribution(
    weight_row: &[f64],
    greediness: f64,
) -> Result<Vec<f64>, ProjectError> {
    (0..weight_row.len())
        .map(|j| acceptance_probability(weight_row, j, greediness))
        .collect()
}

/// Roulette-wheel acceptance: the offer is taken iff the uniform draw `u`
/// falls strictly inside the segment of length `tau`.
pub fn roulette_accept(tau: f64, u: f64) -> Result<bool, ProjectError> {
    if !tau.is_finite() || !(0.0..=1.0).contains(&tau) {
        return Err(ProjectError::OutOfRange { what: "tau" });
    }
    if !u.is_finite() || u <= 0.0 || u >= 1.0 {
        return Err(ProjectError::OutOfRange { what: "u" });
    }
    Ok(u < tau)
}

/// Run one solicitation round for initiator `initiator_index`.
///
/// Investors are contacted in a fresh uniformly random order, each accepting
/// via [`roulette_accept`] on its own acceptance probability, until the money
/// collected from investors reaches the threshold (launched) or everyone has
/// been asked once (aborted). The initiator stakes its own commitment
/// alongside the pool — it is part of `total_committed` and settles with the
/// project — but the collection target has to be met by the solicited
/// investors themselves. Budgets are not touched here; money moves at
/// settlement.
pub fn form_project(
    investors: &[AgentState],
    initiator: &AgentState,
    initiator_index: usize,
    weights: &WeightMatrix,
    threshold: f64,
    greediness: f64,
    project_id: u64,
    rng: &mut impl RandomStream,
) -> Result<ProjectOutcome, ProjectError> {
    if !threshold.is_finite() || threshold < 0.0 {
        return Err(ProjectError::OutOfRange { what: "threshold" });
    }
    if initiator_index >= weights.initiator_count() {
        return Err(ProjectError::IndexOutOfRange {
            what: "initiator",
            index: initiator_index,
            len: weights.initiator_count(),
        });
    }
    if investors.len() != weights.investor_count() {
        return Err(ProjectError::OutOfRange { what: "investor count" });
    }

    let initiator_commitment = initiator.commitment();
    let mut collected = 0.0;
    let mut participants = Vec::new();
    let mut contacted = 0;
    let mut accepted = 0;

    // Fresh contact order every project, drawn before any acceptance draws.
    let mut order: Vec<usize> = (0..investors.len()).collect();
    shuffle(rng, &mut order);

    if collected < threshold {
        for &k in &order {
            contacted += 1;
            let tau = acceptance_probability(weights.row(k), initiator_index, greediness)?;
            let u = rng.open01();
            if roulette_accept(tau, u)? {
                accepted += 1;
                let committed = investors[k].commitment();
                participants.push(Participant { investor: k, committed });
                collected += committed;
                if collected >= threshold {
                    break;
                }
            }
        }
    }

    let status = if collected >= threshold {
        ProjectStatus::Launched
    } else {
        ProjectStatus::Aborted
    };

    Ok(ProjectOutcome {
        project: Project {
            id: project_id,
            initiator: initiator_index,
            participants,
            initiator_commitment,
            total_committed: initiator_commitment + collected,
            threshold,
            status,
            return_value: None,
        },
        contacted,
        accepted,
    })
}

/// Settle a launched project with the drawn return.
///
/// Every participant, the initiator included, books the payoff from its
/// pre-settlement budget and then applies the wealth update (return on the
/// committed fraction plus income). Weight deposits are recorded for
/// investor-initiator pairs only; the runner applies them together with the
/// global decay.
pub fn settle_project(
    investors: &mut [AgentState],
    initiator: &mut AgentState,
    project: &mut Project,
    return_value: f64,
) -> Result<Settlement, ProjectError> {
    if project.status != ProjectStatus::Launched {
        return Err(ProjectError::NotLaunched { status: project.status });
    }
    if !return_value.is_finite() || !(-1.0..=1.0).contains(&return_value) {
        return Err(ProjectError::OutOfRange { what: "return" });
    }

    let r = return_value;
    let mut deposits = Vec::with_capacity(project.participants.len());
    let mut payoff_total = 0.0;
    let mut income_total = 0.0;

    for participant in &project.participants {
        let agent = &mut investors[participant.investor];
        let payoff = compute_payoff(agent.budget, agent.invest_proportion, r)?;
        agent.budget = apply_wealth_update(agent.budget, agent.invest_proportion, r, agent.income)?;
        deposits.push(Deposit {
            investor: participant.investor,
            initiator: project.initiator,
            payoff,
        });
        payoff_total += payoff;
        income_total += agent.income;
    }

    let initiator_payoff = compute_payoff(initiator.budget, initiator.invest_proportion, r)?;
    initiator.budget =
        apply_wealth_update(initiator.budget, initiator.invest_proportion, r, initiator.income)?;
    payoff_total += initiator_payoff;
    income_total += initiator.income;

    project.return_value = Some(r);
    project.status = ProjectStatus::Settled;

    Ok(Settlement {
        project_id: project.id,
        return_value: r,
        deposits,
        initiator_payoff,
        payoff_total,
        income_total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Role;
    use crate::rng::Xoshiro256;
    use std::collections::VecDeque;

    /// Scripted stream: identity permutation (index returns bound-1 so
    /// Fisher-Yates swaps are no-ops) and queued acceptance draws.
    struct Scripted {
        draws: VecDeque<f64>,
    }

    impl Scripted {
        fn new(draws: &[f64]) -> Self {
            Scripted { draws: draws.iter().copied().collect() }
        }
    }

    impl RandomStream for Scripted {
        fn index(&mut self, bound: usize) -> usize {
            bound - 1
        }
        fn open01(&mut self) -> f64 {
            self.draws.pop_front().expect("scripted stream exhausted")
        }
    }

    fn investor(budget: f64, q: f64) -> AgentState {
        AgentState::new(budget, q, 0.5, Role::Investor)
    }

    fn initiator_agent(budget: f64, q: f64) -> AgentState {
        AgentState::new(budget, q, 0.5, Role::Initiator)
    }

    #[test]
    fn acceptance_examples() {
        let p = acceptance_probability(&[0.0, 0.0], 0, 1.0).unwrap();
        assert!((p - 0.5).abs() < 1e-15);

        let row = [3.0, -1.0, 0.4, 2.2, 0.0];
        let p = acceptance_probability(&row, 3, 0.0).unwrap();
        assert!((p - 0.2).abs() < 1e-15);

        let p = acceptance_probability(&[1.0, 0.0], 0, 1.0).unwrap();
        let expected = std::f64::consts::E / (std::f64::consts::E + 1.0);
        assert!((p - expected).abs() < 1e-12);
        assert!((p - 0.7310585786300049).abs() < 1e-12);
    }

    #[test]
    fn acceptance_rejects_bad_inputs() {
        assert!(acceptance_probability(&[0.0], 1, 1.0).is_err());
        assert!(acceptance_probability(&[f64::NAN, 0.0], 0, 1.0).is_err());
        assert!(acceptance_probability(&[0.0], 0, f64::INFINITY).is_err());
    }

    #[test]
    fn acceptance_rows_normalize_even_with_huge_weights() {
        // The max-shift keeps the sum normalized at any weight scale; entries
        // far below the row maximum may underflow to an exact zero.
        let mut rng = Xoshiro256::seed_from_u64(2);
        for _ in 0..200 {
            let j_count = 1 + rng.index(8);
            let scale = 10f64.powi(rng.index(7) as i32);
            let row: Vec<f64> = (0..j_count).map(|_| rng.signed_open01() * scale).collect();
            let beta = rng.open01() * 4.0;
            let dist = acceptance_distribution(&row, beta).unwrap();
            let sum: f64 = dist.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12, "sum {sum}");
            assert!(dist.iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
        // At moderate scales every option keeps strictly positive probability.
        for _ in 0..200 {
            let row: Vec<f64> = (0..5).map(|_| rng.signed_open01() * 50.0).collect();
            let dist = acceptance_distribution(&row, 1.0).unwrap();
            assert!(dist.iter().all(|&p| p > 0.0 && p <= 1.0));
        }
    }

    #[test]
    fn acceptance_is_shift_invariant() {
        let mut rng = Xoshiro256::seed_from_u64(3);
        for _ in 0..200 {
            let row: Vec<f64> = (0..6).map(|_| rng.signed_open01() * 5.0).collect();
            let shifted: Vec<f64> = row.iter().map(|w| w + 123.456).collect();
            for j in 0..6 {
                let a = acceptance_probability(&row, j, 1.3).unwrap();
                let b = acceptance_probability(&shifted, j, 1.3).unwrap();
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn acceptance_increases_with_own_weight() {
        let row = [0.2, -0.4, 1.0];
        let base = acceptance_probability(&row, 1, 2.0).unwrap();
        let bumped = {
            let mut row = row;
            row[1] += 0.5;
            acceptance_probability(&row, 1, 2.0).unwrap()
        };
        assert!(bumped > base);
    }

    #[test]
    fn roulette_examples() {
        assert!(roulette_accept(1.0, 0.999).unwrap());
        assert!(!roulette_accept(0.0, 0.001).unwrap());
        // boundary is a strict inequality
        assert!(!roulette_accept(0.5, 0.5).unwrap());
        assert!(roulette_accept(1.2, 0.5).is_err());
        assert!(roulette_accept(0.5, 0.0).is_err());
        assert!(roulette_accept(0.5, 1.0).is_err());
    }

    #[test]
    fn zero_threshold_launches_with_initiator_only() {
        let investors: Vec<AgentState> = (0..4).map(|_| investor(1.0, 0.5)).collect();
        let weights = WeightMatrix::new(4, 2);
        let mut rng = Xoshiro256::seed_from_u64(1);
        let outcome = form_project(
            &investors,
            &initiator_agent(1.0, 0.5),
            0,
            &weights,
            0.0,
            1.0,
            0,
            &mut rng,
        )
        .unwrap();
        assert_eq!(outcome.project.status, ProjectStatus::Launched);
        assert_eq!(outcome.contacted, 0);
        assert_eq!(outcome.accepted, 0);
        assert!(outcome.project.participants.is_empty());
        assert_eq!(outcome.project.total_committed, 0.5);
    }

    #[test]
    fn threshold_nine_with_forced_acceptance_takes_eighteen_investors() {
        // Commitments are all 0.5 and the collection target is met by the
        // investors alone, so ceil(9 / 0.5) = 18 must join; the initiator's
        // own 0.5 rides on top of the pool.
        let investors: Vec<AgentState> = (0..30).map(|_| investor(1.0, 0.5)).collect();
        let weights = WeightMatrix::new(30, 2);
        let mut rng = Scripted::new(&[1e-12; 30]);
        let outcome = form_project(
            &investors,
            &initiator_agent(1.0, 0.5),
            0,
            &weights,
            9.0,
            1.0,
            0,
            &mut rng,
        )
        .unwrap();
        assert_eq!(outcome.project.status, ProjectStatus::Launched);
        assert_eq!(outcome.accepted, 18);
        assert_eq!(outcome.contacted, 18);
        assert!((outcome.project.total_committed - 9.5).abs() < 1e-12);
        assert_eq!(outcome.project.participants.len(), 18);
    }

    #[test]
    fn scripted_trace_second_investor_accepts_rest_decline() {
        // Zero weights over two initiators give tau = 0.5 for everyone; the
        // scripted draws make only the middle investor accept.
        let investors: Vec<AgentState> = (0..3).map(|_| investor(1.0, 0.5)).collect();
        let weights = WeightMatrix::new(3, 2);
        let mut rng = Scripted::new(&[0.9, 0.1, 0.9]);
        let outcome = form_project(
            &investors,
            &initiator_agent(1.0, 0.5),
            0,
            &weights,
            100.0,
            1.0,
            7,
            &mut rng,
        )
        .unwrap();
        assert_eq!(outcome.project.status, ProjectStatus::Aborted);
        assert_eq!(outcome.contacted, 3);
        assert_eq!(outcome.accepted, 1);
        assert_eq!(outcome.project.participants.len(), 1);
        assert_eq!(outcome.project.participants[0].investor, 1);
        assert!(outcome.project.return_value.is_none());
    }

    #[test]
    fn launched_iff_threshold_met_and_aborted_means_everyone_contacted() {
        let mut rng = Xoshiro256::seed_from_u64(77);
        for trial in 0..300 {
            let n = 1 + rng.index(12);
            let investors: Vec<AgentState> =
                (0..n).map(|_| investor(rng.open01() * 4.0, rng.open01())).collect();
            let weights = WeightMatrix::new(n, 3);
            let threshold = rng.open01() * 6.0;
            let init = initiator_agent(rng.open01() * 2.0, rng.open01());
            let outcome = form_project(
                &investors, &init, rng.index(3), &weights, threshold, 1.0, trial, &mut rng,
            )
            .unwrap();
            let launched = outcome.project.status == ProjectStatus::Launched;
            let collected: f64 = outcome.project.participants.iter().map(|p| p.committed).sum();
            assert_eq!(launched, collected >= threshold);
            assert!(outcome.accepted <= outcome.contacted && outcome.contacted <= n);
            if !launched {
                assert_eq!(outcome.contacted, n);
            }
            let mut seen: Vec<usize> =
                outcome.project.participants.iter().map(|p| p.investor).collect();
            seen.sort_unstable();
            seen.dedup();
            assert_eq!(seen.len(), outcome.project.participants.len());
            let participant_sum: f64 =
                outcome.project.participants.iter().map(|p| p.committed).sum();
            let expected_total = participant_sum + outcome.project.initiator_commitment;
            assert!((outcome.project.total_committed - expected_total).abs() < 1e-9);
        }
    }

    #[test]
    fn first_contact_is_uniform_over_investors() {
        // Chi-square sanity check on the first contacted index; 8 investors,
        // fixed stream, so the statistic is deterministic.
        let n = 8;
        let trials = 16_000;
        let mut counts = vec![0usize; n];
        let mut rng = Xoshiro256::seed_from_u64(123);
        for _ in 0..trials {
            let mut order: Vec<usize> = (0..n).collect();
            shuffle(&mut rng, &mut order);
            counts[order[0]] += 1;
        }
        let expected = trials as f64 / n as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 99.9th percentile of chi-square with 7 degrees of freedom.
        assert!(chi2 < 24.32, "chi2 {chi2}");
    }

    #[test]
    fn settle_with_zero_return_only_pays_income() {
        let mut investors = vec![investor(2.0, 0.5), investor(3.0, 0.5)];
        let mut init = initiator_agent(1.0, 0.5);
        let mut project = Project {
            id: 0,
            initiator: 0,
            participants: vec![
                Participant { investor: 0, committed: 1.0 },
                Participant { investor: 1, committed: 1.5 },
            ],
            initiator_commitment: 0.5,
            total_committed: 3.0,
            threshold: 2.0,
            status: ProjectStatus::Launched,
            return_value: None,
        };
        let settlement = settle_project(&mut investors, &mut init, &mut project, 0.0).unwrap();
        assert_eq!(investors[0].budget, 2.5);
        assert_eq!(investors[1].budget, 3.5);
        assert_eq!(init.budget, 1.5);
        assert!(settlement.deposits.iter().all(|d| d.payoff == 0.0));
        assert_eq!(settlement.payoff_total, 0.0);
        assert_eq!(project.status, ProjectStatus::Settled);
        assert_eq!(project.return_value, Some(0.0));
    }

    #[test]
    fn settle_single_participant_example() {
        let mut investors = vec![investor(2.0, 0.5)];
        // Zero-budget initiator so the pool is the single investor's stake.
        let mut init = initiator_agent(0.0, 0.5);
        let mut project = Project {
            id: 1,
            initiator: 0,
            participants: vec![Participant { investor: 0, committed: 1.0 }],
            initiator_commitment: 0.0,
            total_committed: 1.0,
            threshold: 1.0,
            status: ProjectStatus::Launched,
            return_value: None,
        };
        let settlement = settle_project(&mut investors, &mut init, &mut project, 1.0).unwrap();
        assert!((investors[0].budget - 3.5).abs() < 1e-15);
        assert_eq!(settlement.deposits.len(), 1);
        assert!((settlement.deposits[0].payoff - 1.0).abs() < 1e-15);
    }

    #[test]
    fn settlement_payoffs_sum_to_return_times_pool() {
        let mut investors = vec![investor(1.0, 0.5), investor(1.0, 0.5), investor(1.0, 0.5)];
        let mut init = initiator_agent(0.0, 0.5);
        let mut project = Project {
            id: 2,
            initiator: 0,
            participants: (0..3)
                .map(|k| Participant { investor: k, committed: 0.5 })
                .collect(),
            initiator_commitment: 0.0,
            total_committed: 1.5,
            threshold: 1.0,
            status: ProjectStatus::Launched,
            return_value: None,
        };
        let r = -0.6;
        let settlement = settle_project(&mut investors, &mut init, &mut project, r).unwrap();
        assert!((settlement.payoff_total - (-0.9)).abs() < 1e-12);
        assert!((settlement.payoff_total - r * project.total_committed).abs() < 1e-12);
    }

    #[test]
    fn settlement_conservation_over_random_projects() {
        let mut rng = Xoshiro256::seed_from_u64(42);
        for id in 0..200 {
            let n = 1 + rng.index(10);
            let q = rng.open01();
            let mut investors: Vec<AgentState> =
                (0..n).map(|_| investor(rng.open01() * 50.0, q)).collect();
            let mut init = initiator_agent(rng.open01() * 50.0, q);
            let participants: Vec<Participant> = (0..n)
                .map(|k| Participant { investor: k, committed: investors[k].commitment() })
                .collect();
            let participant_sum: f64 = participants.iter().map(|p| p.committed).sum();
            let total = participant_sum + init.commitment();
            let mut project = Project {
                id,
                initiator: 0,
                participants,
                initiator_commitment: init.commitment(),
                total_committed: total,
                threshold: total,
                status: ProjectStatus::Launched,
                return_value: None,
            };
            let r = rng.signed_open01();
            let settlement = settle_project(&mut investors, &mut init, &mut project, r).unwrap();
            let expected = r * total;
            let tol = 1e-9 * expected.abs().max(1.0);
            assert!((settlement.payoff_total - expected).abs() < tol);
        }
    }

    #[test]
    fn settling_twice_is_rejected() {
        let mut investors = vec![investor(1.0, 0.5)];
        let mut init = initiator_agent(1.0, 0.5);
        let mut project = Project {
            id: 3,
            initiator: 0,
            participants: vec![Participant { investor: 0, committed: 0.5 }],
            initiator_commitment: 0.5,
            total_committed: 1.0,
            threshold: 0.5,
            status: ProjectStatus::Launched,
            return_value: None,
        };
        settle_project(&mut investors, &mut init, &mut project, 0.5).unwrap();
        let err = settle_project(&mut investors, &mut init, &mut project, 0.5);
        assert!(matches!(err, Err(ProjectError::NotLaunched { .. })));
        // out-of-range return is rejected up front
        let mut fresh = Project { status: ProjectStatus::Launched, ..project.clone() };
        assert!(settle_project(&mut investors, &mut init, &mut fresh, 1.5).is_err());
    }
}
