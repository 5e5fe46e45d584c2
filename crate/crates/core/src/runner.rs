//! Discrete-time simulation loop: one randomly chosen initiator and one
//! project per step, settlement, global weight decay, and snapshotting.
//! Fully deterministic for a given config and seed.

use std::fmt;
use std::io;

use crate::model::{reputation_report, AgentState, BehaviorParams, Role, WeightMatrix};
use crate::project::{form_project, settle_project, ProjectStatus, Settlement};
use crate::rng::{RandomStream, Xoshiro256};

/// Full parameter set of a run.
///
/// Defaults reproduce the headline experiment: 10^4 investors, 100 initiators,
/// 10^5 steps, threshold 9, initial budget 1, income 0.5, memory 0.1,
/// greediness 1, investment proportion 0.5.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub num_investors: usize,
    pub num_initiators: usize,
    pub num_steps: u64,
    pub threshold: f64,
    pub invest_proportion: f64,
    pub initial_budget: f64,
    pub income: f64,
    pub memory: f64,
    pub greediness: f64,
    pub rng_seed: u64,
    pub snapshot_every: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            num_investors: 10_000,
            num_initiators: 100,
            num_steps: 100_000,
            threshold: 9.0,
            invest_proportion: 0.5,
            initial_budget: 1.0,
            income: 0.5,
            memory: 0.1,
            greediness: 1.0,
            rng_seed: 1,
            snapshot_every: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub field: &'static str,
    pub message: &'static str,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

impl SimConfig {
    /// The memory/greediness pair shared by every agent in this run.
    pub fn behavior(&self) -> BehaviorParams {
        BehaviorParams { memory: self.memory, greediness: self.greediness }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |field, message| Err(ConfigError { field, message });
        if self.num_investors < 1 {
            return err("num_investors", "must be at least 1");
        }
        if self.num_initiators < 1 {
            return err("num_initiators", "must be at least 1");
        }
        if self.snapshot_every < 1 {
            return err("snapshot_every", "must be at least 1");
        }
        if !self.threshold.is_finite() || self.threshold < 0.0 {
            return err("threshold", "must be finite and nonnegative");
        }
        if !self.invest_proportion.is_finite() || !(0.0..=1.0).contains(&self.invest_proportion) {
            return err("q", "must lie in [0, 1]");
        }
        if !self.initial_budget.is_finite() || self.initial_budget < 0.0 {
            return err("initial_budget", "must be finite and nonnegative");
        }
        if !self.income.is_finite() || self.income < 0.0 {
            return err("income", "must be finite and nonnegative");
        }
        if !self.memory.is_finite() || self.memory < 0.0 {
            return err("memory", "must be finite and nonnegative");
        }
        if !self.greediness.is_finite() {
            return err("greediness", "must be finite");
        }
        Ok(())
    }
}

/// One line of the run's event log: what the step's project did.
#[derive(Debug, Clone)]
pub struct ProjectEvent {
    pub step: u64,
    pub initiator: usize,
    pub contacted: usize,
    pub accepted: usize,
    pub total_committed: f64,
    pub status: ProjectStatus,
    pub return_value: Option<f64>,
}

/// Immutable copy of the observable state at one step.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub step: u64,
    pub investor_budgets: Vec<f64>,
    pub initiator_budgets: Vec<f64>,
    pub investor_reputation: Vec<f64>,
    pub initiator_reputation: Vec<f64>,
    /// Strictly positive decision weights as (investor, initiator, weight).
    pub edges: Vec<(usize, usize, f64)>,
}

/// Live simulation state. Generic over the random stream so tests can script
/// the draws; ordinary runs use the seeded default generator.
#[derive(Debug, Clone)]
pub struct SimState<R: RandomStream = Xoshiro256> {
    pub step: u64,
    investors: Vec<AgentState>,
    initiators: Vec<AgentState>,
    weights: WeightMatrix,
    rng: R,
    next_project_id: u64,
    behavior: BehaviorParams,
    decay_factor: f64,
}

impl SimState<Xoshiro256> {
    pub fn new(config: &SimConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        Ok(Self::with_rng(config, Xoshiro256::seed_from_u64(config.rng_seed)))
    }
}

impl<R: RandomStream> SimState<R> {
    /// Build a state around a caller-supplied random stream. The config is
    /// assumed valid; `new` is the checked entry point.
    pub fn with_rng(config: &SimConfig, rng: R) -> Self {
        let investor = AgentState::new(
            config.initial_budget,
            config.invest_proportion,
            config.income,
            Role::Investor,
        );
        let initiator = AgentState::new(
            config.initial_budget,
            config.invest_proportion,
            config.income,
            Role::Initiator,
        );
        let behavior = config.behavior();
        SimState {
            step: 0,
            investors: vec![investor; config.num_investors],
            initiators: vec![initiator; config.num_initiators],
            weights: WeightMatrix::new(config.num_investors, config.num_initiators),
            rng,
            next_project_id: 0,
            behavior,
            decay_factor: (-behavior.memory).exp(),
        }
    }

    pub fn investors(&self) -> &[AgentState] {
        &self.investors
    }

    pub fn initiators(&self) -> &[AgentState] {
        &self.initiators
    }

    pub fn weights(&self) -> &WeightMatrix {
        &self.weights
    }

    #[cfg(test)]
    pub(crate) fn weights_mut(&mut self) -> &mut WeightMatrix {
        &mut self.weights
    }

    /// Advance one step.
    ///
    /// Draw order is fixed: initiator index, contact permutation, one
    /// acceptance draw per contact, then the project return. After an
    /// eventual settlement the whole weight matrix decays once and the
    /// settled payoffs are deposited. Income is paid through the wealth
    /// update of settling participants; agents outside the settled project
    /// are not touched this step.
    pub fn step(&mut self, config: &SimConfig) -> ProjectEvent {
        let initiator_index = self.rng.index(self.initiators.len());
        let project_id = self.next_project_id;
        self.next_project_id += 1;

        let outcome = form_project(
            &self.investors,
            &self.initiators[initiator_index],
            initiator_index,
            &self.weights,
            config.threshold,
            self.behavior.greediness,
            project_id,
            &mut self.rng,
        )
        .expect("validated state and config");
        let mut project = outcome.project;

        let settlement: Option<Settlement> = if project.status == ProjectStatus::Launched {
            let return_value = self.rng.signed_open01();
            Some(
                settle_project(
                    &mut self.investors,
                    &mut self.initiators[initiator_index],
                    &mut project,
                    return_value,
                )
                .expect("launched project settles"),
            )
        } else {
            None
        };

        self.weights.decay(self.decay_factor);
        if let Some(settlement) = &settlement {
            for deposit in &settlement.deposits {
                self.weights.add(deposit.investor, deposit.initiator, deposit.payoff);
            }
        }

        self.step += 1;
        ProjectEvent {
            step: self.step,
            initiator: initiator_index,
            contacted: outcome.contacted,
            accepted: outcome.accepted,
            total_committed: project.total_committed,
            status: project.status,
            return_value: project.return_value,
        }
    }

    /// Copy out budgets, reputations, and the positive-weight edge list.
    pub fn snapshot(&self) -> Snapshot {
        let report = reputation_report(&self.weights);
        Snapshot {
            step: self.step,
            investor_budgets: self.investors.iter().map(|a| a.budget).collect(),
            initiator_budgets: self.initiators.iter().map(|a| a.budget).collect(),
            investor_reputation: report.investor_reputation,
            initiator_reputation: report.initiator_reputation,
            edges: self.weights.positive_entries().collect(),
        }
    }
}

/// Everything a buffered run produces.
#[derive(Debug)]
pub struct RunOutput {
    pub snapshots: Vec<Snapshot>,
    pub events: Vec<ProjectEvent>,
    pub final_state: SimState,
}

/// Run to completion, streaming events and snapshots to the callbacks.
///
/// A snapshot is emitted every `snapshot_every` steps and at the final step
/// (for a zero-step run that is the initial state). Identical config and seed
/// give identical callback sequences.
pub fn run_with<E>(
    config: &SimConfig,
    mut on_event: impl FnMut(&ProjectEvent) -> Result<(), E>,
    mut on_snapshot: impl FnMut(&Snapshot) -> Result<(), E>,
) -> Result<SimState, RunError<E>> {
    config.validate().map_err(RunError::Config)?;
    let mut state = SimState::new(config).map_err(RunError::Config)?;
    for _ in 0..config.num_steps {
        let event = state.step(config);
        on_event(&event).map_err(RunError::Sink)?;
        if state.step % config.snapshot_every == 0 && state.step != config.num_steps {
            on_snapshot(&state.snapshot()).map_err(RunError::Sink)?;
        }
    }
    on_snapshot(&state.snapshot()).map_err(RunError::Sink)?;
    Ok(state)
}

/// Buffered convenience wrapper around [`run_with`].
pub fn run(config: &SimConfig) -> Result<RunOutput, RunError<io::Error>> {
    let mut snapshots = Vec::new();
    let mut events = Vec::new();
    let final_state = run_with::<io::Error>(
        config,
        |event| {
            events.push(event.clone());
            Ok(())
        },
        |snapshot| {
            snapshots.push(snapshot.clone());
            Ok(())
        },
    )?;
    Ok(RunOutput { snapshots, events, final_state })
}

#[derive(Debug)]
pub enum RunError<E> {
    Config(ConfigError),
    Sink(E),
}

impl<E: fmt::Display> fmt::Display for RunError<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "invalid config: {e}"),
            RunError::Sink(e) => write!(f, "output failed: {e}"),
        }
    }
}

impl<E: fmt::Debug + fmt::Display> std::error::Error for RunError<E> {}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomStream;
    use std::collections::VecDeque;

    fn desk_config() -> SimConfig {
        SimConfig {
            num_investors: 40,
            num_initiators: 4,
            num_steps: 400,
            threshold: 2.0,
            snapshot_every: 100,
            rng_seed: 99,
            ..SimConfig::default()
        }
    }

    /// Identity permutation, scripted open01 draws.
    struct Scripted {
        draws: VecDeque<f64>,
    }

    impl RandomStream for Scripted {
        fn index(&mut self, bound: usize) -> usize {
            bound - 1
        }
        fn open01(&mut self) -> f64 {
            self.draws.pop_front().expect("scripted stream exhausted")
        }
    }

    #[test]
    fn zero_steps_gives_single_initial_snapshot() {
        let config = SimConfig { num_steps: 0, num_investors: 5, num_initiators: 2, ..SimConfig::default() };
        let out = run(&config).unwrap();
        assert_eq!(out.snapshots.len(), 1);
        assert_eq!(out.events.len(), 0);
        let snap = &out.snapshots[0];
        assert_eq!(snap.step, 0);
        assert!(snap.edges.is_empty());
        assert!(snap.investor_budgets.iter().all(|&b| b == 1.0));
        assert!(snap.initiator_budgets.iter().all(|&b| b == 1.0));
    }

    #[test]
    fn same_seed_same_run() {
        let config = desk_config();
        let a = run(&config).unwrap();
        let b = run(&config).unwrap();
        assert_eq!(a.snapshots.len(), b.snapshots.len());
        for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
            assert_eq!(sa.investor_budgets, sb.investor_budgets);
            assert_eq!(sa.initiator_budgets, sb.initiator_budgets);
            assert_eq!(sa.edges, sb.edges);
        }
        for (ea, eb) in a.events.iter().zip(&b.events) {
            assert_eq!(ea.initiator, eb.initiator);
            assert_eq!(ea.contacted, eb.contacted);
            assert_eq!(ea.total_committed, eb.total_committed);
        }
    }

    #[test]
    fn degenerate_config_freezes_everything() {
        // q = 0 and income = 0 with a positive threshold: zero commitments,
        // nothing ever launches, budgets and weights never move.
        let config = SimConfig {
            num_investors: 6,
            num_initiators: 2,
            num_steps: 50,
            threshold: 1.0,
            invest_proportion: 0.0,
            income: 0.0,
            snapshot_every: 50,
            ..SimConfig::default()
        };
        let out = run(&config).unwrap();
        for event in &out.events {
            assert_eq!(event.status, ProjectStatus::Aborted);
            assert_eq!(event.contacted, config.num_investors);
        }
        let snap = out.snapshots.last().unwrap();
        assert!(snap.investor_budgets.iter().all(|&b| b == 1.0));
        assert!(snap.initiator_budgets.iter().all(|&b| b == 1.0));
        assert!(snap.edges.is_empty());
        assert_eq!(out.final_state.weights().grand_total(), 0.0);
    }

    #[test]
    fn short_memory_keeps_only_the_fresh_deposit() {
        // memory = 1000 underflows the decay factor to exactly zero, so after
        // any step each weight equals that step's deposit.
        let config = SimConfig {
            num_investors: 3,
            num_initiators: 1,
            num_steps: 30,
            threshold: 1.4,
            memory: 1000.0,
            rng_seed: 5,
            ..SimConfig::default()
        };
        let mut state = SimState::new(&config).unwrap();
        for _ in 0..config.num_steps {
            let before: Vec<f64> = state.investors().iter().map(|a| a.budget).collect();
            let event = state.step(&config);
            if event.status == ProjectStatus::Settled {
                let r = event.return_value.unwrap();
                for k in 0..3 {
                    let w = state.weights().get(k, 0);
                    if w != 0.0 {
                        let expected = before[k] * config.invest_proportion * r;
                        assert!((w - expected).abs() < 1e-12);
                    }
                }
            } else {
                assert_eq!(state.weights().grand_total(), 0.0);
            }
        }
    }

    #[test]
    fn three_step_closed_form_trace_with_one_investor_one_initiator() {
        // J = 1 means the acceptance probability is identically 1, so each
        // step the lone investor accepts, its stake covers the collection
        // target, and both agents settle: x -> x(1 + r/2) + 1/2.
        let config = SimConfig {
            num_investors: 1,
            num_initiators: 1,
            num_steps: 3,
            threshold: 0.4,
            rng_seed: 0,
            ..SimConfig::default()
        };
        // Draw order per step: initiator index (bound 1, no open01), no
        // permutation draws for n = 1, one acceptance draw, one return draw.
        let returns = [-0.9, -0.8, -0.85];
        let mut draws = Vec::new();
        for r in returns {
            draws.push(0.5); // acceptance; tau = 1 accepts any u
            draws.push((r + 1.0) / 2.0); // return draw maps back to r
        }
        let mut state =
            SimState::with_rng(&config, Scripted { draws: draws.into_iter().collect() });

        let mut expected_budget = 1.0;
        let mut expected_weight = 0.0;
        for r in returns {
            // The investor's stake must keep covering the collection target.
            assert!(expected_budget * 0.5 >= config.threshold);
            let event = state.step(&config);
            assert_eq!(event.accepted, 1);
            let payoff = expected_budget * 0.5 * r;
            expected_budget = expected_budget * (1.0 + 0.5 * r) + 0.5;
            expected_weight = payoff + expected_weight * (-0.1f64).exp();
            assert!((state.investors()[0].budget - expected_budget).abs() < 1e-12);
            assert!((state.initiators()[0].budget - expected_budget).abs() < 1e-12);
            assert!((state.weights().get(0, 0) - expected_weight).abs() < 1e-12);
        }
        // Hand-computed endpoint of the recurrence above.
        assert!((state.investors()[0].budget - 1.14975).abs() < 1e-12);
    }

    #[test]
    fn money_moves_only_through_settlements() {
        let config = desk_config();
        let mut state = SimState::new(&config).unwrap();
        for _ in 0..config.num_steps {
            let before: f64 = state.investors().iter().chain(state.initiators()).map(|a| a.budget).sum();
            let event = state.step(&config);
            let after: f64 = state.investors().iter().chain(state.initiators()).map(|a| a.budget).sum();
            let expected_delta = match event.status {
                ProjectStatus::Settled => {
                    let participants = event.accepted + 1;
                    participants as f64 * config.income
                        + event.return_value.unwrap() * event.total_committed
                }
                _ => 0.0,
            };
            let tol = 1e-6 * before.abs().max(1.0);
            assert!(
                ((after - before) - expected_delta).abs() < tol,
                "step {}: delta {} expected {}",
                event.step,
                after - before,
                expected_delta
            );
        }
    }

    #[test]
    fn budgets_stay_positive_throughout() {
        let config = SimConfig { num_steps: 2000, ..desk_config() };
        let mut state = SimState::new(&config).unwrap();
        for _ in 0..config.num_steps {
            state.step(&config);
            assert!(state.investors().iter().all(|a| a.budget > 0.0));
            assert!(state.initiators().iter().all(|a| a.budget > 0.0));
        }
    }

    #[test]
    fn weights_decay_exactly_when_nothing_launches() {
        // Positive threshold with q = 0 guarantees aborts; preloaded weights
        // must shrink by exactly the decay factor each step.
        let config = SimConfig {
            num_investors: 3,
            num_initiators: 2,
            num_steps: 5,
            threshold: 1.0,
            invest_proportion: 0.0,
            ..SimConfig::default()
        };
        let mut state = SimState::new(&config).unwrap();
        state.weights_mut().set(0, 0, 2.0);
        state.weights_mut().set(2, 1, -3.0);
        let factor = (-config.memory).exp();
        let mut expected_a = 2.0;
        let mut expected_b = -3.0;
        for _ in 0..config.num_steps {
            let event = state.step(&config);
            assert_eq!(event.status, ProjectStatus::Aborted);
            expected_a *= factor;
            expected_b *= factor;
            assert_eq!(state.weights().get(0, 0), expected_a);
            assert_eq!(state.weights().get(2, 1), expected_b);
        }
    }

    #[test]
    fn snapshot_edges_follow_settlement_sign() {
        // One forced settlement: positive return leaves exactly the
        // participant edges, negative return leaves none.
        for (r, expect_edges) in [(0.5, true), (-0.5, false)] {
            let config = SimConfig {
                num_investors: 2,
                num_initiators: 1,
                num_steps: 1,
                threshold: 0.9,
                ..SimConfig::default()
            };
            // tau = 1 for J = 1; both investors must accept to collect 0.9.
            let draws = vec![0.5, 0.5, (r + 1.0) / 2.0];
            let mut state =
                SimState::with_rng(&config, Scripted { draws: draws.into_iter().collect() });
            let event = state.step(&config);
            assert_eq!(event.status, ProjectStatus::Settled);
            let snap = state.snapshot();
            if expect_edges {
                let participants: Vec<usize> = snap.edges.iter().map(|&(k, _, _)| k).collect();
                assert_eq!(participants.len(), event.accepted);
                assert!(snap.edges.iter().all(|&(_, j, w)| j == 0 && w > 0.0));
            } else {
                assert!(snap.edges.is_empty());
            }
        }
    }

    #[test]
    fn reduced_scale_run_emits_expected_snapshots() {
        let config = SimConfig {
            num_investors: 1000,
            num_initiators: 10,
            num_steps: 10_000,
            snapshot_every: 1000,
            rng_seed: 3,
            ..SimConfig::default()
        };
        let out = run(&config).unwrap();
        assert_eq!(out.snapshots.len(), 10);
        assert_eq!(out.snapshots.last().unwrap().step, 10_000);
        assert_eq!(out.events.len(), 10_000);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = SimConfig { num_initiators: 0, ..SimConfig::default() };
        assert!(bad.validate().is_err());
        let bad = SimConfig { invest_proportion: 1.5, ..SimConfig::default() };
        assert!(bad.validate().is_err());
        let bad = SimConfig { memory: -1.0, ..SimConfig::default() };
        assert!(bad.validate().is_err());
        let bad = SimConfig { snapshot_every: 0, ..SimConfig::default() };
        assert!(bad.validate().is_err());
    }
}
