//! Reinforcement-learning beam scheduler: detection-count state, detection-probability
//! reward, tabular SARSA with epsilon-greedy exploration, and the fixed baseline policies.

use std::fmt::Write as _;

use rand::Rng;

use crate::detector::StatisticVector;
use crate::error::{Error, Result};

/// SARSA hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentConfig {
    pub learning_rate: f64,
    pub discount: f64,
    pub epsilon: f64,
    pub epsilon_final: f64,
    /// CPIs over which epsilon decays linearly to `epsilon_final`; 0 keeps it fixed.
    pub epsilon_decay_cpis: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            learning_rate: 0.5,
            discount: 0.8,
            epsilon: 0.1,
            epsilon_final: 0.01,
            epsilon_decay_cpis: 0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Validation(format!(
                "learning_rate must lie in (0,1], got {}",
                self.learning_rate
            )));
        }
        for (name, v) in [
            ("discount", self.discount),
            ("epsilon", self.epsilon),
            ("epsilon_final", self.epsilon_final),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Validation(format!("{name} must lie in [0,1], got {v}")));
            }
        }
        Ok(())
    }

    /// Exploration rate in force at CPI `p`.
    pub fn epsilon_at(&self, p: usize) -> f64 {
        if self.epsilon_decay_cpis == 0 {
            return self.epsilon;
        }
        let frac = (p as f64 / self.epsilon_decay_cpis as f64).min(1.0);
        self.epsilon + (self.epsilon_final - self.epsilon) * frac
    }
}

/// Number of detections, clamped to `T_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RlState {
    pub s: usize,
}

/// Number of illuminated bins and which ones; `a = 0` is the orthogonal beam.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RlAction {
    pub a: usize,
    pub bins: Vec<usize>,
}

impl RlAction {
    pub fn orthogonal() -> Self {
        RlAction { a: 0, bins: Vec::new() }
    }

    /// Action pointing at `bins`.
    pub fn toward(mut bins: Vec<usize>) -> Self {
        bins.sort_unstable();
        bins.dedup();
        RlAction { a: bins.len(), bins }
    }
}

/// Action values over `(state, action)`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    pub q: Vec<f64>,
    pub n_states: usize,
    pub n_actions: usize,
    pub learning_rate: f64,
    pub discount: f64,
    pub epsilon: f64,
}

impl QTable {
    /// Zero table for states `0..=t_max` and actions `0..=b_max`.
    pub fn new(t_max: usize, b_max: usize, cfg: &AgentConfig) -> Self {
        QTable {
            q: vec![0.0; (t_max + 1) * (b_max + 1)],
            n_states: t_max + 1,
            n_actions: b_max + 1,
            learning_rate: cfg.learning_rate,
            discount: cfg.discount,
            epsilon: cfg.epsilon,
        }
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.q[s * self.n_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, value: f64) {
        self.q[s * self.n_actions + a] = value;
    }

    pub fn b_max(&self) -> usize {
        self.n_actions - 1
    }

    /// Greedy action for `s`; ties go to the smallest action.
    pub fn greedy(&self, s: usize) -> usize {
        let row = &self.q[s * self.n_actions..(s + 1) * self.n_actions];
        let mut best = 0;
        for (a, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = a;
            }
        }
        best
    }

    /// Plain-text checkpoint: a header line followed by one row per state.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# qtable states={} actions={} learning_rate={} discount={} epsilon={}\n",
            self.n_states, self.n_actions, self.learning_rate, self.discount, self.epsilon
        );
        for s in 0..self.n_states {
            let row: Vec<String> = (0..self.n_actions).map(|a| self.get(s, a).to_string()).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "empty checkpoint"))?;
        let header = header
            .strip_prefix("# qtable")
            .ok_or_else(|| Error::parse(1, "missing '# qtable' header"))?;
        let field = |name: &str| -> Result<f64> {
            header
                .split_whitespace()
                .find_map(|kv| kv.strip_prefix(name).and_then(|r| r.strip_prefix('=')))
                .ok_or_else(|| Error::parse(1, format!("header lacks '{name}'")))?
                .parse::<f64>()
                .map_err(|_| Error::parse(1, format!("bad '{name}' in header")))
        };
        let n_states = field("states")? as usize;
        let n_actions = field("actions")? as usize;
        let learning_rate = field("learning_rate")?;
        let discount = field("discount")?;
        let epsilon = field("epsilon")?;
        let mut q = Vec::with_capacity(n_states * n_actions);
        let mut rows = 0;
        for (i, line) in lines {
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| Error::parse(i + 1, format!("bad entry '{t}'"))))
                .collect::<Result<_>>()?;
            if row.len() != n_actions {
                return Err(Error::parse(i + 1, format!("expected {n_actions} entries, got {}", row.len())));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::parse(i + 1, "non-finite entry"));
            }
            q.extend(row);
            rows += 1;
        }
        if rows != n_states || n_states == 0 || n_actions == 0 {
            return Err(Error::Validation(format!("expected {n_states} rows, got {rows}")));
        }
        Ok(QTable { q, n_states, n_actions, learning_rate, discount, epsilon })
    }
}

/// `min(#{l : lambda_l >= threshold}, t_max)`.
pub fn extract_state(stat: &StatisticVector, t_max: usize) -> RlState {
    RlState { s: stat.decisions.iter().filter(|&&d| d).count().min(t_max) }
}

/// Sum of estimated detection probabilities over detected bins minus the sum over the rest.
pub fn compute_reward(stat: &StatisticVector, detected_bins: &[usize]) -> f64 {
    let mut inside = vec![false; stat.pd_estimates.len()];
    for &b in detected_bins {
        inside[b] = true;
    }
    stat.pd_estimates
        .iter()
        .zip(&inside)
        .map(|(&p, &d)| if d { p } else { -p })
        .sum()
}

/// The `a` bins with the largest statistic; ties go to the lower index. Returned ascending.
pub fn top_bins(lambda: &[f64], a: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..lambda.len()).collect();
    idx.sort_by(|&i, &j| lambda[j].total_cmp(&lambda[i]).then(i.cmp(&j)));
    idx.truncate(a);
    idx.sort_unstable();
    idx
}

/// Epsilon-greedy choice of the bin count, then the strongest bins of the current CPI.
pub fn select_action_sarsa<R: Rng + ?Sized>(
    qt: &QTable,
    state: RlState,
    stat: &StatisticVector,
    rng: &mut R,
) -> RlAction {
    // Draw unconditionally so the stream position does not depend on epsilon.
    let explore = rng.random::<f64>() < qt.epsilon;
    let uniform = rng.random_range(0..qt.n_actions);
    let a = if explore { uniform } else { qt.greedy(state.s) };
    RlAction { a, bins: top_bins(&stat.lambda, a) }
}

/// `q[s,a] += lr * (r + discount * q[s',a'] - q[s,a])`.
pub fn update_sarsa(qt: &mut QTable, s: RlState, a: &RlAction, r: f64, s_next: RlState, a_next: &RlAction) {
    let cur = qt.get(s.s, a.a);
    let target = r + qt.discount * qt.get(s_next.s, a_next.a);
    qt.set(s.s, a.a, cur + qt.learning_rate * (target - cur));
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyKind {
    Optimal,
    Orthogonal,
    Adaptive,
    Scanning,
    Sarsa,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::Optimal,
        PolicyKind::Orthogonal,
        PolicyKind::Adaptive,
        PolicyKind::Scanning,
        PolicyKind::Sarsa,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Optimal => "optimal",
            PolicyKind::Orthogonal => "orthogonal",
            PolicyKind::Adaptive => "adaptive",
            PolicyKind::Scanning => "scanning",
            PolicyKind::Sarsa => "sarsa",
        }
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Validation(format!("unknown policy '{s}'")))
    }
}

/// What a baseline may look at when choosing the beam for the next CPI.
#[derive(Debug, Clone, Copy)]
pub struct BaselineContext<'a> {
    /// CPI the action will illuminate.
    pub cpi: usize,
    pub n_bins: usize,
    /// Largest number of bins one beam may cover.
    pub max_bins: usize,
    /// Target bins at `cpi` (optimal only).
    pub truth: Option<&'a [usize]>,
    /// Statistics of the CPI just processed (adaptive only).
    pub last: Option<&'a StatisticVector>,
}

/// Non-learning schedulers.
pub fn baseline_policy(kind: PolicyKind, ctx: &BaselineContext) -> Result<RlAction> {
    match kind {
        PolicyKind::Orthogonal => Ok(RlAction::orthogonal()),
        PolicyKind::Scanning => Ok(RlAction::toward(vec![ctx.cpi % ctx.n_bins])),
        PolicyKind::Optimal => {
            let truth = ctx
                .truth
                .ok_or_else(|| Error::Validation("optimal policy needs ground truth".into()))?;
            let mut bins = truth.to_vec();
            bins.truncate(ctx.max_bins);
            Ok(RlAction::toward(bins))
        }
        PolicyKind::Adaptive => match ctx.last {
            None => Ok(RlAction::orthogonal()),
            Some(stat) => {
                let hits = stat.detected_bins().len();
                if hits == 0 {
                    Ok(RlAction::orthogonal())
                } else {
                    Ok(RlAction::toward(top_bins(&stat.lambda, hits.min(ctx.max_bins))))
                }
            }
        },
        PolicyKind::Sarsa => Err(Error::Validation("sarsa is not a baseline policy".into())),
    }
}
