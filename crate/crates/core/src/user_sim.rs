//! Agenda-based simulated user, the episode loop and reward bookkeeping.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::dialog::{
    candidate_actions, candidate_index, dst_update, realize_reply, summarize_state,
    AbstractedAct, Candidate, DialogueState, SummaryAction, SummaryLayout, SummaryState,
    NO_MATCH, OFFER_SLOT,
};
use crate::error::{Error, Result};
use crate::ontology::{ActRole, Constraints, Ontology, DONTCARE};
use crate::SimRng;

pub const SUCCESS_REWARD: f64 = 20.0;
pub const TURN_PENALTY: f64 = -1.0;
pub const DEFAULT_MAX_TURNS: usize = 20;

/// Seeded generator for an independent stream.
pub fn rng_for(seed: u64, stream: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Goal {
    pub constraints: Constraints,
    pub requests: BTreeSet<String>,
}

/// 1-3 constraints and 0-2 requests, slots drawn without replacement.
pub fn sample_goal(ontology: &Ontology, rng: &mut impl Rng) -> Goal {
    let inf: Vec<&String> = ontology.informable_slots().keys().collect();
    assert!(!inf.is_empty(), "goal sampling needs an informable slot");
    let n = rng.random_range(1..=inf.len().min(3));
    let mut constraints = Constraints::new();
    for slot in inf.choose_multiple(rng, n) {
        let values = ontology.values(slot).expect("informable");
        let v = values.choose(rng).expect("validated non-empty");
        constraints.insert((*slot).clone(), v.clone());
    }
    let mut requests = BTreeSet::new();
    if ontology.act_for_role(ActRole::Request).is_some() {
        let req = ontology.requestable_slots();
        let m = rng.random_range(0..=req.len().min(2));
        for s in req.choose_multiple(rng, m) {
            requests.insert(s.clone());
        }
    }
    Goal {
        constraints,
        requests,
    }
}

/// What the user does after an agent reply.
#[derive(Debug, Clone, PartialEq)]
pub enum UserResponse {
    Act(AbstractedAct),
    /// The user leaves. `farewell` is the closing act, if the user spoke one.
    Done {
        success: bool,
        farewell: Option<AbstractedAct>,
    },
}

/// Goal plus the stack of things the user still means to say.
#[derive(Debug, Clone)]
pub struct UserAgenda {
    pub goal: Goal,
    pending_informs: VecDeque<String>,
    pending_requests: VecDeque<String>,
    venue: Option<String>,
    opens_with_hello: bool,
}

impl UserAgenda {
    pub fn new(goal: Goal, rng: &mut impl Rng) -> Self {
        let mut informs: Vec<String> = goal.constraints.keys().cloned().collect();
        informs.shuffle(rng);
        let mut requests: Vec<String> = goal.requests.iter().cloned().collect();
        requests.shuffle(rng);
        UserAgenda {
            goal,
            pending_informs: informs.into(),
            pending_requests: requests.into(),
            venue: None,
            opens_with_hello: rng.random_bool(0.3),
        }
    }

    pub fn venue(&self) -> Option<&str> {
        self.venue.as_deref()
    }

    fn act(&self, ontology: &Ontology, role: ActRole) -> AbstractedAct {
        let idx = ontology
            .act_for_role(role)
            .or_else(|| match role {
                ActRole::Deny | ActRole::Affirm | ActRole::Hello => {
                    ontology.act_for_role(ActRole::Inform)
                }
                _ => None,
            })
            .unwrap_or_else(|| panic!("domain `{}` has no {role} act", ontology.name()));
        AbstractedAct::new(ontology.act_name(idx))
    }

    fn inform(&mut self, ontology: &Ontology, slot: &str) -> AbstractedAct {
        self.pending_informs.retain(|s| s != slot);
        let value = self
            .goal
            .constraints
            .get(slot)
            .map(String::as_str)
            .unwrap_or(DONTCARE);
        self.act(ontology, ActRole::Inform).with(slot, value)
    }

    fn deny(&mut self, ontology: &Ontology, slot: &str) -> AbstractedAct {
        self.pending_informs.retain(|s| s != slot);
        let value = self.goal.constraints[slot].clone();
        self.act(ontology, ActRole::Deny).with(slot, value)
    }

    fn request_next(&self, ontology: &Ontology) -> Option<AbstractedAct> {
        self.pending_requests
            .front()
            .map(|s| self.act(ontology, ActRole::Request).with(s.clone(), ""))
    }

    /// Next item on the agenda when the agent said nothing useful.
    fn nudge(&mut self, ontology: &Ontology) -> AbstractedAct {
        if let Some(slot) = self.pending_informs.front().cloned() {
            return self.inform(ontology, &slot);
        }
        if self.venue.is_some() {
            if let Some(r) = self.request_next(ontology) {
                return r;
            }
        }
        self.act(ontology, ActRole::Hello)
    }

    fn finish(&self, ontology: &Ontology) -> UserResponse {
        UserResponse::Done {
            success: true,
            farewell: Some(self.act(ontology, ActRole::Bye)),
        }
    }

    fn goal_matches(&self, ontology: &Ontology, entity: &str) -> std::result::Result<(), String> {
        let e = ontology.entity(entity).ok_or_else(|| {
            // an unknown entity violates the first constraint
            self.goal.constraints.keys().next().cloned().unwrap_or_default()
        })?;
        match self
            .goal
            .constraints
            .iter()
            .find(|(s, v)| e.value(s) != Some(v.as_str()))
        {
            Some((s, _)) => Err(s.clone()),
            None => Ok(()),
        }
    }

    /// One user turn. `None` asks for the opening utterance.
    pub fn step(&mut self, ontology: &Ontology, agent_reply: Option<&AbstractedAct>) -> UserResponse {
        let Some(reply) = agent_reply else {
            if self.opens_with_hello {
                return UserResponse::Act(self.act(ontology, ActRole::Hello));
            }
            return UserResponse::Act(self.nudge(ontology));
        };
        let Some(role) = ontology.role_of(&reply.act) else {
            return UserResponse::Act(self.nudge(ontology));
        };
        let act = match role {
            ActRole::Bye => {
                return UserResponse::Done {
                    success: false,
                    farewell: None,
                }
            }
            ActRole::Request => match reply.slots().find(|s| ontology.is_informable(s)) {
                Some(slot) => {
                    let slot = slot.to_string();
                    self.inform(ontology, &slot)
                }
                None => self.nudge(ontology),
            },
            ActRole::Confirm => match reply.pairs.first() {
                Some((slot, value)) if ontology.is_informable(slot) => {
                    match self.goal.constraints.get(slot) {
                        Some(v) if v == value => {
                            self.pending_informs.retain(|s| s != slot);
                            self.act(ontology, ActRole::Affirm)
                        }
                        Some(_) => {
                            let slot = slot.clone();
                            self.deny(ontology, &slot)
                        }
                        None => {
                            let slot = slot.clone();
                            self.inform(ontology, &slot)
                        }
                    }
                }
                _ => self.nudge(ontology),
            },
            ActRole::Offer => match reply.value(OFFER_SLOT) {
                Some(NO_MATCH) => {
                    if ontology.matching_entities(&self.goal.constraints).next().is_none() {
                        return self.finish(ontology);
                    }
                    // the agent claimed nothing exists but something does
                    let slot = self
                        .pending_informs
                        .front()
                        .cloned()
                        .or_else(|| self.goal.constraints.keys().next().cloned())
                        .expect("goal has constraints");
                    self.deny(ontology, &slot)
                }
                Some(name) => match self.goal_matches(ontology, name) {
                    Ok(()) => {
                        self.venue = Some(name.to_string());
                        match self.request_next(ontology) {
                            Some(r) => r,
                            None => return self.finish(ontology),
                        }
                    }
                    Err(slot) => {
                        self.venue = None;
                        self.deny(ontology, &slot)
                    }
                },
                None => self.nudge(ontology),
            },
            ActRole::Inform => {
                let answered: Vec<String> = reply
                    .pairs
                    .iter()
                    .filter(|(_, v)| v != NO_MATCH)
                    .map(|(s, _)| s.clone())
                    .collect();
                if self.venue.is_some()
                    && self.pending_requests.iter().any(|r| answered.contains(r))
                {
                    self.pending_requests.retain(|r| !answered.contains(r));
                    match self.request_next(ontology) {
                        Some(r) => r,
                        None => return self.finish(ontology),
                    }
                } else {
                    self.nudge(ontology)
                }
            }
            ActRole::Hello | ActRole::Affirm | ActRole::Deny => self.nudge(ontology),
        };
        UserResponse::Act(act)
    }
}

/// Free function form of [`UserAgenda::step`].
pub fn user_step(
    agenda: &mut UserAgenda,
    ontology: &Ontology,
    agent_reply: Option<&AbstractedAct>,
) -> UserResponse {
    agenda.step(ontology, agent_reply)
}

/// Chooses an agent reply from the candidate list.
pub trait Policy {
    fn choose(
        &self,
        state: &SummaryState,
        candidates: &[Candidate],
        rng: &mut SimRng,
    ) -> Result<SummaryAction>;
}

/// Adapts a closure into a [`Policy`].
pub struct FnPolicy<F>(pub F);

impl<F> Policy for FnPolicy<F>
where
    F: Fn(&SummaryState, &[Candidate], &mut SimRng) -> Result<SummaryAction>,
{
    fn choose(
        &self,
        state: &SummaryState,
        candidates: &[Candidate],
        rng: &mut SimRng,
    ) -> Result<SummaryAction> {
        (self.0)(state, candidates, rng)
    }
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn choose(
        &self,
        state: &SummaryState,
        candidates: &[Candidate],
        rng: &mut SimRng,
    ) -> Result<SummaryAction> {
        (**self).choose(state, candidates, rng)
    }
}

impl<P: Policy + ?Sized> Policy for &P {
    fn choose(
        &self,
        state: &SummaryState,
        candidates: &[Candidate],
        rng: &mut SimRng,
    ) -> Result<SummaryAction> {
        (**self).choose(state, candidates, rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardMode {
    /// Only the episode total is observed.
    #[default]
    TerminalOnly,
    PerTurn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub turn: usize,
    pub user_act: AbstractedAct,
    pub agent_act: AbstractedAct,
    pub state: SummaryState,
    pub action: SummaryAction,
    pub candidate: usize,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub goal: Goal,
    pub turns: Vec<TurnRecord>,
    /// User act that ended the dialogue or was left unanswered at the turn cap.
    pub final_user_act: Option<AbstractedAct>,
    pub total_reward: f64,
    pub success: bool,
    pub length: usize,
}

impl EpisodeLog {
    /// Per-turn rewards: -1 each, plus the success bonus on the last turn.
    pub fn immediate_rewards(&self) -> Vec<f64> {
        let mut r = vec![TURN_PENALTY; self.length];
        if self.success {
            if let Some(last) = r.last_mut() {
                *last += SUCCESS_REWARD;
            }
        }
        r
    }

    /// `sum_{k >= n} r_k` for every turn `n`.
    pub fn returns_to_go(&self) -> Vec<f64> {
        let mut out = self.immediate_rewards();
        for i in (0..out.len().saturating_sub(1)).rev() {
            out[i] += out[i + 1];
        }
        out
    }

    /// User acts in order, including the closing one.
    pub fn user_acts(&self) -> impl Iterator<Item = &AbstractedAct> {
        self.turns
            .iter()
            .map(|t| &t.user_act)
            .chain(self.final_user_act.iter())
    }
}

/// Play one dialogue. The outer `rng` is advanced by exactly two draws, so
/// different policies run on the same seed face the same users.
pub fn run_episode<P: Policy + ?Sized>(
    policy: &P,
    ontology: &Ontology,
    rng: &mut impl RngCore,
    max_turns: usize,
    reward_mode: RewardMode,
) -> Result<EpisodeLog> {
    let mut user_rng = SimRng::seed_from_u64(rng.next_u64());
    let mut policy_rng = SimRng::seed_from_u64(rng.next_u64());
    let candidates = candidate_actions(ontology);
    let goal = sample_goal(ontology, &mut user_rng);
    let mut agenda = UserAgenda::new(goal.clone(), &mut user_rng);

    let mut state = DialogueState::new(ontology);
    let mut prev_reply: Option<AbstractedAct> = None;
    let mut user_act = match agenda.step(ontology, None) {
        UserResponse::Act(a) => a,
        UserResponse::Done { .. } => unreachable!("users always open"),
    };
    let mut turns = Vec::new();
    let mut success = false;
    let mut final_user_act = None;

    for turn in 1..=max_turns {
        state = dst_update(&state, prev_reply.as_ref(), &user_act, ontology);
        let h = summarize_state(&state, ontology);
        let y = policy.choose(&h, &candidates, &mut policy_rng)?;
        let idx = candidate_index(&candidates, &y).ok_or_else(|| {
            Error::ContractViolation(format!("action {:?} is not a candidate", y.0))
        })?;
        let reply = realize_reply(&candidates[idx], &state, ontology);
        turns.push(TurnRecord {
            turn,
            user_act: user_act.clone(),
            agent_act: reply.clone(),
            state: h,
            action: y,
            candidate: idx,
            reward: 0.0,
        });
        match agenda.step(ontology, Some(&reply)) {
            UserResponse::Act(a) => {
                user_act = a;
                prev_reply = Some(reply);
                if turn == max_turns {
                    final_user_act = Some(user_act.clone());
                }
            }
            UserResponse::Done {
                success: s,
                farewell,
            } => {
                success = s;
                final_user_act = farewell;
                break;
            }
        }
    }

    let length = turns.len();
    let mut log = EpisodeLog {
        goal,
        turns,
        final_user_act,
        total_reward: TURN_PENALTY * length as f64 + if success { SUCCESS_REWARD } else { 0.0 },
        success,
        length,
    };
    if reward_mode == RewardMode::PerTurn {
        let r = log.immediate_rewards();
        for (t, r) in log.turns.iter_mut().zip(r) {
            t.reward = r;
        }
    }
    Ok(log)
}

/// Hand-written policy that knows the task: answer open requests, offer once
/// the search is narrow or fully specified, otherwise ask for the next
/// unconstrained informable slot.
#[derive(Debug, Clone)]
pub struct OraclePolicy {
    layout: SummaryLayout,
    n_informable: usize,
    offer: usize,
    request_for: BTreeMap<usize, usize>,
    inform_for: BTreeMap<usize, usize>,
}

impl OraclePolicy {
    pub fn new(ontology: &Ontology) -> Result<Self> {
        let cands = candidate_actions(ontology);
        let find_role = |role: ActRole| {
            cands
                .iter()
                .enumerate()
                .filter(move |(_, c)| ontology.role(c.act) == role)
        };
        let offer = find_role(ActRole::Offer)
            .map(|(i, _)| i)
            .next()
            .ok_or_else(|| Error::Config("oracle needs an offer act".into()))?;
        let request_for = find_role(ActRole::Request)
            .filter_map(|(i, c)| c.slot.map(|s| (s, i)))
            .collect();
        let inform_for = find_role(ActRole::Inform)
            .filter_map(|(i, c)| c.slot.map(|s| (s, i)))
            .collect();
        Ok(OraclePolicy {
            layout: SummaryLayout::of(ontology),
            n_informable: ontology.n_informable(),
            offer,
            request_for,
            inform_for,
        })
    }

    pub fn choose_index(&self, state: &[f64]) -> usize {
        let l = &self.layout;
        let requested = &state[l.request_range()];
        if let Some(i) = requested
            .iter()
            .enumerate()
            .find(|(s, &v)| v > 0.5 && self.inform_for.contains_key(s))
            .map(|(s, _)| self.inform_for[&s])
        {
            return i;
        }
        let narrow = state[0] > 0.5 || state[1] > 0.5;
        let constrained = &state[l.constraint_range()];
        let next_unconstrained = (0..self.n_informable)
            .find(|&s| constrained[s] < 0.5 && self.request_for.contains_key(&s));
        match next_unconstrained {
            Some(s) if !narrow => self.request_for[&s],
            _ => self.offer,
        }
    }
}

impl Policy for OraclePolicy {
    fn choose(
        &self,
        state: &SummaryState,
        candidates: &[Candidate],
        _rng: &mut SimRng,
    ) -> Result<SummaryAction> {
        Ok(candidates[self.choose_index(state)].action.clone())
    }
}

/// Uniformly random candidate.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomPolicy;

impl Policy for RandomPolicy {
    fn choose(
        &self,
        _state: &SummaryState,
        candidates: &[Candidate],
        rng: &mut SimRng,
    ) -> Result<SummaryAction> {
        candidates
            .choose(rng)
            .map(|c| c.action.clone())
            .ok_or(Error::Empty("candidate list"))
    }
}

/// Wraps a policy with uniform exploration.
#[derive(Debug, Clone)]
pub struct EpsilonPolicy<P> {
    pub inner: P,
    pub epsilon: f64,
}

impl<P: Policy> Policy for EpsilonPolicy<P> {
    fn choose(
        &self,
        state: &SummaryState,
        candidates: &[Candidate],
        rng: &mut SimRng,
    ) -> Result<SummaryAction> {
        if rng.random::<f64>() < self.epsilon {
            RandomPolicy.choose(state, candidates, rng)
        } else {
            self.inner.choose(state, candidates, rng)
        }
    }
}

/// One JSONL line of an episode log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnLine {
    pub episode: usize,
    pub turn: usize,
    pub user_act: String,
    pub agent_act: String,
    pub summary_state: Vec<f64>,
    pub summary_action: Vec<f64>,
    pub reward: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<Goal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<Outcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub total_reward: f64,
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_user_act: Option<String>,
}

pub fn logs_to_jsonl(logs: &[EpisodeLog]) -> String {
    let mut out = String::new();
    for (e, log) in logs.iter().enumerate() {
        let n = log.turns.len();
        for (i, t) in log.turns.iter().enumerate() {
            let line = TurnLine {
                episode: e,
                turn: t.turn,
                user_act: t.user_act.to_string(),
                agent_act: t.agent_act.to_string(),
                summary_state: t.state.0.clone(),
                summary_action: t.action.0.clone(),
                reward: t.reward,
                goal: (i == 0).then(|| log.goal.clone()),
                outcome: (i + 1 == n).then(|| Outcome {
                    total_reward: log.total_reward,
                    success: log.success,
                    final_user_act: log.final_user_act.as_ref().map(|a| a.to_string()),
                }),
            };
            out.push_str(&serde_json::to_string(&line).expect("serializable"));
            out.push('\n');
        }
    }
    out
}

/// Rebuild episode logs from JSONL; candidate indices are recovered against
/// `ontology`.
pub fn logs_from_jsonl(text: &str, ontology: &Ontology) -> Result<Vec<EpisodeLog>> {
    let candidates = candidate_actions(ontology);
    let mut logs: Vec<EpisodeLog> = Vec::new();
    let mut current: Option<(usize, EpisodeLog)> = None;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let l: TurnLine = serde_json::from_str(line)
            .map_err(|e| Error::parse(format!("episode log line {}", lineno + 1), e))?;
        if current.as_ref().is_some_and(|(e, _)| *e != l.episode) {
            return Err(Error::Schema(format!(
                "episode {} ends without an outcome",
                current.unwrap().0
            )));
        }
        let candidate = candidate_index(&candidates, &l.summary_action).ok_or_else(|| {
            Error::Schema(format!("line {}: action is not a candidate", lineno + 1))
        })?;
        let (_, log) = current.get_or_insert_with(|| {
            (
                l.episode,
                EpisodeLog {
                    goal: Goal {
                        constraints: Constraints::new(),
                        requests: BTreeSet::new(),
                    },
                    turns: Vec::new(),
                    final_user_act: None,
                    total_reward: 0.0,
                    success: false,
                    length: 0,
                },
            )
        });
        if let Some(g) = l.goal {
            log.goal = g;
        }
        log.turns.push(TurnRecord {
            turn: l.turn,
            user_act: l.user_act.parse()?,
            agent_act: l.agent_act.parse()?,
            state: SummaryState(l.summary_state),
            action: SummaryAction(l.summary_action),
            candidate,
            reward: l.reward,
        });
        if let Some(o) = l.outcome {
            let (_, mut log) = current.take().unwrap();
            log.total_reward = o.total_reward;
            log.success = o.success;
            log.final_user_act = o.final_user_act.map(|a| a.parse()).transpose()?;
            log.length = log.turns.len();
            logs.push(log);
        }
    }
    if let Some((e, _)) = current {
        return Err(Error::Schema(format!("episode {e} ends without an outcome")));
    }
    Ok(logs)
}
