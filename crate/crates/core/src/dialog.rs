//! Abstracted and summary representations of sentences and dialogue states,
//! the rule-based state tracker, and agent candidate enumeration.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ontology::{ActRole, Constraints, Ontology, DONTCARE};

/// Pseudo-slot carried by offers to name the proposed entity.
pub const OFFER_SLOT: &str = "name";
/// Offer value meaning "no entity matches your constraints".
pub const NO_MATCH: &str = "none";

/// Number of match-count buckets: {0, 1, 2-4, >=5}.
pub const N_BUCKETS: usize = 4;

pub fn match_bucket(count: usize) -> usize {
    match count {
        0 => 0,
        1 => 1,
        2..=4 => 2,
        _ => 3,
    }
}

/// A speech act with slot-value pairs; requests carry empty values.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AbstractedAct {
    pub act: String,
    pub pairs: Vec<(String, String)>,
}

impl AbstractedAct {
    pub fn new(act: impl Into<String>) -> Self {
        AbstractedAct {
            act: act.into(),
            pairs: Vec::new(),
        }
    }

    pub fn with(mut self, slot: impl Into<String>, value: impl Into<String>) -> Self {
        self.pairs.push((slot.into(), value.into()));
        self
    }

    pub fn slots(&self) -> impl Iterator<Item = &str> {
        self.pairs.iter().map(|(s, _)| s.as_str())
    }

    pub fn value(&self, slot: &str) -> Option<&str> {
        self.pairs
            .iter()
            .find(|(s, _)| s == slot)
            .map(|(_, v)| v.as_str())
    }
}

impl fmt::Display for AbstractedAct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.act)?;
        for (i, (s, v)) in self.pairs.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            if v.is_empty() {
                f.write_str(s)?;
            } else {
                write!(f, "{s}={v}")?;
            }
        }
        f.write_str(")")
    }
}

impl FromStr for AbstractedAct {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Unknown {
            kind: "act syntax",
            name: s.to_string(),
        };
        let open = s.find('(').ok_or_else(bad)?;
        let body = s[open + 1..].strip_suffix(')').ok_or_else(bad)?;
        let act = s[..open].trim();
        if act.is_empty() {
            return Err(bad());
        }
        let pairs = body
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(|p| match p.split_once('=') {
                Some((k, v)) => (k.trim().to_string(), v.trim().to_string()),
                None => (p.to_string(), String::new()),
            })
            .collect();
        Ok(AbstractedAct {
            act: act.to_string(),
            pairs,
        })
    }
}

/// Accumulated dialogue state after the latest user turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueState {
    pub match_count: usize,
    pub last_user_act: Option<String>,
    pub constraints: Constraints,
    /// Outstanding user requests; cleared when the agent informs the slot.
    pub requests: BTreeSet<String>,
    /// Entity proposed by the agent's most recent offer.
    pub offered: Option<String>,
}

impl DialogueState {
    pub fn new(ontology: &Ontology) -> Self {
        DialogueState {
            match_count: ontology.entities().len(),
            last_user_act: None,
            constraints: Constraints::new(),
            requests: BTreeSet::new(),
            offered: None,
        }
    }
}

/// Dimensions of the summary vectors of one domain.
///
/// State: `[l (4) | a (|A|) | constraint flags (|S|) | request flags (|S|)]`.
/// Action: `[act (|A|) | slot (|S|)]`. Both slot blocks span the full slot
/// inventory so one slot matrix translates every block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryLayout {
    pub n_acts: usize,
    pub n_slots: usize,
}

impl SummaryLayout {
    pub fn of(ontology: &Ontology) -> Self {
        SummaryLayout {
            n_acts: ontology.n_acts(),
            n_slots: ontology.n_slots(),
        }
    }

    pub fn state_dim(&self) -> usize {
        N_BUCKETS + self.n_acts + 2 * self.n_slots
    }

    pub fn action_dim(&self) -> usize {
        self.n_acts + self.n_slots
    }

    pub fn input_dim(&self) -> usize {
        self.state_dim() + self.action_dim()
    }

    pub fn bucket_range(&self) -> std::ops::Range<usize> {
        0..N_BUCKETS
    }

    pub fn user_act_range(&self) -> std::ops::Range<usize> {
        N_BUCKETS..N_BUCKETS + self.n_acts
    }

    pub fn constraint_range(&self) -> std::ops::Range<usize> {
        let start = N_BUCKETS + self.n_acts;
        start..start + self.n_slots
    }

    pub fn request_range(&self) -> std::ops::Range<usize> {
        let start = N_BUCKETS + self.n_acts + self.n_slots;
        start..start + self.n_slots
    }

    pub fn act_range(&self) -> std::ops::Range<usize> {
        0..self.n_acts
    }

    pub fn slot_range(&self) -> std::ops::Range<usize> {
        self.n_acts..self.n_acts + self.n_slots
    }
}

macro_rules! vector_newtype {
    ($name:ident) => {
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub Vec<f64>);

        impl Deref for $name {
            type Target = [f64];

            fn deref(&self) -> &[f64] {
                &self.0
            }
        }

        impl From<Vec<f64>> for $name {
            fn from(v: Vec<f64>) -> Self {
                $name(v)
            }
        }
    };
}

vector_newtype!(SummaryState);
vector_newtype!(SummaryAction);

/// Concatenated `[state; action]` GP input.
pub fn joint_input(state: &[f64], action: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(state.len() + action.len());
    x.extend_from_slice(state);
    x.extend_from_slice(action);
    x
}

fn slot_pairs_of<'a>(act: &'a AbstractedAct) -> impl Iterator<Item = &'a str> {
    act.slots().filter(|s| *s != OFFER_SLOT)
}

/// One-hot act followed by a slot block spread uniformly over the act's
/// slots (all zero for slotless acts).
pub fn summarize_act(act: &AbstractedAct, ontology: &Ontology) -> Result<SummaryAction> {
    let layout = SummaryLayout::of(ontology);
    let a = ontology.act_index(&act.act).ok_or_else(|| Error::Unknown {
        kind: "speech act",
        name: act.act.clone(),
    })?;
    let mut v = vec![0.0; layout.action_dim()];
    v[a] = 1.0;
    let mut slots = BTreeSet::new();
    for s in slot_pairs_of(act) {
        let i = ontology.slot_index(s).ok_or_else(|| Error::Unknown {
            kind: "slot",
            name: s.to_string(),
        })?;
        slots.insert(i);
    }
    if !slots.is_empty() {
        let w = 1.0 / slots.len() as f64;
        for i in slots {
            v[layout.n_acts + i] = w;
        }
    }
    Ok(SummaryAction(v))
}

/// Rule-based tracker: `H_n = DST(H_{n-1}, Y_{n-1}, X_n)`.
pub fn dst_update(
    state: &DialogueState,
    agent_reply: Option<&AbstractedAct>,
    user_act: &AbstractedAct,
    ontology: &Ontology,
) -> DialogueState {
    let mut next = state.clone();

    if let Some(reply) = agent_reply {
        match ontology.role_of(&reply.act) {
            Some(ActRole::Offer) => {
                next.offered = reply
                    .value(OFFER_SLOT)
                    .filter(|v| *v != NO_MATCH)
                    .map(str::to_string);
            }
            Some(ActRole::Inform) => {
                for s in reply.slots() {
                    next.requests.remove(s);
                }
            }
            Some(_) => {}
            None => warn!("tracker ignoring unknown agent act `{}`", reply.act),
        }
    }

    let Some(role) = ontology.role_of(&user_act.act) else {
        warn!("tracker ignoring unknown user act `{}`", user_act.act);
        return next;
    };
    match role {
        ActRole::Inform | ActRole::Deny => {
            for (s, v) in &user_act.pairs {
                add_constraint(&mut next, ontology, s, v);
            }
        }
        ActRole::Request => {
            for s in user_act.slots() {
                if ontology.is_requestable(s) {
                    next.requests.insert(s.to_string());
                } else {
                    warn!("tracker ignoring request for non-requestable `{s}`");
                }
            }
        }
        ActRole::Affirm => {
            // an affirm confirms whatever the agent just proposed
            if let Some(reply) = agent_reply {
                if ontology.role_of(&reply.act) == Some(ActRole::Confirm) {
                    for (s, v) in &reply.pairs {
                        add_constraint(&mut next, ontology, s, v);
                    }
                }
            }
            for (s, v) in &user_act.pairs {
                add_constraint(&mut next, ontology, s, v);
            }
        }
        _ => {}
    }
    next.last_user_act = Some(user_act.act.clone());
    next.match_count = ontology
        .count_matches(&next.constraints)
        .expect("tracker only stores valid constraints");
    next
}

fn add_constraint(state: &mut DialogueState, ontology: &Ontology, slot: &str, value: &str) {
    match ontology.values(slot) {
        Some(values) if value == DONTCARE || values.iter().any(|v| v == value) => {
            state.constraints.insert(slot.to_string(), value.to_string());
        }
        Some(_) => warn!("tracker ignoring unknown value `{value}` for `{slot}`"),
        None => warn!("tracker ignoring non-informable slot `{slot}`"),
    }
}

pub fn summarize_state(state: &DialogueState, ontology: &Ontology) -> SummaryState {
    let layout = SummaryLayout::of(ontology);
    let mut v = vec![0.0; layout.state_dim()];
    v[match_bucket(state.match_count)] = 1.0;
    if let Some(a) = state.last_user_act.as_deref().and_then(|a| ontology.act_index(a)) {
        v[layout.user_act_range().start + a] = 1.0;
    }
    let c0 = layout.constraint_range().start;
    for s in state.constraints.keys() {
        if let Some(i) = ontology.slot_index(s) {
            v[c0 + i] = 1.0;
        }
    }
    let r0 = layout.request_range().start;
    for s in &state.requests {
        if let Some(i) = ontology.slot_index(s) {
            v[r0 + i] = 1.0;
        }
    }
    SummaryState(v)
}

/// An agent reply the policy may choose: an act with at most one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub act: usize,
    pub slot: Option<usize>,
    pub action: SummaryAction,
}

impl Candidate {
    pub fn label(&self, ontology: &Ontology) -> String {
        match self.slot {
            Some(s) => format!("{}({})", ontology.act_name(self.act), ontology.slot_name(s)),
            None => format!("{}()", ontology.act_name(self.act)),
        }
    }
}

/// All role-compatible (act, slot) replies in act-major, slot-minor order.
pub fn candidate_actions(ontology: &Ontology) -> Vec<Candidate> {
    let layout = SummaryLayout::of(ontology);
    let n_inf = ontology.n_informable();
    let mut out = Vec::new();
    for act in 0..ontology.n_acts() {
        let slots: Vec<Option<usize>> = match ontology.role(act) {
            ActRole::Request | ActRole::Confirm => (0..n_inf).map(Some).collect(),
            ActRole::Inform => (n_inf..ontology.n_slots()).map(Some).collect(),
            ActRole::Offer | ActRole::Bye | ActRole::Hello => vec![None],
            ActRole::Affirm | ActRole::Deny => vec![],
        };
        for slot in slots {
            let mut v = vec![0.0; layout.action_dim()];
            v[act] = 1.0;
            if let Some(s) = slot {
                v[layout.n_acts + s] = 1.0;
            }
            out.push(Candidate {
                act,
                slot,
                action: SummaryAction(v),
            });
        }
    }
    out
}

/// Index of `action` in `candidates`, compared exactly.
pub fn candidate_index(candidates: &[Candidate], action: &[f64]) -> Option<usize> {
    candidates.iter().position(|c| c.action.0 == action)
}

/// Turn a chosen candidate into a concrete agent reply against the current
/// state. Offers propose the first entity matching the tracked constraints.
pub fn realize_reply(
    candidate: &Candidate,
    state: &DialogueState,
    ontology: &Ontology,
) -> AbstractedAct {
    let act = ontology.act_name(candidate.act);
    let reply = AbstractedAct::new(act);
    match ontology.role(candidate.act) {
        ActRole::Request => {
            let s = ontology.slot_name(candidate.slot.expect("request has a slot"));
            reply.with(s, "")
        }
        ActRole::Inform => {
            let s = ontology.slot_name(candidate.slot.expect("inform has a slot"));
            let value = state
                .offered
                .as_deref()
                .and_then(|name| ontology.entity(name))
                .and_then(|e| e.value(s))
                .unwrap_or(NO_MATCH);
            reply.with(s, value)
        }
        ActRole::Confirm => {
            let s = ontology.slot_name(candidate.slot.expect("confirm has a slot"));
            let value = state.constraints.get(s).map(String::as_str).unwrap_or(NO_MATCH);
            reply.with(s, value)
        }
        ActRole::Offer => {
            let name = ontology
                .matching_entities(&state.constraints)
                .next()
                .map(|e| e.name.as_str())
                .unwrap_or(NO_MATCH);
            reply.with(OFFER_SLOT, name)
        }
        _ => reply,
    }
}
