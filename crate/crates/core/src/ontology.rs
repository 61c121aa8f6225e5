//! Dialogue domain definitions: speech acts, slots, values and the entity
//! database, loaded from JSON.
//!
//! Index positions are fixed by file order. Informable slots come first in
//! the global slot layout, followed by requestable slots, so slot `i` of the
//! summary vectors is `ontology.slot_name(i)`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reserved value a user gives for an informable slot they have no preference on.
pub const DONTCARE: &str = "dontcare";

/// Semantic role of a speech act. Domains may rename their acts freely; the
/// simulator and tracker only ever reason about roles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActRole {
    Hello,
    Inform,
    Request,
    Confirm,
    Affirm,
    Deny,
    Offer,
    Bye,
}

impl ActRole {
    pub const ALL: [ActRole; 8] = [
        ActRole::Hello,
        ActRole::Inform,
        ActRole::Request,
        ActRole::Confirm,
        ActRole::Affirm,
        ActRole::Deny,
        ActRole::Offer,
        ActRole::Bye,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActRole::Hello => "hello",
            ActRole::Inform => "inform",
            ActRole::Request => "request",
            ActRole::Confirm => "confirm",
            ActRole::Affirm => "affirm",
            ActRole::Deny => "deny",
            ActRole::Offer => "offer",
            ActRole::Bye => "bye",
        }
    }
}

impl fmt::Display for ActRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActRole {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ActRole::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::Unknown {
                kind: "act role",
                name: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub name: String,
    #[serde(flatten)]
    pub values: BTreeMap<String, String>,
}

impl Entity {
    pub fn value(&self, slot: &str) -> Option<&str> {
        self.values.get(slot).map(String::as_str)
    }
}

/// User constraints keyed by informable slot name.
pub type Constraints = BTreeMap<String, String>;

/// On-disk layout of an ontology file.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct OntologyFile {
    name: String,
    speech_acts: Vec<String>,
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    act_roles: IndexMap<String, ActRole>,
    informable_slots: IndexMap<String, Vec<String>>,
    requestable_slots: Vec<String>,
    entities: Vec<Entity>,
}

#[derive(Debug, Clone)]
pub struct Ontology {
    name: String,
    speech_acts: Vec<String>,
    roles: Vec<ActRole>,
    informable: IndexMap<String, Vec<String>>,
    requestable: Vec<String>,
    entities: Vec<Entity>,
    act_index: HashMap<String, usize>,
    slot_index: HashMap<String, usize>,
}

impl PartialEq for Ontology {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.speech_acts == other.speech_acts
            && self.roles == other.roles
            && self.informable == other.informable
            && self.requestable == other.requestable
            && self.entities == other.entities
    }
}

pub fn load_ontology(path: impl AsRef<Path>) -> Result<Ontology> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ontology::from_json(&text).map_err(|e| match e {
        Error::Parse { source, .. } => Error::parse(path.display().to_string(), source),
        other => other,
    })
}

impl Ontology {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: OntologyFile =
            serde_json::from_str(text).map_err(|e| Error::parse("ontology", e))?;
        Self::from_file(file)
    }

    pub fn to_json(&self) -> String {
        let file = OntologyFile {
            name: self.name.clone(),
            speech_acts: self.speech_acts.clone(),
            act_roles: self
                .speech_acts
                .iter()
                .zip(&self.roles)
                .filter(|(a, r)| a.as_str() != r.as_str())
                .map(|(a, r)| (a.clone(), *r))
                .collect(),
            informable_slots: self.informable.clone(),
            requestable_slots: self.requestable.clone(),
            entities: self.entities.clone(),
        };
        serde_json::to_string_pretty(&file).expect("ontology serializes")
    }

    fn from_file(file: OntologyFile) -> Result<Self> {
        let mut act_index = HashMap::new();
        let mut roles = Vec::with_capacity(file.speech_acts.len());
        for (i, act) in file.speech_acts.iter().enumerate() {
            if act_index.insert(act.clone(), i).is_some() {
                return Err(Error::Schema(format!("duplicate speech act `{act}`")));
            }
            let role = match file.act_roles.get(act) {
                Some(r) => *r,
                None => act.parse().map_err(|_| {
                    Error::Schema(format!(
                        "speech act `{act}` has no role; add it to `act_roles`"
                    ))
                })?,
            };
            roles.push(role);
        }
        for act in file.act_roles.keys() {
            if !act_index.contains_key(act) {
                return Err(Error::Schema(format!("role given for unknown act `{act}`")));
            }
        }
        if file.speech_acts.is_empty() {
            return Err(Error::Schema("no speech acts".into()));
        }

        let mut slot_index = HashMap::new();
        let slot_names = file
            .informable_slots
            .keys()
            .chain(file.requestable_slots.iter());
        for (i, slot) in slot_names.enumerate() {
            if slot == "name" {
                return Err(Error::Schema("`name` is reserved and cannot be a slot".into()));
            }
            if slot_index.insert(slot.clone(), i).is_some() {
                return Err(Error::Schema(format!("duplicate slot `{slot}`")));
            }
        }
        for (slot, values) in &file.informable_slots {
            let mut seen = HashSet::new();
            for v in values {
                if v == DONTCARE {
                    return Err(Error::Schema(format!(
                        "slot `{slot}` uses reserved value `{DONTCARE}`"
                    )));
                }
                if !seen.insert(v) {
                    return Err(Error::Schema(format!("slot `{slot}` repeats value `{v}`")));
                }
            }
            if values.is_empty() {
                return Err(Error::Schema(format!("slot `{slot}` has no values")));
            }
        }

        let mut names = HashSet::new();
        for e in &file.entities {
            if !names.insert(&e.name) {
                return Err(Error::Schema(format!("duplicate entity `{}`", e.name)));
            }
            for key in e.values.keys() {
                if !slot_index.contains_key(key) {
                    return Err(Error::Schema(format!(
                        "entity `{}` has unknown slot `{key}`",
                        e.name
                    )));
                }
            }
            for (slot, values) in &file.informable_slots {
                match e.values.get(slot) {
                    Some(v) if values.contains(v) => {}
                    Some(v) => {
                        return Err(Error::Schema(format!(
                            "entity `{}` has unknown value `{v}` for slot `{slot}`",
                            e.name
                        )))
                    }
                    None => {
                        return Err(Error::Schema(format!(
                            "entity `{}` lacks slot `{slot}`",
                            e.name
                        )))
                    }
                }
            }
            for slot in &file.requestable_slots {
                if !e.values.contains_key(slot) {
                    return Err(Error::Schema(format!(
                        "entity `{}` lacks slot `{slot}`",
                        e.name
                    )));
                }
            }
        }

        Ok(Ontology {
            name: file.name,
            speech_acts: file.speech_acts,
            roles,
            informable: file.informable_slots,
            requestable: file.requestable_slots,
            entities: file.entities,
            act_index,
            slot_index,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn speech_acts(&self) -> &[String] {
        &self.speech_acts
    }

    pub fn n_acts(&self) -> usize {
        self.speech_acts.len()
    }

    pub fn act_name(&self, i: usize) -> &str {
        &self.speech_acts[i]
    }

    pub fn act_index(&self, act: &str) -> Option<usize> {
        self.act_index.get(act).copied()
    }

    pub fn role(&self, act: usize) -> ActRole {
        self.roles[act]
    }

    pub fn role_of(&self, act: &str) -> Option<ActRole> {
        self.act_index(act).map(|i| self.roles[i])
    }

    /// First act carrying `role`, if the domain has one.
    pub fn act_for_role(&self, role: ActRole) -> Option<usize> {
        self.roles.iter().position(|&r| r == role)
    }

    pub fn informable_slots(&self) -> &IndexMap<String, Vec<String>> {
        &self.informable
    }

    pub fn requestable_slots(&self) -> &[String] {
        &self.requestable
    }

    pub fn n_informable(&self) -> usize {
        self.informable.len()
    }

    pub fn n_requestable(&self) -> usize {
        self.requestable.len()
    }

    /// |informable| + |requestable|.
    pub fn n_slots(&self) -> usize {
        self.informable.len() + self.requestable.len()
    }

    pub fn slot_name(&self, i: usize) -> &str {
        if i < self.informable.len() {
            self.informable.get_index(i).map(|(k, _)| k.as_str()).unwrap()
        } else {
            &self.requestable[i - self.informable.len()]
        }
    }

    pub fn slot_names(&self) -> impl Iterator<Item = &str> {
        (0..self.n_slots()).map(|i| self.slot_name(i))
    }

    pub fn slot_index(&self, slot: &str) -> Option<usize> {
        self.slot_index.get(slot).copied()
    }

    pub fn is_informable(&self, slot: &str) -> bool {
        self.informable.contains_key(slot)
    }

    pub fn is_requestable(&self, slot: &str) -> bool {
        self.slot_index(slot)
            .is_some_and(|i| i >= self.informable.len())
    }

    pub fn values(&self, slot: &str) -> Option<&[String]> {
        self.informable.get(slot).map(Vec::as_slice)
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn entity(&self, name: &str) -> Option<&Entity> {
        self.entities.iter().find(|e| e.name == name)
    }

    fn check_constraints(&self, constraints: &Constraints) -> Result<()> {
        for (slot, value) in constraints {
            let values = self.informable.get(slot).ok_or_else(|| {
                Error::InvalidConstraint(format!("`{slot}` is not an informable slot"))
            })?;
            if value != DONTCARE && !values.contains(value) {
                return Err(Error::InvalidConstraint(format!(
                    "`{value}` is not a value of `{slot}`"
                )));
            }
        }
        Ok(())
    }

    /// Entities satisfying every constraint, in database order.
    pub fn matching_entities<'a>(
        &'a self,
        constraints: &'a Constraints,
    ) -> impl Iterator<Item = &'a Entity> + 'a {
        self.entities.iter().filter(move |e| {
            constraints
                .iter()
                .all(|(s, v)| v == DONTCARE || e.value(s) == Some(v.as_str()))
        })
    }

    pub fn count_matches(&self, constraints: &Constraints) -> Result<usize> {
        self.check_constraints(constraints)?;
        Ok(self.matching_entities(constraints).count())
    }

    /// Shannon entropy of the slot's value distribution over the database,
    /// divided by `ln |values|`.
    pub fn normalized_slot_entropy(&self, slot: &str) -> Result<f64> {
        let values = self.informable.get(slot).ok_or_else(|| Error::Unknown {
            kind: "informable slot",
            name: slot.to_string(),
        })?;
        if self.entities.is_empty() {
            return Err(Error::Empty("entity database"));
        }
        if values.len() == 1 {
            return Ok(0.0);
        }
        let mut counts = vec![0usize; values.len()];
        for e in &self.entities {
            let v = e.value(slot).expect("validated entity");
            let i = values.iter().position(|x| x == v).expect("validated value");
            counts[i] += 1;
        }
        let n = self.entities.len() as f64;
        let h: f64 = counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.ln()
            })
            .sum();
        Ok(h / (values.len() as f64).ln())
    }
}

/// Ground-truth correspondence between a target and a source domain.
/// A `null` entry marks a target act or slot with no counterpart.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AliasTable {
    pub acts: IndexMap<String, Option<String>>,
    pub slots: IndexMap<String, Option<String>>,
}

pub fn load_alias(path: impl AsRef<Path>) -> Result<AliasTable> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))
}
