use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::lexicon::{Category, Lexicon};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    Agent,
    Patient,
    Action,
    Location,
    Temporal,
    Instrument,
    Source,
    Destination,
    Result,
    Relation,
}

impl Role {
    pub const ALL: [Role; 10] = [
        Role::Agent,
        Role::Patient,
        Role::Action,
        Role::Location,
        Role::Temporal,
        Role::Instrument,
        Role::Source,
        Role::Destination,
        Role::Result,
        Role::Relation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Agent => "Agent",
            Role::Patient => "Patient",
            Role::Action => "Action",
            Role::Location => "Location",
            Role::Temporal => "Temporal",
            Role::Instrument => "Instrument",
            Role::Source => "Source",
            Role::Destination => "Destination",
            Role::Result => "Result",
            Role::Relation => "Relation",
        }
    }

    /// Core participants versus circumstantial adjuncts.
    pub fn is_core(self) -> bool {
        matches!(self, Role::Agent | Role::Patient | Role::Action)
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Role::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::Data(format!("unknown semantic role '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Complexity {
    Simple,
    Medium,
    Complex,
}

impl Complexity {
    pub const ALL: [Complexity; 3] = [Complexity::Simple, Complexity::Medium, Complexity::Complex];

    pub fn as_str(self) -> &'static str {
        match self {
            Complexity::Simple => "simple",
            Complexity::Medium => "medium",
            Complexity::Complex => "complex",
        }
    }
}

impl fmt::Display for Complexity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slot {
    pub name: String,
    pub category: Category,
    pub role: Option<Role>,
}

impl Slot {
    pub fn new(name: &str, category: Category, role: Option<Role>) -> Self {
        Slot {
            name: name.to_string(),
            category,
            role,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticFrame {
    pub name: String,
    pub slots: Vec<Slot>,
    pub complexity: Complexity,
    /// Present-tense templates inflect verbs with a trailing "s".
    pub present_tense: bool,
}

impl SemanticFrame {
    pub fn new(name: &str, complexity: Complexity, slots: Vec<Slot>) -> Self {
        SemanticFrame {
            name: name.to_string(),
            slots,
            complexity,
            present_tense: true,
        }
    }

    /// Checks the frame against a lexicon: at least two slots and every slot
    /// category present.
    pub fn validate(&self, lexicon: &Lexicon) -> Result<()> {
        if self.slots.len() < 2 {
            return Err(Error::Config(format!(
                "frame '{}' has {} slots; templates need at least 2",
                self.name,
                self.slots.len()
            )));
        }
        for slot in &self.slots {
            lexicon.pool(slot.category).map_err(|_| {
                Error::Config(format!(
                    "frame '{}' slot '{}' needs category '{}' which the lexicon lacks",
                    self.name, slot.name, slot.category
                ))
            })?;
        }
        Ok(())
    }
}

/// The nine shipped frame templates.
pub fn standard_frames() -> Vec<SemanticFrame> {
    use Category::*;
    use Complexity::*;
    let s = Slot::new;
    vec![
        SemanticFrame::new(
            "transitive_action",
            Medium,
            vec![
                s("arg0", Noun, Some(Role::Agent)),
                s("verb", TransitiveVerb, None),
                s("arg1", Noun, Some(Role::Patient)),
                s("prep", Preposition, None),
                s("arg2", Location, Some(Role::Location)),
            ],
        ),
        SemanticFrame::new(
            "intransitive_action",
            Simple,
            vec![
                s("arg0", Noun, Some(Role::Agent)),
                s("verb", IntransitiveVerb, Some(Role::Action)),
            ],
        ),
        SemanticFrame::new(
            "motion",
            Simple,
            vec![
                s("arg0", Noun, Some(Role::Agent)),
                s("verb", MotionVerb, Some(Role::Action)),
                s("goal", Location, Some(Role::Destination)),
            ],
        ),
        SemanticFrame::new(
            "temporal_action",
            Simple,
            vec![
                s("arg0", Noun, Some(Role::Agent)),
                s("verb", IntransitiveVerb, Some(Role::Action)),
                s("time", Temporal, Some(Role::Temporal)),
            ],
        ),
        SemanticFrame::new(
            "instrumental_action",
            Medium,
            vec![
                s("arg0", Noun, Some(Role::Agent)),
                s("verb", TransitiveVerb, Some(Role::Action)),
                s("arg1", Noun, Some(Role::Patient)),
                s("prep", Preposition, None),
                s("instr", Instrument, Some(Role::Instrument)),
            ],
        ),
        SemanticFrame::new(
            "motion_with_source",
            Medium,
            vec![
                s("arg0", Noun, Some(Role::Agent)),
                s("verb", MotionVerb, Some(Role::Action)),
                s("source", Location, Some(Role::Source)),
                s("prep", Preposition, None),
                s("goal", Location, Some(Role::Destination)),
            ],
        ),
        SemanticFrame::new(
            "transitive_with_location",
            Complex,
            vec![
                s("det", Determiner, None),
                s("arg0", Noun, Some(Role::Agent)),
                s("verb", TransitiveVerb, Some(Role::Action)),
                s("arg1", Noun, Some(Role::Patient)),
                s("prep", Preposition, None),
                s("arg2", Location, Some(Role::Location)),
            ],
        ),
        SemanticFrame::new(
            "multi_action",
            Complex,
            vec![
                s("arg0", Noun, Some(Role::Agent)),
                s("verb", TransitiveVerb, Some(Role::Action)),
                s("arg1", Noun, Some(Role::Patient)),
                s("conj", Conjunction, Some(Role::Relation)),
                s("verb2", ChangeVerb, Some(Role::Action)),
                s("result", Adjective, Some(Role::Result)),
            ],
        ),
        SemanticFrame::new(
            "temporal_complex",
            Complex,
            vec![
                s("det", Determiner, None),
                s("arg0", Noun, Some(Role::Agent)),
                s("verb", CommunicationVerb, Some(Role::Action)),
                s("manner", Adverb, None),
                s("conj", Conjunction, Some(Role::Relation)),
                s("verb2", MotionVerb, Some(Role::Action)),
                s("time", Temporal, Some(Role::Temporal)),
            ],
        ),
    ]
}
