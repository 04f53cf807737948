//! JSON document schemas, parsing with machine-readable diagnostics, and
//! serialization.
//!
//! Game documents:
//!
//! ```json
//! {"states": ["low", "high"], "prior": [0.5, 0.5],
//!  "resources": ["a", "b"], "actions": [["a"], ["b"]],
//!  "costs": {"a": {"low": {"breakpoints": [0, 1], "pieces": [[0]]}}}}
//! ```
//!
//! Outcome documents list per-state atoms `{"flow": [...], "prob": ...}`;
//! structure documents hold population sizes, per-population type sets, and
//! either an explicit signal law or a rotation-symmetric encoding with
//! per-atom action counts; interim profile documents key flows by
//! `"<population>:<type label>"`. Outcomes, structures, and profiles are
//! parsed against a game so state and action order follow the game document.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bwe::InterimFlowProfile;
use crate::curve::PiecewiseCostCurve;
use crate::design::{InformationStructure, ProfileAtom, RotationAtom, SignalLaw};
use crate::error::Error;
use crate::model::{CongestionGame, FiniteOutcome, FlowProfile, OutcomeAtom};

/// A parse/validation failure with a stable code and a document path.
#[derive(Debug, Clone, Error, Serialize)]
#[error("{code} at {path}: {message}")]
pub struct ParseDiagnostic {
    pub code: String,
    pub path: String,
    pub message: String,
}

impl ParseDiagnostic {
    fn new(code: &str, path: impl Into<String>, message: impl ToString) -> Self {
        Self {
            code: code.to_string(),
            path: path.into(),
            message: message.to_string(),
        }
    }
}

pub type ParseResult<T> = std::result::Result<T, ParseDiagnostic>;

// ---------------------------------------------------------------------------
// Document shapes
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveDoc {
    pub breakpoints: Vec<f64>,
    pub pieces: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameDoc {
    pub states: Vec<String>,
    pub prior: Vec<f64>,
    pub resources: Vec<String>,
    /// Actions as lists of resource labels.
    pub actions: Vec<Vec<String>>,
    /// costs[resource][state]
    pub costs: BTreeMap<String, BTreeMap<String, CurveDoc>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomDoc {
    pub flow: Vec<f64>,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDoc {
    pub per_state: BTreeMap<String, Vec<AtomDoc>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileAtomDoc {
    /// One type label per population.
    pub profile: Vec<String>,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationAtomDoc {
    /// Per-action recommendation counts summing to K.
    pub counts: Vec<u64>,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationEncodingDoc {
    #[serde(rename = "K")]
    pub k: u64,
    pub per_state: BTreeMap<String, Vec<RotationAtomDoc>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EncodingDoc {
    /// `"explicit"`
    Explicit(String),
    Rotation {
        rotation_symmetric: RotationEncodingDoc,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureDoc {
    pub population_sizes: Vec<f64>,
    pub type_sets: Vec<Vec<String>>,
    /// Explicit per-state signal law; empty under a rotation encoding.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub signal_law: BTreeMap<String, Vec<ProfileAtomDoc>>,
    pub encoding: EncodingDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterimProfileDoc {
    /// Keys are `"<population index>:<type label>"`.
    pub profiles: BTreeMap<String, Vec<f64>>,
}

// ---------------------------------------------------------------------------
// Game
// ---------------------------------------------------------------------------

/// Parse and validate a game document.
pub fn parse_game(text: &str) -> ParseResult<CongestionGame> {
    let doc: GameDoc =
        serde_json::from_str(text).map_err(|e| ParseDiagnostic::new("SCHEMA", "/", e))?;
    game_from_doc(&doc)
}

pub fn game_from_doc(doc: &GameDoc) -> ParseResult<CongestionGame> {
    let resource_index = |label: &str, path: &str| -> ParseResult<usize> {
        doc.resources
            .iter()
            .position(|r| r == label)
            .ok_or_else(|| {
                ParseDiagnostic::new("UNKNOWN_RESOURCE", path, format!("resource `{label}`"))
            })
    };
    let mut actions = Vec::with_capacity(doc.actions.len());
    for (i, subset) in doc.actions.iter().enumerate() {
        let mut indices = Vec::with_capacity(subset.len());
        for label in subset {
            indices.push(resource_index(label, &format!("/actions/{i}"))?);
        }
        actions.push(indices);
    }
    let mut curves = Vec::with_capacity(doc.resources.len());
    for resource in &doc.resources {
        let per_state = doc.costs.get(resource).ok_or_else(|| {
            ParseDiagnostic::new(
                "CURVE_MISSING",
                format!("/costs/{resource}"),
                "no cost entry for resource",
            )
        })?;
        let mut row = Vec::with_capacity(doc.states.len());
        for state in &doc.states {
            let path = format!("/costs/{resource}/{state}");
            let curve_doc = per_state.get(state).ok_or_else(|| {
                ParseDiagnostic::new("CURVE_MISSING", &path, "no cost curve for state")
            })?;
            let curve =
                PiecewiseCostCurve::new(curve_doc.breakpoints.clone(), curve_doc.pieces.clone())
                    .map_err(|e| ParseDiagnostic::new(e.code(), &path, &e))?;
            row.push(curve);
        }
        curves.push(row);
    }
    CongestionGame::new(
        doc.states.clone(),
        doc.prior.clone(),
        doc.resources.clone(),
        actions,
        curves,
    )
    .map_err(|e| ParseDiagnostic::new(e.code(), "/", &e))
}

pub fn game_to_doc(game: &CongestionGame) -> GameDoc {
    let mut costs = BTreeMap::new();
    for (e, resource) in game.resources().iter().enumerate() {
        let mut per_state = BTreeMap::new();
        for (s, state) in game.states().iter().enumerate() {
            let curve = game.curve(e, s);
            per_state.insert(
                state.clone(),
                CurveDoc {
                    breakpoints: curve.breakpoints().to_vec(),
                    pieces: curve.pieces().to_vec(),
                },
            );
        }
        costs.insert(resource.clone(), per_state);
    }
    GameDoc {
        states: game.states().to_vec(),
        prior: game.prior().to_vec(),
        resources: game.resources().to_vec(),
        actions: game
            .actions()
            .iter()
            .map(|a| {
                a.resources()
                    .iter()
                    .map(|&e| game.resources()[e].clone())
                    .collect()
            })
            .collect(),
        costs,
    }
}

// ---------------------------------------------------------------------------
// Outcome
// ---------------------------------------------------------------------------

/// Parse an outcome document against a game (state order, action count).
pub fn parse_outcome(text: &str, game: &CongestionGame) -> ParseResult<FiniteOutcome> {
    let doc: OutcomeDoc =
        serde_json::from_str(text).map_err(|e| ParseDiagnostic::new("SCHEMA", "/", e))?;
    outcome_from_doc(&doc, game)
}

pub fn outcome_from_doc(doc: &OutcomeDoc, game: &CongestionGame) -> ParseResult<FiniteOutcome> {
    for state in doc.per_state.keys() {
        if !game.states().contains(state) {
            return Err(ParseDiagnostic::new(
                "UNKNOWN_STATE",
                format!("/per_state/{state}"),
                "state not in the game",
            ));
        }
    }
    let mut per_state = Vec::with_capacity(game.n_states());
    for state in game.states() {
        let atoms_doc = doc.per_state.get(state).ok_or_else(|| {
            ParseDiagnostic::new(
                "MISSING_STATE",
                format!("/per_state/{state}"),
                "no atoms for state",
            )
        })?;
        let mut atoms = Vec::with_capacity(atoms_doc.len());
        for (i, atom) in atoms_doc.iter().enumerate() {
            let path = format!("/per_state/{state}/{i}");
            let flow = FlowProfile::simplex(atom.flow.clone())
                .map_err(|e| ParseDiagnostic::new("INVALID_FLOW", &path, &e))?;
            atoms.push(OutcomeAtom {
                flow,
                prob: atom.prob,
            });
        }
        per_state.push(atoms);
    }
    FiniteOutcome::new(per_state)
        .map_err(|e| ParseDiagnostic::new("INVALID_OUTCOME", "/per_state", &e))
}

pub fn outcome_to_doc(outcome: &FiniteOutcome, game: &CongestionGame) -> OutcomeDoc {
    let mut per_state = BTreeMap::new();
    for (s, state) in game.states().iter().enumerate() {
        per_state.insert(
            state.clone(),
            outcome
                .atoms(s)
                .iter()
                .map(|a| AtomDoc {
                    flow: a.flow.entries().to_vec(),
                    prob: a.prob,
                })
                .collect(),
        );
    }
    OutcomeDoc { per_state }
}

// ---------------------------------------------------------------------------
// Information structure
// ---------------------------------------------------------------------------

/// Parse a structure document against a game (state order).
pub fn parse_structure(text: &str, game: &CongestionGame) -> ParseResult<InformationStructure> {
    let doc: StructureDoc =
        serde_json::from_str(text).map_err(|e| ParseDiagnostic::new("SCHEMA", "/", e))?;
    structure_from_doc(&doc, game)
}

pub fn structure_from_doc(
    doc: &StructureDoc,
    game: &CongestionGame,
) -> ParseResult<InformationStructure> {
    let law = match &doc.encoding {
        EncodingDoc::Explicit(tag) => {
            if tag != "explicit" {
                return Err(ParseDiagnostic::new(
                    "SCHEMA",
                    "/encoding",
                    format!("unknown encoding `{tag}`"),
                ));
            }
            let mut per_state = Vec::with_capacity(game.n_states());
            for state in game.states() {
                let atoms = doc.signal_law.get(state).ok_or_else(|| {
                    ParseDiagnostic::new(
                        "MISSING_STATE",
                        format!("/signal_law/{state}"),
                        "no signal-law entry for state",
                    )
                })?;
                let mut converted = Vec::with_capacity(atoms.len());
                for (i, atom) in atoms.iter().enumerate() {
                    let path = format!("/signal_law/{state}/{i}");
                    if atom.profile.len() != doc.type_sets.len() {
                        return Err(ParseDiagnostic::new(
                            "PROFILE_LENGTH",
                            &path,
                            "one type per population required",
                        ));
                    }
                    let mut types = Vec::with_capacity(atom.profile.len());
                    for (k, label) in atom.profile.iter().enumerate() {
                        let t = doc.type_sets[k]
                            .iter()
                            .position(|l| l == label)
                            .ok_or_else(|| {
                                ParseDiagnostic::new(
                                    "UNKNOWN_TYPE",
                                    &path,
                                    format!("type `{label}` not in population {k}'s set"),
                                )
                            })?;
                        types.push(t);
                    }
                    converted.push(ProfileAtom {
                        types,
                        prob: atom.prob,
                    });
                }
                per_state.push(converted);
            }
            SignalLaw::Explicit { per_state }
        }
        EncodingDoc::Rotation { rotation_symmetric } => {
            let mut per_state = Vec::with_capacity(game.n_states());
            for state in game.states() {
                let atoms = rotation_symmetric.per_state.get(state).ok_or_else(|| {
                    ParseDiagnostic::new(
                        "MISSING_STATE",
                        format!("/encoding/rotation_symmetric/per_state/{state}"),
                        "no rotation atoms for state",
                    )
                })?;
                per_state.push(
                    atoms
                        .iter()
                        .map(|a| RotationAtom {
                            counts: a.counts.clone(),
                            prob: a.prob,
                        })
                        .collect(),
                );
            }
            SignalLaw::RotationSymmetric {
                k: rotation_symmetric.k,
                per_state,
            }
        }
    };
    InformationStructure::new(
        game.states().to_vec(),
        doc.population_sizes.clone(),
        doc.type_sets.clone(),
        law,
    )
    .map_err(|e| ParseDiagnostic::new("INVALID_STRUCTURE", "/", &e))
}

pub fn structure_to_doc(structure: &InformationStructure) -> StructureDoc {
    match structure.law() {
        SignalLaw::Explicit { per_state } => {
            let mut law = BTreeMap::new();
            for (s, state) in structure.states().iter().enumerate() {
                law.insert(
                    state.clone(),
                    per_state[s]
                        .iter()
                        .map(|atom| ProfileAtomDoc {
                            profile: atom
                                .types
                                .iter()
                                .enumerate()
                                .map(|(k, &t)| structure.type_sets()[k][t].clone())
                                .collect(),
                            prob: atom.prob,
                        })
                        .collect(),
                );
            }
            StructureDoc {
                population_sizes: structure.population_sizes().to_vec(),
                type_sets: structure.type_sets().to_vec(),
                signal_law: law,
                encoding: EncodingDoc::Explicit("explicit".to_string()),
            }
        }
        SignalLaw::RotationSymmetric { k, per_state } => {
            let mut rotation = BTreeMap::new();
            for (s, state) in structure.states().iter().enumerate() {
                rotation.insert(
                    state.clone(),
                    per_state[s]
                        .iter()
                        .map(|a| RotationAtomDoc {
                            counts: a.counts.clone(),
                            prob: a.prob,
                        })
                        .collect(),
                );
            }
            StructureDoc {
                population_sizes: structure.population_sizes().to_vec(),
                type_sets: structure.type_sets().to_vec(),
                signal_law: BTreeMap::new(),
                encoding: EncodingDoc::Rotation {
                    rotation_symmetric: RotationEncodingDoc {
                        k: *k,
                        per_state: rotation,
                    },
                },
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Interim profile
// ---------------------------------------------------------------------------

/// Parse an interim profile document against a structure.
pub fn parse_profile(
    text: &str,
    structure: &InformationStructure,
) -> ParseResult<InterimFlowProfile> {
    let doc: InterimProfileDoc =
        serde_json::from_str(text).map_err(|e| ParseDiagnostic::new("SCHEMA", "/", e))?;
    profile_from_doc(&doc, structure)
}

pub fn profile_from_doc(
    doc: &InterimProfileDoc,
    structure: &InformationStructure,
) -> ParseResult<InterimFlowProfile> {
    let mut flows = Vec::with_capacity(structure.n_populations());
    for (k, types) in structure.type_sets().iter().enumerate() {
        let mut rows = Vec::with_capacity(types.len());
        for label in types {
            let key = format!("{k}:{label}");
            let row = doc.profiles.get(&key).ok_or_else(|| {
                ParseDiagnostic::new(
                    "PROFILE_MISSING",
                    format!("/profiles/{key}"),
                    "no flow for population type",
                )
            })?;
            rows.push(row.clone());
        }
        flows.push(rows);
    }
    InterimFlowProfile::new(flows, structure.population_sizes().to_vec())
        .map_err(|e| ParseDiagnostic::new("INVALID_PROFILE", "/profiles", &e))
}

pub fn profile_to_doc(
    profile: &InterimFlowProfile,
    structure: &InformationStructure,
) -> InterimProfileDoc {
    let mut map = BTreeMap::new();
    for (k, types) in structure.type_sets().iter().enumerate() {
        for (t, label) in types.iter().enumerate() {
            map.insert(format!("{k}:{label}"), profile.flow(k, t).to_vec());
        }
    }
    InterimProfileDoc { profiles: map }
}

impl From<ParseDiagnostic> for Error {
    fn from(d: ParseDiagnostic) -> Self {
        Error::Domain(d.to_string())
    }
}
