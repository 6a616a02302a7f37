//! Concept lexicon: ontology-derived terms, hierarchy, and the NER vocabulary.
//!
//! The on-disk form is a CSV with one row per `(concept, term)` pair:
//!
//! ```text
//! concept_id,term,is_preferred,parent_ids,group
//! C0,adverse experience,true,,ACE
//! C1,child abuse,true,C0,ACE
//! C1,abuse of child,false,C0,ACE
//! ```
//!
//! `parent_ids` is `;`-separated and may be empty. Lines starting with `#` are
//! comments. Hierarchy edges point child → parents.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ner::tokenize;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("cannot read lexicon {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("lexicon line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("duplicate concept id {0}: rows disagree on {1}")]
    DuplicateConcept(ConceptId, &'static str),
    #[error("concept {concept} lists unknown parent {parent}")]
    UnknownParent { concept: ConceptId, parent: ConceptId },
    #[error("hierarchy cycle through concept {0}")]
    Cycle(ConceptId),
    #[error("concept {0} has no preferred term")]
    NoPreferredTerm(ConceptId),
    #[error("unknown concept id {0}")]
    UnknownConcept(ConceptId),
    #[error("no concepts selected for the vocabulary")]
    EmptySelection,
    #[error("term {term:?} of concept {concept} contains no word tokens")]
    EmptyTerm { concept: ConceptId, term: String },
}

/// Opaque CUI-style concept identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConceptId(String);

impl ConceptId {
    /// Panics on an empty id; use [`ConceptId::parse`] for untrusted input.
    pub fn new(id: impl Into<String>) -> Self {
        let id = id.into();
        assert!(!id.is_empty(), "concept id must be non-empty");
        ConceptId(id)
    }

    pub fn parse(id: &str) -> Option<Self> {
        let id = id.trim();
        (!id.is_empty()).then(|| ConceptId(id.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ConceptId {
    fn from(s: &str) -> Self {
        ConceptId::new(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Concept {
    pub id: ConceptId,
    pub preferred_name: String,
    /// Non-preferred terms, unique after case-folding.
    pub synonyms: Vec<String>,
    pub parents: Vec<ConceptId>,
    pub group: String,
}

impl Concept {
    /// Preferred name followed by synonyms.
    pub fn terms(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.preferred_name.as_str()).chain(self.synonyms.iter().map(String::as_str))
    }
}

/// Simple Unicode lowercase; no stemming.
pub fn fold_case(s: &str) -> String {
    s.to_lowercase()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    concepts: Vec<Concept>,
    position: HashMap<ConceptId, usize>,
    term_index: BTreeMap<String, BTreeSet<ConceptId>>,
}

impl Lexicon {
    /// Validates referential integrity and acyclicity, then sorts concepts by id.
    pub fn from_concepts(mut concepts: Vec<Concept>) -> Result<Self, LexiconError> {
        concepts.sort_by(|a, b| a.id.cmp(&b.id));
        for pair in concepts.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(LexiconError::DuplicateConcept(pair[0].id.clone(), "definition"));
            }
        }
        let position: HashMap<ConceptId, usize> =
            concepts.iter().enumerate().map(|(i, c)| (c.id.clone(), i)).collect();
        for c in &concepts {
            for p in &c.parents {
                if !position.contains_key(p) {
                    return Err(LexiconError::UnknownParent { concept: c.id.clone(), parent: p.clone() });
                }
            }
        }
        let mut term_index: BTreeMap<String, BTreeSet<ConceptId>> = BTreeMap::new();
        for c in &concepts {
            for t in c.terms() {
                term_index.entry(fold_case(t)).or_default().insert(c.id.clone());
            }
        }
        let lexicon = Lexicon { concepts, position, term_index };
        lexicon.check_acyclic()?;
        Ok(lexicon)
    }

    fn check_acyclic(&self) -> Result<(), LexiconError> {
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state = vec![0u8; self.concepts.len()];
        for root in 0..self.concepts.len() {
            if state[root] != 0 {
                continue;
            }
            let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
            state[root] = 1;
            while let Some(&mut (node, ref mut next)) = stack.last_mut() {
                let parents = &self.concepts[node].parents;
                if *next < parents.len() {
                    let p = self.position[&parents[*next]];
                    *next += 1;
                    match state[p] {
                        0 => {
                            state[p] = 1;
                            stack.push((p, 0));
                        }
                        1 => return Err(LexiconError::Cycle(self.concepts[p].id.clone())),
                        _ => {}
                    }
                } else {
                    state[node] = 2;
                    stack.pop();
                }
            }
        }
        Ok(())
    }

    pub fn concepts(&self) -> &[Concept] {
        &self.concepts
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn get(&self, id: &ConceptId) -> Option<&Concept> {
        self.position.get(id).map(|&i| &self.concepts[i])
    }

    pub fn contains(&self, id: &ConceptId) -> bool {
        self.position.contains_key(id)
    }

    /// Canonical position of a concept (its index in id order).
    pub fn index_of(&self, id: &ConceptId) -> Option<usize> {
        self.position.get(id).copied()
    }

    /// Case-folded term → concepts carrying that term.
    pub fn term_index(&self) -> &BTreeMap<String, BTreeSet<ConceptId>> {
        &self.term_index
    }

    pub fn ids(&self) -> impl Iterator<Item = &ConceptId> {
        self.concepts.iter().map(|c| &c.id)
    }

    /// Ids of concepts in `group`.
    pub fn group_members(&self, group: &str) -> BTreeSet<ConceptId> {
        self.concepts.iter().filter(|c| c.group == group).map(|c| c.id.clone()).collect()
    }

    fn children(&self) -> Vec<Vec<usize>> {
        let mut children = vec![Vec::new(); self.concepts.len()];
        for (i, c) in self.concepts.iter().enumerate() {
            for p in &c.parents {
                children[self.position[p]].push(i);
            }
        }
        children
    }
}

#[derive(Debug, Deserialize)]
struct LexiconRow {
    concept_id: String,
    term: String,
    is_preferred: String,
    #[serde(default)]
    parent_ids: String,
    #[serde(default)]
    group: String,
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "y" | "t" => Some(true),
        "false" | "0" | "no" | "n" | "f" | "" => Some(false),
        _ => None,
    }
}

struct PartialConcept {
    preferred: Option<String>,
    terms: Vec<String>,
    parents: Option<Vec<ConceptId>>,
    group: String,
}

pub fn load_lexicon(path: impl AsRef<Path>) -> Result<Lexicon, LexiconError> {
    let path = path.as_ref();
    let io_err = |source| LexiconError::Io { path: path.display().to_string(), source };
    let mut text = String::new();
    File::open(path).and_then(|mut f| f.read_to_string(&mut text)).map_err(io_err)?;
    parse_lexicon(&text)
}

pub fn parse_lexicon(text: &str) -> Result<Lexicon, LexiconError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let headers = reader
        .headers()
        .map_err(|e| LexiconError::Parse { line: 1, message: e.to_string() })?
        .clone();
    let mut partial: BTreeMap<ConceptId, PartialConcept> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            LexiconError::Parse { line, message: e.to_string() }
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let parse_err = |message: String| LexiconError::Parse { line, message };
        let row: LexiconRow = record.deserialize(Some(&headers)).map_err(|e| parse_err(e.to_string()))?;

        let id = ConceptId::parse(&row.concept_id).ok_or_else(|| parse_err("empty concept_id".into()))?;
        let term = row.term.trim().to_string();
        if term.is_empty() {
            return Err(parse_err(format!("empty term for concept {id}")));
        }
        let preferred =
            parse_bool(&row.is_preferred).ok_or_else(|| parse_err(format!("bad is_preferred {:?}", row.is_preferred)))?;
        let parents: Vec<ConceptId> = row.parent_ids.split(';').filter_map(ConceptId::parse).collect();
        let group = row.group.trim().to_string();

        let entry = partial.entry(id.clone()).or_insert_with(|| PartialConcept {
            preferred: None,
            terms: Vec::new(),
            parents: None,
            group: group.clone(),
        });
        if entry.group != group {
            return Err(LexiconError::DuplicateConcept(id, "group"));
        }
        if !parents.is_empty() {
            let mut sorted = parents;
            sorted.sort();
            sorted.dedup();
            match &entry.parents {
                Some(existing) if *existing != sorted => {
                    return Err(LexiconError::DuplicateConcept(id, "parent_ids"));
                }
                _ => entry.parents = Some(sorted),
            }
        }
        if preferred {
            match &entry.preferred {
                Some(existing) if fold_case(existing) != fold_case(&term) => {
                    return Err(LexiconError::DuplicateConcept(id, "preferred term"));
                }
                Some(_) => {}
                None => entry.preferred = Some(term.clone()),
            }
        }
        entry.terms.push(term);
    }

    let mut concepts = Vec::with_capacity(partial.len());
    for (id, p) in partial {
        let preferred_name = p.preferred.ok_or_else(|| LexiconError::NoPreferredTerm(id.clone()))?;
        let mut seen: BTreeSet<String> = BTreeSet::new();
        seen.insert(fold_case(&preferred_name));
        let synonyms = p.terms.into_iter().filter(|t| seen.insert(fold_case(t))).collect();
        concepts.push(Concept {
            id,
            preferred_name,
            synonyms,
            parents: p.parents.unwrap_or_default(),
            group: p.group,
        });
    }
    Lexicon::from_concepts(concepts)
}

/// Serializes back to the CSV form (preferred row first, then synonyms).
pub fn write_lexicon_csv(lexicon: &Lexicon) -> String {
    let mut out = String::from("concept_id,term,is_preferred,parent_ids,group\n");
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for c in lexicon.concepts() {
        let parents = c.parents.iter().map(ConceptId::as_str).collect::<Vec<_>>().join(";");
        for (i, t) in c.terms().enumerate() {
            let pref = if i == 0 { "true" } else { "false" };
            w.write_record([c.id.as_str(), t, pref, &parents, &c.group]).expect("in-memory csv write");
        }
    }
    out.push_str(&String::from_utf8(w.into_inner().expect("flush")).expect("utf-8"));
    out
}

/// Concepts that no concept lists as a parent.
pub fn extract_leaf_concepts(lexicon: &Lexicon) -> BTreeSet<ConceptId> {
    let mut is_parent = vec![false; lexicon.len()];
    for c in lexicon.concepts() {
        for p in &c.parents {
            is_parent[lexicon.position[p]] = true;
        }
    }
    lexicon
        .concepts()
        .iter()
        .zip(is_parent)
        .filter(|(_, parent)| !parent)
        .map(|(c, _)| c.id.clone())
        .collect()
}

/// `roots` plus everything reachable from them through child edges.
pub fn expand_descendants(
    lexicon: &Lexicon,
    roots: &BTreeSet<ConceptId>,
) -> Result<BTreeSet<ConceptId>, LexiconError> {
    let children = lexicon.children();
    let mut seen = vec![false; lexicon.len()];
    let mut stack = Vec::new();
    for r in roots {
        let i = lexicon.index_of(r).ok_or_else(|| LexiconError::UnknownConcept(r.clone()))?;
        if !seen[i] {
            seen[i] = true;
            stack.push(i);
        }
    }
    while let Some(i) = stack.pop() {
        for &c in &children[i] {
            if !seen[c] {
                seen[c] = true;
                stack.push(c);
            }
        }
    }
    Ok(lexicon
        .concepts()
        .iter()
        .zip(seen)
        .filter(|(_, s)| *s)
        .map(|(c, _)| c.id.clone())
        .collect())
}

#[derive(Debug, Clone, Default)]
struct TrieNode {
    children: HashMap<String, usize>,
    concepts: Vec<ConceptId>,
}

/// Token-level trie over the case-folded terms of the selected concepts.
///
/// A term is stored as its sequence of case-folded word tokens, so
/// `"self-harm"` and `"self harm"` share one pattern.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    nodes: Vec<TrieNode>,
    patterns: BTreeMap<Vec<String>, BTreeSet<ConceptId>>,
    max_tokens: usize,
}

impl Vocabulary {
    pub fn pattern_count(&self) -> usize {
        self.patterns.len()
    }

    /// Number of tokens in the longest pattern.
    pub fn max_pattern_tokens(&self) -> usize {
        self.max_tokens
    }

    /// Token-sequence patterns and the concepts each maps to.
    pub fn patterns(&self) -> &BTreeMap<Vec<String>, BTreeSet<ConceptId>> {
        &self.patterns
    }

    pub fn concepts_for(&self, folded_tokens: &[String]) -> Option<&BTreeSet<ConceptId>> {
        self.patterns.get(folded_tokens)
    }

    pub(crate) fn root(&self) -> usize {
        0
    }

    pub(crate) fn step(&self, node: usize, folded_token: &str) -> Option<usize> {
        self.nodes[node].children.get(folded_token).copied()
    }

    pub(crate) fn accepts(&self, node: usize) -> &[ConceptId] {
        &self.nodes[node].concepts
    }
}

pub fn build_vocabulary(lexicon: &Lexicon, selected: &BTreeSet<ConceptId>) -> Result<Vocabulary, LexiconError> {
    if selected.is_empty() {
        return Err(LexiconError::EmptySelection);
    }
    let mut patterns: BTreeMap<Vec<String>, BTreeSet<ConceptId>> = BTreeMap::new();
    for id in selected {
        let concept = lexicon.get(id).ok_or_else(|| LexiconError::UnknownConcept(id.clone()))?;
        for term in concept.terms() {
            let folded = fold_case(term);
            let tokens: Vec<String> = tokenize(&folded).into_iter().map(|t| t.text).collect();
            if tokens.is_empty() {
                return Err(LexiconError::EmptyTerm { concept: id.clone(), term: term.to_string() });
            }
            patterns.entry(tokens).or_default().insert(id.clone());
        }
    }

    let mut nodes = vec![TrieNode::default()];
    let mut max_tokens = 0;
    for (tokens, ids) in &patterns {
        max_tokens = max_tokens.max(tokens.len());
        let mut node = 0;
        for tok in tokens {
            node = match nodes[node].children.get(tok) {
                Some(&next) => next,
                None => {
                    nodes.push(TrieNode::default());
                    let next = nodes.len() - 1;
                    nodes[node].children.insert(tok.clone(), next);
                    next
                }
            };
        }
        nodes[node].concepts = ids.iter().cloned().collect();
    }
    Ok(Vocabulary { nodes, patterns, max_tokens })
}
