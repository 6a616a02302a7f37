//! Dictionary NER over word tokens, plus the filter rules applied to mentions.

use std::cmp::Reverse;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::ingest::Document;
use crate::lexicon::{fold_case, ConceptId, Vocabulary};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    /// Byte offsets into the source text, `end` exclusive.
    pub start: usize,
    pub end: usize,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\'' || c == '\u{2019}'
}

/// Sentence terminators. Multi-word terms never span one, and negation cues
/// only reach mentions in the same sentence.
pub fn is_sentence_break(c: char) -> bool {
    matches!(c, '.' | '!' | '?' | '\n' | '\r')
}

/// Maximal runs of letters, digits and apostrophes.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (is_word_char(c), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                tokens.push(Token { text: text[s..i].to_string(), start: s, end: i });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        tokens.push(Token { text: text[s..].to_string(), start: s, end: text.len() });
    }
    tokens
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub doc_id: String,
    pub concept_id: ConceptId,
    pub start: usize,
    pub end: usize,
    pub surface: String,
    pub filtered: bool,
    pub filter_reason: Option<String>,
}

impl Mention {
    pub fn span(&self) -> (usize, usize) {
        (self.start, self.end)
    }
}

/// Longest-match dictionary lookup on token boundaries.
///
/// Every token span whose case-folded tokens form a vocabulary pattern is a
/// candidate; tokens of a multi-word match may be separated by whitespace or
/// punctuation but not by a sentence break. Overlaps are resolved greedily:
/// longer byte span first, then earlier start. A span carrying several
/// concepts yields one mention per concept. Output is sorted by
/// `(start, concept_id)`.
pub fn find_mentions(doc: &Document, vocab: &Vocabulary) -> Vec<Mention> {
    let text = doc.text.as_str();
    let tokens = tokenize(text);
    let folded: Vec<String> = tokens.iter().map(|t| fold_case(&t.text)).collect();
    let max = vocab.max_pattern_tokens();

    let mut candidates: Vec<(usize, usize, &[ConceptId])> = Vec::new();
    for i in 0..tokens.len() {
        let mut node = vocab.root();
        for j in i..tokens.len().min(i + max) {
            if j > i && text[tokens[j - 1].end..tokens[j].start].chars().any(is_sentence_break) {
                break;
            }
            match vocab.step(node, &folded[j]) {
                Some(next) => node = next,
                None => break,
            }
            let accepted = vocab.accepts(node);
            if !accepted.is_empty() {
                candidates.push((i, j, accepted));
            }
        }
    }

    candidates.sort_by_key(|&(i, j, _)| (Reverse(tokens[j].end - tokens[i].start), tokens[i].start));
    let mut taken = vec![false; tokens.len()];
    let mut mentions = Vec::new();
    for (i, j, concepts) in candidates {
        if taken[i..=j].iter().any(|&t| t) {
            continue;
        }
        taken[i..=j].iter_mut().for_each(|t| *t = true);
        let (start, end) = (tokens[i].start, tokens[j].end);
        for c in concepts {
            mentions.push(Mention {
                doc_id: doc.doc_id.clone(),
                concept_id: c.clone(),
                start,
                end,
                surface: text[start..end].to_string(),
                filtered: false,
                filter_reason: None,
            });
        }
    }
    mentions.sort_by(|a, b| (a.start, &a.concept_id).cmp(&(b.start, &b.concept_id)));
    mentions
}

/// Declarative mention filters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterRules {
    /// Single-token cues, matched case-insensitively.
    pub negation_cues: Vec<String>,
    /// How many tokens before a mention a cue may sit.
    pub negation_window: usize,
    /// Surfaces (case-folded) that are never reported as concept mentions.
    pub stop_surfaces: Vec<String>,
}

impl Default for FilterRules {
    fn default() -> Self {
        FilterRules { negation_cues: Vec::new(), negation_window: 3, stop_surfaces: Vec::new() }
    }
}

impl FilterRules {
    pub fn standard() -> Self {
        let cues = ["no", "not", "never", "without", "denies", "denied", "deny", "don't", "doesn't", "didn't", "isn't"];
        FilterRules {
            negation_cues: cues.iter().map(|s| s.to_string()).collect(),
            ..Self::default()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.negation_cues.is_empty() && self.stop_surfaces.is_empty()
    }
}

/// Flags (never drops) mentions hit by a negation cue or the stop list.
///
/// A cue counts when it is one of the `negation_window` tokens preceding the
/// mention and no sentence break lies between it and the mention. The nearest
/// cue names the reason (`negation:<cue>`); otherwise a stop-listed surface
/// gives `stop:<surface>`. Already-flagged mentions keep their reason.
pub fn apply_filter_rules(mentions: &[Mention], doc: &Document, rules: &FilterRules) -> Vec<Mention> {
    if rules.is_empty() {
        return mentions.to_vec();
    }
    let text = doc.text.as_str();
    let tokens = tokenize(text);
    let cues: BTreeSet<String> = rules.negation_cues.iter().map(|c| fold_case(c)).collect();
    let stops: BTreeSet<String> = rules.stop_surfaces.iter().map(|s| fold_case(s)).collect();

    mentions
        .iter()
        .map(|m| {
            let mut out = m.clone();
            if out.filtered {
                return out;
            }
            let first = tokens.partition_point(|t| t.start < m.start);
            let reason = (1..=rules.negation_window.min(first))
                .map(|back| &tokens[first - back])
                .take_while(|t| !text[t.end..m.start].chars().any(is_sentence_break))
                .map(|t| fold_case(&t.text))
                .find(|t| cues.contains(t))
                .map(|cue| format!("negation:{cue}"))
                .or_else(|| {
                    let surface = fold_case(&m.surface);
                    stops.contains(&surface).then(|| format!("stop:{surface}"))
                });
            if let Some(reason) = reason {
                out.filtered = true;
                out.filter_reason = Some(reason);
            }
            out
        })
        .collect()
}

/// One JSON object per line, sorted by `(doc_id, start, concept_id)`.
pub fn write_mentions_jsonl(mentions: &[Mention]) -> String {
    let mut sorted: Vec<&Mention> = mentions.iter().collect();
    sorted.sort_by(|a, b| (&a.doc_id, a.start, &a.concept_id).cmp(&(&b.doc_id, b.start, &b.concept_id)));
    let mut out = String::new();
    for m in sorted {
        out.push_str(&serde_json::to_string(m).expect("mention serializes"));
        out.push('\n');
    }
    out
}

pub fn parse_mentions_jsonl(text: &str) -> Result<Vec<Mention>, (usize, serde_json::Error)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| (i + 1, e)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::{build_vocabulary, parse_lexicon};

    fn vocab(rows: &str) -> Vocabulary {
        let lex = parse_lexicon(&format!("concept_id,term,is_preferred,parent_ids,group\n{rows}")).unwrap();
        let all = lex.ids().cloned().collect();
        build_vocabulary(&lex, &all).unwrap()
    }

    fn spans(tokens: &[Token]) -> Vec<(&str, usize, usize)> {
        tokens.iter().map(|t| (t.text.as_str(), t.start, t.end)).collect()
    }

    #[test]
    fn tokenize_offsets() {
        assert_eq!(spans(&tokenize("self harm.")), [("self", 0, 4), ("harm", 5, 9)]);
        assert!(tokenize("").is_empty());
        assert_eq!(spans(&tokenize("BPD/anxiety")), [("BPD", 0, 3), ("anxiety", 4, 11)]);
        assert_eq!(spans(&tokenize("I'm — sad")), [("I'm", 0, 3), ("sad", 8, 11)]);
    }

    #[test]
    fn single_term() {
        let v = vocab("C_anx,anxiety,true,,g\n");
        let m = find_mentions(&Document::new("d", "anxiety"), &v);
        assert_eq!(m.len(), 1);
        assert_eq!((m[0].start, m[0].end, m[0].concept_id.as_str()), (0, 7, "C_anx"));
    }

    #[test]
    fn longest_match_wins_and_no_substrings() {
        let v = vocab("A,personality disorder,true,,g\nB,borderline personality disorder,true,,g\nC,harm,true,,g\n");
        let doc = Document::new("d", "Borderline Personality Disorder; pharmacy harm");
        let m = find_mentions(&doc, &v);
        let got: Vec<_> = m.iter().map(|m| (m.concept_id.as_str(), m.surface.as_str())).collect();
        assert_eq!(got, [("B", "Borderline Personality Disorder"), ("C", "harm")]);
    }

    #[test]
    fn multi_word_needs_same_sentence() {
        let v = vocab("A,self harm,true,,g\n");
        assert_eq!(find_mentions(&Document::new("d", "self-harm"), &v).len(), 1);
        assert!(find_mentions(&Document::new("d", "myself. harm"), &v).is_empty());
        assert!(find_mentions(&Document::new("d", "self.\nharm"), &v).is_empty());
    }

    #[test]
    fn earlier_start_breaks_ties() {
        let v = vocab("A,a b,true,,g\nB,b c,true,,g\n");
        let m = find_mentions(&Document::new("d", "a b c"), &v);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].concept_id.as_str(), "A");
    }

    #[test]
    fn shared_term_emits_each_concept() {
        let v = vocab("A,depression,true,,g\nB,depression,true,,g\n");
        let m = find_mentions(&Document::new("d", "depression"), &v);
        assert_eq!(m.iter().map(|m| m.concept_id.as_str()).collect::<Vec<_>>(), ["A", "B"]);
    }

    fn filtered(text: &str, rules: &FilterRules) -> Vec<(bool, Option<String>)> {
        let v = vocab("A,anxiety,true,,g\n");
        let doc = Document::new("d", text);
        let m = find_mentions(&doc, &v);
        apply_filter_rules(&m, &doc, rules).into_iter().map(|m| (m.filtered, m.filter_reason)).collect()
    }

    #[test]
    fn negation_window() {
        let rules = FilterRules { negation_window: 3, ..FilterRules::standard() };
        assert_eq!(filtered("I do not have anxiety", &rules), [(true, Some("negation:not".into()))]);
        assert_eq!(filtered("no friends. anxiety hit me", &rules), [(false, None)]);
        // "not" is four tokens back
        assert_eq!(filtered("not that I really have anxiety", &rules), [(false, None)]);
        assert_eq!(filtered("I Never had anxiety", &rules), [(true, Some("negation:never".into()))]);
    }

    #[test]
    fn empty_rules_identity() {
        assert_eq!(filtered("I do not have anxiety", &FilterRules::default()), [(false, None)]);
    }

    #[test]
    fn stop_list() {
        let rules = FilterRules { stop_surfaces: vec!["Anxiety".into()], ..FilterRules::default() };
        assert_eq!(filtered("so much ANXIETY", &rules), [(true, Some("stop:anxiety".into()))]);
    }

    #[test]
    fn jsonl_sorted_and_parses() {
        let v = vocab("A,anxiety,true,,g\n");
        let mut all = find_mentions(&Document::new("b", "anxiety"), &v);
        all.extend(find_mentions(&Document::new("a", "x anxiety"), &v));
        let text = write_mentions_jsonl(&all);
        assert!(text.starts_with("{\"doc_id\":\"a\",\"concept_id\":\"A\",\"start\":2,\"end\":9"));
        let back = parse_mentions_jsonl(&text).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1], all[0]);
    }
}
