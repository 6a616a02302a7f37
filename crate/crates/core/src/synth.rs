//! Synthetic forum-post corpus with planted concept co-occurrence structure.
//!
//! Each post picks a topic (a cluster of related concepts) and mentions a few
//! of its concepts in template sentences. Some posts also carry an off-topic
//! mention in a non-clinical sentence (gold `Not_ACEs`), a negated mention
//! (gold `Not_ACEs`, caught by the negation filter), or a paraphrase that no
//! lexicon term covers (gold `Manual_ACEs`). Because the generator places
//! every span itself, the gold file is exact.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::eval::{GoldAnnotation, GoldLabel};
use crate::ingest::{Corpus, Document};
use crate::lexicon::{ConceptId, Lexicon};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("topic concept {0} is missing from the lexicon")]
    MissingConcept(String),
    #[error("invalid generator parameters: {0}")]
    Params(String),
}

pub struct Topic {
    pub name: &'static str,
    pub concepts: &'static [&'static str],
}

/// Topic clusters over the bundled lexicon; every concept belongs to one.
pub const TOPICS: &[Topic] = &[
    Topic {
        name: "abuse_survivors",
        concepts: &["C9000011", "C9000012", "C9000013", "C9000014", "C9100040", "C9200018", "C9100043"],
    },
    Topic {
        name: "family_struggles",
        concepts: &["C9000031", "C9000032", "C9000033", "C9000034", "C9000021", "C9000022", "C9000023"],
    },
    Topic {
        name: "anxiety",
        concepts: &["C9100011", "C9100012", "C9100013", "C9100014", "C9100042", "C9100010"],
    },
    Topic {
        name: "depression",
        concepts: &["C9100021", "C9100022", "C9100023", "C9200014", "C9200019", "C9200015", "C9100020"],
    },
    Topic {
        name: "self_harm",
        concepts: &["C9200010", "C9200011", "C9200012", "C9200013", "C9100031", "C9100030"],
    },
    Topic {
        name: "addiction_recovery",
        concepts: &["C9200016", "C9200017", "C9100041", "C9000040", "C9100000"],
    },
];

/// Phrasings of a concept that the lexicon does not contain.
const PARAPHRASES: &[(&str, &[&str])] = &[
    ("C9200011", &["end my life", "kill myself"]),
    ("C9200010", &["hurt myself on purpose"]),
    ("C9100021", &["feel empty inside"]),
    ("C9100011", &["constantly on edge"]),
    ("C9200015", &["have nobody to talk to"]),
    ("C9000011", &["hit me as a kid"]),
    ("C9200018", &["wake up screaming"]),
    ("C9200016", &["using pills to cope"]),
    ("C9000031", &["dad beat my mom"]),
];

const MENTION_TEMPLATES: &[&str] = &[
    "I have been struggling with {} for a long time.",
    "My therapist thinks the {} started when I was young.",
    "Lately the {} has been getting worse.",
    "Honestly {} takes up most of my week.",
    "It feels like {} follows me everywhere.",
    "I read that {} is common for people like me.",
    "Talking about {} with my sister helped a bit.",
    "Some days the {} is all I can think about.",
];

const NOISE_TEMPLATES: &[&str] = &[
    "We watched a documentary that mentioned {} in passing.",
    "My coworker wrote an essay about {} for class.",
    "There was a podcast episode on {} playing in the car.",
    "The news had a story about {} again.",
];

const NEGATED_TEMPLATES: &[&str] = &["I never had {} though.", "There is no {} in my family."];

const PARAPHRASE_TEMPLATES: &[&str] = &["Some nights I just want to {}.", "Part of me wants to {} and be done."];

const FILLERS: &[&str] = &[
    "Anyway, thanks for reading.",
    "Work has been busy this month.",
    "I moved to a new city last year.",
    "Posting from my phone, sorry for formatting.",
    "Any advice would help.",
    "It is raining again here.",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub seed: u64,
    pub n_docs: usize,
    /// Probability of one off-topic, non-clinical mention.
    pub noise_rate: f64,
    pub negation_rate: f64,
    pub paraphrase_rate: f64,
    /// Probability that a post mentions a single concept only.
    pub single_rate: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            seed: 7,
            n_docs: 240,
            noise_rate: 0.35,
            negation_rate: 0.15,
            paraphrase_rate: 0.15,
            single_rate: 0.1,
        }
    }
}

pub struct SynthCorpus {
    pub corpus: Corpus,
    pub gold: Vec<GoldAnnotation>,
}

/// Surface, concept and gold label filling a template's `{}`.
type Slot = (String, ConceptId, GoldLabel);

struct Builder<'a> {
    doc_id: String,
    text: String,
    gold: &'a mut Vec<GoldAnnotation>,
}

impl Builder<'_> {
    fn sentence(&mut self, template: &str, slot: Option<(&str, &ConceptId, GoldLabel)>) {
        if !self.text.is_empty() {
            self.text.push(' ');
        }
        match slot {
            None => self.text.push_str(template),
            Some((surface, concept, label)) => {
                let (before, after) = template.split_once("{}").expect("template has a slot");
                self.text.push_str(before);
                let start = self.text.len();
                self.text.push_str(surface);
                self.gold.push(GoldAnnotation {
                    doc_id: self.doc_id.clone(),
                    start,
                    end: self.text.len(),
                    concept_id: Some(concept.clone()),
                    label,
                });
                self.text.push_str(after);
            }
        }
    }
}

fn surface<'l>(lexicon: &'l Lexicon, id: &ConceptId, rng: &mut ChaCha8Rng) -> &'l str {
    let c = lexicon.get(id).expect("validated");
    if c.synonyms.is_empty() || rng.gen_bool(0.7) {
        &c.preferred_name
    } else {
        c.synonyms.choose(rng).expect("non-empty")
    }
}

fn other_topic(rng: &mut ChaCha8Rng, n: usize, not: usize) -> usize {
    let u = rng.gen_range(0..n - 1);
    if u >= not {
        u + 1
    } else {
        u
    }
}

pub fn generate(lexicon: &Lexicon, params: &SynthParams) -> Result<SynthCorpus, SynthError> {
    for rate in [params.noise_rate, params.negation_rate, params.paraphrase_rate, params.single_rate] {
        if !(0.0..=1.0).contains(&rate) {
            return Err(SynthError::Params("rates must lie in [0, 1]".into()));
        }
    }
    let topics: Vec<Vec<ConceptId>> = TOPICS
        .iter()
        .map(|t| {
            t.concepts
                .iter()
                .map(|id| {
                    let id = ConceptId::new(*id);
                    if lexicon.contains(&id) {
                        Ok(id)
                    } else {
                        Err(SynthError::MissingConcept(id.to_string()))
                    }
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut docs = Vec::with_capacity(params.n_docs);
    let mut gold = Vec::new();
    let width = params.n_docs.max(1).to_string().len().max(4);
    for n in 0..params.n_docs {
        let doc_id = format!("post_{n:0width$}");
        let t = rng.gen_range(0..topics.len());
        let topic = &topics[t];
        let count = if rng.gen_bool(params.single_rate) { 1 } else { rng.gen_range(2..=4.min(topic.len())) };
        let mut picks: Vec<&ConceptId> = topic.choose_multiple(&mut rng, count).collect();
        if count > 1 && rng.gen_bool(0.2) {
            picks.push(picks[0]);
        }

        let mut sentences: Vec<(String, Option<Slot>)> = Vec::new();
        for id in picks {
            let tpl = MENTION_TEMPLATES.choose(&mut rng).expect("templates");
            sentences.push((tpl.to_string(), Some((surface(lexicon, id, &mut rng).to_string(), id.clone(), GoldLabel::NlpTrue))));
        }
        if rng.gen_bool(params.noise_rate) {
            let id = topics[other_topic(&mut rng, topics.len(), t)].choose(&mut rng).expect("topic non-empty");
            let tpl = NOISE_TEMPLATES.choose(&mut rng).expect("templates");
            sentences.push((tpl.to_string(), Some((surface(lexicon, id, &mut rng).to_string(), id.clone(), GoldLabel::NotAces))));
        }
        if rng.gen_bool(params.negation_rate) {
            let id = topic.choose(&mut rng).expect("topic non-empty");
            let tpl = NEGATED_TEMPLATES.choose(&mut rng).expect("templates");
            sentences.push((tpl.to_string(), Some((surface(lexicon, id, &mut rng).to_string(), id.clone(), GoldLabel::NotAces))));
        }
        if rng.gen_bool(params.paraphrase_rate) {
            let candidates: Vec<&(&str, &[&str])> =
                PARAPHRASES.iter().filter(|(id, _)| topic.iter().any(|c| c.as_str() == *id)).collect();
            if let Some((id, phrases)) = candidates.choose(&mut rng) {
                let phrase = phrases.choose(&mut rng).expect("phrases");
                let tpl = PARAPHRASE_TEMPLATES.choose(&mut rng).expect("templates");
                sentences.push((tpl.to_string(), Some((phrase.to_string(), ConceptId::new(*id), GoldLabel::ManualAces))));
            }
        }
        sentences.shuffle(&mut rng);
        for _ in 0..rng.gen_range(0..=2) {
            let at = rng.gen_range(0..=sentences.len());
            sentences.insert(at, (FILLERS.choose(&mut rng).expect("fillers").to_string(), None));
        }

        let mut builder = Builder { doc_id: doc_id.clone(), text: String::new(), gold: &mut gold };
        for (tpl, slot) in &sentences {
            builder.sentence(tpl, slot.as_ref().map(|(s, id, label)| (s.as_str(), id, *label)));
        }
        let mut doc = Document::new(doc_id, builder.text);
        doc.meta.insert("subreddit".into(), TOPICS[t].name.to_string());
        docs.push(doc);
    }
    let corpus = Corpus::new(docs).expect("generated ids are unique");
    Ok(SynthCorpus { corpus, gold })
}
