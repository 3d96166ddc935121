//! Critique-quality benchmark: single-choice music-knowledge quizzes (SCQ)
//! with mechanical answer extraction, rubric judging of open-ended reactions
//! (OEQ) via three fixed prompts, judge-output parsing, weighted
//! aggregation, and report rendering.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::clients::{ChatClient, ChatMessage, ChatParams, ClientError};
use crate::model::{DatasetRecord, SongMetadata};

/// Completeness rubric (16-point scale), shipped verbatim as an asset.
pub const COMPLETENESS_TEMPLATE: &str = include_str!("../prompts/judge/completeness.txt");
/// Accuracy rubric (fact counting), shipped verbatim as an asset.
pub const ACCURACY_TEMPLATE: &str = include_str!("../prompts/judge/accuracy.txt");
/// Novelty rubric (10-point scale), shipped verbatim as an asset.
pub const NOVELTY_TEMPLATE: &str = include_str!("../prompts/judge/novelty.txt");

/// Composite weights for (completeness, accuracy, novelty).
pub const OEQ_WEIGHTS: (f64, f64, f64) = (0.2, 0.6, 0.2);
/// A run with strictly more than this fraction of failed items is invalid.
pub const MAX_FAILURE_RATE: f64 = 0.2;

const FORMAT_REMINDER: &str = "Please follow the output format exactly.";

/// Errors across benchmark loading, parsing, and judging.
#[derive(Debug, Error)]
pub enum JudgeError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("item {id}: {message}")]
    Validation { id: String, message: String },
    #[error("duplicate item id {0:?}")]
    DuplicateId(String),
    #[error("unparsable {what} score: {message}")]
    Score { what: &'static str, message: String },
    #[error("{0}")]
    Domain(String),
    #[error("empty {0}")]
    Empty(&'static str),
    #[error(transparent)]
    Chat(#[from] ClientError),
}

/// The four knowledge areas a quiz item can probe.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum ScqCategory {
    VocalTechnique,
    EmotionExpression,
    MusicalKnowledge,
    Instrumentation,
}

impl fmt::Display for ScqCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ScqCategory::VocalTechnique => "vocal_technique",
            ScqCategory::EmotionExpression => "emotion_expression",
            ScqCategory::MusicalKnowledge => "musical_knowledge",
            ScqCategory::Instrumentation => "instrumentation",
        };
        f.write_str(name)
    }
}

/// One lettered answer option.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScqOption {
    pub letter: char,
    pub text: String,
}

/// The clip a question refers to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioRef {
    pub path: String,
    pub start_s: f64,
    pub end_s: f64,
}

/// A single-choice quiz item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScqItem {
    pub id: String,
    pub question: String,
    /// 4–5 options lettered consecutively from A.
    pub options: Vec<ScqOption>,
    /// The correct option letter.
    pub answer: char,
    pub category: ScqCategory,
    pub audio_ref: AudioRef,
}

fn validate_item(item: &ScqItem) -> Result<(), JudgeError> {
    let fail = |message: String| JudgeError::Validation {
        id: item.id.clone(),
        message,
    };
    if item.id.is_empty() {
        return Err(JudgeError::Validation {
            id: "<unset>".into(),
            message: "id must be non-empty".into(),
        });
    }
    if item.question.trim().is_empty() {
        return Err(fail("question must be non-empty".into()));
    }
    if !(4..=5).contains(&item.options.len()) {
        return Err(fail(format!(
            "expected 4 or 5 options, found {}",
            item.options.len()
        )));
    }
    for (i, opt) in item.options.iter().enumerate() {
        let expected = (b'A' + i as u8) as char;
        if opt.letter != expected {
            return Err(fail(format!(
                "option {} is lettered {:?}, expected consecutive letters from A",
                i + 1,
                opt.letter
            )));
        }
        if opt.text.trim().is_empty() {
            return Err(fail(format!("option {expected} has empty text")));
        }
    }
    if !item.options.iter().any(|o| o.letter == item.answer) {
        return Err(fail(format!(
            "answer {:?} is not one of the {} option letters",
            item.answer,
            item.options.len()
        )));
    }
    if !(item.audio_ref.start_s >= 0.0 && item.audio_ref.end_s > item.audio_ref.start_s) {
        return Err(fail(format!(
            "audio interval [{}, {}] s is not a forward interval",
            item.audio_ref.start_s, item.audio_ref.end_s
        )));
    }
    Ok(())
}

/// Loads a JSONL quiz file, validating every item and rejecting duplicate
/// ids. Blank lines are skipped; an empty file is an empty bank.
pub fn load_scq(path: &Path) -> Result<Vec<ScqItem>, JudgeError> {
    let text = fs::read_to_string(path)?;
    let mut items = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item: ScqItem = serde_json::from_str(line).map_err(|e| JudgeError::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        validate_item(&item)?;
        if !seen.insert(item.id.clone()) {
            return Err(JudgeError::DuplicateId(item.id));
        }
        items.push(item);
    }
    Ok(items)
}

/// True if the character at byte offset `at` is a standalone letter token:
/// not glued to alphanumerics or to symbol neighbors such as `#` (key names
/// like C#) or `&` (R&B).
fn is_standalone(text: &str, at: usize, len: usize) -> bool {
    const GLUE: &str = "#&+-/";
    let before = text[..at].chars().next_back();
    let after = text[at + len..].chars().next();
    let free = |c: Option<char>| match c {
        None => true,
        Some(c) => !c.is_alphanumeric() && !GLUE.contains(c),
    };
    free(before) && free(after)
}

/// Extracts the chosen option letter from free-form model output.
///
/// Cascade: (1) standalone uppercase option letters — exactly one distinct
/// letter wins, two or more are ambiguous; else (2) the unique option whose
/// full text appears (case-insensitively) in the output; else unresolved.
pub fn extract_choice(output: &str, options: &[ScqOption]) -> Option<char> {
    let letters: BTreeSet<char> = options.iter().map(|o| o.letter).collect();
    let mut seen = BTreeSet::new();
    for (at, c) in output.char_indices() {
        if letters.contains(&c) && is_standalone(output, at, c.len_utf8()) {
            seen.insert(c);
        }
    }
    match seen.len() {
        1 => return seen.into_iter().next(),
        0 => {}
        _ => return None,
    }
    let haystack = output.to_lowercase();
    let mut hits = options
        .iter()
        .filter(|o| haystack.contains(&o.text.to_lowercase()));
    match (hits.next(), hits.next()) {
        (Some(only), None) => Some(only.letter),
        _ => None,
    }
}

/// Per-item outcome of a quiz run.
#[derive(Debug, Clone, Serialize)]
pub struct ScqItemLog {
    pub id: String,
    pub answer: char,
    pub extracted: Option<char>,
    pub correct: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Correct/total tally for one category.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct CategoryScore {
    pub correct: usize,
    pub total: usize,
}

impl CategoryScore {
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.total as f64
    }
}

/// Quiz results: overall accuracy, per-category accuracy, per-item log.
#[derive(Debug, Clone, Serialize)]
pub struct ScqReport {
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    pub per_category: BTreeMap<ScqCategory, CategoryScore>,
    pub log: Vec<ScqItemLog>,
}

/// Administers the quiz: `answer_fn` produces free text per item, letters are
/// extracted mechanically, and unresolved or failed items count as incorrect.
pub fn run_scq<F>(mut answer_fn: F, items: &[ScqItem]) -> Result<ScqReport, JudgeError>
where
    F: FnMut(&ScqItem) -> Result<String, ClientError>,
{
    if items.is_empty() {
        return Err(JudgeError::Empty("quiz item list"));
    }
    let mut log = Vec::with_capacity(items.len());
    let mut per_category: BTreeMap<ScqCategory, CategoryScore> = BTreeMap::new();
    let mut correct_n = 0;
    for item in items {
        let (extracted, note) = match answer_fn(item) {
            Ok(text) => {
                let choice = extract_choice(&text, &item.options);
                let note = if choice.is_none() {
                    log::warn!("item {}: no option letter could be extracted", item.id);
                    Some("no option letter could be extracted".to_string())
                } else {
                    None
                };
                (choice, note)
            }
            Err(e) => {
                log::warn!("item {}: answering failed: {e}", item.id);
                (None, Some(format!("answering failed: {e}")))
            }
        };
        let correct = extracted == Some(item.answer);
        correct_n += correct as usize;
        let cat = per_category.entry(item.category).or_default();
        cat.total += 1;
        cat.correct += correct as usize;
        log.push(ScqItemLog {
            id: item.id.clone(),
            answer: item.answer,
            extracted,
            correct,
            note,
        });
    }
    Ok(ScqReport {
        accuracy: correct_n as f64 / items.len() as f64,
        correct: correct_n,
        total: items.len(),
        per_category,
        log,
    })
}

/// The three rubric prompts for one reaction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JudgePrompts {
    pub completeness: String,
    pub accuracy: String,
    pub novelty: String,
}

fn reference_block(meta: &SongMetadata) -> String {
    format!(
        "Title: {}\nComposer: {}\nGenre: {}\nBackground: {}\nTags: {}\n",
        meta.title,
        meta.composer,
        meta.genre,
        meta.background,
        meta.tags.join(", ")
    )
}

/// Assembles the three judging prompts: each rubric asset verbatim, the
/// reaction under a `## Reaction` delimiter, and (accuracy only) the
/// reference song metadata the facts are checked against.
pub fn build_judge_prompts(
    reaction_text: &str,
    meta: &SongMetadata,
) -> Result<JudgePrompts, JudgeError> {
    if reaction_text.trim().is_empty() {
        return Err(JudgeError::Empty("reaction text"));
    }
    let reaction = format!("\n## Reaction\n{reaction_text}\n");
    Ok(JudgePrompts {
        completeness: format!("{COMPLETENESS_TEMPLATE}{reaction}"),
        accuracy: format!(
            "{ACCURACY_TEMPLATE}\n## Reference Song Information\n{}{reaction}",
            reference_block(meta)
        ),
        novelty: format!("{NOVELTY_TEMPLATE}{reaction}"),
    })
}

/// SHA-256 of each rubric asset, for stamping into run metadata.
pub fn judge_prompt_hashes() -> [(&'static str, String); 3] {
    let hash = |s: &str| hex::encode(Sha256::digest(s.as_bytes()));
    [
        ("completeness", hash(COMPLETENESS_TEMPLATE)),
        ("accuracy", hash(ACCURACY_TEMPLATE)),
        ("novelty", hash(NOVELTY_TEMPLATE)),
    ]
}

/// A parsed rubric score: raw points and the 0–1 normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RubricScore {
    pub raw: f64,
    pub normalized: f64,
}

fn tail_of(output: &str) -> String {
    let tail: String = output.chars().rev().take(120).collect();
    tail.chars().rev().collect()
}

fn scale_regex(label: &str) -> Regex {
    Regex::new(&format!(
        r"{}\s*([0-9]+(?:\.[0-9]+)?)(?:\s*/\s*([0-9]+(?:\.[0-9]+)?))?",
        regex::escape(label)
    ))
    .expect("static score pattern")
}

fn parse_scale(
    output: &str,
    what: &'static str,
    label: &str,
    scale: f64,
) -> Result<RubricScore, JudgeError> {
    let re = scale_regex(label);
    let caps = re.captures_iter(output).last().ok_or_else(|| JudgeError::Score {
        what,
        message: format!("no {label:?} line in output ending {:?}", tail_of(output)),
    })?;
    if let Some(denom) = caps.get(2) {
        let denom: f64 = denom.as_str().parse().expect("digits-only capture");
        if denom != scale {
            return Err(JudgeError::Score {
                what,
                message: format!("denominator {denom} where {scale} was expected"),
            });
        }
    }
    let raw: f64 = caps[1].parse().expect("digits-only capture");
    if !(0.0..=scale).contains(&raw) {
        return Err(JudgeError::Score {
            what,
            message: format!("value {raw} outside [0, {scale}]"),
        });
    }
    Ok(RubricScore {
        raw,
        normalized: raw / scale,
    })
}

/// Parses the 16-point completeness verdict: the number after the last
/// "Total score:", as either "x/16" or bare "x".
pub fn parse_completeness(output: &str) -> Result<RubricScore, JudgeError> {
    parse_scale(output, "completeness", "Total score:", 16.0)
}

/// Parses the 10-point novelty verdict: the number after the last
/// "Overall score:", as either "x/10" or bare "x".
pub fn parse_novelty(output: &str) -> Result<RubricScore, JudgeError> {
    parse_scale(output, "novelty", "Overall score:", 10.0)
}

/// Fact tallies from the accuracy judge.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct FactCounts {
    pub total: u32,
    pub correct: u32,
    pub incorrect: u32,
}

/// Parsed accuracy verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyParse {
    pub counts: FactCounts,
    /// Correct-fact ratio in [0, 1].
    pub ratio: f64,
    /// The judge found nothing verifiable; ratio is pinned to 0.
    pub no_facts: bool,
}

fn count_re(label: &str) -> Regex {
    Regex::new(&format!(r"{}\s*([0-9]+)\b", regex::escape(label))).expect("static count pattern")
}

fn last_count(output: &str, label: &str) -> Option<u32> {
    count_re(label)
        .captures_iter(output)
        .last()
        .map(|c| c[1].parse().expect("digits-only capture"))
}

fn ratio_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"Accuracy:\s*([0-9]+(?:\.[0-9]+)?)\s*(?:(%)|/\s*([0-9]+(?:\.[0-9]+)?))?")
            .expect("static ratio pattern")
    })
}

fn last_ratio(output: &str) -> Option<Result<f64, JudgeError>> {
    let caps = ratio_re().captures_iter(output).last()?;
    let num: f64 = caps[1].parse().expect("digits-only capture");
    let value = if caps.get(2).is_some() {
        num / 100.0
    } else if let Some(denom) = caps.get(3) {
        let denom: f64 = denom.as_str().parse().expect("digits-only capture");
        if denom == 0.0 {
            return Some(Err(JudgeError::Score {
                what: "accuracy",
                message: "ratio with zero denominator".into(),
            }));
        }
        num / denom
    } else {
        num
    };
    if !(0.0..=1.0).contains(&value) {
        return Some(Err(JudgeError::Score {
            what: "accuracy",
            message: format!("ratio {value} outside [0, 1]"),
        }));
    }
    Some(Ok(value))
}

/// Parses the accuracy judge's count block ("Total factual statements" /
/// "Correct facts" / "Incorrect facts") and "Accuracy:" ratio line. Counts
/// are preferred: a stated ratio more than 0.01 away from correct/total is
/// replaced by the recomputed value. Zero facts scores 0 with a flag.
pub fn parse_accuracy(output: &str) -> Result<AccuracyParse, JudgeError> {
    let total = last_count(output, "Total factual statements:");
    let correct = last_count(output, "Correct facts:");
    let incorrect = last_count(output, "Incorrect facts:");
    let stated = last_ratio(output).transpose()?;
    match (total, correct, incorrect) {
        (Some(total), Some(correct), Some(incorrect)) => {
            if correct + incorrect != total {
                return Err(JudgeError::Score {
                    what: "accuracy",
                    message: format!(
                        "inconsistent counts: {correct} correct + {incorrect} incorrect != {total} total"
                    ),
                });
            }
            let counts = FactCounts {
                total,
                correct,
                incorrect,
            };
            if total == 0 {
                return Ok(AccuracyParse {
                    counts,
                    ratio: 0.0,
                    no_facts: true,
                });
            }
            let recomputed = correct as f64 / total as f64;
            let ratio = match stated {
                Some(r) if (r - recomputed).abs() <= 0.01 => r,
                Some(r) => {
                    log::warn!(
                        "stated accuracy {r} disagrees with {correct}/{total}; using the counts"
                    );
                    recomputed
                }
                None => recomputed,
            };
            Ok(AccuracyParse {
                counts,
                ratio,
                no_facts: false,
            })
        }
        _ => match stated {
            Some(ratio) => Ok(AccuracyParse {
                counts: FactCounts::default(),
                ratio,
                no_facts: false,
            }),
            None => Err(JudgeError::Score {
                what: "accuracy",
                message: format!(
                    "neither fact counts nor an \"Accuracy:\" line in output ending {:?}",
                    tail_of(output)
                ),
            }),
        },
    }
}

/// Combines three normalized scores into the 0.2/0.6/0.2 composite and the
/// plain mean.
pub fn weighted_oeq(c: f64, a: f64, n: f64) -> Result<(f64, f64), JudgeError> {
    for (name, v) in [("completeness", c), ("accuracy", a), ("novelty", n)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(JudgeError::Domain(format!(
                "{name} score {v} outside [0, 1]"
            )));
        }
    }
    let (wc, wa, wn) = OEQ_WEIGHTS;
    Ok((wc * c + wa * a + wn * n, (c + a + n) / 3.0))
}

/// Fully combined scores for one reaction (or an aggregate of many).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JudgeScores {
    pub completeness: f64,
    pub accuracy: f64,
    pub novelty: f64,
    pub weighted: f64,
    pub unweighted_mean: f64,
    /// Completeness points on the 16-point scale.
    pub raw_completeness: f64,
    /// Novelty points on the 10-point scale.
    pub raw_novelty: f64,
    pub fact_counts: FactCounts,
}

impl JudgeScores {
    /// Combines the three parsed verdicts.
    pub fn from_parts(
        comp: RubricScore,
        acc: AccuracyParse,
        nov: RubricScore,
    ) -> Result<Self, JudgeError> {
        let (weighted, unweighted_mean) = weighted_oeq(comp.normalized, acc.ratio, nov.normalized)?;
        Ok(JudgeScores {
            completeness: comp.normalized,
            accuracy: acc.ratio,
            novelty: nov.normalized,
            weighted,
            unweighted_mean,
            raw_completeness: comp.raw,
            raw_novelty: nov.raw,
            fact_counts: acc.counts,
        })
    }
}

/// One evaluated record; `scores` is None when judging failed after retry.
#[derive(Debug, Clone, Serialize)]
pub struct OeqItemResult {
    pub id: String,
    pub scores: Option<JudgeScores>,
    pub no_facts: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Whole-run results of open-ended judging.
#[derive(Debug, Clone, Serialize)]
pub struct OeqReport {
    /// Per-dimension means over scored items (fact counts are corpus sums);
    /// None when nothing was scored.
    pub aggregate: Option<JudgeScores>,
    pub per_item: Vec<OeqItemResult>,
    pub scored: usize,
    pub excluded: usize,
    /// False when strictly more than [`MAX_FAILURE_RATE`] of items failed.
    pub valid: bool,
}

fn judge_once<T>(
    judge: &(impl ChatClient + ?Sized),
    prompt: &str,
    params: &ChatParams,
    parse: impl Fn(&str) -> Result<T, JudgeError>,
) -> Result<T, JudgeError> {
    let reply = judge.chat(&[ChatMessage::user(prompt)], params)?;
    match parse(&reply) {
        Ok(v) => Ok(v),
        Err(first) => {
            log::warn!("judge output failed to parse ({first}); retrying with a reminder");
            let reply = judge.chat(
                &[ChatMessage::user(format!("{prompt}\n\n{FORMAT_REMINDER}"))],
                params,
            )?;
            parse(&reply)
        }
    }
}

fn judge_item(
    judge: &(impl ChatClient + ?Sized),
    rec: &DatasetRecord,
    reaction: &str,
    params: &ChatParams,
    trials: usize,
) -> Result<(JudgeScores, bool), JudgeError> {
    let prompts = build_judge_prompts(reaction, &rec.song_meta)?;
    let (mut c_raw, mut a_ratio, mut n_raw) = (0.0, 0.0, 0.0);
    let mut counts = FactCounts::default();
    let mut no_facts = false;
    for trial in 0..trials {
        let comp = judge_once(judge, &prompts.completeness, params, parse_completeness)?;
        let acc = judge_once(judge, &prompts.accuracy, params, parse_accuracy)?;
        let nov = judge_once(judge, &prompts.novelty, params, parse_novelty)?;
        c_raw += comp.raw;
        a_ratio += acc.ratio;
        n_raw += nov.raw;
        no_facts |= acc.no_facts;
        if trial == 0 {
            counts = acc.counts;
        }
    }
    let t = trials as f64;
    let comp = RubricScore {
        raw: c_raw / t,
        normalized: c_raw / t / 16.0,
    };
    let nov = RubricScore {
        raw: n_raw / t,
        normalized: n_raw / t / 10.0,
    };
    let acc = AccuracyParse {
        counts,
        ratio: a_ratio / t,
        no_facts,
    };
    Ok((JudgeScores::from_parts(comp, acc, nov)?, no_facts))
}

/// Judges every record's reaction on the three rubrics, concurrently.
///
/// A parse failure is retried once with a format reminder appended; a record
/// that still fails (or whose reaction cannot be produced) is excluded from
/// the aggregate and counted. The run is invalid when exclusions exceed 20%.
pub fn run_oeq<M, C>(
    model_fn: M,
    judge: &C,
    records: &[DatasetRecord],
    trials_per_item: usize,
) -> Result<OeqReport, JudgeError>
where
    M: Fn(&DatasetRecord) -> Result<String, ClientError> + Sync,
    C: ChatClient + ?Sized,
{
    if records.is_empty() {
        return Err(JudgeError::Empty("evaluation record list"));
    }
    if trials_per_item == 0 {
        return Err(JudgeError::Domain("trials_per_item must be at least 1".into()));
    }
    let params = ChatParams {
        temperature: 0.0,
        ..ChatParams::default()
    };
    let per_item: Vec<OeqItemResult> = records
        .par_iter()
        .map(|rec| {
            let reaction = match model_fn(rec) {
                Ok(text) => text,
                Err(e) => {
                    return OeqItemResult {
                        id: rec.id.clone(),
                        scores: None,
                        no_facts: false,
                        note: Some(format!("reaction generation failed: {e}")),
                    }
                }
            };
            match judge_item(judge, rec, &reaction, &params, trials_per_item) {
                Ok((scores, no_facts)) => OeqItemResult {
                    id: rec.id.clone(),
                    scores: Some(scores),
                    no_facts,
                    note: None,
                },
                Err(e) => {
                    log::warn!("record {}: judging failed: {e}", rec.id);
                    OeqItemResult {
                        id: rec.id.clone(),
                        scores: None,
                        no_facts: false,
                        note: Some(format!("judging failed: {e}")),
                    }
                }
            }
        })
        .collect();

    let scored_items: Vec<&JudgeScores> =
        per_item.iter().filter_map(|i| i.scores.as_ref()).collect();
    let scored = scored_items.len();
    let excluded = per_item.len() - scored;
    let valid = (excluded as f64 / per_item.len() as f64) <= MAX_FAILURE_RATE;
    let aggregate = if scored == 0 {
        None
    } else {
        let n = scored as f64;
        let mean = |f: fn(&JudgeScores) -> f64| scored_items.iter().map(|s| f(s)).sum::<f64>() / n;
        let comp = RubricScore {
            raw: mean(|s| s.raw_completeness),
            normalized: mean(|s| s.completeness),
        };
        let nov = RubricScore {
            raw: mean(|s| s.raw_novelty),
            normalized: mean(|s| s.novelty),
        };
        let acc = AccuracyParse {
            counts: FactCounts {
                total: scored_items.iter().map(|s| s.fact_counts.total).sum(),
                correct: scored_items.iter().map(|s| s.fact_counts.correct).sum(),
                incorrect: scored_items.iter().map(|s| s.fact_counts.incorrect).sum(),
            },
            ratio: mean(|s| s.accuracy),
            no_facts: false,
        };
        Some(JudgeScores::from_parts(comp, acc, nov)?)
    };
    Ok(OeqReport {
        aggregate,
        per_item,
        scored,
        excluded,
        valid,
    })
}

/// One rendered benchmark row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub scq: f64,
    pub completeness: f64,
    pub accuracy: f64,
    pub novelty: f64,
    pub weighted: f64,
}

const REPORT_COLUMNS: [&str; 6] = [
    "Model",
    "SCQ",
    "Completeness",
    "Accuracy",
    "Novelty",
    "Weighted Avg",
];

fn row_values(row: &ReportRow) -> [f64; 5] {
    [
        row.scq,
        row.completeness,
        row.accuracy,
        row.novelty,
        row.weighted,
    ]
}

/// Renders aligned results as a markdown table (column-best values bolded,
/// ties all bold) and a CSV, both at 3 decimals.
pub fn render_report(rows: &[ReportRow]) -> (String, String) {
    // Compare at displayed precision so formatting and bolding agree.
    let milli = |v: f64| (v * 1000.0).round() as i64;
    let mut best = [i64::MIN; 5];
    for row in rows {
        for (b, v) in best.iter_mut().zip(row_values(row)) {
            *b = (*b).max(milli(v));
        }
    }

    let mut md = format!("| {} |\n", REPORT_COLUMNS.join(" | "));
    md.push_str(&format!("|{}\n", " --- |".repeat(REPORT_COLUMNS.len())));
    let mut csv = String::from("model,scq,completeness,accuracy,novelty,weighted_avg\n");
    for row in rows {
        let cells: Vec<String> = row_values(row)
            .iter()
            .zip(best)
            .map(|(&v, b)| {
                if milli(v) == b {
                    format!("**{v:.3}**")
                } else {
                    format!("{v:.3}")
                }
            })
            .collect();
        md.push_str(&format!("| {} | {} |\n", row.model, cells.join(" | ")));
        let plain: Vec<String> = row_values(row).iter().map(|v| format!("{v:.3}")).collect();
        csv.push_str(&format!("{},{}\n", row.model, plain.join(",")));
    }
    (md, csv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clients::Content;
    use crate::model::test_support::sample_record;
    use proptest::prelude::*;
    use std::io::Write;

    fn option(letter: char, text: &str) -> ScqOption {
        ScqOption {
            letter,
            text: text.into(),
        }
    }

    fn key_item() -> ScqItem {
        ScqItem {
            id: "key-1".into(),
            question: "What is the key of the song?".into(),
            options: vec![
                option('A', "C# Major"),
                option('B', "Ab Major"),
                option('C', "F# Major"),
                option('D', "D Major"),
            ],
            answer: 'A',
            category: ScqCategory::MusicalKnowledge,
            audio_ref: AudioRef {
                path: "clips/key.wav".into(),
                start_s: 0.0,
                end_s: 12.0,
            },
        }
    }

    fn technique_item() -> ScqItem {
        ScqItem {
            id: "tech-1".into(),
            question: "Which vocal technique does the singer use?".into(),
            options: vec![
                option('A', "Resonance Dominant"),
                option('B', "Vocal Fold Edge Vibration"),
                option('C', "Growl / Distortion"),
                option('D', "Countertenor"),
            ],
            answer: 'C',
            category: ScqCategory::VocalTechnique,
            audio_ref: AudioRef {
                path: "clips/tech.wav".into(),
                start_s: 3.0,
                end_s: 18.0,
            },
        }
    }

    fn write_jsonl(dir: &std::path::Path, items: &[ScqItem]) -> std::path::PathBuf {
        let path = dir.join("items.jsonl");
        let mut f = std::fs::File::create(&path).unwrap();
        for item in items {
            writeln!(f, "{}", serde_json::to_string(item).unwrap()).unwrap();
        }
        path
    }

    #[test]
    fn quiz_bank_round_trips_through_jsonl() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_jsonl(dir.path(), &[key_item(), technique_item()]);
        let items = load_scq(&path).unwrap();
        assert_eq!(items.len(), 2);
        assert_eq!(items[0].category, ScqCategory::MusicalKnowledge);
        assert_eq!(items[0].options[2].text, "F# Major");
        assert_eq!(items[1].answer, 'C');
    }

    #[test]
    fn empty_file_is_an_empty_bank() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("none.jsonl");
        std::fs::write(&path, "").unwrap();
        assert!(load_scq(&path).unwrap().is_empty());
    }

    #[test]
    fn invalid_items_are_rejected_by_id() {
        let dir = tempfile::tempdir().unwrap();
        let mut bad_answer = key_item();
        bad_answer.answer = 'E';
        let path = write_jsonl(dir.path(), &[bad_answer]);
        let err = load_scq(&path).unwrap_err();
        assert!(matches!(&err, JudgeError::Validation { id, .. } if id == "key-1"));
        assert!(err.to_string().contains("'E'"), "{err}");

        let mut gap = key_item();
        gap.options[2].letter = 'D';
        let path = write_jsonl(dir.path(), &[gap]);
        assert!(matches!(
            load_scq(&path),
            Err(JudgeError::Validation { .. })
        ));

        let mut few = key_item();
        few.options.truncate(3);
        few.answer = 'B';
        let path = write_jsonl(dir.path(), &[few]);
        assert!(matches!(
            load_scq(&path),
            Err(JudgeError::Validation { .. })
        ));

        let path = write_jsonl(dir.path(), &[key_item(), key_item()]);
        assert!(matches!(load_scq(&path), Err(JudgeError::DuplicateId(id)) if id == "key-1"));
    }

    #[test]
    fn bad_category_names_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let mut json = serde_json::to_value(key_item()).unwrap();
        json["category"] = "astrology".into();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, format!("{json}\n")).unwrap();
        let err = load_scq(&path).unwrap_err();
        assert!(matches!(err, JudgeError::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn standalone_letter_wins() {
        let opts = key_item().options;
        assert_eq!(extract_choice("The answer is B.", &opts), Some('B'));
        assert_eq!(extract_choice("(C)", &opts), Some('C'));
        assert_eq!(extract_choice("option D: final", &opts), Some('D'));
        assert_eq!(extract_choice("I pick A", &opts), Some('A'));
        // Repeats of one letter are not ambiguous.
        assert_eq!(extract_choice("B... yes, B.", &opts), Some('B'));
    }

    #[test]
    fn two_distinct_letters_are_ambiguous() {
        let opts = key_item().options;
        assert_eq!(extract_choice("Either A or B", &opts), None);
    }

    #[test]
    fn option_text_resolves_when_no_letter_is_standalone() {
        let opts = technique_item().options;
        assert_eq!(
            extract_choice("It uses growl / distortion throughout", &opts),
            Some('C')
        );
        // Key names glued to '#' are not letter mentions; the full option
        // text match picks the right letter instead.
        let key_opts = key_item().options;
        assert_eq!(extract_choice("The key is C# Major.", &key_opts), Some('A'));
        // R&B's letter is glued to '&' and stays out of rule 1.
        assert_eq!(extract_choice("Classic R&B groove, I pick D", &key_opts), Some('D'));
    }

    #[test]
    fn unresolvable_output_is_none() {
        let opts = key_item().options;
        assert_eq!(extract_choice("no idea, sorry", &opts), None);
        assert_eq!(extract_choice("", &opts), None);
        // A letter outside the option range does not count.
        assert_eq!(extract_choice("F would be my guess", &opts), None);
    }

    #[test]
    fn oracle_answers_score_one_and_unresolved_scores_zero() {
        let items = vec![key_item(), technique_item()];
        let report = run_scq(|item| Ok(format!("The answer is {}.", item.answer)), &items).unwrap();
        assert_eq!(report.accuracy, 1.0);
        assert_eq!(report.correct, 2);
        assert!(report.log.iter().all(|l| l.correct && l.note.is_none()));

        let report = run_scq(|_| Ok("hmm, unclear".to_string()), &items).unwrap();
        assert_eq!(report.accuracy, 0.0);
        assert!(report.log.iter().all(|l| !l.correct && l.note.is_some()));
    }

    #[test]
    fn fixed_letter_on_skewed_bank_scores_its_share() {
        // 40 items, 'A' is correct for exactly 10 of them.
        let items: Vec<ScqItem> = (0..40)
            .map(|i| {
                let mut item = key_item();
                item.id = format!("q{i}");
                item.answer = if i % 4 == 0 { 'A' } else { 'B' };
                item
            })
            .collect();
        let report = run_scq(|_| Ok("A".to_string()), &items).unwrap();
        assert_eq!(report.accuracy, 0.25);
    }

    #[test]
    fn answer_failures_mark_items_incorrect_with_notes() {
        let items = vec![key_item(), technique_item()];
        let report = run_scq(
            |item| {
                if item.id == "key-1" {
                    Err(ClientError::Transport("socket closed".into()))
                } else {
                    Ok(format!("{}", item.answer))
                }
            },
            &items,
        )
        .unwrap();
        assert_eq!(report.accuracy, 0.5);
        assert!(report.log[0].note.as_ref().unwrap().contains("socket closed"));
        let cat = &report.per_category[&ScqCategory::MusicalKnowledge];
        assert_eq!((cat.correct, cat.total), (0, 1));
    }

    #[test]
    fn empty_bank_is_rejected() {
        assert!(matches!(
            run_scq(|_| Ok(String::new()), &[]),
            Err(JudgeError::Empty(_))
        ));
    }

    fn meta() -> SongMetadata {
        sample_record("m").song_meta
    }

    #[test]
    fn prompts_embed_assets_unchanged() {
        let p = build_judge_prompts("a sharp, lively take", &meta()).unwrap();
        assert!(p.completeness.starts_with(COMPLETENESS_TEMPLATE));
        assert!(p.accuracy.starts_with(ACCURACY_TEMPLATE));
        assert!(p.novelty.starts_with(NOVELTY_TEMPLATE));
        assert!(p.completeness.contains("Scoring Criteria (total 16 points)"));
        assert!(p.novelty.contains("Scoring Standard (10-point scale)"));
        for text in [&p.completeness, &p.accuracy, &p.novelty] {
            assert!(text.contains("\n## Reaction\na sharp, lively take\n"));
        }
        assert!(p.accuracy.contains("## Reference Song Information"));
        assert!(p.accuracy.contains(&format!("Title: {}", meta().title)));
        assert!(!p.completeness.contains("## Reference Song Information"));

        let again = build_judge_prompts("a sharp, lively take", &meta()).unwrap();
        assert_eq!(p, again);
        assert!(build_judge_prompts("  \n", &meta()).is_err());
    }

    #[test]
    fn asset_hashes_are_stable_and_distinct() {
        let hashes = judge_prompt_hashes();
        assert_eq!(hashes.len(), 3);
        for (_, h) in &hashes {
            assert_eq!(h.len(), 64);
        }
        assert_ne!(hashes[0].1, hashes[1].1);
        assert_ne!(hashes[1].1, hashes[2].1);
        assert_eq!(hashes, judge_prompt_hashes());
    }

    #[test]
    fn completeness_parses_both_formats() {
        let s = parse_completeness("...\nTotal score: 15.5/16\nOverall evaluation: solid").unwrap();
        assert_eq!(s.raw, 15.5);
        assert_eq!(s.normalized, 0.96875);
        let s = parse_completeness("Total score: 15.5").unwrap();
        assert_eq!(s.raw, 15.5);
        let s = parse_completeness("Total score: 0/16").unwrap();
        assert_eq!(s.normalized, 0.0);
    }

    #[test]
    fn completeness_uses_the_last_occurrence() {
        let out = "as in \"Total score: 15.5/16\" ... my verdict\nTotal score: 12/16";
        assert_eq!(parse_completeness(out).unwrap().raw, 12.0);
    }

    #[test]
    fn completeness_rejects_bad_totals() {
        assert!(matches!(
            parse_completeness("Total score: 17/16"),
            Err(JudgeError::Score { .. })
        ));
        assert!(matches!(
            parse_completeness("Total score: 12/15"),
            Err(JudgeError::Score { .. })
        ));
        let err = parse_completeness("no verdict here").unwrap_err();
        assert!(err.to_string().contains("Total score:"), "{err}");
    }

    #[test]
    fn novelty_parses_template_shaped_output() {
        let out = "Novelty statistics:\n- Total novel content: 4 items\n- Novelty score: 3/4\n- Overall score: 7/10\n\nOverall evaluation: inventive";
        let s = parse_novelty(out).unwrap();
        assert_eq!(s.raw, 7.0);
        assert_eq!(s.normalized, 0.7);
        assert_eq!(parse_novelty("Overall score: 0/10").unwrap().normalized, 0.0);
        assert!(parse_novelty("Novelty score: 3/4").is_err());
    }

    #[test]
    fn accuracy_parses_counts_and_ratio_formats() {
        let block = "Accuracy statistics:\n- Total factual statements: 8\n- Correct facts: 6\n- Incorrect facts: 2\n- Accuracy: 0.75";
        let a = parse_accuracy(block).unwrap();
        assert_eq!(a.ratio, 0.75);
        assert_eq!(
            a.counts,
            FactCounts {
                total: 8,
                correct: 6,
                incorrect: 2
            }
        );
        assert!(!a.no_facts);

        let pct = block.replace("Accuracy: 0.75", "Accuracy: 75%");
        assert_eq!(parse_accuracy(&pct).unwrap().ratio, 0.75);
        let frac = block.replace("Accuracy: 0.75", "Accuracy: 6/8");
        assert_eq!(parse_accuracy(&frac).unwrap().ratio, 0.75);
    }

    #[test]
    fn accuracy_prefers_recomputed_ratio_on_mismatch() {
        let out = "Total factual statements: 8\nCorrect facts: 6\nIncorrect facts: 2\nAccuracy: 0.9";
        assert_eq!(parse_accuracy(out).unwrap().ratio, 0.75);
    }

    #[test]
    fn accuracy_zero_facts_flags_and_scores_zero() {
        let out = "Total factual statements: 0\nCorrect facts: 0\nIncorrect facts: 0\nAccuracy: 1";
        let a = parse_accuracy(out).unwrap();
        assert_eq!(a.ratio, 0.0);
        assert!(a.no_facts);
    }

    #[test]
    fn accuracy_degenerate_and_broken_outputs() {
        // Ratio only: accepted.
        assert_eq!(parse_accuracy("Accuracy: 0.4").unwrap().ratio, 0.4);
        // Nothing at all: error carrying the tail.
        let err = parse_accuracy("the song is nice").unwrap_err();
        assert!(err.to_string().contains("the song is nice"), "{err}");
        // Inconsistent counts: error.
        assert!(parse_accuracy(
            "Total factual statements: 8\nCorrect facts: 6\nIncorrect facts: 1\nAccuracy: 0.75"
        )
        .is_err());
        // Out-of-range ratio: error.
        assert!(parse_accuracy("Accuracy: 1.2").is_err());
    }

    #[test]
    fn composite_reproduces_published_rows() {
        let (w, _) = weighted_oeq(0.969, 0.490, 0.981).unwrap();
        assert!((w - 0.684).abs() < 0.0015);
        let (w, u) = weighted_oeq(0.770, 0.515, 0.569).unwrap();
        assert!((w - 0.577).abs() < 0.0015);
        assert!((u - 0.618).abs() < 0.0015);
        let (w, u) = weighted_oeq(1.0, 1.0, 1.0).unwrap();
        assert_eq!((w, u), (1.0, 1.0));
        assert!(weighted_oeq(1.1, 0.5, 0.5).is_err());
        assert!(weighted_oeq(0.5, -0.1, 0.5).is_err());
    }

    /// All nine reference rows: (scq, completeness, accuracy, novelty,
    /// printed weighted average).
    pub(crate) const REFERENCE_ROWS: [(f64, f64, f64, f64, f64); 9] = [
        (0.368, 0.969, 0.490, 0.981, 0.684),
        (0.583, 0.968, 0.474, 0.972, 0.672),
        (0.450, 0.891, 0.452, 0.889, 0.627),
        (0.450, 0.777, 0.284, 0.769, 0.480),
        (0.325, 0.685, 0.448, 0.481, 0.502),
        (0.200, 0.778, 0.622, 0.769, 0.683),
        (0.375, 0.777, 0.735, 0.713, 0.739),
        (0.600, 0.559, 0.247, 0.574, 0.375),
        (0.650, 0.770, 0.515, 0.569, 0.577),
    ];

    #[test]
    fn composite_matches_every_reference_row() {
        for (i, &(_, c, a, n, printed)) in REFERENCE_ROWS.iter().enumerate() {
            let (w, _) = weighted_oeq(c, a, n).unwrap();
            assert!(
                (w - printed).abs() < 0.0015,
                "row {i}: {w} vs printed {printed}"
            );
        }
    }

    #[test]
    fn composite_is_monotone_and_bounded() {
        let (base, _) = weighted_oeq(0.5, 0.5, 0.5).unwrap();
        for bump in [
            (0.6, 0.5, 0.5),
            (0.5, 0.6, 0.5),
            (0.5, 0.5, 0.6),
        ] {
            let (w, _) = weighted_oeq(bump.0, bump.1, bump.2).unwrap();
            assert!(w > base);
            assert!((0.0..=1.0).contains(&w));
        }
    }

    /// Content-routed judge: picks the canned reply by which rubric the
    /// prompt carries; reactions holding fault markers get garbage back
    /// (once, or always).
    struct RubricJudge {
        comp: String,
        acc: String,
        nov: String,
    }

    impl RubricJudge {
        fn scoring(c: f64, a_correct: u32, a_total: u32, n: f64) -> Self {
            RubricJudge {
                comp: format!("Sub score: ...\nTotal score: {}/16", c * 16.0),
                acc: format!(
                    "Total factual statements: {a_total}\nCorrect facts: {a_correct}\nIncorrect facts: {}\nAccuracy: {}",
                    a_total - a_correct,
                    a_correct as f64 / a_total as f64
                ),
                nov: format!("Overall score: {}/10", n * 10.0),
            }
        }
    }

    impl ChatClient for RubricJudge {
        fn chat(
            &self,
            messages: &[ChatMessage],
            _params: &ChatParams,
        ) -> Result<String, ClientError> {
            let Content::Text(prompt) = &messages[0].content else {
                return Err(ClientError::InvalidInput("text prompts only".into()));
            };
            if prompt.contains("[[ALWAYSBAD]]") {
                return Ok("gibberish with no verdict".into());
            }
            if prompt.contains("[[BADFMT]]") && !prompt.contains(FORMAT_REMINDER) {
                return Ok("gibberish with no verdict".into());
            }
            if prompt.contains("Scoring Criteria (total 16 points)") {
                Ok(self.comp.clone())
            } else if prompt.contains("Scoring Standard (10-point scale)") {
                Ok(self.nov.clone())
            } else {
                Ok(self.acc.clone())
            }
        }
    }

    fn eval_records(n: usize) -> Vec<DatasetRecord> {
        (0..n).map(|i| sample_record(&format!("r{i}"))).collect()
    }

    #[test]
    fn constant_judges_average_to_their_score() {
        let judge = RubricJudge::scoring(0.8, 5, 10, 0.6);
        let records = eval_records(10);
        let report = run_oeq(|r| Ok(format!("take on {}", r.id)), &judge, &records, 1).unwrap();
        assert_eq!(report.scored, 10);
        assert_eq!(report.excluded, 0);
        assert!(report.valid);
        let agg = report.aggregate.unwrap();
        assert!((agg.completeness - 0.8).abs() < 1e-12);
        assert!((agg.accuracy - 0.5).abs() < 1e-12);
        assert!((agg.novelty - 0.6).abs() < 1e-12);
        assert!((agg.weighted - 0.58).abs() < 1e-12);
        assert_eq!(agg.fact_counts.total, 100);
        assert_eq!(report.per_item.len(), 10);
        for (item, rec) in report.per_item.iter().zip(&records) {
            assert_eq!(item.id, rec.id);
        }
    }

    #[test]
    fn format_retry_rescues_a_flaky_judge() {
        let judge = RubricJudge::scoring(0.8, 5, 10, 0.6);
        let records = eval_records(10);
        let report = run_oeq(
            |r| {
                if r.id == "r3" {
                    Ok("take [[BADFMT]]".to_string())
                } else {
                    Ok("take".to_string())
                }
            },
            &judge,
            &records,
            1,
        )
        .unwrap();
        assert_eq!((report.scored, report.excluded), (10, 0));
        assert!(report.valid);
    }

    #[test]
    fn persistent_failures_invalidate_past_twenty_percent() {
        let judge = RubricJudge::scoring(0.8, 5, 10, 0.6);
        let records = eval_records(10);
        let bad = |r: &DatasetRecord| {
            if ["r1", "r4", "r7"].contains(&r.id.as_str()) {
                Ok("take [[ALWAYSBAD]]".to_string())
            } else {
                Ok("take".to_string())
            }
        };
        let report = run_oeq(bad, &judge, &records, 1).unwrap();
        assert_eq!((report.scored, report.excluded), (7, 3));
        assert!(!report.valid);
        for id in ["r1", "r4", "r7"] {
            let item = report.per_item.iter().find(|i| i.id == id).unwrap();
            assert!(item.scores.is_none());
            assert!(item.note.is_some());
        }

        // Exactly 20% excluded is still valid (strict threshold).
        let edge = |r: &DatasetRecord| {
            if ["r1", "r4"].contains(&r.id.as_str()) {
                Ok("take [[ALWAYSBAD]]".to_string())
            } else {
                Ok("take".to_string())
            }
        };
        let report = run_oeq(edge, &judge, &records, 1).unwrap();
        assert_eq!(report.excluded, 2);
        assert!(report.valid);
    }

    #[test]
    fn reaction_failures_exclude_the_item() {
        let judge = RubricJudge::scoring(0.8, 5, 10, 0.6);
        let records = eval_records(5);
        let report = run_oeq(
            |r| {
                if r.id == "r0" {
                    Err(ClientError::Transport("offline".into()))
                } else {
                    Ok("take".to_string())
                }
            },
            &judge,
            &records,
            1,
        )
        .unwrap();
        assert_eq!((report.scored, report.excluded), (4, 1));
        assert!(report
            .per_item[0]
            .note
            .as_ref()
            .unwrap()
            .contains("reaction generation failed"));
    }

    #[test]
    fn empty_run_and_zero_trials_are_rejected() {
        let judge = RubricJudge::scoring(0.8, 5, 10, 0.6);
        assert!(matches!(
            run_oeq(|_| Ok("t".to_string()), &judge, &[], 1),
            Err(JudgeError::Empty(_))
        ));
        let records = eval_records(1);
        assert!(matches!(
            run_oeq(|_| Ok("t".to_string()), &judge, &records, 0),
            Err(JudgeError::Domain(_))
        ));
    }

    fn reference_report_rows() -> Vec<ReportRow> {
        REFERENCE_ROWS
            .iter()
            .enumerate()
            .map(|(i, &(scq, c, a, n, w))| ReportRow {
                model: format!("config-{}", i + 1),
                scq,
                completeness: c,
                accuracy: a,
                novelty: n,
                weighted: w,
            })
            .collect()
    }

    #[test]
    fn report_prints_three_decimals_and_bolds_column_bests() {
        let (md, csv) = render_report(&reference_report_rows());
        for printed in [
            "0.684", "0.672", "0.627", "0.480", "0.502", "0.683", "0.739", "0.375", "0.577",
        ] {
            assert!(md.contains(printed), "markdown missing {printed}");
            assert!(csv.contains(printed), "csv missing {printed}");
        }
        for best in ["**0.650**", "**0.969**", "**0.735**", "**0.981**", "**0.739**"] {
            assert!(md.contains(best), "markdown missing {best}");
        }
        assert!(!md.contains("**0.577**"));
        assert!(!csv.contains("**"));
    }

    #[test]
    fn single_row_report_is_all_bold_and_csv_round_trips() {
        let rows = vec![ReportRow {
            model: "solo".into(),
            scq: 0.5,
            completeness: 0.25,
            accuracy: 0.75,
            novelty: 0.125,
            weighted: 0.525,
        }];
        let (md, csv) = render_report(&rows);
        for cell in ["**0.500**", "**0.250**", "**0.750**", "**0.125**", "**0.525**"] {
            assert!(md.contains(cell), "markdown missing {cell}");
        }
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        let fields: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(fields[0], "solo");
        let parsed: Vec<f64> = fields[1..].iter().map(|f| f.parse().unwrap()).collect();
        assert_eq!(parsed, vec![0.5, 0.25, 0.75, 0.125, 0.525]);
    }

    #[test]
    fn empty_report_is_headers_only() {
        let (md, csv) = render_report(&[]);
        assert_eq!(md.lines().count(), 2);
        assert_eq!(csv.lines().count(), 1);
    }

    proptest! {
        #[test]
        fn completeness_parser_finds_planted_scores(
            k in 0u32..=320,
            with_denom in proptest::bool::ANY,
            prefix in "[a-zA-Z ,.]{0,60}",
            suffix in "[a-zA-Z ,.]{0,60}",
        ) {
            let raw = f64::from(k) / 20.0;
            let line = if with_denom {
                format!("Total score: {raw}/16")
            } else {
                format!("Total score: {raw}")
            };
            let out = format!("{prefix}\n{line}\n{suffix}");
            let parsed = parse_completeness(&out).unwrap();
            prop_assert_eq!(parsed.raw, raw);
            prop_assert_eq!(parsed.normalized, raw / 16.0);
        }

        #[test]
        fn novelty_parser_finds_planted_scores(
            k in 0u32..=100,
            with_denom in proptest::bool::ANY,
            prefix in "[a-zA-Z ,.]{0,60}",
            suffix in "[a-zA-Z ,.]{0,60}",
        ) {
            let raw = f64::from(k) / 10.0;
            let line = if with_denom {
                format!("Overall score: {raw}/10")
            } else {
                format!("Overall score: {raw}")
            };
            let out = format!("{prefix}\n{line}\n{suffix}");
            let parsed = parse_novelty(&out).unwrap();
            prop_assert_eq!(parsed.raw, raw);
            prop_assert_eq!(parsed.normalized, raw / 10.0);
        }

        #[test]
        fn accuracy_parser_finds_planted_counts(
            total in 0u32..=50,
            seed in proptest::num::u32::ANY,
            style in 0u8..3,
            prefix in "[a-zA-Z ,.]{0,60}",
        ) {
            let correct = if total == 0 { 0 } else { seed % (total + 1) };
            let ratio = if total == 0 { 0.0 } else { f64::from(correct) / f64::from(total) };
            let ratio_line = match style {
                0 => format!("Accuracy: {ratio:.4}"),
                1 => format!("Accuracy: {:.2}%", ratio * 100.0),
                _ => format!("Accuracy: {correct}/{total}"),
            };
            // A zero-denominator fraction is not a conforming ratio line, so
            // lean on the counts alone in that case.
            let ratio_line = if total == 0 && style == 2 { String::new() } else { ratio_line };
            let out = format!(
                "{prefix}\nTotal factual statements: {total}\nCorrect facts: {correct}\n\
                 Incorrect facts: {}\n{ratio_line}\n",
                total - correct
            );
            let parsed = parse_accuracy(&out).unwrap();
            prop_assert_eq!(parsed.counts.total, total);
            prop_assert_eq!(parsed.counts.correct, correct);
            if total == 0 {
                prop_assert!(parsed.no_facts);
                prop_assert_eq!(parsed.ratio, 0.0);
            } else {
                prop_assert!((parsed.ratio - ratio).abs() <= 0.01);
            }
        }
    }
}
