//! Dataset hygiene after collection/generation: near-duplicate removal,
//! rule-based outlier filtering, a stratified holdout split, and manifest
//! statistics.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clients::offline::cosine;
use crate::clients::{ClientError, EmbedClient};
use crate::model::{DatasetRecord, Lang, Source};

/// Records more similar than this to an earlier kept record are dropped.
pub const DEFAULT_SIMILARITY_THRESHOLD: f64 = 0.95;
/// Fraction of records held out for evaluation.
pub const DEFAULT_EVAL_FRACTION: f64 = 0.10;

/// Errors from curation.
#[derive(Debug, Error)]
pub enum CurateError {
    #[error("embedding failed; curation aborted: {0}")]
    Embed(#[from] ClientError),
    #[error("eval_fraction must be in (0, 1), got {0}")]
    InvalidFraction(f64),
}

/// Audit entry for one similarity-dropped record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimilarityDrop {
    pub dropped_id: String,
    pub kept_id: String,
    pub similarity: f64,
}

/// Greedy keep-first de-duplication over target-text embeddings: record i is
/// dropped iff its cosine against some earlier kept record exceeds
/// `threshold`. Any embedding failure aborts the whole pass.
pub fn similarity_filter(
    records: &[DatasetRecord],
    embed: &dyn EmbedClient,
    threshold: f64,
) -> Result<(Vec<DatasetRecord>, Vec<SimilarityDrop>), CurateError> {
    let texts: Vec<String> = records.iter().map(|r| r.target_text.clone()).collect();
    let vectors = if texts.is_empty() {
        Vec::new()
    } else {
        embed.embed(&texts)?
    };
    let mut kept: Vec<usize> = Vec::new();
    let mut dropped = Vec::new();
    'next: for i in 0..records.len() {
        for &j in &kept {
            let similarity = cosine(&vectors[i], &vectors[j]);
            if similarity > threshold {
                dropped.push(SimilarityDrop {
                    dropped_id: records[i].id.clone(),
                    kept_id: records[j].id.clone(),
                    similarity,
                });
                continue 'next;
            }
        }
        kept.push(i);
    }
    let kept_records = kept.into_iter().map(|i| records[i].clone()).collect();
    Ok((kept_records, dropped))
}

/// Thresholds for [`rule_filter`]; defaults are declared and overridable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurationRules {
    pub min_text_chars: usize,
    pub max_text_chars: usize,
    pub max_music_s: f64,
}

impl Default for CurationRules {
    fn default() -> Self {
        CurationRules {
            min_text_chars: 10,
            max_text_chars: 2000,
            max_music_s: 30.0,
        }
    }
}

/// Audit entry for one rule-dropped record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuleDrop {
    pub id: String,
    pub rule: String,
}

fn is_cjk(c: char) -> bool {
    matches!(c,
        '\u{4E00}'..='\u{9FFF}'   // unified ideographs
        | '\u{3400}'..='\u{4DBF}' // extension A
        | '\u{F900}'..='\u{FAFF}' // compatibility ideographs
        | '\u{3040}'..='\u{30FF}' // kana (reaction transcripts may mix)
    )
}

/// Script-based language check: ≥ 50% CJK codepoints (of the non-whitespace
/// text) implies zh, otherwise en.
fn script_lang(text: &str) -> Lang {
    let mut total = 0usize;
    let mut cjk = 0usize;
    for c in text.chars().filter(|c| !c.is_whitespace()) {
        total += 1;
        if is_cjk(c) {
            cjk += 1;
        }
    }
    if total > 0 && cjk * 2 >= total {
        Lang::Zh
    } else {
        Lang::En
    }
}

/// Applies rule-based outlier removal; every dropped record cites the rule
/// it broke.
pub fn rule_filter(
    records: &[DatasetRecord],
    rules: &CurationRules,
) -> (Vec<DatasetRecord>, Vec<RuleDrop>) {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for record in records {
        let chars = record.target_text.chars().count();
        let duration = record.music_duration_s();
        let rule = if chars < rules.min_text_chars {
            Some(format!(
                "text length {chars} below minimum {}",
                rules.min_text_chars
            ))
        } else if chars > rules.max_text_chars {
            Some(format!(
                "text length {chars} above maximum {}",
                rules.max_text_chars
            ))
        } else if !(duration > 0.0 && duration <= rules.max_music_s) {
            Some(format!(
                "music duration {duration:.3} s outside (0, {}]",
                rules.max_music_s
            ))
        } else if script_lang(&record.target_text) != record.lang {
            Some(format!(
                "language tag {} inconsistent with script (looks like {})",
                record.lang,
                script_lang(&record.target_text)
            ))
        } else {
            None
        };
        match rule {
            Some(rule) => dropped.push(RuleDrop {
                id: record.id.clone(),
                rule,
            }),
            None => kept.push(record.clone()),
        }
    }
    (kept, dropped)
}

/// Rounds half away from zero to an integer count.
fn round_count(x: f64) -> usize {
    x.round() as usize
}

/// Deterministic stratified holdout split by (source, lang).
///
/// Each stratum contributes `round(eval_fraction · stratum size)` records to
/// the eval set; strata smaller than 2 go wholly to train with a warning.
/// Outputs preserve input order and partition the input exactly.
pub fn split_holdout(
    records: &[DatasetRecord],
    eval_fraction: f64,
    seed: u64,
) -> Result<(Vec<DatasetRecord>, Vec<DatasetRecord>), CurateError> {
    if !(eval_fraction > 0.0 && eval_fraction < 1.0) {
        return Err(CurateError::InvalidFraction(eval_fraction));
    }
    let mut strata: BTreeMap<(Source, Lang), Vec<usize>> = BTreeMap::new();
    for (i, record) in records.iter().enumerate() {
        strata
            .entry((record.source, record.lang))
            .or_default()
            .push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_eval = vec![false; records.len()];
    for ((source, lang), mut indices) in strata {
        if indices.len() < 2 {
            log::warn!(
                "stratum ({source}, {lang}) has {} record(s); keeping it wholly in train",
                indices.len()
            );
            continue;
        }
        let take = round_count(eval_fraction * indices.len() as f64);
        indices.shuffle(&mut rng);
        for &i in indices.iter().take(take) {
            in_eval[i] = true;
        }
    }
    let mut train = Vec::new();
    let mut eval = Vec::new();
    for (i, record) in records.iter().enumerate() {
        if in_eval[i] {
            eval.push(record.clone());
        } else {
            train.push(record.clone());
        }
    }
    Ok((train, eval))
}

/// Dataset counts by (source, lang), in fixed presentation order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestStats {
    counts: BTreeMap<(Source, Lang), usize>,
}

/// Presentation order of the four dataset cells.
pub const STAT_CELLS: [(Source, Lang); 4] = [
    (Source::Mllm, Lang::Zh),
    (Source::Mllm, Lang::En),
    (Source::Human, Lang::Zh),
    (Source::Human, Lang::En),
];

impl ManifestStats {
    pub fn count(&self, source: Source, lang: Lang) -> usize {
        self.counts.get(&(source, lang)).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }
}

/// Counts records per (source, lang); all four cells are always present.
pub fn manifest_stats(records: &[DatasetRecord]) -> ManifestStats {
    let mut counts: BTreeMap<(Source, Lang), usize> =
        STAT_CELLS.iter().map(|&cell| (cell, 0)).collect();
    for record in records {
        *counts.entry((record.source, record.lang)).or_insert(0) += 1;
    }
    ManifestStats { counts }
}

/// Renders the four-row statistics table.
pub fn render_stats(stats: &ManifestStats) -> String {
    let mut out = String::from("source  lang  records\n");
    for &(source, lang) in &STAT_CELLS {
        out.push_str(&format!(
            "{:<6}  {:<4}  {}\n",
            source.to_string(),
            lang.to_string(),
            stats.count(source, lang)
        ));
    }
    out.push_str(&format!("total size: {}\n", stats.total()));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clients::offline::TrigramEmbedder;
    use crate::model::test_support::sample_record;
    use proptest::prelude::*;

    fn record_with_text(id: &str, text: &str) -> DatasetRecord {
        let mut r = sample_record(id);
        r.target_text = text.to_string();
        r
    }

    #[test]
    fn identical_texts_drop_the_second() {
        let records = vec![
            record_with_text("a", "the chorus soars with confident belt"),
            record_with_text("b", "the chorus soars with confident belt"),
        ];
        let (kept, dropped) =
            similarity_filter(&records, &TrigramEmbedder, DEFAULT_SIMILARITY_THRESHOLD).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].id, "a");
        assert_eq!(dropped.len(), 1);
        assert_eq!(dropped[0].dropped_id, "b");
        assert_eq!(dropped[0].kept_id, "a");
        assert!((dropped[0].similarity - 1.0).abs() < 1e-9);
    }

    #[test]
    fn dissimilar_texts_both_kept() {
        let records = vec![
            record_with_text("a", "gritty lower register, superb breath support"),
            record_with_text("b", "数据库索引需要定期重建以保持查询性能"),
        ];
        let (kept, dropped) =
            similarity_filter(&records, &TrigramEmbedder, DEFAULT_SIMILARITY_THRESHOLD).unwrap();
        assert_eq!(kept.len(), 2);
        assert!(dropped.is_empty());
    }

    /// Independent brute-force oracle with its own greedy scan.
    fn oracle_kept_ids(records: &[DatasetRecord], threshold: f64) -> Vec<String> {
        let texts: Vec<String> = records.iter().map(|r| r.target_text.clone()).collect();
        let vectors = TrigramEmbedder.embed(&texts).unwrap();
        let mut kept: Vec<usize> = Vec::new();
        for i in 0..records.len() {
            let duplicate = kept
                .iter()
                .any(|&j| cosine(&vectors[i], &vectors[j]) > threshold);
            if !duplicate {
                kept.push(i);
            }
        }
        kept.into_iter().map(|i| records[i].id.clone()).collect()
    }

    fn planted_corpus() -> Vec<DatasetRecord> {
        let mut records: Vec<DatasetRecord> = (0..180)
            .map(|i| {
                record_with_text(
                    &format!("base-{i}"),
                    &format!(
                        "verse {i} rides motif {} while the singer leans {} of the beat \
                         and shades vowel {} against consonant cluster {}",
                        i * 7 % 13,
                        if i % 2 == 0 { "ahead" } else { "behind" },
                        i % 5,
                        (i * 3) % 11,
                    ),
                )
            })
            .collect();
        // Plant 20 near-duplicates of existing records at scattered positions.
        for k in 0..20 {
            let source_text = records[k * 9].target_text.clone();
            records.insert(
                k * 9 + 3,
                record_with_text(&format!("dup-{k}"), &format!("{source_text}!")),
            );
        }
        records
    }

    #[test]
    fn kept_set_matches_brute_force_oracle() {
        let records = planted_corpus();
        assert_eq!(records.len(), 200);
        let (kept, dropped) =
            similarity_filter(&records, &TrigramEmbedder, DEFAULT_SIMILARITY_THRESHOLD).unwrap();
        let kept_ids: Vec<String> = kept.iter().map(|r| r.id.clone()).collect();
        assert_eq!(kept_ids, oracle_kept_ids(&records, DEFAULT_SIMILARITY_THRESHOLD));
        assert!(!dropped.is_empty(), "expected planted duplicates to drop");
        // No kept pair exceeds the threshold (exhaustive pairwise scan).
        let texts: Vec<String> = kept.iter().map(|r| r.target_text.clone()).collect();
        let vectors = TrigramEmbedder.embed(&texts).unwrap();
        for i in 0..vectors.len() {
            for j in 0..i {
                assert!(cosine(&vectors[i], &vectors[j]) <= DEFAULT_SIMILARITY_THRESHOLD);
            }
        }
    }

    #[test]
    fn similarity_filter_is_idempotent() {
        let records = planted_corpus();
        let (kept, _) =
            similarity_filter(&records, &TrigramEmbedder, DEFAULT_SIMILARITY_THRESHOLD).unwrap();
        let (kept_again, dropped_again) =
            similarity_filter(&kept, &TrigramEmbedder, DEFAULT_SIMILARITY_THRESHOLD).unwrap();
        assert_eq!(kept_again, kept);
        assert!(dropped_again.is_empty());
    }

    #[test]
    fn rule_filter_drops_short_text_and_keeps_valid() {
        let records = vec![
            record_with_text("tiny", "meh."),
            record_with_text("fine", "a solid, centered tone from verse one"),
        ];
        let (kept, dropped) = rule_filter(&records, &CurationRules::default());
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].id, "fine");
        assert_eq!(dropped.len(), 1);
        assert_eq!(dropped[0].id, "tiny");
        assert!(dropped[0].rule.contains("below minimum"), "{}", dropped[0].rule);
    }

    #[test]
    fn rule_filter_flags_language_mismatch() {
        let mut r = record_with_text("cjk", "高音区的控制力非常出色，气息稳定而且咬字清晰");
        r.lang = Lang::En;
        let (kept, dropped) = rule_filter(&[r], &CurationRules::default());
        assert!(kept.is_empty());
        assert!(dropped[0].rule.contains("inconsistent"), "{}", dropped[0].rule);

        let mut ok = record_with_text("zh-ok", "高音区的控制力非常出色，气息稳定而且咬字清晰");
        ok.lang = Lang::Zh;
        let (kept, dropped) = rule_filter(&[ok], &CurationRules::default());
        assert_eq!(kept.len(), 1);
        assert!(dropped.is_empty());
    }

    fn uniform_records(n: usize) -> Vec<DatasetRecord> {
        (0..n)
            .map(|i| record_with_text(&format!("r{i}"), &format!("critique body number {i}")))
            .collect()
    }

    #[test]
    fn single_stratum_split_takes_exact_fraction() {
        let records = uniform_records(100);
        let (train, eval) = split_holdout(&records, 0.10, 7).unwrap();
        assert_eq!(eval.len(), 10);
        assert_eq!(train.len(), 90);
    }

    #[test]
    fn same_seed_same_split() {
        let records = uniform_records(50);
        let a = split_holdout(&records, 0.2, 99).unwrap();
        let b = split_holdout(&records, 0.2, 99).unwrap();
        assert_eq!(a, b);
        let c = split_holdout(&records, 0.2, 100).unwrap();
        assert!(a != c, "different seeds should (almost surely) differ");
    }

    #[test]
    fn strata_round_independently() {
        // 60 human/en + 40 mllm/zh -> eval 6 + 4.
        let mut records = uniform_records(60);
        for i in 0..40 {
            let mut r = record_with_text(&format!("m{i}"), &format!("机器生成的评论样本 {i}"));
            r.source = Source::Mllm;
            r.lang = Lang::Zh;
            r.target_speech_path = None;
            records.push(r);
        }
        let (train, eval) = split_holdout(&records, 0.1, 3).unwrap();
        let eval_human = eval.iter().filter(|r| r.source == Source::Human).count();
        let eval_mllm = eval.iter().filter(|r| r.source == Source::Mllm).count();
        assert_eq!(eval_human, 6);
        assert_eq!(eval_mllm, 4);
        assert_eq!(train.len() + eval.len(), 100);
    }

    #[test]
    fn tiny_stratum_stays_in_train() {
        let mut records = uniform_records(20);
        let mut lone = record_with_text("lone", "一条孤零零的中文评论，不该进评估集");
        lone.lang = Lang::Zh;
        records.push(lone);
        let (train, eval) = split_holdout(&records, 0.2, 1).unwrap();
        assert!(train.iter().any(|r| r.id == "lone"));
        assert!(eval.iter().all(|r| r.id != "lone"));
    }

    #[test]
    fn bad_fraction_rejected() {
        assert!(split_holdout(&[], 0.0, 1).is_err());
        assert!(split_holdout(&[], 1.0, 1).is_err());
    }

    #[test]
    fn stats_render_reference_corpus_table() {
        let mut records = Vec::new();
        let cells = [
            (Source::Mllm, Lang::Zh, 1776usize),
            (Source::Mllm, Lang::En, 2936),
            (Source::Human, Lang::Zh, 1787),
            (Source::Human, Lang::En, 2947),
        ];
        let mut serial = 0usize;
        for (source, lang, n) in cells {
            for _ in 0..n {
                let mut r = record_with_text(&format!("r{serial}"), "long enough critique text");
                r.source = source;
                r.lang = lang;
                if source == Source::Mllm {
                    r.target_speech_path = None;
                }
                records.push(r);
                serial += 1;
            }
        }
        let stats = manifest_stats(&records);
        assert_eq!(stats.count(Source::Mllm, Lang::Zh), 1776);
        assert_eq!(stats.count(Source::Mllm, Lang::En), 2936);
        assert_eq!(stats.count(Source::Human, Lang::Zh), 1787);
        assert_eq!(stats.count(Source::Human, Lang::En), 2947);
        assert_eq!(stats.total(), 9446);
        let table = render_stats(&stats);
        let data_rows: Vec<&str> = table
            .lines()
            .filter(|l| l.starts_with("mllm") || l.starts_with("human"))
            .collect();
        assert_eq!(data_rows.len(), 4);
        for needle in ["1776", "2936", "1787", "2947"] {
            assert!(table.contains(needle), "{table}");
        }
    }

    #[test]
    fn stats_zero_and_ones() {
        let stats = manifest_stats(&[]);
        assert_eq!(stats.total(), 0);
        for (source, lang) in STAT_CELLS {
            assert_eq!(stats.count(source, lang), 0);
        }
        let mut records = Vec::new();
        for (i, (source, lang)) in STAT_CELLS.iter().enumerate() {
            let mut r = record_with_text(&format!("one{i}"), "just one in this cell");
            r.source = *source;
            r.lang = *lang;
            if *source == Source::Mllm {
                r.target_speech_path = None;
            }
            records.push(r);
        }
        let stats = manifest_stats(&records);
        for (source, lang) in STAT_CELLS {
            assert_eq!(stats.count(source, lang), 1);
        }
    }

    proptest! {
        /// split_holdout partitions its input: no loss, no duplication.
        #[test]
        fn split_partitions_input(
            n in 0usize..120,
            frac in 0.05f64..0.95,
            seed in any::<u64>(),
            flags in prop::collection::vec((any::<bool>(), any::<bool>()), 0..120),
        ) {
            let records: Vec<DatasetRecord> = (0..n)
                .map(|i| {
                    let (mllm, zh) = flags.get(i).copied().unwrap_or((false, false));
                    let mut r = record_with_text(&format!("p{i}"), &format!("text body {i}"));
                    if mllm {
                        r.source = Source::Mllm;
                        r.target_speech_path = None;
                    }
                    if zh {
                        r.lang = Lang::Zh;
                    }
                    r
                })
                .collect();
            let (train, eval) = split_holdout(&records, frac, seed).unwrap();
            prop_assert_eq!(train.len() + eval.len(), records.len());
            let mut all_ids: Vec<&str> = train.iter().chain(&eval).map(|r| r.id.as_str()).collect();
            all_ids.sort_unstable();
            let mut want: Vec<&str> = records.iter().map(|r| r.id.as_str()).collect();
            want.sort_unstable();
            prop_assert_eq!(all_ids, want);
        }
    }
}
