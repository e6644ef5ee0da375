//! Deterministic rule-driven backend used as the test oracle.
//!
//! A [`MockRuleSet`] answers every capability from fixed keyword rules: a
//! rule fires when its trigger occurs in the *template* (case-insensitive
//! substring) and then inspects only the *row rendering*. No network, no
//! randomness, no state beyond the call log — identical inputs give
//! identical outputs on every platform, so hand-computed expectations in
//! tests stay valid. The ruleset is versioned; golden tests pin a version
//! so a rule change cannot silently re-justify stale expectations.

use std::time::Instant;

use crate::backend::embed::{hash_embed, texts_equivalent};
use crate::backend::{require_template, CallLog, Capability, SemanticBackend};
use crate::error::{Error, Result};

/// How a fired predicate rule decides the boolean.
#[derive(Debug, Clone)]
pub enum PredicateTest {
    /// True iff any keyword occurs in the rendering (case-insensitive).
    AnyKeyword(Vec<String>),
    /// True iff the named rendering columns are embedding-equivalent.
    /// Serves equivalence-style join templates over paired rows.
    ColumnsEquivalent { left: String, right: String },
}

#[derive(Debug, Clone)]
pub struct PredicateRule {
    pub trigger: String,
    pub test: PredicateTest,
}

/// How a fired map rule produces the output text.
#[derive(Debug, Clone)]
pub enum MapRecipe {
    /// Echo the rendering with line breaks flattened to "; ".
    EchoRendering,
    /// First sentence, scanning rendered values in order, that contains
    /// any keyword; falls back to the first sentence of the rendering.
    KeywordSentence(Vec<String>),
}

#[derive(Debug, Clone)]
pub struct MapRule {
    pub trigger: String,
    pub recipe: MapRecipe,
}

/// Score = fraction of the rule's keywords present in the rendering.
#[derive(Debug, Clone)]
pub struct ScoreRule {
    pub trigger: String,
    pub keywords: Vec<String>,
}

/// A versioned bundle of mock rules plus the equivalence threshold.
#[derive(Debug, Clone)]
pub struct MockRuleSet {
    pub version: u32,
    pub theta: f64,
    pub predicate_rules: Vec<PredicateRule>,
    pub map_rules: Vec<MapRule>,
    pub score_rules: Vec<ScoreRule>,
}

fn kw(words: &[&str]) -> Vec<String> {
    words.iter().map(|w| w.to_string()).collect()
}

impl MockRuleSet {
    /// Ruleset version 1: the rules the bundled fixtures and golden
    /// expectations are built against.
    ///
    /// Keyword placement contract with the bundled fixtures: challenge
    /// keywords appear only in director biographies and resilience
    /// keywords only in movie plots, so whole-row and single-column
    /// renderings of the same row agree on every rule.
    pub fn v1() -> MockRuleSet {
        MockRuleSet {
            version: 1,
            theta: 0.8,
            predicate_rules: vec![
                PredicateRule {
                    trigger: "related to apple".into(),
                    test: PredicateTest::AnyKeyword(kw(&["apple"])),
                },
                PredicateRule {
                    trigger: "significant personal challenges".into(),
                    test: PredicateTest::AnyKeyword(kw(&[
                        "refugee", "orphaned", "prisoner", "poverty",
                    ])),
                },
                PredicateRule {
                    trigger: "personal resilience".into(),
                    test: PredicateTest::AnyKeyword(kw(&["hope", "escape", "perseverance"])),
                },
                PredicateRule {
                    trigger: "semantically equivalent".into(),
                    test: PredicateTest::ColumnsEquivalent {
                        left: "__lhs".into(),
                        right: "__rhs".into(),
                    },
                },
            ],
            map_rules: vec![
                MapRule {
                    trigger: "summarize".into(),
                    recipe: MapRecipe::KeywordSentence(kw(&[
                        "refugee", "orphaned", "prisoner", "poverty", "overcame",
                    ])),
                },
                MapRule {
                    trigger: "combine all attributes".into(),
                    recipe: MapRecipe::EchoRendering,
                },
            ],
            score_rules: vec![
                ScoreRule {
                    trigger: "related to apple".into(),
                    keywords: kw(&["apple"]),
                },
                ScoreRule {
                    trigger: "significant personal challenges".into(),
                    keywords: kw(&["refugee", "orphaned", "prisoner", "poverty"]),
                },
                ScoreRule {
                    trigger: "personal resilience".into(),
                    keywords: kw(&["hope", "escape", "perseverance"]),
                },
            ],
        }
    }
}

impl Default for MockRuleSet {
    fn default() -> MockRuleSet {
        MockRuleSet::v1()
    }
}

/// Rule-driven [`SemanticBackend`].
#[derive(Debug, Default)]
pub struct MockBackend {
    rules: MockRuleSet,
    log: CallLog,
}

impl MockBackend {
    pub fn new(rules: MockRuleSet) -> MockBackend {
        MockBackend {
            rules,
            log: CallLog::new(),
        }
    }

    pub fn rules(&self) -> &MockRuleSet {
        &self.rules
    }
}

fn contains_ci(haystack: &str, needle: &str) -> bool {
    haystack.to_lowercase().contains(&needle.to_lowercase())
}

/// Extract the value of a named column from an `alias.column: value`
/// rendering. Matches on the column part's final path segment,
/// case-insensitively.
fn rendering_column<'a>(rendering: &'a str, column: &str) -> Option<&'a str> {
    for line in rendering.lines() {
        let (head, value) = match line.split_once(": ") {
            Some(pair) => pair,
            None => continue,
        };
        let name = head.rsplit('.').next().unwrap_or(head).trim();
        if name.eq_ignore_ascii_case(column) {
            return Some(value);
        }
    }
    None
}

/// Split a rendering into its value texts: one per `column: value` line,
/// the whole line where no column prefix is present.
fn rendering_values(rendering: &str) -> Vec<&str> {
    rendering
        .lines()
        .map(|line| match line.split_once(": ") {
            Some((_, value)) => value,
            None => line,
        })
        .filter(|v| !v.trim().is_empty())
        .collect()
}

fn split_sentences(text: &str) -> impl Iterator<Item = &str> {
    text.split_inclusive(['.', '!', '?'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
}

impl SemanticBackend for MockBackend {
    fn name(&self) -> &str {
        "mock"
    }

    fn predicate(&self, template: &str, row_rendering: &str) -> Result<bool> {
        require_template(template)?;
        let started = Instant::now();
        let mut verdict = false;
        for rule in &self.rules.predicate_rules {
            if !contains_ci(template, &rule.trigger) {
                continue;
            }
            verdict = match &rule.test {
                PredicateTest::AnyKeyword(keywords) => {
                    keywords.iter().any(|k| contains_ci(row_rendering, k))
                }
                PredicateTest::ColumnsEquivalent { left, right } => {
                    let lv = rendering_column(row_rendering, left).ok_or_else(|| {
                        Error::Backend(format!(
                            "mock equivalence rule: column {left} absent from rendering"
                        ))
                    })?;
                    let rv = rendering_column(row_rendering, right).ok_or_else(|| {
                        Error::Backend(format!(
                            "mock equivalence rule: column {right} absent from rendering"
                        ))
                    })?;
                    texts_equivalent(lv, rv, self.rules.theta)
                }
            };
            break;
        }
        self.log.record(
            Capability::Predicate,
            Some(template),
            started.elapsed().as_micros() as u64,
        );
        Ok(verdict)
    }

    fn map(&self, template: &str, row_rendering: &str) -> Result<String> {
        require_template(template)?;
        let started = Instant::now();
        let recipe = self
            .rules
            .map_rules
            .iter()
            .find(|rule| contains_ci(template, &rule.trigger))
            .map(|rule| &rule.recipe);
        let out = match recipe {
            // Unmatched templates echo the rendering: a deterministic
            // identity-ish default that keeps unknown queries runnable.
            None | Some(MapRecipe::EchoRendering) => {
                rendering_values(row_rendering).join("; ")
            }
            Some(MapRecipe::KeywordSentence(keywords)) => {
                let mut hit = None;
                'values: for value in rendering_values(row_rendering) {
                    for sentence in split_sentences(value) {
                        if keywords.iter().any(|k| contains_ci(sentence, k)) {
                            hit = Some(sentence.to_string());
                            break 'values;
                        }
                    }
                }
                hit.unwrap_or_else(|| {
                    rendering_values(row_rendering)
                        .first()
                        .and_then(|v| split_sentences(v).next())
                        .unwrap_or_default()
                        .to_string()
                })
            }
        };
        self.log.record(
            Capability::Map,
            Some(template),
            started.elapsed().as_micros() as u64,
        );
        Ok(out)
    }

    fn equivalent(&self, a: &str, b: &str) -> Result<bool> {
        let started = Instant::now();
        let verdict = texts_equivalent(a, b, self.rules.theta);
        self.log.record(
            Capability::Equivalent,
            None,
            started.elapsed().as_micros() as u64,
        );
        Ok(verdict)
    }

    fn score(&self, template: &str, row_rendering: &str) -> Result<f64> {
        require_template(template)?;
        let started = Instant::now();
        let score = self
            .rules
            .score_rules
            .iter()
            .find(|rule| contains_ci(template, &rule.trigger))
            .map(|rule| {
                let hits = rule
                    .keywords
                    .iter()
                    .filter(|k| contains_ci(row_rendering, k))
                    .count();
                hits as f64 / rule.keywords.len() as f64
            })
            .unwrap_or(0.0);
        self.log.record(
            Capability::Score,
            Some(template),
            started.elapsed().as_micros() as u64,
        );
        Ok(score)
    }

    fn aggregate(&self, template: &str, values: &[String]) -> Result<String> {
        require_template(template)?;
        let started = Instant::now();
        let recipe = self
            .rules
            .map_rules
            .iter()
            .find(|rule| contains_ci(template, &rule.trigger))
            .map(|rule| &rule.recipe);
        let out = match recipe {
            Some(MapRecipe::KeywordSentence(keywords)) => values
                .iter()
                .flat_map(|v| split_sentences(v))
                .find(|s| keywords.iter().any(|k| contains_ci(s, k)))
                .unwrap_or_else(|| values.first().map(String::as_str).unwrap_or_default())
                .to_string(),
            _ => values.join("; "),
        };
        self.log.record(
            Capability::Aggregate,
            Some(template),
            started.elapsed().as_micros() as u64,
        );
        Ok(out)
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        let started = Instant::now();
        let vector = hash_embed(text);
        self.log.record(
            Capability::Embed,
            None,
            started.elapsed().as_micros() as u64,
        );
        Ok(vector)
    }

    fn call_log(&self) -> &CallLog {
        &self.log
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mock() -> MockBackend {
        MockBackend::default()
    }

    #[test]
    fn apple_rule_matches_row_keywords() {
        let b = mock();
        let t = "{name} is related to apple";
        assert!(b.predicate(t, "name: Fuji Apple 3-pack").unwrap());
        assert!(!b.predicate(t, "name: Banana bunch").unwrap());
        assert_eq!(b.call_log().counts().predicate, 2);
    }

    #[test]
    fn rule_keywords_match_rendering_not_template() {
        // The apple rule's trigger word sits in the template; a row
        // without the keyword must still be rejected.
        let b = mock();
        assert!(!b
            .predicate("{name} is related to apple", "name: Carburetor")
            .unwrap());
    }

    #[test]
    fn empty_template_is_rejected_everywhere() {
        let b = mock();
        assert!(b.predicate("", "row").is_err());
        assert!(b.map("  ", "row").is_err());
        assert!(b.score("", "row").is_err());
        assert!(b.aggregate("", &[]).is_err());
    }

    #[test]
    fn unmatched_predicate_template_is_false() {
        let b = mock();
        assert!(!b.predicate("utterly unknown intent", "name: Apple").unwrap());
    }

    #[test]
    fn challenge_rule_fires_across_phrasings() {
        let b = mock();
        let rendering = "d.biography: He grew up in poverty before directing.";
        for template in [
            "the director overcame significant personal challenges.",
            "{d.biography} highlights overcoming significant personal challenges",
            "Analyze this biography to determine if the director overcame significant personal challenges and return True or False.",
        ] {
            assert!(b.predicate(template, rendering).unwrap(), "{template}");
        }
        assert!(!b
            .predicate(
                "the director overcame significant personal challenges.",
                "d.biography: A lifetime of quiet routine."
            )
            .unwrap());
    }

    #[test]
    fn keyword_sentence_recipe_extracts_first_hit() {
        let b = mock();
        let rendering = "d.biography: Born to wealth. He was orphaned at nine. Later he thrived.";
        let out = b
            .map("Summarize biography of the director related to overcoming challenges in one short sentence.", rendering)
            .unwrap();
        assert_eq!(out, "He was orphaned at nine.");
    }

    #[test]
    fn keyword_sentence_recipe_falls_back_to_first_sentence() {
        let b = mock();
        let out = b
            .map("summarize the note", "note: Nothing notable here. Truly.")
            .unwrap();
        assert_eq!(out, "Nothing notable here.");
    }

    #[test]
    fn unmatched_map_template_echoes_rendering() {
        let b = mock();
        let out = b.map("translate to morse", "a: x\nb: y").unwrap();
        assert_eq!(out, "x; y");
    }

    #[test]
    fn echo_recipe_flattens_lines() {
        let b = mock();
        let out = b
            .map("combine all attributes", "t.name: NYC\nt.state: NY")
            .unwrap();
        assert_eq!(out, "NYC; NY");
    }

    #[test]
    fn score_is_keyword_hit_ratio() {
        let b = mock();
        let t = "rank by personal resilience";
        let s = b
            .score(t, "plot: An escape plan built on hope.")
            .unwrap();
        assert!((s - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(b.score(t, "plot: A quiet dinner.").unwrap(), 0.0);
        assert_eq!(b.score("unknown intent", "plot: anything").unwrap(), 0.0);
    }

    #[test]
    fn equivalence_rule_compares_named_columns() {
        let b = mock();
        let t = "the rows are semantically equivalent";
        assert!(b
            .predicate(t, "l.__lhs: apple pie recipe\nr.__rhs: recipe for apple pie")
            .unwrap());
        assert!(!b
            .predicate(t, "l.__lhs: apple pie recipe\nr.__rhs: carburetor engine manual")
            .unwrap());
        let err = b.predicate(t, "l.other: x").unwrap_err();
        assert!(err.to_string().contains("__lhs"));
    }

    #[test]
    fn aggregate_joins_values_by_default() {
        let b = mock();
        let out = b
            .aggregate("collect the titles", &["a".into(), "b".into()])
            .unwrap();
        assert_eq!(out, "a; b");
    }

    #[test]
    fn aggregate_with_summarize_rule_picks_keyword_sentence() {
        let b = mock();
        let out = b
            .aggregate(
                "summarize the group",
                &[
                    "A calm morning. Nothing else.".into(),
                    "She overcame the odds. Then rested.".into(),
                ],
            )
            .unwrap();
        assert_eq!(out, "She overcame the odds.");
    }

    #[test]
    fn ruleset_is_versioned() {
        assert_eq!(MockRuleSet::v1().version, 1);
        assert_eq!(MockRuleSet::v1().theta, 0.8);
    }
}
