//! Acceptance criteria, one test per criterion.
//!
//! Each test prints exactly one line, `criterion NN: PASS — ...` or
//! `criterion NN: FAIL — ...`, then fails normally on FAIL so the usual
//! test machinery reports it too. Run with
//! `cargo test --test acceptance -- --nocapture --test-threads=1`
//! to see the lines in order; the per-test ok/FAILED column mirrors them
//! either way.
//!
//! Criteria 1-3 and 9 drive the bundled fixture through the public
//! engine and the installed binary; 4-8 and 10 check the algebraic and
//! transport contracts in process, with their own compact generators so
//! this target stands alone.

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::panic::AssertUnwindSafe;
use std::path::PathBuf;
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saber_core::algebra::{
    apply_rules, compose_intersection, standard_rules, CmpOp, Plan, ProjectItem, ScalarExpr,
    Template,
};
use saber_core::backend::{mock::MockBackend, LlmBackend, LlmEndpointConfig, SemanticBackend};
use saber_core::engine::Engine;
use saber_core::error::{Error, TransportErrorKind};
use saber_core::exec::{eval, eval_oracle, Database};
use saber_core::relation::{ColRef, Column, Relation, Schema, Tuple, Value, ValueKind};

// ---- harness ----------------------------------------------------------

fn criterion(n: u32, what: &str, body: impl FnOnce()) {
    match std::panic::catch_unwind(AssertUnwindSafe(body)) {
        Ok(()) => println!("criterion {n:02}: PASS — {what}"),
        Err(payload) => {
            println!("criterion {n:02}: FAIL — {what}");
            std::panic::resume_unwind(payload);
        }
    }
}

fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// The query files hold one statement each; the engine API takes the
/// statement text without its terminator.
fn single_statement(text: &str) -> &str {
    text.trim().trim_end_matches(';').trim_end()
}

fn col_index(relation: &Relation, name: &str) -> usize {
    relation
        .schema
        .resolve(None, name)
        .unwrap_or_else(|e| panic!("column {name} not found: {e}"))
}

fn cell_text(relation: &Relation, row: usize, col: usize) -> String {
    match &relation.rows[row].values[col] {
        Value::Text(s) => s.clone(),
        other => other.render(),
    }
}

fn column_texts(relation: &Relation, name: &str) -> Vec<String> {
    let idx = col_index(relation, name);
    (0..relation.rows.len())
        .map(|row| cell_text(relation, row, idx))
        .collect()
}

const APPLE_SQL: &str = include_str!("../../../queries/apple.sql");
const MOVIES_SQL: &str = include_str!("../../../queries/movies.sql");

const EXPECTED_TITLES: [&str; 5] = [
    "The Shawshank Redemption",
    "One Flew Over the Cuckoo's Nest",
    "Harakiri",
    "The Pianist",
    "Bicycle Thieves",
];

// ---- criteria 1-2: the two canonical fixture queries ------------------

#[test]
fn criterion_01_apple_query_returns_the_single_most_expensive_apple_product() {
    criterion(
        1,
        "apple query: one row, the priciest apple-related product, 3 predicate calls, < 1s",
        || {
            let engine = Engine::bundled();
            let started = Instant::now();
            let report = engine
                .run(single_statement(APPLE_SQL))
                .expect("apple query evaluates");
            let elapsed = started.elapsed();

            assert_eq!(report.result.rows.len(), 1, "exactly one row");
            assert_eq!(cell_text(&report.result, 0, 0), "Apple iPhone case");
            assert_eq!(cell_text(&report.result, 0, 1), "15");
            assert_eq!(
                report.total_calls.predicate, 3,
                "one predicate call per product"
            );
            assert_eq!(report.total_calls.total(), 3, "no other backend calls");
            assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
        },
    );
}

#[test]
fn criterion_02_movie_query_returns_five_qualifying_movies_in_rating_order() {
    criterion(
        2,
        "movie query: 5 rows, strictly descending rating, keyword-qualified, control excluded, < 2s",
        || {
            let engine = Engine::bundled();
            let started = Instant::now();
            let report = engine
                .run(single_statement(MOVIES_SQL))
                .expect("movie query evaluates");
            let elapsed = started.elapsed();
            let result = &report.result;

            assert_eq!(result.rows.len(), 5, "exactly five rows");
            let titles = column_texts(result, "title");
            assert_eq!(titles, EXPECTED_TITLES, "the qualifying movies, best first");
            assert!(
                !titles.iter().any(|t| t == "The Godfather"),
                "the negative control must not qualify"
            );

            let ratings: Vec<f64> = column_texts(result, "rating")
                .iter()
                .map(|r| r.parse().unwrap_or_else(|e| panic!("rating {r:?}: {e}")))
                .collect();
            assert!(
                ratings.windows(2).all(|w| w[0] > w[1]),
                "ratings must strictly descend: {ratings:?}"
            );

            // Independent qualification check against the fixture tables.
            let movies = engine.database().get("movies").expect("movies table");
            let directors = engine.database().get("directors").expect("directors table");
            let plot_of = |title: &str| -> String {
                let t = col_index(movies, "title");
                let p = col_index(movies, "plot");
                (0..movies.rows.len())
                    .find(|&i| cell_text(movies, i, t) == title)
                    .map(|i| cell_text(movies, i, p))
                    .unwrap_or_else(|| panic!("movie {title:?} not in fixture"))
            };
            let biography_of = |director: &str| -> String {
                let n = col_index(directors, "name");
                let b = col_index(directors, "biography");
                (0..directors.rows.len())
                    .find(|&i| cell_text(directors, i, n) == director)
                    .map(|i| cell_text(directors, i, b))
                    .unwrap_or_else(|| panic!("director {director:?} not in fixture"))
            };

            const CHALLENGE: [&str; 4] = ["refugee", "orphaned", "prisoner", "poverty"];
            const RESILIENCE: [&str; 3] = ["hope", "escape", "perseverance"];
            for (title, director) in titles.iter().zip(column_texts(result, "director")) {
                let bio = biography_of(&director).to_lowercase();
                assert!(
                    CHALLENGE.iter().any(|k| bio.contains(k)),
                    "{director}'s biography lacks a challenge keyword"
                );
                let plot = plot_of(title).to_lowercase();
                assert!(
                    RESILIENCE.iter().any(|k| plot.contains(k)),
                    "{title}'s plot lacks a resilience keyword"
                );
            }

            assert!(elapsed < Duration::from_secs(2), "took {elapsed:?}");
        },
    );
}

// ---- criterion 3: rewriter goldens ------------------------------------

#[test]
fn criterion_03_rewrites_match_their_goldens_and_execute_to_the_same_titles() {
    criterion(
        3,
        "rewrites byte-match goldens for all three targets and re-execute to the same 5 titles",
        || {
            let root = repo_root();
            let query = root.join("queries/movies.sql");
            for target in ["lotus", "docetl", "palimpzest"] {
                let golden_path = root.join("goldens/rewrites").join(target).join("movies.sql");
                let golden = std::fs::read(&golden_path)
                    .unwrap_or_else(|e| panic!("{}: {e}", golden_path.display()));

                let out = Command::new(env!("CARGO_BIN_EXE_saber"))
                    .arg("--rewrite-for")
                    .arg(target)
                    .arg(&query)
                    .output()
                    .expect("binary runs");
                assert!(
                    out.status.success(),
                    "{target}: exit {:?}\n{}",
                    out.status.code(),
                    String::from_utf8_lossy(&out.stderr)
                );
                assert_eq!(
                    out.stdout,
                    golden,
                    "{target}: rewrite differs from golden\n--- got ---\n{}",
                    String::from_utf8_lossy(&out.stdout)
                );

                let engine = Engine::bundled();
                let text = String::from_utf8(golden).expect("golden is UTF-8");
                let report = engine
                    .run(single_statement(&text))
                    .unwrap_or_else(|e| panic!("{target} golden does not execute: {e}"));
                assert_eq!(
                    column_texts(&report.result, "title"),
                    EXPECTED_TITLES,
                    "{target} golden must select the same movies"
                );
            }
        },
    );
}

// ---- criterion 4: set-operation composition laws ----------------------

const LAW_ALPHABET: &[&str] = &[
    "red apple",
    "apple red",
    "green apple pie",
    "banana",
    "yellow banana bread",
    "cherry",
    "",
    "---",
    "***",
    "one two three four",
    "one two three five",
];

fn text_relation(qualifier: &str, values: &[String]) -> Relation {
    Relation::new(
        Schema::new(vec![Column::qualified(qualifier, "v", ValueKind::Text)]),
        values
            .iter()
            .map(|v| Tuple::new(vec![Value::Text(v.clone())]))
            .collect(),
    )
}

fn random_texts(rng: &mut ChaCha8Rng, pool: &[&str]) -> Vec<String> {
    let len = rng.random_range(0..=5);
    (0..len)
        .map(|_| pool[rng.random_range(0..pool.len())].to_string())
        .collect()
}

fn pair_db(left: &[String], right: &[String]) -> Database {
    let mut db = Database::new();
    db.insert("r", text_relation("r", left));
    db.insert("s", text_relation("s", right));
    db
}

fn dedup_of(inner: Plan) -> Plan {
    Plan::SemDedup {
        input: Box::new(inner),
        attr: None,
    }
}

#[test]
fn criterion_04_semantic_set_operations_equal_their_compositions() {
    criterion(
        4,
        "200 random pairs: SemSetDiff/SemSetUnion/SemSetIntersect equal their compositions, < 30s",
        || {
            let started = Instant::now();
            let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0004);
            let backend = MockBackend::default();
            for case in 0..200 {
                let db = pair_db(
                    &random_texts(&mut rng, LAW_ALPHABET),
                    &random_texts(&mut rng, LAW_ALPHABET),
                );
                let pair = || (Box::new(Plan::scan("r")), Box::new(Plan::scan("s")));

                let (left, right) = pair();
                let fused = Plan::SemSetDiff { left, right };
                let (left, right) = pair();
                let composed = dedup_of(Plan::SemBagDiff { left, right });
                let a = eval(&fused, &db, &backend).unwrap();
                let b = eval(&composed, &db, &backend).unwrap();
                assert_eq!(a.result, b.result, "difference law, case {case}");

                let (left, right) = pair();
                let fused = Plan::SemSetUnion { left, right };
                let (left, right) = pair();
                let composed = dedup_of(Plan::BagUnion { left, right });
                let a = eval(&fused, &db, &backend).unwrap();
                let b = eval(&composed, &db, &backend).unwrap();
                assert_eq!(a.result, b.result, "union law, case {case}");

                let (left, right) = pair();
                let fused = Plan::SemSetIntersect { left, right };
                let (left, right) = pair();
                let composed = dedup_of(Plan::SemBagIntersect { left, right });
                let a = eval(&fused, &db, &backend).unwrap();
                let b = eval(&composed, &db, &backend).unwrap();
                assert_eq!(a.result, b.result, "intersection law, case {case}");
            }
            let elapsed = started.elapsed();
            assert!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
        },
    );
}

// ---- criterion 5: intersection via projection + join ------------------

const FAMILIES: &[&[&str]] = &[
    &["red apple", "apple red"],
    &["green pear tart", "tart green pear", "pear tart green"],
    &["banana"],
    &["dark chocolate cake", "cake dark chocolate"],
    &["plain rice"],
];

/// Ten authored edge cases plus seeded draws over the equivalence
/// families, exactly as shipped in the engine's own law tests.
fn intersection_corpus() -> Vec<(Vec<String>, Vec<String>)> {
    let own = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let mut pairs: Vec<(Vec<String>, Vec<String>)> = vec![
        (own(&[]), own(&[])),
        (own(&[]), own(&["banana"])),
        (own(&["banana"]), own(&[])),
        (own(&["banana"]), own(&["banana"])),
        (own(&["red apple"]), own(&["apple red"])),
        (own(&["red apple", "banana"]), own(&["plain rice"])),
        (
            own(&["red apple", "red apple", "banana"]),
            own(&["apple red"]),
        ),
        (own(&["banana"]), own(&["banana", "banana", "plain rice"])),
        (
            own(&["red apple", "banana", "plain rice"]),
            own(&["plain rice", "apple red"]),
        ),
        (
            own(&["green pear tart", "tart green pear", "banana"]),
            own(&["pear tart green", "banana", "red apple"]),
        ),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(0x17e5_ec70);
    while pairs.len() < 50 {
        let mut draw = |rng: &mut ChaCha8Rng| {
            let len = rng.random_range(0..=5);
            (0..len)
                .map(|_| {
                    let fam = FAMILIES[rng.random_range(0..FAMILIES.len())];
                    fam[rng.random_range(0..fam.len())].to_string()
                })
                .collect::<Vec<String>>()
        };
        let left = draw(&mut rng);
        let right = draw(&mut rng);
        pairs.push((left, right));
    }
    pairs
}

fn sorted_row_keys(relation: &Relation) -> Vec<String> {
    let mut keys: Vec<String> = relation
        .rows
        .iter()
        .map(|row| {
            row.values
                .iter()
                .map(|v| v.render())
                .collect::<Vec<_>>()
                .join("\u{1f}")
        })
        .collect();
    keys.sort();
    keys
}

#[test]
fn criterion_05_intersection_composition_matches_bag_intersection_up_to_dedup() {
    criterion(
        5,
        "all 50 corpus pairs: projection+join composition keeps the same row multiset as bag intersection",
        || {
            let backend = MockBackend::default();
            for (case, (left_vals, right_vals)) in intersection_corpus().iter().enumerate() {
                let db = pair_db(left_vals, right_vals);
                let scan_r = Plan::scan("r");
                let scan_s = Plan::scan("s");
                let composed = compose_intersection(&scan_r, &scan_s, &db)
                    .unwrap_or_else(|e| panic!("pair {case}: compose failed: {e}"));
                let fused = dedup_of(Plan::SemBagIntersect {
                    left: Box::new(scan_r),
                    right: Box::new(scan_s),
                });
                let via_composition = eval(&composed, &db, &backend)
                    .unwrap_or_else(|e| panic!("pair {case}: {e}"))
                    .result;
                let via_bag = eval(&fused, &db, &backend)
                    .unwrap_or_else(|e| panic!("pair {case}: {e}"))
                    .result;
                assert_eq!(
                    sorted_row_keys(&via_composition),
                    sorted_row_keys(&via_bag),
                    "pair {case} diverged: left={left_vals:?} right={right_vals:?}"
                );
            }
        },
    );
}

// ---- criterion 6: rewrite-rule soundness -------------------------------

const RULE_TEXTS: &[&str] = &[
    "fuji apple",
    "apple pie",
    "banana",
    "plain rice",
    "cherry tart",
];

fn rule_db(rng: &mut ChaCha8Rng) -> Database {
    let keyed = |qualifier: &str, value_col: &str, rng: &mut ChaCha8Rng| {
        let len = rng.random_range(0..=5);
        Relation::new(
            Schema::new(vec![
                Column::qualified(qualifier, "k", ValueKind::Text),
                Column::qualified(qualifier, value_col, ValueKind::Int),
            ]),
            (0..len)
                .map(|_| {
                    Tuple::new(vec![
                        Value::Text(RULE_TEXTS[rng.random_range(0..RULE_TEXTS.len())].into()),
                        Value::Int(rng.random_range(0..3)),
                    ])
                })
                .collect(),
        )
    };
    let mut db = Database::new();
    db.insert("l", keyed("l", "x", rng));
    db.insert("r", keyed("r", "y", rng));
    db.insert("t", keyed("t", "b", rng));
    db
}

fn rule_join(rng: &mut ChaCha8Rng) -> Plan {
    let left = Box::new(Plan::scan("l"));
    let right = Box::new(Plan::scan("r"));
    match rng.random_range(0..3) {
        0 => Plan::Product { left, right },
        1 => Plan::Join {
            left,
            right,
            on: ScalarExpr::Compare {
                op: CmpOp::Eq,
                left: Box::new(ScalarExpr::col(ColRef::qualified("l", "k"))),
                right: Box::new(ScalarExpr::col(ColRef::qualified("r", "k"))),
            },
        },
        _ => Plan::SemJoin {
            left,
            right,
            template: Template::plain("Are {l.k} and {r.k} related to apple?"),
        },
    }
}

fn one_side_predicate(rng: &mut ChaCha8Rng) -> ScalarExpr {
    let (q, int_col) = if rng.random_bool(0.5) {
        ("l", "x")
    } else {
        ("r", "y")
    };
    if rng.random_bool(0.5) {
        ScalarExpr::Compare {
            op: CmpOp::Eq,
            left: Box::new(ScalarExpr::col(ColRef::qualified(q, "k"))),
            right: Box::new(ScalarExpr::Literal(Value::Text(
                RULE_TEXTS[rng.random_range(0..RULE_TEXTS.len())].into(),
            ))),
        }
    } else {
        ScalarExpr::Compare {
            op: CmpOp::Gt,
            left: Box::new(ScalarExpr::col(ColRef::qualified(q, int_col))),
            right: Box::new(ScalarExpr::Literal(Value::Int(rng.random_range(0..3)))),
        }
    }
}

/// Plans drawn over every shape the shipped rules act on, plus benign
/// wrappers, all well-formed over `rule_db` by construction.
fn rule_fodder(rng: &mut ChaCha8Rng) -> Plan {
    let mut plan = match rng.random_range(0..5) {
        // Conventional selection directly over a two-table node.
        0 => Plan::Select {
            input: Box::new(rule_join(rng)),
            predicate: one_side_predicate(rng),
        },
        // Semantic selection whose template binds one side only.
        1 => {
            let side = if rng.random_bool(0.5) { "l.k" } else { "r.y" };
            Plan::SemSelect {
                input: Box::new(rule_join(rng)),
                template: Template::plain(format!("Is {{{side}}} related to apple?")),
            }
        }
        // Stacked projections: outer bare refs over inner bare aliases.
        2 => {
            let inner = Plan::Project {
                input: Box::new(Plan::scan("t")),
                items: vec![
                    ProjectItem {
                        expr: ScalarExpr::col(ColRef::qualified("t", "k")),
                        alias: Some("k2".into()),
                    },
                    ProjectItem {
                        expr: ScalarExpr::col(ColRef::qualified("t", "b")),
                        alias: Some("b2".into()),
                    },
                ],
            };
            let width = rng.random_range(1..=2);
            Plan::Project {
                input: Box::new(inner),
                items: ["k2", "b2"][..width]
                    .iter()
                    .map(|n| ProjectItem {
                        expr: ScalarExpr::col(ColRef::bare(*n)),
                        alias: None,
                    })
                    .collect(),
            }
        }
        // Stacked deduplications, conventional or semantic.
        3 => {
            if rng.random_bool(0.5) {
                Plan::Dedup {
                    input: Box::new(Plan::Dedup {
                        input: Box::new(Plan::scan("t")),
                    }),
                }
            } else {
                dedup_of(dedup_of(Plan::scan("t")))
            }
        }
        // A shape no rule targets, to confirm rules leave it alone.
        _ => Plan::SemSelect {
            input: Box::new(Plan::scan("t")),
            template: Template::plain("the row is related to apple"),
        },
    };
    if rng.random_bool(0.5) {
        plan = Plan::TopK {
            input: Box::new(plan),
            k: rng.random_range(0..=5),
        };
    }
    plan
}

fn sorted_templates(plan: &Plan) -> Vec<(String, String)> {
    let mut templates = plan.semantic_templates();
    templates.sort();
    templates
}

#[test]
fn criterion_06_every_shipped_rewrite_rule_preserves_results_on_100_random_plans() {
    criterion(
        6,
        "each shipped rule, 100 random plans: rewritten plan evaluates exactly like the oracle",
        || {
            let backend = MockBackend::default();
            for (index, rule) in standard_rules().iter().enumerate() {
                let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0600 + index as u64);
                let mut fired = 0usize;
                for case in 0..100 {
                    let db = rule_db(&mut rng);
                    let plan = rule_fodder(&mut rng);
                    let rewritten = apply_rules(&plan, std::slice::from_ref(rule), 8, &db);
                    if rewritten != plan {
                        fired += 1;
                    }
                    assert_eq!(
                        sorted_templates(&plan),
                        sorted_templates(&rewritten),
                        "rule {} changed the semantic nodes on case {case}",
                        rule.name
                    );
                    let expected = eval_oracle(&plan, &db, &backend)
                        .unwrap_or_else(|e| panic!("oracle failed on case {case}: {e}"));
                    let got = eval(&rewritten, &db, &backend)
                        .unwrap_or_else(|e| panic!("rewritten plan failed on case {case}: {e}"));
                    assert_eq!(
                        got.result, expected,
                        "rule {} changed results on case {case}:\n{}",
                        rule.name,
                        plan.pretty()
                    );
                }
                assert!(
                    fired >= 10,
                    "rule {} fired on only {fired}/100 plans; the campaign is too weak",
                    rule.name
                );
            }
        },
    );
}

// ---- criterion 7: conventional bag-difference multiplicities ----------

#[test]
fn criterion_07_bag_difference_multiplicities_are_exhaustively_correct() {
    criterion(
        7,
        "every pair of relations of <= 3 rows over a 2-symbol alphabet obeys max(0, cr - cs)",
        || {
            let mut relations: Vec<Vec<&str>> = vec![vec![]];
            let mut frontier: Vec<Vec<&str>> = vec![vec![]];
            for _ in 0..3 {
                let mut next = Vec::new();
                for prefix in &frontier {
                    for sym in ["a", "b"] {
                        let mut rows = prefix.clone();
                        rows.push(sym);
                        next.push(rows);
                    }
                }
                relations.extend(next.iter().cloned());
                frontier = next;
            }
            assert_eq!(relations.len(), 15);

            let backend = MockBackend::default();
            for r in &relations {
                for s in &relations {
                    let own = |xs: &[&str]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>();
                    let db = pair_db(&own(r), &own(s));
                    let plan = Plan::BagDiff {
                        left: Box::new(Plan::scan("r")),
                        right: Box::new(Plan::scan("s")),
                    };
                    let got = eval(&plan, &db, &backend).expect("bag difference evaluates");
                    for sym in ["a", "b"] {
                        let cr = r.iter().filter(|x| **x == sym).count();
                        let cs = s.iter().filter(|x| **x == sym).count();
                        let out = got
                            .result
                            .rows
                            .iter()
                            .filter(|row| row.values[0] == Value::Text(sym.to_string()))
                            .count();
                        assert_eq!(
                            out,
                            cr.saturating_sub(cs),
                            "multiplicity of {sym:?} in {r:?} EXCEPT ALL {s:?}"
                        );
                    }
                }
            }
        },
    );
}

// ---- criterion 8: call-count audit -------------------------------------

#[test]
fn criterion_08_call_counts_are_exactly_one_per_decision() {
    criterion(
        8,
        "SemJoin over 4x3 rows logs exactly 12 predicate calls; SemSelect over 10 logs exactly 10",
        || {
            let backend = MockBackend::default();

            let mut db = Database::new();
            db.insert(
                "l",
                text_relation("l", &["a", "b", "a", "b"].map(String::from)),
            );
            db.insert("r", text_relation("r", &["b", "a", "b"].map(String::from)));
            let join = Plan::SemJoin {
                left: Box::new(Plan::scan("l")),
                right: Box::new(Plan::scan("r")),
                template: Template::plain("Is {l.v} related to apple together with {r.v}?"),
            };
            let report = eval(&join, &db, &backend).expect("semantic join evaluates");
            assert_eq!(report.total_calls.predicate, 12, "4 x 3 pairs");
            assert_eq!(report.total_calls.total(), 12, "nothing but predicate calls");

            let mut db = Database::new();
            let rows: Vec<String> = (0..10)
                .map(|i| if i % 2 == 0 { "a".into() } else { "b".into() })
                .collect();
            db.insert("t", text_relation("t", &rows));
            let select = Plan::SemSelect {
                input: Box::new(Plan::scan("t")),
                template: Template::plain("Is {t.v} related to apple?"),
            };
            let report = eval(&select, &db, &backend).expect("semantic selection evaluates");
            assert_eq!(report.total_calls.predicate, 10, "one call per row");
            assert_eq!(report.total_calls.total(), 10, "nothing but predicate calls");
        },
    );
}

// ---- criterion 9: byte-determinism of the binary ------------------------

#[test]
fn criterion_09_the_binary_is_byte_deterministic_on_the_canonical_runs() {
    criterion(
        9,
        "queries and rewrites from criteria 1-3 print byte-identical stdout on consecutive runs",
        || {
            let root = repo_root();
            let runs: Vec<Vec<String>> = vec![
                vec![root.join("queries/apple.sql").display().to_string()],
                vec![root.join("queries/movies.sql").display().to_string()],
                vec![
                    "--rewrite-for".into(),
                    "lotus".into(),
                    root.join("queries/movies.sql").display().to_string(),
                ],
                vec![
                    "--rewrite-for".into(),
                    "docetl".into(),
                    root.join("queries/movies.sql").display().to_string(),
                ],
                vec![
                    "--rewrite-for".into(),
                    "palimpzest".into(),
                    root.join("queries/movies.sql").display().to_string(),
                ],
            ];
            for args in runs {
                let run = || {
                    let out = Command::new(env!("CARGO_BIN_EXE_saber"))
                        .args(&args)
                        .output()
                        .expect("binary runs");
                    assert!(
                        out.status.success(),
                        "{args:?}: exit {:?}\n{}",
                        out.status.code(),
                        String::from_utf8_lossy(&out.stderr)
                    );
                    out.stdout
                };
                let first = run();
                let second = run();
                assert!(!first.is_empty(), "{args:?} printed nothing");
                assert_eq!(
                    first, second,
                    "{args:?} printed different bytes on the second run"
                );
            }
        },
    );
}

// ---- criterion 10: transport contract ----------------------------------

enum Reply {
    Status(u16, &'static str),
    Json(&'static str),
    HangMs(u64),
}

fn start_stub(script: Vec<Reply>) -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind stub listener");
    let addr = listener.local_addr().expect("stub address");
    let hits = Arc::new(AtomicUsize::new(0));
    let seen = Arc::clone(&hits);
    std::thread::spawn(move || {
        for reply in script {
            let Ok((mut conn, _)) = listener.accept() else {
                return;
            };
            if read_request(&mut conn).is_none() {
                return;
            }
            seen.fetch_add(1, Ordering::SeqCst);
            match reply {
                Reply::Status(code, body) => write_response(&mut conn, code, "text/plain", body),
                Reply::Json(body) => write_response(&mut conn, 200, "application/json", body),
                Reply::HangMs(ms) => std::thread::sleep(Duration::from_millis(ms)),
            }
        }
    });
    (format!("http://{addr}/v1/chat/completions"), hits)
}

fn read_request(conn: &mut TcpStream) -> Option<()> {
    conn.set_read_timeout(Some(Duration::from_secs(10))).ok()?;
    let mut buf = Vec::new();
    let mut byte = [0u8; 1];
    while !buf.ends_with(b"\r\n\r\n") {
        if conn.read(&mut byte).ok()? == 0 {
            return None;
        }
        buf.push(byte[0]);
    }
    let headers = String::from_utf8_lossy(&buf).to_ascii_lowercase();
    let length: usize = headers
        .lines()
        .find_map(|l| l.strip_prefix("content-length:"))
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(0);
    let mut body = vec![0u8; length];
    conn.read_exact(&mut body).ok()?;
    Some(())
}

fn write_response(conn: &mut TcpStream, code: u16, content_type: &str, body: &str) {
    let reason = match code {
        200 => "OK",
        401 => "Unauthorized",
        500 => "Internal Server Error",
        _ => "Response",
    };
    let text = format!(
        "HTTP/1.1 {code} {reason}\r\nContent-Type: {content_type}\r\n\
         Content-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len(),
    );
    let _ = conn.write_all(text.as_bytes());
}

fn stub_endpoint(url: &str, max_retries: u32, timeout_secs: u64) -> LlmEndpointConfig {
    LlmEndpointConfig {
        base_url: url.to_string(),
        max_retries,
        timeout_secs,
        ..LlmEndpointConfig::default()
    }
}

#[test]
fn criterion_10_the_llm_transport_honors_its_retry_timeout_and_status_contract() {
    criterion(
        10,
        "stub endpoint: 5xx retries then succeeds, 401 fails fast, a hang times out",
        || {
            // Retryable failure, then success on the second attempt.
            let (url, hits) = start_stub(vec![
                Reply::Status(500, "overloaded"),
                Reply::Json(r#"{"choices":[{"message":{"content":"True"}}]}"#),
            ]);
            let backend = LlmBackend::new(stub_endpoint(&url, 2, 5), 0.8);
            let verdict = backend
                .predicate("Is {v} related to apple?", "v: fuji apple")
                .expect("retry should reach the success");
            assert!(verdict);
            assert_eq!(hits.load(Ordering::SeqCst), 2, "exactly one retry");

            // Non-retryable status: fail fast, spend no retry budget.
            let (url, hits) = start_stub(vec![Reply::Status(401, "who are you")]);
            let backend = LlmBackend::new(stub_endpoint(&url, 3, 5), 0.8);
            let err = backend
                .predicate("Is {v} related to apple?", "v: fuji apple")
                .expect_err("401 must fail");
            assert!(
                matches!(
                    err,
                    Error::Transport {
                        kind: TransportErrorKind::HttpStatus(401),
                        ..
                    }
                ),
                "expected HttpStatus(401), got {err:?}"
            );
            assert_eq!(hits.load(Ordering::SeqCst), 1, "no retries on 401");

            // Timeout: the client gives up at its own deadline.
            let (url, hits) = start_stub(vec![Reply::HangMs(4000)]);
            let backend = LlmBackend::new(stub_endpoint(&url, 0, 1), 0.8);
            let started = Instant::now();
            let err = backend
                .predicate("Is {v} related to apple?", "v: fuji apple")
                .expect_err("server never answers");
            assert!(
                matches!(
                    err,
                    Error::Transport {
                        kind: TransportErrorKind::Timeout,
                        ..
                    }
                ),
                "expected Timeout, got {err:?}"
            );
            assert_eq!(hits.load(Ordering::SeqCst), 1, "zero retries configured");
            assert!(
                started.elapsed() < Duration::from_millis(3500),
                "client must not wait for the server"
            );
        },
    );
}
