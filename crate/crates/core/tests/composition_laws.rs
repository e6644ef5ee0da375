//! Set-operation composition laws over the real evaluator.
//!
//! Two campaigns:
//! 1. On randomized relation pairs, the semantic set operations equal
//!    their defining compositions — SemSetDiff = SemDedup(SemBagDiff),
//!    SemSetUnion = SemDedup(BagUnion), SemSetIntersect =
//!    SemDedup(SemBagIntersect) — as exact relation equality. These hold
//!    for arbitrary inputs because both plans see identical rows and the
//!    same deterministic backend, so the campaign samples adversarially:
//!    empty strings, punctuation-only values, near-threshold texts.
//! 2. On a fixed 50-pair corpus drawn from disjoint equivalence
//!    families, the projection+join composition that stands in for
//!    native intersection equals semantic bag intersection up to
//!    deduplication, with exact multiset equality of kept rows. Family
//!    discipline (members share a token multiset; families are pairwise
//!    dissimilar) makes row equivalence transitive, which is what the
//!    composition needs; the corpus validates its own discipline first.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saber_core::algebra::{compose_intersection, Plan};
use saber_core::backend::{mock::MockBackend, SemanticBackend};
use saber_core::exec::{eval, Database};
use saber_core::relation::{Column, Relation, Schema, Tuple, Value, ValueKind};

fn text_relation(qualifier: &str, values: &[&str]) -> Relation {
    Relation::new(
        Schema::new(vec![Column::qualified(qualifier, "v", ValueKind::Text)]),
        values
            .iter()
            .map(|v| Tuple::new(vec![Value::Text(v.to_string())]))
            .collect(),
    )
}

fn two_col_relation(qualifier: &str, rows: &[(&str, i64)]) -> Relation {
    Relation::new(
        Schema::new(vec![
            Column::qualified(qualifier, "v", ValueKind::Text),
            Column::qualified(qualifier, "n", ValueKind::Int),
        ]),
        rows.iter()
            .map(|(v, n)| Tuple::new(vec![Value::Text(v.to_string()), Value::Int(*n)]))
            .collect(),
    )
}

fn pair_db(r: Relation, s: Relation) -> Database {
    let mut db = Database::new();
    db.insert("r", r);
    db.insert("s", s);
    db
}

fn scan_pair() -> (Plan, Plan) {
    (Plan::scan("r"), Plan::scan("s"))
}

/// Texts chosen to stress the equivalence function: permutation pairs,
/// partial overlaps near the threshold, degenerate tokenizations.
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

fn random_relation(rng: &mut ChaCha8Rng, qualifier: &str, two_cols: bool) -> Relation {
    let len = rng.random_range(0..=5);
    if two_cols {
        let rows: Vec<(&str, i64)> = (0..len)
            .map(|_| {
                (
                    LAW_ALPHABET[rng.random_range(0..LAW_ALPHABET.len())],
                    rng.random_range(0..3),
                )
            })
            .collect();
        two_col_relation(qualifier, &rows)
    } else {
        let values: Vec<&str> = (0..len)
            .map(|_| LAW_ALPHABET[rng.random_range(0..LAW_ALPHABET.len())])
            .collect();
        text_relation(qualifier, &values)
    }
}

fn assert_law(db: &Database, fused: Plan, composed: Plan, law: &str, case: usize) {
    let backend = MockBackend::default();
    let a = eval(&fused, db, &backend).unwrap_or_else(|e| panic!("{law} case {case}: {e}"));
    let b = eval(&composed, db, &backend).unwrap_or_else(|e| panic!("{law} case {case}: {e}"));
    assert_eq!(
        a.result, b.result,
        "{law} violated on case {case}:\nfused:\n{:?}\ncomposed:\n{:?}",
        a.result, b.result
    );
}

#[test]
fn semantic_set_operations_equal_their_compositions_on_200_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_1a75);
    for case in 0..200 {
        let two_cols = case % 2 == 1;
        let db = pair_db(
            random_relation(&mut rng, "r", two_cols),
            random_relation(&mut rng, "s", two_cols),
        );

        let (l, r) = scan_pair();
        assert_law(
            &db,
            Plan::SemSetDiff {
                left: Box::new(l.clone()),
                right: Box::new(r.clone()),
            },
            Plan::SemDedup {
                input: Box::new(Plan::SemBagDiff {
                    left: Box::new(l),
                    right: Box::new(r),
                }),
                attr: None,
            },
            "SemSetDiff = SemDedup(SemBagDiff)",
            case,
        );

        let (l, r) = scan_pair();
        assert_law(
            &db,
            Plan::SemSetUnion {
                left: Box::new(l.clone()),
                right: Box::new(r.clone()),
            },
            Plan::SemDedup {
                input: Box::new(Plan::BagUnion {
                    left: Box::new(l),
                    right: Box::new(r),
                }),
                attr: None,
            },
            "SemSetUnion = SemDedup(BagUnion)",
            case,
        );

        let (l, r) = scan_pair();
        assert_law(
            &db,
            Plan::SemSetIntersect {
                left: Box::new(l.clone()),
                right: Box::new(r.clone()),
            },
            Plan::SemDedup {
                input: Box::new(Plan::SemBagIntersect {
                    left: Box::new(l),
                    right: Box::new(r),
                }),
                attr: None,
            },
            "SemSetIntersect = SemDedup(SemBagIntersect)",
            case,
        );
    }
}

#[test]
fn conventional_set_operations_equal_their_compositions_too() {
    // The same laws hold one level down, with conventional dedup.
    let mut rng = ChaCha8Rng::seed_from_u64(0xcafe_f00d);
    for case in 0..50 {
        let db = pair_db(
            random_relation(&mut rng, "r", false),
            random_relation(&mut rng, "s", false),
        );
        let (l, r) = scan_pair();
        assert_law(
            &db,
            Plan::SetDiff {
                left: Box::new(l.clone()),
                right: Box::new(r.clone()),
            },
            Plan::Dedup {
                input: Box::new(Plan::BagDiff {
                    left: Box::new(l),
                    right: Box::new(r),
                }),
            },
            "SetDiff = Dedup(BagDiff)",
            case,
        );
    }
}

/// Disjoint equivalence families: members of one family share a token
/// multiset (cosine 1 under bag-of-words embeddings), distinct families
/// share no tokens. Row equivalence restricted to such values is an
/// equality on families, hence transitive.
const FAMILIES: &[&[&str]] = &[
    &["red apple", "apple red"],
    &["green pear tart", "tart green pear", "pear tart green"],
    &["banana"],
    &["dark chocolate cake", "cake dark chocolate"],
    &["plain rice"],
];

fn family_discipline_holds(backend: &MockBackend) {
    for (i, fam_a) in FAMILIES.iter().enumerate() {
        for (j, fam_b) in FAMILIES.iter().enumerate() {
            for a in *fam_a {
                for b in *fam_b {
                    let verdict = backend.equivalent(a, b).unwrap();
                    assert_eq!(
                        verdict,
                        i == j,
                        "family discipline broken: '{a}' vs '{b}' -> {verdict}"
                    );
                }
            }
        }
    }
}

/// The fixed 50-pair corpus: ten authored edge cases, forty seeded draws
/// over the families. Deterministic by construction.
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
        (
            own(&["banana"]),
            own(&["banana", "banana", "plain rice"]),
        ),
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
        let draw = |rng: &mut ChaCha8Rng| {
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
fn intersection_composition_matches_bag_intersection_up_to_dedup_on_the_corpus() {
    let backend = MockBackend::default();
    family_discipline_holds(&backend);

    for (case, (left_vals, right_vals)) in intersection_corpus().iter().enumerate() {
        let left_refs: Vec<&str> = left_vals.iter().map(String::as_str).collect();
        let right_refs: Vec<&str> = right_vals.iter().map(String::as_str).collect();
        let db = pair_db(
            text_relation("r", &left_refs),
            text_relation("s", &right_refs),
        );
        let (l, r) = scan_pair();
        let composed = compose_intersection(&l, &r, &db)
            .unwrap_or_else(|e| panic!("corpus pair {case}: compose failed: {e}"));
        let fused = Plan::SemDedup {
            input: Box::new(Plan::SemBagIntersect {
                left: Box::new(l),
                right: Box::new(r),
            }),
            attr: None,
        };
        let backend = MockBackend::default();
        let via_composition = eval(&composed, &db, &backend)
            .unwrap_or_else(|e| panic!("corpus pair {case}: {e}"))
            .result;
        let via_bag = eval(&fused, &db, &backend)
            .unwrap_or_else(|e| panic!("corpus pair {case}: {e}"))
            .result;
        assert_eq!(
            sorted_row_keys(&via_composition),
            sorted_row_keys(&via_bag),
            "corpus pair {case} diverged: left={left_vals:?} right={right_vals:?}"
        );
    }
}
