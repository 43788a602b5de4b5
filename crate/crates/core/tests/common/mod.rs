//! Shared helpers for the integration tests: the parser fixture corpus and
//! the exhaustive Kendall tau oracle.
//!
//! Success fixtures pair a raw judge output with the score it must parse
//! to; adversarial fixtures pair a malformed output with the exact
//! structured failure it must produce. Both the granular parser tests and
//! the acceptance suite run over the same corpus.

#![allow(dead_code)]

use std::cmp::Ordering;

use rankjudge::judge::parse::{
    parse_anchor, parse_likert, parse_numeric, parse_token_probs, ParseFailure,
};

/// Exhaustive O(n^2) tau-b: count every pair's concordance and ties, then
/// evaluate the same final expression the library uses so a correct count
/// must reproduce the library value bit for bit. `None` mirrors the
/// undefined case (all pairs tied on one side).
pub fn oracle_tau(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    let mut c_minus_d: i128 = 0;
    let mut n1: u128 = 0;
    let mut n2: u128 = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = xs[i].partial_cmp(&xs[j]).unwrap();
            let dy = ys[i].partial_cmp(&ys[j]).unwrap();
            if dx == Ordering::Equal {
                n1 += 1;
            }
            if dy == Ordering::Equal {
                n2 += 1;
            }
            if dx != Ordering::Equal && dy != Ordering::Equal {
                c_minus_d += if dx == dy { 1 } else { -1 };
            }
        }
    }
    let n0 = (n as u128) * (n as u128 - 1) / 2;
    if n0 == n1 || n0 == n2 {
        return None;
    }
    Some((c_minus_d as f64) / (((n0 - n1) as f64) * ((n0 - n2) as f64)).sqrt())
}

/// Minimum fixture count per realization, asserted by the checks below.
pub const MIN_FIXTURES_PER_REALIZATION: usize = 30;

/// Raw outputs for the 0-100 numeric realization: first number wins.
pub const NUMERIC_FIXTURES: &[(&str, f64)] = &[
    ("85", 85.0),
    ("I'd rate it 85 out of 100.", 85.0),
    ("Rating: 90", 90.0),
    ("90\n", 90.0),
    ("  72  ", 72.0),
    ("7.5", 7.5),
    ("Score: 7.5", 7.5),
    ("0", 0.0),
    ("100", 100.0),
    ("100.0", 100.0),
    ("0.0", 0.0),
    ("I would give this response a 42.", 42.0),
    ("42/100", 42.0),
    ("Rating - 55", 55.0),
    ("**88**", 88.0),
    ("The answer deserves 63 points.", 63.0),
    ("93.", 93.0),
    ("66.67", 66.67),
    ("My rating is: 12", 12.0),
    ("rating=81", 81.0),
    ("I'd say 49 out of 100", 49.0),
    ("3 out of 100 - a weak attempt", 3.0),
    ("97 - excellent", 97.0),
    ("Final score 58.5 overall", 58.5),
    ("0.5", 0.5),
    ("99.999", 99.999),
    ("Sure! 77", 77.0),
    ("\"68\"", 68.0),
    ("[70]", 70.0),
    ("Score:\n\n86", 86.0),
    ("15 (needs work)", 15.0),
    ("just barely passes: 51", 51.0),
];

/// Malformed numeric outputs and the failures they must produce.
pub const NUMERIC_ADVERSARIAL: &[(&str, ParseFailure)] = &[
    ("", ParseFailure::NoNumber),
    ("no score provided", ParseFailure::NoNumber),
    ("I cannot rate this.", ParseFailure::NoNumber),
    ("one hundred", ParseFailure::NoNumber),
    ("Score: N/A", ParseFailure::NoNumber),
    ("ten out of ten", ParseFailure::NoNumber),
    ("\u{0661}\u{0662}\u{0663}", ParseFailure::NoNumber), // Arabic-Indic digits
    ("150", ParseFailure::NumberOutOfRange { value: 150.0 }),
    ("101", ParseFailure::NumberOutOfRange { value: 101.0 }),
    ("-5", ParseFailure::NumberOutOfRange { value: -5.0 }),
    ("-0.5", ParseFailure::NumberOutOfRange { value: -0.5 }),
    ("100.001", ParseFailure::NumberOutOfRange { value: 100.001 }),
    ("I rate it -12 out of 100", ParseFailure::NumberOutOfRange { value: -12.0 }),
];

/// Raw outputs for the five-point rating realization.
pub const LIKERT_FIXTURES: &[(&str, f64)] = &[
    ("[[Mediocre]]", 3.0),
    ("[[Very Good]]", 5.0),
    ("[[Very Bad]]", 1.0),
    ("[[Good]]", 4.0),
    ("[[Bad]]", 2.0),
    ("Very Good", 5.0),
    ("very good", 5.0),
    ("VERY BAD", 1.0),
    ("Rating: [[Good]]", 4.0),
    ("The response is [[Mediocre]].", 3.0),
    ("I'd call it good.", 4.0),
    ("mediocre at best", 3.0),
    ("[[very good]]", 5.0),
    ("[[VERY GOOD]]", 5.0),
    ("This is a bad response.", 2.0),
    ("Definitely very bad.", 1.0),
    ("Rating: Very Good. Clear and complete.", 5.0),
    ("[[Bad]] - factual errors throughout", 2.0),
    ("Quality: good", 4.0),
    ("It is neither strong nor weak: mediocre.", 3.0),
    ("[ [Good] ]", 4.0),
    ("Answer: [[Very Bad]]", 1.0),
    ("\n[[Good]]\n", 4.0),
    ("The rating is **[[Very Good]]**", 5.0),
    ("bad", 2.0),
    ("GOOD", 4.0),
    ("MeDiOcRe", 3.0),
    ("verdict: [[mediocre]]", 3.0),
    ("Very bad, unfortunately", 1.0),
    ("Overall: very good - thorough and correct", 5.0),
    ("I rate this response [[Good]]", 4.0),
    ("A solid but unremarkable answer. [[Mediocre]]", 3.0),
];

/// Outputs with no rating label anywhere.
pub const LIKERT_ADVERSARIAL: &[(&str, ParseFailure)] = &[
    ("", ParseFailure::NoLikertLabel),
    ("it's fine", ParseFailure::NoLikertLabel),
    ("7/10", ParseFailure::NoLikertLabel),
    ("[[Excellent]]", ParseFailure::NoLikertLabel),
    ("[[Average]]", ParseFailure::NoLikertLabel),
    ("a strong response", ParseFailure::NoLikertLabel),
    ("terrible", ParseFailure::NoLikertLabel),
    ("[[]]", ParseFailure::NoLikertLabel),
    ("The scale runs from very low to very high.", ParseFailure::NoLikertLabel),
    ("B a d", ParseFailure::NoLikertLabel),
];

/// Raw outputs for the anchored pairwise realization: last verdict wins,
/// tokens are matched exactly (case-sensitive).
pub const ANCHOR_FIXTURES: &[(&str, f64)] = &[
    ("My final verdict is tie: [[A=B]]", 0.0),
    ("[[A>>B]]", 2.0),
    ("[[A>B]]", 1.0),
    ("[[A=B]]", 0.0),
    ("[[B>A]]", -1.0),
    ("[[B>>A]]", -2.0),
    ("[[B>A]] \u{2026} [[A>B]]", 1.0),
    ("Assistant A is significantly better: [[A>>B]]", 2.0),
    ("Assistant B is slightly better: [[B>A]]", -1.0),
    ("Final Verdict: [[B>>A]]", -2.0),
    ("After weighing both, my final verdict is [[A>B]].", 1.0),
    ("Both cover the question equally well. [[A=B]]", 0.0),
    ("[[A>B]]\n", 1.0),
    ("  [[B>A]]  ", -1.0),
    ("My final verdict is tie: [[A=B]].", 0.0),
    ("I initially thought [[A>B]], but on reflection [[B>A]].", -1.0),
    ("[[B=A]]", 0.0),
    ("The better answer is A: [[A>>B]]", 2.0),
    ("Tie, relatively the same: [[A=B]]", 0.0),
    ("**[[B>A]]**", -1.0),
    ("My final verdict: [[B>>A]] - B is far more thorough.", -2.0),
    ("A<B so [[B>A]]", -1.0),
    ("[[A>>B]] [[A>>B]]", 2.0),
    ("Comparing helpfulness, depth, and accuracy: [[A>B]]", 1.0),
    ("\"[[A=B]]\"", 0.0),
    ("My final verdict is that assistant B is slightly better: [[B>A]]", -1.0),
    ("While A is more concise, B answers the actual question. [[B>>A]]", -2.0),
    ("[[A=B]] - both omit the edge case.", 0.0),
    ("First pass: [[A>>B]]. Final verdict after rubric: [[A=B]]", 0.0),
    ("Verdict = [[A>B]]; A cites sources.", 1.0),
    ("Assistant A is slightly better than B: [[A>B]]", 1.0),
    ("tie -> [[B=A]]", 0.0),
];

/// Outputs with no verdict token.
pub const ANCHOR_ADVERSARIAL: &[(&str, ParseFailure)] = &[
    ("", ParseFailure::NoVerdict),
    ("A is better", ParseFailure::NoVerdict),
    ("[[A > B]]", ParseFailure::NoVerdict),
    ("[[a>b]]", ParseFailure::NoVerdict),
    ("[A>B]", ParseFailure::NoVerdict),
    ("A>>B", ParseFailure::NoVerdict),
    ("[[A<B]]", ParseFailure::NoVerdict),
    ("[[C>D]]", ParseFailure::NoVerdict),
    ("The verdict is a tie.", ParseFailure::NoVerdict),
    ("[[AB]]", ParseFailure::NoVerdict),
];

/// Top-token distributions for the yes/no realization, in probability
/// space: (tokens with probabilities, expected score). The check converts
/// probabilities to log-probabilities before parsing.
pub const TOKEN_PROB_FIXTURES: &[(&[(&str, f64)], f64)] = &[
    (&[("Yes", 0.8), (" no", 0.1)], 0.8 / 0.9),
    (&[("yes", 0.5), ("Yes", 0.25), ("No", 0.25)], 0.75),
    (&[("Yes", 0.9), ("No", 0.1)], 0.9),
    (&[("yes", 1.0)], 1.0),
    (&[("No", 1.0)], 0.0),
    (&[("no", 0.7), ("yes", 0.3)], 0.3),
    (&[(" Yes", 0.6), (" No", 0.4)], 0.6),
    (&[("YES", 0.5), ("NO", 0.5)], 0.5),
    (&[("Yes", 0.4), ("yes", 0.2), (" yes", 0.2), ("No", 0.2)], 0.8),
    (&[("Yes", 0.5), ("maybe", 0.3), ("No", 0.2)], 0.5 / 0.7),
    (&[("\tyes", 0.45), ("no", 0.55)], 0.45),
    (&[("\nYes", 0.5), ("No", 0.5)], 0.5),
    (&[("Yes", 1e-3), ("No", 1e-2)], 1e-3 / 1.1e-2),
    (&[("yes", 0.33), ("no", 0.33), ("Maybe", 0.34)], 0.5),
    (&[("Yes", 0.25)], 1.0),
    (&[(" no", 0.9)], 0.0),
    (&[("Yes", 0.28), ("No", 0.12), ("I", 0.6)], 0.7),
    (&[("yES", 0.5), ("nO", 0.5)], 0.5),
    (&[("Yes", 0.5), ("No", 0.125), ("no", 0.125), (" No", 0.25)], 0.5),
    (&[("yes", 0.6), ("yeah", 0.2), ("no", 0.2)], 0.75),
    (&[("Yes", 0.999), ("No", 0.001)], 0.999),
    (&[("no", 0.5), (" yes", 0.5)], 0.5),
    (&[("Yes", 0.1), ("No", 0.9)], 0.1),
    (&[("Yes", 0.35), ("No", 0.35), ("Sure", 0.3)], 0.5),
    (&[(" YES", 0.8), (" NO", 0.2)], 0.8),
    (&[("yes", 0.005), ("unsure", 0.99), ("no", 0.005)], 0.5),
    (&[("No", 0.6), ("no", 0.2), ("Yes", 0.2)], 0.2),
    (&[("Yes", 0.64), ("No", 0.16), ("ok", 0.2)], 0.8),
    (&[("\r\nno", 0.75), ("yes", 0.25)], 0.25),
    (&[("YeS", 0.3), ("No", 0.7)], 0.3),
];

/// Top-token distributions with no usable yes/no mass.
pub const TOKEN_PROB_ADVERSARIAL: &[(&[(&str, f64)], ParseFailure)] = &[
    (&[], ParseFailure::EmptyTopLogprobs),
    (&[("maybe", 0.9)], ParseFailure::NoYesNoTokens),
    (&[("Y", 0.5), ("N", 0.5)], ParseFailure::NoYesNoTokens),
    (&[("yes!", 0.5)], ParseFailure::NoYesNoTokens),
    (&[("yesno", 1.0)], ParseFailure::NoYesNoTokens),
    (&[("", 1.0)], ParseFailure::NoYesNoTokens),
    (&[("oui", 0.6), ("non", 0.4)], ParseFailure::NoYesNoTokens),
    (&[("nope", 1.0)], ParseFailure::NoYesNoTokens),
    (&[("yes ", 1.0)], ParseFailure::NoYesNoTokens), // trailing space is not stripped
];

/// Convert probability-space fixture entries to the log-probability lists
/// the parser consumes.
pub fn to_logprobs(entries: &[(&str, f64)]) -> Vec<(String, f64)> {
    entries
        .iter()
        .map(|(token, p)| ((*token).to_owned(), p.ln()))
        .collect()
}

pub fn check_numeric_fixtures() {
    assert!(NUMERIC_FIXTURES.len() >= MIN_FIXTURES_PER_REALIZATION);
    for (raw, expected) in NUMERIC_FIXTURES {
        assert_eq!(parse_numeric(raw), Ok(*expected), "numeric fixture {raw:?}");
    }
}

pub fn check_numeric_adversarial() {
    for (raw, failure) in NUMERIC_ADVERSARIAL {
        assert_eq!(
            parse_numeric(raw),
            Err(failure.clone()),
            "numeric adversarial fixture {raw:?}"
        );
    }
}

pub fn check_likert_fixtures() {
    assert!(LIKERT_FIXTURES.len() >= MIN_FIXTURES_PER_REALIZATION);
    for (raw, expected) in LIKERT_FIXTURES {
        assert_eq!(parse_likert(raw), Ok(*expected), "likert fixture {raw:?}");
    }
}

pub fn check_likert_adversarial() {
    for (raw, failure) in LIKERT_ADVERSARIAL {
        assert_eq!(
            parse_likert(raw),
            Err(failure.clone()),
            "likert adversarial fixture {raw:?}"
        );
    }
}

pub fn check_anchor_fixtures() {
    assert!(ANCHOR_FIXTURES.len() >= MIN_FIXTURES_PER_REALIZATION);
    for (raw, expected) in ANCHOR_FIXTURES {
        assert_eq!(parse_anchor(raw), Ok(*expected), "anchor fixture {raw:?}");
    }
}

pub fn check_anchor_adversarial() {
    for (raw, failure) in ANCHOR_ADVERSARIAL {
        assert_eq!(
            parse_anchor(raw),
            Err(failure.clone()),
            "anchor adversarial fixture {raw:?}"
        );
    }
}

pub fn check_token_prob_fixtures() {
    assert!(TOKEN_PROB_FIXTURES.len() >= MIN_FIXTURES_PER_REALIZATION);
    for (entries, expected) in TOKEN_PROB_FIXTURES {
        let got = parse_token_probs(&to_logprobs(entries))
            .unwrap_or_else(|e| panic!("token-prob fixture {entries:?} failed: {e}"));
        // exp(ln p) can be one ulp off p, so the ratio gets a tolerance.
        assert!(
            (got - expected).abs() <= 1e-12,
            "token-prob fixture {entries:?}: got {got}, expected {expected}"
        );
    }
}

pub fn check_token_prob_adversarial() {
    for (entries, failure) in TOKEN_PROB_ADVERSARIAL {
        assert_eq!(
            parse_token_probs(&to_logprobs(entries)),
            Err(failure.clone()),
            "token-prob adversarial fixture {entries:?}"
        );
    }
}

/// Run the whole corpus: every success fixture parses to its score, every
/// adversarial fixture yields its structured failure.
pub fn check_all_parser_fixtures() {
    check_numeric_fixtures();
    check_numeric_adversarial();
    check_likert_fixtures();
    check_likert_adversarial();
    check_anchor_fixtures();
    check_anchor_adversarial();
    check_token_prob_fixtures();
    check_token_prob_adversarial();
}
