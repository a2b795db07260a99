//! BLEU values frozen from an independent implementation of the formula.

use xsrl::metrics::View;

pub const TOL: f64 = 1e-4;

// (hypotheses, references, view, score, p1..p4, brevity penalty)
#[allow(clippy::type_complexity)]
pub const CORPUS_CASES: &[(&[&str], &[&str], View, f64, [f64; 4], f64)] = &[
    (&["the cat sat"], &["the cat sat down"], View::Full, 0.0, [1.0, 1.0, 1.0, 0.0], 0.7165313106),
    (&["the cat sat on the mat"], &["the cat sat on the mat"], View::Full, 100.0, [1.0, 1.0, 1.0, 1.0], 1.0),
    (&["the cat sat on the mat"], &["the cat is on the mat"], View::Full, 0.0, [0.8333333333, 0.6, 0.25, 0.0], 1.0),
    (&["a b c d e"], &["a b c d e f g h"], View::Full, 54.8811636094, [1.0, 1.0, 1.0, 1.0], 0.5488116361),
    (&["a b c d e f g h i"], &["a b c d e f g h"], View::Full, 86.3340021370, [0.8888888889, 0.875, 0.8571428571, 0.8333333333], 1.0),
    (&["the the the the the the the"], &["the cat is on the mat"], View::Full, 0.0, [0.2857142857, 0.0, 0.0, 0.0], 1.0),
    (&["a b c d", "e f g h"], &["a b c d", "e f g x"], View::Full, 72.3126902130, [0.875, 0.8333333333, 0.75, 0.5], 1.0),
    (
        &["(# the cat A0) sat on (# the mat A1)"],
        &["(# the cat A0) sat on (# a mat A1)"],
        View::Full,
        70.7106781187,
        [0.9, 0.7777777778, 0.625, 0.5714285714],
        1.0,
    ),
    (
        &["(# the cat A0) sat on (# the mat A1)"],
        &["(# the cat A0) sat on (# a mat A1)"],
        View::Words,
        53.7284965912,
        [0.8333333333, 0.6, 0.5, 0.3333333333],
        1.0,
    ),
    (
        &["(# the cat A0) sat on (# the mat A1) (# x A2)"],
        &["(# the cat A0) sat on (# a mat A1) (# y A3)"],
        View::Labels,
        75.9835685652,
        [0.8333333333, 0.8, 0.75, 0.6666666667],
        1.0,
    ),
    (&["<s> a b c d e </s>"], &["a b c d e"], View::Full, 100.0, [1.0, 1.0, 1.0, 1.0], 1.0),
    (&["x y z w v"], &["a b c d e"], View::Full, 0.0, [0.0, 0.0, 0.0, 0.0], 1.0),
];

pub const SENTENCE_CASES: &[(&str, &str, f64)] = &[
    ("the cat sat", "the cat sat down", 71.6531310574),
    ("the cat sat on the mat", "the cat sat on the mat", 100.0),
    ("the cat sat on the mat", "the cat is on the mat", 48.5491771707),
    ("x y z", "a b c", 0.0),
    ("a b", "a b c d e f", 13.5335283237),
    ("mat the on sat cat the", "the cat sat on the mat", 30.2137539736),
    ("the", "the cat", 36.7879441171),
    ("a b c d e f g", "a b c x e f g", 49.7429220747),
    // either side of the generation filter threshold of 10
    ("a b c z0 z1", "a b c d e f g h i j k l m", 9.9923270832),
    ("z5 z4 z3 z2 z1 z0 b a", "a b c d e f g h i j k l", 10.0173521647),
];
