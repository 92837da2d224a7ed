#![allow(dead_code)]

use codeanon::corpus::{Node, Snippet};
use codeanon::rng::Prng;
use codeanon::vocab::{build_vocabulary, FrequencyTable, Vocabulary};

/// Values that stress escaping and unicode handling alongside plain names.
const TRICKY: &[&str] = &[
    "var1", "var7", "var1000", "UNK", "PAD", "EOS", "var1\u{200B}_orig", "名前", "ß", "🦀x", "a\tb", "line\nbreak",
];

pub fn random_value(rng: &mut Prng, alphabet: usize) -> String {
    if rng.below(10) == 0 {
        TRICKY[rng.below(TRICKY.len() as u64) as usize].to_string()
    } else {
        format!("id{}", rng.below(alphabet as u64))
    }
}

pub fn random_snippet(rng: &mut Prng, id: &str, max_len: usize, alphabet: usize) -> Snippet {
    let len = 1 + rng.below(max_len as u64) as usize;
    let nodes = (0..len)
        .map(|_| match rng.below(4) {
            0 => Node::structural(["Module", "Call", "Assign", "If"][rng.below(4) as usize]),
            1 => Node::valued("attr", &random_value(rng, alphabet)),
            _ => Node::valued("NameLoad", &random_value(rng, alphabet)),
        })
        .collect();
    let mut s = Snippet::new(id, nodes);
    s.repository = format!("repo{}", rng.below(5));
    s.path = format!("{id}.py");
    s
}

/// Vocabulary of `size` distinct values drawn from the same distribution.
pub fn random_vocab(rng: &mut Prng, size: usize, alphabet: usize) -> Vocabulary {
    let mut freq = FrequencyTable::new();
    for _ in 0..size * 2 {
        let v = random_value(rng, alphabet);
        let v = codeanon::reserved::escape(&v).into_owned();
        *freq.entry(v).or_default() += 1 + rng.below(5);
    }
    build_vocabulary(&freq, size)
}

/// The worked example: `my_y = np.sin(my_x) + my_x` as a pre-order
/// traversal.
pub fn worked_example() -> Snippet {
    let n = |t: &str, v: Option<&str>| Node::new(t, v);
    let mut s = Snippet::new(
        "ex1",
        vec![
            n("Module", None),
            n("Assign", None),
            n("NameStore", Some("my_y")),
            n("BinOpAdd", None),
            n("Call", None),
            n("AttributeLoad", None),
            n("NameLoad", Some("np")),
            n("attr", Some("sin")),
            n("NameLoad", Some("my_x")),
            n("NameLoad", Some("my_x")),
        ],
    );
    s.repository = "demo/repo".into();
    s.path = "ex1.py".into();
    s
}

/// Renders worked-example values into the source line they came from.
pub fn render_worked_example(values: &[&str]) -> String {
    assert_eq!(values.len(), 5);
    format!("{} = {}.{}({}) + {}", values[0], values[1], values[2], values[3], values[4])
}

pub fn worked_example_vocab() -> Vocabulary {
    let freq: FrequencyTable = [("np".to_string(), 4u64), ("sin".to_string(), 3)].into_iter().collect();
    build_vocabulary(&freq, 2)
}
