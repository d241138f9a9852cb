//! Random corruption of well-formed documents for crash testing.

use rand::seq::SliceRandom;
use rand::Rng;

const INTERESTING: &[&str] = &[
    "{", "}", "(", ")", ",", "\"", "\\", "#", ".", "\n", " ", "-", "@", "\u{0}", "\u{7f}",
    "policy", "statement", "purpose", "data", "not", "and", "or", "rule", "default",
    "any-statement(", "all-statements(", "policy(has-seal", "within {", "\"\\", "é", "\u{2603}",
];

/// Applies 1 to 4 random edits.
pub fn mutate<R: Rng>(text: &str, rng: &mut R) -> String {
    let mut chars: Vec<char> = text.chars().collect();
    for _ in 0..rng.gen_range(1..=4) {
        let len = chars.len();
        let at = if len == 0 { 0 } else { rng.gen_range(0..=len) };
        match rng.gen_range(0..6) {
            0 if len > 0 => {
                let end = (at + rng.gen_range(1..8)).min(len);
                chars.drain(at.min(len)..end);
            }
            1 => {
                let ins = INTERESTING.choose(rng).expect("non-empty");
                chars.splice(at..at, ins.chars());
            }
            2 if len > 1 => {
                let a = rng.gen_range(0..len);
                let b = rng.gen_range(0..len);
                chars.swap(a, b);
            }
            3 => chars.truncate(at),
            4 if len > 0 => {
                let a = rng.gen_range(0..len);
                let b = (a + rng.gen_range(1..32)).min(len);
                let copy: Vec<char> = chars[a..b].to_vec();
                chars.splice(at..at, copy);
            }
            _ => {
                if len > 0 {
                    let i = rng.gen_range(0..len);
                    chars[i] = char::from(rng.gen_range(0x20u8..0x7f));
                }
            }
        }
    }
    chars.into_iter().collect()
}
