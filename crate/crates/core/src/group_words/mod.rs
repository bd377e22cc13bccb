//! Free-group words over generator ids, commutator level sets, and an exact
//! finite-group oracle (unitriangular matrices mod m) for checking the
//! generating-set lemmas on concrete nilpotent groups.

mod oracle;

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use oracle::{
    commutator, generate, lower_central_series, verify_commutator_identities, CheckMode,
    CommutatorIdentityReport, FiniteGroupOracle, GroupElement, GroupError, LowerCentralSeries,
    UtMatrix,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Letter {
    pub generator: usize,
    pub inverse: bool,
}

impl Letter {
    pub fn new(generator: usize, inverse: bool) -> Self {
        Letter { generator, inverse }
    }

    pub fn inverted(self) -> Self {
        Letter {
            inverse: !self.inverse,
            ..self
        }
    }
}

/// A freely reduced word. Ordered by length, then lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Word {
    letters: Vec<Letter>,
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.letters
            .len()
            .cmp(&other.letters.len())
            .then_with(|| self.letters.cmp(&other.letters))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Word {
    pub fn identity() -> Self {
        Word::default()
    }

    pub fn generator(id: usize) -> Self {
        Word {
            letters: vec![Letter::new(id, false)],
        }
    }

    pub fn from_letters(letters: impl IntoIterator<Item = Letter>) -> Self {
        free_reduce(letters)
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.is_identity()
    }

    pub fn inverse(&self) -> Word {
        Word {
            letters: self.letters.iter().rev().map(|l| l.inverted()).collect(),
        }
    }

    pub fn concat(&self, other: &Word) -> Word {
        free_reduce(self.letters.iter().chain(&other.letters).copied())
    }

    /// Renders with the given generator names, e.g. `a b A B` style as
    /// `a·b·a⁻¹·b⁻¹`.
    pub fn display_with(&self, names: &[&str]) -> String {
        if self.letters.is_empty() {
            return "e".into();
        }
        self.letters
            .iter()
            .map(|l| {
                let name = names
                    .get(l.generator)
                    .map(|s| s.to_string())
                    .unwrap_or_else(|| format!("g{}", l.generator));
                if l.inverse {
                    format!("{name}⁻¹")
                } else {
                    name
                }
            })
            .collect::<Vec<_>>()
            .join("·")
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display_with(&[]))
    }
}

/// Cancels adjacent `x x⁻¹` pairs until none remain.
pub fn free_reduce(letters: impl IntoIterator<Item = Letter>) -> Word {
    let mut out: Vec<Letter> = Vec::new();
    for l in letters {
        if out.last() == Some(&l.inverted()) {
            out.pop();
        } else {
            out.push(l);
        }
    }
    Word { letters: out }
}

/// `u·v·u⁻¹·v⁻¹`, freely reduced.
pub fn commutator_word(u: &Word, v: &Word) -> Word {
    let ui = u.inverse();
    let vi = v.inverse();
    free_reduce(
        u.letters
            .iter()
            .chain(&v.letters)
            .chain(&ui.letters)
            .chain(&vi.letters)
            .copied(),
    )
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordLevelSets {
    pub levels: Vec<Vec<Word>>,
}

impl WordLevelSets {
    pub fn level(&self, i: usize) -> &[Word] {
        self.levels.get(i).map(|v| v.as_slice()).unwrap_or(&[])
    }
}

/// `S₍₀₎ = S`, `S₍ᵢ₊₁₎ = {[a,b] : a ∈ S, b ∈ S₍ᵢ₎}` for `i < k`. Trivial words
/// are dropped and each level is sorted canonically.
pub fn level_sets(generators: &[usize], k: usize) -> WordLevelSets {
    let mut base: Vec<Word> = generators.iter().map(|&g| Word::generator(g)).collect();
    base.sort();
    base.dedup();
    let mut levels = vec![base.clone()];
    for i in 0..k {
        let mut next: Vec<Word> = base
            .iter()
            .flat_map(|a| levels[i].iter().map(move |b| commutator_word(a, b)))
            .filter(|w| !w.is_identity())
            .collect();
        next.sort();
        next.dedup();
        levels.push(next);
    }
    WordLevelSets { levels }
}

/// `S₍₁₎ ∪ … ∪ S₍ₖ₎`, deduplicated, in canonical order.
pub fn derived_generators(generators: &[usize], k: usize) -> Vec<Word> {
    let sets = level_sets(generators, k);
    let mut out: Vec<Word> = sets.levels.into_iter().skip(1).flatten().collect();
    out.sort();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn l(g: usize, inv: bool) -> Letter {
        Letter::new(g, inv)
    }

    #[test]
    fn reduce_examples() {
        assert!(free_reduce([l(0, false), l(0, true)]).is_identity());
        let w = free_reduce([l(0, false), l(1, false), l(1, true), l(0, false)]);
        assert_eq!(w.letters(), &[l(0, false), l(0, false)]);
        assert_eq!(Word::from_letters(w.letters().to_vec()), w);
    }

    #[test]
    fn commutator_examples() {
        let a = Word::generator(0);
        let b = Word::generator(1);
        assert!(commutator_word(&a, &a).is_identity());
        let ab = commutator_word(&a, &b);
        assert_eq!(ab.display_with(&["a", "b"]), "a·b·a⁻¹·b⁻¹");
        assert!(commutator_word(&a, &Word::identity()).is_identity());
    }

    #[test]
    fn level_set_examples() {
        let a = Word::generator(0);
        let b = Word::generator(1);
        let s = level_sets(&[0, 1], 1);
        assert_eq!(
            s.level(1),
            &[commutator_word(&a, &b), commutator_word(&b, &a)]
        );

        let cyclic = level_sets(&[0], 3);
        assert!((1..=3).all(|i| cyclic.level(i).is_empty()));

        let three = level_sets(&[0, 1, 2], 2);
        assert!(three.level(2).len() <= 3 * three.level(1).len());
    }

    #[test]
    fn derived_generator_examples() {
        let a = Word::generator(0);
        let b = Word::generator(1);
        let ab = commutator_word(&a, &b);
        let ba = commutator_word(&b, &a);
        let mut expected = vec![
            ab.clone(),
            ba.clone(),
            commutator_word(&a, &ab),
            commutator_word(&a, &ba),
            commutator_word(&b, &ab),
            commutator_word(&b, &ba),
        ];
        expected.sort();
        assert_eq!(derived_generators(&[0, 1], 2), expected);
        assert_eq!(
            derived_generators(&[0, 1], 1),
            level_sets(&[0, 1], 1).levels[1]
        );
        assert!(derived_generators(&[4], 3).is_empty());
    }

    fn arb_word() -> impl Strategy<Value = Vec<Letter>> {
        prop::collection::vec((0usize..3, any::<bool>()).prop_map(|(g, i)| l(g, i)), 0..20)
    }

    proptest! {
        #[test]
        fn reduce_is_idempotent(letters in arb_word()) {
            let w = free_reduce(letters.clone());
            prop_assert!(w.len() <= letters.len());
            prop_assert_eq!(free_reduce(w.letters().to_vec()), w.clone());
            prop_assert!(w.letters().windows(2).all(|p| p[0] != p[1].inverted()));
        }

        #[test]
        fn level_sets_are_deterministic(gens in prop::collection::vec(0usize..4, 1..4), k in 0usize..3) {
            let a = level_sets(&gens, k);
            let b = level_sets(&gens, k);
            prop_assert_eq!(&a, &b);
            for lvl in &a.levels {
                prop_assert!(lvl.windows(2).all(|p| p[0] < p[1]));
            }
        }
    }
}
