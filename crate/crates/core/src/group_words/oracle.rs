use std::collections::HashSet;
use std::hash::Hash;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{derived_generators, level_sets, Word};

const MAX_ORDER: u64 = 1_000_000;
const MAX_DIM: usize = 6;
const MAX_EXHAUSTIVE: u64 = 50_000_000;
const SAMPLED_CHECKS: usize = 200_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroupError {
    #[error("group is not nilpotent: lower central series stabilizes at order {order}")]
    NotNilpotent { order: usize },
    #[error("invalid oracle: {0}")]
    InvalidOracle(String),
    #[error("word uses generator #{0}, oracle has fewer generators")]
    UnknownGenerator(usize),
}

pub trait GroupElement: Clone + Eq + Hash + Ord {
    fn mul(&self, other: &Self) -> Self;
    fn inv(&self) -> Self;
}

/// `a b a⁻¹ b⁻¹`.
pub fn commutator<E: GroupElement>(a: &E, b: &E) -> E {
    a.mul(b).mul(&a.inv()).mul(&b.inv())
}

/// Subgroup generated by `gens`, sorted. Breadth-first closure under right
/// multiplication by generators and their inverses.
pub fn generate<E: GroupElement>(identity: &E, gens: &[E]) -> Vec<E> {
    let mut steps: Vec<E> = gens.iter().flat_map(|g| [g.clone(), g.inv()]).collect();
    steps.sort();
    steps.dedup();
    let mut seen: HashSet<E> = HashSet::from([identity.clone()]);
    let mut frontier = vec![identity.clone()];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for x in &frontier {
            for s in &steps {
                let y = x.mul(s);
                if seen.insert(y.clone()) {
                    next.push(y);
                }
            }
        }
        frontier = next;
    }
    let mut out: Vec<E> = seen.into_iter().collect();
    out.sort();
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct LowerCentralSeries<E> {
    /// `G₍₀₎ ⊇ G₍₁₎ ⊇ … ⊇ G₍ₗ₎ = {e}`, each sorted.
    pub chain: Vec<Vec<E>>,
    /// First `L ≥ 1` with `G₍ₗ₎` trivial.
    pub nilpotency_length: usize,
}

impl<E> LowerCentralSeries<E> {
    pub fn orders(&self) -> Vec<usize> {
        self.chain.iter().map(Vec::len).collect()
    }
}

/// `G₍ᵢ₊₁₎ = ⟨[f, h] : f ∈ G, h ∈ G₍ᵢ₎⟩` until trivial.
pub fn lower_central_series<E: GroupElement>(
    identity: &E,
    group: &[E],
) -> Result<LowerCentralSeries<E>, GroupError> {
    let mut chain = vec![group.to_vec()];
    loop {
        let last = chain.last().unwrap();
        let mut comms: Vec<E> = group
            .iter()
            .flat_map(|f| last.iter().map(move |h| commutator(f, h)))
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        comms.sort();
        let next = generate(identity, &comms);
        if next.len() > 1 && next.len() == last.len() {
            return Err(GroupError::NotNilpotent { order: next.len() });
        }
        let done = next.len() == 1;
        chain.push(next);
        if done {
            break;
        }
    }
    let nilpotency_length = chain.len() - 1;
    Ok(LowerCentralSeries {
        chain,
        nilpotency_length,
    })
}

/// Upper unitriangular `n × n` matrix over `ℤ/m`; only the strictly upper
/// entries are stored.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UtMatrix {
    n: u8,
    m: u32,
    upper: [u32; MAX_DIM * (MAX_DIM - 1) / 2],
}

fn idx(n: usize, i: usize, j: usize) -> usize {
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

impl UtMatrix {
    pub fn identity(n: usize, m: u32) -> Self {
        UtMatrix {
            n: n as u8,
            m,
            upper: [0; MAX_DIM * (MAX_DIM - 1) / 2],
        }
    }

    /// `I + E_ij` (0-based, `i < j`).
    pub fn transvection(n: usize, m: u32, i: usize, j: usize) -> Result<Self, GroupError> {
        if i >= j || j >= n {
            return Err(GroupError::InvalidOracle(format!(
                "transvection needs 0 ≤ i < j < n (got i={i}, j={j}, n={n})"
            )));
        }
        let mut t = UtMatrix::identity(n, m);
        t.upper[idx(n, i, j)] = 1 % m;
        Ok(t)
    }

    /// From full rows; the diagonal must be 1 and the lower part 0 (mod m).
    pub fn from_rows(rows: &[Vec<i64>], m: u32) -> Result<Self, GroupError> {
        let n = rows.len();
        if n == 0 || n > MAX_DIM || rows.iter().any(|r| r.len() != n) {
            return Err(GroupError::InvalidOracle(format!(
                "matrix must be square with 1..={MAX_DIM} rows"
            )));
        }
        let md = i64::from(m);
        let mut t = UtMatrix::identity(n, m);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let r = v.rem_euclid(md);
                let expected = if i == j { 1 % md } else { 0 };
                if i >= j && r != expected {
                    return Err(GroupError::InvalidOracle(format!(
                        "entry ({i},{j}) = {v} breaks unitriangularity"
                    )));
                }
                if i < j {
                    t.upper[idx(n, i, j)] = r as u32;
                }
            }
        }
        Ok(t)
    }

    pub fn n(&self) -> usize {
        self.n as usize
    }

    pub fn modulus(&self) -> u32 {
        self.m
    }

    pub fn entry(&self, i: usize, j: usize) -> u32 {
        let n = self.n();
        match i.cmp(&j) {
            std::cmp::Ordering::Less => self.upper[idx(n, i, j)],
            std::cmp::Ordering::Equal => 1 % self.m,
            std::cmp::Ordering::Greater => 0,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.upper.iter().all(|&v| v == 0)
    }
}

impl GroupElement for UtMatrix {
    fn mul(&self, other: &Self) -> Self {
        let n = self.n();
        let m = u64::from(self.m);
        let mut out = UtMatrix::identity(n, self.m);
        for i in 0..n {
            for j in i + 1..n {
                let mut s =
                    u64::from(self.upper[idx(n, i, j)]) + u64::from(other.upper[idx(n, i, j)]);
                for k in i + 1..j {
                    s += u64::from(self.upper[idx(n, i, k)]) * u64::from(other.upper[idx(n, k, j)]);
                }
                out.upper[idx(n, i, j)] = (s % m) as u32;
            }
        }
        out
    }

    /// Back substitution for `A·X = I`, column by column from the diagonal.
    fn inv(&self) -> Self {
        let n = self.n();
        let m = u64::from(self.m);
        let mut out = UtMatrix::identity(n, self.m);
        for j in 0..n {
            for i in (0..j).rev() {
                // x_ij = −(a_ij + Σ_{i<k<j} a_ik x_kj)
                let mut s = u64::from(self.upper[idx(n, i, j)]);
                for k in i + 1..j {
                    s += u64::from(self.upper[idx(n, i, k)]) * u64::from(out.upper[idx(n, k, j)]);
                }
                out.upper[idx(n, i, j)] = ((m - s % m) % m) as u32;
            }
        }
        out
    }
}

/// The subgroup of `UT(n, ℤ/m)` generated by a fixed list of matrices.
#[derive(Clone, Debug)]
pub struct FiniteGroupOracle {
    n: usize,
    m: u32,
    generators: Vec<UtMatrix>,
    elements: Vec<UtMatrix>,
}

impl FiniteGroupOracle {
    /// Requires `m^(n(n−1)/2) ≤ 10⁶` so that enumeration stays cheap.
    pub fn new(n: usize, m: u32, generators: Vec<UtMatrix>) -> Result<Self, GroupError> {
        if n == 0 || n > MAX_DIM || m < 2 {
            return Err(GroupError::InvalidOracle(format!(
                "need 1 ≤ n ≤ {MAX_DIM} and m ≥ 2 (got n={n}, m={m})"
            )));
        }
        let dims = (n * (n - 1) / 2) as u32;
        let ambient = u64::from(m).checked_pow(dims);
        if ambient.is_none_or(|o| o > MAX_ORDER) {
            return Err(GroupError::InvalidOracle(format!(
                "UT({n}, Z/{m}) has more than {MAX_ORDER} elements"
            )));
        }
        if let Some(g) = generators.iter().find(|g| g.n() != n || g.modulus() != m) {
            return Err(GroupError::InvalidOracle(format!(
                "generator of size {} mod {} does not belong to UT({n}, Z/{m})",
                g.n(),
                g.modulus()
            )));
        }
        let elements = generate(&UtMatrix::identity(n, m), &generators);
        Ok(FiniteGroupOracle {
            n,
            m,
            generators,
            elements,
        })
    }

    /// Generated by the superdiagonal transvections `e₁₂, e₂₃, …`, i.e. all
    /// of `UT(n, ℤ/m)`.
    pub fn full(n: usize, m: u32) -> Result<Self, GroupError> {
        let gens = (0..n.saturating_sub(1))
            .map(|i| UtMatrix::transvection(n, m, i, i + 1))
            .collect::<Result<Vec<_>, _>>()?;
        FiniteGroupOracle::new(n, m, gens)
    }

    pub fn degree(&self) -> usize {
        self.n
    }
    pub fn modulus(&self) -> u32 {
        self.m
    }
    pub fn generators(&self) -> &[UtMatrix] {
        &self.generators
    }
    pub fn elements(&self) -> &[UtMatrix] {
        &self.elements
    }
    pub fn identity(&self) -> UtMatrix {
        UtMatrix::identity(self.n, self.m)
    }

    pub fn generate(&self, gens: &[UtMatrix]) -> Vec<UtMatrix> {
        generate(&self.identity(), gens)
    }

    pub fn lower_central_series(&self) -> Result<LowerCentralSeries<UtMatrix>, GroupError> {
        lower_central_series(&self.identity(), &self.elements)
    }

    /// Product of the letters, leftmost factor on the left.
    pub fn evaluate(&self, w: &Word) -> Result<UtMatrix, GroupError> {
        w.letters().iter().try_fold(self.identity(), |acc, l| {
            let g = self
                .generators
                .get(l.generator)
                .ok_or(GroupError::UnknownGenerator(l.generator))?;
            Ok(acc.mul(&if l.inverse { g.inv() } else { g.clone() }))
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckMode {
    Exhaustive,
    Sampled,
    Vacuous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommutatorIdentityReport {
    pub nilpotency_length: usize,
    pub chain_orders: Vec<usize>,
    /// `[f, h₁h₂] = [f, h₁][f, h₂]` and `[f₁f₂, h] = [f₁, h][f₂, h]` for
    /// `h, h₁, h₂ ∈ G₍ₗ₋₂₎` (needs `L ≥ 2`).
    pub commutator_bilinearity: bool,
    pub bilinearity_mode: CheckMode,
    /// `G₍ₗ₋₁₎ = ⟨S₍ₗ₋₁₎⟩`.
    pub last_term_generated: bool,
    /// `G₍₁₎ = ⟨S₍₁₎, …, S₍ₗ₎⟩`.
    pub derived_subgroup_generated: bool,
}

impl CommutatorIdentityReport {
    pub fn all_hold(&self) -> bool {
        self.commutator_bilinearity && self.last_term_generated && self.derived_subgroup_generated
    }
}

fn bilinearity_holds(group: &[UtMatrix], h_set: &[UtMatrix], seed: u64) -> (bool, CheckMode) {
    let g = group.len() as u64;
    let h = h_set.len() as u64;
    let first = |f: &UtMatrix, h1: &UtMatrix, h2: &UtMatrix| {
        commutator(f, &h1.mul(h2)) == commutator(f, h1).mul(&commutator(f, h2))
    };
    let second = |f1: &UtMatrix, f2: &UtMatrix, h: &UtMatrix| {
        commutator(&f1.mul(f2), h) == commutator(f1, h).mul(&commutator(f2, h))
    };
    if g * h * h + g * g * h <= MAX_EXHAUSTIVE {
        let ok = group.iter().all(|f| {
            h_set
                .iter()
                .all(|h1| h_set.iter().all(|h2| first(f, h1, h2)))
        }) && group.iter().all(|f1| {
            group
                .iter()
                .all(|f2| h_set.iter().all(|hh| second(f1, f2, hh)))
        });
        return (ok, CheckMode::Exhaustive);
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let pick =
        |rng: &mut rand_chacha::ChaCha8Rng, s: &[UtMatrix]| s[rng.gen_range(0..s.len())].clone();
    let ok = (0..SAMPLED_CHECKS).all(|_| {
        let f = pick(&mut rng, group);
        let f2 = pick(&mut rng, group);
        let h1 = pick(&mut rng, h_set);
        let h2 = pick(&mut rng, h_set);
        first(&f, &h1, &h2) && second(&f, &f2, &h1)
    });
    (ok, CheckMode::Sampled)
}

/// Checks the generating-set identities on the oracle's group with its own
/// generators as `S`. Large instances fall back to seeded random sampling
/// for the bilinearity identities.
pub fn verify_commutator_identities(
    oracle: &FiniteGroupOracle,
    seed: u64,
) -> Result<CommutatorIdentityReport, GroupError> {
    let series = oracle.lower_central_series()?;
    let len = series.nilpotency_length;
    let ids: Vec<usize> = (0..oracle.generators().len()).collect();

    let (commutator_bilinearity, bilinearity_mode) = if len >= 2 {
        bilinearity_holds(oracle.elements(), &series.chain[len - 2], seed)
    } else {
        (true, CheckMode::Vacuous)
    };

    let eval_all = |words: &[Word]| -> Result<Vec<UtMatrix>, GroupError> {
        words.iter().map(|w| oracle.evaluate(w)).collect()
    };
    let sets = level_sets(&ids, len);
    let last = oracle.generate(&eval_all(sets.level(len - 1))?);
    let last_term_generated = last == series.chain[len - 1];

    let derived = oracle.generate(&eval_all(&derived_generators(&ids, len))?);
    let derived_subgroup_generated = derived == series.chain[1];

    Ok(CommutatorIdentityReport {
        nilpotency_length: len,
        chain_orders: series.orders(),
        commutator_bilinearity,
        bilinearity_mode,
        last_term_generated,
        derived_subgroup_generated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group_words::commutator_word;

    /// Permutations of {0..n}; used only to exercise non-nilpotent groups.
    #[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
    struct Perm(Vec<u8>);

    impl GroupElement for Perm {
        fn mul(&self, other: &Self) -> Self {
            // (self ∘ other)(i) = self(other(i))
            Perm(other.0.iter().map(|&i| self.0[i as usize]).collect())
        }
        fn inv(&self) -> Self {
            let mut out = vec![0; self.0.len()];
            for (i, &p) in self.0.iter().enumerate() {
                out[p as usize] = i as u8;
            }
            Perm(out)
        }
    }

    fn brute_force_ut_order(n: usize, m: u32) -> usize {
        // Enumerate all unitriangular matrices and close by brute force products
        // of pairs to confirm that the set is closed; returns the set size.
        let dims = n * (n - 1) / 2;
        let total = (m as usize).pow(dims as u32);
        let mut all = Vec::with_capacity(total);
        for code in 0..total {
            let mut t = UtMatrix::identity(n, m);
            let mut c = code;
            for slot in 0..dims {
                t.upper[slot] = (c % m as usize) as u32;
                c /= m as usize;
            }
            all.push(t);
        }
        let set: HashSet<_> = all.iter().cloned().collect();
        assert!(all
            .iter()
            .all(|a| all.iter().take(20).all(|b| set.contains(&a.mul(b)))));
        set.len()
    }

    #[test]
    fn inverse_and_product() {
        let o = FiniteGroupOracle::full(4, 3).unwrap();
        let id = o.identity();
        for a in o.elements().iter().step_by(37) {
            assert_eq!(a.mul(&a.inv()), id);
            assert_eq!(a.inv().mul(a), id);
        }
    }

    #[test]
    fn generate_examples() {
        let id = UtMatrix::identity(3, 3);
        assert_eq!(generate(&id, std::slice::from_ref(&id)), vec![id.clone()]);
        assert_eq!(
            FiniteGroupOracle::full(3, 3).unwrap().elements().len(),
            brute_force_ut_order(3, 3)
        );
        assert_eq!(FiniteGroupOracle::full(4, 2).unwrap().elements().len(), 64);
    }

    #[test]
    fn lower_central_series_examples() {
        let s = FiniteGroupOracle::full(3, 3)
            .unwrap()
            .lower_central_series()
            .unwrap();
        assert_eq!(s.orders(), vec![27, 3, 1]);
        assert_eq!(s.nilpotency_length, 2);
        let s = FiniteGroupOracle::full(4, 2)
            .unwrap()
            .lower_central_series()
            .unwrap();
        assert_eq!(s.nilpotency_length, 3);
        assert_eq!(s.orders(), vec![64, 8, 2, 1]);
        let s = FiniteGroupOracle::full(2, 5)
            .unwrap()
            .lower_central_series()
            .unwrap();
        assert_eq!(s.orders(), vec![5, 1]);
        assert_eq!(s.nilpotency_length, 1);
    }

    #[test]
    fn symmetric_group_is_not_nilpotent() {
        let id = Perm(vec![0, 1, 2]);
        let s3 = generate(&id, &[Perm(vec![1, 0, 2]), Perm(vec![1, 2, 0])]);
        assert_eq!(s3.len(), 6);
        assert_eq!(
            lower_central_series(&id, &s3).unwrap_err(),
            GroupError::NotNilpotent { order: 3 }
        );
    }

    #[test]
    fn commutator_identity_examples() {
        for (n, m) in [(3, 3), (3, 5), (4, 2)] {
            let o = FiniteGroupOracle::full(n, m).unwrap();
            let r = verify_commutator_identities(&o, 0).unwrap();
            assert!(r.all_hold(), "UT({n},{m}): {r:?}");
            assert_eq!(r.bilinearity_mode, CheckMode::Exhaustive);
        }
        let abelian = FiniteGroupOracle::full(2, 5).unwrap();
        let r = verify_commutator_identities(&abelian, 0).unwrap();
        assert!(r.all_hold());
        assert_eq!(r.bilinearity_mode, CheckMode::Vacuous);
        assert_eq!(r.chain_orders, vec![5, 1]);
    }

    #[test]
    fn bilinearity_fails_one_level_too_high() {
        // h ranging over all of G in a length-3 group breaks the identity, so
        // the check above is not vacuous.
        let o = FiniteGroupOracle::full(4, 2).unwrap();
        let (ok, _) = bilinearity_holds(o.elements(), o.elements(), 0);
        assert!(!ok);
    }

    #[test]
    fn word_level_bilinearity_mirror() {
        // In UT(4, Z/2) (length 3), h ∈ G₍₁₎: realize h₁, h₂ as level-1 words.
        let o = FiniteGroupOracle::full(4, 2).unwrap();
        let sets = level_sets(&[0, 1, 2], 1);
        let hs = sets.level(1);
        for f in sets.level(0) {
            for h1 in hs {
                for h2 in hs {
                    let lhs = commutator_word(f, &h1.concat(h2));
                    let rhs = commutator_word(f, h1).concat(&commutator_word(f, h2));
                    assert_eq!(o.evaluate(&lhs).unwrap(), o.evaluate(&rhs).unwrap());
                }
            }
        }
    }

    #[test]
    fn oracle_validation() {
        assert!(FiniteGroupOracle::full(4, 11).is_err());
        assert!(UtMatrix::transvection(3, 3, 2, 1).is_err());
        assert!(UtMatrix::from_rows(&[vec![1, 2], vec![1, 1]], 3).is_err());
        let t = UtMatrix::from_rows(&[vec![1, -1], vec![0, 1]], 3).unwrap();
        assert_eq!(t.entry(0, 1), 2);
        let o = FiniteGroupOracle::full(3, 3).unwrap();
        assert_eq!(
            o.evaluate(&Word::generator(7)).unwrap_err(),
            GroupError::UnknownGenerator(7)
        );
    }
}
