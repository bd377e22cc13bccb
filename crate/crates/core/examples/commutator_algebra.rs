//! Commutator level sets and the lower central series of small
//! unitriangular groups.

use s2fix::group_words::{level_sets, verify_commutator_identities, FiniteGroupOracle};

fn main() {
    let names = ["a", "b"];
    let sets = level_sets(&[0, 1], 2);
    for (i, level) in sets.levels.iter().enumerate() {
        let words: Vec<String> = level.iter().map(|w| w.display_with(&names)).collect();
        println!("S_({i}): {}", words.join(", "));
    }
    for (n, m) in [(3, 3), (4, 2), (3, 5)] {
        let oracle = FiniteGroupOracle::full(n, m).unwrap();
        let series = oracle.lower_central_series().unwrap();
        let report = verify_commutator_identities(&oracle, 0).unwrap();
        println!(
            "UT({n}, Z/{m}): orders {:?}, all identities hold: {}",
            series.orders(),
            report.all_hold()
        );
    }
}
