use super::CdaError;
use crate::disco::NamePair;
use crate::lang::Language;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Unit-cost edit distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NameMatch {
    pub male: String,
    pub female: String,
    pub distance: usize,
}

impl NameMatch {
    /// Fails for a zero-distance self match, which cannot serve as a swap pair.
    pub fn into_name_pair(self, lang: Language) -> Result<NamePair, CdaError> {
        NamePair::new(self.male, self.female, lang).map_err(|e| CdaError::InvalidTermPair(e.to_string()))
    }
}

fn check_unique(names: &[String], side: &'static str) -> Result<(), CdaError> {
    if names.is_empty() {
        return Err(CdaError::EmptyNameList(side));
    }
    let mut seen = BTreeSet::new();
    for n in names {
        if !seen.insert(n) {
            return Err(CdaError::DuplicateName(n.clone()));
        }
    }
    Ok(())
}

/// Repeatedly takes the closest unmatched (male, female) pair by edit distance.
///
/// Ties go to the lexicographically smaller (male, female). Sorting all
/// candidate pairs by that key once and scanning gives the same sequence of
/// picks as re-searching after every removal.
pub fn pair_names_greedy(male_names: &[String], female_names: &[String]) -> Result<Vec<NameMatch>, CdaError> {
    check_unique(male_names, "male")?;
    check_unique(female_names, "female")?;

    let mut candidates: Vec<(usize, &str, &str)> = Vec::with_capacity(male_names.len() * female_names.len());
    for m in male_names {
        for f in female_names {
            candidates.push((levenshtein(m, f), m, f));
        }
    }
    candidates.sort_unstable();

    let target = male_names.len().min(female_names.len());
    let mut used_m = BTreeSet::new();
    let mut used_f = BTreeSet::new();
    let mut out = Vec::with_capacity(target);
    for (distance, m, f) in candidates {
        if out.len() == target {
            break;
        }
        if used_m.contains(m) || used_f.contains(f) {
            continue;
        }
        used_m.insert(m);
        used_f.insert(f);
        out.push(NameMatch {
            male: m.to_string(),
            female: f.to_string(),
            distance,
        });
    }
    Ok(out)
}

/// Reads one name per non-empty line.
pub fn read_name_list(raw: &str) -> Vec<String> {
    raw.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_string).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn names(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    /// Full-matrix DP, independent of the two-row implementation.
    fn reference_distance(a: &str, b: &str) -> usize {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for (i, row) in d.iter_mut().enumerate() {
            row[0] = i;
        }
        for (j, cell) in d[0].iter_mut().enumerate() {
            *cell = j;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let cost = if a[i - 1] == b[j - 1] { 0 } else { 1 };
                d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + cost);
            }
        }
        d[a.len()][b.len()]
    }

    #[test]
    fn known_distances() {
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("Amit", "Amita"), 1);
        assert_eq!(levenshtein("Raj", "Amita"), 5);
        assert_eq!(levenshtein("राज", "राजी"), 1);
    }

    #[test]
    fn pairs_closest_names() {
        let out = pair_names_greedy(&names(&["Amit", "Raj"]), &names(&["Amita", "Raji"])).unwrap();
        let pairs: Vec<_> = out.iter().map(|m| (m.male.as_str(), m.female.as_str(), m.distance)).collect();
        assert_eq!(pairs, vec![("Amit", "Amita", 1), ("Raj", "Raji", 1)]);
    }

    #[test]
    fn identical_names_pair_at_zero() {
        let out = pair_names_greedy(&names(&["X"]), &names(&["X"])).unwrap();
        assert_eq!(out[0].distance, 0);
        assert!(out[0].clone().into_name_pair(Language::En).is_err());
        let out = pair_names_greedy(&names(&["Ana"]), &names(&["Ami", "Ana"])).unwrap();
        assert_eq!((out[0].female.as_str(), out[0].distance), ("Ana", 0));
    }

    #[test]
    fn duplicates_and_empty_lists_error() {
        assert!(matches!(
            pair_names_greedy(&names(&["A", "A"]), &names(&["B"])),
            Err(CdaError::DuplicateName(_))
        ));
        assert!(matches!(pair_names_greedy(&[], &names(&["B"])), Err(CdaError::EmptyNameList("male"))));
    }

    proptest! {
        #[test]
        fn distance_matches_reference(a in "[a-dé]{0,8}", b in "[a-dé]{0,8}") {
            prop_assert_eq!(levenshtein(&a, &b), reference_distance(&a, &b));
            prop_assert_eq!(levenshtein(&a, &b), levenshtein(&b, &a));
        }
    }
}
