/// Levenshtein distance over Unicode scalar values. Case-sensitive, unnormalized.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let above = row[j + 1];
            let cost = usize::from(ca != cb);
            row[j + 1] = (above + 1).min(row[j] + 1).min(diag + cost);
            diag = above;
        }
    }
    row[b.len()]
}

/// Early-exit check for `levenshtein(a, b) <= bound`.
pub fn within_edit_distance(a: &str, b: &str, bound: usize) -> bool {
    let (la, lb) = (a.chars().count(), b.chars().count());
    if la.abs_diff(lb) > bound {
        return false;
    }
    levenshtein(a, b) <= bound
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // plain recursive definition, memoized; independent of the row-based version
    fn oracle(a: &[char], b: &[char], memo: &mut std::collections::HashMap<(usize, usize), usize>) -> usize {
        if a.is_empty() {
            return b.len();
        }
        if b.is_empty() {
            return a.len();
        }
        if let Some(&v) = memo.get(&(a.len(), b.len())) {
            return v;
        }
        let sub = oracle(&a[1..], &b[1..], memo) + usize::from(a[0] != b[0]);
        let del = oracle(&a[1..], b, memo) + 1;
        let ins = oracle(a, &b[1..], memo) + 1;
        let v = sub.min(del).min(ins);
        memo.insert((a.len(), b.len()), v);
        v
    }

    fn dist(a: &str, b: &str) -> usize {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        oracle(&a, &b, &mut Default::default())
    }

    #[test]
    fn known_values() {
        assert_eq!(dist("kitten", "sitting"), 3);
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("Smith", "Smyth"), 1);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("abc", ""), 3);
        assert_eq!(levenshtein("Abc", "abc"), 1);
        assert_eq!(levenshtein("naïve", "naive"), 1);
        assert!(within_edit_distance("kitten", "sitting", 3));
        assert!(!within_edit_distance("kitten", "sitting", 2));
    }

    proptest! {
        #[test]
        fn matches_recursive_oracle(a in "[abc]{0,7}", b in "[abc]{0,7}") {
            prop_assert_eq!(levenshtein(&a, &b), dist(&a, &b));
        }

        #[test]
        fn triangle_inequality(a in "[ab ]{0,6}", b in "[ab ]{0,6}", c in "[ab ]{0,6}") {
            prop_assert!(levenshtein(&a, &c) <= levenshtein(&a, &b) + levenshtein(&b, &c));
            prop_assert_eq!(levenshtein(&a, &b), levenshtein(&b, &a));
        }
    }
}
