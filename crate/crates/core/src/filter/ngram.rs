use std::collections::HashSet;

use super::FilterError;

/// Normalized n-gram matching score.
///
/// For every n from 1 to the shorter length, counts the distinct character
/// n-grams the two strings share, sums the counts and divides by the shorter
/// length. The result can exceed 1.
pub fn ngm(udn: &str, sdn: &str) -> Result<f64, FilterError> {
    let (matched, shortest) = ngm_parts(udn, sdn)?;
    Ok(matched as f64 / shortest as f64)
}

/// Numerator and denominator of [`ngm`], kept as integers.
pub fn ngm_parts(udn: &str, sdn: &str) -> Result<(usize, usize), FilterError> {
    if udn.is_empty() || sdn.is_empty() {
        return Err(FilterError::EmptyText);
    }
    let a: Vec<char> = udn.chars().collect();
    let b: Vec<char> = sdn.chars().collect();
    let shortest = a.len().min(b.len());
    let mut matched = 0;
    for n in 1..=shortest {
        let grams: HashSet<&[char]> = a.windows(n).collect();
        let mut seen: HashSet<&[char]> = HashSet::new();
        matched += b
            .windows(n)
            .filter(|g| grams.contains(g) && seen.insert(g))
            .count();
    }
    Ok((matched, shortest))
}
