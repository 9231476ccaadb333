use crate::model::{AxisAnnotation, AxisWord};

/// Axis words two names have in common and the ones each has alone.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AxisComparison {
    pub shared: Vec<(AxisWord, AxisWord)>,
    pub only_in_a: Vec<AxisWord>,
    pub only_in_b: Vec<AxisWord>,
}

impl AxisComparison {
    /// The differing pair when each side has exactly one unshared axis word.
    pub fn single_difference(&self) -> Option<(&AxisWord, &AxisWord)> {
        match (self.only_in_a.as_slice(), self.only_in_b.as_slice()) {
            ([a], [b]) => Some((a, b)),
            _ => None,
        }
    }
}

/// Multiset intersection on (surface, type). Earlier occurrences are matched
/// first; both remainders keep their original order.
pub fn compare_axes(a: &AxisAnnotation, b: &AxisAnnotation) -> AxisComparison {
    let mut taken = vec![false; b.axes().len()];
    let mut cmp = AxisComparison::default();
    for wa in a.axes() {
        let hit = b
            .axes()
            .iter()
            .enumerate()
            .find(|(j, wb)| !taken[*j] && wb.key() == wa.key());
        match hit {
            Some((j, wb)) => {
                taken[j] = true;
                cmp.shared.push((wa.clone(), wb.clone()));
            }
            None => cmp.only_in_a.push(wa.clone()),
        }
    }
    cmp.only_in_b = b
        .axes()
        .iter()
        .zip(&taken)
        .filter(|(_, &t)| !t)
        .map(|(w, _)| w.clone())
        .collect();
    cmp
}
