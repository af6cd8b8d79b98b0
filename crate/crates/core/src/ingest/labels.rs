use std::collections::BTreeSet;

use crate::table::{ATTACK, BENIGN};

/// Maps raw label tokens to `0` (benign) or `1` (attack). Any token not in
/// `benign_tokens` counts as an attack.
pub fn binarize_labels<S: AsRef<str>>(raw_labels: &[S], benign_tokens: &BTreeSet<String>) -> Vec<u8> {
    let labels: Vec<u8> = raw_labels
        .iter()
        .map(|t| if benign_tokens.contains(t.as_ref()) { BENIGN } else { ATTACK })
        .collect();
    if let Some(&first) = labels.first() {
        if labels.iter().all(|&l| l == first) {
            log::warn!(
                "all {} labels are {}; downstream stages need both classes",
                labels.len(),
                if first == BENIGN { "benign" } else { "attack" }
            );
        }
    }
    labels
}
