//! Text form of patterns used in the output files.
//!
//! Itemsets print as `{1,3,5}` and subsequences as `2->2->7`. A subsequence
//! of length one is just its id.

use spp_core::{Pattern, StructureKind};

pub fn format_pattern(pattern: &Pattern) -> String {
    let ids: Vec<String> = pattern.elements.iter().map(u32::to_string).collect();
    match pattern.kind {
        StructureKind::Itemset => format!("{{{}}}", ids.join(",")),
        StructureKind::Sequence => ids.join("->"),
    }
}

/// Inverse of [`format_pattern`]. Braces select an itemset, anything else is
/// read as a subsequence.
pub fn parse_pattern(text: &str) -> Result<Pattern, String> {
    let text = text.trim();
    let (kind, body, sep) = match text.strip_prefix('{') {
        Some(rest) => {
            let body = rest.strip_suffix('}').ok_or_else(|| format!("unclosed itemset {text:?}"))?;
            (StructureKind::Itemset, body, ",")
        }
        None => (StructureKind::Sequence, text, "->"),
    };
    if body.trim().is_empty() {
        return Err(format!("empty pattern {text:?}"));
    }
    let elements = body
        .split(sep)
        .map(|tok| tok.trim().parse::<u32>().map_err(|_| format!("bad id {tok:?} in {text:?}")))
        .collect::<Result<Vec<u32>, String>>()?;
    if kind == StructureKind::Itemset && elements.windows(2).any(|w| w[0] >= w[1]) {
        return Err(format!("itemset ids must be strictly increasing in {text:?}"));
    }
    Ok(Pattern::new(kind, elements))
}
