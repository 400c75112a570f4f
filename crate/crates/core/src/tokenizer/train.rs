use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{spell_word, BpeVocab, TokenizerError, CONTROL_TOKENS, WORD_END};

/// Learns a BPE vocab of at most `target_size` entries (specials included).
///
/// Merge selection is greedy on pair frequency; equal frequencies go to the
/// lexicographically smallest `(left, right)` pair. Learning stops at the
/// target size or when no pair occurs at least twice. Every character seen
/// contributes both its plain and word-final symbol to the base inventory.
pub fn train<'a>(
    texts: impl IntoIterator<Item = &'a str>,
    target_size: usize,
    extra_specials: &[&str],
) -> Result<BpeVocab, TokenizerError> {
    let mut specials: Vec<String> = CONTROL_TOKENS.iter().map(|s| s.to_string()).collect();
    for s in extra_specials {
        if specials.iter().any(|e| e == s) {
            return Err(TokenizerError::InvalidSpecial(s.to_string()));
        }
        specials.push(s.to_string());
    }

    let mut word_counts: BTreeMap<String, usize> = BTreeMap::new();
    for text in texts {
        for segment in split_out_specials(text, &specials) {
            for word in segment.split_whitespace() {
                *word_counts.entry(word.to_string()).or_default() += 1;
            }
        }
    }
    if word_counts.is_empty() {
        return Err(TokenizerError::EmptyCorpus);
    }

    let chars: BTreeSet<char> = word_counts.keys().flat_map(|w| w.chars()).collect();
    let alphabet: Vec<String> = chars
        .iter()
        .flat_map(|c| [c.to_string(), format!("{c}{WORD_END}")])
        .collect();
    let minimum = specials.len() + alphabet.len();
    if target_size <= minimum {
        return Err(TokenizerError::TargetTooSmall {
            target: target_size,
            minimum,
        });
    }

    // Intern symbols so pair counting works on integers.
    let mut symbols: Vec<String> = Vec::new();
    let mut index: HashMap<String, u32> = HashMap::new();
    let mut intern = |s: String, symbols: &mut Vec<String>| -> u32 {
        *index.entry(s.clone()).or_insert_with(|| {
            symbols.push(s);
            (symbols.len() - 1) as u32
        })
    };
    let mut words: Vec<(Vec<u32>, usize)> = word_counts
        .iter()
        .map(|(w, &count)| {
            let spelled = spell_word(w)
                .into_iter()
                .map(|s| intern(s, &mut symbols))
                .collect();
            (spelled, count)
        })
        .collect();

    let mut known: BTreeSet<String> = specials.iter().chain(&alphabet).cloned().collect();
    let mut merges: Vec<(String, String)> = Vec::new();
    while known.len() < target_size {
        let mut pair_counts: HashMap<(u32, u32), usize> = HashMap::new();
        for (syms, count) in &words {
            for w in syms.windows(2) {
                *pair_counts.entry((w[0], w[1])).or_default() += count;
            }
        }
        let best = pair_counts
            .into_iter()
            .filter(|&(_, c)| c >= 2)
            .max_by(|(pa, ca), (pb, cb)| {
                ca.cmp(cb).then_with(|| {
                    let ka = (&symbols[pa.0 as usize], &symbols[pa.1 as usize]);
                    let kb = (&symbols[pb.0 as usize], &symbols[pb.1 as usize]);
                    kb.cmp(&ka)
                })
            });
        let Some(((left, right), _)) = best else {
            break;
        };
        let (ls, rs) = (
            symbols[left as usize].clone(),
            symbols[right as usize].clone(),
        );
        let product = intern(format!("{ls}{rs}"), &mut symbols);
        for (syms, _) in &mut words {
            if syms.len() < 2 {
                continue;
            }
            let mut merged = Vec::with_capacity(syms.len());
            let mut i = 0;
            while i < syms.len() {
                if i + 1 < syms.len() && syms[i] == left && syms[i + 1] == right {
                    merged.push(product);
                    i += 2;
                } else {
                    merged.push(syms[i]);
                    i += 1;
                }
            }
            *syms = merged;
        }
        known.insert(format!("{ls}{rs}"));
        merges.push((ls, rs));
    }

    BpeVocab::from_parts(target_size, specials, alphabet, merges)
}

/// Text fragments between special-token occurrences.
fn split_out_specials<'a>(text: &'a str, specials: &[String]) -> Vec<&'a str> {
    let mut out = Vec::new();
    let mut rest = text;
    loop {
        let hit = specials
            .iter()
            .filter_map(|s| rest.find(s.as_str()).map(|p| (p, s.len())))
            .min_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
        match hit {
            Some((pos, len)) => {
                out.push(&rest[..pos]);
                rest = &rest[pos + len..];
            }
            None => {
                out.push(rest);
                return out;
            }
        }
    }
}
