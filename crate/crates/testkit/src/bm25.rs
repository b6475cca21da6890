//! Brute-force BM25 over plain token lists.
//!
//! Written without the index: every score is recomputed from scratch by
//! scanning every chunk for every term.

pub const K1: f64 = 1.2;
pub const B: f64 = 0.75;
pub const CHUNK: usize = 512;
pub const OVERLAP: usize = 64;
pub const MIN_TAIL: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleChunk {
    pub doc_id: String,
    pub ordinal: u32,
    pub tokens: Vec<String>,
}

/// Lowercased token with punctuation stripped from both ends.
pub fn normalize(token: &str) -> Option<String> {
    let chars: Vec<char> = token.chars().collect();
    let start = chars.iter().position(|c| c.is_alphanumeric())?;
    let end = chars.iter().rposition(|c| c.is_alphanumeric())?;
    Some(chars[start..=end].iter().collect::<String>().to_lowercase())
}

/// Windows of `CHUNK` tokens advancing by `CHUNK - OVERLAP`. A last window
/// that adds fewer than `MIN_TAIL` unseen tokens is folded into the one
/// before it.
pub fn chunk_tokens(doc_id: &str, text: &str) -> Vec<OracleChunk> {
    let toks: Vec<&str> = text.split_whitespace().collect();
    let mut windows: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + CHUNK).min(toks.len());
        if end <= start {
            break;
        }
        match windows.last_mut() {
            Some(prev) if end - prev.1 < MIN_TAIL => prev.1 = end,
            _ => windows.push((start, end)),
        }
        if end == toks.len() {
            break;
        }
        start += CHUNK - OVERLAP;
    }
    windows
        .into_iter()
        .enumerate()
        .map(|(i, (s, e))| OracleChunk {
            doc_id: doc_id.to_owned(),
            ordinal: i as u32,
            tokens: toks[s..e].iter().map(|t| (*t).to_owned()).collect(),
        })
        .collect()
}

/// `(doc_id, ordinal, score)` for every chunk, best first, ties by
/// `(doc_id, ordinal)`.
pub fn rank(chunks: &[OracleChunk], query: &str) -> Vec<(String, u32, f64)> {
    let n = chunks.len() as f64;
    if chunks.is_empty() {
        return Vec::new();
    }
    let avgdl = chunks.iter().map(|c| c.tokens.len()).sum::<usize>() as f64 / n;
    let normalized: Vec<Vec<String>> =
        chunks.iter().map(|c| c.tokens.iter().filter_map(|t| normalize(t)).collect()).collect();

    let mut terms: Vec<String> = query.split_whitespace().filter_map(normalize).collect();
    terms.sort();
    terms.dedup();

    let mut out: Vec<(String, u32, f64)> = chunks
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let dl = c.tokens.len() as f64;
            let mut score = 0.0;
            for term in &terms {
                let df = normalized.iter().filter(|toks| toks.contains(term)).count() as f64;
                if df == 0.0 {
                    continue;
                }
                let tf = normalized[i].iter().filter(|t| *t == term).count() as f64;
                if tf == 0.0 {
                    continue;
                }
                let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
                score += idf * tf * (K1 + 1.0) / (tf + K1 * (1.0 - B + B * dl / avgdl));
            }
            (c.doc_id.clone(), c.ordinal, score)
        })
        .collect();
    out.sort_by(|a, b| b.2.total_cmp(&a.2).then_with(|| a.0.cmp(&b.0)).then_with(|| a.1.cmp(&b.1)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunking_arithmetic() {
        let text: String = (0..1200).map(|i| format!("t{i} ")).collect();
        let chunks = chunk_tokens("d", &text);
        assert_eq!(chunks.len(), 3);
        assert_eq!(chunks[2].tokens[0], "t896");
        let short: String = (0..100).map(|i| format!("t{i} ")).collect();
        assert_eq!(chunk_tokens("d", &short).len(), 1);
    }

    #[test]
    fn rare_term_wins() {
        let chunks = vec![
            OracleChunk { doc_id: "a".into(), ordinal: 0, tokens: vec!["x".into(), "y".into()] },
            OracleChunk { doc_id: "b".into(), ordinal: 0, tokens: vec!["zebra".into(), "y".into()] },
            OracleChunk { doc_id: "c".into(), ordinal: 0, tokens: vec!["x".into()] },
        ];
        let r = rank(&chunks, "Zebra!");
        assert_eq!(r[0].0, "b");
        assert!(r[0].2 > 0.0 && r[1].2 == 0.0);
    }
}
