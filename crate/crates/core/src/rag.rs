//! Chunking, BM25 retrieval and context fusion over a hybrid corpus.
//!
//! Curated documents are visible to every support request; uploaded
//! documents only to the support they were uploaded under. Collection
//! statistics (chunk count, average length, document frequency) are taken
//! over the chunks visible to the querying scope.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{ChunkId, DocId, SupportId};

pub const CHUNK_TOKENS: usize = 512;
pub const CHUNK_OVERLAP: usize = 64;
pub const CHUNK_STRIDE: usize = CHUNK_TOKENS - CHUNK_OVERLAP;
/// A trailing chunk adding fewer new tokens than this is merged into the
/// previous chunk.
pub const MIN_TAIL_TOKENS: usize = 32;

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SourceKind {
    Curated,
    UserUploaded,
}

/// Where a document lives and who can see it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DocumentSource {
    Curated,
    Uploaded(SupportId),
}

impl DocumentSource {
    pub fn kind(&self) -> SourceKind {
        match self {
            DocumentSource::Curated => SourceKind::Curated,
            DocumentSource::Uploaded(_) => SourceKind::UserUploaded,
        }
    }

    fn visible_to(&self, scope: Option<&SupportId>) -> bool {
        match self {
            DocumentSource::Curated => true,
            DocumentSource::Uploaded(owner) => scope == Some(owner),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentChunk {
    pub chunk_id: ChunkId,
    pub doc_id: DocId,
    pub source_kind: SourceKind,
    pub ordinal: u32,
    pub tokens: Vec<String>,
    pub token_count: usize,
    pub term_frequencies: BTreeMap<String, u32>,
}

impl DocumentChunk {
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn citation(&self) -> String {
        format!("[source: {}#{}]", self.doc_id, self.ordinal)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub chunk_id: ChunkId,
    pub doc_id: DocId,
    pub ordinal: u32,
    pub score: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RagError {
    #[error("document `{0}` has no text")]
    EmptyDocument(DocId),
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_owned).collect()
}

/// Index term for a token: lowercased with surrounding punctuation removed.
pub fn index_term(token: &str) -> Option<String> {
    let t = token.trim_matches(|c: char| !c.is_alphanumeric());
    (!t.is_empty()).then(|| t.to_lowercase())
}

/// Token ranges `[start, end)` of each chunk of an `n`-token document.
pub fn chunk_spans(n: usize) -> Vec<(usize, usize)> {
    let mut spans: Vec<(usize, usize)> = Vec::new();
    if n == 0 {
        return spans;
    }
    let mut start = 0;
    loop {
        let end = (start + CHUNK_TOKENS).min(n);
        match spans.last_mut() {
            Some(prev) if end - prev.1 < MIN_TAIL_TOKENS && end == n => prev.1 = n,
            _ => spans.push((start, end)),
        }
        if end == n {
            return spans;
        }
        start += CHUNK_STRIDE;
    }
}

pub fn chunk_document(doc_id: &DocId, raw_text: &str, source: &DocumentSource) -> Result<Vec<DocumentChunk>, RagError> {
    let tokens = tokenize(raw_text);
    if tokens.is_empty() {
        return Err(RagError::EmptyDocument(doc_id.clone()));
    }
    Ok(chunk_spans(tokens.len())
        .into_iter()
        .enumerate()
        .map(|(ordinal, (start, end))| {
            let toks = tokens[start..end].to_vec();
            let mut tf = BTreeMap::new();
            for term in toks.iter().filter_map(|t| index_term(t)) {
                *tf.entry(term).or_insert(0) += 1;
            }
            DocumentChunk {
                chunk_id: ChunkId::new(format!("{doc_id}#{ordinal}")),
                doc_id: doc_id.clone(),
                source_kind: source.kind(),
                ordinal: ordinal as u32,
                token_count: toks.len(),
                tokens: toks,
                term_frequencies: tf,
            }
        })
        .collect())
}

#[derive(Debug, Clone)]
struct IndexedDoc {
    source: DocumentSource,
    chunks: Vec<DocumentChunk>,
}

#[derive(Debug, Clone, Copy)]
struct Posting {
    ordinal: u32,
    tf: u32,
}

/// Inverted index over all ingested documents.
#[derive(Debug, Clone, Default)]
pub struct CorpusIndex {
    docs: BTreeMap<DocId, IndexedDoc>,
    postings: HashMap<String, BTreeMap<DocId, Vec<Posting>>>,
}

impl CorpusIndex {
    pub fn new() -> Self {
        Self::default()
    }

    /// Chunks and indexes a document, replacing any earlier version stored
    /// under the same id. On error the index is left as it was.
    pub fn ingest_document(
        &mut self,
        doc_id: &DocId,
        raw_text: &str,
        source: DocumentSource,
    ) -> Result<&[DocumentChunk], RagError> {
        let chunks = chunk_document(doc_id, raw_text, &source)?;
        self.remove_document(doc_id);
        for chunk in &chunks {
            for (term, &tf) in &chunk.term_frequencies {
                self.postings
                    .entry(term.clone())
                    .or_default()
                    .entry(doc_id.clone())
                    .or_default()
                    .push(Posting { ordinal: chunk.ordinal, tf });
            }
        }
        let entry = self.docs.entry(doc_id.clone()).or_insert(IndexedDoc { source, chunks: Vec::new() });
        entry.chunks = chunks;
        Ok(&entry.chunks)
    }

    pub fn remove_document(&mut self, doc_id: &DocId) -> bool {
        let Some(old) = self.docs.remove(doc_id) else {
            return false;
        };
        for chunk in &old.chunks {
            for term in chunk.term_frequencies.keys() {
                if let Some(by_doc) = self.postings.get_mut(term) {
                    by_doc.remove(doc_id);
                    if by_doc.is_empty() {
                        self.postings.remove(term);
                    }
                }
            }
        }
        true
    }

    pub fn chunk_count(&self) -> usize {
        self.docs.values().map(|d| d.chunks.len()).sum()
    }

    pub fn document_count(&self) -> usize {
        self.docs.len()
    }

    pub fn contains(&self, doc_id: &DocId) -> bool {
        self.docs.contains_key(doc_id)
    }

    pub fn chunks(&self, doc_id: &DocId) -> Option<&[DocumentChunk]> {
        self.docs.get(doc_id).map(|d| d.chunks.as_slice())
    }

    pub fn chunk(&self, doc_id: &DocId, ordinal: u32) -> Option<&DocumentChunk> {
        self.docs.get(doc_id)?.chunks.get(ordinal as usize)
    }

    pub fn source_of(&self, doc_id: &DocId) -> Option<&DocumentSource> {
        self.docs.get(doc_id).map(|d| &d.source)
    }

    fn visible_docs<'a>(&'a self, scope: Option<&'a SupportId>) -> impl Iterator<Item = (&'a DocId, &'a IndexedDoc)> + 'a {
        self.docs.iter().filter(move |(_, d)| d.source.visible_to(scope))
    }

    /// Top `k` visible chunks by BM25 score, ties broken by
    /// `(doc_id, ordinal)`. Chunks without any query term score zero and are
    /// still eligible, so `k` larger than the visible set returns all of it.
    pub fn retrieve(&self, query: &str, k: usize, scope: Option<&SupportId>) -> Vec<RetrievalResult> {
        let (n_chunks, total_len) = self
            .visible_docs(scope)
            .flat_map(|(_, d)| d.chunks.iter())
            .fold((0usize, 0usize), |(n, len), c| (n + 1, len + c.token_count));
        if n_chunks == 0 || k == 0 {
            return Vec::new();
        }
        let avgdl = total_len as f64 / n_chunks as f64;

        let mut terms: Vec<String> = tokenize(query).iter().filter_map(|t| index_term(t)).collect();
        terms.sort();
        terms.dedup();

        let mut scores: HashMap<(&DocId, u32), f64> = HashMap::new();
        for term in &terms {
            let Some(by_doc) = self.postings.get(term) else { continue };
            let visible: Vec<(&DocId, &Vec<Posting>)> = by_doc
                .iter()
                .filter(|(doc, _)| self.docs[*doc].source.visible_to(scope))
                .collect();
            let df: usize = visible.iter().map(|(_, p)| p.len()).sum();
            if df == 0 {
                continue;
            }
            let idf = (1.0 + (n_chunks as f64 - df as f64 + 0.5) / (df as f64 + 0.5)).ln();
            for (doc, postings) in visible {
                let chunks = &self.docs[doc].chunks;
                for p in postings {
                    let dl = chunks[p.ordinal as usize].token_count as f64;
                    let tf = f64::from(p.tf);
                    let norm = BM25_K1 * (1.0 - BM25_B + BM25_B * dl / avgdl);
                    *scores.entry((doc, p.ordinal)).or_insert(0.0) += idf * tf * (BM25_K1 + 1.0) / (tf + norm);
                }
            }
        }

        let mut ranked: Vec<(&DocumentChunk, f64)> = self
            .visible_docs(scope)
            .flat_map(|(doc, d)| d.chunks.iter().map(move |c| (doc, c)))
            .map(|(doc, c)| (c, scores.get(&(doc, c.ordinal)).copied().unwrap_or(0.0)))
            .collect();
        ranked.sort_by(|(a, sa), (b, sb)| {
            sb.total_cmp(sa)
                .then_with(|| a.doc_id.cmp(&b.doc_id))
                .then_with(|| a.ordinal.cmp(&b.ordinal))
        });
        ranked
            .into_iter()
            .take(k)
            .enumerate()
            .map(|(i, (c, score))| RetrievalResult {
                chunk_id: c.chunk_id.clone(),
                doc_id: c.doc_id.clone(),
                ordinal: c.ordinal,
                score,
                rank: i + 1,
            })
            .collect()
    }

    /// Concatenates whole chunks in rank order, each under its citation
    /// line, stopping at the first chunk that would push the output past
    /// `budget_tokens` whitespace tokens.
    pub fn fuse_context(&self, results: &[RetrievalResult], budget_tokens: usize) -> String {
        let mut ordered: Vec<&RetrievalResult> = results.iter().collect();
        ordered.sort_by_key(|r| r.rank);
        let mut used = 0;
        let mut blocks = Vec::new();
        for r in ordered {
            let Some(chunk) = self.chunk(&r.doc_id, r.ordinal) else { continue };
            let citation = chunk.citation();
            let cost = tokenize(&citation).len() + chunk.token_count;
            if used + cost > budget_tokens {
                break;
            }
            used += cost;
            blocks.push(format!("{citation}\n{}", chunk.text()));
        }
        blocks.join("\n\n")
    }
}
