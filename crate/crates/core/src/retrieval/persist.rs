//! Single-file binary index format.
//!
//! Layout (little-endian): magic `GRIX`, version byte, kind tag byte, 32-byte
//! digest of the indexed texts, u64 document count, then a kind-specific body.
//! Sparse bodies store raw counts only (document lengths and postings); the
//! scoring weights are rebuilt on load. Dense bodies store the embedder id,
//! the dimension and the row-major f32 matrix.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use super::dense::DenseIndex;
use super::sparse::{Bm25Index, Bm25Params, TermStats, TfidfIndex};
use super::{Backing, Embedder, RetrieverIndex};
use crate::error::{Error, Result};

pub const INDEX_MAGIC: [u8; 4] = *b"GRIX";
pub const INDEX_VERSION: u8 = 1;

const TAG_TFIDF: u8 = 0;
const TAG_BM25: u8 = 1;
const TAG_DENSE: u8 = 2;

pub fn save_index(index: &RetrieverIndex, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_index(index, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_index(index: &RetrieverIndex, w: &mut impl Write) -> std::io::Result<()> {
    w.write_all(&INDEX_MAGIC)?;
    let tag = match &index.backing {
        Backing::Tfidf(_) => TAG_TFIDF,
        Backing::Bm25(_) => TAG_BM25,
        Backing::Dense(_) => TAG_DENSE,
    };
    w.write_all(&[INDEX_VERSION, tag])?;
    w.write_all(&index.docs_digest)?;
    w.write_all(&(index.len() as u64).to_le_bytes())?;
    match &index.backing {
        Backing::Tfidf(i) => write_stats(&i.stats, w),
        Backing::Bm25(i) => {
            w.write_all(&i.params.k1.to_le_bytes())?;
            w.write_all(&i.params.b.to_le_bytes())?;
            write_stats(&i.stats, w)
        }
        Backing::Dense(i) => {
            write_bytes(w, i.embedder.id().as_bytes())?;
            w.write_all(&(i.dim as u32).to_le_bytes())?;
            for x in &i.matrix {
                w.write_all(&x.to_le_bytes())?;
            }
            Ok(())
        }
    }
}

fn write_bytes(w: &mut impl Write, bytes: &[u8]) -> std::io::Result<()> {
    w.write_all(&(bytes.len() as u32).to_le_bytes())?;
    w.write_all(bytes)
}

fn write_stats(stats: &TermStats, w: &mut impl Write) -> std::io::Result<()> {
    for &len in &stats.doc_len {
        w.write_all(&len.to_le_bytes())?;
    }
    w.write_all(&(stats.terms.len() as u64).to_le_bytes())?;
    for (term, postings) in stats.terms.iter().zip(&stats.postings) {
        write_bytes(w, term.as_bytes())?;
        w.write_all(&(postings.len() as u32).to_le_bytes())?;
        for &(doc, tf) in postings {
            w.write_all(&doc.to_le_bytes())?;
            w.write_all(&tf.to_le_bytes())?;
        }
    }
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::IndexFormat("truncated file".into()))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        String::from_utf8(self.take(len)?.to_vec())
            .map_err(|_| Error::IndexFormat("invalid UTF-8 string".into()))
    }
}

/// Loads an index written by [`save_index`]. Dense indices need the same
/// embedder they were built with; `expected_digest`, when given, must match
/// the digest of the collection the index was built over.
pub fn load_index(
    path: impl AsRef<Path>,
    embedder: Option<Arc<dyn Embedder>>,
    expected_digest: Option<[u8; 32]>,
) -> Result<RetrieverIndex> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader {
        buf: &bytes,
        pos: 0,
    };
    if r.take(4)? != INDEX_MAGIC {
        return Err(Error::IndexFormat("bad magic".into()));
    }
    let version = r.u8()?;
    if version != INDEX_VERSION {
        return Err(Error::IndexFormat(format!(
            "unsupported version {version} (expected {INDEX_VERSION})"
        )));
    }
    let tag = r.u8()?;
    let digest: [u8; 32] = r.take(32)?.try_into().unwrap();
    if let Some(expected) = expected_digest {
        if expected != digest {
            return Err(Error::IndexFormat(
                "index was built over a different collection".into(),
            ));
        }
    }
    let num_docs = r.u64()? as usize;
    let backing = match tag {
        TAG_TFIDF => {
            ensure_no_embedder(&embedder, "tfidf")?;
            Backing::Tfidf(TfidfIndex::new(read_stats(&mut r, num_docs)?))
        }
        TAG_BM25 => {
            ensure_no_embedder(&embedder, "bm25")?;
            let params = Bm25Params {
                k1: r.f64()?,
                b: r.f64()?,
            };
            Backing::Bm25(Bm25Index::new(read_stats(&mut r, num_docs)?, params))
        }
        TAG_DENSE => {
            let embedder = embedder.ok_or(Error::MissingEmbedder)?;
            let id = r.string()?;
            if id != embedder.id() {
                return Err(Error::IndexFormat(format!(
                    "index built with embedder `{id}`, got `{}`",
                    embedder.id()
                )));
            }
            let dim = r.u32()? as usize;
            let raw = r.take(num_docs * dim * 4)?;
            let matrix = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Backing::Dense(DenseIndex {
                embedder,
                dim,
                matrix,
            })
        }
        other => return Err(Error::IndexFormat(format!("unknown kind tag {other}"))),
    };
    if r.pos != bytes.len() {
        return Err(Error::IndexFormat("trailing bytes".into()));
    }
    Ok(RetrieverIndex::from_backing(backing, digest))
}

fn ensure_no_embedder(embedder: &Option<Arc<dyn Embedder>>, kind: &'static str) -> Result<()> {
    match embedder {
        Some(_) => Err(Error::UnexpectedEmbedder(kind)),
        None => Ok(()),
    }
}

fn read_stats(r: &mut Reader<'_>, num_docs: usize) -> Result<TermStats> {
    let doc_len = (0..num_docs).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let vocab = r.u64()? as usize;
    let mut terms = Vec::with_capacity(vocab.min(1 << 24));
    let mut postings = Vec::with_capacity(vocab.min(1 << 24));
    for _ in 0..vocab {
        terms.push(r.string()?);
        let count = r.u32()? as usize;
        let mut list = Vec::with_capacity(count.min(num_docs));
        for _ in 0..count {
            let doc = r.u32()?;
            if doc as usize >= num_docs {
                return Err(Error::IndexFormat(format!(
                    "posting for doc {doc} out of range"
                )));
            }
            list.push((doc, r.u32()?));
        }
        postings.push(list);
    }
    Ok(TermStats::from_parts(terms, postings, doc_len))
}
