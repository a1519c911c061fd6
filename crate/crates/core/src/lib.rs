//! Hallucination detection for retrieval-augmented question answering.
//!
//! The crate is organised around the pipeline that produces and checks
//! answers over a technical manual:
//!
//! - [`corpus`]: loading annotated (question, context, answer) triples,
//!   label aggregation and dataset accounting.
//! - [`textproc`]: the one shared definition of "sentence" and "token".
//! - [`similarity`]: cosine, LCS alignment, the phrase-overlap ratio, and
//!   cached embedding providers.
//! - [`detectors`]: sentence-similarity and keyword-match detectors.
//! - [`retrieval`]: sparse, dense, ensemble and adaptive retrieval over a
//!   document/section/paragraph index.
//! - [`evaluation`]: classification reports, agreement statistics and
//!   threshold tuning.
//! - [`llm`]: prompt templates and a record/replay chat client.

pub mod corpus;
pub mod detectors;
pub mod error;
pub mod evaluation;
pub mod llm;
pub mod retrieval;
pub mod similarity;
pub mod textproc;

pub use corpus::{ExampleLabel, QaTriple, RetrievalMethod, SentenceVerdict, Split};
pub use detectors::{DetectionResult, DetectorMode, Thresholds};
pub use error::{Error, Result};
pub use evaluation::EvalReport;
pub use similarity::{Embedder, EmbeddingVector, ProviderMode};
pub use textproc::TokenSequence;

/// Lowercase hex SHA-256 of `bytes`. Used for cache keys and run manifests.
pub fn content_hash(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}

/// Writes `bytes` to a temporary file beside `path`, then renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &std::path::Path, bytes: &[u8]) -> Result<()> {
    use std::io::Write;

    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| std::path::Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    // Temporary files are created owner-only; give the result the mode of
    // the file it replaces, or the usual mode for a new file.
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        let mode = std::fs::metadata(path).map_or(0o644, |m| m.permissions().mode());
        std::fs::set_permissions(tmp.path(), std::fs::Permissions::from_mode(mode))
            .map_err(|e| Error::io(tmp.path(), e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
