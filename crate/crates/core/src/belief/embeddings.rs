use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::BeliefError;

pub const EMBEDDING_DIM: usize = 100;

/// Word vectors of one fixed dimension. Absent words are `None`, never zero.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> EmbeddingTable {
        EmbeddingTable {
            dim,
            vectors: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Insert a vector, returning the previous one for that word.
    ///
    /// # Panics
    /// If the vector length differs from the table dimension.
    pub fn insert(&mut self, word: impl Into<String>, vector: Vec<f64>) -> Option<Vec<f64>> {
        assert_eq!(vector.len(), self.dim, "embedding dimension mismatch");
        self.vectors.insert(word.into(), vector)
    }

    pub fn lookup(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.vectors.contains_key(word)
    }

    /// Words in sorted order.
    pub fn words(&self) -> Vec<&str> {
        let mut words: Vec<&str> = self.vectors.keys().map(String::as_str).collect();
        words.sort_unstable();
        words
    }

    /// Read the plain-text `word v1 ... vD` format with `D = 100`.
    pub fn load(path: &Path) -> Result<EmbeddingTable, BeliefError> {
        Self::load_with_dim(path, EMBEDDING_DIM)
    }

    pub fn load_with_dim(path: &Path, dim: usize) -> Result<EmbeddingTable, BeliefError> {
        let io_err = |source| BeliefError::Io {
            path: path.to_path_buf(),
            source,
        };
        let reader = BufReader::new(File::open(path).map_err(io_err)?);
        let mut table = EmbeddingTable::new(dim);
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(io_err)?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let word = fields.next().unwrap_or_default();
            let vector = fields
                .map(|f| {
                    f.parse::<f64>().map_err(|_| BeliefError::EmbeddingLine {
                        line: line_no,
                        message: format!("cannot parse {f:?} as a number"),
                    })
                })
                .collect::<Result<Vec<f64>, _>>()?;
            if vector.len() != dim {
                return Err(BeliefError::EmbeddingLine {
                    line: line_no,
                    message: format!("expected {dim} numbers for {word:?}, found {}", vector.len()),
                });
            }
            if vector.iter().any(|v| !v.is_finite()) {
                return Err(BeliefError::EmbeddingLine {
                    line: line_no,
                    message: format!("non-finite component for {word:?}"),
                });
            }
            if table.insert(word, vector).is_some() {
                log::warn!("{}:{line_no}: duplicate embedding for {word:?}, keeping the later one", path.display());
            }
        }
        Ok(table)
    }

    /// Write the table in the same text format, words sorted.
    pub fn save(&self, path: &Path) -> Result<(), BeliefError> {
        let io_err = |source| BeliefError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
        for word in self.words() {
            write!(out, "{word}").map_err(io_err)?;
            for v in &self.vectors[word] {
                write!(out, " {v}").map_err(io_err)?;
            }
            writeln!(out).map_err(io_err)?;
        }
        out.flush().map_err(io_err)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(word: &str, n: usize) -> String {
        let nums: Vec<String> = (0..n).map(|i| format!("{}", i as f64 / 100.0)).collect();
        format!("{word} {}\n", nums.join(" "))
    }

    #[test]
    fn loads_100d_vectors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vec.txt");
        std::fs::write(&path, line("good", 100) + &line("bad", 100)).unwrap();
        let table = EmbeddingTable::load(&path).unwrap();
        assert_eq!(table.lookup("good").unwrap().len(), 100);
        assert_eq!(table.lookup("zxqv"), None);
        assert_eq!(table.len(), 2);
    }

    #[test]
    fn wrong_dimension_cites_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vec.txt");
        std::fs::write(&path, line("good", 100) + &line("bad", 99)).unwrap();
        let err = EmbeddingTable::load(&path).unwrap_err();
        assert!(matches!(err, BeliefError::EmbeddingLine { line: 2, .. }), "{err}");
    }

    #[test]
    fn malformed_number_cites_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vec.txt");
        std::fs::write(&path, line("good", 100).replace("0.5", "zero-point-five")).unwrap();
        let err = EmbeddingTable::load(&path).unwrap_err();
        assert!(matches!(err, BeliefError::EmbeddingLine { line: 1, .. }), "{err}");
    }

    #[test]
    fn duplicate_word_last_wins() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vec.txt");
        let second = line("good", 100).replace("good 0 ", "good 7 ");
        std::fs::write(&path, line("good", 100) + &second).unwrap();
        let table = EmbeddingTable::load(&path).unwrap();
        assert_eq!(table.lookup("good").unwrap()[0], 7.0);
    }

    #[test]
    fn save_and_reload() {
        let mut t = EmbeddingTable::new(3);
        t.insert("b", vec![0.1, -2.5, 1e-7]);
        t.insert("a", vec![1.0, 2.0, 3.0]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.txt");
        t.save(&path).unwrap();
        assert_eq!(EmbeddingTable::load_with_dim(&path, 3).unwrap(), t);
    }
}
