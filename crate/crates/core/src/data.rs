//! Token-sequence corpora: alphabets, fixed-length padded encodings, and
//! line-oriented dataset loading.
//!
//! A corpus is a text file with one tokenized string per line. Tokens are
//! either bracket-delimited (`[C][O]`, the default) or whitespace-delimited.
//! The alphabet is the set of distinct tokens in first-occurrence order with
//! one reserved padding token appended last, so every model operates on a
//! distribution over length-`N` index sequences with suffix-only padding.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;

use thiserror::Error;

/// Reserved padding token. Angle brackets keep it disjoint from the
/// bracket-delimited token syntax.
pub const PAD_TOKEN: &str = "<pad>";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("unknown token {token:?}")]
    UnknownToken { token: String },
    #[error("sequence has {len} tokens but the configured length is {max}")]
    TooLong { len: usize, max: usize },
    #[error("token index {index} out of range for alphabet of size {size}")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("padding index followed by a non-padding index at position {position}")]
    NonSuffixPadding { position: usize },
    #[error("corpus already contains the reserved padding token {PAD_TOKEN:?}")]
    PadCollision,
    #[error("length override {requested} is below the longest line ({required})")]
    LengthOverrideTooSmall { requested: usize, required: usize },
    #[error("reading corpus: {0}")]
    Io(#[from] std::io::Error),
}

/// How raw lines split into tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tokenization {
    /// `[...]` groups; the default for SELFIES-style strings.
    Brackets,
    /// Whitespace-separated tokens, for generic corpora.
    Whitespace,
}

impl Tokenization {
    pub fn label(self) -> &'static str {
        match self {
            Tokenization::Brackets => "brackets",
            Tokenization::Whitespace => "whitespace",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "brackets" => Some(Tokenization::Brackets),
            "whitespace" => Some(Tokenization::Whitespace),
            _ => None,
        }
    }
}

/// Split one line into tokens under the given mode.
pub fn tokenize(line: &str, mode: Tokenization) -> Result<Vec<String>, DataError> {
    let line = line.trim_end_matches('\r');
    match mode {
        Tokenization::Whitespace => Ok(line.split_whitespace().map(str::to_owned).collect()),
        Tokenization::Brackets => {
            let mut tokens = Vec::new();
            let mut chars = line.char_indices();
            while let Some((start, c)) = chars.next() {
                if c != '[' {
                    return Err(DataError::Malformed {
                        line: 0,
                        msg: format!("expected '[' at byte {start}, found {c:?}"),
                    });
                }
                let mut end = None;
                for (i, c2) in chars.by_ref() {
                    match c2 {
                        ']' => {
                            end = Some(i);
                            break;
                        }
                        '[' => {
                            return Err(DataError::Malformed {
                                line: 0,
                                msg: format!("nested '[' at byte {i}"),
                            })
                        }
                        _ => {}
                    }
                }
                match end {
                    Some(end) => tokens.push(line[start..=end].to_owned()),
                    None => {
                        return Err(DataError::Malformed {
                            line: 0,
                            msg: format!("unbalanced '[' at byte {start}"),
                        })
                    }
                }
            }
            Ok(tokens)
        }
    }
}

/// Bijective token <-> index map with a reserved trailing pad token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenAlphabet {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    mode: Tokenization,
}

impl TokenAlphabet {
    /// Build from a corpus of raw lines: distinct tokens in first-occurrence
    /// order, pad appended last.
    pub fn build(corpus: &[impl AsRef<str>], mode: Tokenization) -> Result<Self, DataError> {
        if corpus.is_empty() {
            return Err(DataError::EmptyCorpus);
        }
        let mut tokens: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        for (line_no, line) in corpus.iter().enumerate() {
            let toks = tokenize(line.as_ref(), mode).map_err(|e| match e {
                DataError::Malformed { msg, .. } => DataError::Malformed {
                    line: line_no + 1,
                    msg,
                },
                other => other,
            })?;
            for tok in toks {
                if tok == PAD_TOKEN {
                    return Err(DataError::PadCollision);
                }
                if !index.contains_key(&tok) {
                    index.insert(tok.clone(), tokens.len());
                    tokens.push(tok);
                }
            }
        }
        index.insert(PAD_TOKEN.to_owned(), tokens.len());
        tokens.push(PAD_TOKEN.to_owned());
        Ok(TokenAlphabet {
            tokens,
            index,
            mode,
        })
    }

    /// Rebuild from an explicit token list (checkpoint loading). The pad
    /// token must be present and last.
    pub fn from_tokens(tokens: Vec<String>, mode: Tokenization) -> Result<Self, DataError> {
        if tokens.last().map(String::as_str) != Some(PAD_TOKEN) {
            return Err(DataError::Malformed {
                line: 0,
                msg: format!("alphabet must end with the pad token {PAD_TOKEN:?}"),
            });
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(DataError::Malformed {
                    line: 0,
                    msg: format!("duplicate token {t:?} in alphabet"),
                });
            }
        }
        Ok(TokenAlphabet {
            tokens,
            index,
            mode,
        })
    }

    /// Alphabet size `d`, padding included.
    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    pub fn pad_index(&self) -> usize {
        self.tokens.len() - 1
    }

    pub fn mode(&self) -> Tokenization {
        self.mode
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    pub fn lookup(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Encode a tokenized string to exactly `n` indices, pad-filled.
    pub fn encode(&self, s: &str, n: usize) -> Result<TokenSequence, DataError> {
        let toks = tokenize(s, self.mode)?;
        if toks.len() > n {
            return Err(DataError::TooLong {
                len: toks.len(),
                max: n,
            });
        }
        let mut indices = Vec::with_capacity(n);
        for tok in &toks {
            match self.lookup(tok) {
                Some(i) => indices.push(i),
                None => return Err(DataError::UnknownToken { token: tok.clone() }),
            }
        }
        indices.resize(n, self.pad_index());
        Ok(TokenSequence::new(indices))
    }

    /// Decode back to a tokenized string; padding must be a suffix.
    pub fn decode(&self, seq: &TokenSequence) -> Result<String, DataError> {
        let pad = self.pad_index();
        let mut out = String::new();
        let mut seen_pad = false;
        for (pos, &i) in seq.indices().iter().enumerate() {
            if i >= self.size() {
                return Err(DataError::IndexOutOfRange {
                    index: i,
                    size: self.size(),
                });
            }
            if i == pad {
                seen_pad = true;
                continue;
            }
            if seen_pad {
                return Err(DataError::NonSuffixPadding { position: pos });
            }
            if self.mode == Tokenization::Whitespace && !out.is_empty() {
                out.push(' ');
            }
            out.push_str(&self.tokens[i]);
        }
        Ok(out)
    }

    /// One token per line, pad last.
    pub fn export(&self) -> String {
        let mut out = String::new();
        for t in &self.tokens {
            out.push_str(t);
            out.push('\n');
        }
        out
    }
}

/// Fixed-length sequence of token indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TokenSequence {
    indices: Vec<usize>,
}

impl TokenSequence {
    pub fn new(indices: Vec<usize>) -> Self {
        TokenSequence { indices }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Number of leading non-pad indices.
    pub fn effective_len(&self, pad_index: usize) -> usize {
        self.indices
            .iter()
            .position(|&i| i == pad_index)
            .unwrap_or(self.indices.len())
    }

    /// Replace everything after the first pad with pad, making padding a
    /// suffix. Model samples are normalized this way before decoding.
    pub fn normalize_suffix(&self, pad_index: usize) -> TokenSequence {
        let cut = self.effective_len(pad_index);
        let mut indices = self.indices.clone();
        for v in indices.iter_mut().skip(cut) {
            *v = pad_index;
        }
        TokenSequence::new(indices)
    }
}

impl fmt::Display for TokenSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.indices)
    }
}

/// A loaded corpus: every sequence shares the alphabet and the length `n`.
#[derive(Debug, Clone)]
pub struct SequenceDataset {
    pub sequences: Vec<TokenSequence>,
    pub alphabet: TokenAlphabet,
    n: usize,
}

impl SequenceDataset {
    /// Build from raw lines. `n_override` fixes the padded length; it must be
    /// at least the longest line.
    pub fn from_lines(
        lines: &[impl AsRef<str>],
        mode: Tokenization,
        n_override: Option<usize>,
    ) -> Result<Self, DataError> {
        let alphabet = TokenAlphabet::build(lines, mode)?;
        let mut counts = Vec::with_capacity(lines.len());
        for (line_no, line) in lines.iter().enumerate() {
            let toks = tokenize(line.as_ref(), mode).map_err(|e| match e {
                DataError::Malformed { msg, .. } => DataError::Malformed {
                    line: line_no + 1,
                    msg,
                },
                other => other,
            })?;
            counts.push(toks.len());
        }
        let longest = counts.iter().copied().max().unwrap_or(0).max(1);
        let n = match n_override {
            Some(n) if n < longest => {
                return Err(DataError::LengthOverrideTooSmall {
                    requested: n,
                    required: longest,
                })
            }
            Some(n) => n,
            None => longest,
        };
        let mut sequences = Vec::with_capacity(lines.len());
        for (line_no, line) in lines.iter().enumerate() {
            let seq = alphabet.encode(line.as_ref(), n).map_err(|e| match e {
                DataError::Malformed { msg, .. } => DataError::Malformed {
                    line: line_no + 1,
                    msg,
                },
                other => other,
            })?;
            sequences.push(seq);
        }
        Ok(SequenceDataset {
            sequences,
            alphabet,
            n,
        })
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    /// Padded sequence length `N`.
    pub fn sequence_len(&self) -> usize {
        self.n
    }

    /// Decoded strings, in corpus order.
    pub fn decoded(&self) -> Vec<String> {
        self.sequences
            .iter()
            .map(|s| self.alphabet.decode(s).expect("dataset sequences decode"))
            .collect()
    }
}

/// Load a dataset from a text file (UTF-8, one tokenized string per line).
pub fn load_dataset(
    path: impl AsRef<Path>,
    mode: Tokenization,
    n_override: Option<usize>,
) -> Result<SequenceDataset, DataError> {
    let text = fs::read_to_string(path)?;
    let lines: Vec<&str> = text.lines().collect();
    SequenceDataset::from_lines(&lines, mode, n_override)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn abc_alphabet() -> TokenAlphabet {
        TokenAlphabet::build(&["[C][O]", "[C]"], Tokenization::Brackets).unwrap()
    }

    #[test]
    fn build_alphabet_first_occurrence_pad_last() {
        let a = abc_alphabet();
        assert_eq!(a.tokens(), &["[C]", "[O]", PAD_TOKEN]);
        assert_eq!(a.size(), 3);
        assert_eq!(a.pad_index(), 2);
    }

    #[test]
    fn build_alphabet_empty_corpus_errors() {
        let corpus: Vec<&str> = vec![];
        assert!(matches!(
            TokenAlphabet::build(&corpus, Tokenization::Brackets),
            Err(DataError::EmptyCorpus)
        ));
    }

    #[test]
    fn build_alphabet_rejects_unbalanced_brackets() {
        let err = TokenAlphabet::build(&["[C][O"], Tokenization::Brackets).unwrap_err();
        assert!(matches!(err, DataError::Malformed { line: 1, .. }));
    }

    #[test]
    fn encode_pads_to_length() {
        let a = abc_alphabet();
        let seq = a.encode("[C][O]", 4).unwrap();
        assert_eq!(seq.indices(), &[0, 1, 2, 2]);
    }

    #[test]
    fn encode_empty_string_is_all_pad() {
        let a = abc_alphabet();
        let seq = a.encode("", 2).unwrap();
        assert_eq!(seq.indices(), &[2, 2]);
    }

    #[test]
    fn encode_unknown_token_errors() {
        let a = abc_alphabet();
        assert!(matches!(
            a.encode("[X]", 4),
            Err(DataError::UnknownToken { .. })
        ));
    }

    #[test]
    fn encode_too_long_errors() {
        let a = abc_alphabet();
        assert!(matches!(
            a.encode("[C][C][C]", 2),
            Err(DataError::TooLong { len: 3, max: 2 })
        ));
    }

    #[test]
    fn decode_inverts_encode() {
        let a = abc_alphabet();
        let s = a.decode(&TokenSequence::new(vec![0, 1, 2, 2])).unwrap();
        assert_eq!(s, "[C][O]");
        let empty = a.decode(&TokenSequence::new(vec![2, 2])).unwrap();
        assert_eq!(empty, "");
    }

    #[test]
    fn decode_rejects_non_suffix_padding() {
        let a = abc_alphabet();
        assert!(matches!(
            a.decode(&TokenSequence::new(vec![0, 2, 1, 2])),
            Err(DataError::NonSuffixPadding { position: 2 })
        ));
    }

    #[test]
    fn decode_rejects_out_of_range_index() {
        let a = abc_alphabet();
        assert!(matches!(
            a.decode(&TokenSequence::new(vec![0, 9])),
            Err(DataError::IndexOutOfRange { index: 9, size: 3 })
        ));
    }

    #[test]
    fn dataset_from_two_lines() {
        let ds =
            SequenceDataset::from_lines(&["[C][O]", "[C]"], Tokenization::Brackets, None).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.sequence_len(), 2);
        assert_eq!(ds.alphabet.size(), 3);
        assert_eq!(ds.sequences[1].indices(), &[0, 2]);
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_dataset("/nonexistent/corpus.txt", Tokenization::Brackets, None),
            Err(DataError::Io(_))
        ));
    }

    #[test]
    fn length_override_too_small_errors() {
        let err = SequenceDataset::from_lines(&["[C][O]", "[C]"], Tokenization::Brackets, Some(1))
            .unwrap_err();
        assert!(matches!(err, DataError::LengthOverrideTooSmall { .. }));
    }

    #[test]
    fn whitespace_mode_round_trip() {
        let ds = SequenceDataset::from_lines(&["a b c", "b a"], Tokenization::Whitespace, None)
            .unwrap();
        let s = ds.alphabet.decode(&ds.sequences[1]).unwrap();
        assert_eq!(s, "b a");
    }

    #[test]
    fn normalize_suffix_moves_everything_after_first_pad() {
        let seq = TokenSequence::new(vec![0, 2, 1, 0]);
        assert_eq!(seq.normalize_suffix(2).indices(), &[0, 2, 2, 2]);
        assert_eq!(seq.effective_len(2), 1);
    }

    #[test]
    fn two_loads_are_identical() {
        let lines = ["[N][C][O]", "[O]", "[C][N]"];
        let a = SequenceDataset::from_lines(&lines, Tokenization::Brackets, None).unwrap();
        let b = SequenceDataset::from_lines(&lines, Tokenization::Brackets, None).unwrap();
        assert_eq!(a.alphabet, b.alphabet);
        assert_eq!(a.sequences, b.sequences);
    }

    proptest! {
        /// decode(encode(line)) == line for arbitrary bracket corpora, and all
        /// emitted indices are in range with suffix-only padding.
        #[test]
        fn round_trip_random_corpora(
            lines in prop::collection::vec(
                prop::collection::vec(0usize..6, 0..12),
                1..20,
            )
        ) {
            let vocab = ["[A]", "[B]", "[C]", "[N]", "[O]", "[=O]"];
            let corpus: Vec<String> = lines
                .iter()
                .map(|toks| toks.iter().map(|&t| vocab[t]).collect::<String>())
                .collect();
            let ds = SequenceDataset::from_lines(&corpus, Tokenization::Brackets, None).unwrap();
            let pad = ds.alphabet.pad_index();
            for (line, seq) in corpus.iter().zip(&ds.sequences) {
                prop_assert_eq!(&ds.alphabet.decode(seq).unwrap(), line);
                let mut seen_pad = false;
                for &i in seq.indices() {
                    prop_assert!(i < ds.alphabet.size());
                    if i == pad {
                        seen_pad = true;
                    } else {
                        prop_assert!(!seen_pad);
                    }
                }
            }
        }
    }
}
