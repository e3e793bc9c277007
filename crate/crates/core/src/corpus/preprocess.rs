use super::Vocabulary;

/// Content and each comment keep at most this many tokens.
pub const MAX_TOKENS: usize = 512;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Preprocessed {
    pub ids: Vec<u32>,
    /// Nothing survived; callers reject the article.
    pub rejected: bool,
}

/// Lowercases, drops `@mentions`, strips punctuation and splits on
/// whitespace.
pub fn normalize(raw: &str) -> Vec<String> {
    raw.split_whitespace()
        .filter_map(|tok| {
            let tok = tok.to_lowercase();
            let head = tok.trim_start_matches(|c: char| !c.is_alphanumeric() && c != '@');
            if head.starts_with('@') {
                return None;
            }
            let cleaned: String = tok.chars().filter(|c| c.is_alphanumeric()).collect();
            (!cleaned.is_empty()).then_some(cleaned)
        })
        .collect()
}

/// [`normalize`], drop out-of-vocabulary tokens, keep the first
/// [`MAX_TOKENS`].
pub fn preprocess(raw: &str, vocabulary: &Vocabulary) -> Preprocessed {
    let ids: Vec<u32> = normalize(raw)
        .iter()
        .filter_map(|t| vocabulary.id(t))
        .take(MAX_TOKENS)
        .collect();
    Preprocessed {
        rejected: ids.is_empty(),
        ids,
    }
}

pub fn detokenize(ids: &[u32], vocabulary: &Vocabulary) -> String {
    ids.iter()
        .filter_map(|&i| vocabulary.token(i))
        .collect::<Vec<_>>()
        .join(" ")
}
