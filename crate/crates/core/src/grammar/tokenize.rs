/// Punctuation detached from word edges. Hyphens and apostrophes stay
/// inside words.
pub const EDGE_PUNCTUATION: &[char] = &['.', ',', '!', '?', ';', ':', '«', '»', '"', '“', '”'];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Word,
    Punct,
}

/// A token with its byte span in the source sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token<'a> {
    pub text: &'a str,
    pub start: usize,
    pub end: usize,
    pub kind: TokenKind,
}

impl Token<'_> {
    pub fn is_word(&self) -> bool {
        self.kind == TokenKind::Word
    }
}

pub fn tokenize(sentence: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    let mut chunk_start = None;
    for (i, c) in sentence.char_indices().chain(std::iter::once((sentence.len(), ' '))) {
        match (c.is_whitespace(), chunk_start) {
            (false, None) => chunk_start = Some(i),
            (true, Some(s)) => {
                split_chunk(sentence, s, i, &mut tokens);
                chunk_start = None;
            }
            _ => {}
        }
    }
    tokens
}

fn split_chunk<'a>(src: &'a str, start: usize, end: usize, out: &mut Vec<Token<'a>>) {
    let punct = |s: usize, e: usize| Token {
        text: &src[s..e],
        start: s,
        end: e,
        kind: TokenKind::Punct,
    };
    let mut lo = start;
    let mut hi = end;
    while let Some(c) = src[lo..hi].chars().next().filter(|c| EDGE_PUNCTUATION.contains(c)) {
        out.push(punct(lo, lo + c.len_utf8()));
        lo += c.len_utf8();
    }
    let mut trailing = Vec::new();
    while let Some(c) = src[lo..hi].chars().next_back().filter(|c| EDGE_PUNCTUATION.contains(c)) {
        trailing.push(punct(hi - c.len_utf8(), hi));
        hi -= c.len_utf8();
    }
    if lo < hi {
        out.push(Token {
            text: &src[lo..hi],
            start: lo,
            end: hi,
            kind: TokenKind::Word,
        });
    }
    out.extend(trailing.into_iter().rev());
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(s: &str) -> Vec<&str> {
        tokenize(s).iter().map(|t| t.text).collect()
    }

    #[test]
    fn detaches_edge_punctuation() {
        assert_eq!(texts("Suba, a koy Niamey"), ["Suba", ",", "a", "koy", "Niamey"]);
        assert_eq!(texts("Haŋ!"), ["Haŋ", "!"]);
        assert!(texts("").is_empty());
        assert_eq!(texts("«Qu'est-ce?»"), ["«", "Qu'est-ce", "?", "»"]);
        assert_eq!(texts("“A ga nafa”."), ["“", "A", "ga", "nafa", "”", "."]);
    }

    #[test]
    fn spans_index_the_source() {
        let s = "  Ay na  hansi di. ";
        for t in tokenize(s) {
            assert_eq!(&s[t.start..t.end], t.text);
        }
    }
}
