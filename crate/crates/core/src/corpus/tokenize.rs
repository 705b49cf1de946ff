//! Dictionary-free fallback segmentation and POS tagging, used only when a
//! post arrives without pre-segmented tokens or tags.

use std::collections::HashMap;
use std::path::Path;

use super::{PosTag, Token};
use crate::error::{Error, Result};
use crate::io::read_lines;

/// Han ideographs (all extension blocks plus compatibility forms) and kana.
pub fn is_cjk(c: char) -> bool {
    matches!(
        c as u32,
        0x3040..=0x30FF
            | 0x3400..=0x4DBF
            | 0x4E00..=0x9FFF
            | 0xF900..=0xFAFF
            | 0x20000..=0x2FA1F
    )
}

fn is_digit(c: char) -> bool {
    c.is_ascii_digit() || ('０'..='９').contains(&c)
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() && !is_cjk(c)
}

/// Splits `text` into alphanumeric runs and single CJK characters.
///
/// A `.` or `,` sitting between two digits stays inside the run, so `3.5`
/// and `1,000` come out whole. Everything else that is neither a word
/// character nor CJK separates tokens and is dropped.
pub fn fallback_tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if is_cjk(c) {
            tokens.push(Token::new(c.to_string()));
            i += 1;
        } else if is_word_char(c) {
            let start = i;
            i += 1;
            while i < chars.len() {
                let d = chars[i];
                if is_word_char(d) {
                    i += 1;
                } else if (d == '.' || d == ',')
                    && is_digit(chars[i - 1])
                    && chars.get(i + 1).copied().is_some_and(is_digit)
                {
                    i += 2;
                } else {
                    break;
                }
            }
            tokens.push(Token::new(chars[start..i].iter().collect::<String>()));
        } else {
            i += 1;
        }
    }
    tokens
}

/// Digits optionally separated by single `.`/`,` characters, with an
/// optional leading sign.
pub fn is_decimal_number(surface: &str) -> bool {
    let body = surface.strip_prefix(['+', '-']).unwrap_or(surface);
    let mut groups = 0;
    for group in body.split(['.', ',']) {
        if group.is_empty() || !group.chars().all(is_digit) {
            return false;
        }
        groups += 1;
    }
    groups > 0
}

/// Term → tag lookup used by the fallback tagger.
#[derive(Debug, Clone, Default)]
pub struct TagDictionary {
    tags: HashMap<String, PosTag>,
}

impl TagDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, term: impl Into<String>, tag: PosTag) {
        self.tags.insert(term.into(), tag);
    }

    pub fn get(&self, term: &str) -> Option<PosTag> {
        self.tags.get(term).copied()
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    /// Reads a two-column `term<TAB>tag` file. Blank lines and lines starting
    /// with `#` are skipped.
    pub fn load(path: &Path) -> Result<Self> {
        let mut dict = Self::new();
        for (line_no, line) in read_lines(path)? {
            let line = line.trim_end_matches(['\r', '\n']);
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            let (Some(term), Some(tag)) = (cols.next(), cols.next()) else {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: line_no,
                    message: "expected two tab-separated columns: term, tag".into(),
                });
            };
            if term.is_empty() {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: line_no,
                    message: "empty term".into(),
                });
            }
            dict.insert(term, PosTag::parse_lenient(tag.trim()));
        }
        Ok(dict)
    }
}

pub fn fallback_pos_tag(token: &Token, dict: &TagDictionary) -> PosTag {
    if is_decimal_number(&token.surface) {
        PosTag::Cardinal
    } else {
        dict.get(&token.surface).unwrap_or(PosTag::Other)
    }
}
