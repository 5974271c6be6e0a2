//! Memory images and the hex image file format.
//!
//! The text format is the one `$readmemh` consumes: one 8-digit hex word per
//! line, with optional `@ADDR` records giving the *word* address of the next
//! word. `//` and `#` start comments. Writing always produces a single record
//! so images written here are read back bit-exactly.

use std::fmt::Write as _;

use thiserror::Error;

use crate::isa::Word;

/// A contiguous run of words placed at a byte address.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MemoryImage {
    pub base_address: u32,
    pub words: Vec<Word>,
}

impl MemoryImage {
    pub fn new(base_address: u32, words: Vec<Word>) -> Self {
        MemoryImage { base_address, words }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// One past the last byte covered by the image.
    pub fn end_address(&self) -> u64 {
        self.base_address as u64 + 4 * self.words.len() as u64
    }

    /// `(byte address, word)` pairs in placement order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, Word)> + '_ {
        self.words
            .iter()
            .enumerate()
            .map(move |(i, &w)| (self.base_address.wrapping_add(4 * i as u32), w))
    }

    pub fn to_hex(&self) -> String {
        let mut out = String::with_capacity(9 * self.words.len() + 10);
        if self.base_address != 0 {
            let _ = writeln!(out, "@{:08X}", self.base_address / 4);
        }
        for word in &self.words {
            let _ = writeln!(out, "{word:08X}");
        }
        out
    }

    pub fn from_hex(text: &str) -> Result<MemoryImage, HexError> {
        let mut base: Option<u64> = None;
        let mut words: Vec<Word> = Vec::new();
        // word address of the next word to place
        let mut cursor: u64 = 0;

        for (index, raw_line) in text.lines().enumerate() {
            let line_no = index + 1;
            let err = |kind| HexError { line: line_no, kind };
            let line = strip_comment(raw_line);
            for token in line.split_whitespace() {
                if let Some(addr) = token.strip_prefix('@') {
                    let addr = parse_hex(addr).ok_or_else(|| err(HexErrorKind::BadToken(token.into())))?;
                    if addr > u32::MAX as u64 / 4 {
                        return Err(err(HexErrorKind::AddressOverflow));
                    }
                    match base {
                        None => base = Some(addr),
                        Some(b) => {
                            let next = b + words.len() as u64;
                            if addr < next {
                                return Err(err(HexErrorKind::NonMonotonic { addr }));
                            }
                            words.resize((addr - b) as usize, 0);
                        }
                    }
                    cursor = addr;
                    continue;
                }
                let value = parse_hex(token)
                    .filter(|_| token.trim_start_matches("0x").len() <= 8)
                    .ok_or_else(|| err(HexErrorKind::BadToken(token.into())))?;
                let b = *base.get_or_insert(cursor);
                if b + words.len() as u64 >= (1 << 30) {
                    return Err(err(HexErrorKind::AddressOverflow));
                }
                words.push(value as Word);
                cursor = b + words.len() as u64;
            }
        }
        let base_address = (base.unwrap_or(0) * 4) as u32;
        Ok(MemoryImage { base_address, words })
    }
}

fn strip_comment(line: &str) -> &str {
    let end = [line.find("//"), line.find('#')].into_iter().flatten().min().unwrap_or(line.len());
    &line[..end]
}

fn parse_hex(token: &str) -> Option<u64> {
    let digits: String = token.trim_start_matches("0x").chars().filter(|&c| c != '_').collect();
    if digits.is_empty() || digits.len() > 16 {
        return None;
    }
    u64::from_str_radix(&digits, 16).ok()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct HexError {
    pub line: usize,
    pub kind: HexErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HexErrorKind {
    #[error("malformed hex token `{0}`")]
    BadToken(String),
    #[error("address record @{addr:X} overlaps or precedes earlier data")]
    NonMonotonic { addr: u64 },
    #[error("address exceeds the 32-bit byte address space")]
    AddressOverflow,
}
