//! Memory image files: one word per line, "ADDRESS: WORD", both sides eight
//! hex digits, addresses absolute. Blank lines and `#` comment lines are
//! permitted. Used to preload memories and to retrieve results.

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ImageError {
    #[error("line {line}: expected \"ADDRESS: WORD\", got {text:?}")]
    Malformed { line: usize, text: String },
}

/// Parse image text into (address, word) pairs, in file order.
pub fn parse_image(text: &str) -> Result<Vec<(u32, u32)>, ImageError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let malformed = || ImageError::Malformed {
            line: i + 1,
            text: raw.to_string(),
        };
        let (addr, word) = line.split_once(':').ok_or_else(malformed)?;
        let parse = |s: &str| u32::from_str_radix(s.trim(), 16).map_err(|_| malformed());
        out.push((parse(addr)?, parse(word)?));
    }
    Ok(out)
}

pub fn format_image(words: &[(u32, u32)]) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    for &(addr, word) in words {
        writeln!(s, "{addr:08X}: {word:08X}").unwrap();
    }
    s
}
