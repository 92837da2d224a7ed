//! Reserved token names and the escaping that keeps corpus values from
//! colliding with them.
//!
//! Placeholders are spelled `var<k>` (lowercase, decimal, no zero padding,
//! `k >= 1`). A corpus value that already reads as a placeholder or as a
//! special token gets [`ESCAPE_SUFFIX`] appended; values already carrying the
//! suffix over a reserved stem get one more, so escaping stays injective and
//! [`unescape`] inverts it exactly.

use std::borrow::Cow;

pub const UNK: &str = "UNK";
pub const PAD: &str = "PAD";
pub const EOS: &str = "EOS";

pub const SPECIAL_TOKENS: [&str; 3] = [UNK, PAD, EOS];

/// Zero-width space followed by `_orig`.
pub const ESCAPE_SUFFIX: &str = "\u{200B}_orig";

pub fn placeholder(index: u32) -> String {
    format!("var{index}")
}

pub fn parse_placeholder(value: &str) -> Option<u32> {
    let digits = value.strip_prefix("var")?;
    if digits.is_empty() || digits.starts_with('0') || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

fn is_reserved_stem(value: &str) -> bool {
    SPECIAL_TOKENS.contains(&value) || parse_placeholder(value).is_some()
}

fn stem(mut value: &str) -> &str {
    while let Some(rest) = value.strip_suffix(ESCAPE_SUFFIX) {
        value = rest;
    }
    value
}

pub fn escape(value: &str) -> Cow<'_, str> {
    if is_reserved_stem(stem(value)) {
        Cow::Owned(format!("{value}{ESCAPE_SUFFIX}"))
    } else {
        Cow::Borrowed(value)
    }
}

pub fn unescape(value: &str) -> Cow<'_, str> {
    match value.strip_suffix(ESCAPE_SUFFIX) {
        Some(rest) if is_reserved_stem(stem(rest)) => Cow::Borrowed(rest),
        _ => Cow::Borrowed(value),
    }
}

/// True for any name a model-side vocabulary reserves for itself.
pub fn is_reserved(value: &str) -> bool {
    is_reserved_stem(value)
}
