//! Small inline string tokens used for tape symbols and rendered state names.
//!
//! Tape alphabets here are richer than single characters (circled digits are
//! printed as `(0)`..`(9)`, the blank as `eps`), and state names carry dotted
//! parameter suffixes such as `Subtract.3` or `UnknownTerm.Forwarded`. A
//! fixed-capacity copyable token keeps node and edge keys allocation-free and
//! makes the canonical byte-wise ordering of graph elements cheap.

use std::borrow::Borrow;
use std::fmt;

/// Maximum rendered length of a token in bytes.
///
/// The longest name in any machine is `UnknownTerm.Forwarded` (21 bytes);
/// construction asserts the bound so an overflow fails loudly.
pub const TOK_CAP: usize = 23;

/// An inline, copyable string token ordered byte-lexicographically.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Tok {
    len: u8,
    buf: [u8; TOK_CAP],
}

impl PartialOrd for Tok {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Tok {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.as_str().cmp(other.as_str())
    }
}

impl Tok {
    /// Builds a token from a string slice. Panics if the text exceeds
    /// [`TOK_CAP`] bytes or is empty: tokens name symbols and states, and
    /// neither may be empty.
    pub fn new(text: &str) -> Self {
        let bytes = text.as_bytes();
        assert!(!bytes.is_empty(), "empty token");
        assert!(
            bytes.len() <= TOK_CAP,
            "token longer than {TOK_CAP} bytes: {text:?}"
        );
        let mut buf = [0u8; TOK_CAP];
        buf[..bytes.len()].copy_from_slice(bytes);
        Tok {
            len: bytes.len() as u8,
            buf,
        }
    }

    pub fn as_str(&self) -> &str {
        std::str::from_utf8(&self.buf[..self.len as usize]).expect("tokens are built from &str")
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// The base part before the first `.`, or the whole token if undotted.
    pub fn base(&self) -> &str {
        let s = self.as_str();
        match s.find('.') {
            Some(i) => &s[..i],
            None => s,
        }
    }

    /// The suffix after the first `.`, if any.
    pub fn param(&self) -> Option<&str> {
        let s = self.as_str();
        s.find('.').map(|i| &s[i + 1..])
    }

    /// `base.param` in one call.
    pub fn with_param(base: &str, param: &str) -> Self {
        let mut s = String::with_capacity(base.len() + 1 + param.len());
        s.push_str(base);
        s.push('.');
        s.push_str(param);
        Tok::new(&s)
    }

    /// Single-character helper for digit tokens and punctuation.
    pub fn ch(c: char) -> Self {
        let mut buf = [0u8; 4];
        Tok::new(c.encode_utf8(&mut buf))
    }

    /// Decimal digit value if the token is a single ASCII digit.
    pub fn digit(&self) -> Option<u8> {
        let s = self.as_str().as_bytes();
        match s {
            [d @ b'0'..=b'9'] => Some(d - b'0'),
            _ => None,
        }
    }

    /// Digit value if the token is a circled digit `(0)`..`(9)`.
    pub fn circled_digit(&self) -> Option<u8> {
        let s = self.as_str().as_bytes();
        match s {
            [b'(', d @ b'0'..=b'9', b')'] => Some(d - b'0'),
            _ => None,
        }
    }

    /// The circled form of a decimal digit.
    pub fn circled(d: u8) -> Self {
        assert!(d < 10, "circled digit out of range: {d}");
        Tok::new(&format!("({d})"))
    }
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.as_str())
    }
}

impl From<&str> for Tok {
    fn from(s: &str) -> Self {
        Tok::new(s)
    }
}

impl Borrow<str> for Tok {
    fn borrow(&self) -> &str {
        self.as_str()
    }
}

/// Convenience constructor used pervasively by machine tables and tests.
pub fn t(s: &str) -> Tok {
    Tok::new(s)
}
