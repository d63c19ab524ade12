//! Small character cursor shared by the value, equation-system and program parsers.

use thiserror::Error;

/// Syntax or resolution error with a 1-based source position.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Comments {
    None,
    /// `# ...` to end of line
    Hash,
    /// `// ...` to end of line
    Slashes,
}

pub(crate) struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    comments: Comments,
}

impl<'a> Cursor<'a> {
    pub fn new(src: &'a str, comments: Comments) -> Self {
        Cursor { src, pos: 0, comments }
    }

    pub fn pos(&self) -> usize {
        self.pos
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    pub fn skip_ws(&mut self) {
        loop {
            let rest = self.rest();
            let trimmed = rest.trim_start();
            self.pos += rest.len() - trimmed.len();
            let comment = match self.comments {
                Comments::None => false,
                Comments::Hash => trimmed.starts_with('#'),
                Comments::Slashes => trimmed.starts_with("//"),
            };
            if !comment {
                return;
            }
            let line_len = trimmed.find('\n').unwrap_or(trimmed.len());
            self.pos += line_len;
        }
    }

    pub fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.rest().chars().next()
    }

    /// Consumes `token` if the input continues with it.
    pub fn eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    pub fn expect(&mut self, token: &str) -> Result<(), ParseError> {
        if self.eat(token) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{token}`")))
        }
    }

    fn is_ident_start(c: char) -> bool {
        c.is_alphabetic() || c == '_' || c == '⟨'
    }

    fn is_ident_char(c: char, extra: &str) -> bool {
        c.is_alphanumeric() || c == '_' || c == '⟨' || c == '⟩' || extra.contains(c)
    }

    /// Identifier: a letter, `_` or `⟨`, then alphanumerics, `_`, `⟨⟩` and any of `extra`.
    pub fn ident(&mut self, extra: &str) -> Option<&'a str> {
        self.skip_ws();
        let rest = self.rest();
        let mut chars = rest.char_indices();
        match chars.next() {
            Some((_, c)) if Self::is_ident_start(c) => {}
            _ => return None,
        }
        let end = chars
            .find(|&(_, c)| !Self::is_ident_char(c, extra))
            .map_or(rest.len(), |(i, _)| i);
        self.pos += end;
        Some(&rest[..end])
    }

    /// Atom: a nonempty run of alphanumerics, `_` and `-`.
    pub fn atom(&mut self) -> Option<&'a str> {
        self.skip_ws();
        let rest = self.rest();
        let end = rest
            .char_indices()
            .find(|&(_, c)| !(c.is_alphanumeric() || c == '_' || c == '-'))
            .map_or(rest.len(), |(i, _)| i);
        if end == 0 {
            return None;
        }
        self.pos += end;
        Some(&rest[..end])
    }

    /// Optionally signed decimal literal, returned as text.
    pub fn integer(&mut self) -> Option<&'a str> {
        self.skip_ws();
        let rest = self.rest();
        let sign = usize::from(rest.starts_with('-') || rest.starts_with('+'));
        let digits = rest[sign..]
            .char_indices()
            .find(|&(_, c)| !c.is_ascii_digit())
            .map_or(rest.len() - sign, |(i, _)| i);
        if digits == 0 {
            return None;
        }
        self.pos += sign + digits;
        Some(&rest[..sign + digits])
    }

    /// Looks ahead for `word` followed by a non-identifier character.
    pub fn peek_keyword(&mut self, word: &str) -> bool {
        self.skip_ws();
        let rest = self.rest();
        rest.starts_with(word)
            && !rest[word.len()..]
                .chars()
                .next()
                .is_some_and(|c| Self::is_ident_char(c, "."))
    }

    pub fn eat_keyword(&mut self, word: &str) -> bool {
        if self.peek_keyword(word) {
            self.pos += word.len();
            true
        } else {
            false
        }
    }

    pub fn error(&self, message: impl Into<String>) -> ParseError {
        self.error_at(self.pos, message)
    }

    pub fn error_at(&self, pos: usize, message: impl Into<String>) -> ParseError {
        let before = &self.src[..pos.min(self.src.len())];
        let line = before.matches('\n').count() + 1;
        let col = before
            .rfind('\n')
            .map_or(before.chars().count(), |i| before[i + 1..].chars().count())
            + 1;
        ParseError {
            line,
            col,
            message: message.into(),
        }
    }
}
