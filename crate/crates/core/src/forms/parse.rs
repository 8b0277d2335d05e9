use super::{AtomId, Form, RegistryKey};
use crate::{Error, Result};

/// Nesting limit for [`parse_form`]; deeper input is rejected rather than
/// risking stack exhaustion.
pub const MAX_PARSE_DEPTH: usize = 256;

/// Parse the text produced by [`super::render`]. Whitespace between tokens
/// is ignored.
pub fn parse_form(text: &str) -> Result<Form> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
    };
    let form = p.form(0)?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.error("trailing input"));
    }
    Ok(form)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> Error {
        Error::FormSyntax {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, byte: u8) -> Result<()> {
        if self.peek() == Some(byte) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected '{}'", byte as char)))
        }
    }

    fn number(&mut self) -> Result<u64> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected digits"));
        }
        // digits are ASCII, so the slice is valid UTF-8
        std::str::from_utf8(&self.src[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| self.error("number out of range"))
    }

    fn form(&mut self, depth: usize) -> Result<Form> {
        if depth > MAX_PARSE_DEPTH {
            return Err(self.error("nesting too deep"));
        }
        match self.peek() {
            Some(b'0') => {
                self.pos += 1;
                Ok(Form::Void)
            }
            Some(b'(') => {
                self.pos += 1;
                self.expect(b')')?;
                Ok(Form::Mark)
            }
            Some(b'A') => {
                self.pos += 1;
                let n = self.number()?;
                let id = usize::try_from(n).map_err(|_| self.error("atom id out of range"))?;
                Ok(Form::Atom(AtomId(id)))
            }
            Some(b'@') => {
                self.pos += 1;
                let n = self.number()?;
                let key = u32::try_from(n).map_err(|_| self.error("registry key out of range"))?;
                Ok(Form::ReEntry(RegistryKey(key)))
            }
            Some(b'~') => {
                self.pos += 1;
                self.expect(b'(')?;
                let inner = self.form(depth + 1)?;
                self.expect(b')')?;
                Ok(Form::cross(inner))
            }
            Some(b'|') => {
                self.pos += 1;
                self.expect(b'[')?;
                if self.peek() == Some(b']') {
                    return Err(self.error("call needs at least one child"));
                }
                let mut children = vec![self.form(depth + 1)?];
                loop {
                    match self.peek() {
                        Some(b',') => {
                            self.pos += 1;
                            children.push(self.form(depth + 1)?);
                        }
                        Some(b']') => {
                            self.pos += 1;
                            return Ok(Form::Call(children));
                        }
                        _ => return Err(self.error("expected ',' or ']'")),
                    }
                }
            }
            Some(_) => Err(self.error("unexpected character")),
            None => Err(self.error("unexpected end of input")),
        }
    }
}
