use super::error::{ErrorKind, ParseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keyword {
    Norm,
    Exception,
    To,
    Type,
    On,
    Where,
    Then,
    Else,
    Before,
    Compute,
    Create,
    Assert,
    And,
    Not,
}

impl Keyword {
    fn from_word(word: &str) -> Option<Self> {
        Some(match word {
            "NORM" => Keyword::Norm,
            "EXCEPTION" => Keyword::Exception,
            "TO" => Keyword::To,
            "TYPE" => Keyword::Type,
            "ON" => Keyword::On,
            "WHERE" => Keyword::Where,
            "THEN" => Keyword::Then,
            "ELSE" => Keyword::Else,
            "BEFORE" => Keyword::Before,
            "COMPUTE" => Keyword::Compute,
            "CREATE" => Keyword::Create,
            "ASSERT" => Keyword::Assert,
            "AND" => Keyword::And,
            "NOT" => Keyword::Not,
            _ => return None,
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Keyword::Norm => "NORM",
            Keyword::Exception => "EXCEPTION",
            Keyword::To => "TO",
            Keyword::Type => "TYPE",
            Keyword::On => "ON",
            Keyword::Where => "WHERE",
            Keyword::Then => "THEN",
            Keyword::Else => "ELSE",
            Keyword::Before => "BEFORE",
            Keyword::Compute => "COMPUTE",
            Keyword::Create => "CREATE",
            Keyword::Assert => "ASSERT",
            Keyword::And => "AND",
            Keyword::Not => "NOT",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Keyword(Keyword),
    Ident(String),
    Var(String),
    Int(i64),
    Dec(f64),
    Str(String),
    LParen,
    RParen,
    Comma,
    Semi,
    Dot,
    Plus,
    Minus,
    Star,
    Slash,
    Lt,
    Le,
    Eq,
    Ne,
    Ge,
    Gt,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Keyword(k) => format!("`{}`", k.as_str()),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Var(v) => format!("`?{v}`"),
            Tok::Int(i) => format!("`{i}`"),
            Tok::Dec(d) => format!("`{d}`"),
            Tok::Str(s) => format!("'{s}'"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Lt => "`<`".into(),
            Tok::Le => "`<=`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Ne => "`!=`".into(),
            Tok::Ge => "`>=`".into(),
            Tok::Gt => "`>`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

impl Lexer {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, k: usize) -> Option<char> {
        self.chars.get(self.pos + k).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn error(&self, line: usize, col: usize, message: String) -> ParseError {
        ParseError::new(line, col, ErrorKind::Lexical(message))
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' || (c == '/' && self.peek_at(1) == Some('/')) {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    fn word(&mut self) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if !is_ident_char(c) {
                break;
            }
            s.push(c);
            self.bump();
        }
        s
    }

    /// Consumes `a.m.`, `a.m`, `p.m.`, `p.m`, `am` or `pm` after a number
    /// (optionally separated by spaces) and returns whether it was p.m.
    fn meridiem(&mut self) -> Option<bool> {
        let mut k = 0;
        while self.peek_at(k) == Some(' ') {
            k += 1;
        }
        let lower = |c: Option<char>| c.map(|c| c.to_ascii_lowercase());
        let first = lower(self.peek_at(k));
        if first != Some('a') && first != Some('p') {
            return None;
        }
        let pm = first == Some('p');
        let len = if self.peek_at(k + 1) == Some('.') && lower(self.peek_at(k + 2)) == Some('m') {
            if self.peek_at(k + 3) == Some('.') && !self.peek_at(k + 4).is_some_and(is_ident_char) {
                4
            } else {
                3
            }
        } else if k == 0 && lower(self.peek_at(1)) == Some('m') {
            2
        } else {
            return None;
        };
        if self.peek_at(k + len).is_some_and(is_ident_char) {
            return None;
        }
        for _ in 0..k + len {
            self.bump();
        }
        Some(pm)
    }

    fn number(&mut self, line: usize, col: usize) -> Result<Tok, ParseError> {
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() {
                s.push(c);
                self.bump();
            } else {
                break;
            }
        }
        let decimal = self.peek() == Some('.') && self.peek_at(1).is_some_and(|c| c.is_ascii_digit());
        if decimal {
            s.push('.');
            self.bump();
            while let Some(c) = self.peek() {
                if c.is_ascii_digit() {
                    s.push(c);
                    self.bump();
                } else {
                    break;
                }
            }
            return s.parse().map(Tok::Dec).map_err(|_| self.error(line, col, format!("invalid number `{s}`")));
        }
        let n: i64 = s.parse().map_err(|_| self.error(line, col, format!("integer `{s}` out of range")))?;
        match self.meridiem() {
            Some(pm) => {
                if !(1..=12).contains(&n) {
                    return Err(self.error(line, col, format!("`{n}` is not a valid clock hour")));
                }
                Ok(Tok::Int(n % 12 + if pm { 12 } else { 0 }))
            }
            None => Ok(Tok::Int(n)),
        }
    }

    fn string(&mut self, quote: char, line: usize, col: usize) -> Result<Tok, ParseError> {
        self.bump();
        let mut s = String::new();
        loop {
            match self.bump() {
                None | Some('\n') => return Err(self.error(line, col, "unterminated string literal".into())),
                Some('\\') => match self.bump() {
                    Some('n') => s.push('\n'),
                    Some('t') => s.push('\t'),
                    Some(c) => s.push(c),
                    None => return Err(self.error(line, col, "unterminated string literal".into())),
                },
                Some(c) if c == quote => return Ok(Tok::Str(s)),
                Some(c) => s.push(c),
            }
        }
    }

    fn next_token(&mut self) -> Result<Token, ParseError> {
        self.skip_trivia();
        let (line, col) = (self.line, self.col);
        let Some(c) = self.peek() else {
            return Ok(Token { tok: Tok::Eof, line, col });
        };
        let single = |tok| Ok(Some(tok));
        let simple: Result<Option<Tok>, ParseError> = match c {
            '(' => single(Tok::LParen),
            ')' => single(Tok::RParen),
            ',' => single(Tok::Comma),
            ';' => single(Tok::Semi),
            '.' => single(Tok::Dot),
            '+' => single(Tok::Plus),
            '-' => single(Tok::Minus),
            '*' => single(Tok::Star),
            '/' => single(Tok::Slash),
            '≤' => single(Tok::Le),
            '≥' => single(Tok::Ge),
            '≠' => single(Tok::Ne),
            _ => Ok(None),
        };
        if let Some(tok) = simple? {
            self.bump();
            return Ok(Token { tok, line, col });
        }
        let tok = match c {
            '<' => {
                self.bump();
                match self.peek() {
                    Some('=') => {
                        self.bump();
                        Tok::Le
                    }
                    Some('>') => {
                        self.bump();
                        Tok::Ne
                    }
                    _ => Tok::Lt,
                }
            }
            '>' => {
                self.bump();
                if self.peek() == Some('=') {
                    self.bump();
                    Tok::Ge
                } else {
                    Tok::Gt
                }
            }
            '=' => {
                self.bump();
                if self.peek() == Some('=') {
                    self.bump();
                }
                Tok::Eq
            }
            '!' if self.peek_at(1) == Some('=') => {
                self.bump();
                self.bump();
                Tok::Ne
            }
            '?' => {
                self.bump();
                if !self.peek().is_some_and(is_ident_start) {
                    return Err(self.error(line, col, "expected a variable name after `?`".into()));
                }
                Tok::Var(self.word())
            }
            '\'' | '"' => self.string(c, line, col)?,
            c if c.is_ascii_digit() => self.number(line, col)?,
            c if is_ident_start(c) => {
                let w = self.word();
                match Keyword::from_word(&w) {
                    Some(k) => Tok::Keyword(k),
                    None => Tok::Ident(w),
                }
            }
            other => return Err(self.error(line, col, format!("unexpected character `{other}`"))),
        };
        Ok(Token { tok, line, col })
    }
}

/// Splits source text into tokens; the last token is always `Eof`.
pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut lx = Lexer { chars: src.chars().collect(), pos: 0, line: 1, col: 1 };
    let mut out = Vec::new();
    loop {
        let t = lx.next_token()?;
        let eof = t.tok == Tok::Eof;
        out.push(t);
        if eof {
            return Ok(out);
        }
    }
}
