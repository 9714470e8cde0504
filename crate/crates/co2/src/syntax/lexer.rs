use super::SyntaxError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Session(String),
    Ref(String),
    Zero,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Dot,
    Comma,
    Semi,
    Bar,
    Plus,
    OPlus,
    Bang,
    Question,
    Colon,
    Eq,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Session(s) => format!("session `@{s}`"),
            Tok::Ref(s) => format!("contract reference `${s}`"),
            Tok::Zero => "`0`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Bar => "`|`".into(),
            Tok::Plus => "`+`".into(),
            Tok::OPlus => "`(+)`".into(),
            Tok::Bang => "`!`".into(),
            Tok::Question => "`?`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '\''
}

pub(crate) fn lex(src: &str) -> Result<Vec<Token>, SyntaxError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, c: char| {
        *i += 1;
        if c == '\n' {
            *line += 1;
            *col = 1;
        } else {
            *col += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, c);
            continue;
        }
        if c == '#' || (c == '/' && chars.get(i + 1) == Some(&'/')) {
            while i < chars.len() && chars[i] != '\n' {
                let ch = chars[i];
                advance(&mut i, &mut line, &mut col, ch);
            }
            continue;
        }
        let (l0, c0) = (line, col);
        let ident = |i: &mut usize, line: &mut usize, col: &mut usize| {
            let mut s = String::new();
            while *i < chars.len() && is_ident_char(chars[*i]) {
                s.push(chars[*i]);
                advance(i, line, col, chars[*i]);
            }
            s
        };
        let tok = if is_ident_start(c) {
            Tok::Ident(ident(&mut i, &mut line, &mut col))
        } else if c == '@' || c == '$' {
            advance(&mut i, &mut line, &mut col, c);
            if i >= chars.len() || !is_ident_start(chars[i]) {
                return Err(SyntaxError::Parse {
                    line: l0,
                    col: c0,
                    msg: format!("expected a name after `{c}`"),
                });
            }
            let s = ident(&mut i, &mut line, &mut col);
            if c == '@' {
                Tok::Session(s)
            } else {
                Tok::Ref(s)
            }
        } else if c == '(' && chars.get(i + 1) == Some(&'+') && chars.get(i + 2) == Some(&')') {
            for _ in 0..3 {
                let ch = chars[i];
                advance(&mut i, &mut line, &mut col, ch);
            }
            Tok::OPlus
        } else {
            let t = match c {
                '0' => Tok::Zero,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '[' => Tok::LBracket,
                ']' => Tok::RBracket,
                '{' => Tok::LBrace,
                '}' => Tok::RBrace,
                '.' => Tok::Dot,
                ',' => Tok::Comma,
                ';' => Tok::Semi,
                '|' => Tok::Bar,
                '+' => Tok::Plus,
                '!' => Tok::Bang,
                '?' => Tok::Question,
                ':' => Tok::Colon,
                '=' => Tok::Eq,
                _ => {
                    return Err(SyntaxError::Parse {
                        line: l0,
                        col: c0,
                        msg: format!("unexpected character `{c}`"),
                    })
                }
            };
            advance(&mut i, &mut line, &mut col, c);
            if t == Tok::Zero && i < chars.len() && chars[i].is_ascii_alphanumeric() {
                return Err(SyntaxError::Parse {
                    line: l0,
                    col: c0,
                    msg: "numbers other than 0 are not allowed".into(),
                });
            }
            t
        };
        out.push(Token {
            tok,
            line: l0,
            col: c0,
        });
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}
