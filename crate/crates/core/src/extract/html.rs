//! A tolerant, non-validating HTML tokenizer over raw bytes.
//!
//! Only the ASCII structure of the markup is interpreted, so the scan is
//! correct for UTF-8, Latin-1 and any other ASCII-compatible encoding without
//! decoding the document first. Comments and `<!...>`/`<?...>` declarations are
//! skipped. Raw-text elements (`script`, `style`, ...) are yielded as a single
//! [`Token::RawText`] so their bodies never produce tags.

/// Elements whose content is not markup.
const RAW_TEXT_ELEMENTS: &[&[u8]] = &[
    b"script",
    b"style",
    b"textarea",
    b"title",
    b"xmp",
    b"iframe",
    b"noembed",
    b"noframes",
    b"plaintext",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Attribute<'a> {
    pub name: &'a [u8],
    /// `None` for bare attributes such as `<option selected>`.
    pub value: Option<&'a [u8]>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Token<'a> {
    StartTag {
        name: &'a [u8],
        attrs: Vec<Attribute<'a>>,
        /// Byte offset of `<`.
        start: usize,
        /// Byte offset one past `>` (or the input length for a truncated tag).
        end: usize,
    },
    EndTag {
        name: &'a [u8],
        start: usize,
        end: usize,
    },
    RawText {
        element: &'a [u8],
        text: &'a [u8],
        start: usize,
    },
}

impl<'a> Token<'a> {
    pub fn is_start_tag(&self, tag: &str) -> bool {
        matches!(self, Token::StartTag { name, .. } if name.eq_ignore_ascii_case(tag.as_bytes()))
    }
}

pub struct Tokenizer<'a> {
    input: &'a [u8],
    pos: usize,
    raw_element: Option<&'a [u8]>,
}

impl<'a> Tokenizer<'a> {
    pub fn new(input: &'a [u8]) -> Self {
        Tokenizer {
            input,
            pos: 0,
            raw_element: None,
        }
    }

    fn raw_text(&mut self, element: &'a [u8]) -> Token<'a> {
        let start = self.pos;
        let end = find_end_tag(self.input, start, element).unwrap_or(self.input.len());
        self.pos = end;
        Token::RawText {
            element,
            text: &self.input[start..end],
            start,
        }
    }

    fn start_tag(&mut self, lt: usize) -> Token<'a> {
        let input = self.input;
        let name_start = lt + 1;
        let mut i = name_start;
        while i < input.len() && !is_space(input[i]) && input[i] != b'/' && input[i] != b'>' {
            i += 1;
        }
        let name = &input[name_start..i];
        let mut attrs = Vec::new();

        loop {
            while i < input.len() && (is_space(input[i]) || input[i] == b'/') {
                i += 1;
            }
            if i >= input.len() {
                break;
            }
            if input[i] == b'>' {
                i += 1;
                break;
            }

            let attr_start = i;
            // A leading '=' belongs to the name, as in the HTML tokenizer.
            i += 1;
            while i < input.len()
                && !is_space(input[i])
                && !matches!(input[i], b'/' | b'>' | b'=')
            {
                i += 1;
            }
            let attr_name = &input[attr_start..i];

            let mut j = skip_space(input, i);
            if j < input.len() && input[j] == b'=' {
                j = skip_space(input, j + 1);
                let (value, next) = attribute_value(input, j);
                attrs.push(Attribute {
                    name: attr_name,
                    value: Some(value),
                });
                i = next;
            } else {
                attrs.push(Attribute {
                    name: attr_name,
                    value: None,
                });
            }
        }

        if RAW_TEXT_ELEMENTS.iter().any(|e| name.eq_ignore_ascii_case(e)) {
            self.raw_element = Some(name);
        }
        self.pos = i;
        Token::StartTag {
            name,
            attrs,
            start: lt,
            end: i,
        }
    }

    fn end_tag(&mut self, lt: usize) -> Token<'a> {
        let input = self.input;
        let name_start = lt + 2;
        let mut i = name_start;
        while i < input.len() && !is_space(input[i]) && input[i] != b'/' && input[i] != b'>' {
            i += 1;
        }
        let name = &input[name_start..i];
        let end = match memchr(b'>', input, i) {
            Some(gt) => gt + 1,
            None => input.len(),
        };
        self.pos = end;
        Token::EndTag {
            name,
            start: lt,
            end,
        }
    }
}

impl<'a> Iterator for Tokenizer<'a> {
    type Item = Token<'a>;

    fn next(&mut self) -> Option<Token<'a>> {
        if let Some(element) = self.raw_element.take() {
            if self.pos < self.input.len() {
                return Some(self.raw_text(element));
            }
        }
        let input = self.input;
        loop {
            let lt = memchr(b'<', input, self.pos)?;
            let next = input.get(lt + 1).copied();
            match next {
                Some(b'!') if input[lt..].starts_with(b"<!--") => {
                    // `<!-->` and `<!--->` close immediately.
                    let body = lt + 4;
                    self.pos = if input[body..].starts_with(b">") {
                        body + 1
                    } else if input[body..].starts_with(b"->") {
                        body + 2
                    } else {
                        find(input, body, b"-->").map_or(input.len(), |e| e + 3)
                    };
                }
                Some(b'!') | Some(b'?') => {
                    self.pos = memchr(b'>', input, lt + 2).map_or(input.len(), |e| e + 1);
                }
                Some(b'/') if input.get(lt + 2).is_some_and(u8::is_ascii_alphabetic) => {
                    return Some(self.end_tag(lt));
                }
                Some(c) if c.is_ascii_alphabetic() => {
                    return Some(self.start_tag(lt));
                }
                _ => self.pos = lt + 1,
            }
        }
    }
}

fn attribute_value(input: &[u8], at: usize) -> (&[u8], usize) {
    match input.get(at) {
        Some(&q @ (b'"' | b'\'')) => match memchr(q, input, at + 1) {
            Some(close) => (&input[at + 1..close], close + 1),
            None => (&input[at + 1..], input.len()),
        },
        Some(_) => {
            let mut i = at;
            while i < input.len() && !is_space(input[i]) && input[i] != b'>' {
                i += 1;
            }
            (&input[at..i], i)
        }
        None => (&input[at..at], at),
    }
}

/// Finds `</element` followed by a tag-name terminator, case-insensitively.
fn find_end_tag(input: &[u8], from: usize, element: &[u8]) -> Option<usize> {
    let mut i = from;
    while let Some(lt) = memchr(b'<', input, i) {
        let name_at = lt + 2;
        let name_end = name_at + element.len();
        if input.get(lt + 1) == Some(&b'/')
            && name_end <= input.len()
            && input[name_at..name_end].eq_ignore_ascii_case(element)
            && input
                .get(name_end)
                .is_none_or(|&c| is_space(c) || c == b'/' || c == b'>')
        {
            return Some(lt);
        }
        i = lt + 1;
    }
    None
}

pub(crate) fn is_space(c: u8) -> bool {
    matches!(c, b' ' | b'\t' | b'\n' | b'\r' | b'\x0c')
}

fn skip_space(input: &[u8], mut i: usize) -> usize {
    while i < input.len() && is_space(input[i]) {
        i += 1;
    }
    i
}

fn memchr(needle: u8, haystack: &[u8], from: usize) -> Option<usize> {
    haystack
        .get(from..)?
        .iter()
        .position(|&c| c == needle)
        .map(|p| p + from)
}

fn find(haystack: &[u8], from: usize, needle: &[u8]) -> Option<usize> {
    haystack
        .get(from..)?
        .windows(needle.len())
        .position(|w| w == needle)
        .map(|p| p + from)
}
