//! `url(...)` token scanning for stylesheets and `style` attributes.

/// Outcome of scanning one stylesheet: operands in source order plus the
/// number of `url(` tokens that could not be parsed.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct CssScan {
    pub operands: Vec<String>,
    pub malformed: usize,
}

/// Returns the unquoted, trimmed operand of every `url(...)` token.
///
/// Comments are skipped. Quoted strings outside `url(` are skipped too, so
/// `content: "url(x)"` does not count.
pub fn scan_urls(css: &str) -> CssScan {
    let bytes = css.as_bytes();
    let mut scan = CssScan::default();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'/' if bytes.get(i + 1) == Some(&b'*') => {
                i = css[i + 2..].find("*/").map_or(bytes.len(), |p| i + 2 + p + 2);
            }
            q @ (b'"' | b'\'') => {
                i = skip_string(bytes, i + 1, q);
            }
            b'u' | b'U'
                if bytes.len() >= i + 4
                    && bytes[i..i + 4].eq_ignore_ascii_case(b"url(")
                    && (i == 0 || !is_ident_byte(bytes[i - 1])) =>
            {
                match url_operand(css, i + 4) {
                    Some((operand, next)) => {
                        scan.operands.push(operand);
                        i = next;
                    }
                    None => {
                        scan.malformed += 1;
                        i += 4;
                    }
                }
            }
            _ => i += 1,
        }
    }
    scan
}

fn url_operand(css: &str, from: usize) -> Option<(String, usize)> {
    let bytes = css.as_bytes();
    let mut i = from;
    while i < bytes.len() && is_ws(bytes[i]) {
        i += 1;
    }
    let (value, mut i) = match bytes.get(i)? {
        &q @ (b'"' | b'\'') => {
            let (value, end) = read_string(css, i + 1, q)?;
            (value, end)
        }
        _ => {
            let mut value = String::new();
            let mut j = i;
            while j < bytes.len() && bytes[j] != b')' {
                let c = bytes[j];
                if is_ws(c) {
                    break;
                }
                if matches!(c, b'"' | b'\'' | b'(') {
                    return None;
                }
                if c == b'\\' {
                    let (ch, next) = read_escape(css, j + 1)?;
                    value.push(ch);
                    j = next;
                    continue;
                }
                let ch = css[j..].chars().next()?;
                value.push(ch);
                j += ch.len_utf8();
            }
            (value, j)
        }
    };
    while i < bytes.len() && is_ws(bytes[i]) {
        i += 1;
    }
    if bytes.get(i) != Some(&b')') {
        return None;
    }
    Some((value.trim().to_owned(), i + 1))
}

fn read_string(css: &str, from: usize, quote: u8) -> Option<(String, usize)> {
    let bytes = css.as_bytes();
    let mut value = String::new();
    let mut i = from;
    loop {
        let c = *bytes.get(i)?;
        if c == quote {
            return Some((value, i + 1));
        }
        if c == b'\n' {
            return None;
        }
        if c == b'\\' {
            // Escaped newline is a line continuation.
            if bytes.get(i + 1) == Some(&b'\n') {
                i += 2;
                continue;
            }
            let (ch, next) = read_escape(css, i + 1)?;
            value.push(ch);
            i = next;
            continue;
        }
        let ch = css[i..].chars().next()?;
        value.push(ch);
        i += ch.len_utf8();
    }
}

fn read_escape(css: &str, at: usize) -> Option<(char, usize)> {
    let bytes = css.as_bytes();
    let hex_len = bytes[at..]
        .iter()
        .take(6)
        .take_while(|b| b.is_ascii_hexdigit())
        .count();
    if hex_len > 0 {
        let code = u32::from_str_radix(&css[at..at + hex_len], 16).ok()?;
        let mut next = at + hex_len;
        if bytes.get(next).is_some_and(|&b| is_ws(b)) {
            next += 1;
        }
        return Some((char::from_u32(code).unwrap_or('\u{fffd}'), next));
    }
    let ch = css.get(at..)?.chars().next()?;
    Some((ch, at + ch.len_utf8()))
}

fn skip_string(bytes: &[u8], mut i: usize, quote: u8) -> usize {
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => i += 2,
            b'\n' => return i + 1,
            c if c == quote => return i + 1,
            _ => i += 1,
        }
    }
    bytes.len()
}

fn is_ws(c: u8) -> bool {
    matches!(c, b' ' | b'\t' | b'\n' | b'\r' | b'\x0c')
}

fn is_ident_byte(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'-' || c == b'_' || c >= 0x80
}
