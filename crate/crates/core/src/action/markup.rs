//! A small tolerant scanner for the tag-per-argument response grammar.
//!
//! Agent responses are not XML documents (penalty text, comments, and
//! half-formed selector fragments appear inside arguments), so children are
//! matched by counting nested tags of the same name rather than by a full parser.

const DEFAULT_DELIMITERS: [(&str, &str); 2] = [("<think>", "</think>"), ("<reasoning>", "</reasoning>")];

/// Removes every `open ... close` reasoning span. An unclosed opener is dropped on its own.
pub fn strip_reasoning(text: &str, extra: &[(String, String)]) -> String {
    let mut out = text.to_string();
    let pairs = DEFAULT_DELIMITERS
        .iter()
        .map(|(o, c)| (o.to_string(), c.to_string()))
        .chain(extra.iter().cloned());
    for (open, close) in pairs {
        if open.is_empty() {
            continue;
        }
        let mut from = 0;
        while let Some(pos) = out[from..].find(&open) {
            let start = from + pos;
            match out[start + open.len()..].find(&close) {
                Some(end) => {
                    let stop = start + open.len() + end + close.len();
                    out.replace_range(start..stop, "");
                }
                None => out.replace_range(start..start + open.len(), ""),
            }
            from = start;
        }
    }
    out
}

/// One `<name>text</name>` child element with its raw, trimmed inner text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Child {
    pub name: String,
    pub text: String,
}

fn snippet(s: &str) -> String {
    s.chars().take(60).collect::<String>().replace('\n', " ")
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

/// Finds the `</name>` matching an opening tag whose content begins at `from`.
/// Returns the byte range of the closing tag.
fn matching_close(s: &str, name: &str, from: usize) -> Option<(usize, usize)> {
    let open = format!("<{name}");
    let close = format!("</{name}");
    let mut depth = 1usize;
    let mut i = from;
    while i < s.len() {
        let rest = &s[i..];
        let next_open = rest.find(&open);
        let next_close = rest.find(&close)?;
        match next_open {
            Some(o) if o < next_close => {
                let at = i + o + open.len();
                let boundary = s[at..].chars().next();
                if matches!(boundary, Some(c) if c == '>' || c.is_whitespace() || c == '/') {
                    let tag_end = s[at..].find('>').map(|e| at + e)?;
                    if !s[..tag_end].ends_with('/') {
                        depth += 1;
                    }
                    i = tag_end + 1;
                } else {
                    i = at;
                }
            }
            _ => {
                let at = i + next_close + close.len();
                let boundary = s[at..].chars().next();
                if !matches!(boundary, Some(c) if c == '>' || c.is_whitespace()) {
                    i = at;
                    continue;
                }
                let tag_end = s[at..].find('>').map(|e| at + e)?;
                depth -= 1;
                if depth == 0 {
                    return Some((i + next_close, tag_end + 1));
                }
                i = tag_end + 1;
            }
        }
    }
    None
}

/// Splits `body` into its top-level child elements.
///
/// Errors carry a description and the offending fragment.
pub fn parse_children(body: &str) -> Result<Vec<Child>, (String, String)> {
    let mut children = Vec::new();
    let mut pos = 0;
    loop {
        let rest = &body[pos..];
        let trimmed = rest.trim_start();
        if trimmed.is_empty() {
            break;
        }
        pos += rest.len() - trimmed.len();
        if !trimmed.starts_with('<') {
            return Err(("unexpected text outside argument tags".into(), snippet(trimmed)));
        }
        let name: String = trimmed[1..].chars().take_while(|c| is_name_char(*c)).collect();
        if name.is_empty() {
            return Err(("expected an argument tag".into(), snippet(trimmed)));
        }
        let tag_end = trimmed
            .find('>')
            .ok_or_else(|| (format!("unterminated <{name}> tag"), snippet(trimmed)))?;
        let after_name = &trimmed[1 + name.len()..tag_end];
        if !after_name.is_empty() && !after_name.starts_with(|c: char| c.is_whitespace() || c == '/') {
            return Err(("bad argument tag".into(), snippet(trimmed)));
        }
        if trimmed[..tag_end].ends_with('/') {
            children.push(Child { name, text: String::new() });
            pos += tag_end + 1;
            continue;
        }
        let content_start = pos + tag_end + 1;
        let (close_start, close_end) = matching_close(body, &name, content_start)
            .ok_or_else(|| (format!("missing closing </{name}> tag"), snippet(trimmed)))?;
        children.push(Child { name, text: body[content_start..close_start].trim().to_string() });
        pos = close_end;
    }
    Ok(children)
}
