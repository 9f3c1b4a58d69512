//! Parsing of the extraction reply: a Python-style dictionary literal, one
//! entry per line, or plain `key: value` lines.

use indexmap::IndexMap;

use super::{ExtractionOutcome, NluError, SlotExtraction};
use crate::schema::DomainSchema;

const WRONG_SUFFIXES: [&str; 2] = ["-wrong-or-out-of-domain", "_wrong_or_out_of_domain"];

#[derive(Debug, Clone, PartialEq)]
enum Literal {
    Str(String),
    None,
    List(Vec<Literal>),
}

impl Literal {
    /// Lists collapse to their first element; `None`, `null` and `"None"` are absent.
    fn into_value(self) -> Option<String> {
        match self {
            Literal::Str(s) => {
                let t = s.trim();
                if t.is_empty() || t.eq_ignore_ascii_case("none") || t.eq_ignore_ascii_case("null")
                {
                    None
                } else {
                    Some(t.to_string())
                }
            }
            Literal::None => None,
            Literal::List(items) => items.into_iter().next().and_then(Literal::into_value),
        }
    }
}

/// Parses an extraction reply into an outcome conforming to the schema.
pub fn parse_extraction_response(
    response: &str,
    schema: &DomainSchema,
) -> Result<ExtractionOutcome, NluError> {
    let body = strip_fences(response);
    let entries = if body.trim_start().starts_with('{') {
        DictParser::new(body.trim()).parse_dict()?
    } else {
        parse_lines(body)?
    };

    let mut outcome = ExtractionOutcome::default();
    for spec in schema.extraction_slots() {
        outcome
            .slots
            .insert(spec.caption.clone(), SlotExtraction::default());
    }
    for (key, literal) in entries {
        let key = key.trim().to_string();
        let value = literal.into_value();
        if key == "text_part" || key == "text_part_value" || key == "text_part-variable" {
            outcome.text_part = value.unwrap_or_default();
            continue;
        }
        if let Some(slot) = WRONG_SUFFIXES.iter().find_map(|s| key.strip_suffix(s)) {
            match outcome.slots.get_mut(slot) {
                Some(entry) => entry.wrong_or_out_of_domain = value,
                None => log::warn!("ignoring unknown key `{key}` in extraction response"),
            }
            continue;
        }
        let slot = key.strip_suffix("-variable").unwrap_or(&key);
        match outcome.slots.get_mut(slot) {
            Some(entry) => entry.value = value,
            None => log::warn!("ignoring unknown key `{key}` in extraction response"),
        }
    }
    Ok(outcome.conform(schema))
}

/// Canonical rendering in the same layout the parser accepts.
pub fn render_extraction(outcome: &ExtractionOutcome) -> String {
    let quote = |v: &Option<String>| match v {
        Some(s) => format!("'{}'", s.replace('\\', "\\\\").replace('\'', "\\'")),
        None => "'None'".to_string(),
    };
    let mut lines = Vec::new();
    for (caption, entry) in &outcome.slots {
        lines.push(format!("'{caption}': {}", quote(&entry.value)));
        lines.push(format!(
            "'{caption}-wrong-or-out-of-domain': {}",
            quote(&entry.wrong_or_out_of_domain)
        ));
    }
    let text = if outcome.text_part.is_empty() {
        None
    } else {
        Some(outcome.text_part.clone())
    };
    lines.push(format!("'text_part': {}", quote(&text)));
    format!("{{{}}}", lines.join(",\n"))
}

fn strip_fences(response: &str) -> &str {
    let mut body = response.trim();
    for fence in ["```", "'''"] {
        if let Some(rest) = body.strip_prefix(fence) {
            // Drop an optional language tag on the opening line.
            let rest = match rest.find('\n') {
                Some(nl) if !rest[..nl].contains(['{', ':']) => &rest[nl + 1..],
                _ => rest,
            };
            body = rest.trim();
            if let Some(inner) = body.strip_suffix(fence) {
                body = inner.trim();
            }
        }
    }
    body
}

fn parse_lines(body: &str) -> Result<IndexMap<String, Literal>, NluError> {
    let mut entries = IndexMap::new();
    for line in body.lines() {
        let line = line.trim().trim_end_matches(',');
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once(':')
            .ok_or_else(|| NluError::Parse(format!("line without a key: `{line}`")))?;
        let key = key.trim().trim_matches(['\'', '"']).to_string();
        let value = value.trim();
        let literal = if value.starts_with(['\'', '"', '[']) || value == "None" || value == "null" {
            DictParser::new(value).parse_value()?
        } else {
            Literal::Str(value.to_string())
        };
        entries.insert(key, literal);
    }
    if entries.is_empty() {
        return Err(NluError::Parse("empty response".into()));
    }
    Ok(entries)
}

struct DictParser<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    src: &'a str,
}

impl<'a> DictParser<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            chars: src.char_indices().peekable(),
            src,
        }
    }

    fn err(&self, what: &str) -> NluError {
        NluError::Parse(format!("{what} in `{}`", self.src))
    }

    fn skip_ws(&mut self) {
        while self.chars.peek().is_some_and(|(_, c)| c.is_whitespace()) {
            self.chars.next();
        }
    }

    fn expect(&mut self, want: char) -> Result<(), NluError> {
        self.skip_ws();
        match self.chars.next() {
            Some((_, c)) if c == want => Ok(()),
            _ => Err(self.err(&format!("expected `{want}`"))),
        }
    }

    fn parse_dict(&mut self) -> Result<IndexMap<String, Literal>, NluError> {
        self.expect('{')?;
        let mut entries = IndexMap::new();
        loop {
            self.skip_ws();
            if let Some((_, '}')) = self.chars.peek() {
                self.chars.next();
                break;
            }
            let key = match self.parse_value()? {
                Literal::Str(s) => s,
                _ => return Err(self.err("dictionary key is not a string")),
            };
            self.expect(':')?;
            let value = self.parse_value()?;
            entries.insert(key, value);
            self.skip_ws();
            match self.chars.next() {
                Some((_, ',')) => continue,
                Some((_, '}')) => break,
                _ => return Err(self.err("expected `,` or `}`")),
            }
        }
        self.skip_ws();
        if self.chars.next().is_some() {
            return Err(self.err("trailing characters after dictionary"));
        }
        Ok(entries)
    }

    fn parse_value(&mut self) -> Result<Literal, NluError> {
        self.skip_ws();
        match self.chars.peek().copied() {
            Some((_, q @ ('\'' | '"'))) => {
                self.chars.next();
                self.parse_string(q)
            }
            Some((_, '[')) => {
                self.chars.next();
                let mut items = Vec::new();
                loop {
                    self.skip_ws();
                    if let Some((_, ']')) = self.chars.peek() {
                        self.chars.next();
                        break;
                    }
                    items.push(self.parse_value()?);
                    self.skip_ws();
                    match self.chars.next() {
                        Some((_, ',')) => continue,
                        Some((_, ']')) => break,
                        _ => return Err(self.err("expected `,` or `]`")),
                    }
                }
                Ok(Literal::List(items))
            }
            Some((start, _)) => {
                let mut end = start;
                while let Some(&(i, c)) = self.chars.peek() {
                    if c == ',' || c == '}' || c == ']' || c == '\n' {
                        break;
                    }
                    end = i + c.len_utf8();
                    self.chars.next();
                }
                let bare = self.src[start..end].trim();
                match bare {
                    "" => Err(self.err("missing value")),
                    "None" | "null" => Ok(Literal::None),
                    other => Ok(Literal::Str(other.to_string())),
                }
            }
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn parse_string(&mut self, quote: char) -> Result<Literal, NluError> {
        let mut out = String::new();
        while let Some((_, c)) = self.chars.next() {
            match c {
                '\\' => match self.chars.next() {
                    Some((_, 'n')) => out.push('\n'),
                    Some((_, other)) => out.push(other),
                    None => break,
                },
                c if c == quote => return Ok(Literal::Str(out)),
                c => out.push(c),
            }
        }
        Err(self.err("unterminated string"))
    }
}
