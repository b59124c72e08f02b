//! Text cleaning and the '#'-headed plain-text document format.

use std::sync::LazyLock;

use regex::Regex;

use super::Section;

/// URLs: scheme://... or www.-prefixed hosts, through the next whitespace.
static URL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)(?:[a-z][a-z0-9+.\-]*://|www\.)\S+").unwrap());

/// Dotted-quad IPv4 shapes, wherever they occur.
static IPV4_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?:\d{1,3}\.){3}\d{1,3}").unwrap());

/// Removes URLs, IPv4-shaped substrings, and non-printable characters, then
/// normalizes whitespace: horizontal runs collapse to single spaces, line edges
/// are trimmed, and blank-line runs collapse to a single blank line. Newlines
/// are preserved as paragraph structure. Idempotent: clean_text(clean_text(s))
/// == clean_text(s).
pub fn clean_text(raw: &str) -> String {
    // Removal can abut previously separated fragments, so run to a fixed point.
    let mut s = raw.to_string();
    loop {
        let next = IPV4_RE.replace_all(&URL_RE.replace_all(&s, ""), "").into_owned();
        if next == s {
            break;
        }
        s = next;
    }
    let s: String = s
        .chars()
        .filter(|c| *c == '\n' || *c == '\t' || !c.is_control())
        .collect();

    let mut blocks: Vec<String> = Vec::new();
    let mut blank_pending = false;
    for line in s.split('\n') {
        let collapsed = line.split_whitespace().collect::<Vec<_>>().join(" ");
        if collapsed.is_empty() {
            blank_pending = !blocks.is_empty();
        } else {
            if blank_pending {
                blocks.push(String::new());
                blank_pending = false;
            }
            blocks.push(collapsed);
        }
    }
    blocks.join("\n")
}

/// Collapses every whitespace run (including newlines) to a single space and
/// trims; used for text that must stay on one line, such as headings.
pub fn collapse_inline(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// True when `text` still contains a URL or IPv4 shape that `clean_text` would
/// remove; clean output never does.
pub fn has_removable_patterns(text: &str) -> bool {
    URL_RE.is_match(text) || IPV4_RE.is_match(text)
}

/// Parses '#'-headed text into sections: a line of N '#' characters plus a
/// space starts a level-N section; consecutive non-blank lines form one
/// paragraph; blank lines separate paragraphs. Content before the first
/// heading becomes a level-1 section with an empty heading.
pub fn parse_structured_text(text: &str) -> Vec<Section> {
    let mut sections: Vec<Section> = Vec::new();
    let mut para: Vec<&str> = Vec::new();

    fn flush_para(sections: &mut Vec<Section>, para: &mut Vec<&str>) {
        if para.is_empty() {
            return;
        }
        if sections.is_empty() {
            sections.push(Section { level: 1, heading: String::new(), paragraphs: Vec::new() });
        }
        sections.last_mut().unwrap().paragraphs.push(para.join("\n"));
        para.clear();
    }

    for line in text.lines() {
        let trimmed = line.trim_end();
        if trimmed.is_empty() {
            flush_para(&mut sections, &mut para);
            continue;
        }
        let hashes = trimmed.chars().take_while(|c| *c == '#').count();
        if hashes >= 1 && trimmed[hashes..].starts_with(' ') {
            flush_para(&mut sections, &mut para);
            sections.push(Section {
                level: hashes as u32,
                heading: trimmed[hashes + 1..].trim().to_string(),
                paragraphs: Vec::new(),
            });
        } else {
            para.push(trimmed);
        }
    }
    flush_para(&mut sections, &mut para);
    sections
}
