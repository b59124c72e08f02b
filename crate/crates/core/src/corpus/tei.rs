//! TEI XML parsing: header metadata plus body division/heading/paragraph
//! structure. Tables, figures, formulas, and bibliographic references are
//! dropped; only the textual hierarchy survives.

use quick_xml::events::Event;
use quick_xml::{Reader, XmlVersion};
use thiserror::Error;

use super::text::collapse_inline;
use super::{Section, SourceDocument, SourceKind};

#[derive(Debug, Error)]
pub enum TeiError {
    #[error("malformed XML at byte {offset}: {message}")]
    Malformed { offset: u64, message: String },
    #[error("document has no body content")]
    EmptyDocument,
}

/// Elements whose entire subtree is dropped from the text.
const SKIPPED: &[&[u8]] =
    &[b"figure", b"table", b"listBibl", b"biblStruct", b"ref", b"formula", b"graphic", b"note"];

/// Parses a TEI document into header metadata and a section tree. Heading
/// level equals division nesting depth; paragraphs in an unheaded division
/// merge into the enclosing section.
pub fn parse_tei(xml_text: &str) -> Result<SourceDocument, TeiError> {
    let mut reader = Reader::from_str(xml_text);
    reader.config_mut().expand_empty_elements = true;

    let malformed = |reader: &Reader<&[u8]>, message: String| TeiError::Malformed {
        offset: reader.buffer_position(),
        message,
    };

    let mut stack: Vec<Vec<u8>> = Vec::new();
    let mut skip: u32 = 0;

    let mut doc_id = String::new();
    let mut title = String::new();
    let mut authors: Vec<String> = Vec::new();
    let mut published: Option<String> = None;
    let mut url: Option<String> = None;

    let mut saw_body = false;
    let mut sections: Vec<Section> = Vec::new();
    let mut div_depth: u32 = 0;
    let mut head_buf: Option<String> = None;
    let mut p_buf: Option<String> = None;
    let mut author_buf: Option<Vec<String>> = None;
    let mut title_buf: Option<String> = None;

    let in_ctx = |stack: &[Vec<u8>], name: &[u8]| stack.iter().any(|n| n == name);

    loop {
        let event = match reader.read_event() {
            Ok(ev) => ev,
            Err(e) => return Err(malformed(&reader, e.to_string())),
        };
        match event {
            Event::Start(e) => {
                let name = e.local_name().as_ref().to_vec();
                if skip > 0 {
                    skip += 1;
                    stack.push(name);
                    continue;
                }
                // header biblStructs carry the document's own authorship; only
                // body subtrees are dropped
                if SKIPPED.contains(&name.as_slice()) && !in_ctx(&stack, b"teiHeader") {
                    skip = 1;
                    stack.push(name);
                    continue;
                }
                match name.as_slice() {
                    b"TEI" => {
                        if let Ok(Some(attr)) = e.try_get_attribute("xml:id") {
                            if let Ok(v) = attr.normalized_value(XmlVersion::Implicit1_0) {
                                doc_id = v.trim().to_string();
                            }
                        }
                    }
                    b"body" if in_ctx(&stack, b"text") => saw_body = true,
                    b"div" if in_ctx(&stack, b"body") => div_depth += 1,
                    b"head" if in_ctx(&stack, b"body") => head_buf = Some(String::new()),
                    b"p" if in_ctx(&stack, b"body") => p_buf = Some(String::new()),
                    b"author" if in_ctx(&stack, b"teiHeader") => author_buf = Some(Vec::new()),
                    b"title" if in_ctx(&stack, b"titleStmt") && title.is_empty() => {
                        title_buf = Some(String::new());
                    }
                    b"date" if in_ctx(&stack, b"publicationStmt") && published.is_none() => {
                        if let Ok(Some(attr)) = e.try_get_attribute("when") {
                            if let Ok(v) = attr.normalized_value(XmlVersion::Implicit1_0) {
                                let v = v.trim().to_string();
                                if !v.is_empty() {
                                    published = Some(v);
                                }
                            }
                        }
                    }
                    b"ptr" if in_ctx(&stack, b"publicationStmt") && url.is_none() => {
                        if let Ok(Some(attr)) = e.try_get_attribute("target") {
                            if let Ok(v) = attr.normalized_value(XmlVersion::Implicit1_0) {
                                url = Some(v.trim().to_string());
                            }
                        }
                    }
                    _ => {}
                }
                stack.push(name);
            }
            Event::End(_) => {
                let name = match stack.pop() {
                    Some(n) => n,
                    None => {
                        return Err(malformed(&reader, "unexpected closing tag".into()));
                    }
                };
                if skip > 0 {
                    skip -= 1;
                    continue;
                }
                match name.as_slice() {
                    b"div" if in_ctx(&stack, b"body") => div_depth = div_depth.saturating_sub(1),
                    b"head" => {
                        if let Some(buf) = head_buf.take() {
                            let heading = collapse_inline(&buf);
                            sections.push(Section {
                                level: div_depth.max(1),
                                heading,
                                paragraphs: Vec::new(),
                            });
                        }
                    }
                    b"p" => {
                        if let Some(buf) = p_buf.take() {
                            let para = collapse_inline(&buf);
                            if !para.is_empty() {
                                if sections.is_empty() {
                                    sections.push(Section {
                                        level: 1,
                                        heading: String::new(),
                                        paragraphs: Vec::new(),
                                    });
                                }
                                sections.last_mut().unwrap().paragraphs.push(para);
                            }
                        }
                    }
                    b"author" => {
                        if let Some(parts) = author_buf.take() {
                            let joined = collapse_inline(&parts.join(" "));
                            if !joined.is_empty() {
                                authors.push(joined);
                            }
                        }
                    }
                    b"title" => {
                        if let Some(buf) = title_buf.take() {
                            let t = buf.trim();
                            if !t.is_empty() {
                                title = t.to_string();
                            }
                        }
                    }
                    _ => {}
                }
            }
            Event::Text(e) => {
                if skip > 0 {
                    continue;
                }
                let text = match e.decode() {
                    Ok(t) => t.into_owned(),
                    Err(err) => return Err(malformed(&reader, err.to_string())),
                };
                route_text(
                    &text,
                    &stack,
                    &mut head_buf,
                    &mut p_buf,
                    &mut author_buf,
                    &mut title_buf,
                    &mut published,
                    &mut url,
                );
            }
            Event::CData(e) => {
                if skip > 0 {
                    continue;
                }
                let text = match e.decode() {
                    Ok(t) => t.into_owned(),
                    Err(err) => return Err(malformed(&reader, err.to_string())),
                };
                route_text(
                    &text,
                    &stack,
                    &mut head_buf,
                    &mut p_buf,
                    &mut author_buf,
                    &mut title_buf,
                    &mut published,
                    &mut url,
                );
            }
            Event::GeneralRef(e) => {
                if skip > 0 {
                    continue;
                }
                let resolved = match e.resolve_char_ref() {
                    Ok(Some(c)) => Some(c.to_string()),
                    Ok(None) => match e.decode() {
                        Ok(name) => predefined_entity(&name).map(str::to_string),
                        Err(_) => None,
                    },
                    Err(_) => None,
                };
                if let Some(text) = resolved {
                    route_text(
                        &text,
                        &stack,
                        &mut head_buf,
                        &mut p_buf,
                        &mut author_buf,
                        &mut title_buf,
                        &mut published,
                        &mut url,
                    );
                }
            }
            Event::Eof => {
                if !stack.is_empty() {
                    let open = String::from_utf8_lossy(stack.last().unwrap()).into_owned();
                    return Err(malformed(&reader, format!("unclosed element <{open}>")));
                }
                break;
            }
            _ => {}
        }
    }

    if !saw_body || sections.iter().all(|s| s.heading.is_empty() && s.paragraphs.is_empty()) {
        return Err(TeiError::EmptyDocument);
    }

    if doc_id.is_empty() {
        doc_id = slugify(&title);
    }
    if doc_id.is_empty() {
        doc_id = "untitled".to_string();
    }

    Ok(SourceDocument {
        id: doc_id,
        source: SourceKind::Custom,
        title: collapse_inline(&title),
        authors,
        published,
        url,
        sections,
    })
}

/// Routes character data to whichever buffer the element context selects.
#[allow(clippy::too_many_arguments)]
fn route_text(
    text: &str,
    stack: &[Vec<u8>],
    head_buf: &mut Option<String>,
    p_buf: &mut Option<String>,
    author_buf: &mut Option<Vec<String>>,
    title_buf: &mut Option<String>,
    published: &mut Option<String>,
    url: &mut Option<String>,
) {
    let within = |name: &[u8]| stack.iter().any(|n| n == name);
    let current = |name: &[u8]| stack.last().map(|n| n.as_slice() == name).unwrap_or(false);

    if let Some(buf) = head_buf.as_mut() {
        buf.push_str(text);
    } else if let Some(buf) = p_buf.as_mut() {
        buf.push_str(text);
    } else if let Some(parts) = author_buf.as_mut() {
        if !text.trim().is_empty() {
            parts.push(text.trim().to_string());
        }
    } else if let Some(buf) = title_buf.as_mut() {
        buf.push_str(text);
    } else if current(b"date") && within(b"publicationStmt") && published.is_none() {
        let t = text.trim();
        if !t.is_empty() {
            *published = Some(t.to_string());
        }
    } else if current(b"idno") && within(b"publicationStmt") && url.is_none() {
        let t = text.trim();
        if t.starts_with("http") || t.starts_with("www.") {
            *url = Some(t.to_string());
        }
    }
}

fn predefined_entity(name: &str) -> Option<&'static str> {
    match name {
        "amp" => Some("&"),
        "lt" => Some("<"),
        "gt" => Some(">"),
        "quot" => Some("\""),
        "apos" => Some("'"),
        _ => None,
    }
}

fn slugify(text: &str) -> String {
    let mut out = String::new();
    let mut dash = true;
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            for lc in ch.to_lowercase() {
                out.push(lc);
            }
            dash = false;
        } else if !dash && !out.is_empty() {
            out.push('-');
            dash = true;
        }
    }
    while out.ends_with('-') {
        out.pop();
    }
    out
}
