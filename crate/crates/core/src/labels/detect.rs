use std::path::Path;

use super::{LabelError, LabelFormat};

/// Decides whether a label is PDS4 XML or PDS3 PVL from its name and first bytes.
pub fn detect_format(filename: &str, head: &[u8]) -> Result<LabelFormat, LabelError> {
    let ext = Path::new(filename)
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    if ext.as_deref() == Some("xml") {
        return Ok(LabelFormat::Pds4Xml);
    }
    let head = head.strip_prefix(b"\xef\xbb\xbf".as_slice()).unwrap_or(head);
    let start = head.iter().position(|b| !b.is_ascii_whitespace()).unwrap_or(head.len());
    let head = &head[start..];
    if head.starts_with(b"<?xml") {
        return Ok(LabelFormat::Pds4Xml);
    }
    if looks_like_pvl(head) {
        return Ok(LabelFormat::Pds3Pvl);
    }
    Err(LabelError::UnrecognizedFormat {
        filename: filename.to_string(),
    })
}

/// True when the first statement has the `KEY =` shape, after any comments.
fn looks_like_pvl(mut head: &[u8]) -> bool {
    loop {
        let start = head.iter().position(|b| !b.is_ascii_whitespace()).unwrap_or(head.len());
        head = &head[start..];
        if head.starts_with(b"/*") {
            match head.windows(2).position(|w| w == b"*/") {
                Some(end) => head = &head[end + 2..],
                None => return false,
            }
        } else {
            break;
        }
    }
    let key_len = head
        .iter()
        .take_while(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b':' | b'^'))
        .count();
    if key_len == 0 || !head[0].is_ascii_alphabetic() && head[0] != b'^' {
        return false;
    }
    head[key_len..]
        .iter()
        .find(|b| !matches!(b, b' ' | b'\t'))
        .is_some_and(|b| *b == b'=')
}
