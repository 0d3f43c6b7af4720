use roxmltree::{Document, Node};

use super::profile::{ExtractionProfile, FieldRule, LogicalField};
use super::{assemble, check_unit, index_from_i64, ImageMetadata, LabelError, LabelFormat, RmcIndex};

/// Pulls an [`ImageMetadata`] out of a PDS4 XML label.
pub fn extract_pds4(xml_text: &str, profile: &ExtractionProfile) -> Result<ImageMetadata, LabelError> {
    if profile.format != LabelFormat::Pds4Xml {
        return Err(LabelError::Profile(format!(
            "{} profile cannot read a PDS4 label",
            profile.format
        )));
    }
    profile.validate()?;
    let text = xml_text.strip_prefix('\u{feff}').unwrap_or(xml_text);
    let doc = Document::parse(text).map_err(|e| LabelError::Xml(e.to_string()))?;
    let root = doc.root_element();
    let rules = &profile.rules;

    let product_node = resolve(root, LogicalField::ProductId, &rules.product_id)?;
    let raw_id = node_text(product_node);
    // logical_identifier is a URN; the product id is its last component.
    let product_id = if raw_id.starts_with("urn:") {
        raw_id.rsplit(':').next().unwrap_or_default().to_string()
    } else {
        raw_id.to_string()
    };

    let site_node = resolve(root, LogicalField::Site, &rules.site)?;
    let drive_node = resolve(root, LogicalField::Drive, &rules.drive)?;
    let site = integer(site_node, LogicalField::Site)?;
    let drive = integer(drive_node, LogicalField::Drive)?;

    let frame = profile.frame_child.as_deref().and_then(|child| {
        let group = if matches!(rules.site, FieldRule::XmlIndexed { .. }) {
            site_node.parent_element()?.parent_element()?
        } else {
            site_node.parent_element()?
        };
        let name = NameTest::parse(child);
        group
            .children()
            .find(|c| c.is_element() && name.matches(*c))
            .map(|c| node_text(c).to_string())
    });

    let mut angles = [0.0; 4];
    for (slot, field) in angles.iter_mut().zip([
        LogicalField::AzimuthDeg,
        LogicalField::ElevationDeg,
        LogicalField::HfovDeg,
        LogicalField::VfovDeg,
    ]) {
        let node = resolve(root, field, rules.get(field))?;
        check_unit(profile, field, node.attribute("unit"))?;
        let text = node_text(node);
        *slot = text.parse::<f64>().map_err(|_| LabelError::NotNumeric {
            field,
            found: text.to_string(),
        })?;
    }

    assemble(profile, product_id, RmcIndex::new(site, drive), angles, frame)
}

fn node_text<'a>(node: Node<'a, '_>) -> &'a str {
    node.text().map(str::trim).unwrap_or("")
}

fn integer(node: Node, field: LogicalField) -> Result<u32, LabelError> {
    let text = node_text(node);
    if let Ok(v) = text.parse::<i64>() {
        return index_from_i64(field, v);
    }
    match text.parse::<f64>() {
        Ok(v) if v.fract() == 0.0 && v.abs() < i64::MAX as f64 => index_from_i64(field, v as i64),
        Ok(_) => Err(LabelError::InvalidIndex {
            field,
            found: text.to_string(),
        }),
        Err(_) => Err(LabelError::NotNumeric {
            field,
            found: text.to_string(),
        }),
    }
}

/// Finds the single node carrying the value for `field`.
fn resolve<'a, 'i>(root: Node<'a, 'i>, field: LogicalField, rule: &FieldRule) -> Result<Node<'a, 'i>, LabelError> {
    let missing = || LabelError::MissingField {
        field,
        path: rule.describe(),
    };
    let single = |mut nodes: Vec<Node<'a, 'i>>| match nodes.len() {
        0 => Err(missing()),
        1 => Ok(nodes.remove(0)),
        count => Err(LabelError::AmbiguousField {
            field,
            path: rule.describe(),
            count,
        }),
    };
    match rule {
        FieldRule::Xml { path } => single(PathExpr::parse(path)?.find_all(root)),
        FieldRule::XmlIndexed {
            path,
            id_child,
            value_child,
            id,
        } => {
            let id_test = NameTest::parse(id_child);
            let value_test = NameTest::parse(value_child);
            let entries: Vec<_> = PathExpr::parse(path)?
                .find_all(root)
                .into_iter()
                .filter(|n| {
                    n.children()
                        .any(|c| c.is_element() && id_test.matches(c) && node_text(c) == id)
                })
                .collect();
            let entry = single(entries)?;
            entry
                .children()
                .find(|c| c.is_element() && value_test.matches(*c))
                .ok_or_else(|| LabelError::NotNumeric {
                    field,
                    found: format!("{id} index without {value_child}"),
                })
        }
        FieldRule::Pvl { .. } | FieldRule::PvlIndexed { .. } => {
            Err(LabelError::Profile(format!("PVL rule for {field} in a PDS4 profile")))
        }
    }
}

#[derive(Debug, Clone)]
struct NameTest {
    prefix: Option<String>,
    local: Option<String>,
}

impl NameTest {
    fn parse(s: &str) -> Self {
        let s = s.trim();
        if s == "*" {
            return Self {
                prefix: None,
                local: None,
            };
        }
        match s.split_once(':') {
            Some((p, l)) => Self {
                prefix: Some(p.to_string()),
                local: Some(l.to_string()),
            },
            None => Self {
                prefix: None,
                local: Some(s.to_string()),
            },
        }
    }

    fn matches(&self, node: Node) -> bool {
        if !node.is_element() {
            return false;
        }
        let tag = node.tag_name();
        if let Some(local) = &self.local {
            if tag.name() != local {
                return false;
            }
        }
        match &self.prefix {
            None => true,
            Some(want) => tag
                .namespace()
                .and_then(|ns| node.lookup_prefix(ns))
                .is_some_and(|p| p == want),
        }
    }
}

#[derive(Debug, Clone)]
struct Segment {
    name: NameTest,
    predicate: Option<(NameTest, String)>,
}

impl Segment {
    fn matches(&self, node: Node) -> bool {
        if !self.name.matches(node) {
            return false;
        }
        match &self.predicate {
            None => true,
            Some((child, value)) => node
                .children()
                .any(|c| child.matches(c) && node_text(c) == value),
        }
    }
}

#[derive(Debug, Clone)]
struct PathExpr {
    segments: Vec<Segment>,
}

impl PathExpr {
    fn parse(path: &str) -> Result<Self, LabelError> {
        let bad = || LabelError::Profile(format!("bad XML path '{path}'"));
        let mut segments = Vec::new();
        for raw in split_path(path) {
            let raw = raw.trim();
            if raw.is_empty() {
                return Err(bad());
            }
            let (name, predicate) = match raw.find('[') {
                None => (raw, None),
                Some(open) => {
                    let inner = raw[open + 1..].strip_suffix(']').ok_or_else(bad)?;
                    let (child, value) = inner.split_once('=').ok_or_else(bad)?;
                    (&raw[..open], Some((NameTest::parse(child), value.trim().to_string())))
                }
            };
            segments.push(Segment {
                name: NameTest::parse(name),
                predicate,
            });
        }
        if segments.is_empty() {
            return Err(bad());
        }
        Ok(Self { segments })
    }

    /// All elements whose ancestor chain ends with the path, in document order.
    fn find_all<'a, 'i>(&self, root: Node<'a, 'i>) -> Vec<Node<'a, 'i>> {
        let (last, rest) = self.segments.split_last().expect("non-empty path");
        root.descendants()
            .filter(|n| last.matches(*n))
            .filter(|n| {
                let mut cur = *n;
                for seg in rest.iter().rev() {
                    match cur.parent_element() {
                        Some(p) if seg.matches(p) => cur = p,
                        _ => return false,
                    }
                }
                true
            })
            .collect()
    }
}

/// Splits on `/` outside of predicate brackets.
fn split_path(path: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    for (i, c) in path.char_indices() {
        match c {
            '[' => depth += 1,
            ']' => depth = depth.saturating_sub(1),
            '/' if depth == 0 => {
                parts.push(&path[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&path[start..]);
    parts
}
