use super::profile::{ExtractionProfile, FieldRule, LogicalField};
use super::pvl::{LabelTree, Value};
use super::{assemble, check_unit, index_from_i64, ImageMetadata, LabelError, LabelFormat, RmcIndex};

/// Pulls an [`ImageMetadata`] out of a parsed PDS3 label.
///
/// RMC values are aligned by name (`ROVER_MOTION_COUNTER_NAME`) rather than
/// by position, so a label listing `DRIVE` before `SITE` still resolves.
pub fn extract_pds3(tree: &LabelTree, profile: &ExtractionProfile) -> Result<ImageMetadata, LabelError> {
    if profile.format != LabelFormat::Pds3Pvl {
        return Err(LabelError::Profile(format!(
            "{} profile cannot read a PDS3 label",
            profile.format
        )));
    }
    profile.validate()?;
    let rules = &profile.rules;

    let product_id = match lookup(tree, LogicalField::ProductId, &rules.product_id)? {
        Value::Text(s) | Value::Symbol(s) => s.clone(),
        Value::Integer { value, .. } => value.to_string(),
        other => {
            return Err(LabelError::NotNumeric {
                field: LogicalField::ProductId,
                found: format!("{other:?}"),
            })
        }
    };

    let site = integer(tree, profile, LogicalField::Site)?;
    let drive = integer(tree, profile, LogicalField::Drive)?;

    let mut angles = [0.0; 4];
    for (slot, field) in angles.iter_mut().zip([
        LogicalField::AzimuthDeg,
        LogicalField::ElevationDeg,
        LogicalField::HfovDeg,
        LogicalField::VfovDeg,
    ]) {
        *slot = number(tree, profile, field)?;
    }

    assemble(profile, product_id, RmcIndex::new(site, drive), angles, None)
}

fn lookup<'t>(tree: &'t LabelTree, field: LogicalField, rule: &FieldRule) -> Result<&'t Value, LabelError> {
    let missing = || LabelError::MissingField {
        field,
        path: rule.describe(),
    };
    match rule {
        FieldRule::Pvl { path } => tree.lookup(path).ok_or_else(missing),
        FieldRule::PvlIndexed { names, values, name } => {
            let name_seq = tree.lookup(names).ok_or_else(missing)?;
            let value_seq = tree.lookup(values).ok_or_else(missing)?;
            let (Some(name_seq), Some(value_seq)) = (name_seq.as_sequence(), value_seq.as_sequence()) else {
                return Err(LabelError::Profile(format!("{names} and {values} must both be sequences")));
            };
            if name_seq.len() != value_seq.len() {
                return Err(LabelError::LengthMismatch {
                    names: names.clone(),
                    values: values.clone(),
                    name_count: name_seq.len(),
                    value_count: value_seq.len(),
                });
            }
            let mut hits = name_seq
                .iter()
                .zip(value_seq)
                .filter(|(n, _)| n.as_str().is_some_and(|s| s.trim().eq_ignore_ascii_case(name)));
            let (_, v) = hits.next().ok_or_else(missing)?;
            if hits.next().is_some() {
                return Err(LabelError::AmbiguousField {
                    field,
                    path: rule.describe(),
                    count: 2 + hits.count(),
                });
            }
            Ok(v)
        }
        FieldRule::Xml { .. } | FieldRule::XmlIndexed { .. } => {
            Err(LabelError::Profile(format!("XML rule for {field} in a PDS3 profile")))
        }
    }
}

fn integer(tree: &LabelTree, profile: &ExtractionProfile, field: LogicalField) -> Result<u32, LabelError> {
    let value = lookup(tree, field, profile.rules.get(field))?;
    match value {
        Value::Integer { value, .. } => index_from_i64(field, *value),
        // Some archives quote index values.
        Value::Text(s) | Value::Symbol(s) => match s.trim().parse::<i64>() {
            Ok(v) => index_from_i64(field, v),
            Err(_) => Err(LabelError::NotNumeric {
                field,
                found: s.clone(),
            }),
        },
        other => Err(LabelError::InvalidIndex {
            field,
            found: format!("{other:?}"),
        }),
    }
}

fn number(tree: &LabelTree, profile: &ExtractionProfile, field: LogicalField) -> Result<f64, LabelError> {
    let value = lookup(tree, field, profile.rules.get(field))?;
    let (v, unit) = value.as_number().ok_or_else(|| LabelError::NotNumeric {
        field,
        found: match value {
            Value::Text(s) | Value::Symbol(s) => s.clone(),
            other => format!("{other:?}"),
        },
    })?;
    check_unit(profile, field, unit)?;
    Ok(v)
}
