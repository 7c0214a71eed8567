//! Human corrections: validation against the current view and replay over
//! pipeline output.

use std::str::FromStr;

use sarline_core::api::{Correction, CorrectionField, CorrectionRequest};
use sarline_core::domain::{format_value, Qualifier, SarRecord, Unit};
use sarline_core::smiles::parse_smiles;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorrectionError {
    #[error("unknown record {0}")]
    UnknownRecord(String),
    #[error("invalid new value for {field:?}: {reason}")]
    InvalidNewValue { field: CorrectionField, reason: String },
}

fn invalid(field: CorrectionField, reason: impl Into<String>) -> CorrectionError {
    CorrectionError::InvalidNewValue {
        field,
        reason: reason.into(),
    }
}

/// Checks `req` against `record` and returns the value it replaces.
pub fn validate(record: &SarRecord, req: &CorrectionRequest) -> Result<String, CorrectionError> {
    let field = req.field;
    let v = req.new_value.trim();
    if field.targets_activity() {
        let ix = req.activity.unwrap_or(0);
        let Some(a) = record.activities.get(ix) else {
            return Err(invalid(field, format!("record has no activity {ix}")));
        };
        return match field {
            CorrectionField::ActivityValue => match v.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(format_value(a.value)),
                _ => Err(invalid(field, format!("{v:?} is not a finite number"))),
            },
            CorrectionField::Unit => Unit::from_str(v)
                .map(|_| a.unit.symbol().to_string())
                .map_err(|_| invalid(field, format!("unknown unit {v:?}"))),
            _ => Qualifier::from_str(v)
                .map(|_| a.qualifier.symbol().to_string())
                .map_err(|_| invalid(field, format!("unknown qualifier {v:?}"))),
        };
    }
    if req.activity.is_some() {
        return Err(invalid(field, "activity index only applies to activity fields"));
    }
    match field {
        CorrectionField::Smiles => parse_smiles(v)
            .map(|_| record.smiles.clone())
            .map_err(|e| invalid(field, format!("{e:?}"))),
        _ if v.is_empty() => Err(invalid(field, "identifier is empty")),
        _ => Ok(record.coref_id.clone()),
    }
}

/// Writes one validated correction into `record`.
pub fn apply(record: &mut SarRecord, c: &Correction) {
    let v = c.new_value.trim();
    let ix = c.activity.unwrap_or(0);
    match c.field {
        CorrectionField::Smiles => record.smiles = v.to_string(),
        CorrectionField::CorefId => record.coref_id = v.to_string(),
        CorrectionField::ActivityValue => {
            if let (Some(a), Ok(x)) = (record.activities.get_mut(ix), v.parse()) {
                a.value = x;
            }
        }
        CorrectionField::Unit => {
            if let (Some(a), Ok(u)) = (record.activities.get_mut(ix), Unit::from_str(v)) {
                a.unit = u;
            }
        }
        CorrectionField::Qualifier => {
            if let (Some(a), Ok(q)) = (record.activities.get_mut(ix), Qualifier::from_str(v)) {
                a.qualifier = q;
            }
        }
    }
    record.edited = true;
}

/// Current view: `base` with every logged correction applied in order.
pub fn view(base: &[SarRecord], log: &[Correction]) -> Vec<SarRecord> {
    let mut out = base.to_vec();
    for c in log {
        if let Some(r) = out.get_mut(c.record) {
            apply(r, c);
        }
    }
    out
}
