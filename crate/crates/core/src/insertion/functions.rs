//! The insertion function registry.

use chrono::{Days, NaiveDate};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::template::{Function, InsertionRule};
use super::InsertionError;
use crate::conformance::uid_problem;
use crate::identity::SyntheticPatientRecord;
use crate::seeding;

/// What a rule needs to know about the element and patient it acts on.
pub struct RuleContext<'a> {
    pub record: &'a SyntheticPatientRecord,
    /// Current text at the rule's path, if the element exists.
    pub original: Option<&'a str>,
    /// Current Study Date of the instance.
    pub study_date: Option<&'a str>,
    pub org_root: &'a str,
}

/// Result of one function call.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Inserted {
    /// New element text.
    pub value: String,
    /// Part of the value the emitted action concerns.
    pub action_text: String,
    /// Original text that must survive curation, when the rule asks for it.
    pub retained: Option<String>,
}

/// Mints the UID that replaces `original` under `root`. Idempotent: the
/// same inputs always give the same UID.
pub fn mint_uid(root: &str, seed: u64, original: &str) -> Result<String, InsertionError> {
    let n = seeding::hash_u64(&[b"uid", &seed.to_le_bytes(), original.as_bytes()]);
    let uid = format!("{root}.{n}");
    match uid_problem(&uid) {
        Some("uid-too-long") => Err(InsertionError::UidOverflow(uid)),
        Some(_) => Err(InsertionError::FunctionFailure(format!("org root {root:?} is not a valid UID prefix"))),
        None => Ok(uid),
    }
}

/// Calendar-correct day arithmetic on a DA value.
pub fn shift_date(da: &str, days: i32) -> Result<String, InsertionError> {
    let bad = || InsertionError::MalformedDate(da.to_string());
    if da.len() != 8 || !da.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let d = NaiveDate::parse_from_str(da, "%Y%m%d").map_err(|_| bad())?;
    let step = Days::new(u64::from(days.unsigned_abs()));
    let shifted = if days >= 0 { d.checked_add_days(step) } else { d.checked_sub_days(step) };
    Ok(shifted.ok_or_else(bad)?.format("%Y%m%d").to_string())
}

fn digits(rng: &mut ChaCha8Rng, n: usize) -> String {
    (0..n).map(|_| char::from(b'0' + rng.gen_range(0..10u8))).collect()
}

/// Text of one identity attribute of the record.
pub fn identity_field(record: &SyntheticPatientRecord, field: &str) -> Result<String, InsertionError> {
    let p = &record.patient;
    Ok(match field {
        "patient_name" => p.dicom_name(),
        "patient_id" => record.patient_id.clone(),
        "patient_birth_date" => p.birth_date.format("%Y%m%d").to_string(),
        "patient_ssn" => p.ssn_like.clone(),
        "patient_phone" => p.phone.clone(),
        "patient_email" => p.email.clone(),
        "patient_family" => p.family_name.clone(),
        "patient_given" => p.given_name.clone(),
        "physician_name" => record.referring_physician.dicom_name(),
        "physician_family" => record.referring_physician.family_name.clone(),
        "physician_given" => record.referring_physician.given_name.clone(),
        "operator_name" => record.operator.dicom_name(),
        "operator_family" => record.operator.family_name.clone(),
        "operator_given" => record.operator.given_name.clone(),
        "institution_name" => record.institution.name.clone(),
        "institution_department" => record.institution.department.clone(),
        "institution_city" => record.institution.address.city.clone(),
        _ => return Err(InsertionError::UnknownField(field.to_string())),
    })
}

/// Replaces `{field}` placeholders with identity attributes.
pub fn render_placeholders(template: &str, record: &SyntheticPatientRecord) -> Result<String, InsertionError> {
    let mut out = String::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let close = rest[open..]
            .find('}')
            .ok_or_else(|| InsertionError::FunctionFailure(format!("unclosed placeholder in {template:?}")))?;
        out.push_str(&identity_field(record, &rest[open + 1..open + close])?);
        rest = &rest[open + close + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Whether a function's output depends on a random stream (and therefore on
/// the scope entity it is drawn for).
pub fn is_drawn(rule: &InsertionRule) -> bool {
    match rule.function {
        Function::DeviceSerial | Function::Url | Function::IpAddress => true,
        Function::IdentityText => rule.param("field") == Some("accession"),
        _ => false,
    }
}

/// Cache key for drawn values: rules drawing the same kind of value share
/// it within a scope entity.
pub fn draw_label(rule: &InsertionRule) -> String {
    let params: Vec<String> = rule.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!("{:?}:{}", rule.function, params.join(","))
}

/// Runs a rule's function. `rng` is the scope entity's stream and is only
/// consulted by drawn functions.
pub fn apply_function(
    rule: &InsertionRule,
    ctx: &RuleContext,
    seed: u64,
    rng: &mut ChaCha8Rng,
) -> Result<Inserted, InsertionError> {
    let plain = |value: String| Inserted {
        action_text: value.clone(),
        value,
        retained: None,
    };
    let param = |name: &str| {
        rule.param(name)
            .ok_or_else(|| InsertionError::FunctionFailure(format!("{:?} needs parameter {name:?}", rule.function)))
    };
    match rule.function {
        Function::CodedUid => {
            let original = ctx
                .original
                .filter(|o| !o.is_empty())
                .ok_or_else(|| InsertionError::FunctionFailure(format!("no UID at {}", rule.path)))?;
            let uid = mint_uid(rule.param("root").unwrap_or(ctx.org_root), seed, original)?;
            Ok(Inserted {
                value: uid,
                action_text: String::new(),
                retained: None,
            })
        }
        Function::ShiftedDate => {
            let original = ctx.original.unwrap_or("");
            Ok(plain(shift_date(original, ctx.record.date_shift_days)?))
        }
        Function::IdentityText => {
            let field = param("field")?;
            if field == "accession" {
                let date = ctx.study_date.filter(|d| d.len() == 8).unwrap_or("20000101");
                return Ok(plain(format!("{date}E{}", digits(rng, 6))));
            }
            Ok(plain(identity_field(ctx.record, field)?))
        }
        Function::AddressText => {
            let address = match param("field")? {
                "patient" => &ctx.record.patient.address,
                "institution" => &ctx.record.institution.address,
                other => return Err(InsertionError::UnknownField(other.to_string())),
            };
            Ok(plain(address.one_line()))
        }
        Function::FreeText => {
            let phi = render_placeholders(rule.param("phi").unwrap_or(param("text")?), ctx.record)?;
            let text = render_placeholders(&param("text")?.replace("{phi}", "\u{0}"), ctx.record)?.replace('\u{0}', &phi);
            let original = ctx.original.unwrap_or("").trim();
            let value = match rule.param("mode").unwrap_or("replace") {
                "append" if !original.is_empty() => format!("{original} {text}"),
                "append" | "replace" => text,
                other => return Err(InsertionError::FunctionFailure(format!("unknown free_text mode {other:?}"))),
            };
            let retained = (rule.param("retain") == Some("original") && !original.is_empty()).then(|| original.to_string());
            Ok(Inserted {
                value,
                action_text: phi,
                retained,
            })
        }
        Function::DeviceSerial => Ok(plain(format!("{}{}", rule.param("prefix").unwrap_or("SN"), digits(rng, 8)))),
        Function::Url => {
            let city: String = ctx
                .record
                .institution
                .address
                .city
                .chars()
                .filter(char::is_ascii_alphanumeric)
                .collect();
            Ok(plain(format!(
                "https://pacs.{}.example.org/wado?study={}",
                city.to_ascii_lowercase(),
                digits(rng, 10)
            )))
        }
        Function::IpAddress => Ok(plain(format!(
            "10.{}.{}.{}",
            rng.gen_range(0..=255),
            rng.gen_range(0..=255),
            rng.gen_range(1..=254)
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identity::{assign_identity, generate_pool};
    use crate::tokenize::tokenize;
    use std::collections::HashSet;

    /// Days since 0000-03-01 in the proleptic Gregorian calendar, by
    /// counting whole years and months.
    fn day_number(y: i64, m: i64, d: i64) -> i64 {
        let (y, m) = if m <= 2 { (y - 1, m + 12) } else { (y, m) };
        let month_days = [31, 30, 31, 30, 31, 31, 30, 31, 30, 31, 31, 28];
        let mut n = 365 * y + y / 4 - y / 100 + y / 400;
        for md in month_days.iter().take((m - 3) as usize) {
            n += md;
        }
        n + d - 1
    }

    fn parse(da: &str) -> (i64, i64, i64) {
        (da[..4].parse().unwrap(), da[4..6].parse().unwrap(), da[6..].parse().unwrap())
    }

    fn days_between(a: &str, b: &str) -> i64 {
        let (x, y) = (parse(a), parse(b));
        day_number(y.0, y.1, y.2) - day_number(x.0, x.1, x.2)
    }

    #[test]
    fn shifted_dates_match_day_count() {
        assert_eq!(shift_date("20180805", -42).unwrap(), "20180624");
        assert_eq!(days_between("20180805", "20180624"), -42);
        let leap = shift_date("20160229", 365).unwrap();
        assert_eq!(days_between("20160229", &leap), 365);
        assert_eq!(leap, "20170228");
        for (d, s) in [("20000101", -1), ("19991231", 1), ("20240301", -1), ("21000228", 1), ("19720701", 365)] {
            assert_eq!(days_between(d, &shift_date(d, s).unwrap()), i64::from(s), "{d} {s}");
        }
        assert!(matches!(shift_date("2018-08-05", 1), Err(InsertionError::MalformedDate(_))));
        assert!(matches!(shift_date("20180230", 1), Err(InsertionError::MalformedDate(_))));
    }

    #[test]
    fn minted_uids() {
        let root = "3.1.874.1.8955936";
        let a = mint_uid(root, 1, "1.2.3.4").unwrap();
        assert!(a.starts_with("3.1.874.1.8955936."));
        assert_eq!(a, mint_uid(root, 1, "1.2.3.4").unwrap());
        let all: HashSet<String> = (0..1000).map(|i| mint_uid(root, 1, &format!("2.999.{i}")).unwrap()).collect();
        assert_eq!(all.len(), 1000);
        assert!(all.iter().all(|u| uid_problem(u).is_none()));
        assert!(matches!(mint_uid(&"1.2".repeat(25), 1, "1"), Err(InsertionError::UidOverflow(_))));
    }

    fn record() -> SyntheticPatientRecord {
        let pool = generate_pool(5, 10, 3, 20).unwrap();
        assign_identity(&pool, 0, &mut seeding::stream(5, "identity", 0)).unwrap()
    }

    #[test]
    fn identity_text_fields() {
        let r = record();
        assert_eq!(identity_field(&r, "patient_id").unwrap(), r.patient_id);
        let name = identity_field(&r, "patient_name").unwrap();
        assert_eq!(name.split('^').next().unwrap(), r.patient.family_name);
        assert!(matches!(identity_field(&r, "shoe_size"), Err(InsertionError::UnknownField(_))));
        let desc = render_placeholders("CHEST PA DR {physician_family}", &r).unwrap();
        let tokens = tokenize(&desc);
        assert!(tokenize(&r.referring_physician.family_name).iter().all(|t| tokens.contains(t)));
    }
}
