use std::collections::BTreeMap;

use deidbench::conformance::{compare_conformance, ConformanceFinding, FindingKind};
use deidbench::dicom::{parse_file, serialize_file, tags, DataElement, DataSet, DicomFile, ParseOptions, Tag, Vr};
use deidbench::insertion::shift_date;
use deidbench::instance::InstanceContext;
use deidbench::keyset::{ActionType, Category, MappingKind, MappingTable};
use deidbench::reports::{action_report, aggregate, category_report, scoring_report};
use deidbench::validator::{format_score, Aggregation, CheckResult};
use proptest::prelude::*;

fn text_element() -> impl Strategy<Value = DataElement> {
    let vrs = prop_oneof![Just(Vr::LO), Just(Vr::SH), Just(Vr::CS), Just(Vr::LT), Just(Vr::PN)];
    (0x0011u16..0x0100, vrs, "[A-Z0-9 ^]{0,20}").prop_map(|(elem, vr, v)| {
        DataElement::text(Tag::new(0x0011, elem), vr, v.trim_end().to_string())
    })
}

fn result(series: usize, instance: usize, action: usize, passed: bool) -> CheckResult {
    let actions = [ActionType::TextRemoved, ActionType::DateShifted, ActionType::UidConsistent];
    CheckResult {
        check_passed: passed,
        check_score: if passed { 100.0 } else { 0.0 },
        tag_ds: format!("(0008,{:04X})", action),
        tag_name: String::new(),
        file_value: String::new(),
        answer_value: String::new(),
        action: actions[action % 3],
        action_text: String::new(),
        category: [Category::Hipaa, Category::Dicom, Category::Tcia][action % 3],
        subcategory: "HIPAA-A".into(),
        context: InstanceContext {
            series: format!("S{series}"),
            instance: format!("S{series}.I{instance}"),
            ..InstanceContext::default()
        },
        key_instance: String::new(),
        missing: false,
    }
}

proptest! {
    #[test]
    fn serialize_parse_round_trip(elements in proptest::collection::vec(text_element(), 0..12), uid in "[1-9][0-9]{0,8}") {
        let mut ds: DataSet = elements.into_iter().collect();
        ds.put(DataElement::text(tags::SOP_CLASS_UID, Vr::UI, "1.2.840.10008.5.1.4.1.1.2"));
        ds.put(DataElement::text(tags::SOP_INSTANCE_UID, Vr::UI, format!("2.999.{uid}")));
        let bytes = serialize_file(&DicomFile::new(ds)).unwrap();
        let parsed = parse_file(&bytes, ParseOptions::default()).unwrap();
        prop_assert_eq!(serialize_file(&parsed).unwrap(), bytes);
    }

    #[test]
    fn date_shift_inverts(days in 0i64..60_000, k in -800i32..800) {
        let d = chrono::NaiveDate::from_ymd_opt(1900, 1, 1).unwrap() + chrono::Duration::days(days);
        let da = d.format("%Y%m%d").to_string();
        let there = shift_date(&da, k).unwrap();
        prop_assert_eq!(shift_date(&there, -k).unwrap(), da);
    }

    #[test]
    fn mapping_is_a_bijection(n in 1usize..50) {
        let pairs: Vec<(String, String)> = (0..n).map(|i| (format!("1.2.{i}"), format!("2.999.2.{i}"))).collect();
        let m = MappingTable::from_pairs(MappingKind::Uid, pairs.clone()).unwrap();
        for (old, new) in &pairs {
            prop_assert_eq!(m.get(old), Some(new.as_str()));
            prop_assert_eq!(m.reverse(new), Some(old.as_str()));
        }
    }

    #[test]
    fn report_rows_conserve_counts(cells in proptest::collection::vec((0usize..4, 0usize..6, 0usize..3, any::<bool>()), 0..80)) {
        let mut seen = std::collections::HashSet::new();
        let results: Vec<CheckResult> = cells
            .into_iter()
            .filter(|(s, i, a, _)| seen.insert((*s, *i, *a)))
            .map(|(s, i, a, p)| result(s, i, a, p))
            .collect();
        for unit in [Aggregation::Instance, Aggregation::Series] {
            let units = aggregate(&results, unit);
            let scoring = scoring_report(&units);
            for row in scoring.iter() {
                let n: Vec<usize> = row[1..4].iter().map(|c| c.parse().unwrap()).collect();
                prop_assert_eq!(n[0] + n[1], n[2]);
                prop_assert_eq!(&row[4], &format_score(n[1], n[2]));
            }
            prop_assert_eq!(scoring.last().unwrap()[3].parse::<usize>().unwrap(), units.len());
            let action_total: usize = action_report(&units).iter().map(|r| r[3].parse::<usize>().unwrap()).sum();
            let category_total: usize = category_report(&units).iter().map(|r| r[4].parse::<usize>().unwrap()).sum();
            prop_assert_eq!(action_total, units.len());
            prop_assert_eq!(category_total, units.len());
        }
        let inst = aggregate(&results, Aggregation::Instance);
        let ser = aggregate(&results, Aggregation::Series);
        prop_assert!(ser.iter().filter(|u| u.passed).count() <= inst.iter().filter(|u| u.passed).count());
        prop_assert_eq!(ser.iter().map(|u| u.contributing).sum::<usize>(), results.len());
        for u in &ser {
            let all = results.iter().filter(|r| r.context.series == u.unit && r.action == u.action && r.tag_ds == u.tag).all(|r| r.check_passed);
            prop_assert_eq!(u.passed, all);
        }
    }

    #[test]
    fn score_is_bounded_and_monotone(total in 1usize..1_000_000, a in 0usize..1_000_000, b in 0usize..1_000_000) {
        let (lo, hi) = (a.min(b) % (total + 1), a.max(b) % (total + 1));
        let (lo, hi) = (lo.min(hi), lo.max(hi));
        let value = |s: String| s.trim_end_matches('%').parse::<f64>().unwrap();
        let (x, y) = (value(format_score(lo, total)), value(format_score(hi, total)));
        prop_assert!((0.0..=100.0).contains(&x) && x <= y);
    }

    #[test]
    fn no_regression_when_after_is_subset(codes in proptest::collection::vec(0usize..6, 0..10), keep in proptest::collection::vec(any::<bool>(), 10)) {
        let finding = |c: usize| ConformanceFinding {
            kind: if c.is_multiple_of(2) { FindingKind::Error } else { FindingKind::Warning },
            tag: format!("(0008,{c:04X})"),
            code: format!("code{c}"),
            message: String::new(),
            context: InstanceContext::default(),
        };
        let before: Vec<_> = codes.iter().map(|&c| finding(c)).collect();
        let after: Vec<_> = before.iter().zip(&keep).filter(|(_, k)| **k).map(|(f, _)| f.clone()).collect();
        let b = BTreeMap::from([("I".to_string(), before)]);
        let a = BTreeMap::from([("I".to_string(), after)]);
        prop_assert!(compare_conformance(&b, &a).is_empty());
    }
}
