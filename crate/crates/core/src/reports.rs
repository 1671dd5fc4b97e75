//! Report tables built from a completed results store.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::conformance::ConformanceFinding;
use crate::keyset::{subcategory_is_known, ActionType, Category};
use crate::validator::{format_score, pass_label, Aggregation, CheckResult, ResultsStore};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[cfg(feature = "xlsx")]
    #[error(transparent)]
    Xlsx(#[from] rust_xlsxwriter::XlsxError),
}

pub const DISCREPANCY_HEADER: [&str; 17] = [
    "check_passed",
    "check_score",
    "tag_ds",
    "tag_name",
    "file_value",
    "answer_value",
    "action",
    "action_text",
    "category",
    "subcategory",
    "modality",
    "class",
    "patient",
    "study",
    "series",
    "instance",
    "file_name",
];
pub const SCORING_HEADER: [&str; 5] = ["Category", "Fail", "Pass", "Total", "Score"];
pub const ACTION_HEADER: [&str; 4] = ["Action", "Fail", "Pass", "Total"];
pub const CATEGORY_HEADER: [&str; 5] = ["Category", "Subcategory", "Fail", "Pass", "Total"];
pub const CONFORMANCE_HEADER: [&str; 11] = [
    "type", "tag", "message", "modality", "class", "patient", "study", "series", "instance", "file_name", "file_path",
];

/// Label of the scoring row covering every category.
pub const OVERALL: &str = "Overall";

pub const DISCREPANCY_CSV: &str = "discrepancy_report.csv";
pub const SCORING_CSV: &str = "scoring_report.csv";
pub const ACTION_CSV: &str = "action_report.csv";
pub const CATEGORY_CSV: &str = "category_report.csv";
pub const CONFORMANCE_CSV: &str = "dciodvfy_report.csv";
pub const WORKBOOK: &str = "scoring_report.xlsx";

/// One scored unit: a single result, or every result of one series for one
/// (action, tag) pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AggregatedCheck {
    /// SOP Instance UID or Series Instance UID.
    pub unit: String,
    pub action: ActionType,
    pub tag: String,
    pub category: Category,
    pub subcategory: String,
    pub passed: bool,
    pub contributing: usize,
}

pub fn aggregate(results: &[CheckResult], unit: Aggregation) -> Vec<AggregatedCheck> {
    match unit {
        Aggregation::Instance => results
            .iter()
            .map(|r| AggregatedCheck {
                unit: r.context.instance.clone(),
                action: r.action,
                tag: r.tag_ds.clone(),
                category: r.category,
                subcategory: r.subcategory.clone(),
                passed: r.check_passed,
                contributing: 1,
            })
            .collect(),
        Aggregation::Series => {
            let mut groups: BTreeMap<(&str, ActionType, &str), AggregatedCheck> = BTreeMap::new();
            for r in results {
                groups
                    .entry((&r.context.series, r.action, &r.tag_ds))
                    .and_modify(|g| {
                        g.passed &= r.check_passed;
                        g.contributing += 1;
                    })
                    .or_insert_with(|| AggregatedCheck {
                        unit: r.context.series.clone(),
                        action: r.action,
                        tag: r.tag_ds.clone(),
                        category: r.category,
                        subcategory: r.subcategory.clone(),
                        passed: r.check_passed,
                        contributing: 1,
                    });
            }
            groups.into_values().collect()
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Tally {
    pub pass: usize,
    pub fail: usize,
}

impl Tally {
    pub fn total(&self) -> usize {
        self.pass + self.fail
    }

    fn add(&mut self, passed: bool) {
        if passed {
            self.pass += 1
        } else {
            self.fail += 1
        }
    }

    fn cells(&self) -> [String; 3] {
        [self.fail.to_string(), self.pass.to_string(), self.total().to_string()]
    }
}

pub type Row = Vec<String>;

/// Per-category rows followed by the overall row. Categories with no units
/// are left out.
pub fn scoring_report(units: &[AggregatedCheck]) -> Vec<Row> {
    let mut by: BTreeMap<Category, Tally> = BTreeMap::new();
    let mut all = Tally::default();
    for u in units {
        by.entry(u.category).or_default().add(u.passed);
        all.add(u.passed);
    }
    let row = |name: &str, t: &Tally| {
        let [f, p, n] = t.cells();
        vec![name.to_string(), f, p, n, format_score(t.pass, t.total())]
    };
    let mut rows: Vec<Row> = by.iter().map(|(c, t)| row(c.as_str(), t)).collect();
    rows.push(row(OVERALL, &all));
    rows
}

pub fn action_report(units: &[AggregatedCheck]) -> Vec<Row> {
    let mut by: BTreeMap<&str, Tally> = BTreeMap::new();
    for u in units {
        by.entry(u.action.as_str()).or_default().add(u.passed);
    }
    by.iter()
        .map(|(a, t)| {
            let mut r = vec![a.to_string()];
            r.extend(t.cells());
            r
        })
        .collect()
}

pub fn category_report(units: &[AggregatedCheck]) -> Vec<Row> {
    let mut by: BTreeMap<(Category, &str), Tally> = BTreeMap::new();
    for u in units {
        by.entry((u.category, &u.subcategory)).or_default().add(u.passed);
    }
    by.iter()
        .map(|((c, s), t)| {
            if !subcategory_is_known(*c, s) {
                log::warn!("subcategory {s:?} is not in the {c} vocabulary");
            }
            let mut r = vec![c.to_string(), s.to_string()];
            r.extend(t.cells());
            r
        })
        .collect()
}

/// Failed results only, never aggregated.
pub fn discrepancy_report(results: &[CheckResult]) -> Vec<Row> {
    let mut failed: Vec<&CheckResult> = results.iter().filter(|r| !r.check_passed).collect();
    failed.sort_by(|a, b| {
        let key = |r: &CheckResult| {
            let c = &r.context;
            (c.patient.clone(), c.study.clone(), c.series.clone(), c.instance.clone(), r.tag_ds.clone(), r.action)
        };
        key(a).cmp(&key(b))
    });
    failed
        .into_iter()
        .map(|r| {
            let c = &r.context;
            vec![
                pass_label(r.check_passed).to_string(),
                format!("{:.2}", r.check_score),
                r.tag_ds.clone(),
                r.tag_name.clone(),
                r.file_value.clone(),
                r.answer_value.clone(),
                r.action.to_string(),
                r.action_text.clone(),
                r.category.to_string(),
                r.subcategory.clone(),
                c.modality.clone(),
                c.class.clone(),
                c.patient.clone(),
                c.study.clone(),
                c.series.clone(),
                c.instance.clone(),
                c.file_name.clone(),
            ]
        })
        .collect()
}

pub fn conformance_report(findings: &[ConformanceFinding]) -> Vec<Row> {
    findings
        .iter()
        .map(|f| {
            let c = &f.context;
            vec![
                f.kind.to_string(),
                f.tag.clone(),
                f.message.clone(),
                c.modality.clone(),
                c.class.clone(),
                c.patient.clone(),
                c.study.clone(),
                c.series.clone(),
                c.instance.clone(),
                c.file_name.clone(),
                c.file_path.clone(),
            ]
        })
        .collect()
}

pub fn write_table(path: &Path, header: &[&str], rows: &[Row]) -> Result<(), ReportError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(feature = "xlsx")]
fn write_workbook(path: &Path, tabs: &[(&str, &[&str], &[Row])]) -> Result<(), ReportError> {
    let mut book = rust_xlsxwriter::Workbook::new();
    for (name, header, rows) in tabs {
        let sheet = book.add_worksheet();
        sheet.set_name(*name)?;
        for (c, h) in header.iter().enumerate() {
            sheet.write_string(0, c as u16, *h)?;
        }
        for (r, row) in rows.iter().enumerate() {
            for (c, cell) in row.iter().enumerate() {
                let (r, c) = (r as u32 + 1, c as u16);
                match cell.parse::<u64>() {
                    Ok(n) => sheet.write_number(r, c, n as f64)?,
                    Err(_) => sheet.write_string(r, c, cell)?,
                };
            }
        }
    }
    book.save(path)?;
    Ok(())
}

/// Writes the discrepancy, scoring, action and category reports into `dir`
/// (plus a workbook with the last three as tabs when built with `xlsx`).
/// Returns the written paths.
pub fn write_reports(store: &ResultsStore, unit: Aggregation, dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let units = aggregate(&store.results, unit);
    let scoring = scoring_report(&units);
    let actions = action_report(&units);
    let categories = category_report(&units);
    let mut written = Vec::new();
    for (name, header, rows) in [
        (DISCREPANCY_CSV, &DISCREPANCY_HEADER[..], discrepancy_report(&store.results)),
        (SCORING_CSV, &SCORING_HEADER[..], scoring.clone()),
        (ACTION_CSV, &ACTION_HEADER[..], actions.clone()),
        (CATEGORY_CSV, &CATEGORY_HEADER[..], categories.clone()),
    ] {
        let path = dir.join(name);
        write_table(&path, header, &rows)?;
        written.push(path);
    }
    #[cfg(feature = "xlsx")]
    {
        let path = dir.join(WORKBOOK);
        write_workbook(
            &path,
            &[
                ("Scoring", &SCORING_HEADER, &scoring),
                ("Action", &ACTION_HEADER, &actions),
                ("Category", &CATEGORY_HEADER, &categories),
            ],
        )?;
        written.push(path);
    }
    Ok(written)
}
