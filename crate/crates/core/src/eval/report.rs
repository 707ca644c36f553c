//! Run reports: a JSON document for machines and an aligned text table whose
//! columns follow the usual balanced/unbalanced comparison layout.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{relative_difference, F1Breakdown, F1Row, FairnessReport};

fn round_to(x: f64, places: i32) -> f64 {
    let scale = 10f64.powi(places);
    let r = (x * scale).round() / scale;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassF1 {
    pub f1_nd: f64,
    pub f1_d: f64,
    pub f1_avg: f64,
}

impl From<&F1Row> for ClassF1 {
    fn from(r: &F1Row) -> Self {
        ClassF1 { f1_nd: round_to(r.f1_nd, 3), f1_d: round_to(r.f1_d, 3), f1_avg: round_to(r.f1_avg, 3) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerGender {
    #[serde(rename = "F", default, skip_serializing_if = "Option::is_none")]
    pub female: Option<ClassF1>,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub male: Option<ClassF1>,
    #[serde(rename = "All")]
    pub all: ClassF1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run_id: String,
    pub model: String,
    pub lambda: usize,
    #[serde(rename = "C")]
    pub conv_filters: usize,
    pub gender_balance: bool,
    pub per_gender: PerGender,
    pub f1_total_avg: f64,
    pub spd: f64,
    pub sufficiency_gap: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diff_percent: Option<f64>,
}

impl RunReport {
    pub fn new(
        run_id: impl Into<String>,
        model: impl Into<String>,
        lambda: usize,
        conv_filters: usize,
        gender_balance: bool,
        f1: &F1Breakdown,
        fairness: &FairnessReport,
    ) -> Self {
        RunReport {
            run_id: run_id.into(),
            model: model.into(),
            lambda,
            conv_filters,
            gender_balance,
            per_gender: PerGender {
                female: f1.female.as_ref().map(ClassF1::from),
                male: f1.male.as_ref().map(ClassF1::from),
                all: ClassF1::from(&f1.all),
            },
            f1_total_avg: round_to(f1.total_avg, 3),
            spd: round_to(fairness.statistical_parity_difference, 3),
            sufficiency_gap: round_to(fairness.sufficiency_gap, 3),
            diff_percent: None,
        }
    }

    fn config_key(&self) -> (&str, usize, usize) {
        (&self.model, self.lambda, self.conv_filters)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub runs: Vec<RunReport>,
}

impl ReportDocument {
    pub fn new(runs: Vec<RunReport>) -> Self {
        let mut doc = ReportDocument { runs };
        doc.pair_differences();
        doc
    }

    /// Fills `diff_percent` on both rows of every unbalanced/balanced pair that
    /// shares model, lambda and C. The difference is taken between the rounded
    /// total averages, as a published table would.
    pub fn pair_differences(&mut self) {
        for r in &mut self.runs {
            r.diff_percent = None;
        }
        for i in 0..self.runs.len() {
            if self.runs[i].gender_balance {
                continue;
            }
            let partner = (0..self.runs.len()).find(|&j| {
                self.runs[j].gender_balance
                    && self.runs[j].diff_percent.is_none()
                    && self.runs[j].config_key() == self.runs[i].config_key()
            });
            let Some(j) = partner else { continue };
            match relative_difference(self.runs[i].f1_total_avg, self.runs[j].f1_total_avg) {
                Ok(d) => {
                    let d = round_to(d, 2);
                    self.runs[i].diff_percent = Some(d);
                    self.runs[j].diff_percent = Some(d);
                }
                Err(e) => log::warn!("runs {} / {}: {e}", self.runs[i].run_id, self.runs[j].run_id),
            }
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}

const HEADERS: [&str; 16] = [
    "Row",
    "Model",
    "lambda",
    "C",
    "Gender Balance",
    "F F1 avg",
    "F F1 (ND)",
    "F F1 (D)",
    "M F1 avg",
    "M F1 (ND)",
    "M F1 (D)",
    "F1 Total Average",
    "Difference (%)",
    "SPD",
    "Sufficiency",
    "Run",
];

fn cells(row: usize, r: &RunReport) -> Vec<String> {
    let f3 = |x: f64| format!("{x:.3}");
    let class = |c: &Option<ClassF1>| match c {
        Some(c) => [f3(c.f1_avg), f3(c.f1_nd), f3(c.f1_d)],
        None => ["-".into(), "-".into(), "-".into()],
    };
    let mut out = vec![
        row.to_string(),
        r.model.clone(),
        r.lambda.to_string(),
        r.conv_filters.to_string(),
        if r.gender_balance { "Y" } else { "N" }.to_string(),
    ];
    out.extend(class(&r.per_gender.female));
    out.extend(class(&r.per_gender.male));
    out.push(f3(r.f1_total_avg));
    out.push(r.diff_percent.map_or_else(|| "-".into(), |d| format!("{d:+.2}")));
    out.push(format!("{:+.3}", r.spd));
    out.push(f3(r.sufficiency_gap));
    out.push(r.run_id.clone());
    out
}

/// Aligned plain-text table, one row per run in document order.
pub fn render_text(doc: &ReportDocument) -> String {
    let rows: Vec<Vec<String>> = doc.runs.iter().enumerate().map(|(i, r)| cells(i + 1, r)).collect();
    let mut widths: Vec<usize> = HEADERS.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let mut line = |cols: &[String]| {
        let joined: Vec<String> = cols.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
        let _ = writeln!(out, "{}", joined.join(" | ").trim_end());
    };
    line(&HEADERS.map(String::from));
    line(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>());
    for row in &rows {
        line(row);
    }
    out
}
