//! Scenario tables in Markdown or CSV, and side-by-side comparisons.
//!
//! The CSV layout is one row per KPI:
//!
//! ```text
//! section,kpi,label,unit,<scenario>,<scenario>,...
//! ```
//!
//! Numbers are written in shortest round-trip form, so [`parse_csv_report`]
//! gives back the exact values. `meta` rows carry hashes and the tariff,
//! `long_term` rows a readable investment summary.

use std::fmt::Write as _;

use serde::Serialize;

use crate::config::PeakTariff;
use crate::error::{CoreError, Result};
use crate::kpi::{field, KpiRecord, Section, FIELDS};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "md" | "markdown" => Ok(Self::Markdown),
            "csv" => Ok(Self::Csv),
            other => Err(CoreError::Config(format!("unknown report format {other:?} (md, csv)"))),
        }
    }
}

const ECONOMIC: &[&str] = &["total_cost", "overall_cost", "annuity", "fleet_fixed_cost", "away_cost", "unserved_cost", "supply_cost", "supply_revenue"];
const ENERGY: &[&str] = &["pv_mwh", "import_mwh", "export_mwh", "local_mwh", "consumption_mwh", "self_sufficiency", "local_pv_share"];
const GRID: &[&str] = &["max_import_kw", "max_export_kw", "losses_kwh"];
const SHORT_TERM: &[&str] = &["served_mwh", "unserved_kwh", "away_kwh"];
const PEAK: &[&str] = &["total_cost", "peak_cost", "local_mwh", "max_import_kw", "losses_kwh"];

fn has_peak_mode(records: &[KpiRecord]) -> bool {
    records.iter().any(|r| r.peak_tariff != PeakTariff::NoneFixed)
}

fn fmt_value(key: &str, v: f64) -> String {
    match field(key).map(|f| f.unit) {
        Some("-") if key != "discount_rate" => format!("{:.2} %", 100.0 * v),
        Some("MWh/year") => format!("{v:.2}"),
        Some("kWh/year") => format!("{v:.1}"),
        Some("kW") => format!("{v:.2}"),
        _ if key == "discount_rate" => format!("{v}"),
        _ => format!("{v:.0}"),
    }
}

pub fn emit_report(records: &[KpiRecord], format: ReportFormat) -> String {
    match format {
        ReportFormat::Markdown => markdown(records),
        ReportFormat::Csv => csv_report(records),
    }
}

fn table_header(out: &mut String, title: &str, records: &[KpiRecord]) {
    let _ = writeln!(out, "### {title}\n");
    let _ = write!(out, "| Scenario |");
    for r in records {
        let _ = write!(out, " {} |", r.scenario);
    }
    let _ = write!(out, "\n|---|");
    for _ in records {
        let _ = write!(out, "---:|");
    }
    out.push('\n');
}

fn numeric_rows(out: &mut String, keys: &[&str], records: &[KpiRecord]) {
    for key in keys {
        let f = field(key).expect("known KPI");
        let _ = write!(out, "| {} ({}) |", f.label, f.unit);
        for r in records {
            let _ = write!(out, " {} |", fmt_value(key, (f.get)(r)));
        }
        out.push('\n');
    }
}

fn markdown(records: &[KpiRecord]) -> String {
    let mut out = String::from("## Scenario results\n\n");
    for (title, keys) in [("Economic Indicators", ECONOMIC), ("Energy Performances", ENERGY), ("Grid Performances", GRID)] {
        table_header(&mut out, title, records);
        numeric_rows(&mut out, keys, records);
        out.push('\n');
    }
    table_header(&mut out, "Long-Term and Short-Term Mobility", records);
    let _ = write!(out, "| δ^CS |");
    for r in records {
        let _ = write!(out, " {} |", r.investment.station_summary());
    }
    let _ = write!(out, "\n| δ^EV |");
    for r in records {
        let _ = write!(out, " {} |", r.investment.fleet_summary());
    }
    out.push('\n');
    numeric_rows(&mut out, SHORT_TERM, records);
    out.push('\n');
    if has_peak_mode(records) {
        table_header(&mut out, "Peak Tariffs", records);
        numeric_rows(&mut out, PEAK, records);
        out.push('\n');
    }
    out.push_str("Inputs:\n\n");
    for r in records {
        let _ = writeln!(
            out,
            "- {}: config {}, case {}, rho = {}, P^away = {} kW, peak tariff {:?}",
            r.scenario, r.config_hash, r.case_hash, r.discount_rate, r.away_power_kw, r.peak_tariff
        );
    }
    out
}

fn section_name(s: Section) -> &'static str {
    match s {
        Section::Economic => "economic",
        Section::Energy => "energy",
        Section::Grid => "grid",
        Section::ShortTerm => "short_term",
    }
}

fn csv_report(records: &[KpiRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["section".to_string(), "kpi".into(), "label".into(), "unit".into()];
    header.extend(records.iter().map(|r| r.scenario.clone()));
    w.write_record(&header).expect("in-memory write");
    let meta: [(&str, fn(&KpiRecord) -> String); 3] = [
        ("config_hash", |r| r.config_hash.clone()),
        ("case_hash", |r| r.case_hash.clone()),
        ("peak_tariff", |r| format!("{:?}", r.peak_tariff)),
    ];
    for (key, get) in meta {
        let mut row = vec!["meta".to_string(), key.into(), key.into(), String::new()];
        row.extend(records.iter().map(get));
        w.write_record(&row).expect("in-memory write");
    }
    for f in FIELDS {
        let mut row = vec![section_name(f.section).to_string(), f.key.into(), f.label.into(), f.unit.into()];
        row.extend(records.iter().map(|r| (f.get)(r).to_string()));
        w.write_record(&row).expect("in-memory write");
    }
    for (key, label) in [("delta_cs", "δ^CS"), ("delta_ev", "δ^EV")] {
        let mut row = vec!["long_term".to_string(), key.into(), label.into(), String::new()];
        row.extend(records.iter().map(|r| {
            if key == "delta_cs" {
                r.investment.station_summary()
            } else {
                r.investment.fleet_summary()
            }
        }));
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

/// Reads a CSV report back into records: numbers, hashes and tariff. The
/// investment is only summarized in the CSV and comes back empty.
pub fn parse_csv_report(text: &str) -> Result<Vec<KpiRecord>> {
    let bad = |line: usize, msg: String| CoreError::data("report.csv", line, msg);
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| bad(1, e.to_string()))?.clone();
    if header.len() < 5 || &header[0] != "section" || &header[1] != "kpi" {
        return Err(bad(1, "expected section,kpi,label,unit,<scenarios...>".into()));
    }
    let mut records: Vec<KpiRecord> = header.iter().skip(4).map(KpiRecord::blank).collect();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| bad(line, e.to_string()))?;
        if row.len() != header.len() {
            return Err(bad(line, format!("{} fields, header has {}", row.len(), header.len())));
        }
        let key = &row[1];
        for (r, cell) in records.iter_mut().zip(row.iter().skip(4)) {
            match (&row[0], key) {
                ("meta", "config_hash") => r.config_hash = cell.into(),
                ("meta", "case_hash") => r.case_hash = cell.into(),
                ("meta", "peak_tariff") => {
                    r.peak_tariff = match cell {
                        "NoneFixed" => PeakTariff::NoneFixed,
                        "Individual" => PeakTariff::Individual,
                        "Collective" => PeakTariff::Collective,
                        other => return Err(bad(line, format!("unknown peak tariff {other:?}"))),
                    }
                }
                ("long_term", _) => {}
                (_, key) => {
                    let f = field(key).ok_or_else(|| bad(line, format!("unknown KPI {key:?}")))?;
                    let v: f64 = cell.parse().map_err(|_| bad(line, format!("{key}: not a number: {cell:?}")))?;
                    (f.set)(r, v);
                }
            }
        }
    }
    Ok(records)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub key: &'static str,
    pub label: &'static str,
    pub unit: &'static str,
    pub values: Vec<f64>,
    /// Change against the baseline column in %, `None` on a zero baseline.
    pub deltas_pct: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub scenarios: Vec<String>,
    pub baseline: usize,
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn row(&self, key: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.key == key)
    }
}

/// Side by side with % deltas against scenario 1 when present, else the
/// first record. Records from different cases are refused.
pub fn compare_scenarios(records: &[KpiRecord]) -> Result<Comparison> {
    if records.len() < 2 {
        return Err(CoreError::InvalidParameter("comparison needs at least two records".into()));
    }
    if let Some(r) = records.iter().find(|r| r.case_hash != records[0].case_hash) {
        return Err(CoreError::InvalidParameter(format!(
            "{} was run on case {}, {} on case {}",
            r.scenario, r.case_hash, records[0].scenario, records[0].case_hash
        )));
    }
    let baseline = records.iter().position(|r| r.scenario == "s1").unwrap_or(0);
    let rows = FIELDS
        .iter()
        .filter(|f| f.key != "discount_rate" && f.key != "away_power_kw")
        .map(|f| {
            let values: Vec<f64> = records.iter().map(|r| (f.get)(r)).collect();
            let base = values[baseline];
            let deltas_pct = values
                .iter()
                .map(|&v| {
                    if v == base {
                        Some(0.0)
                    } else if base == 0.0 {
                        None
                    } else {
                        Some(100.0 * (v - base) / base.abs())
                    }
                })
                .collect();
            ComparisonRow { key: f.key, label: f.label, unit: f.unit, values, deltas_pct }
        })
        .collect();
    Ok(Comparison { scenarios: records.iter().map(|r| r.scenario.clone()).collect(), baseline, rows })
}

pub fn emit_comparison(cmp: &Comparison, format: ReportFormat) -> String {
    match format {
        ReportFormat::Markdown => {
            let base = &cmp.scenarios[cmp.baseline];
            let mut out = format!("## Scenario comparison (deltas vs {base})\n\n| KPI |");
            for s in &cmp.scenarios {
                let _ = write!(out, " {s} |");
            }
            for (i, s) in cmp.scenarios.iter().enumerate() {
                if i != cmp.baseline {
                    let _ = write!(out, " Δ{s} |");
                }
            }
            out.push_str("\n|---|");
            for _ in 0..2 * cmp.scenarios.len() - 1 {
                out.push_str("---:|");
            }
            out.push('\n');
            for row in &cmp.rows {
                let _ = write!(out, "| {} ({}) |", row.label, row.unit);
                for &v in &row.values {
                    let _ = write!(out, " {} |", fmt_value(row.key, v));
                }
                for (i, d) in row.deltas_pct.iter().enumerate() {
                    if i != cmp.baseline {
                        match d {
                            Some(d) => {
                                let _ = write!(out, " {d:+.1} % |");
                            }
                            None => out.push_str(" n/a |"),
                        }
                    }
                }
                out.push('\n');
            }
            out
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut header = vec!["kpi".to_string(), "unit".into()];
            header.extend(cmp.scenarios.iter().cloned());
            header.extend(cmp.scenarios.iter().map(|s| format!("delta_pct_{s}")));
            w.write_record(&header).expect("in-memory write");
            for row in &cmp.rows {
                let mut rec = vec![row.key.to_string(), row.unit.into()];
                rec.extend(row.values.iter().map(|v| v.to_string()));
                rec.extend(row.deltas_pct.iter().map(|d| d.map_or(String::new(), |d| d.to_string())));
                w.write_record(&rec).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
        }
    }
}
