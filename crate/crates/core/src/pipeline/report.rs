use std::io::Write;
use std::str::FromStr;

use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

use super::PipelineError;
use crate::cluster::GridPoint;
use crate::generate::CandidateSentence;
use crate::pmi::PmiScore;
use crate::triple::Triple;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Score,
    Classify,
    Mine,
}

#[derive(Debug, Clone)]
pub struct ScoredTriple {
    pub triple: Triple,
    pub sentence: CandidateSentence,
    pub pmi: PmiScore,
    pub label: Option<bool>,
    pub predicted: Option<bool>,
    pub rank: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub task: TaskKind,
    pub mode: String,
    pub masked_model: String,
    pub causal_model: Option<String>,
    pub lambda: f64,
    pub f1: Option<f64>,
    pub lambda_grid: Option<Vec<GridPoint>>,
    pub rows: Vec<ScoredTriple>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Tsv,
    Json,
}

impl FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tsv" => Ok(ExportFormat::Tsv),
            "json" => Ok(ExportFormat::Json),
            other => Err(format!("unknown export format {other:?}")),
        }
    }
}

const BASE_COLUMNS: [&str; 10] = [
    "relation",
    "head",
    "tail",
    "sentence",
    "cond_tail",
    "marg_tail",
    "cond_head",
    "marg_head",
    "lambda",
    "score",
];

fn fixed(x: f64) -> String {
    format!("{x:.6}")
}

fn tsv_field(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

fn extra_columns(task: TaskKind) -> &'static [&'static str] {
    match task {
        TaskKind::Score => &[],
        TaskKind::Classify => &["label", "predicted"],
        TaskKind::Mine => &["rank"],
    }
}

fn write_tsv<W: Write>(report: &Report, out: &mut W) -> std::io::Result<()> {
    let header: Vec<&str> = BASE_COLUMNS.iter().chain(extra_columns(report.task)).copied().collect();
    writeln!(out, "{}", header.join("\t"))?;
    let flag = |b: Option<bool>| b.map_or(String::new(), |b| u8::from(b).to_string());
    for r in &report.rows {
        let c = &r.pmi.components;
        let mut fields = vec![
            tsv_field(&r.triple.relation),
            tsv_field(&r.triple.head_text()),
            tsv_field(&r.triple.tail_text()),
            tsv_field(&r.sentence.text()),
            fixed(c.cond_tail),
            fixed(c.marg_tail),
            fixed(c.cond_head),
            fixed(c.marg_head),
            fixed(r.pmi.lambda),
            fixed(r.pmi.value),
        ];
        match report.task {
            TaskKind::Score => {}
            TaskKind::Classify => fields.extend([flag(r.label), flag(r.predicted)]),
            TaskKind::Mine => fields.push(r.rank.map_or(String::new(), |k| k.to_string())),
        }
        writeln!(out, "{}", fields.join("\t"))?;
    }
    Ok(())
}

fn fixed6<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if !x.is_finite() {
        return s.serialize_none();
    }
    RawValue::from_string(fixed(*x))
        .map_err(serde::ser::Error::custom)?
        .serialize(s)
}

fn fixed6_opt<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => fixed6(v, s),
        None => s.serialize_none(),
    }
}

#[derive(Serialize)]
struct JsonGridPoint<'a> {
    #[serde(serialize_with = "fixed6")]
    lambda: f64,
    #[serde(serialize_with = "fixed6_opt")]
    aic: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
}

#[derive(Serialize)]
struct JsonRow<'a> {
    relation: &'a str,
    head: String,
    tail: String,
    sentence: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    template: Option<usize>,
    #[serde(serialize_with = "fixed6")]
    cond_tail: f64,
    #[serde(serialize_with = "fixed6")]
    marg_tail: f64,
    #[serde(serialize_with = "fixed6")]
    cond_head: f64,
    #[serde(serialize_with = "fixed6")]
    marg_head: f64,
    #[serde(serialize_with = "fixed6")]
    lambda: f64,
    #[serde(serialize_with = "fixed6")]
    score: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    predicted: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rank: Option<usize>,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    task: TaskKind,
    mode: &'a str,
    masked_model: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    causal_model: Option<&'a str>,
    #[serde(serialize_with = "fixed6")]
    lambda: f64,
    #[serde(serialize_with = "fixed6_opt", skip_serializing_if = "Option::is_none")]
    f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda_grid: Option<Vec<JsonGridPoint<'a>>>,
    rows: Vec<JsonRow<'a>>,
}

fn write_json<W: Write>(report: &Report, out: &mut W) -> Result<(), PipelineError> {
    let doc = JsonReport {
        task: report.task,
        mode: &report.mode,
        masked_model: &report.masked_model,
        causal_model: report.causal_model.as_deref(),
        lambda: report.lambda,
        f1: report.f1,
        lambda_grid: report.lambda_grid.as_ref().map(|g| {
            g.iter()
                .map(|p| JsonGridPoint {
                    lambda: p.lambda,
                    aic: p.aic,
                    error: p.error.as_deref(),
                })
                .collect()
        }),
        rows: report
            .rows
            .iter()
            .map(|r| JsonRow {
                relation: &r.triple.relation,
                head: r.triple.head_text(),
                tail: r.triple.tail_text(),
                sentence: r.sentence.text(),
                template: r.sentence.template.as_ref().map(|t| t.ordinal),
                cond_tail: r.pmi.components.cond_tail,
                marg_tail: r.pmi.components.marg_tail,
                cond_head: r.pmi.components.cond_head,
                marg_head: r.pmi.components.marg_head,
                lambda: r.pmi.lambda,
                score: r.pmi.value,
                label: r.label,
                predicted: r.predicted,
                rank: r.rank,
            })
            .collect(),
    };
    serde_json::to_writer_pretty(&mut *out, &doc).map_err(|e| PipelineError::Io(e.into()))?;
    writeln!(out)?;
    Ok(())
}

/// Write a report with stable field order and six-decimal floats.
pub fn export_report<W: Write>(report: &Report, out: &mut W, format: ExportFormat) -> Result<(), PipelineError> {
    match format {
        ExportFormat::Tsv => write_tsv(report, out)?,
        ExportFormat::Json => write_json(report, out)?,
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::generate_concatenation;
    use crate::pmi::PmiComponents;

    fn report(task: TaskKind, rows: usize) -> Report {
        let t = Triple::new("ferret", "AtLocation", "pet store").unwrap();
        let c = PmiComponents {
            cond_tail: -1.0,
            marg_tail: -3.0,
            cond_head: -2.0,
            marg_head: -3.0,
        };
        Report {
            task,
            mode: "concat".into(),
            masked_model: "m".into(),
            causal_model: None,
            lambda: 1.0,
            f1: (task == TaskKind::Classify).then_some(2.0 / 3.0),
            lambda_grid: None,
            rows: (0..rows)
                .map(|i| ScoredTriple {
                    triple: t.clone(),
                    sentence: generate_concatenation(&t),
                    pmi: PmiScore::new(c, 1.0),
                    label: (task == TaskKind::Classify).then_some(true),
                    predicted: (task == TaskKind::Classify).then_some(false),
                    rank: (task == TaskKind::Mine).then_some(i + 1),
                })
                .collect(),
        }
    }

    fn render(r: &Report, f: ExportFormat) -> String {
        let mut buf = Vec::new();
        export_report(r, &mut buf, f).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn tsv_schema() {
        let text = render(&report(TaskKind::Classify, 1), ExportFormat::Tsv);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "relation\thead\ttail\tsentence\tcond_tail\tmarg_tail\tcond_head\tmarg_head\tlambda\tscore\tlabel\tpredicted"
        );
        assert_eq!(
            lines[1],
            "AtLocation\tferret\tpet store\tferret at location pet store\t-1.000000\t-3.000000\t-2.000000\t-3.000000\t1.000000\t1.500000\t1\t0"
        );
        let mine = render(&report(TaskKind::Mine, 2), ExportFormat::Tsv);
        assert!(mine.lines().next().unwrap().ends_with("\tscore\trank"));
        assert!(mine.lines().nth(2).unwrap().ends_with("\t2"));
    }

    #[test]
    fn empty_report_is_header_only() {
        let text = render(&report(TaskKind::Score, 0), ExportFormat::Tsv);
        assert_eq!(text.lines().count(), 1);
        let json: serde_json::Value =
            serde_json::from_str(&render(&report(TaskKind::Score, 0), ExportFormat::Json)).unwrap();
        assert_eq!(json["rows"].as_array().unwrap().len(), 0);
    }

    #[test]
    fn output_is_deterministic() {
        for f in [ExportFormat::Tsv, ExportFormat::Json] {
            let r = report(TaskKind::Classify, 3);
            assert_eq!(render(&r, f), render(&r, f));
        }
    }

    #[test]
    fn json_uses_fixed_decimals() {
        let text = render(&report(TaskKind::Classify, 1), ExportFormat::Json);
        assert!(text.contains("\"f1\": 0.666667"));
        assert!(text.contains("\"score\": 1.500000"));
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["task"], "classify");
        assert_eq!(v["rows"][0]["label"], true);
    }
}
