//! Scoring predictions against gold annotations.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::casefold;
use crate::gateway::CostRow;
use crate::schema::{default_answer, AnswerType, Category, Schema, ValidationGroup};
use crate::validate::{MetadataRecord, RecordError};
use crate::value::{AnswerValue, KeyedRow, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("gold file: {0}")]
    Json(String),
    #[error("gold metadata: {0}")]
    Record(#[from] RecordError),
    #[error("gold `exists` is missing attribute `{0}`")]
    MissingExists(String),
    #[error("gold `exists` has unknown attribute `{0}`")]
    UnknownExists(String),
    #[error("category mismatch: prediction is {pred}, gold is {gold}")]
    CategoryMismatch { pred: Category, gold: Category },
    #[error("nothing to aggregate")]
    Empty,
}

/// Annotated values plus, per attribute, whether the paper itself states it.
#[derive(Debug, Clone, PartialEq)]
pub struct GoldRecord {
    pub category: Category,
    pub paper_id: String,
    pub publication_year: Option<i32>,
    pub values: MetadataRecord,
    pub exists: Vec<(String, bool)>,
}

impl GoldRecord {
    pub fn exists(&self, name: &str) -> bool {
        self.exists.iter().any(|(n, e)| n == name && *e)
    }

    /// Reads `{"category", "paper_id", "publication_year"?, "metadata", "exists"}`.
    pub fn from_json_str(raw: &str, schema: &Schema) -> Result<Self, EvalError> {
        let v: Value = serde_json::from_str(raw).map_err(|e| EvalError::Json(e.to_string()))?;
        let field = |k: &str| v.get(k).ok_or_else(|| EvalError::Json(format!("missing `{k}`")));
        let code = field("category")?.as_str().ok_or_else(|| EvalError::Json("`category` must be a string".into()))?;
        let category = Category::from_code(code).ok_or_else(|| EvalError::Json(format!("unknown category `{code}`")))?;
        if category != schema.category {
            return Err(EvalError::CategoryMismatch { pred: schema.category, gold: category });
        }
        let paper_id = field("paper_id")?
            .as_str()
            .ok_or_else(|| EvalError::Json("`paper_id` must be a string".into()))?
            .to_owned();
        let publication_year = match v.get("publication_year") {
            None | Some(Value::Null) => None,
            Some(y) => Some(
                y.as_i64()
                    .and_then(|y| i32::try_from(y).ok())
                    .ok_or_else(|| EvalError::Json("`publication_year` must be an integer".into()))?,
            ),
        };
        let meta = field("metadata")?
            .as_object()
            .ok_or_else(|| EvalError::Json("`metadata` must be an object".into()))?;
        let values = MetadataRecord::from_json_object(meta, schema)?;
        let ex = field("exists")?
            .as_object()
            .ok_or_else(|| EvalError::Json("`exists` must be an object".into()))?;
        if let Some(k) = ex.keys().find(|k| schema.get(k).is_none()) {
            return Err(EvalError::UnknownExists(k.clone()));
        }
        let mut exists = Vec::with_capacity(schema.len());
        for name in schema.names() {
            let bit = match ex.get(name) {
                Some(Value::Bool(b)) => *b,
                Some(Value::Number(n)) if n.as_u64() == Some(0) => false,
                Some(Value::Number(n)) if n.as_u64() == Some(1) => true,
                Some(_) => return Err(EvalError::Json(format!("exists[`{name}`] must be 0 or 1"))),
                None => return Err(EvalError::MissingExists(name.to_owned())),
            };
            exists.push((name.to_owned(), bit));
        }
        Ok(GoldRecord {
            category,
            paper_id,
            publication_year,
            values,
            exists,
        })
    }

    pub fn to_json_string(&self) -> String {
        let mut out = format!("{{\n    \"category\": \"{}\",\n", self.category.code());
        out.push_str(&format!("    \"paper_id\": {},\n", Value::String(self.paper_id.clone())));
        if let Some(y) = self.publication_year {
            out.push_str(&format!("    \"publication_year\": {y},\n"));
        }
        out.push_str("    \"metadata\": ");
        out.push_str(&self.values.to_json_string().replace('\n', "\n    "));
        out.push_str(",\n    \"exists\": {");
        for (i, (n, e)) in self.exists.iter().enumerate() {
            let sep = if i == 0 { "" } else { "," };
            out.push_str(&format!("{sep}\n        {}: {}", Value::String(n.clone()), u8::from(*e)));
        }
        out.push_str("\n    }\n}\n");
        out
    }
}

fn numbers_match(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

fn url_key(u: &str) -> &str {
    let u = u.trim();
    u.strip_suffix('/').unwrap_or(u)
}

fn scalars_match(a: &Scalar, b: &Scalar) -> bool {
    match (a, b) {
        (Scalar::Text(x), Scalar::Text(y)) => casefold(x) == casefold(y),
        (Scalar::Number(x), Scalar::Number(y)) => numbers_match(*x, *y),
        (Scalar::Flag(x), Scalar::Flag(y)) => x == y,
        _ => false,
    }
}

fn rows_match(a: &KeyedRow, b: &KeyedRow) -> bool {
    a.0.len() == b.0.len() && a.0.iter().all(|(k, v)| b.get(k).is_some_and(|w| scalars_match(v, w)))
}

/// Size of the symmetric difference of two collections treated as sets
/// under `eq`.
fn symmetric_difference<T>(a: &[T], b: &[T], eq: impl Fn(&T, &T) -> bool) -> usize {
    let dedup = |xs: &[T]| -> Vec<usize> {
        (0..xs.len())
            .filter(|&i| !xs[..i].iter().any(|y| eq(&xs[i], y)))
            .collect()
    };
    let (da, db) = (dedup(a), dedup(b));
    let only_a = da.iter().filter(|&&i| !b.iter().any(|y| eq(&a[i], y))).count();
    let only_b = db.iter().filter(|&&i| !a.iter().any(|y| eq(&b[i], y))).count();
    only_a + only_b
}

/// 1 when `pred` matches `gold`, else 0. Lists match when their symmetric
/// difference as case-folded sets has at most one element.
pub fn match_values(pred: &AnswerValue, gold: &AnswerValue, _answer_type: &AnswerType) -> f64 {
    let hit = match (pred, gold) {
        (AnswerValue::Text(a), AnswerValue::Text(b)) => casefold(a) == casefold(b),
        (AnswerValue::Url(a), AnswerValue::Url(b)) => url_key(a) == url_key(b),
        (AnswerValue::Year(a), AnswerValue::Year(b)) => a == b,
        (AnswerValue::Number(a), AnswerValue::Number(b)) => numbers_match(*a, *b),
        (AnswerValue::Flag(a), AnswerValue::Flag(b)) => a == b,
        (AnswerValue::TextList(a), AnswerValue::TextList(b)) => {
            let fa: Vec<String> = a.iter().map(|s| casefold(s)).collect();
            let fb: Vec<String> = b.iter().map(|s| casefold(s)).collect();
            symmetric_difference(&fa, &fb, |x, y| x == y) <= 1
        }
        (AnswerValue::KeyedRecordList(a), AnswerValue::KeyedRecordList(b)) => symmetric_difference(a, b, rows_match) <= 1,
        _ => false,
    };
    if hit {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttributeMatch {
    pub attribute: String,
    pub group: ValidationGroup,
    pub exists: bool,
    pub emitted: bool,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PaperScore {
    pub paper_id: String,
    pub category: Category,
    pub publication_year: Option<i32>,
    pub matches: Vec<AttributeMatch>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn ratio(num: f64, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num / den as f64
    }
}

/// Scores the attributes that carry a validation group. Recall is over
/// attributes the paper states; precision is over attributes the
/// prediction fills with a non-default value.
pub fn score_paper(rec: &MetadataRecord, gold: &GoldRecord, schema: &Schema) -> Result<PaperScore, EvalError> {
    if rec.category != gold.category {
        return Err(EvalError::CategoryMismatch {
            pred: rec.category,
            gold: gold.category,
        });
    }
    let mut matches = Vec::new();
    for spec in &schema.attributes {
        let Some(group) = spec.validation_group else { continue };
        let default = default_answer(spec);
        let pred = rec.get(&spec.name).unwrap_or(&default);
        let truth = gold.values.get(&spec.name).unwrap_or(&default);
        matches.push(AttributeMatch {
            attribute: spec.name.clone(),
            group,
            exists: gold.exists(&spec.name),
            emitted: *pred != default,
            score: match_values(pred, truth, &spec.answer_type),
        });
    }
    let sum_where = |f: &dyn Fn(&AttributeMatch) -> bool| -> (f64, usize) {
        matches
            .iter()
            .filter(|m| f(m))
            .fold((0.0, 0), |(s, n), m| (s + m.score, n + 1))
    };
    let (rs, rn) = sum_where(&|m| m.exists);
    let (ps, pn) = sum_where(&|m| m.emitted);
    let (precision, recall) = (ratio(ps, pn), ratio(rs, rn));
    Ok(PaperScore {
        paper_id: gold.paper_id.clone(),
        category: gold.category,
        publication_year: gold.publication_year,
        matches,
        precision,
        recall,
        f1: f1_score(precision, recall),
    })
}

/// Fraction of schema attributes whose answer length lies within bounds.
pub fn length_adherence(rec: &MetadataRecord, schema: &Schema) -> f64 {
    if schema.is_empty() {
        return 1.0;
    }
    let ok = schema
        .attributes
        .iter()
        .filter(|spec| {
            let default = default_answer(spec);
            let v = rec.get(&spec.name).unwrap_or(&default);
            spec.length_in_bounds(spec.answer_length(v))
        })
        .count();
    ok as f64 / schema.len() as f64
}

/// `Σ value·weight / Σ weight`; `None` when the weights sum to zero.
pub fn weighted_average(items: &[(f64, usize)]) -> Option<f64> {
    let total: usize = items.iter().map(|(_, n)| n).sum();
    (total > 0).then(|| items.iter().map(|(v, n)| v * *n as f64).sum::<f64>() / total as f64)
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryScore {
    pub category: Category,
    pub papers: usize,
    pub scores: Prf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeScore {
    pub attribute: String,
    pub group: ValidationGroup,
    pub papers: usize,
    /// Mean match rate, 0 to 100.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdherenceRow {
    pub profile: String,
    pub adherence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub papers: usize,
    pub categories: Vec<CategoryScore>,
    /// Category scores weighted by paper count.
    pub overall: Prf,
    pub groups: Vec<(ValidationGroup, f64)>,
    pub attributes: Vec<AttributeScore>,
    pub length_adherence: Vec<AdherenceRow>,
    pub cost: Vec<CostRow>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ReportFilter {
    /// Keep only papers published strictly after this year.
    pub year_after: Option<i32>,
}

pub fn aggregate_report(scores: &[PaperScore], filter: &ReportFilter) -> Result<ScoreReport, EvalError> {
    let kept: Vec<&PaperScore> = scores
        .iter()
        .filter(|s| filter.year_after.is_none_or(|y| s.publication_year.is_some_and(|p| p > y)))
        .collect();
    if kept.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut categories = Vec::new();
    for cat in Category::ALL {
        let papers: Vec<&&PaperScore> = kept.iter().filter(|s| s.category == cat).collect();
        if papers.is_empty() {
            continue;
        }
        categories.push(CategoryScore {
            category: cat,
            papers: papers.len(),
            scores: Prf {
                precision: mean(papers.iter().map(|s| s.precision)),
                recall: mean(papers.iter().map(|s| s.recall)),
                f1: mean(papers.iter().map(|s| s.f1)),
            },
        });
    }
    let weighted = |f: fn(&Prf) -> f64| {
        let items: Vec<(f64, usize)> = categories.iter().map(|c| (f(&c.scores), c.papers)).collect();
        weighted_average(&items).unwrap_or(0.0)
    };
    let overall = Prf {
        precision: weighted(|p| p.precision),
        recall: weighted(|p| p.recall),
        f1: weighted(|p| p.f1),
    };

    let mut attributes: Vec<AttributeScore> = Vec::new();
    for s in &kept {
        for m in &s.matches {
            match attributes.iter_mut().find(|a| a.attribute == m.attribute) {
                Some(a) => {
                    a.papers += 1;
                    a.score += m.score;
                }
                None => attributes.push(AttributeScore {
                    attribute: m.attribute.clone(),
                    group: m.group,
                    papers: 1,
                    score: m.score,
                }),
            }
        }
    }
    for a in &mut attributes {
        a.score = 100.0 * a.score / a.papers as f64;
    }
    let groups = ValidationGroup::ALL
        .iter()
        .filter(|g| attributes.iter().any(|a| a.group == **g))
        .map(|g| (*g, mean(attributes.iter().filter(|a| a.group == *g).map(|a| a.score))))
        .collect();

    let mut notes = Vec::new();
    if let Some(y) = filter.year_after {
        notes.push(format!("only papers published after {y}: {} of {}", kept.len(), scores.len()));
    }
    Ok(ScoreReport {
        papers: kept.len(),
        categories,
        overall,
        groups,
        attributes,
        length_adherence: Vec::new(),
        cost: Vec::new(),
        notes,
    })
}

fn table_row(out: &mut String, label: &str, cells: impl IntoIterator<Item = String>) {
    out.push_str(&format!("| {label} |"));
    for c in cells {
        out.push_str(&format!(" {c} |"));
    }
    out.push('\n');
}

fn table_head(out: &mut String, first: &str, cols: &[String]) {
    table_row(out, first, cols.iter().cloned());
    out.push_str("|---|");
    for _ in cols {
        out.push_str("---:|");
    }
    out.push('\n');
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_owned(), |v| format!("{v:.2}"))
}

/// Markdown tables with one row (or column) per labelled report: F1 by
/// category, scores by validation group, per-attribute scores, length
/// adherence and cost.
pub fn render_markdown(reports: &[(&str, &ScoreReport)]) -> String {
    let mut out = String::new();
    let cats: Vec<Category> = Category::ALL
        .into_iter()
        .filter(|c| reports.iter().any(|(_, r)| r.categories.iter().any(|x| x.category == *c)))
        .collect();
    out.push_str("## F1 by category\n\n");
    let mut cols: Vec<String> = cats.iter().map(|c| c.code().to_owned()).collect();
    cols.push("Average".into());
    table_head(&mut out, "Model", &cols);
    for (label, r) in reports {
        let mut cells: Vec<String> = cats
            .iter()
            .map(|c| cell(r.categories.iter().find(|x| x.category == *c).map(|x| x.scores.f1)))
            .collect();
        cells.push(format!("{:.2}", r.overall.f1));
        table_row(&mut out, label, cells);
    }

    out.push_str("\n## Overall precision and recall\n\n");
    table_head(&mut out, "Model", &["Papers".into(), "Precision".into(), "Recall".into(), "F1".into()]);
    for (label, r) in reports {
        table_row(
            &mut out,
            label,
            [
                r.papers.to_string(),
                format!("{:.2}", r.overall.precision),
                format!("{:.2}", r.overall.recall),
                format!("{:.2}", r.overall.f1),
            ],
        );
    }

    out.push_str("\n## Scores by validation group\n\n");
    let groups: Vec<String> = ValidationGroup::ALL.iter().map(|g| g.literal().to_owned()).collect();
    table_head(&mut out, "Model", &groups);
    for (label, r) in reports {
        let cells = ValidationGroup::ALL
            .iter()
            .map(|g| cell(r.groups.iter().find(|(x, _)| x == g).map(|(_, v)| *v)));
        table_row(&mut out, label, cells);
    }

    out.push_str("\n## Scores by attribute\n\n");
    let mut attrs: Vec<&str> = Vec::new();
    for (_, r) in reports {
        for a in &r.attributes {
            if !attrs.contains(&a.attribute.as_str()) {
                attrs.push(&a.attribute);
            }
        }
    }
    let labels: Vec<String> = reports.iter().map(|(l, _)| (*l).to_owned()).collect();
    table_head(&mut out, "Attribute", &labels);
    for name in attrs {
        let cells = reports
            .iter()
            .map(|(_, r)| cell(r.attributes.iter().find(|a| a.attribute == name).map(|a| a.score)));
        table_row(&mut out, name, cells);
    }

    let mut profiles: Vec<&str> = Vec::new();
    for (_, r) in reports {
        for a in &r.length_adherence {
            if !profiles.contains(&a.profile.as_str()) {
                profiles.push(&a.profile);
            }
        }
    }
    if !profiles.is_empty() {
        out.push_str("\n## Length adherence (% of fields in bounds)\n\n");
        let cols: Vec<String> = profiles.iter().map(|p| (*p).to_owned()).collect();
        table_head(&mut out, "Model", &cols);
        for (label, r) in reports {
            let cells = profiles.iter().map(|p| {
                cell(r.length_adherence.iter().find(|a| a.profile == *p).map(|a| 100.0 * a.adherence))
            });
            table_row(&mut out, label, cells);
        }
    }

    if reports.iter().any(|(_, r)| !r.cost.is_empty()) {
        out.push_str("\n## Cost\n\n");
        let cols = ["Model".to_owned(), "Input Tokens".into(), "Output Tokens".into(), "Cost (USD)".into()];
        table_head(&mut out, "Run", &cols);
        for (label, r) in reports {
            for c in &r.cost {
                let usd = c.usd.map_or_else(|| "unknown".to_owned(), |u| format!("{u:.2}"));
                table_row(
                    &mut out,
                    label,
                    [c.model.clone(), c.input_tokens.to_string(), c.output_tokens.to_string(), usd],
                );
            }
        }
        out.push_str("\nToken counts include failed attempts.\n");
    }
    for (label, r) in reports {
        for n in &r.notes {
            out.push_str(&format!("\n{label}: {n}\n"));
        }
    }
    out
}
