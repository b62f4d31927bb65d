use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One row of a scored result file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub id: String,
    pub question_id: String,
    pub question_text: String,
    pub reference_answer: String,
    pub student_answer: String,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    QuestionId,
    ReferenceAnswer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Agg {
    Mean,
    Min,
    Max,
    Count,
}

impl FromStr for GroupBy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "question_id" => Ok(GroupBy::QuestionId),
            "reference_answer" => Ok(GroupBy::ReferenceAnswer),
            _ => Err(format!(
                "unknown by {s:?} (expected question_id or reference_answer)"
            )),
        }
    }
}

impl FromStr for Agg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean" => Ok(Agg::Mean),
            "min" => Ok(Agg::Min),
            "max" => Ok(Agg::Max),
            "count" => Ok(Agg::Count),
            _ => Err(format!(
                "unknown agg {s:?} (expected mean, min, max or count)"
            )),
        }
    }
}

impl fmt::Display for Agg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Agg::Mean => "mean",
            Agg::Min => "min",
            Agg::Max => "max",
            Agg::Count => "count",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub key: String,
    /// `None` only for mean/min/max of an empty set.
    pub value: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pivot {
    pub by: GroupBy,
    pub agg: Agg,
    pub groups: Vec<Cell>,
    pub total: Cell,
}

fn aggregate(agg: Agg, values: &[f64]) -> Option<f64> {
    match agg {
        Agg::Count => Some(values.len() as f64),
        _ if values.is_empty() => None,
        Agg::Mean => Some(values.iter().sum::<f64>() / values.len() as f64),
        Agg::Min => values.iter().copied().reduce(f64::min),
        Agg::Max => values.iter().copied().reduce(f64::max),
    }
}

/// Groups ordered by key (byte-wise), followed by a total over every row.
pub fn pivot(rows: &[ResultRow], by: GroupBy, agg: Agg) -> Pivot {
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in rows {
        let key = match by {
            GroupBy::QuestionId => r.question_id.as_str(),
            GroupBy::ReferenceAnswer => r.reference_answer.as_str(),
        };
        groups.entry(key).or_default().push(r.score);
    }
    let all: Vec<f64> = rows.iter().map(|r| r.score).collect();
    Pivot {
        by,
        agg,
        groups: groups
            .into_iter()
            .map(|(k, v)| Cell {
                key: k.to_string(),
                value: aggregate(agg, &v),
                count: v.len(),
            })
            .collect(),
        total: Cell {
            key: "total".into(),
            value: aggregate(agg, &all),
            count: all.len(),
        },
    }
}
