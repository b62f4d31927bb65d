use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::{AnswerPair, Corpus, CorpusError, CorpusSource};

const MOHLER_SCORE_MAX: f64 = 5.0;

fn read(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|e| CorpusError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Lines of the form `<question_id> <text>`, blank lines skipped.
fn keyed_lines(path: &Path) -> Result<Vec<(String, String)>, CorpusError> {
    let body = read(path)?;
    let mut out = Vec::new();
    for (n, line) in body.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (qid, text) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        if text.trim().is_empty() {
            return Err(CorpusError::Parse {
                path: path.to_path_buf(),
                message: format!("line {}: no text after question id {qid:?}", n + 1),
            });
        }
        out.push((qid.to_string(), text.trim().to_string()));
    }
    Ok(out)
}

fn score_lines(path: &Path) -> Result<Vec<f64>, CorpusError> {
    let body = read(path)?;
    body.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(n, l)| {
            l.parse::<f64>().map_err(|_| CorpusError::Parse {
                path: path.to_path_buf(),
                message: format!("score line {}: not a number: {l:?}", n + 1),
            })
        })
        .collect()
}

fn require(path: PathBuf) -> Result<PathBuf, CorpusError> {
    if path.exists() {
        Ok(path)
    } else {
        Err(CorpusError::Parse {
            message: "missing".into(),
            path,
        })
    }
}

/// Parse the Mohler extended layout rooted at `root_dir`.
///
/// `sent/answers` and `sent/questions` hold one `<qid> <text>` line per
/// question; `sent/all` holds one `<qid> <answer>` line per student answer;
/// `scores/<qid>/ave` holds the averaged grader score for each student
/// answer of that question, in the same order as `sent/all`.
pub fn parse_mohler(root_dir: &Path) -> Result<Corpus, CorpusError> {
    let sent = require(root_dir.join("sent"))?;
    let scores_dir = require(root_dir.join("scores"))?;
    let references: HashMap<String, String> = keyed_lines(&require(sent.join("answers"))?)?
        .into_iter()
        .collect();
    let questions: HashMap<String, String> = keyed_lines(&require(sent.join("questions"))?)?
        .into_iter()
        .collect();
    let students = keyed_lines(&require(sent.join("all"))?)?;

    let mut order: Vec<&str> = Vec::new();
    let mut grouped: HashMap<&str, Vec<&str>> = HashMap::new();
    for (qid, text) in &students {
        grouped
            .entry(qid.as_str())
            .or_insert_with(|| {
                order.push(qid.as_str());
                Vec::new()
            })
            .push(text.as_str());
    }

    let mut pairs = Vec::with_capacity(students.len());
    for qid in order {
        let answers = &grouped[qid];
        let reference = references.get(qid).ok_or_else(|| CorpusError::Parse {
            path: sent.join("answers"),
            message: format!("no reference answer for question {qid}"),
        })?;
        let score_path = require(scores_dir.join(qid).join("ave"))?;
        let scores = score_lines(&score_path)?;
        if scores.len() != answers.len() {
            return Err(CorpusError::Alignment {
                question_id: qid.to_string(),
                answers: answers.len(),
                scores: scores.len(),
            });
        }
        let question_text = questions.get(qid).cloned().unwrap_or_default();
        for (k, (answer, score)) in answers.iter().zip(scores).enumerate() {
            if !(0.0..=MOHLER_SCORE_MAX).contains(&score) {
                return Err(CorpusError::Parse {
                    path: score_path.clone(),
                    message: format!("score {score} outside [0, {MOHLER_SCORE_MAX}]"),
                });
            }
            pairs.push(
                AnswerPair::new(format!("{qid}-{}", k + 1), qid, reference.as_str(), *answer)
                    .with_question_text(question_text.as_str())
                    .with_score(score),
            );
        }
    }
    Corpus::new(pairs, MOHLER_SCORE_MAX, CorpusSource::Mohler)
}
