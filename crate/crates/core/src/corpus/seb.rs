use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{map_seb_label, AnswerPair, Corpus, CorpusError, CorpusSource, SebLabel};

const SEB_SCORE_MAX: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SebSplit {
    Train,
    Ua,
    Uq,
    Ud,
}

impl SebSplit {
    pub fn dir_name(self) -> &'static str {
        match self {
            SebSplit::Train => "train",
            SebSplit::Ua => "test-unseen-answers",
            SebSplit::Uq => "test-unseen-questions",
            SebSplit::Ud => "test-unseen-domains",
        }
    }

    fn source(self) -> CorpusSource {
        match self {
            SebSplit::Train => CorpusSource::SebTrain,
            SebSplit::Ua => CorpusSource::SebUa,
            SebSplit::Uq => CorpusSource::SebUq,
            SebSplit::Ud => CorpusSource::SebUd,
        }
    }
}

impl FromStr for SebSplit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(SebSplit::Train),
            "ua" => Ok(SebSplit::Ua),
            "uq" => Ok(SebSplit::Uq),
            "ud" => Ok(SebSplit::Ud),
            _ => Err(format!(
                "unknown split {s:?} (expected train, ua, uq or ud)"
            )),
        }
    }
}

fn parse_err(path: &Path, message: impl Into<String>) -> CorpusError {
    CorpusError::Parse {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn element_text(node: roxmltree::Node) -> String {
    node.descendants()
        .filter(|n| n.is_text())
        .filter_map(|n| n.text())
        .collect::<Vec<_>>()
        .join(" ")
}

fn child<'a, 'i>(node: roxmltree::Node<'a, 'i>, name: &str) -> Option<roxmltree::Node<'a, 'i>> {
    node.children().find(|c| c.has_tag_name(name))
}

fn parse_file(path: &Path, out: &mut Vec<AnswerPair>) -> Result<(), CorpusError> {
    let body = fs::read_to_string(path).map_err(|e| parse_err(path, e.to_string()))?;
    let doc = roxmltree::Document::parse(&body).map_err(|e| parse_err(path, e.to_string()))?;
    let questions: Vec<_> = doc
        .descendants()
        .filter(|n| n.has_tag_name("question"))
        .collect();
    if questions.is_empty() {
        return Err(parse_err(path, "no <question> element"));
    }
    for q in questions {
        let qid = q
            .attribute("id")
            .ok_or_else(|| parse_err(path, "<question> without id attribute"))?;
        let question_text = child(q, "questionText")
            .map(element_text)
            .unwrap_or_default();
        let references: Vec<_> = child(q, "referenceAnswers")
            .map(|r| {
                r.children()
                    .filter(|c| c.has_tag_name("referenceAnswer"))
                    .collect()
            })
            .unwrap_or_default();
        let reference = references
            .iter()
            .find(|r| {
                r.attribute("category")
                    .is_some_and(|c| c.eq_ignore_ascii_case("best"))
            })
            .or_else(|| references.first())
            .ok_or_else(|| parse_err(path, format!("question {qid} has no reference answer")))?;
        let reference_text = element_text(*reference);

        let students = child(q, "studentAnswers")
            .into_iter()
            .flat_map(|s| s.children().filter(|c| c.has_tag_name("studentAnswer")));
        for (k, s) in students.enumerate() {
            let raw = s.attribute("accuracy").ok_or_else(|| {
                parse_err(
                    path,
                    format!("student answer {} of {qid} has no accuracy", k + 1),
                )
            })?;
            let label = SebLabel::from_str(raw).map_err(|label| CorpusError::Label {
                path: path.to_path_buf(),
                label,
            })?;
            let id = s
                .attribute("id")
                .map(str::to_string)
                .unwrap_or_else(|| format!("{qid}-{}", k + 1));
            let mut pair = AnswerPair::new(id, qid, reference_text.as_str(), element_text(s))
                .with_question_text(question_text.as_str())
                .with_score(map_seb_label(label));
            pair.raw_label = Some(label);
            out.push(pair);
        }
    }
    Ok(())
}

/// Parse one SciEntsBank split. XML files under `<split>/Core` are read
/// in file-name order; each student answer is paired with the reference
/// marked `category="BEST"`, or the first reference when none is marked.
pub fn parse_seb(root_dir: &Path, split: SebSplit) -> Result<Corpus, CorpusError> {
    let core: PathBuf = root_dir.join(split.dir_name()).join("Core");
    let entries = fs::read_dir(&core).map_err(|e| parse_err(&core, e.to_string()))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "xml"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(parse_err(&core, "no .xml files"));
    }
    let mut pairs = Vec::new();
    for f in &files {
        parse_file(f, &mut pairs)?;
    }
    Corpus::new(pairs, SEB_SCORE_MAX, split.source())
}

#[cfg(test)]
mod tests {
    use super::*;

    const QUESTION: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<question id="EM-21b" module="EM" qtype="Q_EXPLAIN_SPECIFIC">
  <questionText>Why does the bulb light?</questionText>
  <referenceAnswers>
    <referenceAnswer category="GOOD" id="EM-21b-a2">The circuit is closed somehow.</referenceAnswer>
    <referenceAnswer category="BEST" id="EM-21b-a1">The bulb is in a closed path.</referenceAnswer>
  </referenceAnswers>
  <studentAnswers>
    <studentAnswer count="1" id="EM.21b.1" accuracy="correct">It is in a closed path</studentAnswer>
    <studentAnswer count="1" id="EM.21b.2" accuracy="contradictory">The path is open</studentAnswer>
  </studentAnswers>
</question>
"#;

    fn write(root: &Path, split: SebSplit, name: &str, body: &str) {
        let core = root.join(split.dir_name()).join("Core");
        fs::create_dir_all(&core).unwrap();
        fs::write(core.join(name), body).unwrap();
    }

    #[test]
    fn parses_fixture_with_mapping() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), SebSplit::Ua, "EM-21b.xml", QUESTION);
        let c = parse_seb(dir.path(), SebSplit::Ua).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.score_max(), 2.0);
        assert_eq!(c.source(), CorpusSource::SebUa);
        let scores: Vec<_> = c.pairs().iter().map(|p| p.gold_score.unwrap()).collect();
        assert_eq!(scores, [2.0, 0.0]);
        assert_eq!(
            c.pairs()[0].reference_answer,
            "The bulb is in a closed path."
        );
        assert_eq!(c.pairs()[1].raw_label, Some(SebLabel::Contradictory));
        assert_eq!(c.pairs()[0].question_text, "Why does the bulb light?");
    }

    #[test]
    fn malformed_xml_names_file() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            SebSplit::Train,
            "broken.xml",
            "<question id='x'><oops></question>",
        );
        let err = parse_seb(dir.path(), SebSplit::Train).unwrap_err();
        assert!(matches!(err, CorpusError::Parse { .. }));
        assert!(err.to_string().contains("broken.xml"), "{err}");
    }

    #[test]
    fn unknown_label_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            SebSplit::Uq,
            "q.xml",
            &QUESTION.replace("contradictory", "mostly_right"),
        );
        match parse_seb(dir.path(), SebSplit::Uq).unwrap_err() {
            CorpusError::Label { label, .. } => assert_eq!(label, "mostly_right"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn missing_split_dir() {
        let dir = tempfile::tempdir().unwrap();
        let err = parse_seb(dir.path(), SebSplit::Ud).unwrap_err();
        assert!(err.to_string().contains("test-unseen-domains"));
    }
}
