use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{AnswerPair, Corpus, CorpusError, CorpusSource};

pub const TRAIN_HEADER: [&str; 6] = [
    "id",
    "question_id",
    "question_text",
    "reference_answer",
    "student_answer",
    "score",
];
pub const TEST_HEADER: [&str; 5] = [
    "id",
    "question_id",
    "question_text",
    "reference_answer",
    "student_answer",
];
/// Scored output: the test columns plus a 4-decimal `score`.
pub const SCORED_HEADER: [&str; 6] = TRAIN_HEADER;

pub fn read_pairs_csv(
    path: &Path,
    expect_scores: bool,
    score_max: f64,
) -> Result<Corpus, CorpusError> {
    read_pairs_from(File::open(path)?, expect_scores, score_max)
}

/// Read a train (`expect_scores`) or test CSV. Columns are located by
/// header name; unknown extra columns are ignored.
pub fn read_pairs_from<R: Read>(
    reader: R,
    expect_scores: bool,
    score_max: f64,
) -> Result<Corpus, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let required: &[&str] = if expect_scores {
        &TRAIN_HEADER
    } else {
        &TEST_HEADER
    };
    let mut idx = [0usize; 6];
    for (slot, name) in idx.iter_mut().zip(required) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == *name)
            .ok_or_else(|| CorpusError::MissingColumn(name.to_string()))?;
    }

    let mut pairs = Vec::new();
    for (n, record) in rdr.records().enumerate() {
        let row = n + 1;
        let record = record?;
        let field = |i: usize| record.get(idx[i]).unwrap_or("");
        let id = field(0).trim();
        if id.is_empty() {
            return Err(CorpusError::Row {
                row,
                message: "empty id".into(),
            });
        }
        let mut pair =
            AnswerPair::new(id, field(1).trim(), field(3), field(4)).with_question_text(field(2));
        if pair.reference_answer.trim().is_empty() || pair.student_answer.trim().is_empty() {
            return Err(CorpusError::Row {
                row,
                message: "empty reference or student answer".into(),
            });
        }
        if expect_scores {
            let raw = field(5).trim();
            let score: f64 = raw.parse().map_err(|_| CorpusError::Row {
                row,
                message: format!("unparseable score {raw:?}"),
            })?;
            if !(score.is_finite() && (0.0..=score_max).contains(&score)) {
                return Err(CorpusError::ScoreRange {
                    row,
                    score,
                    score_max,
                });
            }
            pair.gold_score = Some(score);
        }
        pairs.push(pair);
    }
    Corpus::new(pairs, score_max, CorpusSource::UserCsv)
}

pub fn write_pairs_csv(
    corpus: &Corpus,
    path: &Path,
    include_scores: bool,
) -> Result<(), CorpusError> {
    let mut f = File::create(path)?;
    write_pairs_to(corpus, &mut f, include_scores)?;
    f.flush()?;
    Ok(())
}

pub fn write_pairs_to<W: Write>(
    corpus: &Corpus,
    writer: W,
    include_scores: bool,
) -> Result<(), CorpusError> {
    let mut w = csv::Writer::from_writer(writer);
    if include_scores {
        w.write_record(TRAIN_HEADER)?;
    } else {
        w.write_record(TEST_HEADER)?;
    }
    for p in corpus.pairs() {
        let base = [
            p.id.as_str(),
            p.question_id.as_str(),
            p.question_text.as_str(),
            p.reference_answer.as_str(),
            p.student_answer.as_str(),
        ];
        if include_scores {
            let score = p.gold_score.map(|s| s.to_string()).unwrap_or_default();
            w.write_record(base.iter().copied().chain([score.as_str()]))?;
        } else {
            w.write_record(base)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_scored_csv(corpus: &Corpus, scores: &[f64], path: &Path) -> Result<(), CorpusError> {
    let mut f = File::create(path)?;
    write_scored_to(corpus, scores, &mut f)?;
    f.flush()?;
    Ok(())
}

/// Emit the scored table: one row per pair, in corpus order.
pub fn write_scored_to<W: Write>(
    corpus: &Corpus,
    scores: &[f64],
    writer: W,
) -> Result<(), CorpusError> {
    assert_eq!(corpus.len(), scores.len(), "one score per pair");
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SCORED_HEADER)?;
    for (p, s) in corpus.pairs().iter().zip(scores) {
        let score = format!("{s:.4}");
        w.write_record([
            p.id.as_str(),
            p.question_id.as_str(),
            p.question_text.as_str(),
            p.reference_answer.as_str(),
            p.student_answer.as_str(),
            score.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TRAIN: &str = "id,question_id,question_text,reference_answer,student_answer,score\n\
        a,q1,What?,\"A ref, with comma\",first,5\n\
        b,q1,What?,\"A ref, with comma\",second,4.5\n\
        c,q2,,other ref,\"quoted \"\"word\"\"\",0\n";

    #[test]
    fn reads_train_csv() {
        let c = read_pairs_from(TRAIN.as_bytes(), true, 5.0).unwrap();
        assert_eq!(c.len(), 3);
        let scores = c.gold_scores().unwrap();
        assert_eq!(scores, [5.0, 4.5, 0.0]);
        assert_eq!(c.pairs()[0].reference_answer, "A ref, with comma");
        assert_eq!(c.pairs()[2].student_answer, "quoted \"word\"");
        assert_eq!(c.pairs()[2].question_text, "");
    }

    #[test]
    fn score_out_of_range_reports_row() {
        let csv = TRAIN.replace(",4.5\n", ",6.0\n");
        match read_pairs_from(csv.as_bytes(), true, 5.0).unwrap_err() {
            CorpusError::ScoreRange { row, score, .. } => {
                assert_eq!(row, 2);
                assert_eq!(score, 6.0);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn missing_score_column() {
        let csv = "id,question_id,question_text,reference_answer,student_answer\na,q,,r,s\n";
        match read_pairs_from(csv.as_bytes(), true, 5.0).unwrap_err() {
            CorpusError::MissingColumn(c) => assert_eq!(c, "score"),
            e => panic!("unexpected {e}"),
        }
        let c = read_pairs_from(csv.as_bytes(), false, 5.0).unwrap();
        assert_eq!(c.pairs()[0].gold_score, None);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let csv = TRAIN.replace("b,q1", "a,q1");
        assert!(matches!(
            read_pairs_from(csv.as_bytes(), true, 5.0).unwrap_err(),
            CorpusError::DuplicateId(_)
        ));
    }

    #[test]
    fn scored_output_has_four_decimals() {
        let c = read_pairs_from(TRAIN.as_bytes(), true, 5.0).unwrap();
        let mut out = Vec::new();
        write_scored_to(&c, &[4.43, 1.0 / 3.0, 0.0], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], SCORED_HEADER.join(","));
        assert!(lines[1].ends_with(",first,4.4300"));
        assert!(lines[2].ends_with(",0.3333"));
    }

    fn text() -> impl Strategy<Value = String> {
        "[a-zA-Z0-9 ,\"'\\.\\n]{0,20}[a-z]".prop_map(|s| s)
    }

    proptest! {
        #[test]
        fn write_read_round_trip(rows in prop::collection::vec((text(), text(), text(), 0u32..=500u32), 1..40)) {
            let pairs: Vec<_> = rows
                .into_iter()
                .enumerate()
                .map(|(i, (q, r, s, sc))| {
                    AnswerPair::new(format!("id{i}"), format!("q{}", i % 7), r, s)
                        .with_question_text(q)
                        .with_score(f64::from(sc) / 100.0)
                })
                .collect();
            let c = Corpus::new(pairs, 5.0, CorpusSource::UserCsv).unwrap();
            let mut buf = Vec::new();
            write_pairs_to(&c, &mut buf, true).unwrap();
            let back = read_pairs_from(buf.as_slice(), true, 5.0).unwrap();
            prop_assert_eq!(back, c);
        }
    }
}
