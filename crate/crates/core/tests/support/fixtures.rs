//! Builders for small on-disk corpora in the Mohler and SciEntsBank layouts.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use asag_core::corpus::SebSplit;

/// Five-way labels in a fixed cycle and their mapped scores.
pub const SEB_LABELS: [(&str, f64); 5] = [
    ("correct", 2.0),
    ("partially_correct_incomplete", 1.0),
    ("contradictory", 0.0),
    ("irrelevant", 0.0),
    ("non_domain", 0.0),
];

/// `questions` x `per_question` answers. Returns the number of pairs.
pub fn write_mohler(root: &Path, questions: usize, per_question: usize) -> usize {
    fs::create_dir_all(root.join("sent")).unwrap();
    let (mut qs, mut refs, mut all) = (String::new(), String::new(), String::new());
    for q in 1..=questions {
        let qid = format!("{}.{}", 1 + (q - 1) / 9, 1 + (q - 1) % 9);
        writeln!(qs, "{qid} What does structure {q} do?").unwrap();
        writeln!(refs, "{qid} Structure {q} stores items in order.").unwrap();
        let mut scores = String::new();
        for k in 0..per_question {
            writeln!(all, "{qid} answer {k} about structure {q}").unwrap();
            writeln!(scores, "{}", (k % 11) as f64 * 0.5).unwrap();
        }
        let dir = root.join("scores").join(&qid);
        fs::create_dir_all(&dir).unwrap();
        fs::write(dir.join("ave"), scores).unwrap();
    }
    fs::write(root.join("sent/questions"), qs).unwrap();
    fs::write(root.join("sent/answers"), refs).unwrap();
    fs::write(root.join("sent/all"), all).unwrap();
    questions * per_question
}

/// One XML file per question under `<root>/<split>/Core`. Returns the
/// mapped scores in file order.
pub fn write_seb(root: &Path, split: SebSplit, questions: usize, per_question: usize) -> Vec<f64> {
    let core = root.join(split.dir_name()).join("Core");
    fs::create_dir_all(&core).unwrap();
    let mut expected = Vec::new();
    for q in 0..questions {
        let qid = format!("Q{q:03}");
        let mut xml = format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<question id=\"{qid}\" module=\"EM\">\n  \
             <questionText>What happens in case {q}?</questionText>\n  <referenceAnswers>\n    \
             <referenceAnswer id=\"{qid}-r1\" category=\"BEST\">The circuit {q} is closed.</referenceAnswer>\n  \
             </referenceAnswers>\n  <studentAnswers>\n"
        );
        for k in 0..per_question {
            let (label, score) = SEB_LABELS[(q + k) % SEB_LABELS.len()];
            writeln!(
                xml,
                "    <studentAnswer id=\"{qid}.s{k}\" accuracy=\"{label}\">Student {k} says circuit {q} is open.</studentAnswer>"
            )
            .unwrap();
            expected.push(score);
        }
        xml.push_str("  </studentAnswers>\n</question>\n");
        fs::write(core.join(format!("{qid}.xml")), xml).unwrap();
    }
    expected
}
