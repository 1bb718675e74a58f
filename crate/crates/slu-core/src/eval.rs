//! Frame-level evaluation: micro-averaged F1 per head and the frame error
//! rate over user turns, plus the per-turn prediction dump.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{extract_spans, Dialogue};
use crate::error::SluError;
use crate::model::Model;
use crate::pipeline::{encode_example, LabelSpace, Vocabulary};
use crate::tape::Scalar;

/// One evaluated user turn: prediction, gold, and the frame verdict.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TurnRecord {
    pub turn_id: String,
    pub domain: String,
    pub intents: Vec<String>,
    pub slots: BTreeMap<String, String>,
    pub iob: Vec<String>,
    pub gold_domain: String,
    pub gold_intents: Vec<String>,
    pub gold_slots: BTreeMap<String, String>,
    pub gold_iob: Vec<String>,
    pub correct_frame: bool,
}

impl TurnRecord {
    pub fn domain_correct(&self) -> bool {
        self.domain == self.gold_domain
    }

    /// Exact dialogue-act set match.
    pub fn intents_correct(&self) -> bool {
        let mut a = self.intents.clone();
        let mut b = self.gold_intents.clone();
        a.sort();
        b.sort();
        a == b
    }

    /// Full IOB sequence match.
    pub fn slots_correct(&self) -> bool {
        self.iob == self.gold_iob
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub domain_f1: f64,
    pub intent_f1: f64,
    pub slot_f1: f64,
    /// Percent of user turns with any head wrong.
    pub frame_error_rate: f64,
    pub num_turns: usize,
}

fn f1(tp: usize, fp: usize, fname: usize) -> f64 {
    if 2 * tp + fp + fname == 0 {
        1.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fname) as f64
    }
}

/// Score a set of per-turn records. Domain F1 is micro-F1 over the
/// single-label decisions (equal to accuracy); intent F1 is micro-F1 over
/// (turn, label) pairs; slot token F1 is micro-F1 over non-O token labels.
pub fn score(records: &[TurnRecord]) -> Result<EvalReport, SluError> {
    if records.is_empty() {
        return Err(SluError::Config("evaluation set is empty".to_string()));
    }

    let domain_tp = records.iter().filter(|r| r.domain_correct()).count();
    let domain_wrong = records.len() - domain_tp;
    let domain_f1 = f1(domain_tp, domain_wrong, domain_wrong);

    let (mut itp, mut ifp, mut ifn) = (0, 0, 0);
    for r in records {
        for p in &r.intents {
            if r.gold_intents.contains(p) {
                itp += 1;
            } else {
                ifp += 1;
            }
        }
        ifn += r.gold_intents.iter().filter(|g| !r.intents.contains(g)).count();
    }

    let (mut stp, mut sfp, mut sfn) = (0, 0, 0);
    for r in records {
        for (p, g) in r.iob.iter().zip(&r.gold_iob) {
            let p_real = p != "O";
            let g_real = g != "O";
            match (p_real, g_real) {
                (true, true) if p == g => stp += 1,
                (true, true) => {
                    sfp += 1;
                    sfn += 1;
                }
                (true, false) => sfp += 1,
                (false, true) => sfn += 1,
                (false, false) => {}
            }
        }
    }

    let errors = records.iter().filter(|r| !r.correct_frame).count();

    Ok(EvalReport {
        domain_f1,
        intent_f1: f1(itp, ifp, ifn),
        slot_f1: f1(stp, sfp, sfn),
        frame_error_rate: 100.0 * errors as f64 / records.len() as f64,
        num_turns: records.len(),
    })
}

/// Run a model over every annotated user turn of a corpus.
pub fn evaluate_model<F: Scalar>(
    model: &Model<F>,
    dialogues: &[Dialogue],
    vocab: &Vocabulary,
    labels: &LabelSpace,
    batch_size: usize,
) -> Result<(EvalReport, Vec<TurnRecord>), SluError> {
    let mut examples = Vec::new();
    let mut meta = Vec::new();
    for d in dialogues {
        for (i, turn) in d.user_turns() {
            examples.push(encode_example(d, i + 1, vocab, labels)?);
            meta.push((
                format!("{}:{}", d.id, i + 1),
                turn.tokens.clone(),
                turn.frame.clone().expect("user turn carries a frame"),
            ));
        }
    }
    if examples.is_empty() {
        return Err(SluError::Config("evaluation set is empty".to_string()));
    }

    let mut records = Vec::with_capacity(examples.len());
    for chunk_start in (0..examples.len()).step_by(batch_size.max(1)) {
        let chunk = &examples[chunk_start..(chunk_start + batch_size).min(examples.len())];
        let preds = model.predict(chunk, labels)?;
        for (j, pred) in preds.into_iter().enumerate() {
            let (turn_id, tokens, gold) = &meta[chunk_start + j];
            let mut r = TurnRecord {
                turn_id: turn_id.clone(),
                domain: pred.domain,
                intents: pred.intents,
                slots: extract_spans(&pred.iob, tokens),
                iob: pred.iob,
                gold_domain: gold.domain.clone(),
                gold_intents: gold.intents.clone(),
                gold_slots: extract_spans(&gold.iob, tokens),
                gold_iob: gold.iob.clone(),
                correct_frame: false,
            };
            r.correct_frame = r.domain_correct() && r.intents_correct() && r.slots_correct();
            records.push(r);
        }
    }

    Ok((score(&records)?, records))
}

/// Plain-text report table.
pub fn format_report(name: &str, r: &EvalReport) -> String {
    format!(
        "{:<12} {:>9} {:>9} {:>8} {:>17}\n{:<12} {:>9.4} {:>9.4} {:>8.4} {:>16.2}%\n",
        "config", "domain_f1", "intent_f1", "slot_f1", "frame_error_rate",
        name, r.domain_f1, r.intent_f1, r.slot_f1, r.frame_error_rate
    )
}
