//! Bring your own annotations: load a JSONL corpus and a score file produced
//! elsewhere (for example by querying a real model ensemble) and evaluate them.

use std::io::Cursor;
use std::path::Path;

use pairdistill::corpus::parse_jsonl;
use pairdistill::scores::{align_scores, calibration_of, hard_labels, parse_external_scores};

const CORPUS: &str = r#"{"id":"call-1","utterances":[{"speaker":"customer","text":"my card was charged twice","gold":[1]},{"speaker":"agent","text":"let me check that","gold":[0]},{"speaker":"customer","text":"it happened again today","gold":[1]}]}
{"id":"call-2","utterances":[{"speaker":"customer","text":"what are your hours","gold":[0]},{"speaker":"agent","text":"nine to five","gold":[0]}]}
"#;

const SCORES: &str = r#"{"id":"call-1","class":0,"k":5,"s":[0.8,0.2,0.6]}
{"id":"call-2","class":0,"k":5,"s":[0.4,0.0]}
"#;

fn main() -> pairdistill::Result<()> {
    let corpus = parse_jsonl(Cursor::new(CORPUS), Path::new("corpus.jsonl"))?;
    let scores = parse_external_scores(Cursor::new(SCORES), Path::new("scores.jsonl"), &corpus)?;
    let aligned = align_scores(&corpus, &scores, 0)?;

    for (dialogue, sv) in corpus.dialogues.iter().zip(&aligned) {
        let votes = hard_labels(sv, 0.5)?;
        for ((u, s), vote) in dialogue.utterances.iter().zip(&sv.s).zip(&votes.labels) {
            println!(
                "{} #{} {:<28} s = {:.1} vote {:?}",
                dialogue.id,
                u.index,
                u.text.as_deref().unwrap_or(""),
                s,
                vote
            );
        }
    }
    let point = calibration_of(&corpus, &aligned, 0, 5)?;
    println!("ECE with k = {}: {:.3}", point.k, point.ece);

    // records that do not match the corpus are rejected with the offending id
    let bad = r#"{"id":"call-2","class":0,"k":5,"s":[0.4,0.0,1.0]}"#;
    match parse_external_scores(Cursor::new(bad), Path::new("bad.jsonl"), &corpus) {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => println!("unexpectedly accepted"),
    }
    Ok(())
}
