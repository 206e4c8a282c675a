//! The interactive terminal consultation.

use std::io::{BufRead, Write};
use std::sync::Arc;

use chainshell_core::engine::{start_session, Answer, Mode, Status, Verdict};
use chainshell_core::explain::{how, render_explanation, why};
use chainshell_core::kb::KnowledgeBase;

use crate::output::conclusions;
use crate::Failure;

fn io(e: std::io::Error) -> Failure {
    Failure::Failed(format!("terminal: {e}"))
}

/// Asks each question on `output`, reading replies from `input`. Replies
/// are a value, `unknown`, or `why`; anything else asks again.
pub fn consult(kb: Arc<KnowledgeBase>, mode: Mode, input: impl BufRead, mut output: impl Write) -> Result<(), Failure> {
    let mut lines = input.lines();
    let mut s = start_session(kb, mode, &[]).map_err(|e| Failure::Failed(e.to_string()))?;
    while let Status::NeedsAnswer(q) = s.status() {
        writeln!(output, "{} [{}]", q.prompt, q.allowed.describe()).map_err(io)?;
        output.flush().map_err(io)?;
        let Some(line) = lines.next() else {
            writeln!(output, "aborted").map_err(io)?;
            return Err(Failure::Failed(String::new()));
        };
        let reply = line.map_err(io)?;
        let reply = reply.trim();
        let answer = match reply {
            "why" => {
                let chain = why(&s).map_err(|e| Failure::Failed(e.to_string()))?;
                write!(output, "{}", render_explanation(&chain)).map_err(io)?;
                continue;
            }
            "unknown" => Answer::Unknown,
            _ => match q.allowed.parse(reply) {
                Some(v) => Answer::Value(v),
                None => {
                    writeln!(
                        output,
                        "invalid answer `{reply}`: expected {}, unknown or why",
                        q.allowed.describe()
                    )
                    .map_err(io)?;
                    continue;
                }
            },
        };
        s = s.resume(answer).map_err(|e| Failure::Failed(e.to_string()))?;
    }
    let outcome = s.outcome().expect("a session that stopped asking is done");
    write!(output, "{}", conclusions(outcome)).map_err(io)?;
    match &outcome.verdict {
        Some(Verdict::Proven { variable, .. }) => {
            let proof = how(&s, variable).map_err(|e| Failure::Failed(e.to_string()))?;
            writeln!(output, "how {variable}:").map_err(io)?;
            write!(output, "{}", render_explanation(&proof)).map_err(io)?;
        }
        Some(Verdict::NotProven { variable }) => writeln!(output, "{variable}: not proven").map_err(io)?,
        None => {}
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use chainshell_core::lang::parse_kb;
    use chainshell_core::DEMO_CHEST_KB;

    use super::*;

    fn run(mode: Mode, input: &str) -> (Result<(), Failure>, String) {
        let kb = Arc::new(parse_kb(DEMO_CHEST_KB).unwrap());
        let mut out = Vec::new();
        let r = consult(kb, mode, input.as_bytes(), &mut out);
        (r, String::from_utf8(out).unwrap())
    }

    fn backward() -> Mode {
        Mode::Backward { goal: "diagnosis".into() }
    }

    #[test]
    fn golden_consultation() {
        let (r, out) = run(backward(), "true\ntrue\nfalse\npurulent\n");
        assert!(r.is_ok());
        assert!(out.starts_with("Does the patient have fever? [true, false]\n"), "{out}");
        assert!(out.ends_with(
            "diagnosis = bronchitis\n\
             suspicion = respiratory_infection\n\
             recommend: Consider antibiotic therapy\n\
             how diagnosis:\n\
             diagnosis = bronchitis  [rule R3]\n\
             \x20 suspicion = respiratory_infection  [rule R1]\n\
             \x20   fever = true  [answered]\n\
             \x20   cough = true  [answered]\n\
             \x20 sputum = purulent  [answered]\n"
        ), "{out}");
    }

    #[test]
    fn why_and_bad_answers_ask_again() {
        let (r, out) = run(backward(), "why\nmaybe\n\n");
        assert!(matches!(r, Err(Failure::Failed(ref m)) if m.is_empty()));
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], "Does the patient have fever? [true, false]");
        let r1 = lines.iter().position(|l| l.contains("rule R1")).expect("R1 in the chain");
        let r2 = lines.iter().position(|l| l.contains("rule R2")).expect("R2 in the chain");
        assert!(r1 < r2, "{out}");
        let asked = lines.iter().filter(|l| l.starts_with("Does the patient have fever?")).count();
        assert_eq!(asked, 4, "{out}");
        assert!(out.contains("invalid answer `maybe`"), "{out}");
        assert_eq!(lines.last(), Some(&"aborted"));
    }

    #[test]
    fn refusals_lead_to_not_proven() {
        let (r, out) = run(backward(), "unknown\nunknown\nunknown\nunknown\n");
        assert!(r.is_ok());
        assert!(out.ends_with("diagnosis: not proven\n"), "{out}");
    }

    #[test]
    fn hybrid_prints_conclusions_only() {
        let (r, out) = run(Mode::Hybrid, "true\ntrue\nfalse\npurulent\n");
        assert!(r.is_ok());
        assert!(out.ends_with(
            "[none, clear, purulent]\n\
             diagnosis = bronchitis\n\
             suspicion = respiratory_infection\n\
             recommend: Consider antibiotic therapy\n"
        ), "{out}");
    }
}
