//! Acceptance suite for the language, engine and explanations. Runs as a
//! plain binary so every criterion prints its PASS/FAIL line under
//! `cargo test`; exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use chainshell_core::engine::{forward_chain, InferenceSession, Mode, Verdict};
use chainshell_core::explain::{how, render_explanation, Justification, ProofNode};
use chainshell_core::kb::{dependency_graph, KnowledgeBase, Value, DEFAULT_KB_ID};
use chainshell_core::lang::{
    decode_interchange, encode_interchange, parse_kb, parse_kb_bytes, serialize_kb,
};
use chainshell_core::testkit::{
    random_assignment, random_kb, random_rich_kb, rng, run_with_answers, Family, Shape,
};
use chainshell_core::DEMO_CHEST_KB;
use common::{asked, fired_ids, fixpoint, satisfied, Facts};
use rand::seq::IndexedRandom;
use rand::Rng;

const SUITE_SEED: u64 = 0xC4A1_5E11;
const SUITE_SIZE: usize = 1000;

struct Case {
    kb: Arc<KnowledgeBase>,
    assignment: Vec<(String, Value)>,
}

fn suite(family: Family, seed: u64, n: usize) -> Vec<Case> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let kb = random_kb(&mut r, family, Shape::default());
            let assignment = random_assignment(&mut r, &kb);
            Case {
                kb: Arc::new(kb),
                assignment,
            }
        })
        .collect()
}

fn demo() -> Arc<KnowledgeBase> {
    Arc::new(parse_kb(DEMO_CHEST_KB).unwrap())
}

/// Every complete assignment of the demo's askable variables.
fn demo_assignments() -> Vec<Vec<(String, Value)>> {
    let mut out = Vec::new();
    for fever in [true, false] {
        for cough in [true, false] {
            for wheezing in [true, false] {
                for sputum in ["none", "clear", "purulent"] {
                    out.push(vec![
                        ("fever".to_string(), Value::Bool(fever)),
                        ("cough".to_string(), Value::Bool(cough)),
                        ("wheezing".to_string(), Value::Bool(wheezing)),
                        ("sputum".to_string(), Value::symbol(sputum)),
                    ]);
                }
            }
        }
    }
    out
}

fn variables(kb: &KnowledgeBase) -> Vec<String> {
    kb.rulebases[0]
        .declarations
        .iter()
        .map(|d| d.name.clone())
        .collect()
}

fn backward(kb: &Arc<KnowledgeBase>, goal: &str, answers: &[(String, Value)]) -> InferenceSession {
    run_with_answers(
        kb.clone(),
        Mode::Backward { goal: goal.into() },
        &[],
        answers,
    )
    .unwrap()
}

struct Report {
    failures: usize,
}

impl Report {
    fn check(&mut self, name: &str, result: Result<String, String>) {
        match result {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                self.failures += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
}

fn fixpoint_equivalence() -> Result<String, String> {
    let start = Instant::now();
    let mut checked = 0;
    for (family, seed) in [
        (Family::SingleValued, SUITE_SEED),
        (Family::General, SUITE_SEED + 1),
    ] {
        for (i, c) in suite(family, seed, SUITE_SIZE).iter().enumerate() {
            let out = forward_chain(c.kb.clone(), &c.assignment)
                .map_err(|e| format!("{family:?} #{i}: {e}"))?;
            let (facts, fired) = fixpoint(&c.kb.rulebases[0], &c.assignment);
            let got: Facts = out
                .memory
                .facts()
                .map(|f| (f.variable.clone(), f.value.clone()))
                .collect();
            if got != facts || out.fired != fired {
                return Err(format!("{family:?} KB #{i} differs from the oracle"));
            }
            checked += 1;
        }
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(30) {
        return Err(format!("took {elapsed:.2?}, limit 30 s"));
    }
    Ok(format!(
        "{checked}/{checked} KBs match the repeated-scan oracle in {elapsed:.2?}"
    ))
}

fn agreement() -> Result<String, String> {
    let mut runs = 0;
    let mut proven = 0;
    let mut check = |kb: &Arc<KnowledgeBase>,
                     assignment: &[(String, Value)],
                     label: &str|
     -> Result<(), String> {
        let forward = forward_chain(kb.clone(), assignment).map_err(|e| e.to_string())?;
        for goal in variables(kb) {
            let s = backward(kb, &goal, assignment);
            let agree = match &s.outcome().unwrap().verdict {
                Some(Verdict::Proven { value, .. }) => {
                    proven += 1;
                    forward.memory.value(&goal) == Some(value)
                }
                Some(Verdict::NotProven { .. }) => forward.memory.value(&goal).is_none(),
                None => false,
            };
            if !agree {
                return Err(format!("{label}, goal {goal}"));
            }
            runs += 1;
        }
        Ok(())
    };
    for (i, c) in suite(Family::SingleValued, SUITE_SEED, SUITE_SIZE)
        .iter()
        .enumerate()
    {
        check(&c.kb, &c.assignment, &format!("KB #{i}"))?;
    }
    let kb = demo();
    for (i, a) in demo_assignments().iter().enumerate() {
        check(&kb, a, &format!("demo assignment #{i}"))?;
    }
    Ok(format!(
        "{runs} backward goals agree with forward ({proven} proven), 1000 KBs plus demo"
    ))
}

fn refraction_and_determinism() -> Result<String, String> {
    let mut runs = 0;
    let mut r = rng(SUITE_SEED + 2);
    for family in [Family::SingleValued, Family::General] {
        for (i, c) in suite(family, SUITE_SEED, SUITE_SIZE).iter().enumerate() {
            // answers drawn from the assignment, some refused
            let answers: Vec<_> = c
                .assignment
                .iter()
                .filter(|_| r.random_bool(0.8))
                .cloned()
                .collect();
            let goal = variables(&c.kb).choose(&mut r).unwrap().clone();
            for mode in [Mode::Forward, Mode::Backward { goal }, Mode::Hybrid] {
                let initial: &[(String, Value)] = if mode == Mode::Forward {
                    &c.assignment
                } else {
                    &[]
                };
                let a = run_with_answers(c.kb.clone(), mode.clone(), initial, &answers).unwrap();
                let b = run_with_answers(c.kb.clone(), mode.clone(), initial, &answers).unwrap();
                let fired = fired_ids(&a);
                if fired.iter().collect::<BTreeSet<_>>().len() != fired.len() {
                    return Err(format!(
                        "{family:?} KB #{i} {}: a rule fired twice",
                        mode.name()
                    ));
                }
                if a.trace() != b.trace() {
                    return Err(format!("{family:?} KB #{i} {}: traces differ", mode.name()));
                }
                runs += 1;
            }
        }
    }
    Ok(format!(
        "{runs} runs, every rule fires at most once, reruns are event-identical"
    ))
}

fn golden_transcript() -> Result<String, String> {
    let kb = demo();
    let answers = vec![
        ("fever".to_string(), Value::Bool(true)),
        ("cough".to_string(), Value::Bool(true)),
        ("wheezing".to_string(), Value::Bool(false)),
        ("sputum".to_string(), Value::symbol("purulent")),
    ];
    let s = backward(&kb, "diagnosis", &answers);
    if asked(&s) != ["fever", "cough", "wheezing", "sputum"] {
        return Err(format!("asked {:?}", asked(&s)));
    }
    let out = s.outcome().unwrap();
    match &out.verdict {
        Some(Verdict::Proven { value, .. }) if *value == Value::symbol("bronchitis") => {}
        v => return Err(format!("verdict {v:?}")),
    }
    if out.recommendations != ["Consider antibiotic therapy"] {
        return Err(format!("recommendations {:?}", out.recommendations));
    }
    let s = backward(
        &kb,
        "diagnosis",
        &[("fever".to_string(), Value::Bool(false))],
    );
    if asked(&s) != ["fever"] {
        return Err(format!("with fever=false asked {:?}", asked(&s)));
    }
    if !matches!(
        s.outcome().unwrap().verdict,
        Some(Verdict::NotProven { .. })
    ) {
        return Err("fever=false did not end NotProven".into());
    }
    Ok("fever, cough, wheezing, sputum -> bronchitis; fever=false -> 1 question, NotProven".into())
}

fn proof_is_valid(node: &ProofNode, s: &InferenceSession) -> bool {
    match &node.justification {
        Justification::Given | Justification::Answered => true,
        Justification::ByRule { rule, children } => {
            let Some(r) = s.active_rulebase().rule(rule) else {
                return false;
            };
            let facts: Facts = children
                .iter()
                .map(|c| (c.fact.variable.clone(), c.fact.value.clone()))
                .collect();
            children.len() == r.antecedents.len()
                && satisfied(&r.antecedents, &facts)
                && children.iter().all(|c| proof_is_valid(c, s))
        }
    }
}

const GOLDEN_HOW: &str = "diagnosis = bronchitis  [rule R3]
  suspicion = respiratory_infection  [rule R1]
    fever = true  [given]
    cough = true  [given]
  sputum = purulent  [given]
";

fn explanation_validity() -> Result<String, String> {
    let mut proofs = 0;
    let kb = demo();
    for a in demo_assignments() {
        for goal in variables(&kb) {
            let s = backward(&kb, &goal, &a);
            if let Some(Verdict::Proven { proof, .. }) = &s.outcome().unwrap().verdict {
                if !proof_is_valid(proof, &s) {
                    return Err(format!("demo goal {goal}: invalid proof"));
                }
                proofs += 1;
            }
        }
    }
    for (i, c) in suite(Family::SingleValued, SUITE_SEED, SUITE_SIZE)
        .iter()
        .enumerate()
    {
        for goal in variables(&c.kb) {
            let s = backward(&c.kb, &goal, &c.assignment);
            if let Some(Verdict::Proven { proof, .. }) = &s.outcome().unwrap().verdict {
                if !proof_is_valid(proof, &s) {
                    return Err(format!("KB #{i} goal {goal}: invalid proof"));
                }
                proofs += 1;
            }
        }
    }
    let initial = vec![
        ("fever".to_string(), Value::Bool(true)),
        ("cough".to_string(), Value::Bool(true)),
        ("sputum".to_string(), Value::symbol("purulent")),
    ];
    let s = run_with_answers(kb, Mode::Forward, &initial, &[]).unwrap();
    let text = render_explanation(&how(&s, "diagnosis").map_err(|e| e.to_string())?);
    if text != GOLDEN_HOW {
        return Err(format!("how(diagnosis) rendered as:\n{text}"));
    }
    Ok(format!(
        "{proofs} proven runs re-check Satisfied; how(diagnosis) matches the 5-line golden text"
    ))
}

const VOCAB: &[&str] = &[
    "rulebase",
    "meta",
    "global",
    "var",
    "rule",
    "if",
    "then",
    "and",
    "in",
    "ask",
    "recommend",
    "when",
    "use",
    "bool",
    "number",
    "symbol",
    "text",
    "true",
    "false",
    "{",
    "}",
    ",",
    ":",
    ":=",
    "=",
    "!=",
    "<",
    ">=",
    "x",
    "R1",
    "7",
    "-2.5",
    "\"s\"",
    "\"",
    "#\n",
    "\n",
    "\n",
];

fn fuzz_input(r: &mut impl Rng, i: usize) -> Vec<u8> {
    match i % 4 {
        0 | 1 => {
            let n = r.random_range(0..256);
            (0..n).map(|_| r.random()).collect()
        }
        2 => {
            let n = r.random_range(0..60);
            let mut s = String::new();
            for _ in 0..n {
                s.push_str(VOCAB.choose(r).unwrap());
                s.push(' ');
            }
            s.into_bytes()
        }
        _ => {
            let mut bytes = DEMO_CHEST_KB.as_bytes().to_vec();
            for _ in 0..r.random_range(1..5) {
                let at = r.random_range(0..bytes.len());
                if r.random_bool(0.5) {
                    bytes.remove(at);
                } else {
                    bytes[at] = r.random();
                }
            }
            bytes
        }
    }
}

fn parser_robustness() -> Result<String, String> {
    const FUZZ: usize = 1_000_000;
    let start = Instant::now();
    let mut r = rng(SUITE_SEED + 3);
    let mut parsed = 0;
    for i in 0..FUZZ {
        let input = fuzz_input(&mut r, i);
        let outcome = catch_unwind(AssertUnwindSafe(|| parse_kb_bytes(&input).is_ok()));
        match outcome {
            Ok(true) => parsed += 1,
            Ok(false) => {}
            Err(_) => {
                return Err(format!(
                    "parser panicked on input #{i}: {:?}",
                    String::from_utf8_lossy(&input)
                ))
            }
        }
    }
    let fuzz_time = start.elapsed();

    let mut r = rng(SUITE_SEED + 4);
    for i in 0..500 {
        let kb = random_rich_kb(&mut r);
        let text = serialize_kb(&kb);
        let back = parse_kb(&text).map_err(|e| format!("KB #{i} does not reparse: {e:?}"))?;
        let expected = KnowledgeBase {
            id: DEFAULT_KB_ID.to_string(),
            version: 0,
            ..kb.clone()
        };
        if back != expected {
            return Err(format!("KB #{i}: parse(serialize) differs"));
        }
        if serialize_kb(&back) != text {
            return Err(format!("KB #{i}: serializer not idempotent"));
        }
        if decode_interchange(&encode_interchange(&kb)).as_ref() != Ok(&kb) {
            return Err(format!("KB #{i}: decode(encode) differs"));
        }
    }
    Ok(format!(
        "{FUZZ} fuzz inputs crash-free ({parsed} parsed) in {fuzz_time:.2?}; 500 KBs round-trip text and interchange"
    ))
}

fn termination() -> Result<String, String> {
    let mut kbs: Vec<Arc<KnowledgeBase>> = vec![Arc::new(
        parse_kb(
            "rulebase c {\n  var p: bool\n  var q: bool\n  rule A: if p = true then q := true\n  rule B: if q = true then p := true\n}\n",
        )
        .unwrap(),
    )];
    let mut r = rng(SUITE_SEED + 5);
    while kbs.len() < 500 {
        let family = if kbs.len().is_multiple_of(2) {
            Family::General
        } else {
            Family::SingleValued
        };
        let kb = random_kb(&mut r, family, Shape::default());
        if !dependency_graph(&kb.rulebases[0]).cycles().is_empty() {
            kbs.push(Arc::new(kb));
        }
    }
    let mut sessions = 0;
    let mut peak = 0f64;
    for (i, kb) in kbs.iter().enumerate() {
        let assignment = random_assignment(&mut r, kb);
        let answers: Vec<_> = assignment
            .iter()
            .filter(|_| r.random_bool(0.7))
            .cloned()
            .collect();
        let mut modes = vec![Mode::Forward, Mode::Hybrid];
        modes.extend(
            variables(kb)
                .into_iter()
                .map(|goal| Mode::Backward { goal }),
        );
        for mode in modes {
            let s = run_with_answers(kb.clone(), mode.clone(), &[], &answers)
                .map_err(|e| format!("cyclic KB #{i} {}: {e}", mode.name()))?;
            if !s.is_done() || s.steps() > s.step_bound() {
                return Err(format!(
                    "cyclic KB #{i} {}: {} steps, bound {}",
                    mode.name(),
                    s.steps(),
                    s.step_bound()
                ));
            }
            peak = peak.max(s.steps() as f64 / s.step_bound() as f64);
            sessions += 1;
        }
    }
    Ok(format!(
        "{sessions} sessions over {} cyclic KBs all done within the step bound (peak {:.1}% of bound)",
        kbs.len(),
        peak * 100.0
    ))
}

fn main() {
    let mut report = Report { failures: 0 };
    report.check("fixpoint oracle equivalence", fixpoint_equivalence());
    report.check("forward/backward agreement", agreement());
    report.check("refraction and determinism", refraction_and_determinism());
    report.check("demo golden transcript", golden_transcript());
    report.check("explanation validity", explanation_validity());
    report.check("parser robustness and round-trip", parser_robustness());
    report.check("termination bound", termination());
    if report.failures > 0 {
        println!("{} acceptance criteria failed", report.failures);
        std::process::exit(1);
    }
}
