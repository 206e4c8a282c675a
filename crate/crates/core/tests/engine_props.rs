mod common;

use std::collections::BTreeSet;
use std::sync::Arc;

use chainshell_core::engine::{
    backward_step, forward_chain, prepare_session, start_session, Answer, Event, InferenceSession,
    Mode, Provenance, Status, Verdict,
};
use chainshell_core::explain::{how, Justification, ProofNode};
use chainshell_core::kb::{validate_kb, KnowledgeBase, Value};
use chainshell_core::testkit::{
    random_assignment, random_goal, random_kb, rng, run_with_answers, Family, Shape,
};
use common::{ancestry, asked, fired_ids, fixpoint, holds, memory_values, satisfied, Facts};
use proptest::prelude::*;
use rand::Rng;

struct Case {
    kb: Arc<KnowledgeBase>,
    goal: String,
    assignment: Vec<(String, Value)>,
}

fn case(seed: u64, family: Family) -> Case {
    let mut r = rng(seed);
    let kb = random_kb(&mut r, family, Shape::default());
    let goal = random_goal(&mut r, &kb);
    let assignment = random_assignment(&mut r, &kb);
    Case {
        kb: Arc::new(kb),
        goal,
        assignment,
    }
}

/// Answers drawn from `assignment`, with each answer independently replaced
/// by a refusal with probability `refuse`.
fn partial(seed: u64, assignment: &[(String, Value)], refuse: f64) -> Vec<(String, Value)> {
    let mut r = rng(seed ^ 0x5eed);
    assignment
        .iter()
        .filter(|_| !r.random_bool(refuse))
        .cloned()
        .collect()
}

fn all_modes(goal: &str) -> [Mode; 3] {
    [
        Mode::Forward,
        Mode::Backward {
            goal: goal.to_string(),
        },
        Mode::Hybrid,
    ]
}

fn run(c: &Case, mode: Mode, answers: &[(String, Value)]) -> InferenceSession {
    let initial: &[(String, Value)] = if mode == Mode::Forward {
        &c.assignment
    } else {
        &[]
    };
    run_with_answers(c.kb.clone(), mode, initial, answers).expect("generated cases are valid")
}

fn check_proof(node: &ProofNode, s: &InferenceSession) {
    match &node.justification {
        Justification::Given => assert_eq!(node.fact.provenance, Provenance::Given),
        Justification::Answered => {
            assert_eq!(node.fact.provenance, Provenance::Answered);
            assert!(s.trace().iter().any(|e| matches!(&e.event,
                Event::AnswerReceived { variable, value: Some(v) }
                    if *variable == node.fact.variable && *v == node.fact.value)));
        }
        Justification::ByRule { rule, children } => {
            let r = s
                .active_rulebase()
                .rule(rule)
                .expect("proof names a known rule");
            assert_eq!(children.len(), r.antecedents.len());
            let facts: Facts = children
                .iter()
                .map(|c| (c.fact.variable.clone(), c.fact.value.clone()))
                .collect();
            for (cond, child) in r.antecedents.iter().zip(children) {
                assert_eq!(cond.variable, child.fact.variable);
            }
            assert!(
                satisfied(&r.antecedents, &facts),
                "rule {rule} not satisfied by its children"
            );
            assert!(fired_ids(s).contains(rule));
            children.iter().for_each(|c| check_proof(c, s));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn generated_kbs_are_valid(seed in any::<u64>()) {
        for family in [Family::SingleValued, Family::General] {
            let c = case(seed, family);
            let errors: Vec<_> = validate_kb(&c.kb).into_iter().filter(|d| d.is_error()).collect();
            prop_assert!(errors.is_empty(), "{errors:?}");
        }
    }

    #[test]
    fn forward_matches_fixpoint_oracle(seed in any::<u64>()) {
        for family in [Family::SingleValued, Family::General] {
            let c = case(seed, family);
            let out = forward_chain(c.kb.clone(), &c.assignment).unwrap();
            let (facts, fired) = fixpoint(&c.kb.rulebases[0], &c.assignment);
            let got: Facts = out.memory.facts().map(|f| (f.variable.clone(), f.value.clone())).collect();
            prop_assert_eq!(got, facts);
            prop_assert_eq!(out.fired, fired);
        }
    }

    #[test]
    fn backward_agrees_with_forward(seed in any::<u64>()) {
        let c = case(seed, Family::SingleValued);
        let forward = forward_chain(c.kb.clone(), &c.assignment).unwrap();
        let s = run(&c, Mode::Backward { goal: c.goal.clone() }, &c.assignment);
        let verdict = s.outcome().unwrap().verdict.clone().unwrap();
        match verdict {
            Verdict::Proven { value, .. } => prop_assert_eq!(forward.memory.value(&c.goal), Some(&value)),
            Verdict::NotProven { .. } => prop_assert_eq!(forward.memory.value(&c.goal), None),
        }
    }

    #[test]
    fn hybrid_fires_the_forward_rule_set(seed in any::<u64>()) {
        let c = case(seed, Family::SingleValued);
        let forward: BTreeSet<String> = forward_chain(c.kb.clone(), &c.assignment).unwrap().fired.into_iter().collect();
        let s = run(&c, Mode::Hybrid, &c.assignment);
        let hybrid: BTreeSet<String> = fired_ids(&s).into_iter().collect();
        prop_assert_eq!(hybrid, forward);
    }

    #[test]
    fn sessions_are_refractory_deterministic_and_bounded(seed in any::<u64>(), refuse in 0.0f64..0.5) {
        for family in [Family::SingleValued, Family::General] {
        let c = case(seed, family);
        let answers = partial(seed, &c.assignment, refuse);
        for mode in all_modes(&c.goal) {
            let a = run(&c, mode.clone(), &answers);
            let b = run(&c, mode.clone(), &answers);
            prop_assert_eq!(a.trace(), b.trace());
            let fired = fired_ids(&a);
            let unique: BTreeSet<&String> = fired.iter().collect();
            prop_assert_eq!(unique.len(), fired.len());
            prop_assert!(a.steps() <= a.step_bound(), "{} steps, bound {}", a.steps(), a.step_bound());
            let q = asked(&a);
            let distinct: BTreeSet<&String> = q.iter().collect();
            prop_assert_eq!(distinct.len(), q.len(), "a variable was asked twice");
            if mode == Mode::Forward {
                prop_assert!(q.is_empty());
            }
        }
        }
    }

    #[test]
    fn traces_replay_soundly(seed in any::<u64>(), refuse in 0.0f64..0.5) {
        let c = case(seed, Family::General);
        let answers = partial(seed, &c.assignment, refuse);
        for mode in all_modes(&c.goal) {
            let s = run(&c, mode.clone(), &answers);
            let mut facts: Facts = s.initial_facts().iter().cloned().collect();
            for e in s.trace() {
                if let Event::AnswerReceived { variable, value: Some(v) } = &e.event {
                    facts.insert(variable.clone(), v.clone());
                }
            }
            for e in s.trace() {
                if let Event::RuleFired { rule, bindings } = &e.event {
                    let r = s.active_rulebase().rule(rule).unwrap();
                    prop_assert!(satisfied(&r.antecedents, &facts), "{rule} fired unsatisfied");
                    for b in bindings {
                        prop_assert_eq!(facts.get(&b.variable), Some(&b.value));
                    }
                    for a in &r.consequents {
                        facts.entry(a.variable.clone()).or_insert_with(|| a.value.clone());
                    }
                }
            }
            prop_assert_eq!(&facts, &memory_values(&s));
            for f in s.memory().facts() {
                if let Provenance::Derived(rule) = &f.provenance {
                    prop_assert!(fired_ids(&s).contains(rule));
                }
            }
        }
    }

    #[test]
    fn backward_questions_are_relevant(seed in any::<u64>()) {
        let c = case(seed, Family::General);
        let s = run(&c, Mode::Backward { goal: c.goal.clone() }, &c.assignment);
        let rules = ancestry(&c.kb.rulebases[0], &c.goal);
        for q in asked(&s) {
            let relevant = q == c.goal
                || rules.iter().any(|r| r.antecedents.iter().any(|a| a.variable == q));
            prop_assert!(relevant, "asked {q} for goal {}", c.goal);
        }
    }

    #[test]
    fn pending_questions_are_askable_and_unset(seed in any::<u64>()) {
        let c = case(seed, Family::General);
        for mode in [Mode::Backward { goal: c.goal.clone() }, Mode::Hybrid] {
            let mut s = start_session(c.kb.clone(), mode, &[]).unwrap();
            while let Status::NeedsAnswer(q) = s.status() {
                let decl = s.active_rulebase().declaration(&q.variable).unwrap();
                prop_assert!(decl.askable);
                prop_assert!(!s.memory().contains(&q.variable));
                let answer = c.assignment.iter().find(|(v, _)| *v == q.variable).unwrap().1.clone();
                s = s.resume(Answer::Value(answer)).unwrap();
            }
        }
    }

    #[test]
    fn proofs_are_valid_and_faithful(seed in any::<u64>(), refuse in 0.0f64..0.3) {
        let c = case(seed, Family::General);
        let answers = partial(seed, &c.assignment, refuse);
        for mode in all_modes(&c.goal) {
            let s = run(&c, mode, &answers);
            if let Some(Verdict::Proven { proof, value, variable }) = &s.outcome().unwrap().verdict {
                prop_assert_eq!(s.memory().value(variable), Some(value));
                check_proof(proof, &s);
            }
            for f in s.memory().facts() {
                check_proof(&how(&s, &f.variable).unwrap(), &s);
            }
        }
    }

    #[test]
    fn proof_rules_were_on_the_rule_stack(seed in any::<u64>()) {
        let c = case(seed, Family::General);
        // one transition at a time, to observe every rule stack
        let mut s = prepare_session(c.kb.clone(), Mode::Backward { goal: c.goal.clone() }, &[]).unwrap();
        let mut stacked: BTreeSet<String> = BTreeSet::new();
        while !s.is_done() {
            stacked.extend(s.rule_stack().into_iter().map(|e| e.rule));
            let answer = s.question().map(|q| {
                Answer::Value(c.assignment.iter().find(|(v, _)| *v == q.variable).unwrap().1.clone())
            });
            s = backward_step(&s, answer).unwrap();
        }
        if let Some(Verdict::Proven { proof, .. }) = &s.outcome().unwrap().verdict {
            let mut rules = Vec::new();
            collect_rules(proof, &mut rules);
            for r in rules {
                prop_assert!(stacked.contains(&r), "{r} never stacked");
            }
        }
    }

    #[test]
    fn oracle_condition_semantics_agree(seed in any::<u64>()) {
        // the engine's evaluator and the oracle's agree on every antecedent
        // against every reachable memory
        let c = case(seed, Family::General);
        let out = forward_chain(c.kb.clone(), &c.assignment).unwrap();
        let facts: Facts = out.memory.facts().map(|f| (f.variable.clone(), f.value.clone())).collect();
        for r in &c.kb.rulebases[0].rules {
            for cond in &r.antecedents {
                let engine = chainshell_core::engine::eval_condition(cond, &out.memory).unwrap();
                let oracle = holds(cond, &facts);
                let same = matches!(
                    (engine, oracle),
                    (chainshell_core::engine::Truth::True, Some(true))
                        | (chainshell_core::engine::Truth::False, Some(false))
                        | (chainshell_core::engine::Truth::UnknownVariable, None)
                );
                prop_assert!(same);
            }
        }
    }
}

fn collect_rules(p: &ProofNode, out: &mut Vec<String>) {
    if let Justification::ByRule { rule, children } = &p.justification {
        out.push(rule.clone());
        children.iter().for_each(|c| collect_rules(c, out));
    }
}

#[test]
fn demo_question_economy() {
    let kb = Arc::new(chainshell_core::lang::parse_kb(chainshell_core::DEMO_CHEST_KB).unwrap());
    let askable = kb.rulebases[0]
        .declarations
        .iter()
        .filter(|d| d.askable)
        .count();
    assert_eq!(askable, 4);
    let answers = vec![("fever".to_string(), Value::Bool(false))];
    let s = run_with_answers(
        kb,
        Mode::Backward {
            goal: "diagnosis".into(),
        },
        &[],
        &answers,
    )
    .unwrap();
    assert_eq!(asked(&s), ["fever"]);
}

#[test]
fn pinned_kb_ignores_later_edits() {
    let kb = chainshell_core::lang::parse_kb(chainshell_core::DEMO_CHEST_KB).unwrap();
    let shared = Arc::new(kb.clone());
    let s = start_session(
        shared,
        Mode::Backward {
            goal: "diagnosis".into(),
        },
        &[],
    )
    .unwrap();
    let mut edited = kb;
    edited.rulebases[0].rules.remove(0);
    edited.rulebases[0].reindex();
    edited.version += 1;
    drop(edited);
    let s = s.resume(Answer::Value(Value::Bool(true))).unwrap();
    assert_eq!(s.question().unwrap().variable, "cough");
    assert_eq!(s.kb_version(), 0);
}
