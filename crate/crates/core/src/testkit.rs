//! Seeded random knowledge bases, assignments and session drivers shared by
//! the test suites.

use std::sync::Arc;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
pub use rand_chacha::ChaCha8Rng;

use crate::engine::{start_session, Answer, EngineError, InferenceSession, Mode, Status};
use crate::kb::{
    Assignment, CmpOp, Condition, KnowledgeBase, MetaRule, Rule, RuleBase, Value, ValueKind,
    VariableDecl,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Askable variables are never concluded, and every rule concluding a
    /// variable assigns it the same value. Forward and backward chaining
    /// establish the same facts on this family.
    SingleValued,
    /// Any variable may be askable or concluded, with any value.
    General,
}

/// Bounds of the generated rule bases: bool and symbol variables only.
#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub max_rules: usize,
    pub max_vars: usize,
    pub max_antecedents: usize,
}

impl Default for Shape {
    fn default() -> Self {
        Shape {
            max_rules: 15,
            max_vars: 10,
            max_antecedents: 3,
        }
    }
}

fn small_decl(rng: &mut impl Rng, name: String) -> VariableDecl {
    if rng.random_bool(0.5) {
        VariableDecl::new(name, ValueKind::Bool)
    } else {
        let k = rng.random_range(2..=4);
        VariableDecl::new(name, ValueKind::Symbol).with_symbols((0..k).map(|i| format!("s{i}")))
    }
}

/// A value admitted by `decl`.
pub fn random_value(rng: &mut impl Rng, decl: &VariableDecl) -> Value {
    match decl.kind {
        ValueKind::Bool => Value::Bool(rng.random_bool(0.5)),
        ValueKind::Symbol => Value::symbol(
            decl.symbol_set
                .as_ref()
                .and_then(|s| s.choose(rng))
                .expect("symbol declarations carry a set")
                .clone(),
        ),
        ValueKind::Number => Value::Number(f64::from(rng.random_range(-400..400)) / 4.0),
        ValueKind::Text => Value::text(random_text(rng)),
    }
}

fn random_text(rng: &mut impl Rng) -> String {
    const POOL: &[char] = &[
        'a', 'z', ' ', '"', '\\', '\n', '\t', '#', '{', 'é', '→', '0',
    ];
    let n = rng.random_range(0..8);
    (0..n).map(|_| *POOL.choose(rng).unwrap()).collect()
}

/// A well-typed condition on `decl`. With `bias`, usually tests for that value.
fn random_condition(rng: &mut impl Rng, decl: &VariableDecl, bias: Option<&Value>) -> Condition {
    if let Some(v) = bias {
        if rng.random_bool(0.7) {
            return Condition::eq(decl.name.clone(), v.clone());
        }
    }
    match decl.kind {
        ValueKind::Symbol if rng.random_bool(0.3) => {
            let set = decl.symbol_set.as_ref().unwrap();
            let k = rng.random_range(1..=set.len());
            let mut members: Vec<&String> = set.choose_multiple(rng, k).collect();
            members.sort();
            Condition::is_in(
                decl.name.clone(),
                members.into_iter().map(Value::symbol).collect(),
            )
        }
        ValueKind::Number => {
            let op = *CmpOp::ALL.choose(rng).unwrap();
            Condition::compare(decl.name.clone(), op, random_value(rng, decl))
        }
        _ => {
            let op = if rng.random_bool(0.75) {
                CmpOp::Eq
            } else {
                CmpOp::Ne
            };
            Condition::compare(decl.name.clone(), op, random_value(rng, decl))
        }
    }
}

/// A valid single-rule-base knowledge base of the given family.
pub fn random_kb(rng: &mut impl Rng, family: Family, shape: Shape) -> KnowledgeBase {
    let nvars = rng.random_range(2..=shape.max_vars.max(2));
    let mut decls: Vec<VariableDecl> = (0..nvars)
        .map(|i| small_decl(rng, format!("v{i}")))
        .collect();
    let askable: Vec<bool> = match family {
        Family::SingleValued => {
            let n_ask = rng.random_range(1..nvars);
            (0..nvars).map(|i| i < n_ask).collect()
        }
        Family::General => (0..nvars).map(|_| rng.random_bool(0.5)).collect(),
    };
    for (d, &ask) in decls.iter_mut().zip(&askable) {
        if ask {
            d.askable = true;
            d.prompt = Some(format!("Value of {}?", d.name));
        }
    }
    let concludable: Vec<usize> = match family {
        Family::SingleValued => (0..nvars).filter(|&i| !askable[i]).collect(),
        Family::General => (0..nvars).collect(),
    };
    let targets: Vec<Value> = decls.iter().map(|d| random_value(rng, d)).collect();

    let nrules = rng.random_range(0..=shape.max_rules);
    let mut rules = Vec::with_capacity(nrules);
    for i in 0..nrules {
        let n_ante = rng.random_range(1..=shape.max_antecedents.max(1));
        let antecedents = (0..n_ante)
            .map(|_| {
                let v = rng.random_range(0..nvars);
                let bias = (family == Family::SingleValued && !askable[v]).then(|| &targets[v]);
                random_condition(rng, &decls[v], bias)
            })
            .collect();
        let n_cons = rng.random_range(1..=2.min(concludable.len()));
        let consequents = concludable
            .choose_multiple(rng, n_cons)
            .map(|&v| {
                let value = match family {
                    Family::SingleValued => targets[v].clone(),
                    Family::General => random_value(rng, &decls[v]),
                };
                Assignment::new(decls[v].name.clone(), value)
            })
            .collect();
        let recommendation = rng.random_bool(0.3).then(|| format!("advice {i}"));
        rules.push(Rule {
            id: format!("R{i}"),
            order_index: i,
            antecedents,
            consequents,
            recommendation,
        });
    }
    KnowledgeBase {
        rulebases: vec![RuleBase {
            id: "rb".into(),
            declarations: decls,
            rules,
        }],
        ..KnowledgeBase::default()
    }
}

/// A goal for backward chaining: usually a concluded variable.
pub fn random_goal(rng: &mut impl Rng, kb: &KnowledgeBase) -> String {
    let rb = &kb.rulebases[0];
    let concluded: Vec<&str> = rb
        .rules
        .iter()
        .flat_map(|r| r.consequents.iter().map(|a| a.variable.as_str()))
        .collect();
    match concluded.choose(rng) {
        Some(v) if rng.random_bool(0.85) => v.to_string(),
        _ => rb.declarations.choose(rng).unwrap().name.clone(),
    }
}

/// A value for every askable variable of the first rule base.
pub fn random_assignment(rng: &mut impl Rng, kb: &KnowledgeBase) -> Vec<(String, Value)> {
    kb.rulebases[0]
        .declarations
        .iter()
        .filter(|d| d.askable)
        .map(|d| (d.name.clone(), random_value(rng, d)))
        .collect()
}

/// A valid knowledge base exercising the whole language: several rule
/// bases, every value kind, meta-rules, globals and escaped strings.
pub fn random_rich_kb(rng: &mut impl Rng) -> KnowledgeBase {
    let kinds = [
        ValueKind::Bool,
        ValueKind::Number,
        ValueKind::Symbol,
        ValueKind::Text,
    ];
    let decl = |rng: &mut ChaCha8Rng, name: String| {
        let kind = *kinds.choose(rng).unwrap();
        let mut d = match kind {
            ValueKind::Symbol => small_decl(rng, name),
            _ => VariableDecl::new(name, kind),
        };
        if d.kind == ValueKind::Symbol && rng.random_bool(0.5) {
            d.symbol_set = Some(vec!["x".into(), "Y_2".into(), "zz".into()]);
        }
        if rng.random_bool(0.5) {
            d.askable = true;
            d.prompt = Some(format!("{}?", random_text(rng)));
        }
        d
    };
    let mut local = ChaCha8Rng::seed_from_u64(rng.random());
    let rng = &mut local;

    let n_globals = rng.random_range(0..=3);
    let globals: Vec<VariableDecl> = (0..n_globals).map(|i| decl(rng, format!("g{i}"))).collect();
    let n_rbs = rng.random_range(1..=3);
    let mut rulebases = Vec::new();
    for b in 0..n_rbs {
        let n_vars = rng.random_range(1..=6);
        let decls: Vec<VariableDecl> = (0..n_vars)
            .map(|i| decl(rng, format!("b{b}_v{i}")))
            .collect();
        let visible: Vec<&VariableDecl> = decls.iter().chain(&globals).collect();
        let n_rules = rng.random_range(0..=6);
        let mut rules = Vec::new();
        for i in 0..n_rules {
            let n_ante = rng.random_range(1..=4);
            let antecedents = (0..n_ante)
                .map(|_| {
                    let d = *visible.choose(rng).unwrap();
                    random_condition(rng, d, None)
                })
                .collect();
            let n_cons = rng.random_range(1..=2.min(visible.len()));
            let consequents = visible
                .choose_multiple(rng, n_cons)
                .map(|d| Assignment::new(d.name.clone(), random_value(rng, d)))
                .collect();
            let recommendation = rng.random_bool(0.4).then(|| random_text(rng));
            rules.push(Rule {
                id: if rng.random_bool(0.5) {
                    format!("R{i}")
                } else {
                    format!("rule_{b}_{i}")
                },
                order_index: i,
                antecedents,
                consequents,
                recommendation,
            });
        }
        rulebases.push(RuleBase {
            id: format!("rb{b}"),
            declarations: decls,
            rules,
        });
    }
    let mut meta_rules = Vec::new();
    if !globals.is_empty() {
        for _ in 0..rng.random_range(0..=3) {
            let n = rng.random_range(1..=2);
            let antecedents = (0..n)
                .map(|_| {
                    let d = globals.choose(rng).unwrap();
                    random_condition(rng, d, None)
                })
                .collect();
            let target = rulebases.choose(rng).unwrap().id.clone();
            meta_rules.push(MetaRule {
                antecedents,
                target_rulebase: target,
            });
        }
    }
    let mut order: Vec<usize> = (0..rulebases.len()).collect();
    order.shuffle(rng);
    KnowledgeBase {
        id: format!("kb{}", rng.random_range(0..1000)),
        version: rng.random_range(0..50),
        global_declarations: globals,
        meta_rules,
        rulebases: order.into_iter().map(|i| rulebases[i].clone()).collect(),
    }
}

/// Runs a session to completion, answering each question from `answers`
/// and refusing questions it has no answer for.
pub fn run_with_answers(
    kb: Arc<KnowledgeBase>,
    mode: Mode,
    initial: &[(String, Value)],
    answers: &[(String, Value)],
) -> Result<InferenceSession, EngineError> {
    let mut s = start_session(kb, mode, initial)?;
    while let Status::NeedsAnswer(q) = s.status() {
        let answer = answers
            .iter()
            .find(|(v, _)| *v == q.variable)
            .map_or(Answer::Unknown, |(_, value)| Answer::Value(value.clone()));
        s = s.resume(answer)?;
    }
    Ok(s)
}
