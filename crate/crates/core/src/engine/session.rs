use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    eval_condition, match_rule, Binding, EngineError, Event, Fact, FailReason, MatchResult,
    Provenance, Scope, TraceEvent, Truth, WorkingMemory,
};
use crate::explain::{proof_tree, ProofNode};
use crate::kb::{
    select_rulebase, validate_kb, KnowledgeBase, RuleBase, Value, ValueKind, VariableDecl,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mode {
    Forward,
    Backward { goal: String },
    Hybrid,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Forward => "forward",
            Mode::Backward { .. } => "backward",
            Mode::Hybrid => "hybrid",
        }
    }

    pub fn goal(&self) -> Option<&str> {
        match self {
            Mode::Backward { goal } => Some(goal),
            _ => None,
        }
    }
}

/// A reply to a question. `Unknown` is a refusal: the variable stays unset
/// and is never asked again.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    Value(Value),
    Unknown,
}

/// The values a question accepts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "values", rename_all = "snake_case")]
pub enum Allowed {
    Bool,
    Symbols(Vec<String>),
    Number,
    Text,
}

impl Allowed {
    pub fn for_decl(decl: &VariableDecl) -> Allowed {
        match decl.kind {
            ValueKind::Bool => Allowed::Bool,
            ValueKind::Number => Allowed::Number,
            ValueKind::Text => Allowed::Text,
            ValueKind::Symbol => Allowed::Symbols(decl.symbol_set.clone().unwrap_or_default()),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Allowed::Bool => "true, false".to_string(),
            Allowed::Symbols(set) => set.join(", "),
            Allowed::Number => "a number".to_string(),
            Allowed::Text => "any text".to_string(),
        }
    }

    /// Reads a typed-in answer. `None` when the input is not one of the
    /// allowed values.
    pub fn parse(&self, input: &str) -> Option<Value> {
        match self {
            Allowed::Bool => Value::parse_as(ValueKind::Bool, input),
            Allowed::Number => Value::parse_as(ValueKind::Number, input),
            Allowed::Text => Value::parse_as(ValueKind::Text, input),
            Allowed::Symbols(set) => {
                let input = input.trim();
                set.iter().any(|s| s == input).then(|| Value::symbol(input))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub variable: String,
    pub prompt: String,
    pub allowed: Allowed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum Verdict {
    Proven {
        variable: String,
        value: Value,
        proof: ProofNode,
    },
    NotProven {
        variable: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    /// Present for backward sessions only.
    pub verdict: Option<Verdict>,
    pub memory: WorkingMemory,
    /// Recommendations of fired rules, in firing order.
    pub recommendations: Vec<String>,
    /// Fired rule ids, in firing order.
    pub fired: Vec<String>,
}

// one status per session; boxing the outcome buys nothing
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum Status {
    Running,
    NeedsAnswer(Question),
    Done(Outcome),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnsweredQuestion {
    pub variable: String,
    pub answer: Answer,
}

/// A goal-stack entry. `requested_by` is `None` for the root goal of a
/// backward session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalEntry {
    pub variable: String,
    pub requested_by: Option<String>,
}

/// A rule-stack entry: the rule, the antecedent being established, and the
/// variable the rule is pursued for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleEntry {
    pub rule: String,
    pub antecedent: usize,
    pub goal: String,
}

#[derive(Debug, Clone, Copy)]
enum Resolution {
    Established,
    Failed { tainted: bool },
}

// A failure is tainted when it may be an artifact of the occurrence check
// (a needed variable was already on the goal stack) and could succeed once
// more facts are known. Tainted failures are cached only for the current
// round; a root goal that ends a round tainted, with facts gained during it,
// starts another round. Untainted failures are permanent.
#[derive(Debug, Clone)]
struct GoalFrame {
    variable: String,
    requester: Option<usize>,
    cursor: usize,
    tainted: bool,
    root: bool,
    round_start: u64,
}

#[derive(Debug, Clone)]
struct RuleFrame {
    rule: usize,
    antecedent: usize,
    /// Pursued by the hybrid outer loop rather than for a goal.
    outer: bool,
    child: Option<Resolution>,
}

#[derive(Debug, Clone)]
enum Frame {
    Goal(GoalFrame),
    Rule(RuleFrame),
}

/// One consultation. Sessions are values: advancing returns a new session
/// and leaves the old one usable.
#[derive(Debug, Clone)]
pub struct InferenceSession {
    kb: Arc<KnowledgeBase>,
    rulebase: usize,
    concluders: Arc<BTreeMap<String, Vec<usize>>>,
    mode: Mode,
    initial: Vec<(String, Value)>,
    global: WorkingMemory,
    memory: WorkingMemory,
    frames: Vec<Frame>,
    fired: Vec<usize>,
    fired_set: Vec<bool>,
    dead: Vec<bool>,
    round_dead: Vec<bool>,
    refused: BTreeSet<String>,
    unprovable: BTreeSet<String>,
    round_failed: BTreeSet<String>,
    progress: u64,
    pass_cursor: usize,
    pass_fired: bool,
    recommendations: Vec<String>,
    answers: Vec<AnsweredQuestion>,
    trace: Vec<TraceEvent>,
    status: Status,
    steps: u64,
    bound: u64,
}

/// Upper bound on the steps any session of `mode` over `rb` can take. A step
/// is one forward cycle, or in backward and hybrid mode one resolved
/// antecedent, one rule firing or failing, or one question.
///
/// With W the sum over rules of (antecedents + 1), A the askable variables,
/// V the variables and R the rules: each rule is attempted at most once per
/// backward round (refraction plus failure caching), costing at most its
/// antecedents + 1; a goal pursuit runs at most 1 + V + A rounds since each
/// extra round needs a new fact or refusal; each askable variable is asked
/// at most once. Hybrid makes at most R + 1 passes, each attempting every
/// rule once and opening at most W backward pursuits.
pub fn step_bound(kb: &KnowledgeBase, rb: &RuleBase, mode: &Mode) -> u64 {
    let r = rb.rules.len() as u64;
    let w: u64 = rb
        .rules
        .iter()
        .map(|r| r.antecedents.len() as u64 + 1)
        .sum();
    let decls = || rb.declarations.iter().chain(&kb.global_declarations);
    let v = decls().count() as u64;
    let a = decls().filter(|d| d.askable).count() as u64;
    let progress = v + a;
    match mode {
        Mode::Forward => r + 1,
        Mode::Backward { .. } => (1 + progress) * w + a,
        Mode::Hybrid => {
            let outer = (r + 1) * w;
            outer + (outer + progress) * w + a
        }
    }
}

fn check_value(decl: &VariableDecl, value: &Value) -> Result<(), EngineError> {
    if decl.admits(value) {
        Ok(())
    } else {
        Err(EngineError::InvalidValue {
            variable: decl.name.clone(),
            value: value.to_string(),
            expected: Allowed::for_decl(decl).describe(),
        })
    }
}

/// Builds a session without advancing it: status is `Running` and nothing
/// has been evaluated yet.
pub fn prepare_session(
    kb: Arc<KnowledgeBase>,
    mode: Mode,
    initial: &[(String, Value)],
) -> Result<InferenceSession, EngineError> {
    if let Some(d) = validate_kb(&kb).into_iter().find(|d| d.is_error()) {
        return Err(EngineError::InvalidKb(d.to_string()));
    }
    let mut seen = BTreeSet::new();
    for (var, _) in initial {
        if !seen.insert(var.as_str()) {
            return Err(EngineError::DuplicateFact(var.clone()));
        }
    }
    let mut global = WorkingMemory::new(Scope::Global);
    for (var, value) in initial {
        if let Some(decl) = kb.global_declaration(var) {
            check_value(decl, value)?;
            global.insert(Fact::new(var.clone(), value.clone(), Provenance::Given));
        }
    }
    let rb_id = select_rulebase(&kb, &global).ok_or(EngineError::NoRuleBase)?;
    let rulebase = kb
        .rulebases
        .iter()
        .position(|rb| rb.id == rb_id)
        .ok_or(EngineError::NoRuleBase)?;
    let rb = &kb.rulebases[rulebase];

    let mut memory = WorkingMemory::new(Scope::RuleBase(rb.id.clone()));
    for (var, value) in initial {
        let decl = kb
            .resolve(rb, var)
            .ok_or_else(|| EngineError::UnknownVariable(var.clone()))?;
        check_value(decl, value)?;
        memory.insert(Fact::new(var.clone(), value.clone(), Provenance::Given));
    }
    if let Mode::Backward { goal } = &mode {
        if kb.resolve(rb, goal).is_none() {
            return Err(EngineError::UnknownGoal(goal.clone()));
        }
    }

    let mut concluders: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, rule) in rb.rules.iter().enumerate() {
        let mut vars: Vec<&str> = rule
            .consequents
            .iter()
            .map(|a| a.variable.as_str())
            .collect();
        vars.dedup();
        for v in vars {
            let list = concluders.entry(v.to_string()).or_default();
            if list.last() != Some(&i) {
                list.push(i);
            }
        }
    }

    let n = rb.rules.len();
    let bound = step_bound(&kb, rb, &mode);
    let mut session = InferenceSession {
        rulebase,
        concluders: Arc::new(concluders),
        initial: initial.to_vec(),
        global,
        memory,
        frames: Vec::new(),
        fired: Vec::new(),
        fired_set: vec![false; n],
        dead: vec![false; n],
        round_dead: vec![false; n],
        refused: BTreeSet::new(),
        unprovable: BTreeSet::new(),
        round_failed: BTreeSet::new(),
        progress: 0,
        pass_cursor: 0,
        pass_fired: false,
        recommendations: Vec::new(),
        answers: Vec::new(),
        trace: Vec::new(),
        status: Status::Running,
        steps: 0,
        bound,
        mode,
        kb,
    };
    if let Mode::Backward { goal } = &session.mode {
        let goal = goal.clone();
        session.push_goal(goal, None);
    }
    Ok(session)
}

/// Starts a session and advances it until it finishes or needs an answer.
pub fn start_session(
    kb: Arc<KnowledgeBase>,
    mode: Mode,
    initial: &[(String, Value)],
) -> Result<InferenceSession, EngineError> {
    let mut s = prepare_session(kb, mode, initial)?;
    s.advance()?;
    Ok(s)
}

/// Runs forward chaining to completion.
pub fn forward_chain(
    kb: Arc<KnowledgeBase>,
    initial: &[(String, Value)],
) -> Result<Outcome, EngineError> {
    let s = start_session(kb, Mode::Forward, initial)?;
    match s.status {
        Status::Done(outcome) => Ok(outcome),
        _ => unreachable!("forward chaining never waits"),
    }
}

/// One forward cycle: fires the topmost unfired satisfied rule, or finishes.
pub fn forward_step(s: &InferenceSession) -> Result<InferenceSession, EngineError> {
    if s.mode != Mode::Forward {
        return Err(EngineError::InvalidState("not a forward session".into()));
    }
    s.single_step(None)
}

/// One backward transition, or applies `answer` if the session is waiting.
pub fn backward_step(
    s: &InferenceSession,
    answer: Option<Answer>,
) -> Result<InferenceSession, EngineError> {
    if !matches!(s.mode, Mode::Backward { .. }) {
        return Err(EngineError::InvalidState("not a backward session".into()));
    }
    s.single_step(answer)
}

/// One hybrid transition, or applies `answer` if the session is waiting.
pub fn hybrid_chain_step(
    s: &InferenceSession,
    answer: Option<Answer>,
) -> Result<InferenceSession, EngineError> {
    if s.mode != Mode::Hybrid {
        return Err(EngineError::InvalidState("not a hybrid session".into()));
    }
    s.single_step(answer)
}

impl InferenceSession {
    pub fn kb(&self) -> &Arc<KnowledgeBase> {
        &self.kb
    }

    pub fn kb_version(&self) -> u64 {
        self.kb.version
    }

    pub fn mode(&self) -> &Mode {
        &self.mode
    }

    pub fn active_rulebase(&self) -> &RuleBase {
        &self.kb.rulebases[self.rulebase]
    }

    pub fn initial_facts(&self) -> &[(String, Value)] {
        &self.initial
    }

    pub fn status(&self) -> &Status {
        &self.status
    }

    pub fn is_done(&self) -> bool {
        matches!(self.status, Status::Done(_))
    }

    pub fn outcome(&self) -> Option<&Outcome> {
        match &self.status {
            Status::Done(o) => Some(o),
            _ => None,
        }
    }

    pub fn question(&self) -> Option<&Question> {
        match &self.status {
            Status::NeedsAnswer(q) => Some(q),
            _ => None,
        }
    }

    pub fn memory(&self) -> &WorkingMemory {
        &self.memory
    }

    pub fn global_memory(&self) -> &WorkingMemory {
        &self.global
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    pub fn answers(&self) -> &[AnsweredQuestion] {
        &self.answers
    }

    /// Fired rule ids in firing order.
    pub fn fired(&self) -> Vec<&str> {
        let rb = self.active_rulebase();
        self.fired
            .iter()
            .map(|&i| rb.rules[i].id.as_str())
            .collect()
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn step_bound(&self) -> u64 {
        self.bound
    }

    /// Pending goals, bottom first.
    pub fn goal_stack(&self) -> Vec<GoalEntry> {
        let rb = self.active_rulebase();
        self.frames
            .iter()
            .filter_map(|f| match f {
                Frame::Goal(g) => Some(GoalEntry {
                    variable: g.variable.clone(),
                    requested_by: g.requester.map(|r| rb.rules[r].id.clone()),
                }),
                Frame::Rule(_) => None,
            })
            .collect()
    }

    /// Rules under pursuit, bottom first.
    pub fn rule_stack(&self) -> Vec<RuleEntry> {
        let rb = self.active_rulebase();
        let mut out = Vec::new();
        let mut goal: Option<&str> = None;
        for f in &self.frames {
            match f {
                Frame::Goal(g) => goal = Some(&g.variable),
                Frame::Rule(rf) => {
                    let rule = &rb.rules[rf.rule];
                    let target = match (rf.outer, goal) {
                        (false, Some(g)) => g.to_string(),
                        _ => rule.consequents[0].variable.clone(),
                    };
                    out.push(RuleEntry {
                        rule: rule.id.clone(),
                        antecedent: rf.antecedent,
                        goal: target,
                    });
                }
            }
        }
        out
    }

    /// Applies the answer to the pending question and advances until the
    /// session finishes or asks again.
    pub fn resume(&self, answer: Answer) -> Result<InferenceSession, EngineError> {
        let mut next = self.clone();
        next.apply_answer(answer)?;
        next.advance()?;
        Ok(next)
    }

    fn single_step(&self, answer: Option<Answer>) -> Result<InferenceSession, EngineError> {
        let mut next = self.clone();
        match (&self.status, answer) {
            (Status::NeedsAnswer(_), Some(a)) => next.apply_answer(a)?,
            (Status::NeedsAnswer(_), None) => {
                return Err(EngineError::InvalidState("an answer is required".into()));
            }
            (Status::Running, None) => next.transition()?,
            (Status::Running, Some(_)) => {
                return Err(EngineError::InvalidState("no question is pending".into()));
            }
            (Status::Done(_), _) => {
                return Err(EngineError::InvalidState("session is done".into()))
            }
        }
        Ok(next)
    }

    fn advance(&mut self) -> Result<(), EngineError> {
        while matches!(self.status, Status::Running) {
            self.transition()?;
        }
        Ok(())
    }

    fn emit(&mut self, event: Event) {
        let seq = self.trace.len() as u64;
        self.trace.push(TraceEvent { seq, event });
    }

    fn count_step(&mut self) -> Result<(), EngineError> {
        self.steps += 1;
        if self.steps > self.bound {
            return Err(EngineError::StepLimit(self.bound));
        }
        Ok(())
    }

    fn decl(&self, var: &str) -> Option<&VariableDecl> {
        self.kb.resolve(&self.kb.rulebases[self.rulebase], var)
    }

    fn apply_answer(&mut self, answer: Answer) -> Result<(), EngineError> {
        let Status::NeedsAnswer(q) = &self.status else {
            return Err(EngineError::InvalidState(
                "session is not waiting for an answer".into(),
            ));
        };
        let variable = q.variable.clone();
        let value = match &answer {
            Answer::Value(v) => {
                let decl = self.decl(&variable).expect("asked variables are declared");
                check_value(decl, v)?;
                self.memory
                    .insert(Fact::new(variable.clone(), v.clone(), Provenance::Answered));
                Some(v.clone())
            }
            Answer::Unknown => {
                self.refused.insert(variable.clone());
                None
            }
        };
        self.progress += 1;
        self.emit(Event::AnswerReceived {
            variable: variable.clone(),
            value,
        });
        self.answers.push(AnsweredQuestion { variable, answer });
        self.status = Status::Running;
        Ok(())
    }

    fn transition(&mut self) -> Result<(), EngineError> {
        match self.frames.last() {
            Some(Frame::Goal(_)) => self.goal_transition(),
            Some(Frame::Rule(_)) => self.rule_transition(),
            None => match self.mode {
                Mode::Forward => self.forward_transition(),
                Mode::Hybrid => self.outer_transition(),
                Mode::Backward { .. } => {
                    self.finish();
                    Ok(())
                }
            },
        }
    }

    fn forward_transition(&mut self) -> Result<(), EngineError> {
        self.count_step()?;
        let kb = Arc::clone(&self.kb);
        for (i, rule) in kb.rulebases[self.rulebase].rules.iter().enumerate() {
            if !self.fired_set[i] && match_rule(rule, &self.memory)? == MatchResult::Satisfied {
                self.fire(i);
                return Ok(());
            }
        }
        self.finish();
        Ok(())
    }

    fn outer_transition(&mut self) -> Result<(), EngineError> {
        while self.pass_cursor < self.fired_set.len() {
            let r = self.pass_cursor;
            self.pass_cursor += 1;
            if !self.fired_set[r] && !self.dead[r] {
                self.frames.push(Frame::Rule(RuleFrame {
                    rule: r,
                    antecedent: 0,
                    outer: true,
                    child: None,
                }));
                return Ok(());
            }
        }
        if self.pass_fired {
            self.pass_cursor = 0;
            self.pass_fired = false;
        } else {
            self.finish();
        }
        Ok(())
    }

    fn push_goal(&mut self, variable: String, requester: Option<usize>) {
        let root = !self.frames.iter().any(|f| matches!(f, Frame::Goal(_)));
        self.emit(Event::SubgoalPushed {
            variable: variable.clone(),
        });
        self.frames.push(Frame::Goal(GoalFrame {
            variable,
            requester,
            cursor: 0,
            tainted: false,
            root,
            round_start: self.progress,
        }));
    }

    fn goal_transition(&mut self) -> Result<(), EngineError> {
        let Some(Frame::Goal(g)) = self.frames.last() else {
            unreachable!()
        };
        let var = g.variable.clone();
        if self.memory.contains(&var) {
            return self.pop_goal(Resolution::Established);
        }
        if self.refused.contains(&var) {
            return self.pop_goal(Resolution::Failed { tainted: false });
        }
        let concluders = Arc::clone(&self.concluders);
        let candidates = concluders.get(&var).map(Vec::as_slice).unwrap_or(&[]);
        let (mut cursor, mut tainted) = (g.cursor, g.tainted);
        let mut next = None;
        while cursor < candidates.len() {
            let r = candidates[cursor];
            cursor += 1;
            if self.fired_set[r] || self.dead[r] {
                continue;
            }
            if self.round_dead[r] {
                tainted = true;
                continue;
            }
            next = Some(r);
            break;
        }
        let progress = self.progress;
        let Some(Frame::Goal(g)) = self.frames.last_mut() else {
            unreachable!()
        };
        g.cursor = cursor;
        g.tainted = tainted;
        if let Some(r) = next {
            self.frames.push(Frame::Rule(RuleFrame {
                rule: r,
                antecedent: 0,
                outer: false,
                child: None,
            }));
            return Ok(());
        }
        if g.root && tainted && progress > g.round_start {
            g.cursor = 0;
            g.tainted = false;
            g.round_start = progress;
            self.clear_round();
            return Ok(());
        }
        if let Some(decl) = self.decl(&var).filter(|d| d.askable) {
            let question = Question {
                variable: var.clone(),
                prompt: decl.prompt.clone().unwrap_or_default(),
                allowed: Allowed::for_decl(decl),
            };
            self.count_step()?;
            self.emit(Event::QuestionAsked { variable: var });
            self.status = Status::NeedsAnswer(question);
            return Ok(());
        }
        self.pop_goal(Resolution::Failed { tainted })
    }

    fn clear_round(&mut self) {
        self.round_failed.clear();
        self.round_dead.iter_mut().for_each(|d| *d = false);
    }

    fn pop_goal(&mut self, res: Resolution) -> Result<(), EngineError> {
        let Some(Frame::Goal(g)) = self.frames.pop() else {
            unreachable!()
        };
        self.emit(Event::SubgoalResolved {
            variable: g.variable.clone(),
            established: matches!(res, Resolution::Established),
        });
        match res {
            Resolution::Established => {}
            Resolution::Failed { tainted: true } => {
                self.round_failed.insert(g.variable);
            }
            Resolution::Failed { tainted: false } => {
                self.unprovable.insert(g.variable);
            }
        }
        if g.root {
            self.clear_round();
        }
        match self.frames.last_mut() {
            Some(Frame::Rule(rf)) => rf.child = Some(res),
            Some(Frame::Goal(_)) => unreachable!("goals sit on rules"),
            None => self.finish(),
        }
        Ok(())
    }

    fn rule_transition(&mut self) -> Result<(), EngineError> {
        let Some(Frame::Rule(rf)) = self.frames.last_mut() else {
            unreachable!()
        };
        let (r, i) = (rf.rule, rf.antecedent);
        // a nested pursuit may already have fired this rule
        if self.fired_set[r] {
            self.frames.pop();
            return Ok(());
        }
        if let Some(Resolution::Failed { tainted }) = rf.child.take() {
            self.count_step()?;
            return self.fail_rule(FailReason::Unestablished, tainted);
        }
        let kb = Arc::clone(&self.kb);
        let rule = &kb.rulebases[self.rulebase].rules[r];
        let cond = &rule.antecedents[i];
        match eval_condition(cond, &self.memory)? {
            Truth::True => {
                self.count_step()?;
                let Some(Frame::Rule(rf)) = self.frames.last_mut() else {
                    unreachable!()
                };
                rf.antecedent += 1;
                if rf.antecedent == rule.antecedents.len() {
                    self.count_step()?;
                    self.frames.pop();
                    self.fire(r);
                }
                Ok(())
            }
            Truth::False => {
                self.count_step()?;
                self.fail_rule(FailReason::False, false)
            }
            Truth::UnknownVariable => {
                let var = &cond.variable;
                if self.refused.contains(var) || self.unprovable.contains(var) {
                    self.count_step()?;
                    self.fail_rule(FailReason::Unestablished, false)
                } else if self.round_failed.contains(var)
                    || self
                        .frames
                        .iter()
                        .any(|f| matches!(f, Frame::Goal(g) if &g.variable == var))
                {
                    self.count_step()?;
                    self.fail_rule(FailReason::Unestablished, true)
                } else {
                    self.push_goal(var.clone(), Some(r));
                    Ok(())
                }
            }
        }
    }

    fn fail_rule(&mut self, reason: FailReason, tainted: bool) -> Result<(), EngineError> {
        let Some(Frame::Rule(rf)) = self.frames.pop() else {
            unreachable!()
        };
        let id = self.kb.rulebases[self.rulebase].rules[rf.rule].id.clone();
        self.emit(Event::RuleFailed {
            rule: id,
            condition: rf.antecedent,
            reason,
        });
        if !tainted {
            self.dead[rf.rule] = true;
        } else if !rf.outer {
            self.round_dead[rf.rule] = true;
            if let Some(Frame::Goal(g)) = self.frames.last_mut() {
                g.tainted = true;
            }
        }
        Ok(())
    }

    fn fire(&mut self, r: usize) {
        let kb = Arc::clone(&self.kb);
        let rule = &kb.rulebases[self.rulebase].rules[r];
        let bindings = rule
            .antecedents
            .iter()
            .map(|c| Binding {
                variable: c.variable.clone(),
                value: self
                    .memory
                    .value(&c.variable)
                    .cloned()
                    .expect("fired rules have all facts"),
            })
            .collect();
        self.fired_set[r] = true;
        self.fired.push(r);
        self.emit(Event::RuleFired {
            rule: rule.id.clone(),
            bindings,
        });
        for a in &rule.consequents {
            let fact = Fact::new(
                a.variable.clone(),
                a.value.clone(),
                Provenance::Derived(rule.id.clone()),
            );
            if self.memory.insert(fact) {
                self.progress += 1;
            } else {
                self.emit(Event::ConflictSkipped {
                    rule: rule.id.clone(),
                    variable: a.variable.clone(),
                });
            }
        }
        if let Some(rec) = &rule.recommendation {
            self.recommendations.push(rec.clone());
        }
        self.pass_fired = true;
    }

    fn finish(&mut self) {
        let verdict = self.mode.goal().map(|goal| match self.memory.get(goal) {
            Some(fact) => Verdict::Proven {
                variable: goal.to_string(),
                value: fact.value.clone(),
                proof: proof_tree(&self.memory, &self.trace, goal)
                    .expect("established goals have proofs"),
            },
            None => Verdict::NotProven {
                variable: goal.to_string(),
            },
        });
        self.status = Status::Done(Outcome {
            verdict,
            memory: self.memory.clone(),
            recommendations: self.recommendations.clone(),
            fired: self.fired().into_iter().map(String::from).collect(),
        });
    }
}
