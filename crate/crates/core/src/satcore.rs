//! Incremental CDCL SAT solver.
//!
//! Two-watched-literal propagation with blocker literals, first-UIP clause
//! learning with local minimization, VSIDS branching with phase saving,
//! geometric restarts and LBD-based learnt clause reduction. Clauses may be
//! added between `solve` calls; learnt clauses are kept.

use std::time::Instant;

use crate::cnf::CnfFormula;
use crate::lit::{Lit, Var};

/// Outcome of a `solve` call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SatResult {
    /// Total assignment indexed by variable.
    Sat(Vec<bool>),
    Unsat,
    /// The conflict or time budget ran out before a decision was reached.
    Unknown,
}

impl SatResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, SatResult::Sat(_))
    }
}

/// Resource limits for one `solve` call.
#[derive(Debug, Clone, Copy, Default)]
pub struct Budget {
    pub max_conflicts: Option<u64>,
    pub deadline: Option<Instant>,
}

impl Budget {
    pub fn unlimited() -> Budget {
        Budget::default()
    }

    pub fn until(deadline: Instant) -> Budget {
        Budget { max_conflicts: None, deadline: Some(deadline) }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub decisions: u64,
    pub propagations: u64,
    pub conflicts: u64,
    pub restarts: u64,
    pub learnt_clauses: u64,
}

type ClauseRef = u32;
const NO_REASON: ClauseRef = u32::MAX;

const TRUE: i8 = 1;
const FALSE: i8 = -1;
const UNDEF: i8 = 0;

#[derive(Debug)]
struct Clause {
    lits: Vec<Lit>,
    learnt: bool,
    deleted: bool,
    lbd: u32,
    activity: f64,
}

#[derive(Debug, Clone, Copy)]
struct Watcher {
    clause: ClauseRef,
    blocker: Lit,
}

/// Max-heap of variables keyed by activity.
#[derive(Debug, Default)]
struct VarOrder {
    heap: Vec<u32>,
    position: Vec<i32>,
}

impl VarOrder {
    fn grow(&mut self, vars: usize) {
        self.position.resize(vars, -1);
    }

    fn contains(&self, v: u32) -> bool {
        self.position[v as usize] >= 0
    }

    fn insert(&mut self, v: u32, activity: &[f64]) {
        if self.contains(v) {
            return;
        }
        self.position[v as usize] = self.heap.len() as i32;
        self.heap.push(v);
        self.sift_up(self.heap.len() - 1, activity);
    }

    fn increased(&mut self, v: u32, activity: &[f64]) {
        if self.contains(v) {
            self.sift_up(self.position[v as usize] as usize, activity);
        }
    }

    fn pop(&mut self, activity: &[f64]) -> Option<u32> {
        let top = *self.heap.first()?;
        let last = self.heap.pop().expect("heap is non-empty");
        self.position[top as usize] = -1;
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.position[last as usize] = 0;
            self.sift_down(0, activity);
        }
        Some(top)
    }

    fn sift_up(&mut self, mut i: usize, activity: &[f64]) {
        let v = self.heap[i];
        while i > 0 {
            let parent = (i - 1) / 2;
            let p = self.heap[parent];
            if activity[p as usize] >= activity[v as usize] {
                break;
            }
            self.heap[i] = p;
            self.position[p as usize] = i as i32;
            i = parent;
        }
        self.heap[i] = v;
        self.position[v as usize] = i as i32;
    }

    fn sift_down(&mut self, mut i: usize, activity: &[f64]) {
        let v = self.heap[i];
        loop {
            let left = 2 * i + 1;
            if left >= self.heap.len() {
                break;
            }
            let right = left + 1;
            let child = if right < self.heap.len() && activity[self.heap[right] as usize] > activity[self.heap[left] as usize] {
                right
            } else {
                left
            };
            let c = self.heap[child];
            if activity[c as usize] <= activity[v as usize] {
                break;
            }
            self.heap[i] = c;
            self.position[c as usize] = i as i32;
            i = child;
        }
        self.heap[i] = v;
        self.position[v as usize] = i as i32;
    }
}

#[derive(Debug)]
pub struct Solver {
    ok: bool,
    clauses: Vec<Clause>,
    /// `watches[l]` lists clauses watching `l`; visited when `l` becomes false.
    watches: Vec<Vec<Watcher>>,
    assigns: Vec<i8>,
    level: Vec<u32>,
    reason: Vec<ClauseRef>,
    polarity: Vec<bool>,
    activity: Vec<f64>,
    var_inc: f64,
    clause_inc: f64,
    order: VarOrder,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    seen: Vec<bool>,
    level_stamp: Vec<u64>,
    stamp: u64,
    learnt_count: usize,
    next_reduce: u64,
    reduce_step: u64,
    stats: Stats,
    /// Original clauses, kept for replay checks when debug assertions are on.
    originals: Vec<Vec<Lit>>,
}

impl Default for Solver {
    fn default() -> Solver {
        Solver::new()
    }
}

impl Solver {
    pub fn new() -> Solver {
        Solver {
            ok: true,
            clauses: Vec::new(),
            watches: Vec::new(),
            assigns: Vec::new(),
            level: Vec::new(),
            reason: Vec::new(),
            polarity: Vec::new(),
            activity: Vec::new(),
            var_inc: 1.0,
            clause_inc: 1.0,
            order: VarOrder::default(),
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            seen: Vec::new(),
            level_stamp: vec![0],
            stamp: 0,
            learnt_count: 0,
            next_reduce: 2000,
            reduce_step: 300,
            stats: Stats::default(),
            originals: Vec::new(),
        }
    }

    /// Solver loaded with every variable and clause of `formula`.
    pub fn from_formula(formula: &CnfFormula) -> Solver {
        let mut solver = Solver::new();
        solver.ensure_vars(formula.variable_count());
        for clause in formula.clauses() {
            solver.add_clause(clause);
        }
        solver
    }

    pub fn var_count(&self) -> usize {
        self.assigns.len()
    }

    pub fn stats(&self) -> Stats {
        self.stats
    }

    /// False once the clause set is known to be unsatisfiable.
    pub fn is_ok(&self) -> bool {
        self.ok
    }

    pub fn ensure_vars(&mut self, count: usize) {
        let old = self.assigns.len();
        if count <= old {
            return;
        }
        self.assigns.resize(count, UNDEF);
        self.level.resize(count, 0);
        self.reason.resize(count, NO_REASON);
        self.polarity.resize(count, false);
        self.activity.resize(count, 0.0);
        self.seen.resize(count, false);
        self.watches.resize(2 * count, Vec::new());
        self.order.grow(count);
        for v in old..count {
            self.order.insert(v as u32, &self.activity);
        }
    }

    pub fn new_var(&mut self) -> Var {
        let v = Var(self.assigns.len() as u32);
        self.ensure_vars(self.assigns.len() + 1);
        v
    }

    #[inline]
    fn value(&self, lit: Lit) -> i8 {
        let v = self.assigns[lit.var().index()];
        if lit.is_positive() {
            v
        } else {
            -v
        }
    }

    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    /// Adds a clause permanently. An empty clause (after removing literals
    /// false at level 0) makes the solver unsatisfiable for good.
    pub fn add_clause(&mut self, lits: &[Lit]) {
        debug_assert_eq!(self.decision_level(), 0);
        if let Some(max) = lits.iter().map(|l| l.var().index()).max() {
            self.ensure_vars(max + 1);
        }
        if cfg!(debug_assertions) {
            self.originals.push(lits.to_vec());
        }
        if !self.ok {
            return;
        }
        let mut clause = lits.to_vec();
        clause.sort_unstable();
        clause.dedup();
        if clause.windows(2).any(|w| w[0] == !w[1]) {
            return;
        }
        if clause.iter().any(|&l| self.value(l) == TRUE) {
            return;
        }
        clause.retain(|&l| self.value(l) != FALSE);
        match clause.len() {
            0 => self.ok = false,
            1 => {
                self.enqueue(clause[0], NO_REASON);
                if self.propagate().is_some() {
                    self.ok = false;
                }
            }
            _ => {
                self.attach(clause, false, 0);
            }
        }
    }

    fn attach(&mut self, lits: Vec<Lit>, learnt: bool, lbd: u32) -> ClauseRef {
        let cref = self.clauses.len() as ClauseRef;
        self.watches[lits[0].code()].push(Watcher { clause: cref, blocker: lits[1] });
        self.watches[lits[1].code()].push(Watcher { clause: cref, blocker: lits[0] });
        if learnt {
            self.learnt_count += 1;
        }
        self.clauses.push(Clause { lits, learnt, deleted: false, lbd, activity: 0.0 });
        cref
    }

    fn enqueue(&mut self, lit: Lit, reason: ClauseRef) {
        let v = lit.var().index();
        debug_assert_eq!(self.assigns[v], UNDEF);
        self.assigns[v] = if lit.is_positive() { TRUE } else { FALSE };
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(lit);
    }

    fn propagate(&mut self) -> Option<ClauseRef> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            self.stats.propagations += 1;
            let false_lit = !p;
            let mut ws = std::mem::take(&mut self.watches[false_lit.code()]);
            let (mut i, mut j) = (0, 0);
            let mut conflict = None;
            while i < ws.len() {
                let w = ws[i];
                i += 1;
                if self.value(w.blocker) == TRUE {
                    ws[j] = w;
                    j += 1;
                    continue;
                }
                let cref = w.clause;
                if self.clauses[cref as usize].deleted {
                    continue;
                }
                {
                    let lits = &mut self.clauses[cref as usize].lits;
                    if lits[0] == false_lit {
                        lits.swap(0, 1);
                    }
                }
                let first = self.clauses[cref as usize].lits[0];
                let watcher = Watcher { clause: cref, blocker: first };
                if first != w.blocker && self.value(first) == TRUE {
                    ws[j] = watcher;
                    j += 1;
                    continue;
                }
                let len = self.clauses[cref as usize].lits.len();
                let mut moved = false;
                for k in 2..len {
                    let candidate = self.clauses[cref as usize].lits[k];
                    if self.value(candidate) != FALSE {
                        let lits = &mut self.clauses[cref as usize].lits;
                        lits.swap(1, k);
                        self.watches[candidate.code()].push(watcher);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                ws[j] = watcher;
                j += 1;
                if self.value(first) == FALSE {
                    conflict = Some(cref);
                    while i < ws.len() {
                        ws[j] = ws[i];
                        j += 1;
                        i += 1;
                    }
                    self.qhead = self.trail.len();
                } else {
                    self.enqueue(first, cref);
                }
            }
            ws.truncate(j);
            self.watches[false_lit.code()] = ws;
            if conflict.is_some() {
                return conflict;
            }
        }
        None
    }

    fn bump_var(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        self.order.increased(v as u32, &self.activity);
    }

    fn bump_clause(&mut self, cref: ClauseRef) {
        let c = &mut self.clauses[cref as usize];
        if !c.learnt {
            return;
        }
        c.activity += self.clause_inc;
        if c.activity > 1e20 {
            for c in self.clauses.iter_mut().filter(|c| c.learnt) {
                c.activity *= 1e-20;
            }
            self.clause_inc *= 1e-20;
        }
    }

    /// First-UIP analysis. Returns the learnt clause (asserting literal
    /// first, highest remaining level second) and the backjump level.
    fn analyze(&mut self, mut conflict: ClauseRef) -> (Vec<Lit>, u32) {
        let mut learnt = vec![Lit::new(Var(0), true)];
        let mut pending = 0;
        let mut index = self.trail.len();
        let mut p: Option<Lit> = None;
        let current = self.decision_level();

        loop {
            self.bump_clause(conflict);
            let lits = self.clauses[conflict as usize].lits.clone();
            let skip = usize::from(p.is_some());
            for &q in &lits[skip..] {
                let v = q.var().index();
                if !self.seen[v] && self.level[v] > 0 {
                    self.seen[v] = true;
                    self.bump_var(v);
                    if self.level[v] >= current {
                        pending += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                index -= 1;
                if self.seen[self.trail[index].var().index()] {
                    break;
                }
            }
            let lit = self.trail[index];
            p = Some(lit);
            self.seen[lit.var().index()] = false;
            pending -= 1;
            if pending == 0 {
                break;
            }
            conflict = self.reason[lit.var().index()];
        }
        learnt[0] = !p.expect("conflict has a UIP");

        // Drop literals implied by other literals of the clause.
        let marked: Vec<Lit> = learnt.clone();
        let mut kept = vec![learnt[0]];
        for &q in &learnt[1..] {
            let r = self.reason[q.var().index()];
            let redundant = r != NO_REASON
                && self.clauses[r as usize].lits[1..].iter().all(|l| {
                    let v = l.var().index();
                    self.seen[v] || self.level[v] == 0
                });
            if !redundant {
                kept.push(q);
            }
        }
        for l in &marked {
            self.seen[l.var().index()] = false;
        }
        let mut learnt = kept;

        let backjump = if learnt.len() == 1 {
            0
        } else {
            let (best, _) = learnt
                .iter()
                .enumerate()
                .skip(1)
                .max_by_key(|(_, l)| self.level[l.var().index()])
                .expect("clause has a second literal");
            learnt.swap(1, best);
            self.level[learnt[1].var().index()]
        };
        (learnt, backjump)
    }

    fn lbd(&mut self, lits: &[Lit]) -> u32 {
        self.stamp += 1;
        let needed = lits.iter().map(|l| self.level[l.var().index()] as usize + 1).max().unwrap_or(1);
        if self.level_stamp.len() < needed {
            self.level_stamp.resize(needed, 0);
        }
        let mut count = 0;
        for l in lits {
            let lvl = self.level[l.var().index()] as usize;
            if self.level_stamp[lvl] != self.stamp {
                self.level_stamp[lvl] = self.stamp;
                count += 1;
            }
        }
        count
    }

    fn backtrack(&mut self, level: u32) {
        if self.decision_level() <= level {
            return;
        }
        let lim = self.trail_lim[level as usize];
        for i in (lim..self.trail.len()).rev() {
            let lit = self.trail[i];
            let v = lit.var().index();
            self.assigns[v] = UNDEF;
            self.reason[v] = NO_REASON;
            self.polarity[v] = lit.is_positive();
            self.order.insert(v as u32, &self.activity);
        }
        self.trail.truncate(lim);
        self.trail_lim.truncate(level as usize);
        self.qhead = lim;
    }

    fn is_locked(&self, cref: ClauseRef) -> bool {
        let first = self.clauses[cref as usize].lits[0];
        self.value(first) == TRUE && self.reason[first.var().index()] == cref
    }

    fn reduce_learnts(&mut self) {
        let mut candidates: Vec<ClauseRef> = (0..self.clauses.len() as ClauseRef)
            .filter(|&c| {
                let cl = &self.clauses[c as usize];
                cl.learnt && !cl.deleted && cl.lbd > 2
            })
            .collect();
        candidates.sort_by(|&a, &b| {
            let (ca, cb) = (&self.clauses[a as usize], &self.clauses[b as usize]);
            cb.lbd.cmp(&ca.lbd).then(ca.activity.total_cmp(&cb.activity))
        });
        for &c in &candidates[..candidates.len() / 2] {
            if !self.is_locked(c) {
                let cl = &mut self.clauses[c as usize];
                cl.deleted = true;
                cl.lits = Vec::new();
                self.learnt_count -= 1;
            }
        }
    }

    fn pick_branch(&mut self) -> Option<Lit> {
        while let Some(v) = self.order.pop(&self.activity) {
            if self.assigns[v as usize] == UNDEF {
                return Some(Lit::new(Var(v), self.polarity[v as usize]));
            }
        }
        None
    }

    /// Decides satisfiability of all clauses added so far.
    pub fn solve(&mut self, budget: Budget) -> SatResult {
        if !self.ok {
            return SatResult::Unsat;
        }
        if self.propagate().is_some() {
            self.ok = false;
            return SatResult::Unsat;
        }
        let start_conflicts = self.stats.conflicts;
        let mut restart_limit = 100.0f64;
        let mut conflicts_since_restart = 0u64;

        let result = loop {
            if let Some(conflict) = self.propagate() {
                self.stats.conflicts += 1;
                conflicts_since_restart += 1;
                if self.decision_level() == 0 {
                    self.ok = false;
                    break SatResult::Unsat;
                }
                let (learnt, backjump) = self.analyze(conflict);
                self.backtrack(backjump);
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], NO_REASON);
                } else {
                    let lbd = self.lbd(&learnt);
                    let asserting = learnt[0];
                    let cref = self.attach(learnt, true, lbd);
                    self.bump_clause(cref);
                    self.enqueue(asserting, cref);
                }
                self.stats.learnt_clauses += 1;
                self.var_inc /= 0.95;
                self.clause_inc /= 0.999;

                let used = self.stats.conflicts - start_conflicts;
                if budget.max_conflicts.is_some_and(|m| used >= m) {
                    break SatResult::Unknown;
                }
                if used.is_multiple_of(64) && budget.deadline.is_some_and(|d| Instant::now() >= d) {
                    break SatResult::Unknown;
                }
                continue;
            }

            if conflicts_since_restart as f64 >= restart_limit {
                self.stats.restarts += 1;
                conflicts_since_restart = 0;
                restart_limit *= 1.5;
                self.backtrack(0);
            }
            if self.stats.conflicts >= self.next_reduce {
                self.next_reduce = self.stats.conflicts + 2000 + self.reduce_step;
                self.reduce_step += 300;
                self.reduce_learnts();
            }
            match self.pick_branch() {
                None => {
                    let model: Vec<bool> = self.assigns.iter().map(|&a| a == TRUE).collect();
                    break SatResult::Sat(model);
                }
                Some(lit) => {
                    self.stats.decisions += 1;
                    if self.stats.decisions.is_multiple_of(4096) && budget.deadline.is_some_and(|d| Instant::now() >= d) {
                        break SatResult::Unknown;
                    }
                    self.trail_lim.push(self.trail.len());
                    self.enqueue(lit, NO_REASON);
                }
            }
        };
        self.backtrack(0);
        if let SatResult::Sat(model) = &result {
            debug_assert!(
                self.originals.iter().all(|c| c.iter().any(|l| l.eval(model))),
                "model violates an input clause"
            );
        }
        result
    }
}

/// Solves `formula` with a fresh solver; a model covers every formula variable.
pub fn solve_formula(formula: &CnfFormula, budget: Budget) -> SatResult {
    let mut solver = Solver::from_formula(formula);
    match solver.solve(budget) {
        SatResult::Sat(mut model) => {
            model.resize(formula.variable_count(), false);
            SatResult::Sat(model)
        }
        other => other,
    }
}
