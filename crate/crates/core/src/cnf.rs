//! CNF construction keyed by MAPF semantics: variable allocation, clause
//! storage, cardinality encodings and DIMACS exchange.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use thiserror::Error;

use crate::instance::Vertex;
use crate::lit::{Lit, Var};

/// Meaning of a SAT variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum VarKey {
    /// Agent occupies `vertex` at time `t`.
    Vertex { agent: usize, vertex: Vertex, t: usize },
    /// Agent moves (or waits when `from == to`) between `t` and `t + 1`.
    Edge { agent: usize, from: Vertex, to: Vertex, t: usize },
    /// Auxiliary variable, e.g. counter registers or settled indicators.
    Aux { tag: String, indices: Vec<usize> },
}

impl fmt::Display for VarKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarKey::Vertex { agent, vertex, t } => write!(f, "X {agent} {vertex} {t}"),
            VarKey::Edge { agent, from, to, t } => write!(f, "E {agent} {from} {to} {t}"),
            VarKey::Aux { tag, indices } => {
                write!(f, "A {tag}")?;
                for i in indices {
                    write!(f, " {i}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for VarKey {
    type Err = String;

    fn from_str(s: &str) -> Result<VarKey, String> {
        let mut parts = s.split_whitespace();
        let kind = parts.next().ok_or("empty key")?;
        let mut num = |what: &str| -> Result<usize, String> {
            parts
                .next()
                .ok_or_else(|| format!("missing {what}"))?
                .parse()
                .map_err(|_| format!("invalid {what}"))
        };
        let key = match kind {
            "X" => VarKey::Vertex { agent: num("agent")?, vertex: num("vertex")?, t: num("time")? },
            "E" => VarKey::Edge { agent: num("agent")?, from: num("from")?, to: num("to")?, t: num("time")? },
            "A" => {
                let tag = parts.next().ok_or("missing aux tag")?.to_string();
                let indices = parts.map(|p| p.parse().map_err(|_| format!("invalid index `{p}`"))).collect::<Result<_, _>>()?;
                return Ok(VarKey::Aux { tag, indices });
            }
            other => return Err(format!("unknown key kind `{other}`")),
        };
        if parts.next().is_some() {
            return Err("trailing fields".into());
        }
        Ok(key)
    }
}

/// Variable allocator plus clause store.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CnfFormula {
    variable_count: u32,
    clauses: Vec<Vec<Lit>>,
    keys: HashMap<VarKey, Var>,
    /// Key of each variable; `None` for anonymous variables.
    names: Vec<Option<VarKey>>,
    counters: u32,
}

impl CnfFormula {
    pub fn new() -> CnfFormula {
        CnfFormula::default()
    }

    pub fn variable_count(&self) -> usize {
        self.variable_count as usize
    }

    pub fn clause_count(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Vec<Lit>] {
        &self.clauses
    }

    /// Variable for `key`, allocating it on first use.
    pub fn allocate(&mut self, key: VarKey) -> Var {
        if let Some(&var) = self.keys.get(&key) {
            return var;
        }
        let var = self.fresh();
        self.names[var.index()] = Some(key.clone());
        self.keys.insert(key, var);
        var
    }

    /// An unnamed variable.
    pub fn fresh(&mut self) -> Var {
        let var = Var(self.variable_count);
        self.variable_count += 1;
        self.names.push(None);
        var
    }

    pub fn lookup(&self, key: &VarKey) -> Option<Var> {
        self.keys.get(key).copied()
    }

    pub fn key_of(&self, var: Var) -> Option<&VarKey> {
        self.names.get(var.index()).and_then(Option::as_ref)
    }

    /// Appends a clause. Panics on an empty clause or an unallocated variable.
    pub fn add_clause(&mut self, clause: Vec<Lit>) {
        assert!(!clause.is_empty(), "empty clause added to formula");
        debug_assert!(clause.iter().all(|l| l.var().0 < self.variable_count));
        self.clauses.push(clause);
    }

    /// Pairwise at-most-one: `n(n-1)/2` binary clauses.
    pub fn at_most_one_pairwise(&mut self, lits: &[Lit]) {
        for (i, &a) in lits.iter().enumerate() {
            for &b in &lits[i + 1..] {
                self.add_clause(vec![!a, !b]);
            }
        }
    }

    /// At most `k` of `lits` are true.
    ///
    /// Sequential counter with registers `s[i][j]` meaning "at least `j + 1`
    /// of the first `i + 1` literals are true". For `k = 1` and at most six
    /// literals the pairwise encoding is used instead.
    pub fn at_most_k(&mut self, lits: &[Lit], k: usize) {
        let n = lits.len();
        if k >= n {
            return;
        }
        if k == 0 {
            for &l in lits {
                self.add_clause(vec![!l]);
            }
            return;
        }
        if k == 1 && n <= 6 {
            self.at_most_one_pairwise(lits);
            return;
        }
        let id = self.counters as usize;
        self.counters += 1;
        let registers: Vec<Vec<Lit>> = (0..n - 1)
            .map(|i| {
                (0..k)
                    .map(|j| self.allocate(VarKey::Aux { tag: "card".into(), indices: vec![id, i, j] }).pos())
                    .collect()
            })
            .collect();

        self.add_clause(vec![!lits[0], registers[0][0]]);
        for &r in &registers[0][1..] {
            self.add_clause(vec![!r]);
        }
        for i in 1..n - 1 {
            let (x, prev, cur) = (lits[i], &registers[i - 1], &registers[i]);
            self.add_clause(vec![!x, cur[0]]);
            self.add_clause(vec![!prev[0], cur[0]]);
            for j in 1..k {
                self.add_clause(vec![!x, !prev[j - 1], cur[j]]);
                self.add_clause(vec![!prev[j], cur[j]]);
            }
            self.add_clause(vec![!x, !prev[k - 1]]);
        }
        self.add_clause(vec![!lits[n - 1], !registers[n - 2][k - 1]]);
    }

    /// DIMACS CNF text. Named variables are listed in `c key` comment lines.
    pub fn to_dimacs(&self) -> String {
        let mut out = String::new();
        for (i, name) in self.names.iter().enumerate() {
            if let Some(key) = name {
                let _ = writeln!(out, "c key {} {key}", i + 1);
            }
        }
        let _ = writeln!(out, "p cnf {} {}", self.variable_count, self.clauses.len());
        for clause in &self.clauses {
            for lit in clause {
                let _ = write!(out, "{lit} ");
            }
            out.push_str("0\n");
        }
        out
    }

    /// Reads DIMACS CNF, restoring any `c key` comments.
    pub fn from_dimacs(text: &str) -> Result<CnfFormula, DimacsError> {
        let mut formula = CnfFormula::new();
        let mut header: Option<(u32, usize)> = None;
        let mut pending: Vec<(usize, u32, VarKey)> = Vec::new();
        let mut current = Vec::new();

        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line == "%" {
                continue;
            }
            if let Some(comment) = line.strip_prefix('c') {
                if let Some(rest) = comment.trim_start().strip_prefix("key ") {
                    let rest = rest.trim();
                    let (num, key) = rest.split_once(' ').ok_or(DimacsError::at(line_no, "malformed key comment"))?;
                    let num: u32 = num.parse().map_err(|_| DimacsError::at(line_no, "malformed key comment"))?;
                    let key = key.parse::<VarKey>().map_err(|e| DimacsError::at(line_no, e))?;
                    pending.push((line_no, num, key));
                }
                continue;
            }
            if let Some(rest) = line.strip_prefix("p ") {
                if header.is_some() {
                    return Err(DimacsError::at(line_no, "duplicate problem line"));
                }
                let parts: Vec<&str> = rest.split_whitespace().collect();
                let parsed = match parts.as_slice() {
                    ["cnf", v, c] => v.parse().ok().zip(c.parse().ok()),
                    _ => None,
                };
                let (vars, clauses) = parsed.ok_or(DimacsError::at(line_no, "expected `p cnf <vars> <clauses>`"))?;
                header = Some((vars, clauses));
                formula.variable_count = vars;
                formula.names = vec![None; vars as usize];
                continue;
            }
            let (vars, _) = header.ok_or(DimacsError::at(line_no, "clause before problem line"))?;
            for token in line.split_whitespace() {
                let value: i64 = token.parse().map_err(|_| DimacsError::at(line_no, format!("invalid literal `{token}`")))?;
                if value == 0 {
                    if current.is_empty() {
                        return Err(DimacsError::at(line_no, "empty clause"));
                    }
                    formula.clauses.push(std::mem::take(&mut current));
                    continue;
                }
                let lit = Lit::from_dimacs(value).filter(|l| l.var().0 < vars).ok_or(DimacsError::at(line_no, format!("literal {value} out of range")))?;
                current.push(lit);
            }
        }
        let (_, declared) = header.ok_or(DimacsError::at(0, "missing problem line"))?;
        if !current.is_empty() {
            formula.clauses.push(current);
        }
        if formula.clauses.len() != declared {
            return Err(DimacsError::at(0, format!("header declares {declared} clauses, found {}", formula.clauses.len())));
        }
        for (line_no, num, key) in pending {
            if num == 0 || num > formula.variable_count {
                return Err(DimacsError::at(line_no, format!("key for unknown variable {num}")));
            }
            let var = Var(num - 1);
            if formula.keys.insert(key.clone(), var).is_some() {
                return Err(DimacsError::at(line_no, "duplicate key"));
            }
            formula.names[var.index()] = Some(key);
        }
        formula.counters = formula
            .names
            .iter()
            .filter_map(|n| match n {
                Some(VarKey::Aux { tag, indices }) if tag == "card" => indices.first().map(|&i| i as u32 + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        Ok(formula)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("DIMACS line {line}: {message}")]
pub struct DimacsError {
    pub line: usize,
    pub message: String,
}

impl DimacsError {
    fn at(line: usize, message: impl Into<String>) -> DimacsError {
        DimacsError { line, message: message.into() }
    }
}
