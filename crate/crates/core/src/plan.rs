//! Plans: one vertex sequence per agent over synchronized time steps, plus
//! the plain-text plan format.

use std::fmt::Write as _;

use thiserror::Error;

use crate::instance::Vertex;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Plan {
    paths: Vec<Vec<Vertex>>,
}

/// Time at which a path settles for good at its last vertex.
pub fn settle_time(path: &[Vertex]) -> usize {
    match path.last() {
        None => 0,
        Some(&goal) => path.iter().rposition(|&v| v != goal).map_or(0, |t| t + 1),
    }
}

impl Plan {
    pub fn new(paths: Vec<Vec<Vertex>>) -> Plan {
        Plan { paths }
    }

    pub fn paths(&self) -> &[Vec<Vertex>] {
        &self.paths
    }

    pub fn path(&self, agent: usize) -> &[Vertex] {
        &self.paths[agent]
    }

    pub fn agent_count(&self) -> usize {
        self.paths.len()
    }

    /// Number of configurations, `horizon + 1` for a well-formed plan.
    pub fn steps(&self) -> usize {
        self.paths.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Moves and waits until each agent's final arrival, summed over agents.
    pub fn sum_of_costs(&self) -> u64 {
        self.paths.iter().map(|p| settle_time(p) as u64).sum()
    }

    /// Time step at which the last agent settles.
    pub fn makespan(&self) -> usize {
        self.paths.iter().map(|p| settle_time(p)).max().unwrap_or(0)
    }

    /// Drops trailing configurations in which every agent is settled.
    pub fn trimmed(&self) -> Plan {
        let keep = self.makespan() + 1;
        Plan { paths: self.paths.iter().map(|p| p[..keep.min(p.len())].to_vec()).collect() }
    }

    /// `t: v(a_0) v(a_1) ...` per time step, then `cost=<soc> makespan=<steps-1>`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let steps = self.steps().max(1);
        for t in 0..steps {
            let _ = write!(out, "{t}:");
            for p in &self.paths {
                match p.get(t) {
                    Some(v) => {
                        let _ = write!(out, " {v}");
                    }
                    None => out.push_str(" -"),
                }
            }
            out.push('\n');
        }
        let _ = writeln!(out, "cost={} makespan={}", self.sum_of_costs(), steps - 1);
        out
    }

    /// Parses the format written by [`Plan::to_text`]. The summary line is optional.
    pub fn parse(text: &str) -> Result<Plan, PlanFormatError> {
        let mut rows: Vec<Vec<Vertex>> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with("cost=") {
                continue;
            }
            let err = |message: String| PlanFormatError { line: i + 1, message };
            let (t, rest) = line.split_once(':').ok_or_else(|| err("expected `t: v v ...`".into()))?;
            let t: usize = t.trim().parse().map_err(|_| err(format!("invalid time step `{t}`")))?;
            if t != rows.len() {
                return Err(err(format!("expected time step {}, found {t}", rows.len())));
            }
            let row = rest
                .split_whitespace()
                .map(|v| v.parse().map_err(|_| err(format!("invalid vertex `{v}`"))))
                .collect::<Result<Vec<Vertex>, _>>()?;
            if let Some(first) = rows.first() {
                if first.len() != row.len() {
                    return Err(err(format!("expected {} agents, found {}", first.len(), row.len())));
                }
            }
            rows.push(row);
        }
        let agents = rows.first().map_or(0, Vec::len);
        let paths = (0..agents).map(|a| rows.iter().map(|r| r[a]).collect()).collect();
        Ok(Plan { paths })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("plan line {line}: {message}")]
pub struct PlanFormatError {
    pub line: usize,
    pub message: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn costs_count_until_final_arrival() {
        assert_eq!(Plan::new(vec![vec![0, 1, 2]]).sum_of_costs(), 2);
        assert_eq!(Plan::new(vec![vec![0, 1, 1, 2]]).sum_of_costs(), 3);
        assert_eq!(Plan::new(vec![vec![2, 2, 2]]).sum_of_costs(), 0);
        assert_eq!(Plan::new(vec![vec![2, 1, 2, 2]]).sum_of_costs(), 2);
    }

    #[test]
    fn trimming_drops_settled_tail() {
        let plan = Plan::new(vec![vec![0, 1, 2, 2, 2], vec![3, 3, 3, 3, 3]]);
        let trimmed = plan.trimmed();
        assert_eq!(trimmed.paths(), &[vec![0, 1, 2], vec![3, 3, 3]]);
        assert_eq!(trimmed.sum_of_costs(), plan.sum_of_costs());
        assert_eq!(trimmed.makespan(), 2);
    }

    #[test]
    fn text_round_trip() {
        let plan = Plan::new(vec![vec![0, 1, 1, 2], vec![2, 2, 1, 0]]);
        let text = plan.to_text();
        assert_eq!(text, "0: 0 2\n1: 1 2\n2: 1 1\n3: 2 0\ncost=6 makespan=3\n");
        assert_eq!(Plan::parse(&text).unwrap(), plan);
    }

    #[test]
    fn parse_errors() {
        assert!(Plan::parse("0: 1 2\n2: 1 2\n").is_err());
        assert!(Plan::parse("0: 1 2\n1: 1\n").is_err());
        assert!(Plan::parse("0: x\n").is_err());
        assert_eq!(Plan::parse("").unwrap().agent_count(), 0);
    }
}
