//! Weight duplication as a nonlinear knapsack:
//!
//! ```text
//! minimize   Σ t_i / d_i
//! subject to Σ c_i · d_i ≤ F,   1 ≤ d_i ≤ cap_i,   d_i integral
//! ```
//!
//! `t_i` is the intra-layer latency of base layer `i`, `c_i` its PE count and
//! `F` the number of PEs on the chip.

use serde::{Deserialize, Serialize};

use crate::error::{MappingError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMode {
    /// Repeatedly buys the increment with the best latency reduction per PE.
    #[default]
    Greedy,
    /// Dynamic program over the spare-PE budget; optimal.
    Exact,
}

impl SolverMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverMode::Greedy => "greedy",
            SolverMode::Exact => "exact",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DuplicationProblem {
    pub latencies: Vec<u64>,
    pub pe_counts: Vec<usize>,
    /// Upper bound per layer (a layer cannot be split into more parts than
    /// it has output vectors).
    pub caps: Vec<usize>,
    pub budget: usize,
}

impl DuplicationProblem {
    pub fn new(latencies: Vec<u64>, pe_counts: Vec<usize>, budget: usize) -> Self {
        let caps = vec![usize::MAX; latencies.len()];
        DuplicationProblem {
            latencies,
            pe_counts,
            caps,
            budget,
        }
    }

    pub fn with_caps(mut self, caps: Vec<usize>) -> Self {
        self.caps = caps;
        self
    }

    pub fn required(&self) -> usize {
        self.pe_counts.iter().sum()
    }

    fn validate(&self) -> Result<()> {
        let n = self.latencies.len();
        for len in [self.pe_counts.len(), self.caps.len()] {
            if len != n {
                return Err(MappingError::LengthMismatch {
                    expected: n,
                    found: len,
                });
            }
        }
        let required = self.required();
        if required > self.budget {
            return Err(MappingError::Infeasible {
                required,
                available: self.budget,
            });
        }
        Ok(())
    }

    pub fn solve(&self, mode: SolverMode) -> Result<Vec<usize>> {
        self.validate()?;
        Ok(match mode {
            SolverMode::Greedy => self.greedy(),
            SolverMode::Exact => self.exact(),
        })
    }

    fn can_grow(&self, d: &[usize], i: usize) -> bool {
        self.pe_counts[i] > 0 && d[i] < self.caps[i] && self.latencies[i] > 0
    }

    /// Spends `spare` PEs one increment at a time on the best gain per PE.
    fn fill(&self, d: &mut [usize], mut spare: usize) -> usize {
        loop {
            // gain_i = t_i / (d_i (d_i + 1) c_i), compared exactly.
            let mut best: Option<(usize, u128, u128)> = None;
            for i in 0..d.len() {
                let c = self.pe_counts[i];
                if !self.can_grow(d, i) || c > spare {
                    continue;
                }
                let num = self.latencies[i] as u128;
                let den = (d[i] as u128) * (d[i] as u128 + 1) * c as u128;
                let better = match best {
                    None => true,
                    Some((_, bn, bd)) => num * bd > bn * den,
                };
                if better {
                    best = Some((i, num, den));
                }
            }
            let Some((i, _, _)) = best else { return spare };
            d[i] += 1;
            spare -= self.pe_counts[i];
        }
    }

    /// Cheapest way to free at least `need` PEs by lowering the duplicates
    /// of layers other than `skip`: a small knapsack over freed PEs capped
    /// at `need`. Returns the lowered vector and the PEs actually freed.
    fn release(&self, d: &[usize], skip: usize, need: usize) -> Option<(Vec<usize>, usize)> {
        // best[f] = (loss, freed) with min(freed, need) = f.
        let mut best: Vec<Option<(f64, usize)>> = vec![None; need + 1];
        best[0] = Some((0.0, 0));
        // Per layer: (decrement, previous slot) for each slot.
        let mut picks: Vec<(usize, Vec<(usize, usize)>)> = Vec::new();
        for j in (0..d.len()).filter(|&j| j != skip && d[j] > 1 && self.pe_counts[j] > 0) {
            let c = self.pe_counts[j];
            let t = self.latencies[j] as f64;
            let mut next = best.clone();
            let mut pick: Vec<(usize, usize)> = (0..=need).map(|f| (0, f)).collect();
            for (f, state) in best.iter().enumerate() {
                let Some((loss, freed)) = *state else {
                    continue;
                };
                for k in 1..d[j] {
                    let slot = (f + k * c).min(need);
                    let cand = loss + t / (d[j] - k) as f64 - t / d[j] as f64;
                    if next[slot].map_or(true, |(l, _)| cand < l) {
                        next[slot] = Some((cand, freed + k * c));
                        pick[slot] = (k, f);
                    }
                    if slot == need {
                        break;
                    }
                }
            }
            best = next;
            picks.push((j, pick));
        }
        let (_, freed) = best[need]?;
        let mut out = d.to_vec();
        let mut slot = need;
        for (j, pick) in picks.iter().rev() {
            let (k, prev) = pick[slot];
            out[*j] -= k;
            slot = prev;
        }
        Some((out, freed))
    }

    /// Local search: an increment that no longer fits is bought by lowering
    /// other layers along the cheapest release whenever that lowers the
    /// objective. Each accepted move lowers the objective, so it terminates.
    fn exchange(&self, mut d: Vec<usize>, mut spare: usize) -> Vec<usize> {
        'improve: loop {
            let current = objective(&self.latencies, &d);
            for i in 0..d.len() {
                let c = self.pe_counts[i];
                if !self.can_grow(&d, i) || c <= spare {
                    continue;
                }
                let Some((mut trial, freed)) = self.release(&d, i, c - spare) else {
                    continue;
                };
                trial[i] += 1;
                let rest = self.fill(&mut trial, spare + freed - c);
                if objective(&self.latencies, &trial) < current * (1.0 - 1e-12) {
                    d = trial;
                    spare = rest;
                    continue 'improve;
                }
            }
            return d;
        }
    }

    /// Marginal-gain greedy from all ones and from every single layer forced
    /// to each affordable higher multiplicity; the best start (first on
    /// ties) is then improved by [`Self::exchange`].
    fn greedy(&self) -> Vec<usize> {
        let n = self.latencies.len();
        let spare = self.budget - self.required();
        let mut starts = vec![(vec![1usize; n], spare)];
        for i in (0..n).filter(|&i| self.pe_counts[i] > 0 && self.latencies[i] > 0) {
            let c = self.pe_counts[i];
            for k in 1..=(spare / c).min(self.caps[i].saturating_sub(1)) {
                let mut d = vec![1usize; n];
                d[i] += k;
                starts.push((d, spare - k * c));
            }
        }
        let mut best: Option<(f64, Vec<usize>, usize)> = None;
        for (mut d, spare) in starts {
            let rest = self.fill(&mut d, spare);
            let obj = objective(&self.latencies, &d);
            if best.as_ref().map_or(true, |(b, _, _)| obj < *b) {
                best = Some((obj, d, rest));
            }
        }
        let (_, d, rest) = best.expect("all-ones start is always present");
        self.exchange(d, rest)
    }

    fn exact(&self) -> Vec<usize> {
        let n = self.latencies.len();
        let spare = self.budget - self.required();
        // best[e] = minimal objective of the layers seen so far using exactly
        // e spare PEs; choice[i][e] = d_i picked for that state.
        let mut best = vec![f64::INFINITY; spare + 1];
        best[0] = 0.0;
        let mut choice: Vec<Vec<usize>> = Vec::with_capacity(n);
        for i in 0..n {
            let t = self.latencies[i] as f64;
            let c = self.pe_counts[i];
            let mut next = vec![f64::INFINITY; spare + 1];
            let mut pick = vec![0usize; spare + 1];
            for (e, &base) in best.iter().enumerate() {
                if !base.is_finite() {
                    continue;
                }
                let mut d = 1usize;
                loop {
                    let extra = if c == 0 { 0 } else { c * (d - 1) };
                    if e + extra > spare || d > self.caps[i] {
                        break;
                    }
                    let v = base + t / d as f64;
                    let slot = e + extra;
                    if v < next[slot] {
                        next[slot] = v;
                        pick[slot] = d;
                    }
                    if c == 0 {
                        break;
                    }
                    d += 1;
                }
            }
            best = next;
            choice.push(pick);
        }
        let mut e = (0..=spare)
            .min_by(|a, b| best[*a].total_cmp(&best[*b]).then(a.cmp(b)))
            .expect("budget has at least one state");
        let mut d = vec![1usize; n];
        for i in (0..n).rev() {
            d[i] = choice[i][e];
            e -= self.pe_counts[i] * (d[i] - 1);
        }
        d
    }
}

/// Σ t_i / d_i.
pub fn objective(latencies: &[u64], d: &[usize]) -> f64 {
    latencies
        .iter()
        .zip(d)
        .map(|(t, d)| *t as f64 / *d as f64)
        .sum()
}

/// Solves the duplication problem without per-layer caps.
pub fn solve_duplication(
    latencies: &[u64],
    pe_counts: &[usize],
    budget: usize,
    mode: SolverMode,
) -> Result<Vec<usize>> {
    DuplicationProblem::new(latencies.to_vec(), pe_counts.to_vec(), budget).solve(mode)
}

pub fn solve_duplication_capped(
    latencies: &[u64],
    pe_counts: &[usize],
    caps: &[usize],
    budget: usize,
    mode: SolverMode,
) -> Result<Vec<usize>> {
    DuplicationProblem::new(latencies.to_vec(), pe_counts.to_vec(), budget)
        .with_caps(caps.to_vec())
        .solve(mode)
}
