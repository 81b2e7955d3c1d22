//! Slow, obviously-correct reference implementations.

use std::collections::{BTreeMap, HashMap, HashSet};

use nmc_core::trace::{Opcode, TraceEvent};

/// Shannon entropy of `addresses >> cut`, straight from the definition.
pub fn shannon(addresses: &[u64], cut: u32) -> f64 {
    let mut counts: HashMap<u64, usize> = HashMap::new();
    for a in addresses {
        *counts.entry(a >> cut).or_default() += 1;
    }
    let n = addresses.len() as f64;
    counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Reuse distance of every access: the number of distinct lines touched
/// since the previous access to the same line, found by scanning back.
/// `None` marks a first touch.
pub fn naive_reuse(addresses: &[u64], line_size: u64) -> Vec<Option<u64>> {
    // dense line ids so the scan can mark lines in a flat array
    let mut ids: HashMap<u64, usize> = HashMap::new();
    let lines: Vec<usize> = addresses
        .iter()
        .map(|a| {
            let next = ids.len();
            *ids.entry(a / line_size).or_insert(next)
        })
        .collect();
    let mut seen = vec![false; ids.len()];
    let mut mark = vec![usize::MAX; ids.len()];
    let mut out = Vec::with_capacity(lines.len());
    for (i, &l) in lines.iter().enumerate() {
        if !seen[l] {
            seen[l] = true;
            out.push(None);
            continue;
        }
        let mut distinct = 0;
        for &m in lines[..i].iter().rev() {
            if m == l {
                break;
            }
            if mark[m] != i {
                mark[m] = i;
                distinct += 1;
            }
        }
        out.push(Some(distinct));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Pure dataflow.
    Dataflow,
    /// Each dynamic block instance runs its instructions one per cycle in
    /// order; `skip_index` drops dependences on index-update producers.
    Blocks { skip_index: bool },
}

/// Earliest-issue list schedule, simulated one cycle at a time: in every
/// cycle, issue each waiting instruction whose predecessors all issued in
/// an earlier cycle. `index_flags[i]` marks instruction `i` as an index update.
pub fn list_schedule(events: &[&TraceEvent], mode: Mode, index_flags: &[bool]) -> Vec<u64> {
    let mut def_at: HashMap<u64, usize> = HashMap::new();
    let mut last_in_block: HashMap<(u32, u64), usize> = HashMap::new();
    let mut preds: Vec<Vec<usize>> = vec![];
    for (i, e) in events.iter().enumerate() {
        let mut p = vec![];
        for r in &e.uses {
            let j = def_at[r];
            let skip = matches!(mode, Mode::Blocks { skip_index: true }) && index_flags[j];
            if !skip {
                p.push(j);
            }
        }
        if let Mode::Blocks { .. } = mode {
            if let Some(j) = last_in_block.insert((e.bb_id, e.bb_instance), i) {
                p.push(j);
            }
        }
        if let Some(d) = e.def {
            def_at.insert(d, i);
        }
        preds.push(p);
    }

    let mut cycle_of = vec![0u64; events.len()];
    let mut waiting: Vec<usize> = (0..events.len()).collect();
    let mut cycle = 0;
    while !waiting.is_empty() {
        cycle += 1;
        let ready: Vec<usize> = waiting
            .iter()
            .copied()
            .filter(|&i| preds[i].iter().all(|&j| cycle_of[j] != 0 && cycle_of[j] < cycle))
            .collect();
        for &i in &ready {
            cycle_of[i] = cycle;
        }
        waiting.retain(|i| cycle_of[*i] == 0);
    }
    cycle_of
}

/// `(instructions, schedule length)`.
pub fn rate(cycles: &[u64]) -> (u64, u64) {
    (cycles.len() as u64, cycles.iter().copied().max().unwrap_or(0))
}

/// Per opcode: `(count, distinct issue cycles)`.
pub fn specialized(events: &[&TraceEvent], cycles: &[u64]) -> BTreeMap<Opcode, (u64, u64)> {
    let mut m: BTreeMap<Opcode, (u64, HashSet<u64>)> = BTreeMap::new();
    for (e, &c) in events.iter().zip(cycles) {
        let slot = m.entry(e.opcode).or_default();
        slot.0 += 1;
        slot.1.insert(c);
    }
    m.into_iter().map(|(op, (n, cs))| (op, (n, cs.len() as u64))).collect()
}

/// Per block: `(instances, longest chain of instances)`, where instance B
/// follows instance A of the same block when B reads a non-index value A
/// wrote. Blocks holding only index updates are omitted.
pub fn pbblp(events: &[&TraceEvent], index_flags: &[bool]) -> BTreeMap<u32, (u64, u64)> {
    let mut producer: HashMap<u64, (&TraceEvent, bool)> = HashMap::new();
    let mut edges: HashMap<(u32, u64), HashSet<u64>> = HashMap::new();
    let mut instances: BTreeMap<u32, HashSet<u64>> = BTreeMap::new();
    let mut has_work: HashSet<u32> = HashSet::new();
    for (e, &ix) in events.iter().zip(index_flags) {
        instances.entry(e.bb_id).or_default().insert(e.bb_instance);
        if !ix {
            has_work.insert(e.bb_id);
        }
        for r in &e.uses {
            let (p, p_ix) = producer[r];
            if p.bb_id == e.bb_id && p.bb_instance != e.bb_instance && !p_ix {
                edges.entry((e.bb_id, e.bb_instance)).or_default().insert(p.bb_instance);
            }
        }
        if let Some(d) = e.def {
            producer.insert(d, (e, ix));
        }
    }

    fn longest(bb: u32, inst: u64, edges: &HashMap<(u32, u64), HashSet<u64>>, memo: &mut HashMap<u64, u64>) -> u64 {
        if let Some(&v) = memo.get(&inst) {
            return v;
        }
        let v = 1 + edges
            .get(&(bb, inst))
            .map(|ups| ups.iter().map(|&u| longest(bb, u, edges, memo)).max().unwrap_or(0))
            .unwrap_or(0);
        memo.insert(inst, v);
        v
    }

    instances
        .into_iter()
        .filter(|(bb, _)| has_work.contains(bb))
        .map(|(bb, insts)| {
            let mut memo = HashMap::new();
            let chain = insts
                .iter()
                .map(|&i| longest(bb, i, &edges, &mut memo))
                .max()
                .unwrap_or(1);
            (bb, (insts.len() as u64, chain))
        })
        .collect()
}

/// Eigenvalues of the symmetric 2×2 matrix `[[a, b], [b, d]]`, descending.
pub fn eigen2(a: f64, b: f64, d: f64) -> [f64; 2] {
    let mid = (a + d) / 2.0;
    let r = (((a - d) / 2.0).powi(2) + b * b).sqrt();
    [mid + r, mid - r]
}

/// Eigenvalues of a symmetric 3×3 matrix by the trigonometric closed
/// form, descending.
pub fn eigen3(m: [[f64; 3]; 3]) -> [f64; 3] {
    let p1 = m[0][1].powi(2) + m[0][2].powi(2) + m[1][2].powi(2);
    if p1 == 0.0 {
        let mut d = [m[0][0], m[1][1], m[2][2]];
        d.sort_by(|a, b| b.total_cmp(a));
        return d;
    }
    let q = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
    let p2 = (m[0][0] - q).powi(2) + (m[1][1] - q).powi(2) + (m[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let mut b = m;
    for (i, row) in b.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (m[i][j] - if i == j { q } else { 0.0 }) / p;
        }
    }
    let det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
        + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    let r = (det / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    [e1, 3.0 * q - e1 - e3, e3]
}
