//! Finite-state graphs: HMM topologies, the phone-LM prior, numerator and
//! denominator training graphs, and the looped decoding graph.
//!
//! Weights are negative log probabilities throughout. Label conventions:
//! `ilabel` 0 is epsilon, otherwise `pdf_id + 1`; `olabel` 0 is epsilon,
//! otherwise `word_id + 1` where word ids share the phone id space (wake
//! words first, then freetext, then SIL).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::{Error, Result};

pub type StateId = usize;
pub type Label = u32;

pub const EPS: Label = 0;

/// Self-loop / forward transition probability inside every HMM state.
/// Transitions are not re-estimated; the LF-MMI gradients dominate them.
const TRANS_LOGP: f64 = -std::f64::consts::LN_2; // ln 0.5

/// Probability mass of the SIL-only path, carved out of the negative mass.
const SIL_ONLY_PROB: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct Arc {
    pub dst: StateId,
    pub ilabel: Label,
    pub olabel: Label,
    pub weight: f64,
}

/// Weighted finite-state graph. State 0 is always the start state.
#[derive(Debug, Clone, Default)]
pub struct Wfst {
    arcs: Vec<Vec<Arc>>,
    finals: BTreeMap<StateId, f64>,
}

impl Wfst {
    pub fn new() -> Self {
        Wfst {
            arcs: vec![Vec::new()],
            finals: BTreeMap::new(),
        }
    }

    pub fn start(&self) -> StateId {
        0
    }

    pub fn num_states(&self) -> usize {
        self.arcs.len()
    }

    pub fn num_arcs(&self) -> usize {
        self.arcs.iter().map(Vec::len).sum()
    }

    pub fn add_state(&mut self) -> StateId {
        self.arcs.push(Vec::new());
        self.arcs.len() - 1
    }

    pub fn add_arc(&mut self, src: StateId, dst: StateId, ilabel: Label, olabel: Label, weight: f64) {
        self.arcs[src].push(Arc {
            dst,
            ilabel,
            olabel,
            weight,
        });
    }

    pub fn arcs(&self, state: StateId) -> &[Arc] {
        &self.arcs[state]
    }

    pub fn set_final(&mut self, state: StateId, weight: f64) {
        self.finals.insert(state, weight);
    }

    pub fn finals(&self) -> impl Iterator<Item = (StateId, f64)> + '_ {
        self.finals.iter().map(|(&s, &w)| (s, w))
    }

    pub fn final_weight(&self, state: StateId) -> Option<f64> {
        self.finals.get(&state).copied()
    }

    /// Topological order of states with respect to epsilon-input arcs only.
    /// Errors if the epsilon subgraph is cyclic.
    pub fn eps_topo_order(&self) -> Result<Vec<StateId>> {
        let n = self.num_states();
        let mut indeg = vec![0usize; n];
        for arcs in &self.arcs {
            for a in arcs {
                if a.ilabel == EPS {
                    indeg[a.dst] += 1;
                }
            }
        }
        let mut queue: Vec<StateId> = (0..n).filter(|&s| indeg[s] == 0).collect();
        let mut order = Vec::with_capacity(n);
        let mut head = 0;
        while head < queue.len() {
            let s = queue[head];
            head += 1;
            order.push(s);
            for a in &self.arcs[s] {
                if a.ilabel == EPS {
                    indeg[a.dst] -= 1;
                    if indeg[a.dst] == 0 {
                        queue.push(a.dst);
                    }
                }
            }
        }
        if order.len() != n {
            return Err(Error::Graph("epsilon subgraph contains a cycle".into()));
        }
        Ok(order)
    }

    /// Validity check: state 0 start, all states reachable and co-reachable,
    /// no NaN or -inf arc weights, finite final weights, and no epsilon-only
    /// cycle without strictly positive weight.
    pub fn validate(&self) -> Result<()> {
        if self.finals.is_empty() {
            return Err(Error::Graph("no final states".into()));
        }
        for (s, arcs) in self.arcs.iter().enumerate() {
            for a in arcs {
                if a.weight.is_nan() || a.weight == f64::NEG_INFINITY {
                    return Err(Error::Graph(format!("bad weight on arc from state {s}")));
                }
                if a.dst >= self.num_states() {
                    return Err(Error::Graph(format!("arc from {s} to missing state {}", a.dst)));
                }
            }
        }
        for (&s, &w) in &self.finals {
            if !w.is_finite() {
                return Err(Error::Graph(format!("non-finite final weight on state {s}")));
            }
        }
        let reach = self.reachable_forward();
        if let Some(s) = (0..self.num_states()).find(|&s| !reach[s]) {
            return Err(Error::Graph(format!("state {s} unreachable from start")));
        }
        let coreach = self.reachable_backward();
        if let Some(s) = (0..self.num_states()).find(|&s| !coreach[s]) {
            return Err(Error::Graph(format!("state {s} cannot reach a final state")));
        }
        // Epsilon cycles are permitted only when every arc on them costs > 0;
        // we enforce the stronger, easily-checked condition that all epsilon
        // arcs inside an epsilon-cycle component are strictly positive.
        if self.eps_topo_order().is_err() {
            for arcs in &self.arcs {
                for a in arcs {
                    if a.ilabel == EPS && a.weight <= 0.0 && self.on_eps_cycle(a) {
                        return Err(Error::Graph("zero-cost epsilon cycle".into()));
                    }
                }
            }
        }
        Ok(())
    }

    fn on_eps_cycle(&self, arc: &Arc) -> bool {
        // is arc.dst able to reach arc's source through eps arcs? (approximate:
        // any eps path back to a state having this exact arc)
        let mut seen = vec![false; self.num_states()];
        let mut stack = vec![arc.dst];
        while let Some(s) = stack.pop() {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            for a in &self.arcs[s] {
                if a.ilabel == EPS {
                    stack.push(a.dst);
                }
            }
        }
        (0..self.num_states()).any(|s| seen[s] && self.arcs[s].iter().any(|a| std::ptr::eq(a, arc)))
    }

    fn reachable_forward(&self) -> Vec<bool> {
        let mut seen = vec![false; self.num_states()];
        let mut stack = vec![self.start()];
        while let Some(s) = stack.pop() {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            for a in &self.arcs[s] {
                if !seen[a.dst] {
                    stack.push(a.dst);
                }
            }
        }
        seen
    }

    fn reachable_backward(&self) -> Vec<bool> {
        let n = self.num_states();
        let mut rev: Vec<Vec<StateId>> = vec![Vec::new(); n];
        for (s, arcs) in self.arcs.iter().enumerate() {
            for a in arcs {
                rev[a.dst].push(s);
            }
        }
        let mut seen = vec![false; n];
        let mut stack: Vec<StateId> = self.finals.keys().copied().collect();
        while let Some(s) = stack.pop() {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            for &p in &rev[s] {
                if !seen[p] {
                    stack.push(p);
                }
            }
        }
        seen
    }

    /// Drop states not on a start-to-final path, remapping ids (start stays 0).
    pub fn connect(&mut self) -> Result<()> {
        let fwd = self.reachable_forward();
        let bwd = self.reachable_backward();
        let keep: Vec<bool> = fwd.iter().zip(&bwd).map(|(&a, &b)| a && b).collect();
        if !keep[self.start()] {
            return Err(Error::Graph("graph is empty after connection".into()));
        }
        let mut remap = vec![usize::MAX; self.num_states()];
        let mut next = 0;
        for (s, &k) in keep.iter().enumerate() {
            if k {
                remap[s] = next;
                next += 1;
            }
        }
        let mut arcs: Vec<Vec<Arc>> = vec![Vec::new(); next];
        for (s, old) in self.arcs.iter().enumerate() {
            if !keep[s] {
                continue;
            }
            for a in old {
                if keep[a.dst] {
                    arcs[remap[s]].push(Arc {
                        dst: remap[a.dst],
                        ..a.clone()
                    });
                }
            }
        }
        let finals = self
            .finals
            .iter()
            .filter(|&(&s, _)| keep[s])
            .map(|(&s, &w)| (remap[s], w))
            .collect();
        self.arcs = arcs;
        self.finals = finals;
        Ok(())
    }

    /// Remove epsilon arcs by closing over them in the log semiring: parallel
    /// epsilon paths combine by log-sum so total path probability is
    /// preserved. Only legal when no epsilon-input arc carries an output
    /// label and the epsilon subgraph is acyclic.
    pub fn remove_eps(&mut self) -> Result<()> {
        for arcs in &self.arcs {
            for a in arcs {
                if a.ilabel == EPS && a.olabel != EPS {
                    return Err(Error::Graph(
                        "cannot remove epsilon arcs carrying output labels".into(),
                    ));
                }
            }
        }
        let order = self.eps_topo_order()?;
        let n = self.num_states();
        let mut pos = vec![0usize; n];
        for (i, &s) in order.iter().enumerate() {
            pos[s] = i;
        }
        let mut new_arcs: Vec<Vec<Arc>> = vec![Vec::new(); n];
        let mut new_finals: BTreeMap<StateId, f64> = BTreeMap::new();
        for s in 0..n {
            // closure[c] = -log sum of eps-path probabilities s -> c
            let mut closure: BTreeMap<StateId, f64> = BTreeMap::new();
            closure.insert(s, 0.0);
            let mut frontier: Vec<StateId> = vec![s];
            frontier.sort_by_key(|&c| pos[c]);
            let mut i = 0;
            while i < frontier.len() {
                let c = frontier[i];
                i += 1;
                let base = closure[&c];
                for a in &self.arcs[c] {
                    if a.ilabel == EPS {
                        let w = base + a.weight;
                        match closure.get_mut(&a.dst) {
                            Some(old) => *old = neg_log_add(*old, w),
                            None => {
                                closure.insert(a.dst, w);
                                frontier.push(a.dst);
                                frontier[i..].sort_by_key(|&c| pos[c]);
                            }
                        }
                    }
                }
            }
            for (&c, &d) in &closure {
                for a in &self.arcs[c] {
                    if a.ilabel != EPS {
                        new_arcs[s].push(Arc {
                            dst: a.dst,
                            ilabel: a.ilabel,
                            olabel: a.olabel,
                            weight: d + a.weight,
                        });
                    }
                }
                if let Some(&fw) = self.finals.get(&c) {
                    let w = d + fw;
                    new_finals
                        .entry(s)
                        .and_modify(|old| *old = neg_log_add(*old, w))
                        .or_insert(w);
                }
            }
        }
        self.arcs = new_arcs;
        self.finals = new_finals;
        self.connect()
    }

    /// Text form: one arc per line `src<TAB>dst<TAB>ilabel<TAB>olabel<TAB>weight`,
    /// then final lines `state<TAB>weight`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (s, arcs) in self.arcs.iter().enumerate() {
            for a in arcs {
                writeln!(out, "{}\t{}\t{}\t{}\t{}", s, a.dst, a.ilabel, a.olabel, a.weight).unwrap();
            }
        }
        for (&s, &w) in &self.finals {
            writeln!(out, "{}\t{}", s, w).unwrap();
        }
        out
    }

    pub fn from_text(text: &str, path: &Path) -> Result<Self> {
        let mut fst = Wfst::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let err = |msg: String| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg,
            };
            match fields.len() {
                5 => {
                    let src: StateId = fields[0].parse().map_err(|_| err("bad src".into()))?;
                    let dst: StateId = fields[1].parse().map_err(|_| err("bad dst".into()))?;
                    let il: Label = fields[2].parse().map_err(|_| err("bad ilabel".into()))?;
                    let ol: Label = fields[3].parse().map_err(|_| err("bad olabel".into()))?;
                    let w: f64 = fields[4].parse().map_err(|_| err("bad weight".into()))?;
                    while fst.num_states() <= src.max(dst) {
                        fst.add_state();
                    }
                    fst.add_arc(src, dst, il, ol, w);
                }
                2 => {
                    let s: StateId = fields[0].parse().map_err(|_| err("bad state".into()))?;
                    let w: f64 = fields[1].parse().map_err(|_| err("bad weight".into()))?;
                    while fst.num_states() <= s {
                        fst.add_state();
                    }
                    fst.set_final(s, w);
                }
                _ => return Err(err(format!("expected 2 or 5 tab-separated fields, got {}", fields.len()))),
            }
        }
        Ok(fst)
    }

    pub fn write_text(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read_text(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, path)
    }
}

/// -log(exp(-a) + exp(-b)) with max-subtraction.
pub fn neg_log_add(a: f64, b: f64) -> f64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    if hi == f64::INFINITY {
        return lo;
    }
    lo - (1.0 + (lo - hi).exp()).ln()
}

/// Phone inventory: one whole-word phone per wake word, one freetext phone
/// covering all other speech, and one SIL phone for non-speech.
#[derive(Debug, Clone)]
pub struct PhoneInventory {
    pub num_wake_words: usize,
}

impl PhoneInventory {
    pub fn new(num_wake_words: usize) -> Result<Self> {
        if num_wake_words == 0 {
            return Err(Error::Graph("at least one wake word required".into()));
        }
        Ok(PhoneInventory { num_wake_words })
    }

    pub fn wake(&self, k: usize) -> usize {
        debug_assert!(k < self.num_wake_words);
        k
    }

    pub fn freetext(&self) -> usize {
        self.num_wake_words
    }

    pub fn sil(&self) -> usize {
        self.num_wake_words + 1
    }

    pub fn num_phones(&self) -> usize {
        self.num_wake_words + 2
    }

    pub fn phone_name(&self, phone: usize) -> String {
        if phone < self.num_wake_words {
            format!("wake{phone}")
        } else if phone == self.freetext() {
            "freetext".into()
        } else {
            "sil".into()
        }
    }
}

/// Per emitting state: the PdfIds of its self-loop and forward transitions.
#[derive(Debug, Clone, Copy)]
pub struct EmittingState {
    pub self_pdf: usize,
    pub forward_pdf: usize,
}

/// Left-to-right HMM topologies for all phones. Each emitting state has a
/// self-loop and a forward arc carrying distinct PdfIds; the final state of
/// each HMM is non-emitting.
#[derive(Debug, Clone)]
pub struct HmmTopology {
    pub inventory: PhoneInventory,
    states: Vec<Vec<EmittingState>>, // indexed by phone
    num_pdfs: usize,
}

impl HmmTopology {
    pub fn states(&self, phone: usize) -> &[EmittingState] {
        &self.states[phone]
    }

    pub fn num_pdfs(&self) -> usize {
        self.num_pdfs
    }

    pub fn num_emitting_states(&self) -> usize {
        self.states.iter().map(Vec::len).sum()
    }

    /// Minimum number of frames one pass through `phone` consumes.
    pub fn min_frames(&self, phone: usize) -> usize {
        self.states[phone].len()
    }

    pub fn pdf_names(&self) -> Vec<String> {
        let mut names = vec![String::new(); self.num_pdfs];
        for (phone, states) in self.states.iter().enumerate() {
            for (i, st) in states.iter().enumerate() {
                let p = self.inventory.phone_name(phone);
                names[st.self_pdf] = format!("{p}_s{i}_self");
                names[st.forward_pdf] = format!("{p}_s{i}_fwd");
            }
        }
        names
    }
}

/// Build the HMM topology: `word_states` emitting states for each wake word
/// and for freetext, `sil_states` for SIL. PdfIds are consecutive, two per
/// emitting state.
pub fn build_topology(
    inventory: &PhoneInventory,
    word_states: usize,
    sil_states: usize,
) -> Result<HmmTopology> {
    if word_states == 0 || sil_states == 0 {
        return Err(Error::Graph("HMMs need at least one emitting state".into()));
    }
    let mut states = Vec::with_capacity(inventory.num_phones());
    let mut next_pdf = 0;
    for phone in 0..inventory.num_phones() {
        let n = if phone == inventory.sil() { sil_states } else { word_states };
        let mut v = Vec::with_capacity(n);
        for _ in 0..n {
            v.push(EmittingState {
                self_pdf: next_pdf,
                forward_pdf: next_pdf + 1,
            });
            next_pdf += 2;
        }
        states.push(v);
    }
    Ok(HmmTopology {
        inventory: inventory.clone(),
        states,
        num_pdfs: next_pdf,
    })
}

/// Path priors of the phone LM, before factoring over optional silence.
#[derive(Debug, Clone)]
pub struct PhoneLmProbs {
    /// Per wake word; the positive mass split evenly.
    pub wake: Vec<f64>,
    pub freetext: f64,
    pub sil_only: f64,
}

impl PhoneLmProbs {
    /// Priors proportional to training example counts. The SIL-only path
    /// receives a fixed 1% of the negative mass.
    pub fn from_counts(num_wake_words: usize, num_pos: usize, num_neg: usize) -> Result<Self> {
        if num_pos == 0 || num_neg == 0 {
            return Err(Error::Graph("need at least one positive and one negative example".into()));
        }
        let total = (num_pos + num_neg) as f64;
        let p_pos = num_pos as f64 / total;
        let p_neg = num_neg as f64 / total;
        Ok(PhoneLmProbs {
            wake: vec![p_pos / num_wake_words as f64; num_wake_words],
            freetext: (1.0 - SIL_ONLY_PROB) * p_neg,
            sil_only: SIL_ONLY_PROB * p_neg,
        })
    }
}

/// Build the phone-LM acceptor: one path per wake word, one freetext path,
/// one SIL-only path; optional SIL (probability 1/2 each side) before and
/// after the wake/freetext phone. Path probabilities sum to 1.
pub fn build_phone_lm(inventory: &PhoneInventory, probs: &PhoneLmProbs) -> Result<Wfst> {
    if probs.wake.len() != inventory.num_wake_words {
        return Err(Error::Graph("wake probability count mismatch".into()));
    }
    let mut phones: Vec<(usize, f64)> = probs
        .wake
        .iter()
        .enumerate()
        .map(|(k, &p)| (inventory.wake(k), p))
        .collect();
    phones.push((inventory.freetext(), probs.freetext));

    let mut fst = Wfst::new();
    let pre_done = fst.add_state(); // 1: optional leading SIL consumed
    let after = fst.add_state(); // 2: core phone consumed
    let fin = fst.add_state(); // 3
    let sil = inventory.sil() as Label + 1;
    let core_mass: f64 = phones.iter().map(|&(_, p)| p).sum();
    fst.add_arc(0, pre_done, sil, sil, -(core_mass / 2.0).ln());
    for &(phone, p) in &phones {
        let lab = phone as Label + 1;
        fst.add_arc(0, after, lab, lab, -(p / 2.0).ln());
        fst.add_arc(pre_done, after, lab, lab, -(p / core_mass).ln());
    }
    fst.add_arc(after, fin, sil, sil, -(0.5f64).ln());
    fst.add_arc(0, fin, sil, sil, -probs.sil_only.ln());
    fst.set_final(after, -(0.5f64).ln());
    fst.set_final(fin, 0.0);
    fst.validate()?;
    Ok(fst)
}

/// Append the HMM fragment for `phone` to `fst`: an epsilon entry arc from
/// `from` carrying `weight` and `olabel`, then one junction per emitting
/// state with a self-loop and a forward arc. Returns the non-emitting exit
/// state.
fn append_phone(
    fst: &mut Wfst,
    from: StateId,
    topo: &HmmTopology,
    phone: usize,
    weight: f64,
    olabel: Label,
) -> StateId {
    let states = topo.states(phone);
    let entry = fst.add_state();
    fst.add_arc(from, entry, EPS, olabel, weight);
    let mut cur = entry;
    for st in states {
        let next = fst.add_state();
        fst.add_arc(cur, cur, st.self_pdf as Label + 1, EPS, -TRANS_LOGP);
        fst.add_arc(cur, next, st.forward_pdf as Label + 1, EPS, -TRANS_LOGP);
        cur = next;
    }
    cur
}

/// Expand a phone-level acceptor through the HMM topology: every phone arc
/// is replaced by the phone's HMM fragment carrying the arc's weight.
/// Output labels are dropped (training graphs only use PdfIds).
fn expand_phone_acceptor(lm: &Wfst, topo: &HmmTopology) -> Result<Wfst> {
    let mut fst = Wfst::new();
    // LM state s maps to expanded state s (state 0 stays the start).
    for _ in 1..lm.num_states() {
        fst.add_state();
    }
    for s in 0..lm.num_states() {
        for a in lm.arcs(s) {
            if a.ilabel == EPS {
                fst.add_arc(s, a.dst, EPS, EPS, a.weight);
            } else {
                let phone = (a.ilabel - 1) as usize;
                let exit = append_phone(&mut fst, s, topo, phone, a.weight, EPS);
                fst.add_arc(exit, a.dst, EPS, EPS, 0.0);
            }
        }
    }
    for (s, w) in lm.finals() {
        fst.set_final(s, w);
    }
    Ok(fst)
}

/// Negative label or positive label with the wake word index.
pub use crate::corpus::UtteranceLabel;

/// Alignment-free numerator graph: (optional SIL) phone (optional SIL)
/// expanded through the topology with self-loops intact, so it accepts any
/// frame count at or above the shortest path. Weights match the phone-LM
/// prior of the same paths (restriction without renormalization), which
/// keeps the numerator score bounded by the denominator score.
pub fn build_numerator_graph(
    label: UtteranceLabel,
    topo: &HmmTopology,
    probs: &PhoneLmProbs,
) -> Result<Wfst> {
    let inv = &topo.inventory;
    let (phone, p) = match label {
        UtteranceLabel::Positive(k) => {
            if k >= inv.num_wake_words {
                return Err(Error::Graph(format!("wake word index {k} out of range")));
            }
            (inv.wake(k), probs.wake[k])
        }
        UtteranceLabel::Negative => (inv.freetext(), probs.freetext),
    };
    let mut lm = Wfst::new();
    let pre_done = lm.add_state();
    let after = lm.add_state();
    let fin = lm.add_state();
    let sil = inv.sil() as Label + 1;
    let lab = phone as Label + 1;
    lm.add_arc(0, pre_done, sil, sil, -(p / 2.0).ln());
    lm.add_arc(pre_done, after, lab, lab, 0.0);
    lm.add_arc(0, after, lab, lab, -(p / 2.0).ln());
    lm.add_arc(after, fin, sil, sil, -(0.5f64).ln());
    lm.set_final(after, -(0.5f64).ln());
    lm.set_final(fin, 0.0);
    let mut fst = expand_phone_acceptor(&lm, topo)?;
    fst.remove_eps()?;
    fst.validate()?;
    Ok(fst)
}

/// Denominator graph: the phone LM expanded through the topology,
/// epsilon-removed and connected. Accepts every PdfId sequence any numerator
/// graph accepts.
pub fn build_denominator_graph(phone_lm: &Wfst, topo: &HmmTopology) -> Result<Wfst> {
    let mut fst = expand_phone_acceptor(phone_lm, topo)?;
    fst.remove_eps()?;
    if fst.num_states() == 0 || fst.finals().next().is_none() {
        return Err(Error::Graph("denominator graph is empty".into()));
    }
    fst.validate()?;
    Ok(fst)
}

/// Looped word-level decoding graph: start and final states merged so the
/// graph accepts audio interleaving wake words with other speech. Wake-word
/// entry arcs carry `positive_cost`; freetext and SIL arcs cost 0. Entry
/// arcs carry the word id as output label so backtraces expose words.
pub fn build_decoding_graph(topo: &HmmTopology, positive_cost: f64) -> Result<Wfst> {
    if !positive_cost.is_finite() {
        return Err(Error::Graph("positive cost must be finite".into()));
    }
    let inv = &topo.inventory;
    let mut fst = Wfst::new();
    let loop_state = fst.start();
    let mut words: Vec<(usize, f64)> = (0..inv.num_wake_words)
        .map(|k| (inv.wake(k), positive_cost))
        .collect();
    words.push((inv.freetext(), 0.0));
    words.push((inv.sil(), 0.0));
    for (phone, cost) in words {
        let exit = append_phone(&mut fst, loop_state, topo, phone, cost, phone as Label + 1);
        fst.add_arc(exit, loop_state, EPS, EPS, 0.0);
    }
    fst.set_final(loop_state, 0.0);
    fst.validate()?;
    Ok(fst)
}

/// Write the `pdf_ids.txt` / `words.txt` symbol tables next to the graphs.
pub fn write_symbol_tables(dir: &Path, topo: &HmmTopology) -> Result<()> {
    let mut pdfs = String::from("<eps>\t0\n");
    for (i, name) in topo.pdf_names().iter().enumerate() {
        writeln!(pdfs, "{}\t{}", name, i + 1).unwrap();
    }
    let p = dir.join("pdf_ids.txt");
    std::fs::write(&p, pdfs).map_err(|e| Error::io(&p, e))?;
    let mut words = String::from("<eps>\t0\n");
    for phone in 0..topo.inventory.num_phones() {
        writeln!(words, "{}\t{}", topo.inventory.phone_name(phone), phone + 1).unwrap();
    }
    let p = dir.join("words.txt");
    std::fs::write(&p, words).map_err(|e| Error::io(&p, e))?;
    Ok(())
}
