//! Typed synaptic graphs.
//!
//! A [`NetworkTopology`] holds one sparse weight matrix per synapse type.
//! Row `i` of `W_u` lists the presynaptic neurons `j` projecting onto `i`
//! through receptor `u`. Excitatory presynaptic neurons project through AMPA
//! and NMDA, inhibitory ones through GABA_A and GABA_B; every chosen edge is
//! present in both matrices of its class with independently drawn weights.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HdaError, Result};
use crate::rng::rng_from_seed;
use crate::synapse::{PerType, SynapseType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NeuronClass {
    Excitatory,
    Inhibitory,
}

impl NeuronClass {
    fn code(self) -> char {
        match self {
            NeuronClass::Excitatory => 'E',
            NeuronClass::Inhibitory => 'I',
        }
    }

    /// Synapse types through which a neuron of this class projects.
    pub fn synapse_types(self) -> [SynapseType; 2] {
        match self {
            NeuronClass::Excitatory => [SynapseType::Ampa, SynapseType::Nmda],
            NeuronClass::Inhibitory => [SynapseType::GabaA, SynapseType::GabaB],
        }
    }
}

/// Number of excitatory neurons in a network of `n`.
pub fn excitatory_count(n: usize) -> usize {
    4 * n / 5
}

/// Per-class in-degree `(excitatory, inhibitory)` for nominal degree `d`.
pub fn class_in_degrees(d: usize) -> (usize, usize) {
    (4 * d / 5, d / 5)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologyKind {
    Random,
    SmallWorld { p_rewire: f64 },
    ScaleFree { m_attach: usize },
}

impl TopologyKind {
    /// Whether the fixed per-class in-degree invariant applies.
    pub fn has_fixed_in_degree(&self) -> bool {
        !matches!(self, TopologyKind::ScaleFree { .. })
    }
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopologyKind::Random => write!(f, "random"),
            TopologyKind::SmallWorld { p_rewire } => write!(f, "ws:{}", p_rewire),
            TopologyKind::ScaleFree { m_attach } => write!(f, "ba:{}", m_attach),
        }
    }
}

impl std::str::FromStr for TopologyKind {
    type Err = HdaError;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((a, b)) => (a, Some(b)),
            None => (s, None),
        };
        let bad = || HdaError::parse(format!("bad topology kind '{s}'"));
        match (name, arg) {
            ("random", None) => Ok(TopologyKind::Random),
            ("ws", Some(p)) => Ok(TopologyKind::SmallWorld {
                p_rewire: p.parse().map_err(|_| bad())?,
            }),
            ("ba", Some(m)) => Ok(TopologyKind::ScaleFree {
                m_attach: m.parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}

/// Compressed sparse rows; row = postsynaptic neuron, column = presynaptic.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseWeights {
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl SparseWeights {
    fn from_rows(rows: Vec<Vec<(u32, f64)>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            for (j, w) in row {
                cols.push(j);
                vals.push(w);
            }
            row_ptr.push(cols.len());
        }
        SparseWeights {
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// Presynaptic neighbours and weights of neuron `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()]
            .iter()
            .zip(&self.vals[r])
            .map(|(&j, &w)| (j as usize, w))
    }

    pub fn row_len(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i)
            .find(|&(c, _)| c == j)
            .map(|(_, w)| w)
            .unwrap_or(0.0)
    }

    /// All `(i, j, w)` triples in row-major order.
    pub fn triples(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows()).flat_map(move |i| self.row(i).map(move |(j, w)| (i, j, w)))
    }

    fn transpose(&self, n: usize) -> SparseWeights {
        let mut rows = vec![Vec::new(); n];
        for (i, j, w) in self.triples() {
            rows[j].push((i as u32, w));
        }
        SparseWeights::from_rows(rows)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTopology {
    n: usize,
    degree: usize,
    kind: TopologyKind,
    seed: u64,
    classes: Vec<NeuronClass>,
    weights: PerType<SparseWeights>,
    /// Transposed matrices, row = presynaptic neuron, for spike propagation.
    outgoing: PerType<SparseWeights>,
}

type Rows = Vec<Vec<(u32, f64)>>;

impl NetworkTopology {
    fn assemble(
        n: usize,
        degree: usize,
        kind: TopologyKind,
        seed: u64,
        classes: Vec<NeuronClass>,
        rows: PerType<Rows>,
    ) -> Result<Self> {
        let weights = PerType {
            ampa: SparseWeights::from_rows(rows.ampa),
            nmda: SparseWeights::from_rows(rows.nmda),
            gaba_a: SparseWeights::from_rows(rows.gaba_a),
            gaba_b: SparseWeights::from_rows(rows.gaba_b),
        };
        let outgoing = PerType::from_fn(|u| weights.get(u).transpose(n));
        let topo = NetworkTopology {
            n,
            degree,
            kind,
            seed,
            classes,
            weights,
            outgoing,
        };
        topo.validate()?;
        Ok(topo)
    }

    pub fn n_neurons(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn classes(&self) -> &[NeuronClass] {
        &self.classes
    }

    pub fn class(&self, i: usize) -> NeuronClass {
        self.classes[i]
    }

    pub fn weights(&self, u: SynapseType) -> &SparseWeights {
        self.weights.get(u)
    }

    /// Postsynaptic targets of neuron `j` through receptor `u`.
    pub fn outgoing(&self, u: SynapseType, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.outgoing.get(u).row(j)
    }

    /// In-degree of neuron `i` from presynaptic neurons of `class`.
    pub fn in_degree(&self, i: usize, class: NeuronClass) -> usize {
        let [u, _] = class.synapse_types();
        self.weights.get(u).row_len(i)
    }

    /// Number of distinct outgoing edges per neuron (class graph, not per type).
    pub fn out_degrees(&self) -> Vec<usize> {
        (0..self.n)
            .map(|j| {
                let [u, _] = self.classes[j].synapse_types();
                self.outgoing.get(u).row_len(j)
            })
            .collect()
    }

    /// Number of distinct directed edges (class graph).
    pub fn edge_count(&self) -> usize {
        self.weights.ampa.nnz() + self.weights.gaba_a.nnz()
    }

    /// Check every structural invariant.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HdaError::Domain(format!("invalid topology: {msg}")));
        if self.classes.len() != self.n {
            return bad(format!(
                "{} classes for {} neurons",
                self.classes.len(),
                self.n
            ));
        }
        let n_exc = self
            .classes
            .iter()
            .filter(|&&c| c == NeuronClass::Excitatory)
            .count();
        if n_exc != excitatory_count(self.n) {
            return bad(format!(
                "{n_exc} excitatory neurons, expected {}",
                excitatory_count(self.n)
            ));
        }
        for u in SynapseType::ALL {
            let w = self.weights.get(u);
            if w.n_rows() != self.n {
                return bad(format!("{u} matrix has {} rows", w.n_rows()));
            }
            for (i, j, v) in w.triples() {
                if i == j {
                    return bad(format!("self-loop on neuron {i} ({u})"));
                }
                if j >= self.n {
                    return bad(format!("{u} edge {j}->{i} out of range"));
                }
                if !(v > 0.0 && v < 1.0) {
                    return bad(format!("{u} weight {v} of edge {j}->{i} outside (0,1)"));
                }
                if self.classes[j].synapse_types()[0].is_excitatory() != u.is_excitatory() {
                    return bad(format!(
                        "{u} edge {j}->{i} from a {:?} neuron",
                        self.classes[j]
                    ));
                }
            }
        }
        // Both matrices of a class share one support.
        for (a, b) in [
            (SynapseType::Ampa, SynapseType::Nmda),
            (SynapseType::GabaA, SynapseType::GabaB),
        ] {
            let (wa, wb) = (self.weights.get(a), self.weights.get(b));
            if wa.row_ptr != wb.row_ptr || wa.cols != wb.cols {
                return bad(format!("{a} and {b} supports differ"));
            }
        }
        if self.kind.has_fixed_in_degree() {
            let (ke, ki) = class_in_degrees(self.degree);
            for i in 0..self.n {
                let de = self.in_degree(i, NeuronClass::Excitatory);
                let di = self.in_degree(i, NeuronClass::Inhibitory);
                if de != ke || di != ki {
                    return bad(format!(
                        "neuron {i} has in-degree ({de}, {di}), expected ({ke}, {ki})"
                    ));
                }
            }
        }
        Ok(())
    }
}

fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let w: f64 = rng.random();
        if w > 0.0 {
            return w;
        }
    }
}

/// Push edge `j -> i` into both matrices of `j`'s class.
fn push_edge<R: Rng + ?Sized>(
    rows: &mut PerType<Rows>,
    classes: &[NeuronClass],
    i: usize,
    j: usize,
    rng: &mut R,
) {
    for u in classes[j].synapse_types() {
        rows.get_mut(u)[i].push((j as u32, open_unit(rng)));
    }
}

fn empty_rows(n: usize) -> PerType<Rows> {
    PerType::from_fn(|_| vec![Vec::new(); n])
}

fn block_classes(n: usize) -> Vec<NeuronClass> {
    let n_exc = excitatory_count(n);
    (0..n)
        .map(|i| {
            if i < n_exc {
                NeuronClass::Excitatory
            } else {
                NeuronClass::Inhibitory
            }
        })
        .collect()
}

fn check_degree_bounds(n: usize, d: usize) -> Result<()> {
    if n < 5 {
        return Err(HdaError::config(format!("n = {n} violates n >= 5")));
    }
    if d < 5 {
        return Err(HdaError::config(format!("d = {d} violates d >= 5")));
    }
    if d >= n {
        return Err(HdaError::config(format!("d = {d} violates d < n = {n}")));
    }
    let n_exc = excitatory_count(n);
    let n_inh = n - n_exc;
    let (ke, ki) = class_in_degrees(d);
    if ke > n_exc {
        return Err(HdaError::config(format!(
            "floor(4d/5) = {ke} exceeds excitatory pool floor(4n/5) = {n_exc}"
        )));
    }
    if ki > n_inh {
        return Err(HdaError::config(format!(
            "floor(d/5) = {ki} exceeds inhibitory pool n - floor(4n/5) = {n_inh}"
        )));
    }
    // No self-loops: a neuron draws same-class neighbours from the others.
    if ke > n_exc - 1 {
        return Err(HdaError::config(format!(
            "floor(4d/5) = {ke} exceeds the {} distinct non-self excitatory neighbours",
            n_exc - 1
        )));
    }
    if ki > n_inh - 1 {
        return Err(HdaError::config(format!(
            "floor(d/5) = {ki} exceeds the {} distinct non-self inhibitory neighbours",
            n_inh - 1
        )));
    }
    Ok(())
}

/// Random graph where every neuron draws `floor(4d/5)` excitatory and
/// `floor(d/5)` inhibitory presynaptic neighbours uniformly without
/// replacement.
pub fn generate_random_fixed_degree(n: usize, d: usize, seed: u64) -> Result<NetworkTopology> {
    check_degree_bounds(n, d)?;
    let classes = block_classes(n);
    let n_exc = excitatory_count(n);
    let (ke, ki) = class_in_degrees(d);
    let mut rng = rng_from_seed(seed);
    let mut rows = empty_rows(n);

    for i in 0..n {
        for (lo, hi, k) in [(0, n_exc, ke), (n_exc, n, ki)] {
            let own = (lo..hi).contains(&i);
            let pool = hi - lo - usize::from(own);
            for s in index::sample(&mut rng, pool, k).into_iter() {
                // Skip over `i` inside its own class block.
                let mut j = lo + s;
                if own && j >= i {
                    j += 1;
                }
                push_edge(&mut rows, &classes, i, j, &mut rng);
            }
        }
    }
    NetworkTopology::assemble(n, d, TopologyKind::Random, seed, classes, rows)
}

/// Class-restricted ring lattice with independent rewiring.
///
/// Neuron `i` takes its `k` nearest same-class-ring neighbours, alternating
/// sides. With probability `p_rewire` each edge's presynaptic endpoint is
/// redrawn uniformly from the non-neighbours of the same class.
pub fn generate_ws_small_world(
    n: usize,
    d: usize,
    p_rewire: f64,
    seed: u64,
) -> Result<NetworkTopology> {
    if !(0.0..=1.0).contains(&p_rewire) {
        return Err(HdaError::config(format!(
            "p_rewire = {p_rewire} outside [0, 1]"
        )));
    }
    check_degree_bounds(n, d)?;
    let classes = block_classes(n);
    let n_exc = excitatory_count(n);
    let (ke, ki) = class_in_degrees(d);
    let mut rng = rng_from_seed(seed);
    let mut rows = empty_rows(n);

    for i in 0..n {
        for (lo, hi, k) in [(0, n_exc, ke), (n_exc, n, ki)] {
            let len = hi - lo;
            let own = (lo..hi).contains(&i);
            let lattice = ring_neighbours(i, n, lo, len, own, k);
            let mut chosen: HashSet<usize> = lattice.iter().copied().collect();
            let free = len - usize::from(own) - k;
            for &j in &lattice {
                let mut pre = j;
                if free > 0 && rng.random::<f64>() < p_rewire {
                    // Uniform over class members that are neither i nor current neighbours.
                    let mut pick = rng.random_range(0..free);
                    for cand in lo..hi {
                        if cand == i || chosen.contains(&cand) {
                            continue;
                        }
                        if pick == 0 {
                            pre = cand;
                            break;
                        }
                        pick -= 1;
                    }
                    chosen.remove(&j);
                    chosen.insert(pre);
                }
                push_edge(&mut rows, &classes, i, pre, &mut rng);
            }
        }
    }
    NetworkTopology::assemble(
        n,
        d,
        TopologyKind::SmallWorld { p_rewire },
        seed,
        classes,
        rows,
    )
}

/// The `k` nearest members of the ring `lo..lo+len` seen from neuron `i`.
/// A neuron outside the ring is anchored at its relative position `i*len/n`.
fn ring_neighbours(i: usize, n: usize, lo: usize, len: usize, own: bool, k: usize) -> Vec<usize> {
    let centre = if own { i - lo } else { i * len / n };
    let mut out = Vec::with_capacity(k);
    let mut seen = HashSet::with_capacity(k + 1);
    if own {
        seen.insert(centre);
    }
    let mut step = 0usize;
    while out.len() < k {
        let cands: &[isize] = if step == 0 {
            &[0]
        } else {
            &[step as isize, -(step as isize)]
        };
        for &off in cands {
            let pos = (centre as isize + off).rem_euclid(len as isize) as usize;
            if out.len() < k && seen.insert(pos) {
                out.push(lo + pos);
            }
        }
        step += 1;
    }
    out
}

/// Preferential attachment. New nodes are postsynaptic: each forms `m_attach`
/// in-edges from distinct existing nodes chosen with probability
/// proportional to their total degree.
pub fn generate_ba_scale_free(n: usize, m_attach: usize, seed: u64) -> Result<NetworkTopology> {
    if m_attach == 0 {
        return Err(HdaError::config("m_attach must be positive"));
    }
    if m_attach >= n {
        return Err(HdaError::config(format!(
            "m_attach = {m_attach} violates m_attach < n = {n}"
        )));
    }
    if n < 5 {
        return Err(HdaError::config(format!("n = {n} violates n >= 5")));
    }
    let mut rng = rng_from_seed(seed);
    let mut classes = block_classes(n);
    classes.shuffle(&mut rng);
    let mut rows = empty_rows(n);
    let mut degree = vec![0usize; n];

    for i in 0..m_attach {
        for j in 0..m_attach {
            if i != j {
                push_edge(&mut rows, &classes, i, j, &mut rng);
                degree[i] += 1;
                degree[j] += 1;
            }
        }
    }
    for t in m_attach..n {
        let picks = index::sample_weighted(&mut rng, t, |k| degree[k].max(1) as f64, m_attach)
            .map_err(|e| HdaError::Numeric(format!("preferential attachment: {e}")))?;
        let mut picks: Vec<usize> = picks.into_iter().collect();
        picks.sort_unstable();
        for j in picks {
            push_edge(&mut rows, &classes, t, j, &mut rng);
            degree[t] += 1;
            degree[j] += 1;
        }
    }
    NetworkTopology::assemble(
        n,
        m_attach,
        TopologyKind::ScaleFree { m_attach },
        seed,
        classes,
        rows,
    )
}

/// Format with 17 significant digits in fixed notation.
fn format_weight(w: f64) -> String {
    let exp = w.abs().log10().floor() as i32;
    let mut decimals = (16 - exp).max(0) as usize;
    loop {
        let s = format!("{w:.decimals$}");
        if s.parse::<f64>().map(f64::to_bits) == Ok(w.to_bits()) {
            return s;
        }
        decimals += 1;
    }
}

const HEADER: &str = "# hda-topology v1";

impl NetworkTopology {
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{HEADER}")?;
        writeln!(out, "n={}", self.n)?;
        writeln!(out, "d={}", self.degree)?;
        writeln!(out, "kind={}", self.kind)?;
        writeln!(out, "seed={}", self.seed)?;
        let codes: String = self.classes.iter().map(|c| c.code()).collect();
        writeln!(out, "classes={codes}")?;
        writeln!(out, "u,i,j,w")?;
        for u in SynapseType::ALL {
            for (i, j, w) in self.weights.get(u).triples() {
                writeln!(out, "{u},{i},{j},{}", format_weight(w))?;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = fs::File::create(path)?;
        let mut buf = std::io::BufWriter::new(file);
        self.write_to(&mut buf)?;
        buf.flush()?;
        Ok(())
    }

    /// Parse and validate a topology file.
    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let mut lines = BufReader::new(input).lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| HdaError::parse("truncated topology header"))?
                .map_err(HdaError::from)
        };
        if next()?.trim() != HEADER {
            return Err(HdaError::parse("missing topology header line"));
        }
        let mut field = |key: &str| -> Result<String> {
            let line = next()?;
            line.strip_prefix(key)
                .and_then(|r| r.strip_prefix('='))
                .map(str::to_owned)
                .ok_or_else(|| HdaError::parse(format!("expected '{key}=' got '{line}'")))
        };
        let num = |s: String, key: &str| -> Result<u64> {
            s.trim()
                .parse()
                .map_err(|_| HdaError::parse(format!("bad {key} '{s}'")))
        };
        let n = num(field("n")?, "n")? as usize;
        let degree = num(field("d")?, "d")? as usize;
        let kind: TopologyKind = field("kind")?.parse()?;
        let seed = num(field("seed")?, "seed")?;
        let classes = field("classes")?
            .chars()
            .map(|c| match c {
                'E' => Ok(NeuronClass::Excitatory),
                'I' => Ok(NeuronClass::Inhibitory),
                _ => Err(HdaError::parse(format!("bad class code '{c}'"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if next()?.trim() != "u,i,j,w" {
            return Err(HdaError::parse("missing edge column header"));
        }
        if classes.len() != n {
            return Err(HdaError::parse("class string length differs from n"));
        }
        let mut rows = empty_rows(n);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 4 {
                return Err(HdaError::parse(format!("bad edge record '{line}'")));
            }
            let u: SynapseType = parts[0].parse()?;
            let i: usize = parts[1]
                .parse()
                .map_err(|_| HdaError::parse(format!("bad row in '{line}'")))?;
            let j: u32 = parts[2]
                .parse()
                .map_err(|_| HdaError::parse(format!("bad column in '{line}'")))?;
            let w: f64 = parts[3]
                .parse()
                .map_err(|_| HdaError::parse(format!("bad weight in '{line}'")))?;
            if i >= n {
                return Err(HdaError::parse(format!("row {i} out of range")));
            }
            rows.get_mut(u)[i].push((j, w));
        }
        NetworkTopology::assemble(n, degree, kind, seed, classes, rows)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(fs::File::open(path)?)
    }
}
