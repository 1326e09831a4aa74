//! Optical circuits and static chip layouts.
//!
//! A [`Circuit`] is an ordered list of elements applied to the modes one after
//! another: evaluating `[E1, E2, ..., Ek]` gives `Ek * ... * E2 * E1`. A
//! [`ChipLayout`] only records where MZI slots sit; angles are supplied by the
//! compiler.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, UnitaryMatrix, ONE};
use crate::mzi::{mat2_adjoint, wrap_angle, MziParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Element {
    /// MZI between `modes[0] < modes[1]`. The modes need not be adjacent, which
    /// is how long-range MZIs are represented. `adjoint` marks a reversed MZI
    /// whose transfer matrix is the conjugate transpose of the standard one.
    Mzi {
        modes: [usize; 2],
        theta: f64,
        phi: f64,
        active: bool,
        #[serde(default, skip_serializing_if = "is_false")]
        adjoint: bool,
    },
    Phase {
        mode: usize,
        phi: f64,
    },
    /// Free mode permutation: the amplitude on mode `i` moves to `perm[i]`.
    Coupling {
        perm: Vec<usize>,
    },
    /// A flat sub-circuit acting on `modes`; nested mode `r` is global mode
    /// `modes[r]`.
    Block {
        modes: Vec<usize>,
        circuit: Circuit,
    },
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl Element {
    pub fn mzi(low: usize, high: usize, params: MziParams, active: bool) -> Self {
        Element::Mzi {
            modes: [low, high],
            theta: params.theta,
            phi: params.phi,
            active,
            adjoint: false,
        }
    }

    /// Inactive MZI set to the identity.
    pub fn idle_mzi(low: usize, high: usize) -> Self {
        Self::mzi(low, high, MziParams::IDENTITY, false)
    }

    pub fn phase(mode: usize, phi: f64) -> Self {
        Element::Phase { mode, phi }
    }

    pub fn is_mzi(&self) -> bool {
        matches!(self, Element::Mzi { .. })
    }

    /// The adjoint element; composing it after `self` gives the identity.
    pub fn adjoint(&self) -> Self {
        match self {
            Element::Mzi {
                modes,
                theta,
                phi,
                active,
                adjoint,
            } => Element::Mzi {
                modes: *modes,
                theta: *theta,
                phi: *phi,
                active: *active,
                adjoint: !adjoint,
            },
            Element::Phase { mode, phi } => Element::Phase {
                mode: *mode,
                phi: wrap_angle(-phi),
            },
            Element::Coupling { perm } => Element::Coupling {
                perm: invert_permutation(perm),
            },
            Element::Block { modes, circuit } => Element::Block {
                modes: modes.clone(),
                circuit: circuit.inverse(),
            },
        }
    }

    fn validate(&self, m: usize, nested: bool) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidCircuit(msg));
        match self {
            Element::Mzi {
                modes: [i, j],
                theta,
                phi,
                ..
            } => {
                if !(i < j && *j < m) {
                    return bad(format!("MZI modes ({i}, {j}) invalid on {m} modes"));
                }
                if !theta.is_finite() || !phi.is_finite() {
                    return bad(format!("MZI ({i}, {j}) has non-finite angles"));
                }
            }
            Element::Phase { mode, phi } => {
                if *mode >= m {
                    return bad(format!("phase shifter on mode {mode} of {m}"));
                }
                if !phi.is_finite() {
                    return bad(format!("phase shifter on mode {mode} is non-finite"));
                }
            }
            Element::Coupling { perm } => {
                if perm.len() != m || !is_permutation(perm) {
                    return bad(format!("coupling {perm:?} is not a permutation of {m} modes"));
                }
            }
            Element::Block { modes, circuit } => {
                if nested {
                    return bad("chip blocks nest at most one level deep".into());
                }
                if modes.is_empty() || modes.iter().any(|&q| q >= m) {
                    return bad(format!("block modes {modes:?} out of range"));
                }
                let mut sorted = modes.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() != modes.len() {
                    return bad(format!("block modes {modes:?} repeat a mode"));
                }
                if circuit.modes != modes.len() {
                    return bad(format!(
                        "block on {} modes holds a {}-mode circuit",
                        modes.len(),
                        circuit.modes
                    ));
                }
                for e in &circuit.elements {
                    e.validate(circuit.modes, true)?;
                }
            }
        }
        Ok(())
    }

    /// Left-multiplies `state` (rows indexed by mode) by this element.
    fn apply(&self, state: &mut ComplexMatrix) {
        match self {
            Element::Mzi {
                modes: [i, j],
                theta,
                phi,
                adjoint,
                ..
            } => {
                let t = MziParams::new(*theta, *phi).transfer();
                let t = if *adjoint { mat2_adjoint(&t) } else { t };
                state.rotate_rows(*i, *j, &t);
            }
            Element::Phase { mode, phi } => {
                let f = Complex64::from_polar(1.0, *phi);
                state.row_mut(*mode).iter_mut().for_each(|z| *z *= f);
            }
            Element::Coupling { perm } => {
                let old = state.clone();
                for (i, &j) in perm.iter().enumerate() {
                    state.row_mut(j).copy_from_slice(old.row(i));
                }
            }
            Element::Block { modes, circuit } => {
                let sub = circuit.evaluate_raw();
                let old: Vec<Vec<Complex64>> = modes.iter().map(|&q| state.row(q).to_vec()).collect();
                for (r, &q) in modes.iter().enumerate() {
                    let dst = state.row_mut(q);
                    dst.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
                    for (k, src) in old.iter().enumerate() {
                        let a = sub[(r, k)];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += a * s;
                        }
                    }
                }
            }
        }
    }
}

pub fn is_permutation(perm: &[usize]) -> bool {
    let mut seen = vec![false; perm.len()];
    perm.iter().all(|&j| j < perm.len() && !std::mem::replace(&mut seen[j], true))
}

pub fn invert_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &j) in perm.iter().enumerate() {
        inv[j] = i;
    }
    inv
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCircuit")]
pub struct Circuit {
    pub modes: usize,
    pub elements: Vec<Element>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCircuit {
    modes: usize,
    elements: Vec<Element>,
}

impl TryFrom<RawCircuit> for Circuit {
    type Error = Error;

    fn try_from(raw: RawCircuit) -> Result<Self> {
        let c = Circuit {
            modes: raw.modes,
            elements: raw.elements,
        };
        c.validate()?;
        Ok(c)
    }
}

impl Circuit {
    pub fn new(modes: usize) -> Self {
        Self {
            modes,
            elements: Vec::new(),
        }
    }

    pub fn push(&mut self, e: Element) {
        self.elements.push(e);
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes == 0 {
            return Err(Error::InvalidCircuit("circuit needs at least one mode".into()));
        }
        self.elements
            .iter()
            .try_for_each(|e| e.validate(self.modes, false))
    }

    fn evaluate_raw(&self) -> ComplexMatrix {
        let mut state = ComplexMatrix::identity(self.modes);
        for e in &self.elements {
            e.apply(&mut state);
        }
        state
    }

    /// Transfer matrix of the whole circuit.
    pub fn evaluate(&self) -> Result<UnitaryMatrix> {
        self.validate()?;
        Ok(UnitaryMatrix::new_unchecked(self.evaluate_raw()))
    }

    /// Applies the circuit to the rows of `input` (used for isometries).
    pub fn apply_to(&self, input: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.validate()?;
        if input.rows() != self.modes {
            return Err(Error::Dimension(format!(
                "circuit on {} modes applied to {} rows",
                self.modes,
                input.rows()
            )));
        }
        let mut state = input.clone();
        for e in &self.elements {
            e.apply(&mut state);
        }
        Ok(state)
    }

    pub fn mzi_count(&self) -> usize {
        self.elements
            .iter()
            .map(|e| match e {
                Element::Mzi { .. } => 1,
                Element::Block { circuit, .. } => circuit.mzi_count(),
                _ => 0,
            })
            .sum()
    }

    pub fn active_mzi_count(&self) -> usize {
        self.elements
            .iter()
            .map(|e| match e {
                Element::Mzi { active, .. } => usize::from(*active),
                Element::Block { circuit, .. } => circuit.active_mzi_count(),
                _ => 0,
            })
            .sum()
    }

    /// Earliest-start list scheduling of MZIs; phase shifters and couplings
    /// take no time. A block occupies all of its modes for its internal depth.
    pub fn mzi_depth(&self) -> usize {
        let mut ready = vec![0usize; self.modes];
        for e in &self.elements {
            match e {
                Element::Mzi { modes: [i, j], .. } => {
                    let t = ready[*i].max(ready[*j]) + 1;
                    ready[*i] = t;
                    ready[*j] = t;
                }
                Element::Phase { .. } => {}
                Element::Coupling { perm } => {
                    let old = ready.clone();
                    for (i, &j) in perm.iter().enumerate() {
                        ready[j] = old[i];
                    }
                }
                Element::Block { modes, circuit } => {
                    let d = circuit.mzi_depth();
                    let t = modes.iter().map(|&q| ready[q]).max().unwrap_or(0) + d;
                    modes.iter().for_each(|&q| ready[q] = t);
                }
            }
        }
        ready.into_iter().max().unwrap_or(0)
    }

    /// Reversed element order with every element replaced by its adjoint.
    pub fn inverse(&self) -> Circuit {
        Circuit {
            modes: self.modes,
            elements: self.elements.iter().rev().map(Element::adjoint).collect(),
        }
    }

    /// Rewrites a circuit of (possibly reversed) MZIs, phase shifters and
    /// couplings into standard MZIs followed by one terminal layer of phase
    /// shifters on every mode, without changing its transfer matrix.
    ///
    /// Phases are pushed towards the output with
    ///
    /// ```text
    /// MZI(t, f)^dag diag(a, b) = diag(-e^{-i(t+f)} b, -e^{-i t} b) MZI(t, arg(a/b))
    /// MZI(t, f)     diag(a, b) = diag(b, b) MZI(t, f + arg(a/b))
    /// ```
    ///
    /// Inactive identity MZIs commute with the pending phases and stay idle.
    pub fn propagate_phases(&self) -> Result<Circuit> {
        self.validate()?;
        let mut pending = vec![ONE; self.modes];
        let mut out = Circuit::new(self.modes);
        for e in &self.elements {
            match e {
                Element::Phase { mode, phi } => pending[*mode] *= Complex64::from_polar(1.0, *phi),
                Element::Mzi {
                    modes: [i, j],
                    theta,
                    phi,
                    active,
                    adjoint,
                } => {
                    let params = MziParams::new(*theta, *phi);
                    if !active && is_identity(&params) {
                        out.push(Element::idle_mzi(*i, *j));
                        continue;
                    }
                    let (a, b) = (pending[*i], pending[*j]);
                    let rel = (a / b).arg();
                    if *adjoint {
                        out.push(Element::mzi(*i, *j, MziParams::new(*theta, rel).canonical(), *active));
                        pending[*i] = -Complex64::from_polar(1.0, -(theta + phi)) * b;
                        pending[*j] = -Complex64::from_polar(1.0, -theta) * b;
                    } else {
                        out.push(Element::mzi(*i, *j, MziParams::new(*theta, phi + rel).canonical(), *active));
                        pending[*i] = b;
                        pending[*j] = b;
                    }
                }
                Element::Coupling { perm } => {
                    let old = pending.clone();
                    for (i, &j) in perm.iter().enumerate() {
                        pending[j] = old[i];
                    }
                    out.push(e.clone());
                }
                Element::Block { .. } => {
                    return Err(Error::UnsupportedElement(
                        "chip blocks cannot be rewritten by phase propagation".into(),
                    ))
                }
            }
        }
        for (mode, z) in pending.iter().enumerate() {
            out.push(Element::phase(mode, wrap_angle(z.arg())));
        }
        Ok(out)
    }
}

fn is_identity(p: &MziParams) -> bool {
    let t = p.transfer();
    (t[0][0] - ONE).norm() < 1e-14
        && (t[1][1] - ONE).norm() < 1e-14
        && t[0][1].norm() < 1e-14
        && t[1][0].norm() < 1e-14
}

/// Positions of the MZI slots of an interferometer, layer by layer. Every slot
/// couples adjacent modes `(i, i + 1)` and slots within a layer are disjoint.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawLayout")]
pub struct ChipLayout {
    pub modes: usize,
    pub layers: Vec<Vec<[usize; 2]>>,
    pub terminal_phase_layer: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayout {
    modes: usize,
    layers: Vec<Vec<[usize; 2]>>,
    #[serde(default)]
    terminal_phase_layer: bool,
}

impl TryFrom<RawLayout> for ChipLayout {
    type Error = Error;

    fn try_from(raw: RawLayout) -> Result<Self> {
        ChipLayout::new(raw.modes, raw.layers, raw.terminal_phase_layer)
    }
}

impl ChipLayout {
    /// Validates and normalizes (pairs sorted by lower mode within each layer).
    pub fn new(modes: usize, mut layers: Vec<Vec<[usize; 2]>>, terminal_phase_layer: bool) -> Result<Self> {
        if modes == 0 {
            return Err(Error::InvalidLayout("layout needs at least one mode".into()));
        }
        for (l, layer) in layers.iter_mut().enumerate() {
            layer.sort_unstable();
            let mut used = vec![false; modes];
            for &[i, j] in layer.iter() {
                if j != i + 1 || j >= modes {
                    return Err(Error::InvalidLayout(format!(
                        "layer {l}: slot ({i}, {j}) is not a nearest-neighbour pair on {modes} modes"
                    )));
                }
                if used[i] || used[j] {
                    return Err(Error::InvalidLayout(format!(
                        "layer {l}: slot ({i}, {j}) overlaps another slot"
                    )));
                }
                used[i] = true;
                used[j] = true;
            }
        }
        Ok(Self {
            modes,
            layers,
            terminal_phase_layer,
        })
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn slot_count(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    /// `(layer, pair)` for every slot in forward order.
    pub fn slots(&self) -> impl DoubleEndedIterator<Item = (usize, [usize; 2])> + '_ {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(l, layer)| layer.iter().map(move |&p| (l, p)))
    }

    /// First `depth` layers.
    pub fn truncated(&self, depth: usize) -> ChipLayout {
        ChipLayout {
            modes: self.modes,
            layers: self.layers[..depth.min(self.layers.len())].to_vec(),
            terminal_phase_layer: self.terminal_phase_layer,
        }
    }

    /// Same slots in reverse layer order.
    pub fn reversed(&self) -> ChipLayout {
        ChipLayout {
            modes: self.modes,
            layers: self.layers.iter().rev().cloned().collect(),
            terminal_phase_layer: self.terminal_phase_layer,
        }
    }

    /// Circuit with one MZI per slot set to `angles` (slot order), followed by
    /// the terminal phases when given.
    pub fn to_circuit(&self, angles: &[(MziParams, bool)], terminal: Option<&[f64]>) -> Result<Circuit> {
        if angles.len() != self.slot_count() {
            return Err(Error::Dimension(format!(
                "{} angle pairs for {} slots",
                angles.len(),
                self.slot_count()
            )));
        }
        let mut c = Circuit::new(self.modes);
        for ((_, [i, j]), &(p, active)) in self.slots().zip(angles) {
            c.push(Element::mzi(i, j, p, active));
        }
        if let Some(phases) = terminal {
            if phases.len() != self.modes {
                return Err(Error::Dimension(format!(
                    "{} terminal phases for {} modes",
                    phases.len(),
                    self.modes
                )));
            }
            for (mode, &phi) in phases.iter().enumerate() {
                c.push(Element::phase(mode, phi));
            }
        }
        Ok(c)
    }

    /// Circuit with every slot idle; useful for depth and count metrics.
    pub fn idle_circuit(&self) -> Circuit {
        let mut c = Circuit::new(self.modes);
        for (_, [i, j]) in self.slots() {
            c.push(Element::idle_mzi(i, j));
        }
        c
    }
}
