//! Sorting-network shaped layouts.
//!
//! A comparator on wires `(i, i + 1)` is a conditional swap that moves the
//! smaller label to wire `i`. The same arrangement, read as a chip layout,
//! places one MZI slot per comparator.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{ChipLayout, Circuit, Element};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparatorNetwork {
    pub wires: usize,
    /// Comparators grouped by time step. Layers may be empty; the depth of
    /// the network is the number of time steps.
    pub layers: Vec<Vec<[usize; 2]>>,
}

impl ComparatorNetwork {
    fn from_timed(wires: usize, depth: usize, timed: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut layers = vec![Vec::new(); depth];
        for (t, j) in timed {
            layers[t].push([j, j + 1]);
        }
        for layer in &mut layers {
            layer.sort_unstable();
        }
        Self { wires, layers }
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn count(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    pub fn comparators(&self) -> impl Iterator<Item = [usize; 2]> + '_ {
        self.layers.iter().flatten().copied()
    }

    /// Runs the conditional swaps on `labels`.
    pub fn apply(&self, labels: &mut [usize]) {
        for [i, j] in self.comparators() {
            if labels[i] > labels[j] {
                labels.swap(i, j);
            }
        }
    }

    pub fn to_layout(&self, terminal_phase_layer: bool) -> ChipLayout {
        ChipLayout::new(self.wires.max(1), self.layers.clone(), terminal_phase_layer)
            .expect("generated networks are valid layouts")
    }

    /// Same comparators with the time order reversed.
    pub fn reversed(&self) -> Self {
        Self {
            wires: self.wires,
            layers: self.layers.iter().rev().cloned().collect(),
        }
    }
}

/// Odd-even transposition network: `m` layers alternating `(0,1),(2,3),...`
/// and `(1,2),(3,4),...`.
pub fn full_sorting_network(m: usize) -> ComparatorNetwork {
    let timed = (0..m).flat_map(|t| (t % 2..m.saturating_sub(1)).step_by(2).map(move |j| (t, j)));
    ComparatorNetwork::from_timed(m, m, timed)
}

/// Sorts label 0, then label 1, and so on, each with a bubbling diagonal.
/// Pass `k` runs comparators `m-2, ..., k` at times `m-2-j+2k`.
pub fn reck_network(m: usize) -> ComparatorNetwork {
    if m < 2 {
        return ComparatorNetwork {
            wires: m,
            layers: Vec::new(),
        };
    }
    let timed = (0..m - 1).flat_map(|k| (k..m - 1).map(move |j| (m - 2 - j + 2 * k, j)));
    ComparatorNetwork::from_timed(m, 2 * m - 3, timed)
}

/// Network that brings labels `0..n` to wires `0..n` in order.
///
/// It is a union of `n` comparator diagonals. The diagonal with offset `o`
/// holds comparator `j` at time `m-2-j+o` whenever that time lies in
/// `[0, m-1]`; offsets run `0, +2, -2, +4, -4, ...`, so the diagonals have
/// `m-1, m-2, ..., m-n` comparators.
pub fn partial_sorting_network(m: usize, n: usize) -> Result<ComparatorNetwork> {
    if n == 0 || n > m {
        return Err(Error::Dimension(format!("partial sorting of {n} labels on {m} wires")));
    }
    if m == 1 {
        return Ok(ComparatorNetwork {
            wires: 1,
            layers: Vec::new(),
        });
    }
    let offsets = (0..n as i64).map(|d| if d % 2 == 1 { d + 1 } else { -d });
    let mut timed = Vec::new();
    for o in offsets {
        for j in 0..m - 1 {
            let t = (m as i64) - 2 - (j as i64) + o;
            if (0..m as i64).contains(&t) {
                timed.push((t as usize, j));
            }
        }
    }
    let depth = if n == 1 { m - 1 } else { m };
    Ok(ComparatorNetwork::from_timed(m, depth, timed))
}

/// Two-block sorter on `2p` wires with `p^2` comparators and depth `2p - 1`:
/// the comparators fill a diamond centred on the middle pair at the middle
/// time step, every other diagonal.
pub fn diamond_network(p: usize) -> ComparatorNetwork {
    if p == 0 {
        return ComparatorNetwork {
            wires: 0,
            layers: Vec::new(),
        };
    }
    let c = (p - 1) as i64;
    let mut timed = Vec::new();
    for t in 0..2 * p - 1 {
        for j in 0..2 * p - 1 {
            let d = (t as i64 - c).abs() + (j as i64 - c).abs();
            if d <= c && (c - d) % 2 == 0 {
                timed.push((t, j));
            }
        }
    }
    ComparatorNetwork::from_timed(2 * p, 2 * p - 1, timed)
}

/// True iff for every input permutation the network leaves labels `0..n` on
/// wires `0..n`. Exhaustive; meant for at most 10 wires.
pub fn sorts_partially(net: &ComparatorNetwork, n: usize) -> bool {
    let m = net.wires;
    let mut perm: Vec<usize> = (0..m).collect();
    loop {
        let mut labels = perm.clone();
        net.apply(&mut labels);
        if !(0..n.min(m)).all(|i| labels[i] == i) {
            return false;
        }
        if !next_permutation(&mut perm) {
            return true;
        }
    }
}

/// Randomized variant of [`sorts_partially`] over `samples` shuffles.
pub fn sorts_partially_sampled(net: &ComparatorNetwork, n: usize, samples: usize, seed: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<usize> = (0..net.wires).collect();
    (0..samples).all(|_| {
        labels.shuffle(&mut rng);
        let mut l = labels.clone();
        net.apply(&mut l);
        (0..n).all(|i| l[i] == i)
    })
}

/// Lexicographic successor; false after the last permutation.
pub fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
        return false;
    };
    let j = (i..v.len()).rev().find(|&j| v[j] > v[i - 1]).expect("pivot has a successor");
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockVariant {
    Universal,
    Diamond,
}

/// One chip of a chip-of-chips design, acting on contiguous global modes
/// `offset..offset + layout.modes`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChipPlacement {
    pub offset: usize,
    pub layout: ChipLayout,
}

/// Modes sorted by blocks of `p`: a block-level odd-even transposition
/// network whose comparators are `2p`-mode sorter chips, followed by one
/// `p`-mode universal chip per block.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockLayout {
    pub modes: usize,
    pub block: usize,
    pub variant: BlockVariant,
    /// Chips in placement order.
    pub chips: Vec<ChipPlacement>,
}

pub fn block_layout(m: usize, p: usize, variant: BlockVariant) -> Result<BlockLayout> {
    if p == 0 || m == 0 || !m.is_multiple_of(p) {
        return Err(Error::InvalidLayout(format!("block size {p} does not divide {m} modes")));
    }
    let k = m / p;
    let sorter = match variant {
        BlockVariant::Universal => full_sorting_network(2 * p),
        BlockVariant::Diamond => diamond_network(p),
    }
    .to_layout(false);
    let universal = full_sorting_network(p).to_layout(false);
    let mut chips = Vec::new();
    if k > 1 {
        for [a, _] in full_sorting_network(k).comparators() {
            chips.push(ChipPlacement {
                offset: a * p,
                layout: sorter.clone(),
            });
        }
    }
    for b in 0..k {
        chips.push(ChipPlacement {
            offset: b * p,
            layout: universal.clone(),
        });
    }
    Ok(BlockLayout {
        modes: m,
        block: p,
        variant,
        chips,
    })
}

impl BlockLayout {
    pub fn mzi_count(&self) -> usize {
        self.chips.iter().map(|c| c.layout.slot_count()).sum()
    }

    /// Depth when every chip occupies its modes for as many time steps as
    /// its layout has layers.
    pub fn depth(&self) -> usize {
        let mut ready = vec![0usize; self.modes];
        for chip in &self.chips {
            let span = chip.offset..chip.offset + chip.layout.modes;
            let start = span.clone().map(|q| ready[q]).max().unwrap_or(0);
            span.for_each(|q| ready[q] = start + chip.layout.depth());
        }
        ready.into_iter().max().unwrap_or(0)
    }

    /// The flattened comparator network on all `m` wires.
    pub fn network(&self) -> ComparatorNetwork {
        let mut layers = Vec::new();
        for chip in &self.chips {
            for layer in &chip.layout.layers {
                layers.push(layer.iter().map(|&[i, j]| [i + chip.offset, j + chip.offset]).collect());
            }
        }
        ComparatorNetwork {
            wires: self.modes,
            layers,
        }
    }

    /// Circuit of idle chip blocks, one per chip.
    pub fn to_circuit(&self) -> Circuit {
        let mut c = Circuit::new(self.modes);
        for chip in &self.chips {
            c.push(Element::Block {
                modes: (chip.offset..chip.offset + chip.layout.modes).collect(),
                circuit: chip.layout.idle_circuit(),
            });
        }
        c
    }
}
