//! Boson-sampling designs built from coupled `k`-mode universal chips, and
//! the `k = 2` variant with long-range MZIs.
//!
//! Both run a greedy elimination on the `m x n` isometry. Every row gets a
//! label, the column of its leftmost nonzero entry (`n` for a zero row), and
//! each round lowers the number of rows sharing a label until the matrix is
//! diagonal. The implemented circuit is the inverse of the elimination.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{invert_permutation, Circuit, Element};
use crate::error::{Error, Result};
use crate::linalg::{random_isometry, ComplexMatrix, Isometry, UnitaryMatrix, ZERO};
use crate::mzi::{wrap_angle, zeroing_angles, MziParams};
use crate::synthesis::synth_clements;

/// Label of every row: leftmost entry above `tol`, or `n` for a zero row.
pub fn row_labels(v: &ComplexMatrix, tol: f64) -> Vec<usize> {
    (0..v.rows())
        .map(|r| v.row(r).iter().position(|z| z.norm() > tol).unwrap_or(v.cols()))
        .collect()
}

fn elimination_tolerance(v: &ComplexMatrix) -> f64 {
    v.zero_tolerance()
}

/// One chip of a stage, acting on the listed modes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChipBlock {
    pub modes: Vec<usize>,
    pub unitary: UnitaryMatrix,
    /// Mesh realizing `unitary`; absent when only the depth was measured.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub circuit: Option<Circuit>,
}

/// A coupling followed by a layer of chips running in parallel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub coupling: Vec<usize>,
    pub blocks: Vec<ChipBlock>,
}

/// Implementation order: input phases on the photon modes, the stages, and
/// a final output coupling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoupledCircuit {
    pub modes: usize,
    pub chip_size: usize,
    pub input_phases: Vec<f64>,
    pub stages: Vec<Stage>,
    pub output_coupling: Vec<usize>,
}

impl CoupledCircuit {
    pub fn stage_count(&self) -> usize {
        self.stages.len()
    }

    /// Couplings traversed by a photon, input and output included.
    pub fn coupling_count(&self) -> usize {
        self.stages.len() + 1
    }

    /// Flat circuit with chips as blocks. Needs the chip meshes.
    pub fn to_circuit(&self) -> Result<Circuit> {
        let mut c = Circuit::new(self.modes);
        for (r, &phi) in self.input_phases.iter().enumerate() {
            c.push(Element::phase(r, phi));
        }
        for stage in &self.stages {
            c.push(Element::Coupling {
                perm: stage.coupling.clone(),
            });
            for b in &stage.blocks {
                let circuit = b.circuit.clone().ok_or_else(|| {
                    Error::InvalidCircuit("chip meshes were not synthesized".into())
                })?;
                c.push(Element::Block {
                    modes: b.modes.clone(),
                    circuit,
                });
            }
        }
        c.push(Element::Coupling {
            perm: self.output_coupling.clone(),
        });
        c.validate()?;
        Ok(c)
    }

    /// `||C (I_n; 0) - V||_F`, evaluating each chip by its unitary.
    pub fn isometry_error(&self, v: &Isometry) -> Result<f64> {
        let mut state = Isometry::embedding(self.modes, v.photons())?.matrix().clone();
        for (r, &phi) in self.input_phases.iter().enumerate() {
            let f = Complex64::from_polar(1.0, phi);
            state.row_mut(r).iter_mut().for_each(|z| *z *= f);
        }
        let permute = |state: &mut ComplexMatrix, perm: &[usize]| {
            let old = state.clone();
            for (i, &j) in perm.iter().enumerate() {
                state.row_mut(j).copy_from_slice(old.row(i));
            }
        };
        for stage in &self.stages {
            permute(&mut state, &stage.coupling);
            for b in &stage.blocks {
                let rows: Vec<Vec<Complex64>> = b.modes.iter().map(|&q| state.row(q).to_vec()).collect();
                for (r, &q) in b.modes.iter().enumerate() {
                    let dst = state.row_mut(q);
                    dst.iter_mut().for_each(|z| *z = ZERO);
                    for (k, src) in rows.iter().enumerate() {
                        let a = b.unitary.matrix()[(r, k)];
                        dst.iter_mut().zip(src).for_each(|(d, s)| *d += a * s);
                    }
                }
            }
        }
        permute(&mut state, &self.output_coupling);
        Ok(state.distance(v.matrix()))
    }
}

/// MZI-depth of a coupled design: every stage costs one universal chip,
/// which has depth `k`.
pub fn stage_depth_mzi(cc: &CoupledCircuit, k: usize) -> usize {
    cc.stage_count() * k
}

/// How the first group of a round is placed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupStart {
    /// First index with two equal sorted labels, clamped to `m - k` so the
    /// first group is full and the pair is always covered.
    PairClampedToModes,
    /// Same pair index clamped to `max(0, n - k)`.
    PairClampedToPhotons,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GreedyOptions {
    pub start: GroupStart,
    /// Synthesize a Clements mesh for every chip.
    pub synthesize_chips: bool,
}

impl Default for GreedyOptions {
    fn default() -> Self {
        Self {
            start: GroupStart::PairClampedToModes,
            synthesize_chips: true,
        }
    }
}

/// Triangularizes `v[rows, cols]` in place with an explicit unitary acting on
/// `rows` (row echelon form: for each column, rotate the first nonzero row
/// into the pivot position and zero the others with Givens rotations).
/// Returns the unitary in the local row order.
fn triangularize(v: &mut ComplexMatrix, rows: &[usize], cols: std::ops::Range<usize>, tol: f64) -> ComplexMatrix {
    let g = rows.len();
    let mut u = ComplexMatrix::identity(g);
    let mut t = 0;
    for c in cols {
        if t == g {
            break;
        }
        for &r in &rows[t..] {
            if v[(r, c)].norm() <= tol {
                v[(r, c)] = ZERO;
            }
        }
        let Some(s) = (t..g).find(|&s| v[(rows[s], c)] != ZERO) else {
            continue;
        };
        if s != t {
            v.swap_rows(rows[s], rows[t]);
            u.swap_rows(s, t);
        }
        for s in t + 1..g {
            let b = v[(rows[s], c)];
            if b == ZERO {
                continue;
            }
            let a = v[(rows[t], c)];
            let rho = (a.norm_sqr() + b.norm_sqr()).sqrt();
            let gm = [[a.conj() / rho, b.conj() / rho], [-b / rho, a / rho]];
            v.rotate_rows(rows[t], rows[s], &gm);
            u.rotate_rows(t, s, &gm);
            v[(rows[s], c)] = ZERO;
        }
        t += 1;
    }
    u
}

fn permute_rows(v: &mut ComplexMatrix, order: &[usize]) {
    let old = v.clone();
    for (r, &src) in order.iter().enumerate() {
        v.row_mut(r).copy_from_slice(old.row(src));
    }
}

fn is_finished(labels: &[usize], n: usize) -> bool {
    labels.iter().enumerate().all(|(i, &l)| l == i.min(n))
}

/// Greedy elimination over `k`-mode chips with free couplings between them.
pub fn greedy_coupled(v: &Isometry, k: usize) -> Result<CoupledCircuit> {
    greedy_coupled_with(v, k, GreedyOptions::default())
}

/// Number of chip stages only; skips chip synthesis.
pub fn coupled_depth(v: &Isometry, k: usize) -> Result<usize> {
    let opts = GreedyOptions {
        synthesize_chips: false,
        ..GreedyOptions::default()
    };
    Ok(greedy_coupled_with(v, k, opts)?.stage_count())
}

pub fn greedy_coupled_with(v: &Isometry, k: usize, opts: GreedyOptions) -> Result<CoupledCircuit> {
    let (m, n) = (v.modes(), v.photons());
    if k < 2 || k > m {
        return Err(Error::Dimension(format!("chip size {k} outside 2..={m}")));
    }
    let mut w = v.matrix().clone();
    let tol = elimination_tolerance(&w);
    // elimination record: sorting permutations and chip unitaries, in order
    let mut sorts: Vec<Vec<usize>> = Vec::new();
    let mut rounds: Vec<Vec<(Vec<usize>, ComplexMatrix)>> = Vec::new();
    let mut label_sum = 0usize;
    let cap = m * n + 1;

    loop {
        let labels = row_labels(&w, tol);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&r| labels[r]);
        let sorted: Vec<usize> = order.iter().map(|&r| labels[r]).collect();
        permute_rows(&mut w, &order);
        // as a coupling: old row order[r] moves to r
        sorts.push(invert_permutation(&order));

        let sum: usize = sorted.iter().sum();
        if sum < label_sum {
            return Err(Error::Numeric(format!("elimination lost zeros (label sum {label_sum} -> {sum})")));
        }
        label_sum = sum;
        if is_finished(&sorted, n) {
            break;
        }
        if rounds.len() >= cap {
            return Err(Error::Numeric(format!(
                "greedy elimination did not converge within {cap} rounds; labels {sorted:?}"
            )));
        }

        let pair = (0..m - 1).find(|&i| sorted[i] == sorted[i + 1] && sorted[i] < n).unwrap_or(0);
        let start = match opts.start {
            GroupStart::PairClampedToModes => pair.min(m - k),
            GroupStart::PairClampedToPhotons => pair.min(n.saturating_sub(k)),
        };
        let mut blocks = Vec::new();
        let mut a = start;
        while a < m {
            let rows: Vec<usize> = (a..(a + k).min(m)).collect();
            a += k;
            let q = sorted[rows[0]];
            if q >= n || rows.len() < 2 {
                continue;
            }
            let u = triangularize(&mut w, &rows, q..(q + k).min(n), tol);
            if u != ComplexMatrix::identity(rows.len()) {
                blocks.push((rows, u));
            }
        }
        if blocks.is_empty() {
            return Err(Error::Numeric(format!("greedy round made no progress; labels {sorted:?}")));
        }
        rounds.push(blocks);
    }

    // w = S_{d+1} B_d S_d ... B_1 S_1 v = (D; 0), so
    // v = S_1^-1 B_1^dag ... B_d^dag S_{d+1}^-1 (D; 0)
    let input_phases: Vec<f64> = (0..n).map(|r| wrap_angle(w[(r, r)].arg())).collect();
    let d = rounds.len();
    let mut stages = Vec::with_capacity(d);
    for s in (0..d).rev() {
        let coupling = invert_permutation(&sorts[s + 1]);
        let blocks = rounds[s]
            .iter()
            .map(|(rows, u)| {
                let unitary = UnitaryMatrix::new(u.adjoint())?;
                let circuit = if opts.synthesize_chips {
                    Some(synth_clements(&unitary)?)
                } else {
                    None
                };
                Ok(ChipBlock {
                    modes: rows.clone(),
                    unitary,
                    circuit,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        stages.push(Stage { coupling, blocks });
    }
    Ok(CoupledCircuit {
        modes: m,
        chip_size: k,
        input_phases,
        stages,
        output_coupling: invert_permutation(&sorts[0]),
    })
}

/// Long-range MZI design with its layer structure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LongRangeCircuit {
    pub circuit: Circuit,
    /// MZI pairs of every layer in implementation order.
    pub layers: Vec<Vec<[usize; 2]>>,
}

impl LongRangeCircuit {
    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }
}

/// `k = 2` elimination with MZIs between arbitrary modes and rows kept in
/// place. In every layer the rows sharing a label are paired in index order
/// and each pair's MZI zeroes the lower row's leading entry.
pub fn greedy_longrange(v: &Isometry) -> Result<LongRangeCircuit> {
    let (m, n) = (v.modes(), v.photons());
    let mut w = v.matrix().clone();
    let tol = elimination_tolerance(&w);
    let mut layers: Vec<Vec<([usize; 2], MziParams)>> = Vec::new();
    let cap = m * n + 1;

    loop {
        let labels = row_labels(&w, tol);
        let mut by_label: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (r, &l) in labels.iter().enumerate() {
            if l < n {
                by_label[l].push(r);
            }
        }
        if by_label.iter().all(|rows| rows.len() == 1) {
            break;
        }
        if layers.len() >= cap {
            return Err(Error::Numeric(format!("long-range elimination did not converge; labels {labels:?}")));
        }
        let mut layer = Vec::new();
        for (l, rows) in by_label.iter().enumerate() {
            for pair in rows.chunks_exact(2) {
                let (top, bottom) = (pair[0], pair[1]);
                let params = zeroing_angles(w[(top, l)], w[(bottom, l)])?;
                w.rotate_rows(top, bottom, &params.transfer());
                w[(bottom, l)] = ZERO;
                layer.push(([top, bottom], params));
            }
        }
        if layer.is_empty() {
            return Err(Error::Numeric(format!("long-range layer made no progress; labels {labels:?}")));
        }
        layers.push(layer);
    }

    // rows holding labels 0..n; normally row l holds label l
    let labels = row_labels(&w, tol);
    let mut home = vec![0; n];
    for (r, &l) in labels.iter().enumerate() {
        if l < n {
            home[l] = r;
        }
    }
    let mut raw = Circuit::new(m);
    if home.iter().enumerate().any(|(l, &r)| l != r) {
        let mut perm: Vec<usize> = vec![usize::MAX; m];
        for (l, &r) in home.iter().enumerate() {
            perm[l] = r;
        }
        let mut free = (0..m).filter(|r| !home.contains(r));
        for slot in perm.iter_mut().filter(|s| **s == usize::MAX) {
            *slot = free.next().expect("rows outnumber labels");
        }
        raw.push(Element::Coupling { perm });
    }
    for (l, &r) in home.iter().enumerate() {
        raw.push(Element::phase(r, wrap_angle(w[(r, l)].arg())));
    }
    for layer in layers.iter().rev() {
        for &([i, j], p) in layer {
            raw.push(Element::mzi(i, j, p, true).adjoint());
        }
    }
    let circuit = raw.propagate_phases()?;
    Ok(LongRangeCircuit {
        circuit,
        layers: layers.iter().rev().map(|l| l.iter().map(|&(pair, _)| pair).collect()).collect(),
    })
}

/// Random isometry whose elimination follows the generic label dynamics:
/// every entry is bounded away from zero and the leading principal minors of
/// the top `n x n` block are nonsingular. Seeds are tried from `seed` upward;
/// the accepted seed is returned alongside.
pub fn dense_generic_isometry(m: usize, n: usize, seed: u64) -> Result<(Isometry, u64)> {
    for s in seed..seed.saturating_add(1000) {
        let v = random_isometry(m, n, s)?;
        if is_dense_generic(v.matrix()) {
            return Ok((v, s));
        }
    }
    Err(Error::Numeric(format!("no dense generic {m}x{n} isometry near seed {seed}")))
}

fn is_dense_generic(v: &ComplexMatrix) -> bool {
    let (m, n) = (v.rows(), v.cols());
    let floor = 1e-6 / (m as f64).sqrt();
    if v.as_slice().iter().any(|z| z.norm() < floor) {
        return false;
    }
    // leading principal minors through Gaussian elimination without pivoting
    let mut a: Vec<Vec<Complex64>> = (0..n).map(|r| v.row(r).to_vec()).collect();
    for c in 0..n {
        let pivot = a[c][c];
        if pivot.norm() < floor {
            return false;
        }
        for r in c + 1..n {
            let f = a[r][c] / pivot;
            for cc in c..n {
                let x = a[c][cc];
                a[r][cc] -= f * x;
            }
        }
    }
    true
}

/// Deterministic isometries for Monte-Carlo sweeps.
pub fn isometry_samples(m: usize, n: usize, count: usize, seed: u64) -> Result<Vec<Isometry>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_isometry(m, n, rng.random())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::tk_simulate;
    use crate::synthesis::isometry_error;

    #[test]
    fn dense_ten_by_four_depth() {
        let (v, _) = dense_generic_isometry(10, 4, 0).unwrap();
        let cc = greedy_coupled(&v, 3).unwrap();
        assert_eq!(cc.stage_count(), 6);
        assert_eq!(stage_depth_mzi(&cc, 3), 18);
        assert!(cc.isometry_error(&v).unwrap() < 1e-8);
    }

    #[test]
    fn embedding_needs_no_stages() {
        let e = Isometry::embedding(7, 3).unwrap();
        let cc = greedy_coupled(&e, 3).unwrap();
        assert_eq!(cc.stage_count(), 0);
        assert_eq!(stage_depth_mzi(&cc, 3), 0);
        let lr = greedy_longrange(&e).unwrap();
        assert_eq!(lr.layer_count(), 0);
        assert_eq!(lr.circuit.mzi_count(), 0);
    }

    #[test]
    fn coupled_reconstruction() {
        let v = random_isometry(12, 3, 5).unwrap();
        let cc = greedy_coupled(&v, 4).unwrap();
        assert!(cc.isometry_error(&v).unwrap() < 1e-8);
        let c = cc.to_circuit().unwrap();
        assert!(isometry_error(&c, &v).unwrap() < 1e-8);
        assert!(c.mzi_depth() <= stage_depth_mzi(&cc, 4));
    }

    #[test]
    fn single_chip_is_one_stage() {
        let (v, _) = dense_generic_isometry(9, 3, 0).unwrap();
        let cc = greedy_coupled(&v, 9).unwrap();
        assert_eq!(cc.stage_count(), 1);
        assert_eq!(stage_depth_mzi(&cc, 9), 9);
    }

    #[test]
    fn longrange_small() {
        let v = random_isometry(2, 1, 0).unwrap();
        let lr = greedy_longrange(&v).unwrap();
        assert_eq!(lr.circuit.mzi_count(), 1);
        assert!(isometry_error(&lr.circuit, &v).unwrap() < 1e-10);

        let (v, _) = dense_generic_isometry(10, 4, 0).unwrap();
        let lr = greedy_longrange(&v).unwrap();
        assert_eq!(lr.layer_count(), tk_simulate(10, 4).0);
        assert_eq!(lr.circuit.mzi_depth(), lr.layer_count());
        assert!(isometry_error(&lr.circuit, &v).unwrap() < 1e-8);
    }

    #[test]
    fn chip_size_is_checked() {
        let v = random_isometry(4, 2, 0).unwrap();
        assert!(greedy_coupled(&v, 1).is_err());
        assert!(greedy_coupled(&v, 5).is_err());
    }

    #[test]
    fn coupled_json_shape() {
        let v = random_isometry(4, 2, 1).unwrap();
        let cc = greedy_coupled(&v, 2).unwrap();
        let text = serde_json::to_string(&cc).unwrap();
        assert!(text.starts_with(r#"{"modes":4,"#));
        assert!(text.contains(r#""stages":[{"coupling":["#));
        assert!(text.contains(r#""blocks":[{"modes":["#));
        let back: CoupledCircuit = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cc);
    }

    #[test]
    fn termination_on_random_instances() {
        for (m, n) in [(20, 5), (40, 10), (33, 7)] {
            for k in [2, 3, 5] {
                for seed in 0..3 {
                    let v = random_isometry(m, n, seed).unwrap();
                    let cc = greedy_coupled_with(
                        &v,
                        k,
                        GreedyOptions {
                            synthesize_chips: false,
                            ..Default::default()
                        },
                    )
                    .unwrap();
                    assert!(cc.isometry_error(&v).unwrap() < 1e-8, "m={m} n={n} k={k}");
                }
            }
        }
    }
}
