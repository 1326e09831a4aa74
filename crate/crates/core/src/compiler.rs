//! Angle assignment for a fixed chip layout.
//!
//! The target is reduced to a diagonal by walking the layout backwards and
//! exchanging the Bruhat labels of every slot whose pair is out of order; the
//! exchanged MZIs, inverted and with their phases pushed to the output, are
//! the forward angles. The layout can implement the target iff this sorts
//! the labels.

use std::collections::HashSet;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bruhat::{bruhat_decompose, BruhatState, Permutation};
use crate::circuit::{ChipLayout, Circuit, Element};
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, UnitaryMatrix};
use crate::mzi::{wrap_angle, MziParams};
use crate::par::Exec;

/// Reconstruction tolerance (Frobenius) checked before a result is returned.
pub const COMPILE_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotAngles {
    pub layer: usize,
    pub modes: [usize; 2],
    pub theta: f64,
    pub phi: f64,
    pub active: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleAssignment {
    /// One entry per layout slot, in layout order.
    pub slots: Vec<SlotAngles>,
    /// Present iff the layout ends with a phase layer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal_phases: Option<Vec<f64>>,
    /// For layouts without a terminal phase layer: the slots realize
    /// `diag(exp(i * output_phases)) * u` instead of `u`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_phases: Option<Vec<f64>>,
    /// One past the last layer holding an active slot.
    pub used_depth: usize,
}

/// Why a layout cannot implement a target.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Infeasible {
    /// Labels left after the backward sorting pass.
    pub residual_permutation: Permutation,
    /// Lowest `i` with `residual_permutation[i] > residual_permutation[i + 1]`.
    pub first_inversion: usize,
    /// Forward index of the earliest layer the backward pass swapped in, the
    /// point where it ran out of slots; `None` if no slot was usable at all.
    pub blocking_layer: Option<usize>,
}

impl std::fmt::Display for Infeasible {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "layout cannot implement the target: residual permutation {:?}, labels {} and {} out of order",
            self.residual_permutation,
            self.first_inversion,
            self.first_inversion + 1
        )?;
        if let Some(l) = self.blocking_layer {
            write!(f, ", sorting stalls before layer {l}")?;
        }
        Ok(())
    }
}

pub type CompileResult = Result<Result<AngleAssignment, Infeasible>>;

impl AngleAssignment {
    /// The layout filled with these angles (terminal phases included when
    /// present).
    pub fn to_circuit(&self, layout: &ChipLayout) -> Result<Circuit> {
        let angles: Vec<(MziParams, bool)> = self
            .slots
            .iter()
            .map(|s| (MziParams::new(s.theta, s.phi), s.active))
            .collect();
        layout.to_circuit(&angles, self.terminal_phases.as_deref())
    }

    pub fn active_count(&self) -> usize {
        self.slots.iter().filter(|s| s.active).count()
    }
}

fn check_dims(u: &UnitaryMatrix, layout: &ChipLayout) -> Result<()> {
    if u.modes() != layout.modes {
        return Err(Error::Dimension(format!(
            "{}-mode target on a {}-mode layout",
            u.modes(),
            layout.modes
        )));
    }
    Ok(())
}

fn first_inversion(p: &[usize]) -> Option<usize> {
    (0..p.len().saturating_sub(1)).find(|&i| p[i] > p[i + 1])
}

/// Backward conditional-swap pass on labels only. Returns the swapped slot
/// indices (layout order) and the final labels.
fn sort_labels(layout: &ChipLayout, p: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut labels = p.to_vec();
    let mut swaps = Vec::new();
    let mut idx = layout.slot_count();
    for layer in layout.layers.iter().rev() {
        idx -= layer.len();
        for (k, &[i, j]) in layer.iter().enumerate() {
            if labels[i] > labels[j] {
                labels.swap(i, j);
                swaps.push(idx + k);
            }
        }
    }
    (swaps, labels)
}

fn infeasible(layout: &ChipLayout, labels: Vec<usize>, swaps: &[usize]) -> Infeasible {
    let layer_of: Vec<usize> = layout.slots().map(|(l, _)| l).collect();
    Infeasible {
        first_inversion: first_inversion(&labels).expect("unsorted labels have an inversion"),
        residual_permutation: labels,
        blocking_layer: swaps.iter().map(|&s| layer_of[s]).min(),
    }
}

/// Compiles `u` onto `layout`.
pub fn compile(u: &UnitaryMatrix, layout: &ChipLayout) -> CompileResult {
    check_dims(u, layout)?;
    let state = bruhat_decompose(u)?;
    compile_from_state(u, layout, state)
}

fn compile_from_state(u: &UnitaryMatrix, layout: &ChipLayout, mut state: BruhatState) -> CompileResult {
    let m = layout.modes;
    let (swaps, labels) = sort_labels(layout, &state.p);
    if first_inversion(&labels).is_some() {
        return Ok(Err(infeasible(layout, labels, &swaps)));
    }

    let slots: Vec<(usize, [usize; 2])> = layout.slots().collect();
    let mut emitted: Vec<Option<MziParams>> = vec![None; slots.len()];
    let mut residual = u.matrix().clone();
    for &s in &swaps {
        let [i, j] = slots[s].1;
        debug_assert!(state.p[i] > state.p[j]);
        let params = state.swap_rows_mzi_mut(i);
        residual.rotate_rows(i, j, &params.transfer());
        emitted[s] = Some(params);
    }
    debug_assert!(state.is_sorted());

    let off_diagonal: f64 = (0..m)
        .flat_map(|r| (0..m).filter(move |&c| c != r).map(move |c| (r, c)))
        .map(|(r, c)| residual[(r, c)].norm_sqr())
        .sum::<f64>()
        .sqrt();
    if off_diagonal > COMPILE_TOLERANCE {
        return Err(Error::Numeric(format!(
            "residual after sorting is not diagonal (off-diagonal norm {off_diagonal:.3e})"
        )));
    }

    // u = C^dag D, with C the emitted MZIs applied last-slot-first
    let mut raw = Circuit::new(m);
    for r in 0..m {
        raw.push(Element::phase(r, wrap_angle(residual[(r, r)].arg())));
    }
    for (&(_, [i, j]), e) in slots.iter().zip(&emitted) {
        raw.push(match e {
            Some(p) => Element::mzi(i, j, *p, true).adjoint(),
            None => Element::idle_mzi(i, j),
        });
    }
    let forward = raw.propagate_phases()?;
    let (mzis, phases) = forward.elements.split_at(slots.len());
    let terminal: Vec<f64> = phases
        .iter()
        .map(|e| match e {
            Element::Phase { phi, .. } => *phi,
            _ => unreachable!("propagation ends with phases"),
        })
        .collect();

    let slot_angles: Vec<SlotAngles> = slots
        .iter()
        .zip(mzis)
        .map(|(&(layer, modes), e)| match e {
            Element::Mzi {
                theta, phi, active, ..
            } => SlotAngles {
                layer,
                modes,
                theta: *theta,
                phi: *phi,
                active: *active,
            },
            _ => unreachable!("propagation keeps MZIs in place"),
        })
        .collect();
    let used_depth = slot_angles
        .iter()
        .filter(|s| s.active)
        .map(|s| s.layer + 1)
        .max()
        .unwrap_or(0);

    let assignment = if layout.terminal_phase_layer {
        AngleAssignment {
            slots: slot_angles,
            terminal_phases: Some(terminal),
            output_phases: None,
            used_depth,
        }
    } else {
        AngleAssignment {
            slots: slot_angles,
            terminal_phases: None,
            output_phases: Some(terminal.iter().map(|t| wrap_angle(-t)).collect()),
            used_depth,
        }
    };
    let err = reconstruction_error(u, layout, &assignment)?;
    if err > COMPILE_TOLERANCE {
        return Err(Error::Numeric(format!("reconstruction error {err:.3e} exceeds tolerance")));
    }
    Ok(Ok(assignment))
}

/// `||layout(angles) - u||_F`, or against `diag(output phases) * u` for
/// layouts without a terminal phase layer.
pub fn reconstruction_error(u: &UnitaryMatrix, layout: &ChipLayout, a: &AngleAssignment) -> Result<f64> {
    let got = a.to_circuit(layout)?.evaluate()?;
    let target = match &a.output_phases {
        Some(phases) => {
            let d: Vec<Complex64> = phases.iter().map(|&x| Complex64::from_polar(1.0, x)).collect();
            ComplexMatrix::diagonal(&d).matmul(u.matrix())
        }
        None => u.matrix().clone(),
    };
    Ok(got.matrix().distance(&target))
}

/// Compiles `u` into the fewest leading layers of `layout` and leaves the
/// remaining layers idle. Returns the assignment on the full layout and the
/// number of layers used.
pub fn shallowest_compile(u: &UnitaryMatrix, layout: &ChipLayout, exec: Exec) -> Result<Result<(AngleAssignment, usize), Infeasible>> {
    check_dims(u, layout)?;
    let state = bruhat_decompose(u)?;
    let depth = exec.find_first(0..layout.depth() + 1, |l| {
        let (_, labels) = sort_labels(&layout.truncated(l), &state.p);
        first_inversion(&labels).is_none()
    });
    let Some(depth) = depth else {
        let (swaps, labels) = sort_labels(layout, &state.p);
        return Ok(Err(infeasible(layout, labels, &swaps)));
    };
    let mut a = match compile_from_state(u, &layout.truncated(depth), state)? {
        Ok(a) => a,
        Err(inf) => return Ok(Err(inf)),
    };
    for (layer, modes) in layout.slots().filter(|&(l, _)| l >= depth) {
        a.slots.push(SlotAngles {
            layer,
            modes,
            theta: MziParams::IDENTITY.theta,
            phi: MziParams::IDENTITY.phi,
            active: false,
        });
    }
    Ok(Ok((a, depth)))
}

/// Whether some swap/no-swap setting of the layout's slots, applied forward
/// to the identity arrangement, yields `sigma`. Exact set propagation; the
/// set can grow like `2^slots`.
pub fn reachable_check(layout: &ChipLayout, sigma: &[usize]) -> bool {
    let mut set: HashSet<Vec<usize>> = HashSet::from([(0..layout.modes).collect()]);
    for (_, [i, j]) in layout.slots() {
        let swapped: Vec<Vec<usize>> = set
            .iter()
            .map(|p| {
                let mut q = p.clone();
                q.swap(i, j);
                q
            })
            .collect();
        set.extend(swapped);
    }
    set.contains(sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bruhat::bruhat_decompose;
    use crate::linalg::haar_random_unitary;
    use crate::networks::full_sorting_network;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn brick(m: usize, depth: usize, terminal: bool) -> ChipLayout {
        let layers = (0..depth)
            .map(|t| (t % 2..m.saturating_sub(1)).step_by(2).map(|j| [j, j + 1]).collect())
            .collect();
        ChipLayout::new(m, layers, terminal).unwrap()
    }

    fn random_angles(rng: &mut ChaCha8Rng, layout: &ChipLayout, depth: usize) -> Vec<(MziParams, bool)> {
        layout
            .slots()
            .map(|(l, _)| {
                if l < depth {
                    (MziParams::new(rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI)), true)
                } else {
                    (MziParams::IDENTITY, false)
                }
            })
            .collect()
    }

    #[test]
    fn identity_uses_no_layers() {
        let layout = brick(5, 5, true);
        let a = compile(&UnitaryMatrix::identity(5), &layout).unwrap().unwrap();
        assert_eq!(a.used_depth, 0);
        assert!(a.slots.iter().all(|s| !s.active));
        assert_eq!(a.slots.len(), layout.slot_count());
    }

    #[test]
    fn haar_on_brick_wall() {
        for m in 2..=8 {
            let layout = full_sorting_network(m).to_layout(true);
            let u = haar_random_unitary(m, m as u64).unwrap();
            let a = compile(&u, &layout).unwrap().unwrap();
            assert!(reconstruction_error(&u, &layout, &a).unwrap() < 1e-8);
        }
    }

    #[test]
    fn reversal_needs_more_than_one_layer() {
        let m = 4;
        let rev: Vec<usize> = (0..m).rev().collect();
        let u = UnitaryMatrix::new(ComplexMatrix::permutation(&rev)).unwrap();
        let inf = compile(&u, &brick(m, 1, true)).unwrap().unwrap_err();
        assert_eq!(inf.residual_permutation, vec![2, 3, 0, 1]);
        assert_eq!((inf.first_inversion, inf.blocking_layer), (1, Some(0)));
        assert!(inf.to_string().contains("residual permutation"));
        assert!(compile(&u, &brick(m, m, true)).unwrap().is_ok());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        assert!(matches!(
            compile(&UnitaryMatrix::identity(3), &brick(4, 2, true)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn missing_terminal_layer_reports_output_phases() {
        let layout = brick(4, 4, false);
        let u = haar_random_unitary(4, 9).unwrap();
        let a = compile(&u, &layout).unwrap().unwrap();
        assert!(a.terminal_phases.is_none());
        assert_eq!(a.output_phases.as_ref().unwrap().len(), 4);
        assert!(reconstruction_error(&u, &layout, &a).unwrap() < 1e-8);
    }

    #[test]
    fn single_mzi_depth() {
        // an MZI on (3, 4) in a brick wall starting with (0,1),(2,3),...
        let m = 6;
        let layout = brick(m, m, true);
        let mut c = Circuit::new(m);
        c.push(Element::mzi(3, 4, MziParams::new(1.0, 0.5), true));
        let u = c.evaluate().unwrap();
        let (a, d) = shallowest_compile(&u, &layout, Exec::Sequential).unwrap().unwrap();
        assert_eq!(d, 2);
        assert_eq!(a.slots.len(), layout.slot_count());
        assert!(reconstruction_error(&u, &layout, &a).unwrap() < 1e-8);

        let mut c = Circuit::new(m);
        c.push(Element::mzi(2, 3, MziParams::new(1.0, 0.5), true));
        let u = c.evaluate().unwrap();
        let (_, d) = shallowest_compile(&u, &layout, Exec::Parallel).unwrap().unwrap();
        assert_eq!(d, 1);
    }

    #[test]
    fn reachable_examples() {
        let one = ChipLayout::new(3, vec![vec![[0, 1]]], false).unwrap();
        assert!(reachable_check(&one, &[0, 1, 2]));
        assert!(reachable_check(&one, &[1, 0, 2]));
        assert!(!reachable_check(&one, &[0, 2, 1]));
        let full = brick(4, 4, false);
        let mut perm = vec![0, 1, 2, 3];
        loop {
            assert!(reachable_check(&full, &perm));
            if !crate::networks::next_permutation(&mut perm) {
                break;
            }
        }
    }

    #[test]
    fn witness_depth_bounds_shallowest() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let m = rng.random_range(2..=7);
            let layout = brick(m, m, true);
            let l = rng.random_range(0..=m);
            let angles = random_angles(&mut rng, &layout, l);
            let u = layout.to_circuit(&angles, None).unwrap().evaluate().unwrap();
            let (a, d) = shallowest_compile(&u, &layout, Exec::default()).unwrap().unwrap();
            assert!(d <= l);
            assert!(a.used_depth <= d);
            assert!(reconstruction_error(&u, &layout, &a).unwrap() < 1e-8);
        }
    }

    #[test]
    fn within_layer_order_is_irrelevant() {
        // reversed pair order inside each layer gives the same sorting
        let u = haar_random_unitary(6, 1).unwrap();
        let layout = brick(6, 6, true);
        let p = bruhat_decompose(&u).unwrap().p;
        let (_, a) = sort_labels(&layout, &p);
        let mut labels = p.clone();
        for layer in layout.layers.iter().rev() {
            for &[i, j] in layer.iter().rev() {
                if labels[i] > labels[j] {
                    labels.swap(i, j);
                }
            }
        }
        assert_eq!(a, labels);
    }

    #[test]
    fn assignment_json_shape() {
        let layout = brick(2, 1, true);
        let a = compile(&UnitaryMatrix::identity(2), &layout).unwrap().unwrap();
        let text = serde_json::to_string(&a).unwrap();
        assert!(text.starts_with(r#"{"slots":[{"layer":0,"modes":[0,1],"theta":"#));
        assert!(text.contains(r#""terminal_phases":[0.0,0.0],"used_depth":0"#));
        let back: AngleAssignment = serde_json::from_str(&text).unwrap();
        assert_eq!(back, a);
    }
}
