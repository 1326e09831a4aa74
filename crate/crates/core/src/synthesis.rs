//! End-to-end synthesis of unitaries and isometries into MZI circuits.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bruhat::bruhat_decompose;
use crate::circuit::{ChipLayout, Circuit, Element};
use crate::compiler::{compile, COMPILE_TOLERANCE};
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, Isometry, UnitaryMatrix};
use crate::mzi::{wrap_angle, MziParams};
use crate::networks::{full_sorting_network, partial_sorting_network, reck_network};
use crate::par::Exec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Clements,
    Reck,
}

impl Scheme {
    /// Layout the scheme compiles against, terminal phase layer included.
    pub fn layout(self, m: usize) -> ChipLayout {
        match self {
            Scheme::Clements => full_sorting_network(m).to_layout(true),
            // mirrored so the backward compile pass runs the network forward
            Scheme::Reck => reck_network(m).reversed().to_layout(true),
        }
    }

    pub fn synthesize(self, u: &UnitaryMatrix) -> Result<Circuit> {
        let layout = self.layout(u.modes());
        match compile(u, &layout)? {
            Ok(a) => a.to_circuit(&layout),
            Err(inf) => Err(Error::Numeric(format!("sorting layout failed to sort: {inf}"))),
        }
    }
}

/// Rectangular (brick-wall) mesh: `m(m-1)/2` MZIs, depth at most `m`.
pub fn synth_clements(u: &UnitaryMatrix) -> Result<Circuit> {
    Scheme::Clements.synthesize(u)
}

/// Triangular mesh: `m(m-1)/2` MZIs, depth at most `2m - 3`.
pub fn synth_reck(u: &UnitaryMatrix) -> Result<Circuit> {
    Scheme::Reck.synthesize(u)
}

/// Synthesizes many targets; results keep the input order.
pub fn synth_batch(targets: &[UnitaryMatrix], scheme: Scheme, exec: Exec) -> Vec<Result<Circuit>> {
    exec.map(targets, |u| scheme.synthesize(u))
}

/// `||C (I_n; 0) - V||_F`.
pub fn isometry_error(c: &Circuit, v: &Isometry) -> Result<f64> {
    let out = c.apply_to(Isometry::embedding(v.modes(), v.photons())?.matrix())?;
    Ok(out.distance(v.matrix()))
}

/// Circuit `C` on the partial sorting layout with `C (I_n; 0) = V`, using
/// `mn - n(n+1)/2` MZIs and depth at most `m`.
///
/// The isometry is completed to a unitary for the Bruhat bookkeeping only.
/// The backward pass stops caring once labels `0..n` sit on wires `0..n`; at
/// that point the first `n` columns of the residual are `(D; 0)` with `D`
/// diagonal.
pub fn synth_boson_sampling(v: &Isometry) -> Result<Circuit> {
    let (m, n) = (v.modes(), v.photons());
    let layout = partial_sorting_network(m, n)?.reversed().to_layout(true);
    let u = v.complete();
    let mut state = bruhat_decompose(&u)?;
    let mut residual = v.matrix().clone();

    let slots: Vec<(usize, [usize; 2])> = layout.slots().collect();
    let mut emitted: Vec<Option<MziParams>> = vec![None; slots.len()];
    let mut idx = slots.len();
    for layer in layout.layers.iter().rev() {
        idx -= layer.len();
        for (k, &[i, j]) in layer.iter().enumerate() {
            // exchanges among labels >= n do not move the first n labels
            if state.p[i] > state.p[j] && state.p[j] < n {
                let params = state.swap_rows_mzi_mut(i);
                residual.rotate_rows(i, j, &params.transfer());
                emitted[idx + k] = Some(params);
            }
        }
    }
    if (0..n).any(|i| state.p[i] != i) {
        return Err(Error::Numeric(format!(
            "partial sorting left labels {:?} on the first {n} wires",
            &state.p[..n]
        )));
    }

    let mut stray = 0.0;
    for r in 0..m {
        for c in 0..n {
            if r != c {
                stray += residual[(r, c)].norm_sqr();
            }
        }
    }
    if stray.sqrt() > COMPILE_TOLERANCE {
        return Err(Error::Numeric(format!(
            "residual columns are not in block form (off-diagonal norm {:.3e})",
            stray.sqrt()
        )));
    }

    let mut raw = Circuit::new(m);
    for r in 0..n {
        raw.push(Element::phase(r, wrap_angle(residual[(r, r)].arg())));
    }
    for (&(_, [i, j]), e) in slots.iter().zip(&emitted) {
        raw.push(match e {
            Some(p) => Element::mzi(i, j, *p, true).adjoint(),
            None => Element::idle_mzi(i, j),
        });
    }
    let c = raw.propagate_phases()?;
    let err = isometry_error(&c, v)?;
    if err > COMPILE_TOLERANCE {
        return Err(Error::Numeric(format!("column reconstruction error {err:.3e}")));
    }
    Ok(c)
}

/// Real parameters of an `m x n` isometry up to input phases: `2nm - n(n+1)`.
pub fn parameter_count(m: usize, n: usize) -> usize {
    2 * n * m - n * (n + 1)
}

/// Active MZIs a rectangular mesh needs for an `n`-photon experiment when
/// the unused light cone is pruned, roughly `(m^2 - n^2 + 2mn) / 4`.
pub fn clements_partial_estimate(m: usize, n: usize) -> f64 {
    let (m, n) = (m as f64, n as f64);
    (m * m - n * n + 2.0 * m * n) / 4.0
}

/// Diagonal matrix with unit-modulus entries `exp(i phases)`.
pub fn phase_matrix(phases: &[f64]) -> ComplexMatrix {
    let d: Vec<Complex64> = phases.iter().map(|&x| Complex64::from_polar(1.0, x)).collect();
    ComplexMatrix::diagonal(&d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{haar_random_unitary, random_isometry};

    #[test]
    fn clements_small() {
        let u = haar_random_unitary(5, 0).unwrap();
        let c = synth_clements(&u).unwrap();
        assert_eq!(c.mzi_count(), 10);
        assert!(c.mzi_depth() <= 5);
        assert!(c.evaluate().unwrap().matrix().distance(u.matrix()) < 1e-8);
    }

    #[test]
    fn identity_and_diagonal_targets() {
        let c = synth_clements(&UnitaryMatrix::identity(4)).unwrap();
        assert_eq!(c.active_mzi_count(), 0);
        let d = UnitaryMatrix::new(phase_matrix(&[0.1, 0.2, 0.3, 0.4])).unwrap();
        let c = synth_clements(&d).unwrap();
        assert_eq!(c.active_mzi_count(), 0);
        assert!(c.evaluate().unwrap().matrix().distance(d.matrix()) < 1e-12);
        assert_eq!(synth_reck(&UnitaryMatrix::identity(4)).unwrap().active_mzi_count(), 0);
    }

    #[test]
    fn reck_small() {
        let u = haar_random_unitary(4, 1).unwrap();
        let c = synth_reck(&u).unwrap();
        assert_eq!(c.mzi_count(), 6);
        assert!(c.mzi_depth() <= 5);
        assert!(c.evaluate().unwrap().matrix().distance(u.matrix()) < 1e-8);
    }

    #[test]
    fn boson_sampling_small() {
        let v = random_isometry(10, 4, 2).unwrap();
        let c = synth_boson_sampling(&v).unwrap();
        assert_eq!(c.mzi_count(), 30);
        assert!(c.mzi_depth() <= 10);
        assert!(isometry_error(&c, &v).unwrap() < 1e-8);

        let e = Isometry::embedding(6, 3).unwrap();
        let c = synth_boson_sampling(&e).unwrap();
        assert_eq!(c.active_mzi_count(), 0);

        let u = haar_random_unitary(5, 3).unwrap();
        let c = synth_boson_sampling(&Isometry::from(u.clone())).unwrap();
        assert_eq!(c.mzi_count(), synth_clements(&u).unwrap().mzi_count());
    }

    #[test]
    fn counting_formulas() {
        assert_eq!(parameter_count(10, 4), 60);
        assert_eq!(parameter_count(2, 1), 2);
        for m in 1..=12 {
            assert_eq!(parameter_count(m, m), m * (m - 1));
        }
        assert_eq!(clements_partial_estimate(10, 2), 34.0);
        assert_eq!(parameter_count(10, 2) / 2, 17);
    }

    #[test]
    fn batch_keeps_order() {
        let us: Vec<UnitaryMatrix> = (0..6).map(|s| haar_random_unitary(4, s).unwrap()).collect();
        let seq = synth_batch(&us, Scheme::Clements, Exec::Sequential);
        let par = synth_batch(&us, Scheme::Clements, Exec::Parallel);
        for (a, b) in seq.iter().zip(&par) {
            assert_eq!(a.as_ref().unwrap(), b.as_ref().unwrap());
        }
    }
}
