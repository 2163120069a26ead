//! Contrastive and classification losses.

use serde::{Deserialize, Serialize};

use super::heads::AlignmentHeads;
use crate::autodiff::{ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Direction(s) of the contrastive softmax.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NceMode {
    /// Half the sum of the row-wise and column-wise terms.
    #[default]
    Symmetric,
    /// Row-wise term only: each row of `a` picks its match among `b`.
    RowOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
}

impl LossWeights {
    pub fn new(lambda1: f64, lambda2: f64, lambda3: f64) -> Result<Self> {
        let w = [lambda1, lambda2, lambda3];
        if w.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::Config(format!("loss weights must be finite and nonnegative, got {w:?}")));
        }
        if w.iter().all(|&l| l == 0.0) {
            return Err(Error::Config("at least one loss weight must be positive".into()));
        }
        Ok(Self {
            lambda1,
            lambda2,
            lambda3,
        })
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 1.0,
            lambda3: 1.0,
        }
    }
}

fn diag_sum(tape: &mut Tape, logp: Var, n: usize) -> Result<Var> {
    let flat = tape.reshape(logp, &[n * n])?;
    let d = tape.gather(flat, (0..n).map(|i| i * n + i).collect())?;
    Ok(tape.sum(d))
}

/// InfoNCE between matched rows of `a` and `b` (`N×D`, `N ≥ 2`), logits
/// `a·bᵀ · inv_tau`.
pub fn info_nce_tape(tape: &mut Tape, a: Var, b: Var, inv_tau: Var, mode: NceMode) -> Result<Var> {
    let (sa, sb) = (tape.value(a).shape().to_vec(), tape.value(b).shape().to_vec());
    if sa.len() != 2 || sa != sb {
        return Err(Error::shape("info_nce", &sa, &sb));
    }
    let n = sa[0];
    if n < 2 {
        return Err(Error::Contract(format!("info_nce needs at least 2 pairs, got {n}")));
    }
    let bt = tape.transpose(b)?;
    let sim = tape.matmul(a, bt)?;
    let logits = tape.mul_scalar(sim, inv_tau)?;
    let rows = tape.log_softmax(logits, 1)?;
    let row_sum = diag_sum(tape, rows, n)?;
    match mode {
        NceMode::RowOnly => Ok(tape.scale(row_sum, -1.0 / n as f64)),
        NceMode::Symmetric => {
            let cols = tape.log_softmax(logits, 0)?;
            let col_sum = diag_sum(tape, cols, n)?;
            let both = tape.add(row_sum, col_sum)?;
            Ok(tape.scale(both, -0.5 / n as f64))
        }
    }
}

/// Symmetric InfoNCE with temperature `tau`.
pub fn info_nce(a: &Tensor, b: &Tensor, tau: f64) -> Result<f64> {
    info_nce_with_mode(a, b, tau, NceMode::Symmetric)
}

pub fn info_nce_with_mode(a: &Tensor, b: &Tensor, tau: f64, mode: NceMode) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::Contract(format!("temperature must be positive, got {tau}")));
    }
    let mut tape = Tape::new();
    let (va, vb) = (tape.constant(a.clone()), tape.constant(b.clone()));
    let it = tape.constant(Tensor::scalar(1.0 / tau));
    let l = info_nce_tape(&mut tape, va, vb, it, mode)?;
    Ok(tape.value(l).item())
}

/// `λ1·L(hC,hJ) + λ2·L(hC,hTs) + λ3·L(hTs,hJ)`; zero-weight terms are skipped.
pub fn contrastive_total_tape(
    tape: &mut Tape,
    h_c: Var,
    h_j: Var,
    h_ts: Var,
    weights: &LossWeights,
    inv_tau: Var,
    mode: NceMode,
) -> Result<Var> {
    let s = tape.value(h_c).shape().to_vec();
    for v in [h_j, h_ts] {
        if tape.value(v).shape() != s.as_slice() {
            return Err(Error::shape("contrastive_total", &s, tape.value(v).shape()));
        }
    }
    let mut total: Option<Var> = None;
    for (lambda, a, b) in [
        (weights.lambda1, h_c, h_j),
        (weights.lambda2, h_c, h_ts),
        (weights.lambda3, h_ts, h_j),
    ] {
        if lambda == 0.0 {
            continue;
        }
        let l = info_nce_tape(tape, a, b, inv_tau, mode)?;
        let l = tape.scale(l, lambda);
        total = Some(match total {
            None => l,
            Some(t) => tape.add(t, l)?,
        });
    }
    total.ok_or_else(|| Error::Config("all loss weights are zero".into()))
}

pub fn contrastive_total(
    h_c: &Tensor,
    h_j: &Tensor,
    h_ts: &Tensor,
    weights: &LossWeights,
    tau: f64,
) -> Result<f64> {
    let mut tape = Tape::new();
    let (c, j, t) = (
        tape.constant(h_c.clone()),
        tape.constant(h_j.clone()),
        tape.constant(h_ts.clone()),
    );
    let it = tape.constant(Tensor::scalar(1.0 / tau));
    let l = contrastive_total_tape(&mut tape, c, j, t, weights, it, NceMode::Symmetric)?;
    Ok(tape.value(l).item())
}

/// Mean negative log-likelihood of the true class under `logits` (`N×P`).
pub fn cross_entropy_tape(tape: &mut Tape, logits: Var, targets: &[usize]) -> Result<Var> {
    let s = tape.value(logits).shape().to_vec();
    if s.len() != 2 || s[0] != targets.len() {
        return Err(Error::shape("cross_entropy", &s, &[targets.len()]));
    }
    let p = s[1];
    if let Some(bad) = targets.iter().find(|&&t| t >= p) {
        return Err(Error::Label(format!("parent index {bad} out of range for {p} parents")));
    }
    let logp = tape.log_softmax(logits, 1)?;
    let flat = tape.reshape(logp, &[s[0] * p])?;
    let picked = tape.gather(flat, targets.iter().enumerate().map(|(i, &t)| i * p + t).collect())?;
    let m = tape.mean(picked);
    Ok(tape.neg(m))
}

/// Parent-category cross-entropy of the classifier head on `h_c`.
pub fn parent_class_loss_tape(
    tape: &mut Tape,
    store: &ParamStore,
    heads: &AlignmentHeads,
    h_c: Var,
    parents: &[usize],
) -> Result<Var> {
    let logits = heads.classify(tape, store, h_c)?;
    cross_entropy_tape(tape, logits, parents)
}

pub fn parent_class_loss(h_c: &Tensor, parents: &[usize], heads: &AlignmentHeads, store: &ParamStore) -> Result<f64> {
    let mut tape = Tape::new();
    let h = tape.constant(h_c.clone());
    let l = parent_class_loss_tape(&mut tape, store, heads, h, parents)?;
    Ok(tape.value(l).item())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::grad_check_many;
    use crate::rng::{normal_vec, seeded};
    use proptest::prelude::*;

    fn eye2() -> Tensor {
        Tensor::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap()
    }

    fn unit_rows(seed: u64, n: usize, d: usize) -> Tensor {
        let mut rng = seeded(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let mut r = normal_vec(&mut rng, d, 1.0);
                crate::autodiff::kernels::normalize_in_place(&mut r);
                r
            })
            .collect();
        Tensor::from_rows(&rows).unwrap()
    }

    fn ln_1pe_minus_1() -> f64 {
        (1.0 + std::f64::consts::E).ln() - 1.0
    }

    #[test]
    fn identity_pair_oracle() {
        let l = info_nce(&eye2(), &eye2(), 1.0).unwrap();
        assert!((l - ln_1pe_minus_1()).abs() < 1e-9);
        assert!((l - 0.3133).abs() < 1e-4);
        let r = info_nce_with_mode(&eye2(), &eye2(), 1.0, NceMode::RowOnly).unwrap();
        assert!((r - ln_1pe_minus_1()).abs() < 1e-9);
    }

    #[test]
    fn identical_rows_give_ln_n() {
        for n in [2usize, 3, 5, 8] {
            let rows = vec![vec![0.6, 0.8]; n];
            let t = Tensor::from_rows(&rows).unwrap();
            let l = info_nce(&t, &t, 0.07).unwrap();
            assert!((l - (n as f64).ln()).abs() < 1e-12, "{n}: {l}");
        }
    }

    #[test]
    fn rejects_single_pair() {
        let t = Tensor::from_rows(&[[1.0, 0.0]]).unwrap();
        assert!(matches!(info_nce(&t, &t, 1.0), Err(Error::Contract(_))));
    }

    #[test]
    fn contrastive_total_examples() {
        let e = eye2();
        let one = contrastive_total(&e, &e, &e, &LossWeights::new(1.0, 1.0, 1.0).unwrap(), 1.0).unwrap();
        assert!((one - 3.0 * ln_1pe_minus_1()).abs() < 1e-9);
        assert!((one - 0.9399).abs() < 2e-4);
        let (a, b) = (unit_rows(1, 4, 3), unit_rows(2, 4, 3));
        let only = contrastive_total(&a, &b, &unit_rows(3, 4, 3), &LossWeights::new(1.0, 0.0, 0.0).unwrap(), 0.5).unwrap();
        assert_eq!(only, info_nce(&a, &b, 0.5).unwrap());
        assert!(LossWeights::new(0.0, 0.0, 0.0).is_err());
        assert!(LossWeights::new(-1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn cross_entropy_oracles() {
        let mut tape = Tape::new();
        let z = tape.constant(Tensor::zeros(&[3, 5]));
        let l = cross_entropy_tape(&mut tape, z, &[0, 4, 2]).unwrap();
        assert!((tape.value(l).item() - 5f64.ln()).abs() < 1e-15);

        let mut prev = f64::INFINITY;
        for margin in [1.0, 5.0, 20.0, 60.0] {
            let mut tape = Tape::new();
            let z = tape.constant(Tensor::from_rows(&[[margin, 0.0, 0.0]]).unwrap());
            let v = cross_entropy_tape(&mut tape, z, &[0]).unwrap();
            let l = tape.value(v).item();
            assert!(l < prev && l >= 0.0);
            prev = l;
        }
        assert!(prev < 1e-20);

        let logits = Tensor::new(vec![2, 3], normal_vec(&mut seeded(9), 6, 2.0)).unwrap();
        let direct: f64 = [(0usize, 2usize), (1, 1)]
            .iter()
            .map(|&(i, t)| {
                let r = logits.row_slice(i);
                let lse = r.iter().map(|v| v.exp()).sum::<f64>().ln();
                lse - r[t]
            })
            .sum::<f64>()
            / 2.0;
        let mut tape = Tape::new();
        let z = tape.constant(logits);
        let v = cross_entropy_tape(&mut tape, z, &[2, 1]).unwrap();
        let l = tape.value(v).item();
        assert!((l - direct).abs() < 1e-12);

        let mut tape = Tape::new();
        let z = tape.constant(Tensor::zeros(&[1, 2]));
        assert!(matches!(cross_entropy_tape(&mut tape, z, &[2]), Err(Error::Label(_))));
    }

    #[test]
    fn diagonal_increase_lowers_loss() {
        let (a, b) = (unit_rows(4, 3, 4), unit_rows(5, 3, 4));
        let base = info_nce(&a, &b, 1.0).unwrap();
        let mut tape = Tape::new();
        let logits_loss = |bump: f64, tape: &mut Tape| {
            let s = crate::autodiff::kernels::matmul_nt(a.data(), b.data(), 3, 4, 3);
            let mut s = Tensor::new(vec![3, 3], s).unwrap();
            s.data_mut()[4] += bump;
            let l = tape.constant(s);
            let id = tape.constant(Tensor::scalar(1.0));
            // Logits fed directly: use an identity `b` so that a·bᵀ = logits.
            let eye = tape.constant(Tensor::from_rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).unwrap());
            let v = info_nce_tape(tape, l, eye, id, NceMode::Symmetric).unwrap();
            tape.value(v).item()
        };
        let l0 = logits_loss(0.0, &mut tape);
        assert!((l0 - base).abs() < 1e-12);
        assert!(logits_loss(0.1, &mut tape) < l0);
        assert!(logits_loss(1.0, &mut tape) < logits_loss(0.1, &mut tape));
    }

    #[test]
    fn gradients_wrt_features_and_temperature() {
        let inputs = [unit_rows(6, 3, 4), unit_rows(7, 3, 4), Tensor::scalar(2.5)];
        for mode in [NceMode::Symmetric, NceMode::RowOnly] {
            let r = grad_check_many(
                |t, x| info_nce_tape(t, x[0], x[1], x[2], mode),
                &inputs,
                1e-6,
            )
            .unwrap();
            assert!(r.max_rel_error < 1e-5, "{mode:?}: {r:?}");
        }
    }

    proptest! {
        #[test]
        fn symmetric_and_row_permutation_invariant(n in 2usize..6, d in 2usize..5, seed in any::<u64>(), tau in 0.05f64..2.0) {
            let (a, b) = (unit_rows(seed, n, d), unit_rows(seed ^ 1, n, d));
            let l = info_nce(&a, &b, tau).unwrap();
            prop_assert!(l.is_finite() && l >= 0.0);
            prop_assert_eq!(l, info_nce(&b, &a, tau).unwrap());
            let perm: Vec<usize> = (0..n).rev().collect();
            let pick = |t: &Tensor| Tensor::from_rows(&perm.iter().map(|&i| t.row_slice(i).to_vec()).collect::<Vec<_>>()).unwrap();
            let lp = info_nce(&pick(&a), &pick(&b), tau).unwrap();
            prop_assert!((lp - l).abs() < 1e-12);
        }
    }
}
