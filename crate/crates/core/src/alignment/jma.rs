//! Text-keyed attention over view features.

use std::cmp::Ordering;

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Row order used before fusing, so that the floating-point reductions do
/// not depend on the order views arrive in.
fn canonical_order(views: &Tensor) -> Vec<usize> {
    let mut order: Vec<usize> = (0..views.rows()).collect();
    order.sort_by(|&a, &b| {
        views
            .row_slice(a)
            .iter()
            .zip(views.row_slice(b))
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    });
    order
}

/// Fuses `V×D` views with a length-`D` text feature:
/// `w = softmax_v(⟨view_v, text⟩)`, output `Σ_v w_v · view_v` (`1×D`).
/// Returns `(output, weights)`, weights `V×1` in canonical row order.
pub fn jma_fuse_tape(tape: &mut Tape, views: Var, text: Var) -> Result<(Var, Var)> {
    let vt = tape.value(views);
    if vt.rank() != 2 || vt.rows() == 0 {
        return Err(Error::Input("view features must be a non-empty V×D matrix".into()));
    }
    let (v, d) = (vt.rows(), vt.cols());
    if tape.value(text).len() != d {
        return Err(Error::shape("jma_fuse", vt.shape(), tape.value(text).shape()));
    }
    let order = canonical_order(vt);
    let sorted = if order.iter().enumerate().all(|(i, &o)| i == o) {
        views
    } else {
        let flat = tape.reshape(views, &[v * d])?;
        let idx = order.iter().flat_map(|&r| (r * d)..(r + 1) * d).collect();
        let g = tape.gather(flat, idx)?;
        tape.reshape(g, &[v, d])?
    };
    let col = tape.reshape(text, &[d, 1])?;
    let scores = tape.matmul(sorted, col)?;
    let weights = tape.softmax(scores, 0)?;
    let wt = tape.transpose(weights)?;
    let out = tape.matmul(wt, sorted)?;
    Ok((out, weights))
}

fn check_views(views: &[Vec<f64>], text: &[f64]) -> Result<Tensor> {
    if views.is_empty() {
        return Err(Error::Input("no views to fuse".into()));
    }
    if let Some(bad) = views.iter().find(|r| r.len() != text.len()) {
        return Err(Error::shape("jma_fuse", &[views.len(), bad.len()], &[text.len()]));
    }
    Tensor::from_rows(views)
}

/// Fused feature of `views` keyed by `text`.
pub fn jma_fuse(views: &[Vec<f64>], text: &[f64]) -> Result<Vec<f64>> {
    let vt = check_views(views, text)?;
    let mut tape = Tape::new();
    let v = tape.constant(vt);
    let t = tape.constant(Tensor::vector(text.to_vec())?);
    let (out, _) = jma_fuse_tape(&mut tape, v, t)?;
    Ok(tape.value(out).data().to_vec())
}

/// Fusion weights, one per view in the order given.
pub fn jma_weights(views: &[Vec<f64>], text: &[f64]) -> Result<Vec<f64>> {
    let vt = check_views(views, text)?;
    let order = canonical_order(&vt);
    let mut tape = Tape::new();
    let v = tape.constant(vt);
    let t = tape.constant(Tensor::vector(text.to_vec())?);
    let (_, w) = jma_fuse_tape(&mut tape, v, t)?;
    let canon = tape.value(w).data();
    let mut out = vec![0.0; views.len()];
    for (j, &row) in order.iter().enumerate() {
        out[row] = canon[j];
    }
    Ok(out)
}
