use crate::error::{CgflError, Result};
use crate::numerics::{Tape, Var};

/// Normalised support weights `ns_i / sum ns` as a `K x 1` column, or
/// uniform `1/K` weights when `scores` is `None`.
pub fn support_weights(tape: &mut Tape, k: usize, scores: Option<&[Var]>) -> Var {
    match scores {
        Some(ns) => {
            // softmax(log ns) == ns / sum(ns); a single entry gives exactly 1
            let stacked = tape.concat_rows(ns);
            let logs = tape.ln(stacked);
            tape.softmax_cols(logs)
        }
        None => tape.constant(k, 1, vec![1.0 / k as f64; k]),
    }
}

/// Score-weighted mean of one class's support embeddings (`1 x d` each).
pub fn prototype(tape: &mut Tape, support: &[Var], scores: Option<&[Var]>) -> Result<Var> {
    if support.is_empty() {
        return Err(CgflError::invalid("a prototype needs at least one support node"));
    }
    if let Some(ns) = scores {
        if ns.len() != support.len() {
            return Err(CgflError::invalid("one node score per support node is required"));
        }
    }
    if support.len() == 1 {
        return Ok(support[0]);
    }
    let w = support_weights(tape, support.len(), scores);
    let wt = tape.transpose(w);
    let h = tape.concat_rows(support);
    Ok(tape.matmul(wt, h))
}

/// One prototype per class; `support[c]` and `scores[c]` hold class `c`.
pub fn prototypes(
    tape: &mut Tape,
    support: &[Vec<Var>],
    scores: Option<&[Vec<Var>]>,
) -> Result<Vec<Var>> {
    support
        .iter()
        .enumerate()
        .map(|(c, s)| prototype(tape, s, scores.map(|ns| ns[c].as_slice())))
        .collect()
}

/// Negative squared distances from `h` to each prototype, `N x 1`.
pub fn neg_sq_distances(tape: &mut Tape, h: Var, protos: &[Var]) -> Var {
    let d: Vec<Var> = protos
        .iter()
        .map(|&p| {
            let d = tape.sq_dist(h, p);
            tape.scale(d, -1.0)
        })
        .collect();
    tape.concat_rows(&d)
}

/// Class probabilities of a query, `N x 1`.
pub fn classify(tape: &mut Tape, h: Var, protos: &[Var]) -> Result<Var> {
    if protos.is_empty() {
        return Err(CgflError::invalid("classification needs at least one prototype"));
    }
    let logits = neg_sq_distances(tape, h, protos);
    Ok(tape.softmax_cols(logits))
}

/// Mean negative log-likelihood of the queries; `queries` pairs each
/// embedding with its class position.
pub fn task_loss(tape: &mut Tape, queries: &[(Var, usize)], protos: &[Var]) -> Result<Var> {
    if queries.is_empty() || protos.is_empty() {
        return Err(CgflError::invalid("task loss needs queries and prototypes"));
    }
    let mut picked = Vec::with_capacity(queries.len());
    for &(h, y) in queries {
        if y >= protos.len() {
            return Err(CgflError::invalid(format!("query label {y} out of range")));
        }
        let logits = neg_sq_distances(tape, h, protos);
        let logp = tape.log_softmax_cols(logits);
        picked.push(tape.gather_rows(logp, &[y]));
    }
    let all = tape.concat_rows(&picked);
    let total = tape.sum(all);
    Ok(tape.scale(total, -1.0 / queries.len() as f64))
}

/// `sum_i gs_i sum_j ts_ij L_ij`. `gs` is an `n x 1` column, `ts[i]` an
/// `m_i x 1` column and `losses[i][j]` a `1 x 1` node.
pub fn meta_loss(tape: &mut Tape, losses: &[Vec<Var>], gs: Var, ts: &[Var]) -> Result<Var> {
    if losses.is_empty() || losses.len() != ts.len() || tape.shape(gs) != (losses.len(), 1) {
        return Err(CgflError::invalid("meta loss inputs disagree on the number of graphs"));
    }
    let mut per_graph = Vec::with_capacity(losses.len());
    for (i, (l, &t)) in losses.iter().zip(ts).enumerate() {
        if l.is_empty() || tape.shape(t) != (l.len(), 1) {
            return Err(CgflError::invalid(format!("graph {i}: task weights and losses disagree")));
        }
        let stacked = tape.concat_rows(l);
        let weighted = tape.mul(stacked, t);
        let s = tape.sum(weighted);
        let g = tape.gather_rows(gs, &[i]);
        per_graph.push(tape.mul(s, g));
    }
    let all = tape.concat_rows(&per_graph);
    Ok(tape.sum(all))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_support_is_the_prototype() {
        let mut t = Tape::new();
        let h = t.row(&[0.3, -1.7, 2.0]);
        let ns = t.scalar_const(0.2);
        let p = prototype(&mut t, &[h], Some(&[ns])).unwrap();
        assert_eq!(t.value(p), t.value(h));
    }

    #[test]
    fn weighted_prototypes() {
        let mut t = Tape::new();
        let h1 = t.row(&[1.0, 0.0]);
        let h2 = t.row(&[0.0, 4.0]);
        let a = t.scalar_const(3.0);
        let b = t.scalar_const(1.0);
        let p = prototype(&mut t, &[h1, h2], Some(&[a, b])).unwrap();
        let v = t.value(p);
        assert!((v[0] - 0.75).abs() < 1e-15 && (v[1] - 1.0).abs() < 1e-15);
        let eq = t.scalar_const(0.4);
        let p = prototype(&mut t, &[h1, h2], Some(&[eq, eq])).unwrap();
        let v = t.value(p);
        assert!((v[0] - 0.5).abs() < 1e-15 && (v[1] - 2.0).abs() < 1e-15);
        let w = support_weights(&mut t, 2, Some(&[a, b]));
        assert!((t.value(w).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn classify_closed_forms() {
        let mut t = Tape::new();
        let h = t.row(&[0.0, 0.0]);
        let p1 = t.row(&[0.0, 0.0]);
        let p2 = t.row(&[2.0, 0.0]);
        let pr = classify(&mut t, h, &[p1, p2]).unwrap();
        let v = t.value(pr);
        let e4 = (-4.0f64).exp();
        assert!((v[0] - 1.0 / (1.0 + e4)).abs() < 1e-15);
        assert!((v[0] - 0.9820).abs() < 5e-5 && (v[1] - 0.0180).abs() < 5e-5);
        let p3 = t.row(&[0.0, 2.0]);
        let pr = classify(&mut t, h, &[p2, p3]).unwrap();
        assert_eq!(t.value(pr), &[0.5, 0.5]);
        assert!(classify(&mut t, h, &[]).is_err());
    }

    #[test]
    fn uniform_loss_is_log_n() {
        for n in [2usize, 3, 5] {
            let mut t = Tape::new();
            let h = t.row(&[1.0, 1.0]);
            let protos: Vec<Var> = (0..n).map(|_| t.row(&[0.0, 0.0])).collect();
            let queries: Vec<(Var, usize)> = (0..n).map(|y| (h, y)).collect();
            let l = task_loss(&mut t, &queries, &protos).unwrap();
            assert!((t.scalar(l) - (n as f64).ln()).abs() < 1e-9);
        }
    }

    #[test]
    fn perfect_predictions_drive_loss_to_zero() {
        let mut t = Tape::new();
        let a = t.row(&[0.0, 0.0]);
        let b = t.row(&[100.0, 0.0]);
        let l = task_loss(&mut t, &[(a, 0), (b, 1)], &[a, b]).unwrap();
        assert!(t.scalar(l) < 1e-12 && t.scalar(l) >= 0.0);
    }

    #[test]
    fn meta_loss_algebra() {
        let mut t = Tape::new();
        let l = t.scalar_const(0.7);
        let one = t.column(&[1.0]);
        let m = meta_loss(&mut t, &[vec![l]], one, &[one]).unwrap();
        assert_eq!(t.scalar(m), 0.7);

        let gs = t.column(&[0.3, 0.7]);
        let ts0 = t.column(&[0.5, 0.5]);
        let ts1 = t.column(&[0.1, 0.6, 0.3]);
        let m = meta_loss(&mut t, &[vec![l, l], vec![l, l, l]], gs, &[ts0, ts1]).unwrap();
        assert!((t.scalar(m) - 0.7).abs() < 1e-15);

        let zero_first = t.column(&[0.0, 1.0]);
        let big = t.scalar_const(50.0);
        let m = meta_loss(&mut t, &[vec![big, big], vec![l, l, l]], zero_first, &[ts0, ts1]).unwrap();
        assert!((t.scalar(m) - 0.7).abs() < 1e-15);
        assert!(meta_loss(&mut t, &[vec![l]], gs, &[one]).is_err());
    }
}
