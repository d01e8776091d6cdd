//! NT-Xent loss. Rows `2i` and `2i+1` form a positive pair; every other row in
//! the batch is a negative for both.

use super::{EmbedError, EmbedderModel};

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// One anchor's term: `-log(exp(s_p/t) / (exp(s_p/t) + sum_n exp(s_n/t)))`.
pub fn anchor_loss(anchor: &[f64], positive: &[f64], negatives: &[&[f64]], tau: f64) -> f64 {
    let sp = cosine(anchor, positive) / tau;
    let mut logits = vec![sp];
    logits.extend(negatives.iter().map(|n| cosine(anchor, n) / tau));
    log_sum_exp(&logits) - sp
}

fn check_batch(rows: usize, tau: f64) -> Result<(), EmbedError> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(EmbedError::BadTemperature(tau));
    }
    if !rows.is_multiple_of(2) {
        return Err(EmbedError::OddBatch(rows));
    }
    if rows < 4 {
        return Err(EmbedError::TooFewPairs(rows / 2));
    }
    Ok(())
}

/// Mean anchor loss over all `2N` rows. Inputs need not be normalized.
pub fn ntxent_loss(embeddings: &[Vec<f64>], tau: f64) -> Result<f64, EmbedError> {
    check_batch(embeddings.len(), tau)?;
    let n2 = embeddings.len();
    let mut total = 0.0;
    for i in 0..n2 {
        let negatives: Vec<&[f64]> = (0..n2).filter(|&k| k != i && k != (i ^ 1)).map(|k| embeddings[k].as_slice()).collect();
        total += anchor_loss(&embeddings[i], &embeddings[i ^ 1], &negatives, tau);
    }
    Ok(total / n2 as f64)
}

/// Parameter gradients, laid out like the model's parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(model: &EmbedderModel) -> Self {
        Self {
            w1: vec![0.0; model.w1.len()],
            b1: vec![0.0; model.b1.len()],
            w2: vec![0.0; model.w2.len()],
            b2: vec![0.0; model.b2.len()],
        }
    }

    pub fn parts(&self) -> [&Vec<f64>; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn flat(&self) -> Vec<f64> {
        self.parts().iter().flat_map(|p| p.iter().copied()).collect()
    }
}

/// Loss and exact gradient of the mean NT-Xent loss for a batch of feature
/// vectors (pairs in adjacent rows) with respect to every model parameter.
pub fn ntxent_grad(model: &EmbedderModel, features: &[Vec<f64>], tau: f64) -> Result<(f64, Gradients), EmbedError> {
    check_batch(features.len(), tau)?;
    let n2 = features.len();
    let traces = features.iter().map(|x| model.trace(x)).collect::<Result<Vec<_>, _>>()?;
    let e: Vec<&[f64]> = traces.iter().map(|t| t.e.as_slice()).collect();
    let dim = model.config.dim;

    // softmax over k != i of s_ik / tau, per anchor
    let mut p = vec![vec![0.0; n2]; n2];
    let mut loss = 0.0;
    for i in 0..n2 {
        let logits: Vec<f64> = (0..n2)
            .map(|k| if k == i { f64::NEG_INFINITY } else { e[i].iter().zip(e[k]).map(|(a, b)| a * b).sum::<f64>() / tau })
            .collect();
        let lse = log_sum_exp(&logits);
        for k in 0..n2 {
            if k != i {
                p[i][k] = (logits[k] - lse).exp();
            }
        }
        loss += lse - logits[i ^ 1];
    }
    loss /= n2 as f64;
    if !loss.is_finite() {
        return Err(EmbedError::NonFiniteParameter);
    }

    let scale = 1.0 / (n2 as f64 * tau);
    let mut grads = Gradients::zeros_like(model);
    let (n_in, n_h) = (model.config.input_len(), model.config.hidden);
    let act = model.config.activation;
    for i in 0..n2 {
        // dL/de_i
        let mut de = vec![0.0; dim];
        for k in 0..n2 {
            if k == i {
                continue;
            }
            let mut w = p[i][k] + p[k][i];
            if k == (i ^ 1) {
                w -= 2.0;
            }
            for (d, v) in de.iter_mut().zip(e[k]) {
                *d += scale * w * v;
            }
        }
        // through e = u / |u|
        let t = &traces[i];
        let proj: f64 = de.iter().zip(&t.e).map(|(a, b)| a * b).sum();
        let du: Vec<f64> = de.iter().zip(&t.e).map(|(d, ev)| (d - proj * ev) / t.norm).collect();
        for (o, &g) in du.iter().enumerate() {
            grads.b2[o] += g;
            for (w, hv) in grads.w2[o * n_h..(o + 1) * n_h].iter_mut().zip(&t.h) {
                *w += g * hv;
            }
        }
        let x = &t.x;
        for j in 0..n_h {
            let dh: f64 = (0..dim).map(|o| model.w2[o * n_h + j] * du[o]).sum();
            let da = dh * act.derivative(t.a[j], t.h[j]);
            if da == 0.0 {
                continue;
            }
            grads.b1[j] += da;
            for (w, xv) in grads.w1[j * n_in..(j + 1) * n_in].iter_mut().zip(x) {
                *w += da * xv;
            }
        }
    }
    Ok((loss, grads))
}

/// Mean loss and gradient over several independent batches.
pub fn mean_gradient(model: &EmbedderModel, batches: &[Vec<Vec<f64>>], tau: f64) -> Result<(f64, Gradients), EmbedError> {
    let mut acc = Gradients::zeros_like(model);
    let mut loss = 0.0;
    for b in batches {
        let (l, g) = ntxent_grad(model, b, tau)?;
        loss += l;
        for (dst, src) in [&mut acc.w1, &mut acc.b1, &mut acc.w2, &mut acc.b2].into_iter().zip(g.parts()) {
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
        }
    }
    let k = batches.len().max(1) as f64;
    for part in [&mut acc.w1, &mut acc.b1, &mut acc.w2, &mut acc.b2] {
        part.iter_mut().for_each(|v| *v /= k);
    }
    Ok((loss / k, acc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedder::{Activation, EmbedderConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const E: f64 = std::f64::consts::E;

    #[test]
    fn orthogonal_pairs_tau_one() {
        let z = vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]];
        let expected = -(E / (E + 2.0)).ln();
        assert!((expected - 0.5514).abs() < 1e-4);
        assert!((ntxent_loss(&z, 1.0).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn restricted_denominator_term() {
        let v = anchor_loss(&[1.0, 0.0], &[1.0, 0.0], &[&[0.0, 1.0]], 1.0);
        assert!((v - (-(E / (E + 1.0)).ln())).abs() < 1e-12);
        assert!((v - 0.3133).abs() < 1e-4);
    }

    #[test]
    fn scale_invariant_and_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let z: Vec<Vec<f64>> = (0..6).map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let scaled: Vec<Vec<f64>> = z.iter().map(|r| r.iter().map(|v| v * 7.5).collect()).collect();
        let a = ntxent_loss(&z, 0.1).unwrap();
        assert!(a >= 0.0);
        assert!((a - ntxent_loss(&scaled, 0.1).unwrap()).abs() < 1e-12);
        assert!(matches!(ntxent_loss(&z[..2], 0.1), Err(EmbedError::TooFewPairs(1))));
        assert!(matches!(ntxent_loss(&z[..5], 0.1), Err(EmbedError::OddBatch(5))));
        assert!(matches!(ntxent_loss(&z, 0.0), Err(EmbedError::BadTemperature(_))));
    }

    fn toy() -> (EmbedderModel, Vec<Vec<f64>>) {
        let cfg = EmbedderConfig { patch_size: 4, input_side: 2, hidden: 6, dim: 4, activation: Activation::Tanh };
        let model = EmbedderModel::init(cfg, 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let feats = (0..6).map(|_| (0..12).map(|_| rng.gen()).collect()).collect();
        (model, feats)
    }

    fn batch_loss(model: &EmbedderModel, feats: &[Vec<f64>], tau: f64) -> f64 {
        let emb: Vec<Vec<f64>> = feats.iter().map(|x| model.forward(x).unwrap()).collect();
        ntxent_loss(&emb, tau).unwrap()
    }

    #[test]
    fn grad_loss_matches_forward_loss() {
        let (m, f) = toy();
        let (l, _) = ntxent_grad(&m, &f, 0.5).unwrap();
        assert!((l - batch_loss(&m, &f, 0.5)).abs() < 1e-12);
    }

    #[test]
    fn duplicated_batch_same_mean_gradient() {
        let (m, f) = toy();
        let (l1, g1) = ntxent_grad(&m, &f, 0.2).unwrap();
        let (l2, g2) = mean_gradient(&m, &[f.clone(), f], 0.2).unwrap();
        assert_eq!(l1, l2);
        for (a, b) in g1.flat().iter().zip(g2.flat()) {
            assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0));
        }
    }

    #[test]
    fn finite_difference_spot_check() {
        let (mut m, f) = toy();
        let tau = 0.5;
        let (_, g) = ntxent_grad(&m, &f, tau).unwrap();
        let analytic = g.flat();
        let mut idx = 0;
        for part in 0..4 {
            for j in 0..m.params()[part].len() {
                let orig = m.params()[part][j];
                m.params_mut()[part][j] = orig + 1e-5;
                let up = batch_loss(&m, &f, tau);
                m.params_mut()[part][j] = orig - 1e-5;
                let down = batch_loss(&m, &f, tau);
                m.params_mut()[part][j] = orig;
                let numeric = (up - down) / 2e-5;
                let a = analytic[idx];
                assert!((a - numeric).abs() <= 1e-6 + 1e-4 * a.abs().max(numeric.abs()), "param {idx}: {a} vs {numeric}");
                idx += 1;
            }
        }
    }
}
