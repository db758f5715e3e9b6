//! Single adversarial updates shared by every generator/discriminator pair.
//!
//! The discriminator minimizes binary cross-entropy on logits (real -> 1,
//! fake -> 0). The generator uses the non-saturating loss `-log D(G(z))`.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::nn::{Mlp, Rmsprop};

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean BCE of logits against a constant label and its gradient.
pub(crate) fn bce_with_logits(logits: &Array2<f64>, label: f64) -> (f64, Array2<f64>) {
    let n = logits.nrows() as f64;
    let loss = logits
        .iter()
        .map(|&x| if label > 0.5 { softplus(-x) } else { softplus(x) })
        .sum::<f64>()
        / n;
    (loss, logits.mapv(|x| (sigmoid(x) - label) / n))
}

fn check_finite(loss: f64, what: &str) -> Result<f64> {
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::NonFinite(format!("{what} loss is {loss}")))
    }
}

/// One discriminator update; returns `BCE(real, 1) + BCE(fake, 0)`.
pub(crate) fn discriminator_step(
    disc: &mut Mlp,
    opt: &mut Rmsprop,
    real: &Array2<f64>,
    fake: &Array2<f64>,
) -> Result<f64> {
    let (real_logits, real_cache) = disc.forward(real)?;
    let (fake_logits, fake_cache) = disc.forward(fake)?;
    let (real_loss, real_grad) = bce_with_logits(&real_logits, 1.0);
    let (fake_loss, fake_grad) = bce_with_logits(&fake_logits, 0.0);
    let loss = check_finite(real_loss + fake_loss, "discriminator")?;
    let (mut grads, _) = disc.backward(&real_cache, &real_grad)?;
    grads.add_assign(&disc.backward(&fake_cache, &fake_grad)?.0);
    opt.step(disc, &grads)?;
    Ok(loss)
}

/// One generator update through a fixed discriminator.
pub(crate) fn generator_step(
    gen: &mut Mlp,
    opt: &mut Rmsprop,
    disc: &Mlp,
    input: &Array2<f64>,
) -> Result<f64> {
    let (fake, gen_cache) = gen.forward(input)?;
    let (logits, disc_cache) = disc.forward(&fake)?;
    let (loss, grad_logits) = bce_with_logits(&logits, 1.0);
    let loss = check_finite(loss, "generator")?;
    let (_, grad_fake) = disc.backward(&disc_cache, &grad_logits)?;
    let (grads, _) = gen.backward(&gen_cache, &grad_fake)?;
    opt.step(gen, &grads)?;
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation::{Identity, LeakyRelu, Relu, Tanh};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn noise(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
        Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
    }

    #[test]
    fn bce_matches_direct_formula() {
        let logits = Array2::from_shape_vec((3, 1), vec![-2.0, 0.0, 30.0]).unwrap();
        let (loss, grad) = bce_with_logits(&logits, 1.0);
        let direct: f64 = logits.iter().map(|&x| -(sigmoid(x)).ln()).sum::<f64>() / 3.0;
        assert!((loss - direct).abs() < 1e-12);
        let h = 1e-6;
        for i in 0..3 {
            let mut p = logits.clone();
            p[[i, 0]] += h;
            let mut m = logits.clone();
            m[[i, 0]] -= h;
            let fd = (bce_with_logits(&p, 1.0).0 - bce_with_logits(&m, 1.0).0) / (2.0 * h);
            assert!((fd - grad[[i, 0]]).abs() < 1e-8);
        }
        // large logits stay finite
        let big = Array2::from_elem((1, 1), -800.0);
        assert!(bce_with_logits(&big, 1.0).0.is_finite());
    }

    #[test]
    fn generator_matches_a_constant_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let target = 0.5;
        let mut gen = Mlp::new(&[8, 32, 32, 1], &[Relu, Relu, Tanh], &mut rng);
        let mut disc = Mlp::new(&[1, 32, 32, 1], &[LeakyRelu, LeakyRelu, Identity], &mut rng);
        let mut gopt = Rmsprop::new(&gen, 1e-3);
        let mut dopt = Rmsprop::new(&disc, 1e-3);
        let real = Array2::from_elem((32, 1), target);
        for _ in 0..2000 {
            for _ in 0..3 {
                let fake = gen.predict(&noise(&mut rng, 32, 8)).unwrap();
                discriminator_step(&mut disc, &mut dopt, &real, &fake).unwrap();
            }
            generator_step(&mut gen, &mut gopt, &disc, &noise(&mut rng, 32, 8)).unwrap();
        }
        let out = gen.predict(&noise(&mut rng, 256, 8)).unwrap();
        let mean = out.mean().unwrap();
        let worst = out.iter().map(|v| (v - target).abs()).fold(0.0, f64::max);
        assert!((mean - target).abs() < 0.1, "mean {mean}");
        assert!(worst < 0.25, "worst {worst}");
    }

    #[test]
    fn discriminator_separates_real_from_untrained_fakes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dim = 10;
        let gen = Mlp::new(&[16, 32, 32, dim], &[Relu, Relu, Tanh], &mut rng);
        let mut disc = Mlp::new(&[dim, 32, 32, 1], &[LeakyRelu, LeakyRelu, Identity], &mut rng);
        let mut dopt = Rmsprop::new(&disc, 1e-3);
        let real_batch = |rng: &mut ChaCha8Rng, n: usize| {
            Array2::from_shape_fn((n, dim), |(_, c)| 0.6 - 0.1 * c as f64) + noise(rng, n, dim) * 0.05
        };
        for _ in 0..200 {
            let real = real_batch(&mut rng, 32);
            let fake = gen.predict(&noise(&mut rng, 32, 16)).unwrap();
            discriminator_step(&mut disc, &mut dopt, &real, &fake).unwrap();
        }
        let r = disc.predict(&real_batch(&mut rng, 200)).unwrap();
        let f = disc.predict(&gen.predict(&noise(&mut rng, 200, 16)).unwrap()).unwrap();
        let wins = r
            .iter()
            .map(|a| f.iter().map(|b| if a > b { 1.0 } else if a == b { 0.5 } else { 0.0 }).sum::<f64>())
            .sum::<f64>();
        let auc = wins / (200.0 * 200.0);
        assert!(auc > 0.9, "auc {auc}");
    }
}
