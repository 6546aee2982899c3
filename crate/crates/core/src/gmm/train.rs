use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{log_sum_exp, GaussianComponent, GmmError, PhraseModel, TrainConfig};
use crate::audio::FeatureMatrix;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Trains a phrase model. See [`train_model_traced`].
pub fn train_model(
    features: &FeatureMatrix,
    transcription: &str,
    cfg: &TrainConfig,
) -> Result<PhraseModel, GmmError> {
    train_model_traced(features, transcription, cfg).map(|(m, _)| m)
}

/// Trains a phrase model and returns the total training log-likelihood
/// before the first EM iteration and after every iteration. Training stops
/// early, keeping the earlier parameters, once a step no longer raises the
/// likelihood, so the trace is strictly increasing.
///
/// Fails with [`GmmError::LikelihoodDecreased`] if any EM step lowers the
/// log-likelihood by more than `1e-9` relative.
pub fn train_model_traced(
    features: &FeatureMatrix,
    transcription: &str,
    cfg: &TrainConfig,
) -> Result<(PhraseModel, Vec<f64>), GmmError> {
    cfg.validate()?;
    let frames = features.frames();
    if frames.len() < cfg.num_components {
        return Err(GmmError::TooFewFrames {
            frames: frames.len(),
            needed: cfg.num_components,
        });
    }
    if let Some(i) = frames.iter().position(|f| f.iter().any(|v| !v.is_finite())) {
        return Err(GmmError::NonFinite(i));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let centers = kmeans(frames, cfg.num_components, cfg.kmeans_init_iterations, &mut rng);
    let mut components = initial_components(frames, &centers, cfg.variance_floor);

    let mut trace = Vec::with_capacity(cfg.em_iterations + 1);
    let mut resp = vec![0.0; frames.len() * components.len()];
    let mut previous_components = components.clone();
    for iteration in 0..=cfg.em_iterations {
        let ll = e_step(frames, &components, &mut resp);
        if let Some(&previous) = trace.last() {
            let slack = 1e-9 * f64::max(1.0, f64::abs(previous));
            if ll < previous - slack {
                return Err(GmmError::LikelihoodDecreased {
                    iteration,
                    previous,
                    current: ll,
                });
            }
            if ll <= previous {
                // converged; the last step only moved rounding noise
                components = previous_components;
                break;
            }
        }
        trace.push(ll);
        if iteration < cfg.em_iterations {
            previous_components.clone_from(&components);
            m_step(frames, &mut components, &resp, cfg.variance_floor);
        }
    }

    components.retain(|c| c.weight > 0.0);
    let model = PhraseModel::new(components, transcription, frames.len() as u64)?;
    Ok((model, trace))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(x: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (k, c) in centers.iter().enumerate() {
        let d = sq_dist(x, c);
        if d < best_d {
            best = k;
            best_d = d;
        }
    }
    best
}

/// k-means++ seeding followed by Lloyd iterations. May return fewer than
/// `k` centres when the data has fewer distinct points.
fn kmeans(frames: &[Vec<f64>], k: usize, iterations: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = frames.len();
    let mut centers = vec![frames[rng.gen_range(0..n)].clone()];
    let mut d2: Vec<f64> = frames.iter().map(|f| sq_dist(f, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            break;
        }
        let target = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = n - 1;
        for (i, d) in d2.iter().enumerate() {
            acc += d;
            if acc > target {
                pick = i;
                break;
            }
        }
        centers.push(frames[pick].clone());
        let c = centers.last().unwrap();
        for (d, f) in d2.iter_mut().zip(frames) {
            *d = d.min(sq_dist(f, c));
        }
    }

    let dim = frames[0].len();
    for _ in 0..iterations {
        let mut sums = vec![vec![0.0; dim]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for f in frames {
            let k = nearest(f, &centers);
            counts[k] += 1;
            for (s, v) in sums[k].iter_mut().zip(f) {
                *s += v;
            }
        }
        let mut moved = false;
        for ((c, s), &count) in centers.iter_mut().zip(sums).zip(&counts) {
            if count == 0 {
                continue;
            }
            let next: Vec<f64> = s.into_iter().map(|v| v / count as f64).collect();
            moved |= next != *c;
            *c = next;
        }
        if !moved {
            break;
        }
    }
    centers
}

fn initial_components(frames: &[Vec<f64>], centers: &[Vec<f64>], floor: f64) -> Vec<GaussianComponent> {
    let dim = frames[0].len();
    let mut members: Vec<Vec<&[f64]>> = vec![Vec::new(); centers.len()];
    for f in frames {
        members[nearest(f, centers)].push(f);
    }
    let n = frames.len() as f64;
    members
        .into_iter()
        .filter(|m| !m.is_empty())
        .map(|m| {
            let count = m.len() as f64;
            let mean: Vec<f64> = (0..dim)
                .map(|d| m.iter().map(|f| f[d]).sum::<f64>() / count)
                .collect();
            let variance = (0..dim)
                .map(|d| {
                    let v = m.iter().map(|f| (f[d] - mean[d]).powi(2)).sum::<f64>() / count;
                    v.max(floor)
                })
                .collect();
            GaussianComponent {
                weight: count / n,
                mean,
                variance,
            }
        })
        .collect()
}

/// Fills `resp` (row-major, frames x components) and returns the total
/// log-likelihood.
fn e_step(frames: &[Vec<f64>], comps: &[GaussianComponent], resp: &mut [f64]) -> f64 {
    let k = comps.len();
    let consts: Vec<f64> = comps
        .iter()
        .map(|c| {
            if c.weight > 0.0 {
                c.weight.ln() - 0.5 * c.variance.iter().map(|v| LN_2PI + v.ln()).sum::<f64>()
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let inv: Vec<Vec<f64>> = comps
        .iter()
        .map(|c| c.variance.iter().map(|v| 1.0 / v).collect())
        .collect();

    let mut total = 0.0;
    let mut terms = vec![0.0; k];
    for (i, x) in frames.iter().enumerate() {
        for j in 0..k {
            terms[j] = if consts[j] == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                let q: f64 = x
                    .iter()
                    .zip(&comps[j].mean)
                    .zip(&inv[j])
                    .map(|((xi, mu), iv)| (xi - mu) * (xi - mu) * iv)
                    .sum();
                consts[j] - 0.5 * q
            };
        }
        let lse = log_sum_exp(&terms);
        total += lse;
        for j in 0..k {
            resp[i * k + j] = (terms[j] - lse).exp();
        }
    }
    total
}

fn m_step(frames: &[Vec<f64>], comps: &mut [GaussianComponent], resp: &[f64], floor: f64) {
    let k = comps.len();
    let n = frames.len() as f64;
    let dim = frames[0].len();
    for (j, c) in comps.iter_mut().enumerate() {
        let nk: f64 = (0..frames.len()).map(|i| resp[i * k + j]).sum();
        if nk <= 0.0 {
            // collapsed component: zero weight, parameters irrelevant
            c.weight = 0.0;
            continue;
        }
        let mut mean = vec![0.0; dim];
        for (i, x) in frames.iter().enumerate() {
            let r = resp[i * k + j];
            for (m, v) in mean.iter_mut().zip(x) {
                *m += r * v;
            }
        }
        for m in &mut mean {
            *m /= nk;
        }
        let mut var = vec![0.0; dim];
        for (i, x) in frames.iter().enumerate() {
            let r = resp[i * k + j];
            for ((s, v), m) in var.iter_mut().zip(x).zip(&mean) {
                *s += r * (v - m) * (v - m);
            }
        }
        for s in &mut var {
            *s = (*s / nk).max(floor);
        }
        c.weight = nk / n;
        c.mean = mean;
        c.variance = var;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(frames: Vec<Vec<f64>>) -> FeatureMatrix {
        FeatureMatrix::new(frames).unwrap()
    }

    fn lcg_frames(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect())
            .collect()
    }

    #[test]
    fn single_component_is_closed_form() {
        let frames = lcg_frames(50, 3, 7);
        let cfg = TrainConfig {
            num_components: 1,
            ..Default::default()
        };
        let m = train_model(&matrix(frames.clone()), "one", &cfg).unwrap();
        assert_eq!(m.num_components(), 1);
        let c = &m.components()[0];
        assert_eq!(c.weight, 1.0);
        for d in 0..3 {
            let mean = frames.iter().map(|f| f[d]).sum::<f64>() / 50.0;
            let var = frames.iter().map(|f| (f[d] - mean).powi(2)).sum::<f64>() / 50.0;
            assert!((c.mean[d] - mean).abs() < 1e-12);
            assert!((c.variance[d] - var.max(1e-4)).abs() < 1e-12);
        }
    }

    #[test]
    fn separated_clusters() {
        let mut frames = vec![vec![-10.0; 4]; 20];
        frames.extend(vec![vec![10.0; 4]; 20]);
        let cfg = TrainConfig {
            num_components: 2,
            ..Default::default()
        };
        let m = train_model(&matrix(frames), "two", &cfg).unwrap();
        assert_eq!(m.num_components(), 2);
        let c = m.components();
        assert!((c[0].weight - 0.5).abs() < 1e-6 && (c[1].weight - 0.5).abs() < 1e-6);
        assert!(c[0].mean.iter().all(|v| (v + 10.0).abs() < 1e-6));
        assert!(c[1].mean.iter().all(|v| (v - 10.0).abs() < 1e-6));
        assert!(c[0].variance.iter().all(|&v| v == 1e-4));
    }

    #[test]
    fn deterministic_and_monotone() {
        let feats = matrix(lcg_frames(200, 5, 11));
        let cfg = TrainConfig {
            rng_seed: 3,
            ..Default::default()
        };
        let (a, trace) = train_model_traced(&feats, "p", &cfg).unwrap();
        let (b, _) = train_model_traced(&feats, "p", &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(trace.len(), cfg.em_iterations + 1);
        for w in trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0));
        }
        let total: f64 = a.components().iter().map(|c| c.weight).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_data_collapses_components() {
        let frames = vec![vec![1.0, 2.0]; 10];
        let m = train_model(&matrix(frames), "flat", &TrainConfig::default()).unwrap();
        assert_eq!(m.num_components(), 1);
        assert_eq!(m.components()[0].variance, vec![1e-4, 1e-4]);
    }

    #[test]
    fn errors() {
        let feats = matrix(lcg_frames(5, 2, 1));
        assert!(matches!(
            train_model(&feats, "p", &TrainConfig::default()),
            Err(GmmError::TooFewFrames { frames: 5, needed: 8 })
        ));
        let cfg = TrainConfig {
            em_iterations: 0,
            ..Default::default()
        };
        assert!(matches!(train_model(&feats, "p", &cfg), Err(GmmError::InvalidConfig(_))));
    }
}
