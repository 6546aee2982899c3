use super::{GaussianComponent, GmmError, PhraseModel, ScoreDirection};

/// Mean over dimensions of `|x - mu_ref| / sigma`.
fn pair_dissimilarity(probe: &GaussianComponent, reference: &GaussianComponent, dir: ScoreDirection) -> f64 {
    let sigma_source = match dir {
        ScoreDirection::GalleryVariance => &reference.variance,
        ScoreDirection::ProbeVariance => &probe.variance,
    };
    let dim = probe.mean.len() as f64;
    probe
        .mean
        .iter()
        .zip(&reference.mean)
        .zip(sigma_source)
        .map(|((x, mu), var)| (x - mu).abs() / var.sqrt())
        .sum::<f64>()
        / dim
}

/// Z-score distance from `probe` to `gallery`; lower is more similar.
///
/// Each probe component mean is matched to the gallery component that
/// minimizes its mean absolute z-score (reuse allowed), and the matched
/// scores are averaged with the probe component weights. The standard
/// deviation comes from the gallery component or the probe component
/// according to `dir`.
pub fn model_distance(probe: &PhraseModel, gallery: &PhraseModel, dir: ScoreDirection) -> Result<f64, GmmError> {
    if probe.dim() != gallery.dim() {
        return Err(GmmError::DimensionMismatch(probe.dim(), gallery.dim()));
    }
    let mut weighted = 0.0;
    let mut total_weight = 0.0;
    for p in probe.components() {
        let best = gallery
            .components()
            .iter()
            .map(|g| pair_dissimilarity(p, g, dir))
            .fold(f64::INFINITY, f64::min);
        weighted += p.weight * best;
        total_weight += p.weight;
    }
    Ok(weighted / total_weight)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Choice {
    First,
    Second,
}

impl Choice {
    pub fn flipped(self) -> Self {
        match self {
            Choice::First => Choice::Second,
            Choice::Second => Choice::First,
        }
    }
}

/// Which of `a` and `b` is closer to `probe`. Ties go to [`Choice::Second`].
pub fn choose_closer(
    probe: &PhraseModel,
    a: &PhraseModel,
    b: &PhraseModel,
    dir: ScoreDirection,
) -> Result<Choice, GmmError> {
    let da = model_distance(probe, a, dir)?;
    let db = model_distance(probe, b, dir)?;
    Ok(if da < db { Choice::First } else { Choice::Second })
}

/// Index of the candidate closest to `probe`, ties going to the later
/// candidate. With two candidates this agrees with [`choose_closer`].
pub fn closest_index(probe: &PhraseModel, candidates: &[&PhraseModel], dir: ScoreDirection) -> Result<usize, GmmError> {
    let mut best = None;
    for (i, c) in candidates.iter().enumerate() {
        let d = model_distance(probe, c, dir)?;
        match best {
            Some((_, bd)) if d > bd => {}
            _ => best = Some((i, d)),
        }
    }
    best.map(|(i, _)| i)
        .ok_or_else(|| GmmError::InvalidModel("no candidates".into()))
}
