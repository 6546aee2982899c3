use super::{EvalError, TrialOutcome};

/// How a trial score relates to acceptance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScoreKind {
    /// Lower is more genuine; accept when `score <= threshold`.
    Distance,
    /// Higher is more genuine; accept when `score >= threshold`.
    BitAccuracy,
}

impl ScoreKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreKind::Distance => "distance",
            ScoreKind::BitAccuracy => "bit-accuracy",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [ScoreKind::Distance, ScoreKind::BitAccuracy]
            .into_iter()
            .find(|k| k.as_str() == s)
    }

    pub fn accepts(self, score: f64, threshold: f64) -> bool {
        match self {
            ScoreKind::Distance => score <= threshold,
            ScoreKind::BitAccuracy => score >= threshold,
        }
    }

    /// True if `a` is the more genuine-looking score.
    pub fn prefers(self, a: f64, b: f64) -> bool {
        match self {
            ScoreKind::Distance => a < b,
            ScoreKind::BitAccuracy => a > b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
}

/// Points run from the loosest threshold (everyone accepted) to the tightest
/// (everyone rejected).
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub kind: ScoreKind,
    pub points: Vec<RocPoint>,
    pub eer: f64,
    pub eer_threshold: f64,
}

/// Thresholds in loosest-to-tightest order: a sentinel that accepts all,
/// every distinct score with the midpoints between neighbours, and a
/// sentinel that rejects all.
fn thresholds(sorted_distinct: &[f64], kind: ScoreKind) -> Vec<f64> {
    let lo = sorted_distinct[0];
    let hi = *sorted_distinct.last().unwrap();
    let mut t = vec![lo - 1.0];
    for (i, &s) in sorted_distinct.iter().enumerate() {
        if i > 0 {
            t.push(0.5 * (sorted_distinct[i - 1] + s));
        }
        t.push(s);
    }
    t.push(hi + 1.0);
    if kind == ScoreKind::Distance {
        t.reverse();
    }
    t
}

/// Sweeps every threshold and finds the equal error rate by linear
/// interpolation at the first point where FAR drops to or below FRR.
pub fn compute_roc(outcomes: &[TrialOutcome]) -> Result<RocCurve, EvalError> {
    let kind = outcomes.first().ok_or(EvalError::SingleClass)?.kind;
    if outcomes.iter().any(|o| o.kind != kind) {
        return Err(EvalError::MixedScoreKinds);
    }
    if let Some(o) = outcomes.iter().find(|o| !o.score.is_finite()) {
        return Err(EvalError::InvalidConfig(format!("non-finite score in trial {}", o.trial_id)));
    }
    let mut genuine: Vec<f64> = outcomes.iter().filter(|o| o.genuine).map(|o| o.score).collect();
    let mut imposter: Vec<f64> = outcomes.iter().filter(|o| !o.genuine).map(|o| o.score).collect();
    if genuine.is_empty() || imposter.is_empty() {
        return Err(EvalError::SingleClass);
    }
    genuine.sort_by(f64::total_cmp);
    imposter.sort_by(f64::total_cmp);
    let mut all: Vec<f64> = genuine.iter().chain(&imposter).copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup();

    // count of sorted scores accepted at threshold t
    let accepted = |sorted: &[f64], t: f64| match kind {
        ScoreKind::Distance => sorted.partition_point(|&s| s <= t),
        ScoreKind::BitAccuracy => sorted.len() - sorted.partition_point(|&s| s < t),
    };
    let (ng, ni) = (genuine.len() as f64, imposter.len() as f64);
    let points: Vec<RocPoint> = thresholds(&all, kind)
        .into_iter()
        .map(|t| RocPoint {
            threshold: t,
            far: accepted(&imposter, t) as f64 / ni,
            frr: (genuine.len() - accepted(&genuine, t)) as f64 / ng,
        })
        .collect();
    let (eer, eer_threshold) = equal_error_point(&points);
    Ok(RocCurve {
        kind,
        points,
        eer,
        eer_threshold,
    })
}

fn equal_error_point(points: &[RocPoint]) -> (f64, f64) {
    let diff = |p: &RocPoint| p.far - p.frr;
    let i = points.iter().position(|p| diff(p) <= 0.0).unwrap_or(points.len() - 1);
    let p = points[i];
    if diff(&p) == 0.0 || i == 0 {
        return (p.far, p.threshold);
    }
    let q = points[i - 1];
    let a = diff(&q) / (diff(&q) - diff(&p));
    (q.far + a * (p.far - q.far), q.threshold + a * (p.threshold - q.threshold))
}

/// Number of `(genuine, imposter)` pairs where the genuine score wins.
pub fn pairwise_correct(pairs: &[(f64, f64)], kind: ScoreKind) -> usize {
    pairs.iter().filter(|(g, i)| kind.prefers(*g, *i)).count()
}

fn candidate_thresholds(pairs: &[(f64, f64)]) -> Vec<f64> {
    let mut all: Vec<f64> = pairs.iter().flat_map(|&(g, i)| [g, i]).collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    thresholds(&all, ScoreKind::BitAccuracy)
}

/// Best number of correctly classified scores (out of `2 * pairs.len()`)
/// reachable with a single global threshold.
pub fn best_threshold_item_accuracy(pairs: &[(f64, f64)], kind: ScoreKind) -> usize {
    candidate_thresholds(pairs)
        .into_iter()
        .map(|t| {
            pairs
                .iter()
                .map(|&(g, i)| usize::from(kind.accepts(g, t)) + usize::from(!kind.accepts(i, t)))
                .sum()
        })
        .max()
        .unwrap_or(0)
}

/// Best number of pairs classified entirely correctly (genuine accepted and
/// imposter rejected) under a single global threshold.
pub fn best_threshold_pair_accuracy(pairs: &[(f64, f64)], kind: ScoreKind) -> usize {
    candidate_thresholds(pairs)
        .into_iter()
        .map(|t| {
            pairs
                .iter()
                .filter(|&&(g, i)| kind.accepts(g, t) && !kind.accepts(i, t))
                .count()
        })
        .max()
        .unwrap_or(0)
}
