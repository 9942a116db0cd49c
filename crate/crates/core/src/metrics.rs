//! Concentration measures over contribution volumes: Lorenz curves, Gini,
//! q%-volume originators and the degree/effort rank correlation.

use std::io::{self, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{DegreeKind, EffortProfile, Graph};

/// Quantiles reported when the caller does not choose any.
pub const DEFAULT_Q_GRID: [f64; 3] = [0.5, 0.75, 0.9];

/// Relative slack when comparing cumulative shares against `q`.
const SHARE_SLACK: f64 = 1e-12;

/// Cumulative share held by the top `x` of the audience, from `(0, 0)` to `(1, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LorenzCurve {
    pub points: Vec<(f64, f64)>,
}

impl LorenzCurve {
    /// Population fraction at the first point whose share reaches `q`.
    pub fn first_crossing(&self, q: f64) -> f64 {
        self.points
            .iter()
            .find(|(_, share)| *share >= q * (1.0 - SHARE_SLACK))
            .map_or(1.0, |(x, _)| *x)
    }

    /// Share held by the top `x` fraction, interpolating linearly between points.
    pub fn share_at(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        for pair in self.points.windows(2) {
            let ((x0, s0), (x1, s1)) = (pair[0], pair[1]);
            if x <= x1 {
                return s0 + (s1 - s0) * (x - x0) / (x1 - x0);
            }
        }
        1.0
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "population_fraction,cumulative_share")?;
        for (x, s) in &self.points {
            writeln!(out, "{x},{s}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OriginatorFraction {
    pub q: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationSummary {
    pub gini: f64,
    pub q_volume_originators: Vec<OriginatorFraction>,
    pub audience_size: usize,
}

impl ConcentrationSummary {
    pub fn write_originators_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "q,fraction")?;
        for o in &self.q_volume_originators {
            writeln!(out, "{},{}", o.q, o.fraction)?;
        }
        Ok(())
    }
}

fn check_volumes(volumes: &[f64], audience_size: usize) -> Result<f64> {
    if volumes.is_empty() {
        return Err(Error::EmptyInput("volumes".into()));
    }
    if let Some(v) = volumes.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::Domain(format!(
            "volumes must be finite and >= 0, got {v}"
        )));
    }
    if audience_size < volumes.len() {
        return Err(Error::InvalidParameter(format!(
            "audience size {audience_size} is smaller than the {} contributors",
            volumes.len()
        )));
    }
    let total: f64 = volumes.iter().sum();
    if total <= 0.0 {
        return Err(Error::NoVolume);
    }
    Ok(total)
}

fn check_q(q: f64) -> Result<()> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "q must lie in (0, 1), got {q}"
        )));
    }
    Ok(())
}

/// Volumes in descending order; equal volumes keep their input order.
fn descending(volumes: &[f64]) -> Vec<f64> {
    let mut sorted = volumes.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted
}

/// Lorenz curve of `volumes` over an audience padded with zero contributors.
pub fn lorenz(volumes: &[f64], audience_size: usize) -> Result<LorenzCurve> {
    let total = check_volumes(volumes, audience_size)?;
    let sorted = descending(volumes);
    let n = audience_size as f64;
    let mut points = Vec::with_capacity(audience_size + 1);
    points.push((0.0, 0.0));
    let mut cumulative = 0.0;
    for k in 1..=audience_size {
        cumulative += sorted.get(k - 1).copied().unwrap_or(0.0);
        points.push((k as f64 / n, cumulative / total));
    }
    if let Some(last) = points.last_mut() {
        *last = (1.0, 1.0);
    }
    Ok(LorenzCurve { points })
}

/// Smallest fraction of the audience whose combined volume reaches share `q`.
pub fn volume_originators(volumes: &[f64], audience_size: usize, q: f64) -> Result<f64> {
    check_q(q)?;
    let total = check_volumes(volumes, audience_size)?;
    let target = q * total * (1.0 - SHARE_SLACK);
    let mut cumulative = 0.0;
    for (k, v) in descending(volumes).iter().enumerate() {
        cumulative += v;
        if cumulative >= target {
            return Ok((k + 1) as f64 / audience_size as f64);
        }
    }
    Ok(volumes.len() as f64 / audience_size as f64)
}

/// One minus twice the trapezoidal area under the ascending Lorenz curve.
pub fn gini(volumes: &[f64], audience_size: usize) -> Result<f64> {
    let total = check_volumes(volumes, audience_size)?;
    let mut ascending = descending(volumes);
    ascending.reverse();
    let mut area = 0.0;
    let mut previous = 0.0;
    let mut cumulative = 0.0;
    for v in &ascending {
        cumulative += v;
        let share = cumulative / total;
        area += previous + share;
        previous = share;
    }
    // zero-volume padding sits at the bottom and adds no area
    let area = area / (2.0 * audience_size as f64);
    Ok((1.0 - 2.0 * area).clamp(0.0, 1.0))
}

pub fn concentration_summary(
    volumes: &[f64],
    audience_size: usize,
    qs: &[f64],
) -> Result<ConcentrationSummary> {
    let q_volume_originators = qs
        .iter()
        .map(|&q| {
            volume_originators(volumes, audience_size, q)
                .map(|fraction| OriginatorFraction { q, fraction })
        })
        .collect::<Result<_>>()?;
    Ok(ConcentrationSummary {
        gini: gini(volumes, audience_size)?,
        q_volume_originators,
        audience_size,
    })
}

/// Average ranks, ties sharing the mean of the positions they span (1-based).
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if syy == 0.0 {
        return 0.0;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Spearman correlation between node degree and effort, with midrank ties.
/// A constant effort profile gives 0.
pub fn degree_effort_correlation(
    graph: &Graph,
    profile: &EffortProfile,
    kind: DegreeKind,
) -> Result<f64> {
    let n = graph.node_count();
    if profile.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: profile.len(),
        });
    }
    if n < 3 {
        return Err(Error::InvalidParameter(format!(
            "correlation needs n >= 3, got {n}"
        )));
    }
    let degrees: Vec<f64> = graph.degrees(kind).into_iter().map(|d| d as f64).collect();
    if degrees.iter().all(|&d| d == degrees[0]) {
        return Err(Error::UndefinedCorrelation(
            "degree sequence is constant".into(),
        ));
    }
    Ok(pearson(&midranks(&degrees), &midranks(profile.as_slice())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{solve, SolverConfig};
    use crate::graph::{make_family, GraphFamily};
    use crate::numerics::ModelParams;
    use proptest::prelude::*;

    /// Mean absolute difference over all ordered pairs, divided by twice the mean.
    fn gini_pairwise(volumes: &[f64], audience: usize) -> f64 {
        let mut padded = volumes.to_vec();
        padded.resize(audience, 0.0);
        let n = audience as f64;
        let mean = padded.iter().sum::<f64>() / n;
        let diff: f64 = padded
            .iter()
            .flat_map(|a| padded.iter().map(move |b| (a - b).abs()))
            .sum();
        diff / (2.0 * n * n * mean)
    }

    #[test]
    fn lorenz_examples() {
        let diag = lorenz(&[1.0; 4], 4).unwrap();
        for (x, s) in &diag.points {
            assert!((x - s).abs() < 1e-15);
        }
        let single = lorenz(&[1.0], 100).unwrap();
        assert_eq!(single.points.len(), 101);
        assert_eq!(single.points[1], (0.01, 1.0));
        assert!(single.points[1..].iter().all(|(_, s)| *s == 1.0));
        let c = lorenz(&[6.0, 3.0, 1.0], 3).unwrap();
        let expected = [(0.0, 0.0), (1.0 / 3.0, 0.6), (2.0 / 3.0, 0.9), (1.0, 1.0)];
        for (p, e) in c.points.iter().zip(expected) {
            assert!((p.0 - e.0).abs() < 1e-15 && (p.1 - e.1).abs() < 1e-15);
        }
    }

    #[test]
    fn no_volume() {
        assert_eq!(lorenz(&[0.0, 0.0], 2), Err(Error::NoVolume));
        assert_eq!(
            gini(&[0.0], 5).unwrap_err().to_string(),
            "no volume to distribute"
        );
        assert!(volume_originators(&[0.0], 1, 0.5).is_err());
        assert!(lorenz(&[1.0, 2.0], 1).is_err());
        assert!(lorenz(&[-1.0, 2.0], 3).is_err());
    }

    #[test]
    fn originator_examples() {
        assert!((volume_originators(&[1.0; 10], 10, 0.9).unwrap() - 0.9).abs() < 1e-15);
        assert!((volume_originators(&[9.0, 1.0], 100, 0.9).unwrap() - 0.01).abs() < 1e-15);
        assert!((volume_originators(&[6.0, 3.0, 1.0], 3, 0.9).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(volume_originators(&[1.0], 1, 1.0).is_err());
        assert!(volume_originators(&[1.0], 1, 0.0).is_err());
    }

    #[test]
    fn gini_examples() {
        assert_eq!(gini(&[2.0; 7], 7).unwrap(), 0.0);
        for n in [1usize, 2, 5, 100] {
            let g = gini(&[1.0], n).unwrap();
            assert!((g - (n as f64 - 1.0) / n as f64).abs() < 1e-12);
        }
        let g = gini(&[6.0, 3.0, 1.0], 3).unwrap();
        assert!((g - 1.0 / 3.0).abs() < 1e-15);
        assert!((gini_pairwise(&[6.0, 3.0, 1.0], 3) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn summary_and_csv() {
        let s = concentration_summary(&[6.0, 3.0, 1.0], 3, &DEFAULT_Q_GRID).unwrap();
        assert_eq!(s.audience_size, 3);
        assert_eq!(s.q_volume_originators.len(), 3);
        let mut buf = Vec::new();
        s.write_originators_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("q,fraction\n0.5,0.3333333333333333\n"));
        let mut buf = Vec::new();
        lorenz(&[1.0, 1.0], 2).unwrap().write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "population_fraction,cumulative_share\n0,0\n0.5,0.5\n1,1\n"
        );
    }

    #[test]
    fn midrank_ties() {
        assert_eq!(
            midranks(&[10.0, 20.0, 10.0, 30.0]),
            vec![1.5, 3.0, 1.5, 4.0]
        );
    }

    #[test]
    fn star_equilibrium_is_perfectly_anticorrelated() {
        let g = make_family(&GraphFamily::Star { n: 5 }, 0).unwrap();
        for tau in [0.3, 1.0, 4.0] {
            let p = ModelParams::normalized(1.0, tau).unwrap();
            let r = solve(&g, &p, &SolverConfig::default()).unwrap();
            let rho = degree_effort_correlation(&g, &r.profile, DegreeKind::Out).unwrap();
            assert!((rho + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn correlation_edge_cases() {
        let star = make_family(&GraphFamily::Star { n: 6 }, 0).unwrap();
        let flat = EffortProfile::constant(6, 0.4).unwrap();
        assert_eq!(
            degree_effort_correlation(&star, &flat, DegreeKind::Out).unwrap(),
            0.0
        );
        let cycle = make_family(&GraphFamily::Cycle { n: 6 }, 0).unwrap();
        assert!(matches!(
            degree_effort_correlation(&cycle, &flat, DegreeKind::Out),
            Err(Error::UndefinedCorrelation(_))
        ));
        let tiny = make_family(&GraphFamily::Star { n: 2 }, 0).unwrap();
        assert!(
            degree_effort_correlation(&tiny, &EffortProfile::zeros(2), DegreeKind::Out).is_err()
        );
    }

    fn volumes() -> impl Strategy<Value = (Vec<f64>, usize)> {
        (prop::collection::vec(0.0_f64..100.0, 1..40), 0usize..40)
            .prop_filter("needs volume", |(v, _)| v.iter().sum::<f64>() > 1e-6)
    }

    proptest! {
        #[test]
        fn lorenz_shape((v, pad) in volumes()) {
            let c = lorenz(&v, v.len() + pad).unwrap();
            prop_assert_eq!(c.points[0], (0.0, 0.0));
            prop_assert_eq!(*c.points.last().unwrap(), (1.0, 1.0));
            let slopes: Vec<f64> = c.points.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
            for s in &slopes {
                prop_assert!(*s >= -1e-12);
            }
            for w in slopes.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9);
            }
        }

        #[test]
        fn originators_match_first_crossing((v, pad) in volumes(), q in 0.01_f64..0.99) {
            let audience = v.len() + pad;
            let c = lorenz(&v, audience).unwrap();
            let direct = volume_originators(&v, audience, q).unwrap();
            prop_assert!((direct - c.first_crossing(q)).abs() < 1e-12);
        }

        #[test]
        fn originators_nondecreasing_in_q((v, pad) in volumes(), a in 0.01_f64..0.99, b in 0.01_f64..0.99) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let audience = v.len() + pad;
            prop_assert!(volume_originators(&v, audience, lo).unwrap() <= volume_originators(&v, audience, hi).unwrap());
        }

        #[test]
        fn gini_matches_pairwise_and_scales((v, pad) in volumes(), k in 0.01_f64..1000.0) {
            let audience = v.len() + pad;
            let g = gini(&v, audience).unwrap();
            prop_assert!((g - gini_pairwise(&v, audience)).abs() < 1e-9);
            let scaled: Vec<f64> = v.iter().map(|x| x * k).collect();
            prop_assert!((g - gini(&scaled, audience).unwrap()).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&g));
        }

        #[test]
        fn padding_concentrates((v, pad) in volumes(), extra in 1usize..20, x in 0.0_f64..1.0) {
            let audience = v.len() + pad;
            prop_assert!(gini(&v, audience + extra).unwrap() >= gini(&v, audience).unwrap() - 1e-12);
            let before = lorenz(&v, audience).unwrap();
            let after = lorenz(&v, audience + extra).unwrap();
            prop_assert!(after.share_at(x) >= before.share_at(x) - 1e-12);
        }
    }
}
