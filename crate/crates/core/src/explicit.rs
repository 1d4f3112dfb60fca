//! Explicit space mapping: star base sets, the mapped surrogate
//! `A·Rc(B·x + c) + d`, joint parameter extraction, output-mapping
//! interpolation, validation and surrogate optimization.
//!
//! `A` and `d` hold one entry per frequency. On a complex (re/im) channel
//! both parts of point `j` use `A_j` and `d_j`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::design::optimize_design;
use crate::error::{Error, Result};
use crate::model::{record_fine, DesignModel, FineRecord};
use crate::optimizer::{least_squares, Bounds, OptReport, OptimizerSettings};
use crate::response::{to_db, vector_distance, Channel, ChannelSelector, FrequencyGrid, Representation, Response};
use crate::spec::{objective, DesignSpec};

/// Nodes closer than this (in grid steps) are treated as coincident.
const NODE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionSpec {
    reference: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lower: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    upper: Option<Vec<f64>>,
}

/// Box around a reference design. Given either as half-widths `delta` or as
/// explicit `lower`/`upper` bounds (kept verbatim).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RegionSpec", into = "RegionSpec")]
pub struct RegionOfInterest {
    reference: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<RegionSpec> for RegionOfInterest {
    type Error = Error;

    fn try_from(spec: RegionSpec) -> Result<Self> {
        match (spec.delta, spec.lower, spec.upper) {
            (Some(delta), None, None) => RegionOfInterest::new(spec.reference, &delta),
            (None, Some(lower), Some(upper)) => RegionOfInterest::from_bounds(spec.reference, lower, upper),
            _ => Err(Error::InvalidInput(
                "region needs either `delta` or both `lower` and `upper`".into(),
            )),
        }
    }
}

impl From<RegionOfInterest> for RegionSpec {
    fn from(r: RegionOfInterest) -> Self {
        RegionSpec {
            reference: r.reference,
            delta: None,
            lower: Some(r.lower),
            upper: Some(r.upper),
        }
    }
}

impl RegionOfInterest {
    pub fn new(reference: Vec<f64>, delta: &[f64]) -> Result<Self> {
        if delta.len() != reference.len() {
            return Err(Error::Dimension {
                expected: reference.len(),
                got: delta.len(),
            });
        }
        if delta.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(Error::InvalidInput(format!(
                "region half-widths must be positive: {delta:?}"
            )));
        }
        let lower = reference.iter().zip(delta).map(|(x, d)| x - d).collect();
        let upper = reference.iter().zip(delta).map(|(x, d)| x + d).collect();
        Self::from_bounds(reference, lower, upper)
    }

    pub fn from_bounds(reference: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n = reference.len();
        if lower.len() != n || upper.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: if lower.len() != n { lower.len() } else { upper.len() },
            });
        }
        for i in 0..n {
            if !(lower[i] < reference[i] && reference[i] < upper[i]) || !(upper[i] - lower[i]).is_finite() {
                return Err(Error::InvalidInput(format!(
                    "region coordinate {i}: need {} < {} < {}",
                    lower[i], reference[i], upper[i]
                )));
            }
        }
        Ok(RegionOfInterest {
            reference,
            lower,
            upper,
        })
    }

    pub fn dim(&self) -> usize {
        self.reference.len()
    }

    pub fn reference(&self) -> &[f64] {
        &self.reference
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Half-widths `(upper - lower) / 2`.
    pub fn delta(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (u - l)).collect()
    }

    pub fn bounds(&self) -> Bounds {
        Bounds {
            lower: self.lower.clone(),
            upper: self.upper.clone(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.bounds().contains(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointKind {
    Reference,
    StarMinus,
    StarPlus,
    Corner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseSet {
    pub points: Vec<Vec<f64>>,
    pub kinds: Vec<PointKind>,
}

impl BaseSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Reference point, then `x0 ∓ δ_i e_i` per axis (minus first), then the
/// `2^n` corners in binary-counter order when `include_corners` is set (bit
/// `i` of the counter selects the upper bound on axis `i`).
pub fn star_base_set(region: &RegionOfInterest, include_corners: bool) -> BaseSet {
    let n = region.dim();
    let mut points = vec![region.reference.clone()];
    let mut kinds = vec![PointKind::Reference];
    for i in 0..n {
        for (bound, kind) in [
            (region.lower[i], PointKind::StarMinus),
            (region.upper[i], PointKind::StarPlus),
        ] {
            let mut p = region.reference.clone();
            p[i] = bound;
            points.push(p);
            kinds.push(kind);
        }
    }
    if include_corners {
        for mask in 0..(1usize << n) {
            let p = (0..n)
                .map(|i| {
                    if mask >> i & 1 == 1 {
                        region.upper[i]
                    } else {
                        region.lower[i]
                    }
                })
                .collect();
            points.push(p);
            kinds.push(PointKind::Corner);
        }
    }
    BaseSet { points, kinds }
}

/// `count` uniform points inside the region from a seeded generator.
pub fn random_test_points(region: &RegionOfInterest, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            region
                .lower
                .iter()
                .zip(&region.upper)
                .map(|(l, u)| l + (u - l) * rng.random::<f64>())
                .collect()
        })
        .collect()
}

/// Parameters of the explicit mapping `A·Rc(B·x + c) + d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappingSet {
    pub channel: ChannelSelector,
    pub grid: FrequencyGrid,
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
}

impl MappingSet {
    /// `B = I, c = 0, A = 1, d = 0`.
    pub fn identity(n: usize, grid: FrequencyGrid, channel: ChannelSelector) -> Self {
        let m = grid.len();
        MappingSet {
            channel,
            grid,
            a: vec![1.0; m],
            b: (0..n)
                .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect(),
            c: vec![0.0; n],
            d: vec![0.0; m],
        }
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m) = (self.dim(), self.grid.len());
        if self.a.len() != m || self.d.len() != m {
            return Err(Error::Dimension {
                expected: m,
                got: if self.a.len() != m { self.a.len() } else { self.d.len() },
            });
        }
        if self.b.len() != n || self.b.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidInput(format!("B must be {n}x{n}")));
        }
        Ok(())
    }

    /// `B·x + c`.
    pub fn map_input(&self, x: &[f64]) -> Vec<f64> {
        self.b
            .iter()
            .zip(&self.c)
            .map(|(row, ci)| row.iter().zip(x).map(|(b, v)| b * v).sum::<f64>() + ci)
            .collect()
    }

    /// Flattened parameters `[A, B (row-major), c, d]`.
    fn to_params(&self) -> Vec<f64> {
        let mut out = self.a.clone();
        out.extend(self.b.iter().flatten());
        out.extend(&self.c);
        out.extend(&self.d);
        out
    }

    fn from_params(theta: &[f64], n: usize, grid: &FrequencyGrid, channel: ChannelSelector) -> Self {
        let m = grid.len();
        let (a, rest) = theta.split_at(m);
        let (b, rest) = rest.split_at(n * n);
        let (c, d) = rest.split_at(n);
        MappingSet {
            channel,
            grid: grid.clone(),
            a: a.to_vec(),
            b: b.chunks(n).map(<[f64]>::to_vec).collect(),
            c: c.to_vec(),
            d: d.to_vec(),
        }
    }

    fn apply_output(&self, values: &mut [f64]) {
        let per = self.channel.entries_per_point();
        for (j, chunk) in values.chunks_mut(per).enumerate() {
            for v in chunk {
                *v = self.a[j] * *v + self.d[j];
            }
        }
    }
}

fn check_mapped(x: &[f64], mapped: &[f64]) -> Result<()> {
    if mapped.iter().all(|v| v.is_finite() && *v > 0.0) {
        Ok(())
    } else {
        Err(Error::InvalidMappedPoint {
            x: x.to_vec(),
            mapped: mapped.to_vec(),
        })
    }
}

fn partner(channel: Channel) -> Option<Channel> {
    match channel {
        Channel::S12 => Some(Channel::S21),
        Channel::S21 => Some(Channel::S12),
        Channel::S11 | Channel::S22 => None,
    }
}

/// Mapped surrogate of a coarse model; usable wherever a [`DesignModel`] is.
#[derive(Debug, Clone, Copy)]
pub struct MappedSurrogate<'a, M: ?Sized> {
    coarse: &'a M,
    mapping: &'a MappingSet,
}

impl<'a, M: DesignModel + ?Sized> MappedSurrogate<'a, M> {
    pub fn new(coarse: &'a M, mapping: &'a MappingSet) -> Self {
        MappedSurrogate { coarse, mapping }
    }

    fn coarse_at_mapped(&self, x: &[f64], grid: &FrequencyGrid) -> Result<Response> {
        self.mapping.grid.ensure_same(grid)?;
        let mapped = self.mapping.map_input(x);
        check_mapped(x, &mapped)?;
        self.coarse.evaluate(&mapped, grid)
    }

    /// Mapped values of the selected channel.
    pub fn values(&self, x: &[f64]) -> Result<Vec<f64>> {
        let r = self.coarse_at_mapped(x, &self.mapping.grid)?;
        let mut v = self.mapping.channel.values(&r);
        self.mapping.apply_output(&mut v);
        Ok(v)
    }
}

impl<M: DesignModel + ?Sized> DesignModel for MappedSurrogate<'_, M> {
    fn dimension(&self) -> usize {
        self.mapping.dim()
    }

    /// Coarse response at `B·x + c` with the output mapping applied to the
    /// selected channel (and its reciprocal partner). On a dB channel each
    /// value is rescaled so its level becomes `A_j·level + d_j` at unchanged
    /// phase.
    fn evaluate(&self, x: &[f64], grid: &FrequencyGrid) -> Result<Response> {
        let r = self.coarse_at_mapped(x, grid)?;
        let m = self.mapping;
        let repr = m.channel.representation;
        Ok(r.map(|ch, j, v| {
            if ch != m.channel.channel && Some(ch) != partner(m.channel.channel) {
                return v;
            }
            match repr {
                Representation::MagnitudeDb => {
                    if v == num_complex::Complex64::new(0.0, 0.0) {
                        v
                    } else {
                        let level = to_db(v);
                        v * 10f64.powf(((m.a[j] - 1.0) * level + m.d[j]) / 20.0)
                    }
                }
                Representation::ComplexRi => v * m.a[j] + num_complex::Complex64::new(m.d[j], m.d[j]),
            }
        }))
    }
}

/// Channel values of the surrogate at `x`.
pub fn surrogate_eval<M: DesignModel + ?Sized>(x: &[f64], mapping: &MappingSet, coarse: &M) -> Result<Vec<f64>> {
    MappedSurrogate::new(coarse, mapping).values(x)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SurrogateReport {
    /// Distance to the fine response at each base point, identity mapping.
    pub base_before: Vec<f64>,
    /// Same after extraction.
    pub base_after: Vec<f64>,
    /// Coarse-vs-fine distance at each test point.
    pub test_coarse: Vec<f64>,
    /// Surrogate-vs-fine distance at each test point.
    pub test_surrogate: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extraction: Option<OptReport>,
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn mean_of(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

impl SurrogateReport {
    pub fn max_base_before(&self) -> f64 {
        max_of(&self.base_before)
    }

    pub fn max_base_after(&self) -> f64 {
        max_of(&self.base_after)
    }

    pub fn max_test_coarse(&self) -> f64 {
        max_of(&self.test_coarse)
    }

    pub fn max_test_surrogate(&self) -> f64 {
        max_of(&self.test_surrogate)
    }

    pub fn mean_test_coarse(&self) -> f64 {
        mean_of(&self.test_coarse)
    }

    pub fn mean_test_surrogate(&self) -> f64 {
        mean_of(&self.test_surrogate)
    }
}

fn fine_values(fine: &[Response], channel: ChannelSelector) -> Result<(FrequencyGrid, Vec<Vec<f64>>)> {
    let first = fine
        .first()
        .ok_or_else(|| Error::InvalidInput("no fine responses supplied".into()))?;
    let grid = first.grid().clone();
    let mut out = Vec::with_capacity(fine.len());
    for r in fine {
        r.grid().ensure_same(&grid)?;
        out.push(channel.values(r));
    }
    Ok((grid, out))
}

/// Jointly fits `A, B, c, d` so the surrogate matches `fine[k]` at every
/// base point, starting from and regularized toward the identity mapping.
pub fn extract_mapping<M: DesignModel + ?Sized>(
    base: &BaseSet,
    fine: &[Response],
    coarse: &M,
    channel: ChannelSelector,
    settings: &OptimizerSettings,
) -> Result<(MappingSet, SurrogateReport)> {
    if fine.len() != base.len() {
        return Err(Error::Dimension {
            expected: base.len(),
            got: fine.len(),
        });
    }
    let (grid, targets) = fine_values(fine, channel)?;
    let n = coarse.dimension();
    let identity = MappingSet::identity(n, grid.clone(), channel);
    let theta0 = identity.to_params();
    let total: usize = targets.iter().map(Vec::len).sum();

    let errors = |mapping: &MappingSet| -> Result<Vec<f64>> {
        base.points
            .iter()
            .zip(&targets)
            .map(|(x, t)| Ok(vector_distance(&surrogate_eval(x, mapping, coarse)?, t)))
            .collect()
    };
    let residuals = |theta: &[f64]| -> Vec<f64> {
        let mapping = MappingSet::from_params(theta, n, &grid, channel);
        let mut out = Vec::with_capacity(total);
        for (x, t) in base.points.iter().zip(&targets) {
            match surrogate_eval(x, &mapping, coarse) {
                Ok(v) => out.extend(v.iter().zip(t).map(|(s, f)| s - f)),
                Err(_) => return vec![f64::NAN; total],
            }
        }
        out
    };

    let base_before = errors(&identity)?;
    let opt = least_squares(&residuals, &theta0, &theta0, None, settings)?;
    let mapping = MappingSet::from_params(&opt.minimizer, n, &grid, channel);
    let base_after = errors(&mapping)?;
    Ok((
        mapping,
        SurrogateReport {
            base_before,
            base_after,
            extraction: Some(opt),
            ..SurrogateReport::default()
        },
    ))
}

/// Piecewise-linear interpolation of `A` and `d` onto `dense`. Dense points
/// that coincide with an anchor node take its value exactly.
pub fn interpolate_output_mapping(mapping: &MappingSet, dense: &FrequencyGrid) -> Result<MappingSet> {
    let anchor = &mapping.grid;
    let slack = NODE_TOL * anchor.step();
    if dense.f_min() < anchor.f_min() - slack || dense.f_max() > anchor.f_max() + slack {
        return Err(Error::Extrapolation {
            f_min: dense.f_min(),
            f_max: dense.f_max(),
            anchor_min: anchor.f_min(),
            anchor_max: anchor.f_max(),
        });
    }
    let last = anchor.len() - 1;
    let interp = |values: &[f64], f: f64| -> f64 {
        let t = (f - anchor.f_min()) / anchor.step();
        let nearest = t.round();
        if (t - nearest).abs() <= NODE_TOL {
            return values[(nearest as usize).min(last)];
        }
        let i = (t.floor() as usize).min(last - 1);
        let w = t - i as f64;
        (1.0 - w) * values[i] + w * values[i + 1]
    };
    Ok(MappingSet {
        channel: mapping.channel,
        grid: dense.clone(),
        a: dense.points().iter().map(|&f| interp(&mapping.a, f)).collect(),
        b: mapping.b.clone(),
        c: mapping.c.clone(),
        d: dense.points().iter().map(|&f| interp(&mapping.d, f)).collect(),
    })
}

/// Coarse and surrogate errors against fine responses at test points.
pub fn validate_surrogate<M: DesignModel + ?Sized>(
    mapping: &MappingSet,
    test_points: &[Vec<f64>],
    fine: &[Response],
    coarse: &M,
) -> Result<SurrogateReport> {
    if test_points.is_empty() {
        return Err(Error::InvalidInput("validation needs at least one test point".into()));
    }
    if fine.len() != test_points.len() {
        return Err(Error::Dimension {
            expected: test_points.len(),
            got: fine.len(),
        });
    }
    let channel = mapping.channel;
    let mut report = SurrogateReport::default();
    for (x, rf) in test_points.iter().zip(fine) {
        rf.grid().ensure_same(&mapping.grid)?;
        let target = channel.values(rf);
        let rc = coarse.evaluate(x, &mapping.grid)?;
        report.test_coarse.push(vector_distance(&channel.values(&rc), &target));
        report
            .test_surrogate
            .push(vector_distance(&surrogate_eval(x, mapping, coarse)?, &target));
    }
    Ok(report)
}

/// Minimizes the spec objective of the surrogate over the region.
pub fn optimize_surrogate<M: DesignModel + ?Sized>(
    mapping: &MappingSet,
    coarse: &M,
    spec: &DesignSpec,
    region: &RegionOfInterest,
    x_start: &[f64],
    settings: &OptimizerSettings,
) -> Result<OptReport> {
    mapping.validate()?;
    let surrogate = MappedSurrogate::new(coarse, mapping);
    optimize_design(&surrogate, spec, &mapping.grid, x_start, &region.bounds(), settings)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplicitSettings {
    pub channel: ChannelSelector,
    pub include_corners: bool,
    pub test_points: usize,
    pub seed: u64,
}

impl Default for ExplicitSettings {
    fn default() -> Self {
        ExplicitSettings {
            channel: ChannelSelector::db(Channel::S12),
            include_corners: false,
            test_points: 4,
            seed: 20_240_917,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitRun {
    pub base: BaseSet,
    pub test_points: Vec<Vec<f64>>,
    pub mapping: MappingSet,
    pub report: SurrogateReport,
    pub surrogate_opt: OptReport,
    /// Fine objective at the recommended design.
    pub confirmation_objective: f64,
    pub fine_records: Vec<FineRecord>,
}

impl ExplicitRun {
    /// Surrogate beats the raw coarse model at every test point taken together.
    pub fn validation_passed(&self) -> bool {
        self.report.max_test_surrogate() <= self.report.max_test_coarse()
    }
}

/// Full explicit flow: fine runs at the base set, extraction, validation
/// at seeded test points, surrogate optimization, one fine confirmation.
pub fn run_explicit_sm<C, F>(
    coarse: &C,
    fine: &F,
    spec: &DesignSpec,
    region: &RegionOfInterest,
    grid: &FrequencyGrid,
    settings: &ExplicitSettings,
    optimizer: &OptimizerSettings,
) -> Result<ExplicitRun>
where
    C: DesignModel + ?Sized,
    F: DesignModel + ?Sized,
{
    let mut records = Vec::new();
    let mut fine_eval = |label: String, x: &[f64]| record_fine(fine, grid, &mut records, label, x);

    let base = star_base_set(region, settings.include_corners);
    let base_fine = base
        .points
        .iter()
        .enumerate()
        .map(|(k, x)| fine_eval(format!("base_{k:02}"), x))
        .collect::<Result<Vec<_>>>()?;
    let (mapping, mut report) = extract_mapping(&base, &base_fine, coarse, settings.channel, optimizer)?;

    let test_points = random_test_points(region, settings.test_points, settings.seed);
    let test_fine = test_points
        .iter()
        .enumerate()
        .map(|(k, x)| fine_eval(format!("test_{k:02}"), x))
        .collect::<Result<Vec<_>>>()?;
    let validation = validate_surrogate(&mapping, &test_points, &test_fine, coarse)?;
    report.test_coarse = validation.test_coarse;
    report.test_surrogate = validation.test_surrogate;

    let surrogate_opt = optimize_surrogate(&mapping, coarse, spec, region, region.reference(), optimizer)?;
    let confirmation = fine_eval("confirm".into(), &surrogate_opt.minimizer)?;
    let confirmation_objective = objective(&confirmation, spec)?;

    Ok(ExplicitRun {
        base,
        test_points,
        mapping,
        report,
        surrogate_opt,
        confirmation_objective,
        fine_records: records,
    })
}
