//! Digitized Doppler traces: parsing, cleaning, heart-rate estimation and
//! resampling onto a fixed number of steps.

use thiserror::Error;

use crate::ids::{CaseId, VesselId};
use crate::scalar::{mean, Real};

/// Step counts a resampled trace may use.
pub const STEP_COUNTS: [usize; 2] = [SINGLE_CYCLE_STEPS, MULTI_CYCLE_STEPS];
pub const SINGLE_CYCLE_STEPS: usize = 200;
pub const MULTI_CYCLE_STEPS: usize = 350;

/// Default magnitude threshold, relative to the trace peak, below which a
/// sample is treated as diastolic and clamped to zero.
pub const DEFAULT_DIASTOLE_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TraceError {
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("trace needs at least 2 distinct points, found {found}")]
    InsufficientData { found: usize },
    #[error("trace times must be strictly increasing (index {index})")]
    NonMonotonicTime { index: usize },
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("trace is identically zero")]
    DegenerateTrace,
    #[error("diastole fraction {0} outside [0, 1)")]
    InvalidDiastoleFraction(f64),
    #[error("heart rate estimation needs at least 2 peaks, found {found}")]
    InsufficientPeaks { found: usize },
    #[error("peak times must be strictly increasing (index {index})")]
    UnorderedPeaks { index: usize },
    #[error("step count {0} is not one of 200 or 350")]
    InvalidStepCount(usize),
    #[error("heart rate must be positive and finite, got {0}")]
    InvalidHeartRate(f64),
    #[error("trace spans no time")]
    EmptyInterval,
    #[error("negative velocity at index {index}; clean the trace before resampling")]
    NegativeVelocity { index: usize },
    #[error("invalid synthetic waveform parameter: {0}")]
    InvalidSynthParameter(&'static str),
}

/// Digitizer output for one vessel and case, in acquisition time.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTrace<T> {
    points: Vec<(T, T)>,
    pub vessel: VesselId,
    pub case: CaseId,
    pub source: String,
}

impl<T: Real> RawTrace<T> {
    pub fn new(
        points: Vec<(T, T)>,
        vessel: VesselId,
        case: CaseId,
        source: impl Into<String>,
    ) -> Result<Self, TraceError> {
        if points.len() < 2 {
            return Err(TraceError::InsufficientData { found: points.len() });
        }
        for (index, &(t, v)) in points.iter().enumerate() {
            if !t.is_finite() || !v.is_finite() {
                return Err(TraceError::NonFinite { index });
            }
            if index > 0 && t <= points[index - 1].0 {
                return Err(TraceError::NonMonotonicTime { index });
            }
        }
        Ok(Self {
            points,
            vessel,
            case,
            source: source.into(),
        })
    }

    pub fn points(&self) -> &[(T, T)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn start_time(&self) -> T {
        self.points[0].0
    }

    pub fn end_time(&self) -> T {
        self.points[self.points.len() - 1].0
    }

    pub fn duration(&self) -> T {
        self.end_time() - self.start_time()
    }
}

/// Parses comma-separated `time,velocity` digitizer output.
///
/// A first line whose cells are all non-numeric is treated as a header.
/// Rows are sorted by time and repeated time stamps keep their first
/// occurrence. Row numbers in errors are 1-based line numbers.
pub fn parse_digitizer_csv<T: Real>(content: &str, vessel: VesselId, case: CaseId) -> Result<RawTrace<T>, TraceError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(content.as_bytes());

    let mut points: Vec<(T, T)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| TraceError::Parse {
            row: e.position().map_or(i + 1, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let row = record.position().map_or(i + 1, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let is_first = points.is_empty() && i == 0;
        if is_first && record.iter().all(|cell| cell.parse::<f64>().is_err()) {
            continue;
        }
        if record.len() != 2 {
            return Err(TraceError::Parse {
                row,
                message: format!("expected 2 columns, found {}", record.len()),
            });
        }
        let cell = |col: usize| -> Result<T, TraceError> {
            let text = &record[col];
            let value: T = text.parse().map_err(|_| TraceError::Parse {
                row,
                message: format!("non-numeric value `{text}` in column {}", col + 1),
            })?;
            if !value.is_finite() {
                return Err(TraceError::Parse {
                    row,
                    message: format!("non-finite value `{text}` in column {}", col + 1),
                });
            }
            Ok(value)
        };
        let t = cell(0)?;
        let v = cell(1)?;
        points.push((t, v));
    }

    // Stable sort keeps the first occurrence of a repeated time stamp first.
    points.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite times"));
    points.dedup_by(|later, earlier| later.0 == earlier.0);
    if points.len() < 2 {
        return Err(TraceError::InsufficientData { found: points.len() });
    }
    RawTrace::new(points, vessel, case, "digitizer_csv")
}

/// Shifts the trace to start at zero, flips away-from-probe traces, and
/// clamps diastolic and residual negative samples to zero.
pub fn clean_trace<T: Real>(raw: &RawTrace<T>, diastole_fraction: f64) -> Result<RawTrace<T>, TraceError> {
    if !(0.0..1.0).contains(&diastole_fraction) {
        return Err(TraceError::InvalidDiastoleFraction(diastole_fraction));
    }
    let peak = raw.points.iter().map(|p| p.1.abs()).fold(T::zero(), T::max);
    if peak == T::zero() {
        return Err(TraceError::DegenerateTrace);
    }
    let velocities: Vec<T> = raw.points.iter().map(|p| p.1).collect();
    let flip = mean(&velocities) < T::zero();
    let threshold = T::lit(diastole_fraction) * peak;
    let t0 = raw.start_time();

    let points = raw
        .points
        .iter()
        .map(|&(t, v)| {
            let v = if flip { -v } else { v };
            let v = if v.abs() < threshold || v < T::zero() {
                T::zero()
            } else {
                v
            };
            (t - t0, v)
        })
        .collect();
    Ok(RawTrace {
        points,
        vessel: raw.vessel,
        case: raw.case,
        source: raw.source.clone(),
    })
}

/// Heart rate in beats per minute from successive peak times in seconds.
pub fn estimate_heart_rate<T: Real>(peak_times: &[T]) -> Result<T, TraceError> {
    if peak_times.len() < 2 {
        return Err(TraceError::InsufficientPeaks {
            found: peak_times.len(),
        });
    }
    for (index, w) in peak_times.windows(2).enumerate() {
        if !w[0].is_finite() || !w[1].is_finite() {
            return Err(TraceError::NonFinite { index });
        }
        if w[1] <= w[0] {
            return Err(TraceError::UnorderedPeaks { index: index + 1 });
        }
    }
    let intervals: Vec<T> = peak_times.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(T::lit(60.0) / mean(&intervals))
}

/// Cardiac cycle length in seconds for a heart rate in beats per minute.
pub fn cycle_period<T: Real>(heart_rate: T) -> T {
    T::lit(60.0) / heart_rate
}

/// Picks 200 steps for traces covering about one cycle and 350 otherwise.
pub fn choose_step_count<T: Real>(raw: &RawTrace<T>, heart_rate: T) -> usize {
    let cycles = raw.duration() / cycle_period(heart_rate);
    if cycles < T::lit(1.5) {
        SINGLE_CYCLE_STEPS
    } else {
        MULTI_CYCLE_STEPS
    }
}

/// A trace on a uniform grid starting at zero, with its heart rate.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityTrace<T> {
    times: Vec<T>,
    velocities: Vec<T>,
    pub vessel: VesselId,
    pub case: CaseId,
    heart_rate: T,
}

impl<T: Real> VelocityTrace<T> {
    pub fn new(
        times: Vec<T>,
        velocities: Vec<T>,
        vessel: VesselId,
        case: CaseId,
        heart_rate: T,
    ) -> Result<Self, TraceError> {
        if !STEP_COUNTS.contains(&times.len()) {
            return Err(TraceError::InvalidStepCount(times.len()));
        }
        if velocities.len() != times.len() {
            return Err(TraceError::InvalidStepCount(velocities.len()));
        }
        if !(heart_rate.is_finite() && heart_rate > T::zero()) {
            return Err(TraceError::InvalidHeartRate(heart_rate.to_f64_lossy()));
        }
        if times[0] != T::zero() {
            return Err(TraceError::NonMonotonicTime { index: 0 });
        }
        for (index, w) in times.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(TraceError::NonMonotonicTime { index: index + 1 });
            }
        }
        for (index, &v) in velocities.iter().enumerate() {
            if !v.is_finite() {
                return Err(TraceError::NonFinite { index });
            }
            if v < T::zero() {
                return Err(TraceError::NegativeVelocity { index });
            }
        }
        Ok(Self {
            times,
            velocities,
            vessel,
            case,
            heart_rate,
        })
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn velocities(&self) -> &[T] {
        &self.velocities
    }

    pub fn heart_rate(&self) -> T {
        self.heart_rate
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// `n` uniformly spaced times over `[0, span]`; the last is exactly `span`.
pub fn uniform_times<T: Real>(span: T, n: usize) -> Vec<T> {
    if n == 1 {
        return vec![T::zero()];
    }
    let last = T::count(n - 1);
    (0..n)
        .map(|i| if i + 1 == n { span } else { span * T::count(i) / last })
        .collect()
}

/// Piecewise-linear interpolation of `points` at `t`.
///
/// Knot times return the knot value exactly and results never leave the
/// range spanned by the two bracketing knots.
pub fn interpolate_linear<T: Real>(points: &[(T, T)], t: T) -> T {
    let first = points[0];
    let last = points[points.len() - 1];
    if t <= first.0 {
        return first.1;
    }
    if t >= last.0 {
        return last.1;
    }
    let upper = points.partition_point(|p| p.0 <= t);
    let (t0, v0) = points[upper - 1];
    if t0 == t {
        return v0;
    }
    let (t1, v1) = points[upper];
    let w = (t - t0) / (t1 - t0);
    let v = v0 + (v1 - v0) * w;
    v.max(v0.min(v1)).min(v0.max(v1))
}

/// Samples a raw trace at `n` uniform points over its time span, with the
/// output time axis starting at zero. Any `n >= 2` is accepted here; the
/// production entry point is [`resample_trace`].
pub fn interpolate_uniform<T: Real>(raw: &RawTrace<T>, n: usize) -> (Vec<T>, Vec<T>) {
    let t0 = raw.start_time();
    let times = uniform_times(raw.duration(), n);
    let values = times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            if i + 1 == n {
                raw.points[raw.len() - 1].1
            } else {
                interpolate_linear(&raw.points, t0 + t)
            }
        })
        .collect();
    (times, values)
}

pub fn resample_trace<T: Real>(raw: &RawTrace<T>, n: usize, heart_rate: T) -> Result<VelocityTrace<T>, TraceError> {
    if !STEP_COUNTS.contains(&n) {
        return Err(TraceError::InvalidStepCount(n));
    }
    if !(heart_rate.is_finite() && heart_rate > T::zero()) {
        return Err(TraceError::InvalidHeartRate(heart_rate.to_f64_lossy()));
    }
    if raw.duration() <= T::zero() {
        return Err(TraceError::EmptyInterval);
    }
    if let Some(index) = raw.points.iter().position(|p| p.1 < T::zero()) {
        return Err(TraceError::NegativeVelocity { index });
    }
    let (times, velocities) = interpolate_uniform(raw, n);
    VelocityTrace::new(times, velocities, raw.vessel, raw.case, heart_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn raw(points: &[(f64, f64)]) -> RawTrace<f64> {
        RawTrace::new(points.to_vec(), VesselId::Coarctation, CaseId::PreIntervention, "test").unwrap()
    }

    #[test]
    fn parses_two_rows() {
        let t: RawTrace<f64> =
            parse_digitizer_csv("0.0,0.0\n0.1,1.2", VesselId::AscendingAorta, CaseId::PreIntervention).unwrap();
        assert_eq!(t.points(), &[(0.0, 0.0), (0.1, 1.2)]);
    }

    #[test]
    fn skips_header() {
        let t: RawTrace<f64> = parse_digitizer_csv(
            "t,v\n0.0,0.0\n0.05,0.8\n0.1,0.0",
            VesselId::AscendingAorta,
            CaseId::PreIntervention,
        )
        .unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.points()[1], (0.05, 0.8));
    }

    #[test]
    fn reports_bad_cell_row() {
        let err = parse_digitizer_csv::<f64>("0.0,abc", VesselId::Coarctation, CaseId::PreIntervention).unwrap_err();
        assert!(matches!(err, TraceError::Parse { row: 1, .. }), "{err:?}");
        let err = parse_digitizer_csv::<f64>(
            "time_s,velocity_m_per_s\n0.0,1\n0.1,x",
            VesselId::Coarctation,
            CaseId::PreIntervention,
        )
        .unwrap_err();
        assert!(matches!(err, TraceError::Parse { row: 3, .. }), "{err:?}");
    }

    #[test]
    fn too_few_rows() {
        let err = parse_digitizer_csv::<f64>("0.0,1.0\n", VesselId::Coarctation, CaseId::PreIntervention).unwrap_err();
        assert_eq!(err, TraceError::InsufficientData { found: 1 });
        let err =
            parse_digitizer_csv::<f64>("0.0,1.0\n0.0,2.0", VesselId::Coarctation, CaseId::PreIntervention).unwrap_err();
        assert_eq!(err, TraceError::InsufficientData { found: 1 });
    }

    #[test]
    fn sorts_and_keeps_first_duplicate() {
        let t: RawTrace<f64> = parse_digitizer_csv(
            "0.2,3\n0.1,1\n0.1,2\n0.0,0",
            VesselId::Coarctation,
            CaseId::PreIntervention,
        )
        .unwrap();
        assert_eq!(t.points(), &[(0.0, 0.0), (0.1, 1.0), (0.2, 3.0)]);
    }

    #[test]
    fn clean_shifts_time() {
        let c = clean_trace(&raw(&[(1.0, 0.0), (1.2, 2.0)]), 0.05).unwrap();
        assert_eq!(c.points()[0].0, 0.0);
        assert!((c.points()[1].0 - 0.2).abs() < 1e-15);
    }

    #[test]
    fn clean_inverts_coarctation() {
        let c = clean_trace(&raw(&[(0.0, 0.0), (0.1, -3.4), (0.2, 0.0)]), 0.05).unwrap();
        let v: Vec<f64> = c.points().iter().map(|p| p.1).collect();
        assert_eq!(v, vec![0.0, 3.4, 0.0]);
    }

    #[test]
    fn clean_clamps_diastole() {
        let c = clean_trace(&raw(&[(0.0, 0.0), (0.1, 0.02), (0.2, 1.0), (0.3, 0.01)]), 0.05).unwrap();
        let v: Vec<f64> = c.points().iter().map(|p| p.1).collect();
        assert_eq!(v, vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn clean_rejects_zero_trace_and_bad_fraction() {
        assert_eq!(
            clean_trace(&raw(&[(0.0, 0.0), (0.1, 0.0)]), 0.05).unwrap_err(),
            TraceError::DegenerateTrace
        );
        assert!(matches!(
            clean_trace(&raw(&[(0.0, 0.0), (0.1, 1.0)]), 1.0),
            Err(TraceError::InvalidDiastoleFraction(_))
        ));
    }

    #[test]
    fn heart_rate_examples() {
        assert!((estimate_heart_rate(&[0.0_f64, 0.5, 1.0, 1.5, 2.0]).unwrap() - 120.0).abs() < 1e-12);
        let hr = estimate_heart_rate(&[0.0_f64, 0.45, 0.88, 1.32]).unwrap();
        assert!((hr - 60.0 / 0.44).abs() < 1e-9);
        assert!((hr - 136.36).abs() < 0.01);
        assert!((cycle_period(135.6_f64) - 0.4425).abs() < 1e-3);
        assert_eq!(
            estimate_heart_rate(&[0.3]).unwrap_err(),
            TraceError::InsufficientPeaks { found: 1 }
        );
        assert!(matches!(
            estimate_heart_rate(&[0.3, 0.3]),
            Err(TraceError::UnorderedPeaks { index: 1 })
        ));
    }

    #[test]
    fn interpolation_kernel_at_five_steps() {
        let r = raw(&[(0.0, 0.0), (0.2, 2.0), (0.4, 0.0)]);
        let (times, v) = interpolate_uniform(&r, 5);
        for (got, want) in v.iter().zip([0.0, 1.0, 2.0, 1.0, 0.0]) {
            assert!((got - want).abs() < 1e-12, "{v:?}");
        }
        assert_eq!(times[0], 0.0);
        assert_eq!(times[4], 0.4);
    }

    #[test]
    fn resample_rejects_other_step_counts() {
        let r = raw(&[(0.0, 0.0), (0.2, 2.0), (0.4, 0.0)]);
        assert_eq!(
            resample_trace(&r, 5, 120.0).unwrap_err(),
            TraceError::InvalidStepCount(5)
        );
        let t = resample_trace(&r, 200, 120.0).unwrap();
        assert_eq!(t.len(), 200);
        assert_eq!(t.times()[199], 0.4);
        let neg = raw(&[(0.0, -1.0), (0.2, 2.0)]);
        assert!(matches!(
            resample_trace(&neg, 200, 120.0),
            Err(TraceError::NegativeVelocity { index: 0 })
        ));
    }

    #[test]
    fn step_count_rule() {
        let one = raw(&[(0.0, 0.0), (0.5, 1.0)]);
        let three = raw(&[(0.0, 0.0), (1.5, 1.0)]);
        assert_eq!(choose_step_count(&one, 120.0), 200);
        assert_eq!(choose_step_count(&three, 120.0), 350);
    }

    fn arb_trace() -> impl Strategy<Value = RawTrace<f64>> {
        (
            -5.0..5.0f64,
            prop::collection::vec((0.001..0.2f64, -4.0..4.0f64), 2..40),
        )
            .prop_map(|(start, steps)| {
                let mut t = start;
                let pts = steps
                    .into_iter()
                    .map(|(dt, v)| {
                        t += dt;
                        (t, v)
                    })
                    .collect();
                RawTrace::new(pts, VesselId::Coarctation, CaseId::PostIntervention, "prop").unwrap()
            })
    }

    /// Independent interpolation oracle: linear scan for the bracketing
    /// segment, convex combination of its endpoints.
    fn brute_interp(points: &[(f64, f64)], t: f64) -> f64 {
        for w in points.windows(2) {
            let ((t0, v0), (t1, v1)) = (w[0], w[1]);
            if t >= t0 && t <= t1 {
                let a = (t - t0) / (t1 - t0);
                return (1.0 - a) * v0 + a * v1;
            }
        }
        if t < points[0].0 {
            points[0].1
        } else {
            points[points.len() - 1].1
        }
    }

    proptest! {
        #[test]
        fn clean_output_nonnegative_from_zero(r in arb_trace(), frac in 0.0..0.99f64) {
            if let Ok(c) = clean_trace(&r, frac) {
                prop_assert_eq!(c.points()[0].0, 0.0);
                prop_assert!(c.points().iter().all(|p| p.1 >= 0.0));
            }
        }

        #[test]
        fn interpolation_bounded_and_matches_oracle(r in arb_trace(), n in prop::sample::select(vec![5usize, 17, 200, 350])) {
            let (times, v) = interpolate_uniform(&r, n);
            let lo = r.points().iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
            let hi = r.points().iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(v[0], r.points()[0].1);
            prop_assert_eq!(v[n - 1], r.points()[r.len() - 1].1);
            for (&t, &x) in times.iter().zip(&v) {
                prop_assert!(x >= lo && x <= hi);
                let expected = brute_interp(r.points(), r.start_time() + t);
                prop_assert!((x - expected).abs() <= 1e-9 * (1.0 + expected.abs()));
            }
        }

        #[test]
        fn heart_rate_shift_invariant(base in prop::collection::vec(0.2..1.5f64, 1..6), shift in -100.0..100.0f64) {
            let mut peaks = vec![0.0];
            for d in &base {
                let last = *peaks.last().unwrap();
                peaks.push(last + d);
            }
            let shifted: Vec<f64> = peaks.iter().map(|p| p + shift).collect();
            let a = estimate_heart_rate(&peaks).unwrap();
            let b = estimate_heart_rate(&shifted).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a);
        }
    }
}
