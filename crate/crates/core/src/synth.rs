//! Synthetic Doppler-like traces standing in for patient recordings.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ids::{CaseId, VesselId};
use crate::scalar::Real;
use crate::trace::{cycle_period, RawTrace, TraceError};

/// Half-sine systolic pulse repeated every cardiac cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseWaveform<T> {
    pub heart_rate: T,
    pub peak_velocity: T,
    pub systole_fraction: T,
}

impl<T: Real> PulseWaveform<T> {
    pub fn period(&self) -> T {
        cycle_period(self.heart_rate)
    }

    /// Noise-free velocity at time `t` (seconds from the cycle origin).
    pub fn value_at(&self, t: T) -> T {
        let period = self.period();
        let phase = t - (t / period).floor() * period;
        let systole = self.systole_fraction * period;
        if phase < systole {
            self.peak_velocity * (T::PI() * phase / systole).sin().max(T::zero())
        } else {
            T::zero()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams<T> {
    pub heart_rate: T,
    pub peak_velocity: T,
    pub systole_fraction: T,
    pub n_cycles: usize,
    pub vessel: VesselId,
    pub case: CaseId,
    /// Peak-to-peak amplitude of uniform noise added to systolic samples.
    pub noise_amplitude: T,
    pub seed: u64,
    pub points_per_cycle: usize,
}

impl<T: Real> SynthParams<T> {
    pub fn new(heart_rate: T, peak_velocity: T, systole_fraction: T, vessel: VesselId, case: CaseId) -> Self {
        Self {
            heart_rate,
            peak_velocity,
            systole_fraction,
            n_cycles: 1,
            vessel,
            case,
            noise_amplitude: T::zero(),
            seed: 0,
            points_per_cycle: 100,
        }
    }
}

/// Samples `points_per_cycle` points per cycle plus the closing endpoint.
/// Diastolic samples are exactly zero; the output is a pure function of
/// the parameters.
pub fn synth_trace<T: Real>(params: &SynthParams<T>) -> Result<RawTrace<T>, TraceError> {
    if !(params.heart_rate > T::zero() && params.heart_rate.is_finite()) {
        return Err(TraceError::InvalidHeartRate(params.heart_rate.to_f64_lossy()));
    }
    if !(params.peak_velocity > T::zero()) {
        return Err(TraceError::InvalidSynthParameter("peak velocity must be positive"));
    }
    if !(params.systole_fraction > T::zero() && params.systole_fraction < T::one()) {
        return Err(TraceError::InvalidSynthParameter("systole fraction must lie in (0, 1)"));
    }
    if params.n_cycles == 0 || params.points_per_cycle < 2 {
        return Err(TraceError::InvalidSynthParameter(
            "need at least one cycle and two points per cycle",
        ));
    }
    if params.noise_amplitude < T::zero() {
        return Err(TraceError::InvalidSynthParameter(
            "noise amplitude must be non-negative",
        ));
    }

    let wave = PulseWaveform {
        heart_rate: params.heart_rate,
        peak_velocity: params.peak_velocity,
        systole_fraction: params.systole_fraction,
    };
    let period = wave.period();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let half = params.noise_amplitude.to_f64_lossy() / 2.0;
    let total = params.points_per_cycle * params.n_cycles;
    let per_cycle = T::count(params.points_per_cycle);

    let points = (0..=total)
        .map(|i| {
            let cycle = T::count(i / params.points_per_cycle);
            let within = T::count(i % params.points_per_cycle);
            let t = (cycle + within / per_cycle) * period;
            let mut v = wave.value_at(t);
            if v > T::zero() && half > 0.0 {
                v += T::lit(rng.random_range(-half..=half));
            }
            (t, v)
        })
        .collect();
    RawTrace::new(
        points,
        params.vessel,
        params.case,
        format!("synthetic seed={}", params.seed),
    )
}

/// One synthetic recording as a digitizer would deliver it: acquisition
/// time offset, Doppler sign convention, and the peak times read off the
/// image for heart-rate estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEntry<T> {
    pub name: String,
    pub trace: RawTrace<T>,
    pub peak_times: Vec<T>,
}

struct Recording {
    vessel: VesselId,
    case: CaseId,
    heart_rate: f64,
    cycles: usize,
}

fn base_peak(vessel: VesselId, case: CaseId) -> f64 {
    use CaseId::*;
    use VesselId::*;
    match (vessel, case) {
        (AscendingAorta, PreIntervention) => 1.30,
        (AscendingAorta, PostIntervention) => 1.10,
        (InnominateArtery, PreIntervention) => 1.15,
        (InnominateArtery, PostIntervention) => 1.00,
        (LeftCommonCarotid, PreIntervention) => 0.95,
        (LeftCommonCarotid, PostIntervention) => 0.90,
        (LeftSubclavian, PreIntervention) => 1.05,
        (LeftSubclavian, PostIntervention) => 0.95,
        (Coarctation, PreIntervention) => 3.40,
        (Coarctation, PostIntervention) => 1.90,
        (DescendingAorta, PreIntervention) => 0.80,
        (DescendingAorta, PostIntervention) => 1.15,
    }
}

/// Systolic duration shortens with heart rate roughly as the square root
/// of the cycle length; peak velocity rises mildly with heart rate.
pub fn physiological_waveform<T: Real>(vessel: VesselId, case: CaseId, heart_rate: T) -> PulseWaveform<T> {
    let hr = heart_rate.to_f64_lossy();
    let rr = 60.0 / hr;
    let systole = 0.28 * rr.sqrt();
    PulseWaveform {
        heart_rate,
        peak_velocity: T::lit(base_peak(vessel, case) * (hr / 120.0).powf(0.25)),
        systole_fraction: T::lit((systole / rr).min(0.6)),
    }
}

/// Sixteen recordings: every vessel before and after intervention, one
/// extra pre-intervention coarctation acquisition, and three multi-cycle
/// post-intervention coarctation acquisitions. Resampled with the default
/// step rule this yields 13 x 200 + 3 x 350 = 3650 rows.
pub fn synth_corpus<T: Real>(seed: u64, noise_amplitude: T) -> Result<Vec<CorpusEntry<T>>, TraceError> {
    use CaseId::*;
    use VesselId::*;
    let pre_hr = [133.3, 138.5, 131.6, 137.9, 135.6, 134.1];
    let post_hr = [112.0, 118.0, 109.0, 121.0, 115.0, 106.0];
    let mut recordings = Vec::new();
    for (i, vessel) in VesselId::ALL.into_iter().enumerate() {
        recordings.push(Recording {
            vessel,
            case: PreIntervention,
            heart_rate: pre_hr[i],
            cycles: 1,
        });
        recordings.push(Recording {
            vessel,
            case: PostIntervention,
            heart_rate: post_hr[i],
            cycles: 1,
        });
    }
    recordings.push(Recording {
        vessel: Coarctation,
        case: PreIntervention,
        heart_rate: 139.5,
        cycles: 1,
    });
    for hr in [104.0, 117.0, 125.0] {
        recordings.push(Recording {
            vessel: Coarctation,
            case: PostIntervention,
            heart_rate: hr,
            cycles: 3,
        });
    }

    recordings
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let wave = physiological_waveform(rec.vessel, rec.case, T::lit(rec.heart_rate));
            let params = SynthParams {
                heart_rate: wave.heart_rate,
                peak_velocity: wave.peak_velocity,
                systole_fraction: wave.systole_fraction,
                n_cycles: rec.cycles,
                vessel: rec.vessel,
                case: rec.case,
                noise_amplitude,
                seed: seed.wrapping_add(i as u64),
                points_per_cycle: 80,
            };
            let clean = synth_trace(&params)?;
            let offset = T::lit(0.35 + 0.1 * i as f64);
            let sign = if rec.vessel == Coarctation { -T::one() } else { T::one() };
            let points = clean.points().iter().map(|&(t, v)| (t + offset, sign * v)).collect();
            let period = wave.period();
            let first_peak = offset + wave.systole_fraction * period / T::lit(2.0);
            let peak_times = (0..5).map(|k| first_peak + T::count(k) * period).collect();
            let name = format!("{:02}_{}_{}", i, rec.vessel, rec.case);
            Ok(CorpusEntry {
                trace: RawTrace::new(points, rec.vessel, rec.case, name.clone())?,
                name,
                peak_times,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mid_systole_hits_peak() {
        let wave = PulseWaveform {
            heart_rate: 120.0,
            peak_velocity: 1.0,
            systole_fraction: 0.35,
        };
        assert!((wave.value_at(0.0875_f64) - 1.0).abs() < 1e-12);
        let mut p = SynthParams::new(120.0, 1.0, 0.35, VesselId::AscendingAorta, CaseId::PreIntervention);
        p.points_per_cycle = 200;
        let t = synth_trace(&p).unwrap();
        let (time, v): (f64, f64) = t.points()[35];
        assert!((time - 0.0875).abs() < 1e-15);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diastole_is_exactly_zero() {
        let p = SynthParams::new(120.0, 1.0, 0.35, VesselId::AscendingAorta, CaseId::PreIntervention);
        let t = synth_trace(&p).unwrap();
        for &(time, v) in t.points() {
            if time >= 0.175 {
                assert_eq!(v, 0.0, "t = {time}");
            }
        }
    }

    #[test]
    fn deterministic_and_periodic() {
        let mut p = SynthParams::new(100.0_f64, 1.5, 0.4, VesselId::Coarctation, CaseId::PostIntervention);
        p.n_cycles = 3;
        p.noise_amplitude = 0.05;
        p.seed = 9;
        let a = synth_trace(&p).unwrap();
        assert_eq!(a, synth_trace(&p).unwrap());
        p.seed = 10;
        assert_ne!(a, synth_trace(&p).unwrap());
        let per = p.points_per_cycle;
        for i in 0..per * 2 {
            let (v0, v1) = (a.points()[i].1, a.points()[i + per].1);
            assert!((v0 - v1).abs() <= 0.05 + 1e-12);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let p = SynthParams::new(120.0, 1.0, 1.2, VesselId::Coarctation, CaseId::PreIntervention);
        assert!(synth_trace(&p).is_err());
        let p = SynthParams::new(0.0, 1.0, 0.3, VesselId::Coarctation, CaseId::PreIntervention);
        assert!(synth_trace(&p).is_err());
    }

    #[test]
    fn corpus_layout() {
        let corpus = synth_corpus::<f64>(7, 0.03).unwrap();
        assert_eq!(corpus.len(), 16);
        let coarct = corpus.iter().find(|e| e.trace.vessel == VesselId::Coarctation).unwrap();
        let mean: f64 = coarct.trace.points().iter().map(|p| p.1).sum();
        assert!(mean < 0.0, "coarctation stored with Doppler sign");
        assert!(corpus
            .iter()
            .all(|e| e.peak_times.len() == 5 && e.trace.start_time() > 0.0));
    }
}
