use serde::{Deserialize, Serialize};

use super::SplatError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Warmup,
    Densify,
    Joint,
}

/// Iteration budget per segment: warm-up, then densification, then joint
/// optimisation until `total`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSchedule {
    pub warmup: u64,
    pub densify: u64,
    pub total: u64,
}

impl Default for PhaseSchedule {
    fn default() -> Self {
        Self {
            warmup: 3000,
            densify: 10_000,
            total: 40_000,
        }
    }
}

impl PhaseSchedule {
    pub fn new(warmup: u64, densify: u64, total: u64) -> Result<Self, SplatError> {
        if warmup.checked_add(densify).is_none_or(|end| end > total) {
            return Err(SplatError::InvalidPlan(format!(
                "phases {warmup} + {densify} exceed {total} iterations"
            )));
        }
        Ok(Self { warmup, densify, total })
    }

    /// Iteration indices where densification and joint training begin.
    pub fn boundaries(&self) -> [u64; 3] {
        [self.warmup, self.warmup + self.densify, self.total]
    }

    pub fn phase(&self, iteration: u64) -> Phase {
        if iteration < self.warmup {
            Phase::Warmup
        } else if iteration < self.warmup + self.densify {
            Phase::Densify
        } else {
            Phase::Joint
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentPlan {
    pub n_frames: usize,
    pub keyframes: Vec<usize>,
    /// Inclusive `(start, end)` frame ranges.
    pub segments: Vec<(usize, usize)>,
    pub phases: PhaseSchedule,
}

impl SegmentPlan {
    /// Segments containing `frame`: one, or two at an interior keyframe.
    pub fn segments_of(&self, frame: usize) -> Vec<usize> {
        (0..self.segments.len())
            .filter(|&i| (self.segments[i].0..=self.segments[i].1).contains(&frame))
            .collect()
    }
}

/// `k` keyframes at `round(i·(n−1)/(k−1))`, consecutive pairs bounding
/// each segment.
pub fn plan_segments(n_frames: usize, k: usize, phases: PhaseSchedule) -> Result<SegmentPlan, SplatError> {
    if k < 2 {
        return Err(SplatError::InvalidPlan(format!("need at least 2 keyframes, got {k}")));
    }
    if k > n_frames {
        return Err(SplatError::InvalidPlan(format!("{k} keyframes for {n_frames} frames")));
    }
    let span = (n_frames - 1) as u128;
    let keyframes: Vec<usize> = (0..k as u128)
        .map(|i| ((2 * i * span + (k as u128 - 1)) / (2 * (k as u128 - 1))) as usize)
        .collect();
    let segments = keyframes.windows(2).map(|w| (w[0], w[1])).collect();
    Ok(SegmentPlan {
        n_frames,
        keyframes,
        segments,
        phases,
    })
}

/// Picks `k` so segments hold about `frames_per_segment` frames (keyframes
/// included), then plans as [`plan_segments`].
pub fn plan_segments_by_length(
    n_frames: usize,
    frames_per_segment: usize,
    phases: PhaseSchedule,
) -> Result<SegmentPlan, SplatError> {
    if frames_per_segment < 2 || n_frames < 2 {
        return Err(SplatError::InvalidPlan(format!(
            "{n_frames} frames, {frames_per_segment} per segment"
        )));
    }
    let gaps = ((n_frames - 1) as f64 / (frames_per_segment - 1) as f64).round().max(1.0) as usize;
    plan_segments(n_frames, (gaps + 1).min(n_frames), phases)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ninety_six_frames_six_keyframes() {
        let p = plan_segments(96, 6, PhaseSchedule::default()).unwrap();
        assert_eq!(p.keyframes, vec![0, 19, 38, 57, 76, 95]);
        assert_eq!(p.segments.len(), 5);
        assert!(p.segments.iter().all(|(a, b)| b - a + 1 == 20));
        assert_eq!(plan_segments_by_length(96, 20, PhaseSchedule::default()).unwrap(), p);
    }

    #[test]
    fn minimal_plan() {
        let p = plan_segments(2, 2, PhaseSchedule::default()).unwrap();
        assert_eq!(p.segments, vec![(0, 1)]);
    }

    #[test]
    fn invalid_plans() {
        assert!(plan_segments(5, 6, PhaseSchedule::default()).is_err());
        assert!(plan_segments(5, 1, PhaseSchedule::default()).is_err());
        assert!(PhaseSchedule::new(3000, 10_000, 12_000).is_err());
    }

    #[test]
    fn phase_labels() {
        let s = PhaseSchedule::default();
        assert_eq!(s.boundaries(), [3000, 13_000, 40_000]);
        assert_eq!(s.phase(0), Phase::Warmup);
        assert_eq!(s.phase(2999), Phase::Warmup);
        assert_eq!(s.phase(3000), Phase::Densify);
        assert_eq!(s.phase(12_999), Phase::Densify);
        assert_eq!(s.phase(13_000), Phase::Joint);
        assert_eq!(s.phase(39_999), Phase::Joint);
    }

    #[test]
    fn json_shape() {
        let p = plan_segments(9, 3, PhaseSchedule::default()).unwrap();
        let v: serde_json::Value = serde_json::to_value(&p).unwrap();
        assert_eq!(v["keyframes"], serde_json::json!([0, 4, 8]));
        assert_eq!(v["segments"], serde_json::json!([[0, 4], [4, 8]]));
        assert_eq!(v["phases"]["warmup"], 3000);
    }

    proptest! {
        #[test]
        fn plans_cover_sequence(n in 2usize..500, k_frac in 0.0f64..1.0) {
            let k = 2 + ((n - 2) as f64 * k_frac) as usize;
            let p = plan_segments(n, k, PhaseSchedule::default()).unwrap();
            prop_assert_eq!(p.keyframes.len(), k);
            prop_assert_eq!(p.keyframes[0], 0);
            prop_assert_eq!(*p.keyframes.last().unwrap(), n - 1);
            let gaps: Vec<usize> = p.keyframes.windows(2).map(|w| w[1] - w[0]).collect();
            prop_assert!(gaps.iter().all(|g| *g >= 1));
            prop_assert!(gaps.iter().max().unwrap() - gaps.iter().min().unwrap() <= 1);
            for w in p.segments.windows(2) {
                prop_assert_eq!(w[0].1, w[1].0);
            }
            for f in 0..n {
                let owners = p.segments_of(f);
                let boundary = p.keyframes[1..k - 1].contains(&f);
                prop_assert_eq!(owners.len(), if boundary { 2 } else { 1 });
            }
        }
    }
}
