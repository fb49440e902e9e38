//! Raw observation records and the EMA sum score.
//!
//! An EMA is a 10-item self-report; each item is answered on a 0..=3 scale.
//! Items 1-5 ask about positive states (calm, social, sleeping, hopeful,
//! thinking clearly) and items 6-10 about negative ones (harm, voices,
//! stressed, seeing things, depressed). The sum score adds positive answers
//! as-is and reverse-codes negative answers, so higher is always better and
//! the score lives in [0, 30].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of EMA questionnaire items.
pub const EMA_ITEMS: usize = 10;
/// Maximum answer value per item.
pub const MAX_ANSWER: u8 = 3;
/// Upper bound of the sum score (10 items, 3 points each after coding).
pub const MAX_SCORE: f64 = 30.0;

/// Short names of the 10 EMA items, in questionnaire order.
pub const EMA_ITEM_NAMES: [&str; EMA_ITEMS] = [
    "calm",
    "social",
    "sleep",
    "hopeful",
    "think",
    "harm",
    "voices",
    "stressed",
    "seeing_things",
    "depressed",
];

/// Items 0..POSITIVE_ITEMS are positively coded; the rest are reverse-coded.
pub const POSITIVE_ITEMS: usize = 5;

/// One self-report: answers to the 10 items at time `t` (days since cohort epoch).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmaRecord {
    pub patient_id: String,
    pub t: f64,
    pub answers: [u8; EMA_ITEMS],
}

impl EmaRecord {
    pub fn new(patient_id: impl Into<String>, t: f64, answers: [u8; EMA_ITEMS]) -> Result<Self> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::InvalidRecord(format!("t must be non-negative, got {t}")));
        }
        if let Some(bad) = answers.iter().find(|&&a| a > MAX_ANSWER) {
            return Err(Error::InvalidRecord(format!("answer {bad} outside 0..=3")));
        }
        Ok(Self { patient_id: patient_id.into(), t, answers })
    }
}

/// Time-of-day epoch for sensor aggregates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Epoch {
    Morning,
    Afternoon,
    Evening,
    Night,
}

impl Epoch {
    pub const ALL: [Epoch; 4] = [Epoch::Morning, Epoch::Afternoon, Epoch::Evening, Epoch::Night];

    pub fn as_str(self) -> &'static str {
        match self {
            Epoch::Morning => "morning",
            Epoch::Afternoon => "afternoon",
            Epoch::Evening => "evening",
            Epoch::Night => "night",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "morning" => Ok(Epoch::Morning),
            "afternoon" => Ok(Epoch::Afternoon),
            "evening" => Ok(Epoch::Evening),
            "night" => Ok(Epoch::Night),
            other => Err(Error::InvalidRecord(format!("unknown epoch {other:?}"))),
        }
    }
}

/// Names of the per-epoch behavioral sensor aggregates, in canonical order.
pub const SENSOR_FEATURE_NAMES: [&str; 9] = [
    "activity_duration",
    "conversation_duration",
    "call_count",
    "sms_count",
    "sleep_duration",
    "location_count",
    "unlock_duration",
    "ambient_light",
    "ambient_sound",
];

/// Indices of sensor features constrained to be non-negative (durations/counts).
pub const NON_NEGATIVE_SENSORS: [usize; 7] = [0, 1, 2, 3, 4, 5, 6];

/// Daily sensor aggregates for one patient at one time epoch.
///
/// `features` follows [`SENSOR_FEATURE_NAMES`]; entries may be NaN to mark a
/// value missing in the source data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorEpochRecord {
    pub patient_id: String,
    pub t: f64,
    pub epoch: Epoch,
    pub features: [f64; 9],
}

impl SensorEpochRecord {
    pub fn new(
        patient_id: impl Into<String>,
        t: f64,
        epoch: Epoch,
        features: [f64; 9],
    ) -> Result<Self> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::InvalidRecord(format!("t must be non-negative, got {t}")));
        }
        for (i, &v) in features.iter().enumerate() {
            if v.is_infinite() {
                return Err(Error::InvalidRecord(format!(
                    "sensor feature {} is infinite",
                    SENSOR_FEATURE_NAMES[i]
                )));
            }
            if NON_NEGATIVE_SENSORS.contains(&i) && v.is_finite() && v < 0.0 {
                return Err(Error::InvalidRecord(format!(
                    "sensor feature {} must be non-negative, got {v}",
                    SENSOR_FEATURE_NAMES[i]
                )));
            }
        }
        Ok(Self { patient_id: patient_id.into(), t, epoch, features })
    }
}

/// EMA sum score: positives as-is plus reverse-coded negatives; range [0, 30].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct SumScore(pub f64);

impl SumScore {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Compute the sum score of one self-report.
pub fn sum_score(record: &EmaRecord) -> SumScore {
    let mut total = 0u32;
    for (q, &a) in record.answers.iter().enumerate() {
        if q < POSITIVE_ITEMS {
            total += u32::from(a);
        } else {
            total += u32::from(MAX_ANSWER - a);
        }
    }
    SumScore(f64::from(total))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(answers: [u8; EMA_ITEMS]) -> EmaRecord {
        EmaRecord::new("p1", 0.0, answers).unwrap()
    }

    #[test]
    fn sum_score_best_case() {
        let r = rec([3, 3, 3, 3, 3, 0, 0, 0, 0, 0]);
        assert_eq!(sum_score(&r).value(), 30.0);
    }

    #[test]
    fn sum_score_all_zero_answers() {
        let r = rec([0; 10]);
        assert_eq!(sum_score(&r).value(), 15.0);
    }

    #[test]
    fn sum_score_hand_example() {
        // positives (1,2,0,3,1) = 7; negatives (2,0,1,3,2) reverse-coded = 7
        let r = rec([1, 2, 0, 3, 1, 2, 0, 1, 3, 2]);
        assert_eq!(sum_score(&r).value(), 14.0);
    }

    #[test]
    fn record_rejects_out_of_range_answer() {
        assert!(EmaRecord::new("p1", 0.0, [0, 0, 0, 0, 4, 0, 0, 0, 0, 0]).is_err());
        assert!(EmaRecord::new("p1", -1.0, [0; 10]).is_err());
    }

    #[test]
    fn sensor_record_rejects_negative_duration() {
        let mut f = [0.0; 9];
        f[0] = -1.0;
        assert!(SensorEpochRecord::new("p1", 0.0, Epoch::Morning, f).is_err());
        // ambient features may be negative (e.g. dB scale offsets)
        let mut g = [0.0; 9];
        g[8] = -3.0;
        assert!(SensorEpochRecord::new("p1", 0.0, Epoch::Morning, g).is_ok());
    }

    #[test]
    fn sum_score_monotone_in_answers() {
        // Raising a positive answer or lowering a negative answer never lowers the score.
        for q in 0..EMA_ITEMS {
            for base in 0..MAX_ANSWER {
                let mut low = [1u8; EMA_ITEMS];
                low[q] = base;
                let mut high = low;
                high[q] = base + 1;
                let (s_low, s_high) = (sum_score(&rec(low)).value(), sum_score(&rec(high)).value());
                if q < POSITIVE_ITEMS {
                    assert!(s_high >= s_low);
                } else {
                    assert!(s_high <= s_low);
                }
            }
        }
    }
}
