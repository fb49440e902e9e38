//! Block segmentation: contiguous, gap-bounded runs of one patient's series.
//!
//! A block is the unit of all modeling. Runs are split wherever the spacing
//! between consecutive self-reports exceeds the gap bounds, and runs shorter
//! than the minimum length are dropped.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::records::{
    sum_score, EmaRecord, SensorEpochRecord, SumScore, SENSOR_FEATURE_NAMES,
};
use crate::error::{Error, Result};

/// Minimum number of points in a block.
pub const MIN_BLOCK_LEN: usize = 15;

/// Gap and length bounds used when segmenting a patient's series.
///
/// A gap is allowed while it spans at most `max_gap_points` cadence slots
/// (`dt / cadence_days`) and at most `max_gap_days` days. At the default
/// cadence of 2.5 days the two bounds coincide at 15 days.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SegmentParams {
    pub min_len: usize,
    pub max_gap_points: usize,
    pub max_gap_days: f64,
    pub cadence_days: f64,
}

impl Default for SegmentParams {
    fn default() -> Self {
        Self { min_len: MIN_BLOCK_LEN, max_gap_points: 6, max_gap_days: 15.0, cadence_days: 2.5 }
    }
}

/// Number of sensor features in an aligned vector: 4 epochs x 9 aggregates.
pub const ALIGNED_SENSOR_DIM: usize = 36;

/// Names of the aligned per-point sensor features (epoch-major order).
pub fn aligned_sensor_names() -> Vec<String> {
    use crate::data::records::Epoch;
    let mut names = Vec::with_capacity(ALIGNED_SENSOR_DIM);
    for epoch in Epoch::ALL {
        for feat in SENSOR_FEATURE_NAMES {
            names.push(format!("{}_{}", epoch.as_str(), feat));
        }
    }
    names
}

/// One observation inside a block.
///
/// `sensors`, when present, holds the aligned 36-dim vector for the point's
/// calendar day; individual entries may be NaN when that epoch/feature was
/// missing (they are median-filled at feature-construction time).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockPoint {
    pub t: f64,
    pub ema: EmaRecord,
    pub sensors: Option<Vec<f64>>,
    pub score: SumScore,
}

/// A temporally contiguous, gap-bounded segment of one patient's series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Block {
    pub block_id: String,
    pub patient_id: String,
    pub points: Vec<BlockPoint>,
}

impl Block {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Sum-score series of the block, in time order.
    pub fn scores(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.score.value()).collect()
    }

    /// Sample standard deviation of the sum-score series.
    pub fn score_std(&self) -> f64 {
        sample_std(&self.scores())
    }

    /// Sub-block over `range` (used by rolling-origin fitting). Keeps ids.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Block {
        Block {
            block_id: self.block_id.clone(),
            patient_id: self.patient_id.clone(),
            points: self.points[range].to_vec(),
        }
    }
}

pub(crate) fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    (ss / (n - 1.0)).sqrt()
}

const GAP_EPS: f64 = 1e-9;

fn gap_ok(dt: f64, params: &SegmentParams) -> bool {
    let slots = dt / params.cadence_days;
    slots <= params.max_gap_points as f64 + GAP_EPS && dt <= params.max_gap_days + GAP_EPS
}

/// Split one patient's sorted records into maximal gap-bounded blocks.
///
/// Records in runs shorter than `min_len` appear in no block. Block ids are
/// `"<patient>_b<ordinal>"` counted over kept blocks.
pub fn segment_blocks(records: &[EmaRecord], params: &SegmentParams) -> Result<Vec<Block>> {
    if records.is_empty() {
        return Ok(Vec::new());
    }
    let patient_id = records[0].patient_id.clone();
    for w in records.windows(2) {
        if w[1].patient_id != patient_id {
            return Err(Error::InvalidRecord(
                "segment_blocks expects records of a single patient".into(),
            ));
        }
        if w[1].t <= w[0].t {
            return Err(Error::InvalidRecord(format!(
                "records must be strictly increasing in t ({} then {})",
                w[0].t, w[1].t
            )));
        }
    }

    let mut blocks = Vec::new();
    let mut run: Vec<&EmaRecord> = vec![&records[0]];
    let flush = |run: &mut Vec<&EmaRecord>, blocks: &mut Vec<Block>| {
        if run.len() >= params.min_len {
            let points = run
                .iter()
                .map(|r| BlockPoint {
                    t: r.t,
                    ema: (*r).clone(),
                    sensors: None,
                    score: sum_score(r),
                })
                .collect();
            blocks.push(Block {
                block_id: format!("{}_b{}", patient_id, blocks.len()),
                patient_id: patient_id.clone(),
                points,
            });
        }
        run.clear();
    };

    for rec in &records[1..] {
        let dt = rec.t - run.last().unwrap().t;
        if !gap_ok(dt, params) {
            flush(&mut run, &mut blocks);
        }
        run.push(rec);
    }
    flush(&mut run, &mut blocks);
    Ok(blocks)
}

/// Segment all patients' records (grouped by patient, order preserved).
pub fn segment_cohort(records: &[EmaRecord], params: &SegmentParams) -> Result<Vec<Block>> {
    let mut by_patient: Vec<(String, Vec<EmaRecord>)> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for r in records {
        let idx = *index.entry(r.patient_id.clone()).or_insert_with(|| {
            by_patient.push((r.patient_id.clone(), Vec::new()));
            by_patient.len() - 1
        });
        by_patient[idx].1.push(r.clone());
    }
    let mut blocks = Vec::new();
    for (_, recs) in &by_patient {
        blocks.extend(segment_blocks(recs, params)?);
    }
    Ok(blocks)
}

/// Attach aligned sensor vectors to each block point.
///
/// A point at time `t` receives, for each epoch, the sensor record of the
/// same patient whose calendar day `floor(t_sensor)` equals `floor(t)`.
/// Missing epochs or missing feature values stay NaN.
pub fn attach_sensors(blocks: &mut [Block], sensors: &[SensorEpochRecord]) {
    use crate::data::records::Epoch;
    // (patient, day, epoch) -> features
    let mut by_key: HashMap<(&str, i64, Epoch), &[f64; 9]> = HashMap::new();
    for s in sensors {
        by_key.insert((s.patient_id.as_str(), s.t.floor() as i64, s.epoch), &s.features);
    }
    for block in blocks.iter_mut() {
        let pid = block.patient_id.clone();
        for point in &mut block.points {
            let day = point.t.floor() as i64;
            let mut vec = vec![f64::NAN; ALIGNED_SENSOR_DIM];
            let mut any = false;
            for (e, epoch) in Epoch::ALL.iter().enumerate() {
                if let Some(features) = by_key.get(&(pid.as_str(), day, *epoch)) {
                    for (f, &v) in features.iter().enumerate() {
                        vec[e * 9 + f] = v;
                        any = any || v.is_finite();
                    }
                }
            }
            point.sensors = if any { Some(vec) } else { None };
        }
    }
}

/// Retain exactly the blocks whose sum-score sample standard deviation
/// exceeds `min_std`.
pub fn variance_filter(blocks: Vec<Block>, min_std: f64) -> Vec<Block> {
    blocks.into_iter().filter(|b| b.score_std() > min_std).collect()
}

/// Chronological train/test split: train gets `floor(train_fraction * n)` points.
pub fn split_block(block: &Block, train_fraction: f64) -> Result<(Block, Block)> {
    if !(0.0 < train_fraction && train_fraction < 1.0) {
        return Err(Error::InvalidParam(format!(
            "train_fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let n = block.len();
    let n_train = (train_fraction * n as f64).floor() as usize;
    if n_train < MIN_BLOCK_LEN {
        return Err(Error::BlockTooShort { len: n_train, min: MIN_BLOCK_LEN });
    }
    Ok((block.slice(0..n_train), block.slice(n_train..n)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::records::EMA_ITEMS;

    fn records_at(times: &[f64]) -> Vec<EmaRecord> {
        times
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let mut answers = [1u8; EMA_ITEMS];
                answers[0] = (i % 4) as u8; // non-constant scores
                EmaRecord::new("p1", t, answers).unwrap()
            })
            .collect()
    }

    fn uniform_times(n: usize, cadence: f64) -> Vec<f64> {
        (0..n).map(|i| i as f64 * cadence).collect()
    }

    #[test]
    fn segments_uniform_cadence_into_one_block() {
        let recs = records_at(&uniform_times(20, 3.0));
        let blocks = segment_blocks(&recs, &SegmentParams::default()).unwrap();
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].len(), 20);
    }

    #[test]
    fn drops_runs_below_min_length() {
        let recs = records_at(&uniform_times(14, 3.0));
        let blocks = segment_blocks(&recs, &SegmentParams::default()).unwrap();
        assert!(blocks.is_empty());
    }

    #[test]
    fn splits_on_twenty_day_gap() {
        // 15 records, 20-day gap, 15 records: both the slot rule (20/2.5 = 8 > 6)
        // and the day rule (20 > 15) fire, and they split exactly once.
        let mut times = uniform_times(15, 3.0);
        let resume = times.last().unwrap() + 20.0;
        times.extend((0..15).map(|i| resume + i as f64 * 3.0));
        let recs = records_at(&times);
        let blocks = segment_blocks(&recs, &SegmentParams::default()).unwrap();
        assert_eq!(blocks.len(), 2);
        assert_eq!(blocks[0].len(), 15);
        assert_eq!(blocks[1].len(), 15);
    }

    #[test]
    fn gap_boundary_six_slots_stays_whole() {
        // At the default 2.5-day cadence a 6-slot gap is exactly 15 days: allowed.
        let mut times = uniform_times(10, 2.5);
        let resume = times.last().unwrap() + 15.0;
        times.extend((0..10).map(|i| resume + i as f64 * 2.5));
        let recs = records_at(&times);
        let blocks = segment_blocks(&recs, &SegmentParams::default()).unwrap();
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].len(), 20);
    }

    #[test]
    fn empty_input_gives_empty_list() {
        let blocks = segment_blocks(&[], &SegmentParams::default()).unwrap();
        assert!(blocks.is_empty());
    }

    #[test]
    fn segmentation_is_idempotent() {
        let mut times = uniform_times(18, 2.5);
        let resume = times.last().unwrap() + 20.0;
        times.extend((0..16).map(|i| resume + i as f64 * 2.5));
        let recs = records_at(&times);
        let params = SegmentParams::default();
        let blocks = segment_blocks(&recs, &params).unwrap();
        for block in &blocks {
            let inner: Vec<EmaRecord> = block.points.iter().map(|p| p.ema.clone()).collect();
            let again = segment_blocks(&inner, &params).unwrap();
            assert_eq!(again.len(), 1);
            assert_eq!(again[0].len(), block.len());
            for (a, b) in again[0].points.iter().zip(&block.points) {
                assert_eq!(a.t, b.t);
                assert_eq!(a.score.value(), b.score.value());
            }
        }
    }

    #[test]
    fn variance_filter_drops_constant_blocks() {
        let recs: Vec<EmaRecord> = uniform_times(20, 2.5)
            .iter()
            .map(|&t| EmaRecord::new("p1", t, [1; EMA_ITEMS]).unwrap())
            .collect();
        let blocks = segment_blocks(&recs, &SegmentParams::default()).unwrap();
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].scores().iter().sum::<f64>(), 20.0 * 15.0);
        assert!(variance_filter(blocks, 0.5).is_empty());
    }

    #[test]
    fn variance_filter_keeps_alternating_blocks() {
        // scores alternate between 10 and 20 -> std ~ 5
        let recs: Vec<EmaRecord> = uniform_times(20, 2.5)
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let answers = if i % 2 == 0 {
                    [1, 1, 1, 1, 1, 2, 2, 2, 2, 2] // 5 + 5 = 10
                } else {
                    [3, 3, 3, 3, 3, 2, 2, 2, 2, 2] // 15 + 5 = 20
                };
                EmaRecord::new("p1", t, answers).unwrap()
            })
            .collect();
        let blocks = segment_blocks(&recs, &SegmentParams::default()).unwrap();
        let kept = variance_filter(blocks, 0.5);
        assert_eq!(kept.len(), 1);
    }

    #[test]
    fn split_block_floor_arithmetic() {
        let recs = records_at(&uniform_times(100, 2.5));
        let block = &segment_blocks(&recs, &SegmentParams::default()).unwrap()[0];
        let (train, test) = split_block(block, 0.8).unwrap();
        assert_eq!((train.len(), test.len()), (80, 20));

        let recs = records_at(&uniform_times(26, 2.5));
        let block = &segment_blocks(&recs, &SegmentParams::default()).unwrap()[0];
        let (train, test) = split_block(block, 0.8).unwrap();
        assert_eq!((train.len(), test.len()), (20, 6));
        let max_train_t = train.points.last().unwrap().t;
        let min_test_t = test.points[0].t;
        assert!(max_train_t < min_test_t);
    }

    #[test]
    fn split_block_preserves_points_and_rejects_tiny_train() {
        let recs = records_at(&uniform_times(30, 2.5));
        let block = &segment_blocks(&recs, &SegmentParams::default()).unwrap()[0];
        let (train, test) = split_block(block, 0.6).unwrap();
        let mut recombined: Vec<f64> = train.points.iter().map(|p| p.t).collect();
        recombined.extend(test.points.iter().map(|p| p.t));
        let original: Vec<f64> = block.points.iter().map(|p| p.t).collect();
        assert_eq!(recombined, original);

        assert!(matches!(
            split_block(block, 0.4),
            Err(Error::BlockTooShort { len: 12, min: 15 })
        ));
    }
}
