//! Seeded synthetic cohort generator with known ground-truth change points.
//!
//! Each patient carries a latent AR(1) well-being process. EMA answers
//! discretize item-specific loadings of the latent state; sensor aggregates
//! are linear mixtures of the same state plus noise. Shifts are planted by
//! offsetting one causal EMA item (plus a smaller latent component), so every
//! planted change point has a named item driving it.

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::changepoint::Direction;
use crate::data::records::{POSITIVE_ITEMS, SENSOR_FEATURE_NAMES};
use crate::data::{Block, EmaRecord, Epoch, SensorEpochRecord, EMA_ITEMS};
use crate::error::{Error, Result};
use crate::seeds;

/// Block length distribution: clamped rounded normal.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BlockLengthDist {
    pub min: usize,
    pub max: usize,
    pub mean: f64,
    pub std: f64,
}

impl Default for BlockLengthDist {
    fn default() -> Self {
        Self { min: 26, max: 165, mean: 91.0, std: 30.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CohortConfig {
    pub n_patients: usize,
    pub cadence_days: f64,
    pub block_len: BlockLengthDist,
    /// Per-patient AR(1) coefficient is drawn uniformly from this range.
    pub ar_coeff: (f64, f64),
    /// Stationary std of the latent well-being process.
    pub noise_std: f64,
    /// Std of the per-item observation dither.
    pub item_noise_std: f64,
    /// Expected planted change points per block (Poisson).
    pub cp_rate: f64,
    /// Guaranteed lower bound on planted change points per block (when the
    /// block is long enough to host them).
    pub cp_min: usize,
    /// Shift size in units of the block's short-term score noise.
    pub cp_magnitude: f64,
    /// Fraction of shifts that are increases instead of decreases.
    pub increase_fraction: f64,
    /// Fraction of patients with constant (zero-variance) self-reports.
    pub flat_fraction: f64,
    /// Fraction of sensor epoch records dropped to exercise median filling.
    pub missing_epoch_fraction: f64,
    pub seed: u64,
}

impl Default for CohortConfig {
    fn default() -> Self {
        Self {
            n_patients: 50,
            cadence_days: 2.5,
            block_len: BlockLengthDist::default(),
            ar_coeff: (0.5, 0.8),
            noise_std: 0.35,
            item_noise_std: 0.45,
            cp_rate: 0.7,
            cp_min: 0,
            cp_magnitude: 2.0,
            increase_fraction: 0.0,
            flat_fraction: 0.0,
            missing_epoch_fraction: 0.05,
            seed: 0,
        }
    }
}

impl CohortConfig {
    pub fn validate(&self) -> Result<()> {
        let d = &self.block_len;
        if !(d.min as f64 <= d.mean && d.mean <= d.max as f64) {
            return Err(Error::InvalidParam(format!(
                "block length distribution must satisfy min <= mean <= max, got {}/{}/{}",
                d.min, d.mean, d.max
            )));
        }
        if self.cp_magnitude <= 0.0 {
            return Err(Error::InvalidParam("cp_magnitude must be positive".into()));
        }
        if self.cadence_days <= 0.0 {
            return Err(Error::InvalidParam("cadence_days must be positive".into()));
        }
        for f in [self.increase_fraction, self.flat_fraction, self.missing_epoch_fraction] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::InvalidParam(format!("fractions must be in [0,1], got {f}")));
            }
        }
        Ok(())
    }
}

/// One planted shift.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthEntry {
    pub block_id: String,
    pub patient_id: String,
    /// Time of the first shifted observation.
    pub t: f64,
    /// Index of the first shifted point, relative to the generated series.
    pub index: usize,
    pub direction: Direction,
    /// Configured magnitude in score-noise units.
    pub magnitude: f64,
    /// EMA item (0-based) carrying the shift.
    pub causal_item: usize,
}

/// All planted shifts of a cohort.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GroundTruth {
    pub entries: Vec<TruthEntry>,
}

impl GroundTruth {
    /// Truth indices for one block id.
    pub fn indices_for(&self, block_id: &str) -> Vec<usize> {
        self.entries.iter().filter(|e| e.block_id == block_id).map(|e| e.index).collect()
    }

    /// Re-anchor entries onto segmented blocks by patient and shift time.
    /// Entries whose time falls in no block (or cannot be matched to a point)
    /// are dropped.
    pub fn remap(&self, blocks: &[Block]) -> GroundTruth {
        let mut entries = Vec::new();
        for entry in &self.entries {
            for block in blocks.iter().filter(|b| b.patient_id == entry.patient_id) {
                if let Some(index) = block
                    .points
                    .iter()
                    .position(|p| (p.t - entry.t).abs() < 1e-6)
                {
                    entries.push(TruthEntry {
                        block_id: block.block_id.clone(),
                        index,
                        ..entry.clone()
                    });
                    break;
                }
            }
        }
        GroundTruth { entries }
    }

    pub fn to_csv_string(&self) -> String {
        let mut out =
            String::from("block_id,patient_id,t_days,index,direction,magnitude,causal_item\n");
        for e in &self.entries {
            let dir = match e.direction {
                Direction::Decrease => "decrease",
                Direction::Increase => "increase",
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                e.block_id, e.patient_id, e.t, e.index, dir, e.magnitude, e.causal_item
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<GroundTruth> {
        let mut entries = Vec::new();
        for (ln, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                return Err(Error::Csv {
                    line: (ln + 1) as u64,
                    msg: format!("expected 7 fields, got {}", fields.len()),
                });
            }
            let parse_err = |msg: String| Error::Csv { line: (ln + 1) as u64, msg };
            entries.push(TruthEntry {
                block_id: fields[0].to_string(),
                patient_id: fields[1].to_string(),
                t: fields[2].parse().map_err(|_| parse_err(format!("bad t_days {:?}", fields[2])))?,
                index: fields[3].parse().map_err(|_| parse_err(format!("bad index {:?}", fields[3])))?,
                direction: match fields[4] {
                    "decrease" => Direction::Decrease,
                    "increase" => Direction::Increase,
                    other => return Err(parse_err(format!("bad direction {other:?}"))),
                },
                magnitude: fields[5].parse().map_err(|_| parse_err(format!("bad magnitude {:?}", fields[5])))?,
                causal_item: fields[6].parse().map_err(|_| parse_err(format!("bad causal_item {:?}", fields[6])))?,
            });
        }
        Ok(GroundTruth { entries })
    }
}

/// A generated cohort: raw records plus the planted truth.
#[derive(Debug, Clone)]
pub struct Cohort {
    pub ema_records: Vec<EmaRecord>,
    pub sensor_records: Vec<SensorEpochRecord>,
    pub truth: GroundTruth,
}

/// Add a level shift (`+magnitude` for increases, `-magnitude` for
/// decreases) from `index` onward.
pub fn inject_changepoint(
    series: &[f64],
    index: usize,
    magnitude: f64,
    direction: Direction,
) -> Result<Vec<f64>> {
    if index == 0 || index >= series.len() {
        return Err(Error::InvalidParam(format!(
            "shift index {index} not interior to a series of {}",
            series.len()
        )));
    }
    let delta = match direction {
        Direction::Increase => magnitude,
        Direction::Decrease => -magnitude,
    };
    Ok(series
        .iter()
        .enumerate()
        .map(|(i, &v)| if i >= index { v + delta } else { v })
        .collect())
}

/// One gap to carve into a patient's record stream.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapSpec {
    pub patient_id: String,
    /// First removed record index within the patient's series; None places
    /// the gap at a seeded random valid position.
    pub at: Option<usize>,
    /// Resulting spacing in cadence slots; `gap_points - 1` records are removed.
    pub gap_points: usize,
}

/// Remove records to create the configured gaps. Returns the thinned records
/// and the number removed.
pub fn inject_missingness(
    records: &[EmaRecord],
    gaps: &[GapSpec],
    seed: u64,
) -> Result<(Vec<EmaRecord>, usize)> {
    use std::collections::HashSet;
    let mut drop: HashSet<(String, usize)> = HashSet::new();
    for (g_idx, gap) in gaps.iter().enumerate() {
        if gap.gap_points < 2 {
            return Err(Error::InvalidParam("gap_points must be at least 2".into()));
        }
        let patient_positions: Vec<usize> = records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.patient_id == gap.patient_id)
            .map(|(i, _)| i)
            .collect();
        let n = patient_positions.len();
        let remove = gap.gap_points - 1;
        if n < remove + 2 {
            return Err(Error::InvalidParam(format!(
                "patient {} has {n} records, cannot host a {}-point gap",
                gap.patient_id, gap.gap_points
            )));
        }
        let at = match gap.at {
            Some(at) => at,
            None => {
                let mut rng = seeds::rng(seed, g_idx as u64);
                rng.gen_range(1..=n - remove - 1)
            }
        };
        if at == 0 || at + remove > n.saturating_sub(1) {
            return Err(Error::InvalidParam(format!(
                "gap at {at} (+{remove}) does not fit strictly inside {n} records"
            )));
        }
        for pos in at..at + remove {
            drop.insert((gap.patient_id.clone(), pos));
        }
    }
    let mut out = Vec::with_capacity(records.len());
    let mut per_patient: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    let mut removed = 0usize;
    for r in records {
        let pos = per_patient.entry(r.patient_id.clone()).or_insert(0);
        if drop.contains(&(r.patient_id.clone(), *pos)) {
            removed += 1;
        } else {
            out.push(r.clone());
        }
        *pos += 1;
    }
    Ok((out, removed))
}

struct ItemParams {
    loading: f64,
    intercept: f64,
    noise_std: f64,
}

/// Per-(feature) sensor generation: base range, latent coupling, noise std.
const SENSOR_GEN: [(f64, f64, f64, f64); 9] = [
    (60.0, 180.0, 40.0, 12.0),  // activity_duration
    (20.0, 90.0, 25.0, 10.0),   // conversation_duration
    (1.0, 7.0, 2.0, 1.0),       // call_count
    (2.0, 12.0, 3.0, 1.5),      // sms_count
    (300.0, 500.0, 35.0, 20.0), // sleep_duration
    (1.0, 8.0, 2.0, 1.0),       // location_count
    (30.0, 100.0, -20.0, 10.0), // unlock_duration
    (50.0, 220.0, 15.0, 25.0),  // ambient_light
    (40.0, 80.0, 8.0, 8.0),     // ambient_sound
];

/// Floor for the score-noise unit so magnitudes stay meaningful on
/// noiseless configurations.
const NOISE_UNIT_FLOOR: f64 = 0.75;
/// Share of a shift routed through the latent state (the rest goes through
/// the causal item directly).
const LATENT_SHIFT_SHARE: f64 = 0.4;
/// Minimum spacing between planted shifts, and margins to the block edges.
const CP_MIN_SEPARATION: usize = 15;
const CP_START_MARGIN: usize = 18;
const CP_END_MARGIN: usize = 9;

fn sample_answers(
    latent: f64,
    params: &[ItemParams],
    item_offsets: &[f64],
    rng: &mut impl Rng,
) -> [u8; EMA_ITEMS] {
    let mut answers = [0u8; EMA_ITEMS];
    for (q, p) in params.iter().enumerate() {
        let dither = if p.noise_std > 0.0 {
            Normal::new(0.0, p.noise_std).unwrap().sample(rng)
        } else {
            0.0
        };
        let raw = p.loading * latent + p.intercept + dither + item_offsets[q];
        answers[q] = raw.round().clamp(0.0, 3.0) as u8;
    }
    answers
}

fn score_of(answers: &[u8; EMA_ITEMS]) -> f64 {
    answers
        .iter()
        .enumerate()
        .map(|(q, &a)| if q < POSITIVE_ITEMS { f64::from(a) } else { f64::from(3 - a) })
        .sum()
}

fn generate_patient(cfg: &CohortConfig, patient_idx: usize, flat: bool, cohort: &mut Cohort) {
    let patient_id = format!("p{patient_idx:03}");
    let block_id = format!("{patient_id}_b0");
    let mut rng = seeds::rng(cfg.seed, patient_idx as u64);

    let n = (cfg.block_len.mean + cfg.block_len.std * Normal::new(0.0, 1.0).unwrap().sample(&mut rng))
        .round()
        .clamp(cfg.block_len.min as f64, cfg.block_len.max as f64) as usize;

    if flat {
        let mut answers = [0u8; EMA_ITEMS];
        for a in answers.iter_mut() {
            *a = rng.gen_range(1..=2);
        }
        for i in 0..n {
            cohort
                .ema_records
                .push(EmaRecord::new(&patient_id, i as f64 * cfg.cadence_days, answers).unwrap());
        }
        return;
    }

    let phi = rng.gen_range(cfg.ar_coeff.0..=cfg.ar_coeff.1);
    let eps_std = cfg.noise_std * (1.0 - phi * phi).sqrt();

    // latent AR(1), stationary start
    let mut latent = Vec::with_capacity(n);
    let mut w = if cfg.noise_std > 0.0 {
        Normal::new(0.0, cfg.noise_std).unwrap().sample(&mut rng)
    } else {
        0.0
    };
    for _ in 0..n {
        latent.push(w);
        let eps = if eps_std > 0.0 { Normal::new(0.0, eps_std).unwrap().sample(&mut rng) } else { 0.0 };
        w = phi * w + eps;
    }

    // item model: one amplified causal item per block
    let causal_item = rng.gen_range(0..EMA_ITEMS);
    let items: Vec<ItemParams> = (0..EMA_ITEMS)
        .map(|q| {
            let positive = q < POSITIVE_ITEMS;
            let magnitude_load =
                if q == causal_item { 1.1 } else { rng.gen_range(0.35..0.6) };
            let loading = if positive { magnitude_load } else { -magnitude_load };
            let intercept = if q == causal_item {
                // leave room for the shift to move this item
                if positive { rng.gen_range(1.9..2.2) } else { rng.gen_range(0.8..1.1) }
            } else {
                rng.gen_range(1.2..1.9)
            };
            let noise_std = if q == causal_item { cfg.item_noise_std * 0.6 } else { cfg.item_noise_std };
            ItemParams { loading, intercept, noise_std }
        })
        .collect();

    // choose shift locations
    let poisson_draw = if cfg.cp_rate > 0.0 {
        Poisson::new(cfg.cp_rate).map(|p| p.sample(&mut rng) as usize).unwrap_or(0)
    } else {
        0
    };
    let wanted = poisson_draw.max(cfg.cp_min).min(3);
    let mut cp_indices: Vec<usize> = Vec::new();
    if n > CP_START_MARGIN + CP_END_MARGIN {
        let lo = CP_START_MARGIN;
        let hi = n - CP_END_MARGIN;
        let mut attempts = 0;
        while cp_indices.len() < wanted && attempts < 200 {
            attempts += 1;
            let candidate = rng.gen_range(lo..hi);
            if cp_indices.iter().all(|&c| c.abs_diff(candidate) >= CP_MIN_SEPARATION) {
                cp_indices.push(candidate);
            }
        }
        cp_indices.sort_unstable();
    }

    // dry run without shifts to estimate the short-term score noise
    let mut dry_rng = seeds::rng(cfg.seed, patient_idx as u64 ^ 0x5151_0000);
    let zero_offsets = vec![0.0; EMA_ITEMS];
    let dry_scores: Vec<f64> = latent
        .iter()
        .map(|&l| score_of(&sample_answers(l, &items, &zero_offsets, &mut dry_rng)))
        .collect();
    let diffs: Vec<f64> = dry_scores.windows(2).map(|w| w[1] - w[0]).collect();
    let diff_var = if diffs.is_empty() {
        0.0
    } else {
        let m = diffs.iter().sum::<f64>() / diffs.len() as f64;
        diffs.iter().map(|d| (d - m).powi(2)).sum::<f64>() / diffs.len() as f64
    };
    let noise_unit = ((diff_var / 2.0).sqrt()).max(NOISE_UNIT_FLOOR);

    // plant the shifts: causal-item offset plus a latent component
    let mut item_shift = vec![0.0; n]; // signed offset applied to the causal item's raw value
    let mut truths = Vec::new();
    for &cp in &cp_indices {
        let direction = if rng.gen_bool(cfg.increase_fraction) {
            Direction::Increase
        } else {
            Direction::Decrease
        };
        let score_delta = cfg.cp_magnitude * noise_unit;
        let item_delta = (score_delta * (1.0 - LATENT_SHIFT_SHARE)).clamp(1.0, 3.0);
        // a decrease lowers positive answers / raises negative ones
        let positive = causal_item < POSITIVE_ITEMS;
        let raw_sign = match (direction, positive) {
            (Direction::Decrease, true) | (Direction::Increase, false) => -1.0,
            _ => 1.0,
        };
        for offset in item_shift.iter_mut().skip(cp) {
            *offset += raw_sign * item_delta;
        }
        let latent_delta = LATENT_SHIFT_SHARE * score_delta / 5.0; // ~score slope per latent unit
        latent = inject_changepoint(&latent, cp, latent_delta, direction).unwrap();
        truths.push(TruthEntry {
            block_id: block_id.clone(),
            patient_id: patient_id.clone(),
            t: cp as f64 * cfg.cadence_days,
            index: cp,
            direction,
            magnitude: cfg.cp_magnitude,
            causal_item,
        });
    }

    // final EMA records
    for (i, &l) in latent.iter().enumerate() {
        let mut offsets = vec![0.0; EMA_ITEMS];
        offsets[causal_item] = item_shift[i];
        let answers = sample_answers(l, &items, &offsets, &mut rng);
        cohort
            .ema_records
            .push(EmaRecord::new(&patient_id, i as f64 * cfg.cadence_days, answers).unwrap());
    }
    cohort.truth.entries.extend(truths);

    // sensors: per calendar day, per epoch; latent of the nearest EMA point
    let last_day = ((n - 1) as f64 * cfg.cadence_days).floor() as i64;
    let mut bases = [[0.0f64; 9]; 4];
    for row in bases.iter_mut() {
        for (f, b) in row.iter_mut().enumerate() {
            let (lo, hi, _, _) = SENSOR_GEN[f];
            *b = rng.gen_range(lo..hi);
        }
    }
    for day in 0..=last_day {
        let nearest = ((day as f64 / cfg.cadence_days).round() as usize).min(n - 1);
        let l = latent[nearest];
        for (e, epoch) in Epoch::ALL.iter().enumerate() {
            if rng.gen_bool(cfg.missing_epoch_fraction) {
                continue;
            }
            let mut features = [0.0f64; 9];
            for f in 0..SENSOR_FEATURE_NAMES.len() {
                let (_, _, coupling, noise) = SENSOR_GEN[f];
                let mut v = bases[e][f] + coupling * l + Normal::new(0.0, noise).unwrap().sample(&mut rng);
                if f <= 6 {
                    v = v.max(0.0);
                }
                features[f] = v;
            }
            cohort
                .sensor_records
                .push(SensorEpochRecord::new(&patient_id, day as f64, *epoch, features).unwrap());
        }
    }
}

/// Generate a full cohort; deterministic given the config (seed included).
pub fn generate_cohort(cfg: &CohortConfig) -> Result<Cohort> {
    cfg.validate()?;
    let mut cohort =
        Cohort { ema_records: Vec::new(), sensor_records: Vec::new(), truth: GroundTruth::default() };
    let n_flat = (cfg.flat_fraction * cfg.n_patients as f64).round() as usize;
    for idx in 0..cfg.n_patients {
        generate_patient(cfg, idx, idx < n_flat, &mut cohort);
    }
    Ok(cohort)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{segment_cohort, variance_filter, SegmentParams};

    fn small_cfg(seed: u64) -> CohortConfig {
        CohortConfig {
            n_patients: 6,
            block_len: BlockLengthDist { min: 26, max: 60, mean: 40.0, std: 8.0 },
            seed,
            ..CohortConfig::default()
        }
    }

    #[test]
    fn generated_records_pass_core_invariants() {
        let cohort = generate_cohort(&small_cfg(1)).unwrap();
        let blocks = segment_cohort(&cohort.ema_records, &SegmentParams::default()).unwrap();
        assert!(!blocks.is_empty());
        for block in &blocks {
            assert!(block.len() >= 15);
            for w in block.points.windows(2) {
                assert!(w[1].t > w[0].t);
            }
        }
    }

    #[test]
    fn all_flat_cohort_is_removed_by_variance_filter() {
        let cfg = CohortConfig { flat_fraction: 1.0, ..small_cfg(2) };
        let cohort = generate_cohort(&cfg).unwrap();
        let blocks = segment_cohort(&cohort.ema_records, &SegmentParams::default()).unwrap();
        assert!(!blocks.is_empty());
        assert!(variance_filter(blocks, 0.5).is_empty());
    }

    #[test]
    fn flat_count_is_exact() {
        let cfg = CohortConfig { n_patients: 60, flat_fraction: 8.0 / 60.0, ..small_cfg(3) };
        let cohort = generate_cohort(&cfg).unwrap();
        let blocks = segment_cohort(&cohort.ema_records, &SegmentParams::default()).unwrap();
        assert_eq!(blocks.len(), 60);
        let kept = variance_filter(blocks, 0.5);
        assert_eq!(kept.len(), 52);
    }

    #[test]
    fn zero_noise_single_shift_is_a_clean_step() {
        let cfg = CohortConfig {
            n_patients: 1,
            noise_std: 0.0,
            item_noise_std: 0.0,
            missing_epoch_fraction: 0.0,
            cp_rate: 0.0,
            cp_min: 1,
            cp_magnitude: 2.0,
            ..small_cfg(4)
        };
        let cohort = generate_cohort(&cfg).unwrap();
        assert_eq!(cohort.truth.entries.len(), 1);
        let cp = cohort.truth.entries[0].index;
        let blocks = segment_cohort(&cohort.ema_records, &SegmentParams::default()).unwrap();
        let scores = blocks[0].scores();
        let pre: Vec<f64> = scores[..cp].to_vec();
        let post: Vec<f64> = scores[cp..].to_vec();
        assert!(pre.windows(2).all(|w| w[0] == w[1]), "pre-shift scores must be constant");
        assert!(post.windows(2).all(|w| w[0] == w[1]), "post-shift scores must be constant");
        assert!(pre[0] > post[0], "decrease must lower the score");
    }

    #[test]
    fn mean_block_length_tracks_config() {
        let cfg = CohortConfig {
            n_patients: 100,
            missing_epoch_fraction: 1.0, // skip sensor generation cost
            ..CohortConfig::default()
        };
        let cohort = generate_cohort(&cfg).unwrap();
        let blocks = segment_cohort(&cohort.ema_records, &SegmentParams::default()).unwrap();
        assert_eq!(blocks.len(), 100);
        let mean = blocks.iter().map(|b| b.len() as f64).sum::<f64>() / blocks.len() as f64;
        assert!(
            (mean - cfg.block_len.mean).abs() / cfg.block_len.mean < 0.10,
            "mean block length {mean} deviates more than 10% from {}",
            cfg.block_len.mean
        );
    }

    #[test]
    fn inject_changepoint_basics() {
        let series = vec![1.0; 10];
        let same = inject_changepoint(&series, 4, 0.0, Direction::Decrease).unwrap();
        assert_eq!(same, series);

        let one = inject_changepoint(&series, 3, 2.0, Direction::Increase).unwrap();
        let two = inject_changepoint(&one, 6, 1.5, Direction::Increase).unwrap();
        for (i, v) in two.iter().enumerate() {
            let expected = 1.0
                + if i >= 3 { 2.0 } else { 0.0 }
                + if i >= 6 { 1.5 } else { 0.0 };
            assert!((v - expected).abs() < 1e-12, "shifts must compose additively");
        }

        let shifted = inject_changepoint(&series, 5, 3.0, Direction::Decrease).unwrap();
        let pre = shifted[..5].iter().sum::<f64>() / 5.0;
        let post = shifted[5..].iter().sum::<f64>() / 5.0;
        assert!((pre - post - 3.0).abs() < 1e-12);

        assert!(inject_changepoint(&series, 0, 1.0, Direction::Decrease).is_err());
        assert!(inject_changepoint(&series, 10, 1.0, Direction::Decrease).is_err());
    }

    #[test]
    fn missingness_gap_rules_drive_segmentation() {
        let cfg = CohortConfig {
            n_patients: 1,
            cp_rate: 0.0,
            missing_epoch_fraction: 1.0,
            block_len: BlockLengthDist { min: 60, max: 60, mean: 60.0, std: 0.0 },
            ..small_cfg(5)
        };
        let cohort = generate_cohort(&cfg).unwrap();
        let params = SegmentParams::default();

        // a 7-slot gap (6 records removed) exceeds max_gap 6: block splits
        let gaps = vec![GapSpec { patient_id: "p000".into(), at: Some(25), gap_points: 7 }];
        let (thinned, removed) = inject_missingness(&cohort.ema_records, &gaps, 0).unwrap();
        assert_eq!(removed, 6);
        let blocks = segment_cohort(&thinned, &params).unwrap();
        assert_eq!(blocks.len(), 2);

        // a 6-slot gap (5 removed) sits exactly on the boundary: stays whole
        let gaps = vec![GapSpec { patient_id: "p000".into(), at: Some(25), gap_points: 6 }];
        let (thinned, removed) = inject_missingness(&cohort.ema_records, &gaps, 0).unwrap();
        assert_eq!(removed, 5);
        let blocks = segment_cohort(&thinned, &params).unwrap();
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].len(), 55);
    }

    #[test]
    fn truth_survives_segmentation_round_trip() {
        let cfg = CohortConfig { cp_min: 1, ..small_cfg(6) };
        let cohort = generate_cohort(&cfg).unwrap();
        assert!(!cohort.truth.entries.is_empty());
        let blocks = segment_cohort(&cohort.ema_records, &SegmentParams::default()).unwrap();
        let remapped = cohort.truth.remap(&blocks);
        assert_eq!(remapped.entries.len(), cohort.truth.entries.len());
        for (a, b) in cohort.truth.entries.iter().zip(&remapped.entries) {
            assert_eq!(a.index, b.index); // unsplit cohort: indices identical
            assert_eq!(a.block_id, b.block_id);
        }
    }

    #[test]
    fn generation_is_byte_deterministic() {
        let cfg = small_cfg(7);
        let a = generate_cohort(&cfg).unwrap();
        let b = generate_cohort(&cfg).unwrap();
        let mut csv_a = Vec::new();
        let mut csv_b = Vec::new();
        crate::data::csv_io::write_ema_csv(&mut csv_a, &a.ema_records).unwrap();
        crate::data::csv_io::write_ema_csv(&mut csv_b, &b.ema_records).unwrap();
        assert_eq!(csv_a, csv_b);
        let mut s_a = Vec::new();
        let mut s_b = Vec::new();
        crate::data::csv_io::write_sensor_csv(&mut s_a, &a.sensor_records).unwrap();
        crate::data::csv_io::write_sensor_csv(&mut s_b, &b.sensor_records).unwrap();
        assert_eq!(s_a, s_b);
        assert_eq!(a.truth.to_csv_string(), b.truth.to_csv_string());
    }

    #[test]
    fn truth_csv_round_trip() {
        let cfg = CohortConfig { cp_min: 1, ..small_cfg(8) };
        let cohort = generate_cohort(&cfg).unwrap();
        let text = cohort.truth.to_csv_string();
        let back = GroundTruth::from_csv(&text).unwrap();
        assert_eq!(back.entries.len(), cohort.truth.entries.len());
        for (a, b) in cohort.truth.entries.iter().zip(&back.entries) {
            assert_eq!(a.block_id, b.block_id);
            assert_eq!(a.index, b.index);
            assert_eq!(a.causal_item, b.causal_item);
        }
    }

    #[test]
    fn truth_indices_keep_start_margin() {
        let cfg = CohortConfig { cp_min: 1, n_patients: 20, ..small_cfg(9) };
        let cohort = generate_cohort(&cfg).unwrap();
        for e in &cohort.truth.entries {
            assert!(e.index >= 15, "truth index {} too close to block start", e.index);
        }
    }
}
