//! Genetic counterfactual search over the feasible box.
//!
//! Candidates evolve to minimize
//!   hinge(f(x_cf), desired_range)
//!     + lambda_distance * dist(x, x_cf)
//!     - lambda_diversity * mean pairwise distance to the rest of the population
//!     + lambda_sparsity * fraction of changed features.
//! EMA-style integer genes mutate in integer steps; continuous genes take
//! clipped Gaussian perturbations. A post-hoc pass walks each selected
//! candidate back toward the query wherever validity allows, restoring
//! sparsity and proximity. The search always returns `k` candidates.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::counterfactual::query::{distance, CfQuery, CfSet, Counterfactual, FeatureKind};
use crate::error::Result;
use crate::forecast::FittedModel;
use crate::seeds;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GeneticParams {
    pub population: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub lambda_distance: f64,
    pub lambda_diversity: f64,
    pub lambda_sparsity: f64,
}

impl Default for GeneticParams {
    fn default() -> Self {
        Self {
            population: 50,
            generations: 100,
            crossover_rate: 0.8,
            mutation_rate: 0.2,
            lambda_distance: 0.5,
            lambda_diversity: 1.0,
            lambda_sparsity: 0.1,
        }
    }
}

/// Distance of a prediction to the desired interval (0 inside).
fn hinge(predicted: f64, range: (f64, f64)) -> f64 {
    (range.0 - predicted).max(0.0) + (predicted - range.1).max(0.0)
}

fn changed_fraction(query: &CfQuery, candidate: &[f64]) -> f64 {
    let changed = query
        .space
        .features
        .iter()
        .enumerate()
        .filter(|(i, f)| f.kind.differs(query.x[*i], candidate[*i]))
        .count();
    changed as f64 / query.space.len() as f64
}

fn random_candidate(query: &CfQuery, rng: &mut ChaCha8Rng) -> Vec<f64> {
    query
        .space
        .features
        .iter()
        .map(|f| match f.kind {
            FeatureKind::Integer { lo, hi } => rng.gen_range(lo..=hi) as f64,
            FeatureKind::Continuous { lo, hi } => {
                if hi > lo {
                    rng.gen_range(lo..=hi)
                } else {
                    lo
                }
            }
        })
        .collect()
}

fn mutate(query: &CfQuery, genome: &mut [f64], rate: f64, rng: &mut ChaCha8Rng) {
    for (i, spec) in query.space.features.iter().enumerate() {
        if !rng.gen_bool(rate) {
            continue;
        }
        match spec.kind {
            FeatureKind::Integer { lo, hi } => {
                // half the time a local +/-1 step, otherwise a fresh draw
                if rng.gen_bool(0.5) {
                    let step = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                    genome[i] = (genome[i] + step).clamp(lo as f64, hi as f64);
                } else {
                    genome[i] = rng.gen_range(lo..=hi) as f64;
                }
            }
            FeatureKind::Continuous { lo, hi } => {
                let sigma = (hi - lo) / 10.0;
                if sigma > 0.0 {
                    let noise: f64 = rng.gen_range(-1.0..1.0) + rng.gen_range(-1.0..1.0);
                    genome[i] = (genome[i] + noise * sigma).clamp(lo, hi);
                }
            }
        }
    }
}

/// Walk a valid candidate back toward the query, feature by feature, keeping
/// the prediction inside the desired range. Integer genes step unit-wise;
/// continuous genes bisect between the query value and the current one.
/// Invalid candidates are left untouched.
fn refine_toward_query(query: &CfQuery, model: &FittedModel, genome: &mut [f64]) {
    if !query.accepts(model.predict_score(genome)) {
        return;
    }
    for _pass in 0..4 {
        let mut improved = false;
        for (i, spec) in query.space.features.iter().enumerate() {
            let target = spec.kind.snap(query.x[i]);
            if !spec.kind.differs(genome[i], target) {
                continue;
            }
            match spec.kind {
                FeatureKind::Integer { .. } => loop {
                    let step = (target - genome[i]).signum();
                    let candidate = genome[i] + step;
                    let old = genome[i];
                    genome[i] = candidate;
                    if query.accepts(model.predict_score(genome)) {
                        improved = true;
                        if !spec.kind.differs(genome[i], target) {
                            break;
                        }
                    } else {
                        genome[i] = old;
                        break;
                    }
                },
                FeatureKind::Continuous { .. } => {
                    let current = genome[i];
                    genome[i] = target;
                    if query.accepts(model.predict_score(genome)) {
                        improved = true;
                        continue;
                    }
                    // bisect: find the point nearest the target that stays valid
                    let (mut bad, mut good) = (target, current);
                    for _ in 0..30 {
                        let mid = 0.5 * (bad + good);
                        genome[i] = mid;
                        if query.accepts(model.predict_score(genome)) {
                            good = mid;
                        } else {
                            bad = mid;
                        }
                    }
                    genome[i] = good;
                    if (good - current).abs() > 1e-9 {
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            break;
        }
    }
}

struct Individual {
    genome: Vec<f64>,
    predicted: f64,
    hinge: f64,
    dist: f64,
    changed: f64,
}

impl Individual {
    fn evaluate(query: &CfQuery, model: &FittedModel, ranges: &[f64], genome: Vec<f64>) -> Self {
        let predicted = model.predict_score(&genome);
        Self {
            hinge: hinge(predicted, query.desired_range),
            dist: distance(&query.x, &genome, ranges),
            changed: changed_fraction(query, &genome),
            predicted,
            genome,
        }
    }
}

/// Evolve counterfactual candidates; deterministic given the seed.
pub fn generate_genetic(
    query: &CfQuery,
    model: &FittedModel,
    params: &GeneticParams,
    seed: u64,
) -> Result<CfSet> {
    query.validate()?;
    let mut rng = seeds::rng(seed, 0xCF_6E);
    let ranges = query.space.ranges();
    let pop_size = params.population.max(query.k.max(4));

    // seed the population with x itself, single-feature nudges, and randoms
    let mut population: Vec<Individual> = Vec::with_capacity(pop_size);
    let mut x0 = query.x.clone();
    query.space.snap(&mut x0);
    population.push(Individual::evaluate(query, model, &ranges, x0.clone()));
    for i in 0..query.space.len().min(pop_size - 1) {
        let mut nudged = x0.clone();
        let spec = &query.space.features[i];
        let bump = match spec.kind {
            FeatureKind::Integer { .. } => 1.0,
            FeatureKind::Continuous { lo, hi } => (hi - lo) / 5.0,
        };
        nudged[i] = spec.kind.snap(nudged[i] + bump);
        population.push(Individual::evaluate(query, model, &ranges, nudged));
    }
    while population.len() < pop_size {
        let genome = random_candidate(query, &mut rng);
        population.push(Individual::evaluate(query, model, &ranges, genome));
    }

    let fitness_of = |ind: &Individual, rest_diversity: f64, p: &GeneticParams| {
        ind.hinge + p.lambda_distance * ind.dist - p.lambda_diversity * rest_diversity
            + p.lambda_sparsity * ind.changed
    };

    let elite = 2usize.min(pop_size);
    for _generation in 0..params.generations {
        // mean pairwise distance of each member to the rest of the population
        let n = population.len();
        let mut diversity = vec![0.0; n];
        for i in 0..n {
            for j in i + 1..n {
                let d = distance(&population[i].genome, &population[j].genome, &ranges);
                diversity[i] += d;
                diversity[j] += d;
            }
        }
        for d in diversity.iter_mut() {
            *d /= (n - 1).max(1) as f64;
        }
        let fitness: Vec<f64> = population
            .iter()
            .zip(&diversity)
            .map(|(ind, &div)| fitness_of(ind, div, params))
            .collect();

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| fitness[a].partial_cmp(&fitness[b]).unwrap().then(a.cmp(&b)));

        let mut next: Vec<Individual> = Vec::with_capacity(n);
        for &i in order.iter().take(elite) {
            next.push(Individual::evaluate(query, model, &ranges, population[i].genome.clone()));
        }
        let tournament = |rng: &mut ChaCha8Rng| -> usize {
            let mut best = rng.gen_range(0..n);
            for _ in 0..2 {
                let challenger = rng.gen_range(0..n);
                if fitness[challenger] < fitness[best] {
                    best = challenger;
                }
            }
            best
        };
        while next.len() < n {
            let a = tournament(&mut rng);
            let b = tournament(&mut rng);
            let mut child = population[a].genome.clone();
            if rng.gen_bool(params.crossover_rate) {
                for (gene, other) in child.iter_mut().zip(&population[b].genome) {
                    if rng.gen_bool(0.5) {
                        *gene = *other;
                    }
                }
            }
            mutate(query, &mut child, params.mutation_rate, &mut rng);
            next.push(Individual::evaluate(query, model, &ranges, child));
        }
        population = next;
    }

    // final ranking; prefer distinct genomes for the returned set
    let n = population.len();
    let mut diversity = vec![0.0; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = distance(&population[i].genome, &population[j].genome, &ranges);
            diversity[i] += d;
            diversity[j] += d;
        }
    }
    for d in diversity.iter_mut() {
        *d /= (n - 1).max(1) as f64;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let fa = fitness_of(&population[a], diversity[a], params);
        let fb = fitness_of(&population[b], diversity[b], params);
        fa.partial_cmp(&fb).unwrap().then(a.cmp(&b))
    });

    let mut chosen: Vec<usize> = Vec::with_capacity(query.k);
    for &i in &order {
        if chosen.len() == query.k {
            break;
        }
        if chosen.iter().all(|&c| population[c].genome != population[i].genome) {
            chosen.push(i);
        }
    }
    for &i in &order {
        if chosen.len() == query.k {
            break;
        }
        chosen.push(i); // pad with duplicates only if uniqueness ran out
    }

    let counterfactuals: Vec<Counterfactual> = chosen
        .into_iter()
        .map(|i| {
            let mut genome = population[i].genome.clone();
            refine_toward_query(query, model, &mut genome);
            let predicted = model.predict_score(&genome);
            Counterfactual::from_vector(&query.x, genome, predicted, &query.space)
        })
        .collect();
    let shortfall = counterfactuals.len() < query.k;
    Ok(CfSet { counterfactuals, shortfall })
}
