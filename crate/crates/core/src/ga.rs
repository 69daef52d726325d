//! Genetic search over decoding indicator matrices.
//!
//! A gene is the strict upper triangle of the matrix, read row by row.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{channel_table, AntennaPositionVector, CVec, ChannelRealization, SystemConfig};
use crate::rates::{gain_table, rates_from_table, DecodingIndicatorMatrix};
use crate::CoreError;

/// Tolerance below the QoS target that still counts as satisfied.
pub const QOS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Gene(pub Vec<bool>);

impl Gene {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn key(&self) -> Vec<u64> {
        let mut out = vec![0u64; self.0.len().div_ceil(64).max(1)];
        for (n, &b) in self.0.iter().enumerate() {
            if b {
                out[n / 64] |= 1 << (n % 64);
            }
        }
        out
    }
}

pub fn gene_len(k: usize) -> usize {
    k * k.saturating_sub(1) / 2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population: usize,
    pub penalty: f64,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub generations: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 100,
            penalty: 100.0,
            crossover_prob: 0.5,
            mutation_prob: 0.1,
            generations: 200,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), CoreError> {
        let bad = |field: &str, reason: &str| {
            Err(CoreError::InvalidConfig {
                field: field.into(),
                reason: reason.into(),
            })
        };
        if self.population < 2 || self.population % 2 != 0 {
            return bad("population", "must be an even number of at least 2");
        }
        if !(self.penalty >= 0.0 && self.penalty.is_finite()) {
            return bad("penalty", "must be finite and non-negative");
        }
        if !(0.0..=1.0).contains(&self.crossover_prob) {
            return bad("crossover_prob", "must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.mutation_prob) {
            return bad("mutation_prob", "must lie in [0, 1]");
        }
        if self.generations == 0 {
            return bad("generations", "must be positive");
        }
        Ok(())
    }
}

pub fn gene_to_matrix(gene: &Gene, k: usize) -> Result<DecodingIndicatorMatrix, CoreError> {
    if gene.len() != gene_len(k) {
        return Err(CoreError::InvalidArgument(format!(
            "gene of length {} does not match {k} users (expected {})",
            gene.len(),
            gene_len(k)
        )));
    }
    let mut m = DecodingIndicatorMatrix::identity(k);
    let mut n = 0;
    for r in 0..k {
        for c in r + 1..k {
            m.set(r, c, gene.0[n]);
            n += 1;
        }
    }
    Ok(m)
}

pub fn matrix_to_gene(pi: &DecodingIndicatorMatrix) -> Gene {
    let k = pi.size();
    let mut bits = Vec::with_capacity(gene_len(k));
    for r in 0..k {
        for c in r + 1..k {
            bits.push(pi.get(r, c));
        }
    }
    Gene(bits)
}

/// Everything the fitness needs, with the gain table precomputed.
#[derive(Debug, Clone)]
pub struct FitnessContext {
    pub k: usize,
    pub table: DMatrix<f64>,
    pub noise: Vec<f64>,
    pub min_rate: f64,
    pub penalty: f64,
}

impl FitnessContext {
    pub fn new(
        w_set: &[CVec],
        apv: &AntennaPositionVector,
        realization: &ChannelRealization,
        config: &SystemConfig,
        min_rate: f64,
        penalty: f64,
    ) -> Self {
        let h = channel_table(apv, realization, config.wavelength);
        FitnessContext {
            k: realization.num_users(),
            table: gain_table(&h, w_set),
            noise: config.noise_table(),
            min_rate,
            penalty,
        }
    }

    pub fn rates(&self, pi: &DecodingIndicatorMatrix) -> Vec<f64> {
        rates_from_table(&self.table, pi, &self.noise)
    }

    pub fn evaluate(&self, pi: &DecodingIndicatorMatrix) -> f64 {
        let rates = self.rates(pi);
        let violations = rates.iter().filter(|&&r| r < self.min_rate - QOS_TOL).count();
        rates.iter().sum::<f64>() - self.penalty * violations as f64
    }
}

/// Penalized sum rate of the matrix encoded by `gene`.
pub fn fitness(gene: &Gene, ctx: &FitnessContext) -> Result<f64, CoreError> {
    Ok(ctx.evaluate(&gene_to_matrix(gene, ctx.k)?))
}

/// Roulette-wheel selection of `fitness.len()` parent indices. Fitness values are
/// shifted by `1 - min` when the smallest one is not positive.
pub fn select_parents<R: Rng>(fitness: &[f64], rng: &mut R) -> Vec<usize> {
    let n = fitness.len();
    let min = fitness.iter().cloned().fold(f64::INFINITY, f64::min);
    let shift = if min <= 0.0 { 1.0 - min } else { 0.0 };
    let weights: Vec<f64> = fitness.iter().map(|f| f + shift).collect();
    match WeightedIndex::new(&weights) {
        Ok(dist) => (0..n).map(|_| dist.sample(rng)).collect(),
        Err(_) => (0..n).map(|_| rng.random_range(0..n)).collect(),
    }
}

/// Uniform crossover: each locus is exchanged between the two parents with
/// probability `p_c`.
pub fn crossover<R: Rng>(a: &Gene, b: &Gene, p_c: f64, rng: &mut R) -> (Gene, Gene) {
    let mut x = a.clone();
    let mut y = b.clone();
    for n in 0..a.len() {
        let c: f64 = rng.random();
        if c < p_c {
            std::mem::swap(&mut x.0[n], &mut y.0[n]);
        }
    }
    (x, y)
}

/// Keeps the offspring only when it is strictly fitter than its parent.
pub fn elitist_accept(offspring: Gene, parent: Gene, f_offspring: f64, f_parent: f64) -> (Gene, f64) {
    if f_offspring > f_parent {
        (offspring, f_offspring)
    } else {
        (parent, f_parent)
    }
}

/// Picks one locus uniformly and flips it with probability `p_m`.
pub fn mutate<R: Rng>(gene: &mut Gene, p_m: f64, rng: &mut R) -> bool {
    if gene.is_empty() {
        return false;
    }
    let n = rng.random_range(0..gene.len());
    let d: f64 = rng.random();
    if d < p_m {
        gene.0[n] = !gene.0[n];
        true
    } else {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaResult {
    pub pi: DecodingIndicatorMatrix,
    pub best_fitness: f64,
    /// Best fitness seen after initialization and after every generation.
    pub trace: Vec<f64>,
    pub evaluations: usize,
}

struct Evaluator<'a> {
    ctx: &'a FitnessContext,
    cache: HashMap<Vec<u64>, f64>,
    evaluations: usize,
}

impl Evaluator<'_> {
    fn eval(&mut self, g: &Gene) -> f64 {
        let key = g.key();
        if let Some(&f) = self.cache.get(&key) {
            return f;
        }
        self.evaluations += 1;
        let f = fitness(g, self.ctx).expect("gene length fixed by the context");
        self.cache.insert(key, f);
        f
    }
}

/// Runs exactly `generations` generations and returns the best matrix seen.
pub fn run_ga<R: Rng>(ctx: &FitnessContext, config: &GaConfig, rng: &mut R) -> Result<GaResult, CoreError> {
    config.validate()?;
    let len = gene_len(ctx.k);
    let mut ev = Evaluator {
        ctx,
        cache: HashMap::new(),
        evaluations: 0,
    };
    if len == 0 {
        let g = Gene(Vec::new());
        let f = ev.eval(&g);
        return Ok(GaResult {
            pi: gene_to_matrix(&g, ctx.k)?,
            best_fitness: f,
            trace: vec![f],
            evaluations: ev.evaluations,
        });
    }
    let mut pop: Vec<Gene> = (0..config.population)
        .map(|_| Gene((0..len).map(|_| rng.random_bool(0.5)).collect()))
        .collect();
    let mut fit: Vec<f64> = pop.iter().map(|g| ev.eval(g)).collect();
    let (mut best, mut best_f) = best_of(&pop, &fit);
    let mut trace = vec![best_f];
    for _ in 0..config.generations {
        let parents = select_parents(&fit, rng);
        let mut next = Vec::with_capacity(pop.len());
        for pair in parents.chunks(2) {
            let (pa, pb) = (pair[0], pair[1]);
            let (ca, cb) = crossover(&pop[pa], &pop[pb], config.crossover_prob, rng);
            let fa = ev.eval(&ca);
            let fb = ev.eval(&cb);
            next.push(elitist_accept(ca, pop[pa].clone(), fa, fit[pa]).0);
            next.push(elitist_accept(cb, pop[pb].clone(), fb, fit[pb]).0);
        }
        for g in next.iter_mut() {
            mutate(g, config.mutation_prob, rng);
        }
        fit = next.iter().map(|g| ev.eval(g)).collect();
        pop = next;
        let (b, f) = best_of(&pop, &fit);
        if f > best_f {
            best = b;
            best_f = f;
        }
        trace.push(best_f);
    }
    Ok(GaResult {
        pi: gene_to_matrix(&best, ctx.k)?,
        best_fitness: best_f,
        trace,
        evaluations: ev.evaluations,
    })
}

fn best_of(pop: &[Gene], fit: &[f64]) -> (Gene, f64) {
    let mut idx = 0;
    for n in 1..pop.len() {
        if fit[n] > fit[idx] {
            idx = n;
        }
    }
    (pop[idx].clone(), fit[idx])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gene_round_trip() {
        let g = Gene(vec![true, false, true]);
        let m = gene_to_matrix(&g, 3).unwrap();
        assert_eq!(m.rows(), vec![vec![1, 1, 0], vec![0, 1, 1], vec![0, 0, 1]]);
        assert_eq!(matrix_to_gene(&m), g);
        assert!(gene_to_matrix(&Gene(vec![true]), 3).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(GaConfig::default().validate().is_ok());
        let odd = GaConfig {
            population: 7,
            ..GaConfig::default()
        };
        assert!(odd.validate().is_err());
    }

    #[test]
    fn elitism_keeps_parent_on_ties() {
        let a = Gene(vec![true]);
        let b = Gene(vec![false]);
        assert_eq!(elitist_accept(a.clone(), b.clone(), 1.0, 1.0).0, b);
        assert_eq!(elitist_accept(a.clone(), b, 2.0, 1.0).0, a);
    }

    #[test]
    fn crossover_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = Gene(vec![true; 6]);
        let b = Gene(vec![false; 6]);
        let (x, y) = crossover(&a, &b, 0.0, &mut rng);
        assert_eq!((x, y), (a.clone(), b.clone()));
        let (x, y) = crossover(&a, &b, 1.0, &mut rng);
        assert_eq!((x, y), (b, a));
    }
}
