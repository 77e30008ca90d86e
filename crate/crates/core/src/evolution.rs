//! Genetic search over data-base configurations.
//!
//! A chromosome holds one granularity per input variable and the lateral
//! displacements of that granularity's inner split points. Every candidate
//! is decoded into a data base, turned into a rule base on the selected
//! examples and scored on the whole training set.

use std::collections::{HashMap, HashSet};

use rand::seq::IndexedRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretize::GranularityLadder;
use crate::error::{Error, Result};
use crate::fuzzy::{apply_displacement, build_partition, FuzzyPartition};
use crate::rng::{self, substream_at};
use crate::sgd::SgdConfig;
use crate::tsk::{build_rulebase, fit_consequents, wang_mendel_antecedents, DataBase, TskRuleBase};

/// Largest displacement magnitude produced by the operators.
pub const ALPHA_LIMIT: f64 = 0.499999;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chromosome {
    pub granularities: Vec<usize>,
    /// `displacements[j].len() == granularities[j] - 1`.
    pub displacements: Vec<Vec<f64>>,
}

impl Chromosome {
    pub fn uniform(granularities: Vec<usize>) -> Self {
        let displacements = granularities.iter().map(|&g| vec![0.0; g - 1]).collect();
        Self {
            granularities,
            displacements,
        }
    }

    pub fn is_consistent(&self, ladders: &[GranularityLadder]) -> bool {
        self.granularities.len() == ladders.len()
            && self.displacements.len() == ladders.len()
            && self
                .granularities
                .iter()
                .zip(&self.displacements)
                .zip(ladders)
                .all(|((&g, a), l)| {
                    g >= 1
                        && g <= l.max_granularity()
                        && a.len() == g - 1
                        && a.iter().all(|v| v.abs() < crate::fuzzy::MAX_DISPLACEMENT)
                })
    }

    fn flat_displacements(&self) -> impl Iterator<Item = f64> + '_ {
        self.displacements.iter().flatten().copied()
    }

    fn key(&self) -> CacheKey {
        (
            self.granularities.clone(),
            self.flat_displacements().map(|a| (a * 1e9).round() as i64).collect(),
        )
    }
}

type CacheKey = (Vec<usize>, Vec<i64>);

/// Euclidean distance between the flattened displacement vectors.
pub fn displacement_distance(a: &Chromosome, b: &Chromosome) -> f64 {
    a.flat_displacements()
        .zip(b.flat_displacements())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Product of granularities allowed at initialization.
fn granularity_cap(ladders: &[GranularityLadder]) -> usize {
    ladders.len() * global_max(ladders)
}

fn global_max(ladders: &[GranularityLadder]) -> usize {
    ladders.iter().map(GranularityLadder::max_granularity).max().unwrap_or(1)
}

/// Half the population shares one granularity across all variables, the
/// other half draws each variable independently. Large rule grids are
/// trimmed by switching random variables off.
pub fn initialize_population(ladders: &[GranularityLadder], n: usize, seed: u64) -> Vec<Chromosome> {
    let mut r = rng::substream(seed, "init");
    let cap = granularity_cap(ladders);
    let gmax = global_max(ladders);
    (0..n)
        .map(|i| {
            let mut g: Vec<usize> = if i < n / 2 {
                let shared = r.random_range(1..=gmax);
                ladders.iter().map(|l| shared.min(l.max_granularity())).collect()
            } else {
                ladders.iter().map(|l| r.random_range(1..=l.max_granularity())).collect()
            };
            while g.iter().product::<usize>() > cap {
                let active: Vec<usize> = (0..g.len()).filter(|&j| g[j] > 1).collect();
                let &j = active.choose(&mut r).expect("product above cap needs an active variable");
                g[j] = 1;
            }
            Chromosome::uniform(g)
        })
        .collect()
}

/// Builds the data base coded by `ch`.
pub fn decode(ch: &Chromosome, ladders: &[GranularityLadder], fuzziness: f64) -> Result<DataBase> {
    let partitions = ch
        .granularities
        .iter()
        .zip(&ch.displacements)
        .zip(ladders)
        .map(|((&g, alphas), ladder)| -> Result<FuzzyPartition> {
            if g == 0 || g > ladder.max_granularity() {
                return Err(Error::InvalidArgument(format!(
                    "granularity {g} outside 1..={} for variable {}",
                    ladder.max_granularity(),
                    ladder.variable
                )));
            }
            if g == 1 {
                let (lo, hi) = ladder.domain();
                return FuzzyPartition::single(lo, hi, fuzziness);
            }
            let displaced = apply_displacement(ladder.splits(g), alphas)?;
            build_partition(&displaced.splits, fuzziness)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DataBase::new(partitions))
}

/// `(1 / 2n) * sum of squared errors`.
pub fn half_mse(rb: &TskRuleBase, xs: &[Vec<f64>], ys: &[f64]) -> f64 {
    let se: f64 = xs.iter().zip(ys).map(|(x, y)| (rb.predict(x) - y).powi(2)).sum();
    se / (2.0 * ys.len() as f64)
}

/// Examples and settings shared by every fitness evaluation.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    pub ladders: &'a [GranularityLadder],
    pub selected_x: &'a [Vec<f64>],
    pub selected_y: &'a [f64],
    pub train_x: &'a [Vec<f64>],
    pub train_y: &'a [f64],
    pub sgd: SgdConfig,
    pub fuzziness: f64,
}

impl Problem<'_> {
    pub fn rulebase(&self, ch: &Chromosome) -> Result<TskRuleBase> {
        let db = decode(ch, self.ladders, self.fuzziness)?;
        build_rulebase(&db, self.selected_x, self.selected_y, &self.sgd)
    }

    /// Training error of the rule base built from `ch`; `+inf` when no rule
    /// base can be built.
    pub fn fitness(&self, ch: &Chromosome) -> f64 {
        match self.rulebase(ch) {
            Ok(rb) => {
                let f = half_mse(&rb, self.train_x, self.train_y);
                if f.is_finite() {
                    f
                } else {
                    f64::INFINITY
                }
            }
            Err(_) => f64::INFINITY,
        }
    }

    /// Keeps the antecedents learned on the selected examples and refits
    /// the consequents on the whole training set.
    pub fn refit(&self, ch: &Chromosome) -> Result<TskRuleBase> {
        let db = decode(ch, self.ladders, self.fuzziness)?;
        let antecedents = wang_mendel_antecedents(&db, self.selected_x);
        fit_consequents(&db, antecedents, self.train_x, self.train_y, &self.sgd)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub chromosome: Chromosome,
    pub fitness: f64,
}

/// Binary tournament: two distinct members, lower fitness wins, ties go to
/// the first drawn.
pub fn tournament_select<R: Rng>(population: &[Individual], r: &mut R) -> usize {
    let n = population.len();
    let a = r.random_range(0..n);
    let mut b = r.random_range(0..n - 1);
    if b >= a {
        b += 1;
    }
    if population[b].fitness < population[a].fitness {
        b
    } else {
        a
    }
}

/// One-point crossover on granularities when they differ, PCBLX on the
/// displacements otherwise. `None` when the parents are too close or no
/// cut point exists.
pub fn crossover<R: Rng>(a: &Chromosome, b: &Chromosome, l: f64, r: &mut R) -> Option<(Chromosome, Chromosome)> {
    let p = a.granularities.len();
    if a.granularities != b.granularities {
        if p < 2 {
            return None;
        }
        let cut = r.random_range(1..p);
        let splice = |x: &Chromosome, y: &Chromosome| Chromosome {
            granularities: [&x.granularities[..cut], &y.granularities[cut..]].concat(),
            displacements: [&x.displacements[..cut], &y.displacements[cut..]].concat(),
        };
        return Some((splice(a, b), splice(b, a)));
    }
    if displacement_distance(a, b) < l {
        return None;
    }
    let mut pcblx = |center: &Chromosome, other: &Chromosome| Chromosome {
        granularities: center.granularities.clone(),
        displacements: center
            .displacements
            .iter()
            .zip(&other.displacements)
            .map(|(ca, cb)| {
                ca.iter()
                    .zip(cb)
                    .map(|(&x, &y)| {
                        let spread = (x - y).abs();
                        let v = if spread > 0.0 {
                            r.random_range(x - spread..=x + spread)
                        } else {
                            x
                        };
                        v.clamp(-ALPHA_LIMIT, ALPHA_LIMIT)
                    })
                    .collect()
            })
            .collect(),
    };
    let c1 = pcblx(a, b);
    let c2 = pcblx(b, a);
    Some((c1, c2))
}

/// Displacements for `new_splits` interpolated from those of `old_splits`,
/// with the domain ends fixed at zero.
pub fn remap_displacements(old_splits: &[f64], old_alphas: &[f64], new_splits: &[f64]) -> Vec<f64> {
    let alpha_at = |k: usize| {
        if k == 0 || k == old_splits.len() - 1 {
            0.0
        } else {
            old_alphas[k - 1]
        }
    };
    let last = old_splits.len() - 1;
    new_splits[1..new_splits.len() - 1]
        .iter()
        .map(|&c| {
            let right = old_splits.partition_point(|&s| s < c).min(last);
            let v = if old_splits[right] == c || right == 0 {
                alpha_at(right)
            } else {
                let left = right - 1;
                let t = (c - old_splits[left]) / (old_splits[right] - old_splits[left]);
                alpha_at(left) * (1.0 - t) + alpha_at(right) * t
            };
            v.clamp(-ALPHA_LIMIT, ALPHA_LIMIT)
        })
        .collect()
}

/// With probability `p_mut`, changes the granularity of one variable:
/// one step down or a jump to any higher granularity, equally likely.
/// Impossible moves are redrawn in the other direction.
pub fn mutate<R: Rng>(ch: &Chromosome, ladders: &[GranularityLadder], p_mut: f64, r: &mut R) -> Chromosome {
    let mut out = ch.clone();
    if r.random::<f64>() >= p_mut || ch.granularities.is_empty() {
        return out;
    }
    let j = r.random_range(0..ch.granularities.len());
    let g = ch.granularities[j];
    let max = ladders[j].max_granularity();
    let mut decrease = r.random_bool(0.5);
    if decrease && g == 1 {
        decrease = false;
    } else if !decrease && g == max {
        decrease = true;
    }
    let new_g = if decrease {
        if g == 1 {
            return out;
        }
        g - 1
    } else {
        if g >= max {
            return out;
        }
        r.random_range(g + 1..=max)
    };
    out.granularities[j] = new_g;
    out.displacements[j] = remap_displacements(ladders[j].splits(g), &ch.displacements[j], ladders[j].splits(new_g));
    out
}

/// Random chromosome with each granularity at most the reference one.
fn local_candidate<R: Rng>(reference: &Chromosome, r: &mut R) -> Chromosome {
    let granularities: Vec<usize> = reference.granularities.iter().map(|&g| r.random_range(1..=g)).collect();
    let displacements = granularities
        .iter()
        .map(|&g| (1..g).map(|_| r.random_range(-ALPHA_LIMIT..=ALPHA_LIMIT)).collect())
        .collect();
    Chromosome {
        granularities,
        displacements,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub population: usize,
    pub budget: usize,
    pub p_mut: f64,
    pub n_ls: usize,
    pub seed: u64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            population: 61,
            budget: 100_000,
            p_mut: 0.2,
            n_ls: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionReport {
    pub evaluations: usize,
    pub generations: usize,
    pub restarts: usize,
    /// Best fitness after initialization and after every generation.
    pub best_history: Vec<f64>,
    pub best_fitness: f64,
    pub best: Chromosome,
}

/// Fitness bookkeeping: memoized evaluations and the budget counter.
struct Evaluator<'p, 'a> {
    problem: &'p Problem<'a>,
    cache: HashMap<CacheKey, f64>,
    evaluations: usize,
    budget: usize,
}

impl Evaluator<'_, '_> {
    fn exhausted(&self) -> bool {
        self.evaluations >= self.budget
    }

    /// Fitness of each chromosome, `None` for those left unevaluated once
    /// the budget ran out. Cache hits are free.
    fn evaluate(&mut self, batch: &[Chromosome]) -> Vec<Option<f64>> {
        let mut pending: Vec<(CacheKey, &Chromosome)> = Vec::new();
        let mut queued: HashSet<CacheKey> = HashSet::new();
        for ch in batch {
            let key = ch.key();
            if !self.cache.contains_key(&key) && !queued.contains(&key) && self.evaluations + pending.len() < self.budget {
                queued.insert(key.clone());
                pending.push((key, ch));
            }
        }
        let problem = self.problem;
        let scores: Vec<f64> = pending.par_iter().map(|(_, ch)| problem.fitness(ch)).collect();
        self.evaluations += pending.len();
        for ((key, _), f) in pending.into_iter().zip(scores) {
            self.cache.insert(key, f);
        }
        batch.iter().map(|ch| self.cache.get(&ch.key()).copied()).collect()
    }

    fn evaluate_into(&mut self, batch: Vec<Chromosome>) -> Vec<Individual> {
        let scores = self.evaluate(&batch);
        batch
            .into_iter()
            .zip(scores)
            .filter_map(|(chromosome, f)| f.map(|fitness| Individual { chromosome, fitness }))
            .collect()
    }

    /// Best of `reference` and `n_ls` random candidates no coarser than it;
    /// the reference is replaced only on strict improvement.
    fn local_search(&mut self, reference: Individual, n_ls: usize, seed: u64, path: &[u64]) -> Individual {
        let mut r = substream_at(seed, "local-search", path);
        let candidates: Vec<Chromosome> = (0..n_ls).map(|_| local_candidate(&reference.chromosome, &mut r)).collect();
        let mut best = reference;
        for cand in self.evaluate_into(candidates) {
            if cand.fitness < best.fitness {
                best = cand;
            }
        }
        best
    }
}

fn sort_by_fitness(v: &mut [Individual]) {
    v.sort_by(|a, b| a.fitness.total_cmp(&b.fitness));
}

/// Runs the search and returns the best chromosome found with its rule base
/// refitted on the full training set.
pub fn run(problem: &Problem<'_>, cfg: &EvolutionConfig) -> Result<(TskRuleBase, EvolutionReport)> {
    if cfg.population < 2 {
        return Err(Error::InvalidArgument("population must hold at least 2 individuals".into()));
    }
    if !(0.0..=1.0).contains(&cfg.p_mut) {
        return Err(Error::InvalidArgument(format!("mutation probability {} outside [0, 1]", cfg.p_mut)));
    }
    if cfg.budget == 0 {
        return Err(Error::InvalidArgument("evaluation budget must be positive".into()));
    }
    let ladders = problem.ladders;
    let n = cfg.population;
    let mut ev = Evaluator {
        problem,
        cache: HashMap::new(),
        evaluations: 0,
        budget: cfg.budget,
    };
    let l0 = (ladders.len() * global_max(ladders)) as f64 / 4.0;

    let initial = initialize_population(ladders, n, cfg.seed);
    let mut seen_c1: HashSet<Vec<usize>> = initial.iter().map(|c| c.granularities.clone()).collect();
    let mut population = ev.evaluate_into(initial);
    sort_by_fitness(&mut population);
    if population.is_empty() {
        return Err(Error::InvalidArgument("evaluation budget too small to score any individual".into()));
    }
    let mut best_history = vec![population[0].fitness];
    let mut l = l0;
    let mut restarts = 0;
    let mut generations = 0usize;

    while !ev.exhausted() {
        generations += 1;
        let gen = generations as u64;
        let mut r = substream_at(cfg.seed, "generation", &[gen]);
        let best_before = population[0].fitness;

        let mut children: Vec<Chromosome> = Vec::with_capacity(n + 1);
        for _ in 0..n.div_ceil(2) {
            let a = &population[tournament_select(&population, &mut r)].chromosome;
            let b = &population[tournament_select(&population, &mut r)].chromosome;
            let (c1, c2) = crossover(a, b, l, &mut r).unwrap_or_else(|| (a.clone(), b.clone()));
            for (child, parents) in [(c1, (a, b)), (c2, (a, b))] {
                let child = mutate(&child, ladders, cfg.p_mut, &mut r);
                if child != *parents.0 && child != *parents.1 {
                    children.push(child);
                }
            }
        }
        children.truncate(n);
        let mut offspring = ev.evaluate_into(children);

        for (k, child) in offspring.iter_mut().enumerate() {
            if seen_c1.insert(child.chromosome.granularities.clone()) && cfg.n_ls > 0 {
                *child = ev.local_search(child.clone(), cfg.n_ls, cfg.seed, &[gen, k as u64]);
            }
        }

        let mut merged: Vec<(bool, Individual)> = population
            .drain(..)
            .map(|i| (false, i))
            .chain(offspring.into_iter().map(|i| (true, i)))
            .collect();
        merged.sort_by(|a, b| a.1.fitness.total_cmp(&b.1.fitness));
        merged.truncate(n);
        let accepted = merged.iter().filter(|(child, _)| *child).count();
        population = merged.into_iter().map(|(_, i)| i).collect();

        let improved = population[0].fitness < best_before;
        best_history.push(population[0].fitness);
        l -= 0.4;
        if accepted == 0 {
            l -= 0.2;
        }
        if !improved {
            l -= 0.2;
        }
        if l <= 0.0 {
            if restarts == 1 {
                break;
            }
            restarts = 1;
            let best = population[0].clone();
            let mut r = substream_at(cfg.seed, "restart", &[gen]);
            let refill: Vec<Chromosome> = (1..n).map(|_| local_candidate(&best.chromosome, &mut r)).collect();
            population = std::iter::once(best).chain(ev.evaluate_into(refill)).collect();
            sort_by_fitness(&mut population);
            l = l0;
        }
    }

    let best = population[0].clone();
    let rb = problem.refit(&best.chromosome)?;
    Ok((
        rb,
        EvolutionReport {
            evaluations: ev.evaluations,
            generations,
            restarts,
            best_history,
            best_fitness: best.fitness,
            best: best.chromosome,
        },
    ))
}
