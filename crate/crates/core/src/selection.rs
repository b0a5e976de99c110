//! Tx/Rx partition of the APs minimizing the entropy of the fused SAF.

use std::collections::HashMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::pipeline::{image_pairs, simulate, ImageSource, Mode, Roles, RunParams};
use crate::scenario::Scenario;
use crate::waveform::WaveformBank;

/// Largest number of candidates `solve_exhaustive` will enumerate.
pub const EXHAUSTIVE_BUDGET: u64 = 1_000_000;

/// Half-duplex role assignment: exactly one of `b_tx[n]`, `b_rx[n]` is set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Allocation {
    pub b_tx: Vec<bool>,
    pub b_rx: Vec<bool>,
}

impl Allocation {
    pub fn from_rx(n: usize, rx: &[usize]) -> Self {
        let b_rx: Vec<bool> = (0..n).map(|i| rx.contains(&i)).collect();
        Self {
            b_tx: b_rx.iter().map(|b| !b).collect(),
            b_rx,
        }
    }

    fn from_mask(n: usize, mask: u64) -> Self {
        let b_rx: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
        Self {
            b_tx: b_rx.iter().map(|b| !b).collect(),
            b_rx,
        }
    }

    /// Rx bitmask, bit `n` set when AP `n` receives.
    pub fn mask(&self) -> u64 {
        self.b_rx
            .iter()
            .enumerate()
            .fold(0, |m, (i, &b)| if b { m | 1 << i } else { m })
    }

    pub fn len(&self) -> usize {
        self.b_rx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b_rx.is_empty()
    }

    pub fn tx(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.b_tx[i]).collect()
    }

    pub fn rx(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.b_rx[i]).collect()
    }

    pub fn roles(&self) -> Roles {
        Roles {
            tx: self.tx(),
            rx: self.rx(),
        }
    }

    /// Half-duplex, full-use and Rx-budget constraints.
    pub fn check(&self, n_rx_max: usize) -> Result<()> {
        if self.b_tx.len() != self.b_rx.len() {
            return Err(Error::Constraint("b_tx and b_rx differ in length".into()));
        }
        if let Some(n) = (0..self.len()).find(|&i| self.b_tx[i] && self.b_rx[i]) {
            return Err(Error::Constraint(format!("AP {n} is both Tx and Rx")));
        }
        if let Some(n) = (0..self.len()).find(|&i| !self.b_tx[i] && !self.b_rx[i]) {
            return Err(Error::Constraint(format!("AP {n} is neither Tx nor Rx")));
        }
        let nrx = self.b_rx.iter().filter(|b| **b).count();
        if nrx > n_rx_max {
            return Err(Error::Constraint(format!(
                "{nrx} Rx APs exceed the budget of {n_rx_max}"
            )));
        }
        Ok(())
    }
}

/// Noiseless single-target images `I_nr` for every ordered pair `n != r`.
#[derive(Debug, Clone)]
pub struct SafCache {
    pub n: usize,
    images: Vec<Option<Image>>,
}

impl SafCache {
    pub fn new(n: usize, images: Vec<Option<Image>>) -> Result<Self> {
        if images.len() != n * n {
            return Err(Error::dims(n * n, images.len()));
        }
        Ok(Self { n, images })
    }

    pub fn get(&self, tx: usize, rx: usize) -> Option<&Image> {
        self.images[tx * self.n + rx].as_ref()
    }

    /// Scales every image by `c` (the selection is invariant to it).
    pub fn scale(&mut self, c: crate::grid::C64) {
        for img in self.images.iter_mut().flatten() {
            img.scale(c);
        }
    }
}

/// Desired-echo SAF of every ordered pair at `eta = 0`, from one full-duplex
/// run with the single center target. `bank` holds one waveform per AP.
pub fn saf_cache(scenario: &Scenario, bank: &WaveformBank, params: &RunParams) -> Result<SafCache> {
    let n = scenario.aps.len();
    let s = scenario.with_targets(vec![crate::pipeline::center_target(scenario)]);
    let p = RunParams {
        mode: Mode::Drn,
        noise: false,
        realizations: 1,
        ..params.clone()
    };
    let roles = Roles::for_mode(Mode::Drn, n, &[]);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let snap = simulate(&s, &roles, bank, &p, 0.0, &mut rng)?;
    let cirs: Vec<_> = snap.cirs.into_iter().filter(|c| c.tx != c.rx).collect();
    let imgs = image_pairs(&s, &cirs, ImageSource::Signal, p.interpolation)?;
    let mut images = vec![None; n * n];
    for img in imgs {
        let (t, r) = img.pairs[0];
        images[t * n + r] = Some(img);
    }
    SafCache::new(n, images)
}

/// Entropy of the fused image over the selected pairs (Tx-major order).
pub fn allocation_entropy(alloc: &Allocation, cache: &SafCache) -> Result<f64> {
    if alloc.len() != cache.n {
        return Err(Error::dims(cache.n, alloc.len()));
    }
    alloc.check(cache.n)?;
    let mut acc: Option<ndarray::Array2<crate::grid::C64>> = None;
    for n in alloc.tx() {
        for r in alloc.rx() {
            let img = cache
                .get(n, r)
                .ok_or_else(|| Error::Config(format!("no cached image for pair ({n}, {r})")))?;
            match acc.as_mut() {
                Some(a) => *a += &img.pixels,
                None => acc = Some(img.pixels.clone()),
            }
        }
    }
    let pixels = acc.ok_or(Error::UndefinedEntropy)?;
    crate::metrics::entropy_of_intensity(pixels.iter().map(|v| v.norm_sqr()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    /// Per-gene flip probability; `None` means `2 / N`.
    pub mutation_rate: Option<f64>,
    pub elitism: usize,
    pub tournament: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 64,
            generations: 200,
            crossover_rate: 0.9,
            mutation_rate: None,
            elitism: 2,
            tournament: 3,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::Config("GA population must be at least 2".into()));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) || self.mutation_rate.is_some_and(|m| !(0.0..=1.0).contains(&m))
        {
            return Err(Error::Config("GA rates must lie in [0, 1]".into()));
        }
        if self.tournament == 0 || self.elitism > self.population {
            return Err(Error::Config(
                "GA tournament must be >= 1 and elitism <= population".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub allocation: Allocation,
    pub entropy: f64,
    /// Distinct allocations whose entropy was computed.
    pub evaluations: usize,
    /// Incumbent entropy after each generation (GA only).
    pub history: Vec<f64>,
}

struct Objective<'a> {
    cache: &'a SafCache,
    memo: HashMap<u64, f64>,
}

impl Objective<'_> {
    fn eval_all(&mut self, masks: &[u64]) {
        let mut todo: Vec<u64> = masks.iter().copied().filter(|m| !self.memo.contains_key(m)).collect();
        todo.sort_unstable();
        todo.dedup();
        let cache = self.cache;
        let vals: Vec<f64> = todo
            .par_iter()
            .map(|&m| allocation_entropy(&Allocation::from_mask(cache.n, m), cache).unwrap_or(f64::INFINITY))
            .collect();
        self.memo.extend(todo.into_iter().zip(vals));
    }

    /// Moves Rx bits to Tx, each time the one whose removal gives the lowest
    /// entropy, until the budget holds; an empty Rx set gets one random Rx AP.
    fn repair<R: Rng + ?Sized>(&mut self, mut mask: u64, n_rx_max: usize, rng: &mut R) -> u64 {
        let n = self.cache.n;
        let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        mask &= full;
        if mask == 0 {
            mask = 1 << rng.random_range(0..n);
        }
        if mask == full && n > 1 {
            mask &= !(1 << rng.random_range(0..n));
        }
        while (mask.count_ones() as usize) > n_rx_max {
            let candidates: Vec<u64> = (0..n)
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| mask & !(1 << i))
                .collect();
            self.eval_all(&candidates);
            mask = *candidates
                .iter()
                .min_by(|a, b| self.memo[a].total_cmp(&self.memo[b]))
                .expect("mask has a set bit");
        }
        mask
    }
}

fn best_of(masks: &[u64], memo: &HashMap<u64, f64>) -> (u64, f64) {
    masks
        .iter()
        .map(|m| (*m, memo[m]))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .expect("non-empty population")
}

/// Genetic algorithm over the Rx bit vector (`b_tx = !b_rx`).
pub fn solve_ga(cache: &SafCache, n_rx_max: usize, config: &GaConfig) -> Result<SelectionResult> {
    config.validate()?;
    let n = cache.n;
    if n_rx_max == 0 {
        return Err(Error::Config("N_rx^max must be at least 1".into()));
    }
    if !(2..=64).contains(&n) {
        return Err(Error::Config(format!("selection supports 2..=64 APs (got {n})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut obj = Objective {
        cache,
        memo: HashMap::new(),
    };
    let pm = config.mutation_rate.unwrap_or((2.0 / n as f64).min(1.0));

    let mut pop: Vec<u64> = (0..config.population)
        .map(|_| {
            let k = rng.random_range(1..=n_rx_max.min(n - 1));
            let m = sample(&mut rng, n, k).iter().fold(0u64, |m, i| m | 1 << i);
            obj.repair(m, n_rx_max, &mut rng)
        })
        .collect();
    obj.eval_all(&pop);
    let mut history = Vec::with_capacity(config.generations);
    let mut incumbent = best_of(&pop, &obj.memo);

    for _ in 0..config.generations {
        let mut ranked = pop.clone();
        ranked.sort_by(|a, b| obj.memo[a].total_cmp(&obj.memo[b]).then(a.cmp(b)));
        let mut next: Vec<u64> = ranked.iter().take(config.elitism).copied().collect();
        while next.len() < config.population {
            let pa = tournament(&pop, &obj.memo, config.tournament, &mut rng);
            let pb = tournament(&pop, &obj.memo, config.tournament, &mut rng);
            let mut child = if rng.random::<f64>() < config.crossover_rate {
                let take: u64 = (0..n).fold(0, |m, i| if rng.random::<bool>() { m | 1 << i } else { m });
                (pa & take) | (pb & !take)
            } else {
                pa
            };
            for i in 0..n {
                if rng.random::<f64>() < pm {
                    child ^= 1 << i;
                }
            }
            next.push(obj.repair(child, n_rx_max, &mut rng));
        }
        obj.eval_all(&next);
        pop = next;
        let best = best_of(&pop, &obj.memo);
        if best.1 < incumbent.1 || (best.1 == incumbent.1 && best.0 < incumbent.0) {
            incumbent = best;
        }
        history.push(incumbent.1);
    }
    if !incumbent.1.is_finite() {
        return Err(Error::UndefinedEntropy);
    }
    Ok(SelectionResult {
        allocation: Allocation::from_mask(n, incumbent.0),
        entropy: incumbent.1,
        evaluations: obj.memo.len(),
        history,
    })
}

fn tournament<R: Rng + ?Sized>(pop: &[u64], memo: &HashMap<u64, f64>, size: usize, rng: &mut R) -> u64 {
    let mut best = pop[rng.random_range(0..pop.len())];
    for _ in 1..size {
        let c = pop[rng.random_range(0..pop.len())];
        if memo[&c] < memo[&best] {
            best = c;
        }
    }
    best
}

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Number of allocations with `1 <= sum b_rx <= n_rx_max`.
pub fn candidate_count(n: usize, n_rx_max: usize) -> u64 {
    (1..=n_rx_max.min(n))
        .map(|k| binomial(n as u64, k as u64))
        .fold(0u64, u64::saturating_add)
}

/// Global minimum by enumeration (first minimum in mask order on ties).
pub fn solve_exhaustive(cache: &SafCache, n_rx_max: usize) -> Result<SelectionResult> {
    let n = cache.n;
    let count = candidate_count(n, n_rx_max);
    if count > EXHAUSTIVE_BUDGET || n > 63 {
        return Err(Error::Budget {
            candidates: count,
            budget: EXHAUSTIVE_BUDGET,
        });
    }
    if n_rx_max == 0 {
        return Err(Error::Config("N_rx^max must be at least 1".into()));
    }
    let masks: Vec<u64> = (1u64..1 << n)
        .filter(|m| (m.count_ones() as usize) <= n_rx_max)
        .collect();
    let vals: Vec<f64> = masks
        .par_iter()
        .map(|&m| allocation_entropy(&Allocation::from_mask(n, m), cache).unwrap_or(f64::INFINITY))
        .collect();
    let (i, e) = vals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, e)| (i, *e))
        .ok_or(Error::UndefinedEntropy)?;
    if !e.is_finite() {
        return Err(Error::UndefinedEntropy);
    }
    Ok(SelectionResult {
        allocation: Allocation::from_mask(n, masks[i]),
        entropy: e,
        evaluations: masks.len(),
        history: Vec::new(),
    })
}

/// Random feasible allocation: `N_rx` uniform in `1..=min(N_rx^max, N-1)`,
/// then a uniform Rx subset of that size.
pub fn random_allocation<R: Rng + ?Sized>(n: usize, n_rx_max: usize, rng: &mut R) -> Allocation {
    let k = rng.random_range(1..=n_rx_max.min(n - 1).max(1));
    let rx: Vec<usize> = sample(rng, n, k).into_vec();
    Allocation::from_rx(n, &rx)
}

/// Entropies of `samples` random allocations.
pub fn random_baseline(cache: &SafCache, n_rx_max: usize, samples: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let allocs: Vec<Allocation> = (0..samples)
        .map(|_| random_allocation(cache.n, n_rx_max, &mut rng))
        .collect();
    allocs.par_iter().map(|a| allocation_entropy(a, cache)).collect()
}

/// Linear-interpolated quantile of unsorted data.
pub fn quantile(data: &[f64], q: f64) -> Option<f64> {
    if data.is_empty() {
        return None;
    }
    let mut v = data.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::C64;
    use crate::scenario::{Point, RegionOfInterest};
    use proptest::prelude::*;

    /// Cache of synthetic images: pair (n, r) lights pixel `(n + r) % P` with
    /// an amplitude depending on the pair, so entropies differ by allocation.
    fn synthetic_cache(n: usize) -> SafCache {
        let roi = RegionOfInterest::new(Point::new(0.0, 0.0), 4.0, 2.0, 1.0).unwrap();
        let mut images = vec![None; n * n];
        for t in 0..n {
            for r in 0..n {
                if t == r {
                    continue;
                }
                let mut img = Image::zeros(&roi);
                img.pixels[(0, 0)] = C64::new(1.0 + (t * 7 + r * 3) as f64 % 5.0, 0.3 * t as f64);
                let k = (t * r + t) % 8;
                img.pixels[(k / 4, k % 4)] += C64::new(0.5, -(r as f64) * 0.2);
                img.pairs = vec![(t, r)];
                images[t * n + r] = Some(img);
            }
        }
        SafCache::new(n, images).unwrap()
    }

    #[test]
    fn allocation_constraints() {
        let a = Allocation::from_rx(4, &[1, 3]);
        assert_eq!(a.tx(), vec![0, 2]);
        assert!(a.check(2).is_ok());
        assert!(matches!(a.check(1), Err(Error::Constraint(_))));
        let mut b = a.clone();
        b.b_tx[1] = true;
        assert!(b.check(4).is_err());
        b.b_tx[1] = false;
        b.b_rx[1] = false;
        assert!(b.check(4).is_err());
        assert_eq!(Allocation::from_mask(4, a.mask()), a);
    }

    #[test]
    fn two_ap_enumeration() {
        let cache = synthetic_cache(2);
        let e0 = allocation_entropy(&Allocation::from_rx(2, &[0]), &cache).unwrap();
        let e1 = allocation_entropy(&Allocation::from_rx(2, &[1]), &cache).unwrap();
        let ex = solve_exhaustive(&cache, 1).unwrap();
        assert_eq!(ex.evaluations, 2);
        assert_eq!(ex.entropy, e0.min(e1));
        assert!(matches!(
            allocation_entropy(&Allocation::from_rx(2, &[]), &cache),
            Err(Error::UndefinedEntropy)
        ));
    }

    #[test]
    fn exhaustive_counts_and_budget() {
        let cache = synthetic_cache(4);
        assert_eq!(solve_exhaustive(&cache, 1).unwrap().evaluations, 4);
        assert_eq!(candidate_count(4, 2), 10);
        assert_eq!(candidate_count(9, 4), 9 + 36 + 84 + 126);
        assert!(candidate_count(40, 20) > EXHAUSTIVE_BUDGET);
        let big = SafCache {
            n: 40,
            images: vec![None; 1600],
        };
        assert!(matches!(solve_exhaustive(&big, 20), Err(Error::Budget { .. })));
    }

    #[test]
    fn ga_matches_exhaustive_on_small_problems() {
        for n in [4, 6] {
            let cache = synthetic_cache(n);
            for n_rx_max in 1..n {
                let ex = solve_exhaustive(&cache, n_rx_max).unwrap();
                let ga = solve_ga(
                    &cache,
                    n_rx_max,
                    &GaConfig {
                        generations: 40,
                        seed: n_rx_max as u64,
                        ..GaConfig::default()
                    },
                )
                .unwrap();
                ga.allocation.check(n_rx_max).unwrap();
                assert!((ga.entropy - ex.entropy).abs() < 1e-12, "n={n} max={n_rx_max}");
                let rnd = random_baseline(&cache, n_rx_max, 50, 3).unwrap();
                assert!(rnd.iter().all(|e| *e >= ex.entropy - 1e-12));
            }
        }
    }

    #[test]
    fn ga_incumbent_never_worsens() {
        let cache = synthetic_cache(8);
        let r = solve_ga(
            &cache,
            3,
            &GaConfig {
                generations: 30,
                population: 8,
                seed: 5,
                ..GaConfig::default()
            },
        )
        .unwrap();
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(*r.history.last().unwrap(), r.entropy);
    }

    #[test]
    fn scale_leaves_argmin_unchanged() {
        let mut cache = synthetic_cache(5);
        let a = solve_exhaustive(&cache, 2).unwrap();
        cache.scale(C64::new(-3.0, 7.5));
        let b = solve_exhaustive(&cache, 2).unwrap();
        assert_eq!(a.allocation, b.allocation);
        assert!((a.entropy - b.entropy).abs() < 1e-9);
    }

    #[test]
    fn quantiles() {
        let d = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(quantile(&d, 0.0), Some(1.0));
        assert_eq!(quantile(&d, 1.0), Some(4.0));
        assert_eq!(quantile(&d, 0.5), Some(2.5));
        assert_eq!(quantile(&[], 0.5), None);
    }

    proptest! {
        #[test]
        fn ga_outputs_are_feasible(seed in 0u64..1000, n in 3usize..8, max in 1usize..6) {
            let cache = synthetic_cache(n);
            let max = max.min(n - 1);
            let r = solve_ga(&cache, max, &GaConfig { population: 6, generations: 5, seed, ..GaConfig::default() }).unwrap();
            prop_assert!(r.allocation.check(max).is_ok());
            prop_assert!(!r.allocation.rx().is_empty());
        }

        #[test]
        fn random_allocations_are_feasible(seed in 0u64..1000, n in 2usize..12, max in 1usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_allocation(n, max, &mut rng);
            prop_assert!(a.check(max).is_ok());
            prop_assert!(!a.rx().is_empty() && !a.tx().is_empty());
        }
    }
}
