//! Seeded Monte Carlo estimation of the exit quantities, for cross-checking
//! the exact route and for capital sizes beyond linear-solve reach.
//!
//! Reproducibility contract: the estimate is a pure function of
//! `(seed, trials)`. Every trial draws from its own counter-derived stream
//! (stream id = trial index), and the accumulation is chunked in fixed order
//! with compensated summation, so worker count changes wall time only.

use crate::exact::Quantity;
use crate::model::{BoundarySide, ModelError, Site, StepSet, TriangleDomain};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

/// Hard guard against a non-terminating walk; absorption is almost sure, so
/// reaching this is a bug or a pathological step set.
pub const STEP_CAP: u64 = 1_000_000_000;

const CHUNK: u64 = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McError {
    #[error("walk exceeded the {STEP_CAP}-step cap without exiting")]
    StepCapExceeded,
    #[error("trials must be at least 1")]
    NoTrials,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// How to settle the heads-up endgame after the first elimination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SecondStage {
    /// Use the fair gambler's-ruin win probability `a/N` as the trial weight.
    #[default]
    Analytic,
    /// Run the fair +-1 walk on the edge until a vertex is hit.
    Simulated,
}

#[derive(Debug, Clone, Copy)]
pub struct McOptions {
    pub trials: u64,
    pub seed: u64,
    pub workers: usize,
    pub second_stage: SecondStage,
}

impl McOptions {
    pub fn new(trials: u64, seed: u64) -> Self {
        McOptions {
            trials,
            seed,
            workers: 0,
            second_stage: SecondStage::Analytic,
        }
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: u64,
}

impl McEstimate {
    /// Whether `value` lies within `k` standard errors of the mean.
    pub fn brackets(&self, value: f64, k: f64) -> bool {
        (value - self.mean).abs() <= k * self.stderr
    }
}

/// Run the walk from `start` until it leaves the interior; returns the
/// boundary point hit and the number of steps taken.
pub fn simulate_until_exit(
    domain: &TriangleDomain,
    start: (i64, i64),
    steps: &StepSet,
    rng: &mut impl Rng,
) -> Result<(BoundarySide, (i64, i64), u64), McError> {
    if !domain.is_interior(start.0, start.1) {
        return Err(McError::Model(ModelError::NotInterior(start.0, start.1)));
    }
    let (weights, _, total) = steps.weight_parts();
    let offsets = steps.offsets();
    // cumulative weights over the six offsets; a draw beyond them is a hold
    let mut cum = [0u32; 6];
    let mut acc = 0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        cum[i] = acc;
    }
    let (mut a, mut b) = start;
    for taken in 1..=STEP_CAP {
        let draw = rng.gen_range(0..total);
        let mut moved = false;
        for (i, &c) in cum.iter().enumerate() {
            if draw < c {
                a += offsets[i].0;
                b += offsets[i].1;
                moved = true;
                break;
            }
        }
        if !moved {
            continue; // hold step, position unchanged, still counts as a step
        }
        match domain.classify(a, b) {
            Some(Site::Interior(..)) => {}
            Some(Site::Boundary(side, point)) => return Ok((side, point, taken)),
            None => unreachable!("one step from the interior stays in the closed triangle"),
        }
    }
    Err(McError::StepCapExceeded)
}

/// Fair +-1 endgame on an edge: player with `capital` of `n` wins iff the
/// walk reaches `n` before 0.
fn heads_up(capital: i64, n: i64, rng: &mut impl Rng) -> Result<bool, McError> {
    let mut c = capital;
    for _ in 0..STEP_CAP {
        if c == 0 {
            return Ok(false);
        }
        if c == n {
            return Ok(true);
        }
        c += if rng.gen::<bool>() { 1 } else { -1 };
    }
    Err(McError::StepCapExceeded)
}

fn settle(
    second_stage: SecondStage,
    capital: i64,
    n: i64,
    rng: &mut impl Rng,
) -> Result<f64, McError> {
    match second_stage {
        SecondStage::Analytic => Ok(capital as f64 / n as f64),
        SecondStage::Simulated => heads_up(capital, n, rng).map(|won| if won { 1.0 } else { 0.0 }),
    }
}

fn trial_value(
    q: Quantity,
    domain: &TriangleDomain,
    start: (i64, i64),
    steps: &StepSet,
    second_stage: SecondStage,
    rng: &mut impl Rng,
) -> Result<f64, McError> {
    let n = domain.n();
    let (side, point, _) = simulate_until_exit(domain, start, steps, rng)?;
    match (q, side) {
        (Quantity::ThirdFirst, BoundarySide::B3) => Ok(1.0),
        (Quantity::ThirdFirst, _) => Ok(0.0),
        // first player holds `point.0` against the survivor in a fair game
        (Quantity::P321, BoundarySide::B3) => settle(second_stage, point.0, n, rng),
        (Quantity::P321, _) => Ok(0.0),
        (Quantity::FirstWins, BoundarySide::B1) => Ok(0.0),
        (Quantity::FirstWins, _) => settle(second_stage, point.0, n, rng),
    }
}

/// Neumaier-compensated sum over a slice-producing iterator.
#[derive(Debug, Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    c: f64,
}

impl Compensated {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.c += (self.sum - t) + v;
        } else {
            self.c += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.c
    }
}

/// Unbiased estimate of a quantity, seeded and worker-independent.
pub fn estimate(
    q: Quantity,
    n: i64,
    start: (i64, i64),
    steps: &StepSet,
    opts: &McOptions,
) -> Result<McEstimate, McError> {
    if opts.trials == 0 {
        return Err(McError::NoTrials);
    }
    crate::model::GamblerConfig::new(n, start.0, start.1)?;
    let domain = TriangleDomain::new(n)?;

    let chunk_sums = |range: std::ops::Range<u64>| -> Result<(Compensated, Compensated), McError> {
        let mut s = Compensated::default();
        let mut s2 = Compensated::default();
        for trial in range {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(trial);
            let v = trial_value(q, &domain, start, steps, opts.second_stage, &mut rng)?;
            s.add(v);
            s2.add(v * v);
        }
        Ok((s, s2))
    };

    let n_chunks = opts.trials.div_ceil(CHUNK);
    let ranges: Vec<std::ops::Range<u64>> = (0..n_chunks)
        .map(|c| (c * CHUNK)..((c + 1) * CHUNK).min(opts.trials))
        .collect();
    let partials: Result<Vec<_>, McError> = if opts.workers == 1 {
        ranges.into_iter().map(chunk_sums).collect()
    } else {
        let run = || ranges.par_iter().cloned().map(&chunk_sums).collect();
        if opts.workers > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(opts.workers)
                .build()
                .expect("thread pool");
            pool.install(run)
        } else {
            run()
        }
    };
    // combine in fixed chunk order so the result is scheduling-independent
    let mut sum = Compensated::default();
    let mut sumsq = Compensated::default();
    for (s, s2) in partials? {
        sum.add(s.value());
        sumsq.add(s2.value());
    }
    let t = opts.trials as f64;
    let mean = sum.value() / t;
    let stderr = if opts.trials > 1 {
        let var = ((sumsq.value() - sum.value() * sum.value() / t) / (t - 1.0)).max(0.0);
        (var / t).sqrt()
    } else {
        0.0
    };
    Ok(McEstimate {
        mean,
        stderr,
        trials: opts.trials,
    })
}
