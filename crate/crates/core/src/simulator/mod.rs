//! Path simulation and Monte-Carlo checks of the Laplace and mean identities.
//!
//! Path `k` of a run seeded with `master` draws from
//! `ChaCha8Rng::seed_from_u64(master)` switched to stream `k`, so every path
//! is reproducible on its own and the path set does not depend on the order
//! (or thread) in which paths are generated.

mod path;

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use path::{EventKind, PathEvent, Prepared};

use crate::environment::{special_to_general, SpecialForm};
use crate::error::{Error, Result};
use crate::moments::solve_moment;
use crate::solver::{solve_special_picard, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedSpec {
    pub master_seed: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    /// Accepts decimal or `0x`-prefixed hexadecimal.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
            Some(hex) => u64::from_str_radix(hex, 16),
            None => s.parse(),
        };
        parsed.map(Self::new).map_err(|_| Error::Domain(format!("invalid seed {s:?}")))
    }

    pub fn rng(&self, path: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(path);
        rng
    }
}

/// Simulates path number `path` up to `t`, returning the final state and the
/// event list.
pub fn simulate_path(
    sf: &SpecialForm,
    x0: [f64; 2],
    t: f64,
    seed: &SeedSpec,
    path: u64,
) -> Result<([f64; 2], Vec<PathEvent>)> {
    let prep = Prepared::new(sf, t)?;
    let mut events = Vec::new();
    let x = prep.run(x0, &mut seed.rng(path), Some(&mut events))?;
    Ok((x, events))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MCEstimate {
    pub n_paths: usize,
    pub estimate: f64,
    pub std_error: f64,
    pub target: f64,
    pub z_score: f64,
}

impl MCEstimate {
    /// With zero spread the score is 0 when the estimate equals the target
    /// up to `1e-8` (relative), and infinite otherwise.
    pub fn from_samples(samples: &[f64], target: f64) -> Self {
        let n = samples.len();
        let mean = neumaier_sum(samples.iter().copied()) / n as f64;
        let ss = neumaier_sum(samples.iter().map(|x| (x - mean) * (x - mean)));
        let std_error = if n > 1 { (ss / (n - 1) as f64 / n as f64).sqrt() } else { 0.0 };
        let diff = mean - target;
        let z_score = if std_error > 0.0 {
            diff / std_error
        } else if diff.abs() <= 1e-8 * target.abs().max(1.0) {
            0.0
        } else {
            f64::INFINITY.copysign(diff)
        };
        Self { n_paths: n, estimate: mean, std_error, target, z_score }
    }
}

/// Compensated sum; the order of terms is fixed by the caller.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Final states of paths `0..n_paths`, in path order.
pub fn final_states(sf: &SpecialForm, x0: [f64; 2], t: f64, n_paths: usize, seed: &SeedSpec) -> Result<Vec<[f64; 2]>> {
    let prep = Prepared::new(sf, t)?;
    let one = |k: usize| prep.run(x0, &mut seed.rng(k as u64), None);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n_paths).into_par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n_paths).map(one).collect()
    }
}

fn check_paths(n_paths: usize) -> Result<()> {
    if n_paths < 100 {
        return Err(Error::Domain(format!("need at least 100 paths, got {n_paths}")));
    }
    Ok(())
}

/// Estimates `E exp(-<lambda, X_t>)` and compares with `exp(-<x0, v_{0,t}(lambda)>)`
/// from the Picard solver on the grid of `sf`.
pub fn mc_laplace(
    sf: &SpecialForm,
    x0: [f64; 2],
    t: f64,
    lambda: [f64; 2],
    n_paths: usize,
    seed: &SeedSpec,
    opts: &SolverOptions,
) -> Result<MCEstimate> {
    check_paths(n_paths)?;
    let v = solve_special_picard(sf, t, lambda, opts)?.at_node(0);
    let target = (-(x0[0] * v[0] + x0[1] * v[1])).exp();
    let states = final_states(sf, x0, t, n_paths, seed)?;
    let samples: Vec<f64> = states.iter().map(|x| (-(lambda[0] * x[0] + lambda[1] * x[1])).exp()).collect();
    Ok(MCEstimate::from_samples(&samples, target))
}

/// Estimates `E <lambda, X_t>` and compares with `<x0, pi_{0,t}(lambda)>`.
pub fn mc_mean(
    sf: &SpecialForm,
    x0: [f64; 2],
    t: f64,
    lambda: [f64; 2],
    n_paths: usize,
    seed: &SeedSpec,
) -> Result<MCEstimate> {
    check_paths(n_paths)?;
    let pi = solve_moment(&special_to_general(sf)?, t, lambda)?.at_node(0);
    let target = x0[0] * pi[0] + x0[1] * pi[1];
    let states = final_states(sf, x0, t, n_paths, seed)?;
    let samples: Vec<f64> = states.iter().map(|x| lambda[0] * x[0] + lambda[1] * x[1]).collect();
    Ok(MCEstimate::from_samples(&samples, target))
}

pub const PATH_CSV_HEADER: &str = "path_id,time,kind,type_source,dx1,dx2,x1,x2";

/// Writes the events of one path, without header.
pub fn write_path_csv<W: Write>(out: &mut W, path_id: u64, events: &[PathEvent]) -> std::io::Result<()> {
    for e in events {
        let src = e.type_source.map_or(0, |s| s.index() + 1);
        writeln!(
            out,
            "{path_id},{:.16e},{},{src},{:.16e},{:.16e},{:.16e},{:.16e}",
            e.time,
            e.kind.as_str(),
            e.delta[0],
            e.delta[1],
            e.state[0],
            e.state[1]
        )?;
    }
    Ok(())
}
