//! Random admissible models shared by the integration tests.
#![allow(dead_code)]

use cbve::solver::Zeta;
use cbve::{Environment, JumpMeasure, SpatialPoint, SpecialForm, StieltjesMeasure};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A time in `(0, 1)` on the 1/1000 lattice.
fn time<R: Rng>(rng: &mut R) -> f64 {
    rng.random_range(1..1000) as f64 / 1000.0
}

fn interval<R: Rng>(rng: &mut R) -> (f64, f64) {
    let (a, b) = (time(rng), time(rng));
    if a == b {
        (0.0, 1.0)
    } else {
        (a.min(b), a.max(b))
    }
}

fn density<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> StieltjesMeasure {
    let (a, b) = interval(rng);
    let whole = StieltjesMeasure::density(1.0, 0.0, 1.0, rng.random_range(lo..hi)).unwrap();
    whole.add(&StieltjesMeasure::density(1.0, a, b, rng.random_range(lo..hi)).unwrap())
}

fn atom<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> StieltjesMeasure {
    StieltjesMeasure::point_mass(1.0, time(rng), rng.random_range(lo..hi)).unwrap()
}

fn points<R: Rng>(rng: &mut R, zmax: f64, wmax: f64) -> Vec<SpatialPoint> {
    (0..rng.random_range(1..=2))
        .map(|_| {
            SpatialPoint::new(rng.random_range(0.0..zmax), rng.random_range(0.0..zmax), rng.random_range(0.05..wmax))
        })
        .collect()
}

fn jumps<R: Rng>(rng: &mut R) -> JumpMeasure {
    let (a, b) = interval(rng);
    let kernel = JumpMeasure::kernel(1.0, a, b, points(rng, 1.0, 1.5)).unwrap();
    kernel.add(&JumpMeasure::point_atom(1.0, time(rng), points(rng, 0.5, 0.5)).unwrap())
}

/// Mixed densities and atoms in every coefficient, with atom masses small
/// enough that `delta_i < 1`.
pub fn random_env(seed: u64, cells: usize) -> Environment {
    let mut r = rng(seed);
    let r = &mut r;
    let env = Environment::builder(1.0)
        .b11(density(r, -1.5, 1.5).add(&atom(r, -0.5, 0.45)))
        .b22(density(r, -1.5, 1.5).add(&atom(r, -0.5, 0.45)))
        .b12(density(r, 0.0, 1.0).add(&atom(r, 0.0, 0.5)))
        .b21(density(r, 0.0, 1.0).add(&atom(r, 0.0, 0.5)))
        .c1(density(r, 0.0, 0.5))
        .c2(density(r, 0.0, 0.5))
        .m1(jumps(r))
        .m2(jumps(r))
        .build(cells)
        .unwrap();
    assert!(env.is_admissible(), "{:?}", env.validate());
    env
}

/// Finite-activity special form with densities and atoms everywhere.
pub fn random_special(seed: u64, cells: usize) -> SpecialForm {
    let mut r = rng(seed);
    let r = &mut r;
    SpecialForm::builder(1.0)
        .gamma11(density(r, -1.5, 1.0).add(&atom(r, -0.6, 0.6)))
        .gamma22(density(r, -1.5, 1.0).add(&atom(r, -0.6, 0.6)))
        .gamma12(density(r, 0.0, 1.0).add(&atom(r, 0.0, 0.5)))
        .gamma21(density(r, 0.0, 1.0).add(&atom(r, 0.0, 0.5)))
        .mu1(jumps(r))
        .mu2(jumps(r))
        .build(cells)
        .unwrap()
}

pub fn random_zeta(seed: u64) -> Zeta {
    let mut r = rng(seed);
    let r = &mut r;
    let mut z =
        Zeta::new([density(r, -2.0, 2.0).add(&atom(r, -1.0, 1.0)), density(r, -2.0, 2.0).add(&atom(r, -1.0, 1.0))]);
    z.offset = [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
    z
}

/// `0 <= r <= s <= t <= 1` on the 1/1000 lattice with `t >= 0.5`.
pub fn random_times<R: Rng>(rng: &mut R) -> (f64, f64, f64) {
    let t = rng.random_range(500..=1000) as f64 / 1000.0;
    let s = rng.random_range(0..=(t * 1000.0) as u32) as f64 / 1000.0;
    let r = rng.random_range(0..=(s * 1000.0) as u32) as f64 / 1000.0;
    (r, s, t)
}

pub fn random_lambda<R: Rng>(rng: &mut R) -> [f64; 2] {
    [rng.random_range(0.0..3.0), rng.random_range(0.0..3.0)]
}
