//! Exact forward simulation of the finite-activity special process.
//!
//! Between coefficient breakpoints the densities are constant, so the
//! deterministic flow `dX/ds = M X` is a 2x2 matrix exponential with
//! `M = [[g11, g21], [g12, g22]]`. Kernel jumps are drawn by thinning
//! against the bound `|X(u)|_1 <= |X(s)|_1 e^{kappa (u - s)}` with
//! `kappa = max_i (g_ii + g_ij)^+`.

use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::{Exp1, Poisson};

use crate::environment::{SpecialForm, Species};
use crate::error::{Error, Result};
use crate::jump::{DiscreteSpatialMeasure, SpatialPoint};
use crate::linalg::{expm2, mat_vec, Mat2};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    DeterministicAtom,
    BranchJump,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::DeterministicAtom => "deterministic_atom",
            EventKind::BranchJump => "branch_jump",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathEvent {
    pub time: f64,
    pub kind: EventKind,
    /// Type whose branching produced the jump; `None` for atoms.
    pub type_source: Option<Species>,
    pub delta: [f64; 2],
    /// State right after the event.
    pub state: [f64; 2],
}

/// A discrete measure ready for sampling.
#[derive(Debug, Clone)]
struct Sampler {
    points: Arc<[SpatialPoint]>,
    total: f64,
    index: Option<WeightedIndex<f64>>,
}

impl Sampler {
    fn new(m: &DiscreteSpatialMeasure) -> Self {
        let points = m.shared_points();
        let index = if points.is_empty() {
            None
        } else {
            Some(WeightedIndex::new(points.iter().map(|p| p.weight)).expect("weights are positive"))
        };
        Self { total: m.total_weight(), points, index }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 2] {
        let k = self.index.as_ref().expect("nonempty measure").sample(rng);
        self.points[k].z
    }
}

#[derive(Debug, Clone)]
struct Segment {
    start: f64,
    end: f64,
    /// Flow generator (already transposed).
    gen: Mat2,
    kappa: f64,
    kernel: [Sampler; 2],
}

#[derive(Debug, Clone)]
struct AtomStep {
    /// `X(s) = a X(s-)` before the Poisson jumps.
    a: Mat2,
    jumps: [Sampler; 2],
}

/// Piecewise data of a special form on `[0, t]`.
#[derive(Debug, Clone)]
pub struct Prepared {
    t: f64,
    segments: Vec<Segment>,
    /// Atom at the right end of each segment.
    atoms: Vec<Option<AtomStep>>,
}

impl Prepared {
    pub fn new(sf: &SpecialForm, t: f64) -> Result<Self> {
        if !(t >= 0.0 && t <= sf.horizon()) {
            return Err(Error::Domain(format!("t = {t} outside [0, {}]", sf.horizon())));
        }
        let mut cuts: Vec<f64> = sf.breakpoints().into_iter().filter(|&b| b > 0.0 && b < t).collect();
        cuts.insert(0, 0.0);
        if t > 0.0 {
            cuts.push(t);
        }
        cuts.dedup();
        let (g11, g22) = (sf.gamma_diag(Species::One), sf.gamma_diag(Species::Two));
        let (g12, g21) = (sf.gamma_cross(Species::One), sf.gamma_cross(Species::Two));
        let mut segments = Vec::new();
        let mut atoms = Vec::new();
        for w in cuts.windows(2) {
            let (start, end) = (w[0], w[1]);
            let mid = 0.5 * (start + end);
            let d = [[g11.density_at(mid), g12.density_at(mid)], [g21.density_at(mid), g22.density_at(mid)]];
            let gen = [[d[0][0], d[1][0]], [d[0][1], d[1][1]]];
            let kappa = (d[0][0] + d[0][1]).max(d[1][1] + d[1][0]).max(0.0);
            let kernel =
                [Sampler::new(sf.mu(Species::One).kernel_at(mid)), Sampler::new(sf.mu(Species::Two).kernel_at(mid))];
            segments.push(Segment { start, end, gen, kappa, kernel });

            let da = [[g11.atom_at(end), g12.atom_at(end)], [g21.atom_at(end), g22.atom_at(end)]];
            let empty = DiscreteSpatialMeasure::empty();
            let ja = [
                sf.mu(Species::One).atom_at(end).unwrap_or(&empty),
                sf.mu(Species::Two).atom_at(end).unwrap_or(&empty),
            ];
            let trivial = da.iter().flatten().all(|&x| x == 0.0) && ja.iter().all(|m| m.is_empty());
            atoms.push(if trivial {
                None
            } else {
                Some(AtomStep {
                    a: [[1.0 + da[0][0], da[1][0]], [da[0][1], 1.0 + da[1][1]]],
                    jumps: [Sampler::new(ja[0]), Sampler::new(ja[1])],
                })
            });
        }
        Ok(Self { t, segments, atoms })
    }

    pub fn horizon(&self) -> f64 {
        self.t
    }

    /// Runs one path from `x0` at time 0 to `t`. Events are pushed to
    /// `events` when given.
    pub fn run<R: Rng + ?Sized>(
        &self,
        x0: [f64; 2],
        rng: &mut R,
        mut events: Option<&mut Vec<PathEvent>>,
    ) -> Result<[f64; 2]> {
        check_state(x0)?;
        let mut x = x0;
        for (seg, atom) in self.segments.iter().zip(&self.atoms) {
            let mut s = seg.start;
            let w = [seg.kernel[0].total, seg.kernel[1].total];
            let wmax = w[0].max(w[1]);
            loop {
                let bound = wmax * (x[0] + x[1]) * (seg.kappa * (seg.end - s)).exp();
                let tau = if bound > 0.0 {
                    let e: f64 = rng.sample(Exp1);
                    e / bound
                } else {
                    f64::INFINITY
                };
                if s + tau >= seg.end {
                    x = flow(&seg.gen, seg.end - s, x);
                    check_time(x, seg.end)?;
                    break;
                }
                s += tau;
                x = flow(&seg.gen, tau, x);
                check_time(x, s)?;
                let rate = [x[0] * w[0], x[1] * w[1]];
                let u: f64 = rng.random::<f64>() * bound;
                if u >= rate[0] + rate[1] {
                    continue;
                }
                let i = if u < rate[0] { 0 } else { 1 };
                let z = seg.kernel[i].draw(rng);
                x = [x[0] + z[0], x[1] + z[1]];
                check_time(x, s)?;
                if let Some(ev) = events.as_deref_mut() {
                    ev.push(PathEvent {
                        time: s,
                        kind: EventKind::BranchJump,
                        type_source: Some(Species::from_index(i)),
                        delta: z,
                        state: x,
                    });
                }
            }
            if let Some(atom) = atom {
                let before = x;
                let moved = mat_vec(&atom.a, before);
                // guard against -0 and rounding just below zero
                x = [moved[0].max(0.0), moved[1].max(0.0)];
                check_time(x, seg.end)?;
                if let Some(ev) = events.as_deref_mut() {
                    ev.push(PathEvent {
                        time: seg.end,
                        kind: EventKind::DeterministicAtom,
                        type_source: None,
                        delta: [x[0] - before[0], x[1] - before[1]],
                        state: x,
                    });
                }
                for (i, (&x_i, jumps)) in before.iter().zip(&atom.jumps).enumerate() {
                    let mean = x_i * jumps.total;
                    if mean <= 0.0 {
                        continue;
                    }
                    let pois = Poisson::new(mean).map_err(|_| Error::Overflow { time: seg.end })?;
                    let count = pois.sample(rng) as u64;
                    for _ in 0..count {
                        let z = jumps.draw(rng);
                        x = [x[0] + z[0], x[1] + z[1]];
                        if let Some(ev) = events.as_deref_mut() {
                            ev.push(PathEvent {
                                time: seg.end,
                                kind: EventKind::BranchJump,
                                type_source: Some(Species::from_index(i)),
                                delta: z,
                                state: x,
                            });
                        }
                    }
                    check_time(x, seg.end)?;
                }
            }
        }
        Ok(x)
    }
}

fn flow(gen: &Mat2, tau: f64, x: [f64; 2]) -> [f64; 2] {
    if tau == 0.0 || gen.iter().flatten().all(|&g| g == 0.0) {
        return x;
    }
    let e = expm2(&[[gen[0][0] * tau, gen[0][1] * tau], [gen[1][0] * tau, gen[1][1] * tau]]);
    let y = mat_vec(&e, x);
    [y[0].max(0.0), y[1].max(0.0)]
}

fn check_state(x: [f64; 2]) -> Result<()> {
    if x.iter().all(|v| v.is_finite() && *v >= 0.0) {
        Ok(())
    } else {
        Err(Error::Domain(format!("initial state must be finite and nonnegative, got {x:?}")))
    }
}

fn check_time(x: [f64; 2], time: f64) -> Result<()> {
    if x.iter().all(|v| v.is_finite() && *v < 1e300) {
        Ok(())
    } else {
        Err(Error::Overflow { time })
    }
}
