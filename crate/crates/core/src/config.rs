//! JSON model files.
//!
//! ```json
//! {
//!   "horizon": 1.0,
//!   "grid_cells": 1000,
//!   "b11": { "density": [[0.0, 1.0, 1.0]], "atoms": [[0.5, 0.2]] },
//!   "c1":  { "density": [[0.0, 1.0, 1.0]] },
//!   "m1":  { "kernel": [[0.0, 1.0, [[0.5, 0.1, 2.0]]]], "atoms": [[0.5, [[1.0, 0.0, 0.3]]]] }
//! }
//! ```
//!
//! A special form uses `gamma11`, `gamma22`, `gamma12`, `gamma21`, `mu1`,
//! `mu2` instead. An optional `run` block holds default command parameters.

use serde::{Deserialize, Serialize};

use crate::environment::{Environment, SpecialForm, Species};
use crate::error::{Error, Result};
use crate::jump::{DiscreteSpatialMeasure, JumpAtom, JumpMeasure, KernelPiece, SpatialPoint};
use crate::measure::{Atom, DensityPiece, Monotonicity, StieltjesMeasure};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub density: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub atoms: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub density: Vec<[f64; 3]>,
}

pub type PointList = Vec<[f64; 3]>;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpSpec {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub kernel: Vec<(f64, f64, PointList)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub atoms: Vec<(f64, PointList)>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine: Option<usize>,
}

impl RunParams {
    fn is_empty(&self) -> bool {
        *self == Self::default()
    }
}

/// The file format, field for field.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub horizon: f64,
    pub grid_cells: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b11: Option<MeasureSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b22: Option<MeasureSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b12: Option<MeasureSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b21: Option<MeasureSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<DensitySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2: Option<DensitySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m1: Option<JumpSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m2: Option<JumpSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma11: Option<MeasureSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma22: Option<MeasureSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma12: Option<MeasureSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma21: Option<MeasureSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu1: Option<JumpSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu2: Option<JumpSpec>,
    #[serde(default, skip_serializing_if = "RunParams::is_empty")]
    pub run: RunParams,
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Model {
    General(Environment),
    Special(SpecialForm),
}

impl Model {
    /// The general environment; a special form is converted.
    pub fn environment(&self) -> Result<Environment> {
        match self {
            Model::General(env) => Ok(env.clone()),
            Model::Special(sf) => sf.to_general(),
        }
    }

    pub fn horizon(&self) -> f64 {
        match self {
            Model::General(env) => env.horizon(),
            Model::Special(sf) => sf.horizon(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: Model,
    pub run: RunParams,
}

impl RunConfig {
    /// Canonical JSON: measures as stored after normalization.
    pub fn to_json(&self) -> String {
        let mut file = match &self.model {
            Model::General(env) => ConfigFile::from_environment(env),
            Model::Special(sf) => ConfigFile::from_special(sf),
        };
        file.run = self.run.clone();
        serde_json::to_string_pretty(&file).expect("config serializes")
    }
}

/// Parses and builds a model. Syntax errors carry the JSON path and position;
/// model errors carry the offending key.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ConfigFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Config(format!("at `{path}`: {}", e.into_inner()))
    })?;
    file.build()
}

fn keyed(key: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Structure { field, message } if field.starts_with(key) => Error::Structure { field, message },
        Error::Structure { field, message } => Error::Structure { field: format!("{key}.{field}"), message },
        Error::Domain(m) => Error::Structure { field: key.to_string(), message: m },
        other => other,
    }
}

fn measure(h: f64, spec: &Option<MeasureSpec>, key: &str) -> Result<StieltjesMeasure> {
    let Some(spec) = spec else { return Ok(StieltjesMeasure::zero(h)) };
    let pieces = spec.density.iter().map(|&[start, end, value]| DensityPiece { start, end, value }).collect();
    let atoms = spec.atoms.iter().map(|&[time, mass]| Atom { time, mass }).collect();
    StieltjesMeasure::new(h, pieces, atoms, Monotonicity::Signed).map_err(keyed(key))
}

fn points(list: &PointList) -> Result<DiscreteSpatialMeasure> {
    DiscreteSpatialMeasure::new(list.iter().map(|&[z1, z2, w]| SpatialPoint::new(z1, z2, w)).collect())
}

fn jumps(h: f64, spec: &Option<JumpSpec>, key: &str) -> Result<JumpMeasure> {
    let Some(spec) = spec else { return Ok(JumpMeasure::zero(h)) };
    let mut kernels = Vec::new();
    for (k, (start, end, pts)) in spec.kernel.iter().enumerate() {
        let measure = points(pts).map_err(keyed(&format!("{key}.kernel[{k}]")))?;
        kernels.push(KernelPiece { start: *start, end: *end, measure });
    }
    let mut atoms = Vec::new();
    for (k, (time, pts)) in spec.atoms.iter().enumerate() {
        let measure = points(pts).map_err(keyed(&format!("{key}.atoms[{k}]")))?;
        atoms.push(JumpAtom { time: *time, measure });
    }
    JumpMeasure::new(h, kernels, atoms).map_err(keyed(key))
}

fn measure_spec(m: &StieltjesMeasure) -> Option<MeasureSpec> {
    if m.is_zero() {
        return None;
    }
    Some(MeasureSpec {
        density: m.pieces().iter().map(|p| [p.start, p.end, p.value]).collect(),
        atoms: m.atoms().iter().map(|a| [a.time, a.mass]).collect(),
    })
}

fn point_list(m: &DiscreteSpatialMeasure) -> PointList {
    m.points().iter().map(|p| [p.z[0], p.z[1], p.weight]).collect()
}

fn jump_spec(m: &JumpMeasure) -> Option<JumpSpec> {
    if m.is_zero() {
        return None;
    }
    Some(JumpSpec {
        kernel: m.kernels().iter().map(|k| (k.start, k.end, point_list(&k.measure))).collect(),
        atoms: m.atoms().iter().map(|a| (a.time, point_list(&a.measure))).collect(),
    })
}

impl ConfigFile {
    fn has_general(&self) -> bool {
        self.b11.is_some()
            || self.b22.is_some()
            || self.b12.is_some()
            || self.b21.is_some()
            || self.c1.is_some()
            || self.c2.is_some()
            || self.m1.is_some()
            || self.m2.is_some()
    }

    fn has_special(&self) -> bool {
        self.gamma11.is_some()
            || self.gamma22.is_some()
            || self.gamma12.is_some()
            || self.gamma21.is_some()
            || self.mu1.is_some()
            || self.mu2.is_some()
    }

    pub fn build(&self) -> Result<RunConfig> {
        let h = self.horizon;
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Config(format!("horizon must be positive, got {h}")));
        }
        if self.grid_cells == 0 {
            return Err(Error::Config("grid_cells must be at least 1".into()));
        }
        if self.has_general() && self.has_special() {
            return Err(Error::Config(
                "mixes environment keys (b.., c.., m..) with special-form keys (gamma.., mu..)".into(),
            ));
        }
        let model = if self.has_special() {
            let sf = SpecialForm::builder(h)
                .gamma11(measure(h, &self.gamma11, "gamma11")?)
                .gamma22(measure(h, &self.gamma22, "gamma22")?)
                .gamma12(measure(h, &self.gamma12, "gamma12")?)
                .gamma21(measure(h, &self.gamma21, "gamma21")?)
                .mu1(jumps(h, &self.mu1, "mu1")?)
                .mu2(jumps(h, &self.mu2, "mu2")?)
                .build(self.grid_cells)?;
            Model::Special(sf)
        } else {
            let dens =
                |d: &Option<DensitySpec>| d.as_ref().map(|d| MeasureSpec { density: d.density.clone(), atoms: vec![] });
            let env = Environment::builder(h)
                .b11(measure(h, &self.b11, "b11")?)
                .b22(measure(h, &self.b22, "b22")?)
                .b12(measure(h, &self.b12, "b12")?)
                .b21(measure(h, &self.b21, "b21")?)
                .c1(measure(h, &dens(&self.c1), "c1")?)
                .c2(measure(h, &dens(&self.c2), "c2")?)
                .m1(jumps(h, &self.m1, "m1")?)
                .m2(jumps(h, &self.m2, "m2")?)
                .build(self.grid_cells)?;
            Model::General(env)
        };
        Ok(RunConfig { model, run: self.run.clone() })
    }

    pub fn from_environment(env: &Environment) -> Self {
        use Species::{One, Two};
        let dens = |m: &StieltjesMeasure| {
            (!m.is_zero())
                .then(|| DensitySpec { density: m.pieces().iter().map(|p| [p.start, p.end, p.value]).collect() })
        };
        Self {
            horizon: env.horizon(),
            grid_cells: env.base_cells(),
            b11: measure_spec(env.b_diag(One)),
            b22: measure_spec(env.b_diag(Two)),
            b12: measure_spec(env.b_cross(One)),
            b21: measure_spec(env.b_cross(Two)),
            c1: dens(env.c(One)),
            c2: dens(env.c(Two)),
            m1: jump_spec(env.m(One)),
            m2: jump_spec(env.m(Two)),
            ..Default::default()
        }
    }

    pub fn from_special(sf: &SpecialForm) -> Self {
        use Species::{One, Two};
        Self {
            horizon: sf.horizon(),
            grid_cells: sf.base_cells(),
            gamma11: measure_spec(sf.gamma_diag(One)),
            gamma22: measure_spec(sf.gamma_diag(Two)),
            gamma12: measure_spec(sf.gamma_cross(One)),
            gamma21: measure_spec(sf.gamma_cross(Two)),
            mu1: jump_spec(sf.mu(One)),
            mu2: jump_spec(sf.mu(Two)),
            ..Default::default()
        }
    }
}
