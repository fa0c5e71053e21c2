//! Benchmark functions with known minima, and objectives drawn from a GP prior.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::kernel::{KernelFamily, KernelSpec};
use crate::rng::{derive_seed, rng_from_seed};
use crate::space::Domain;
use crate::surrogate::{sample_objective, GpSample};

/// Additive Gaussian noise, reproducible per query point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Noise {
    pub sd: f64,
    pub seed: u64,
}

#[derive(Clone, Debug)]
enum Kind {
    Branin,
    Bohachevsky,
    Schubert,
    Ackley,
    Hartmann6,
    Rosenbrock,
    Camelback,
    Gp(Arc<GpSample<f64>>),
}

#[derive(Clone, Debug)]
pub struct Objective {
    name: String,
    domain: Domain<f64>,
    f_min: Option<f64>,
    x_min: Vec<Vec<f64>>,
    kind: Kind,
    noise: Option<Noise>,
}

pub struct RegistryEntry {
    pub name: &'static str,
    pub description: &'static str,
}

pub const REGISTRY: &[RegistryEntry] = &[
    RegistryEntry { name: "branin", description: "Branin-Hoo, 2-d, [-5,10]x[0,15], three global minima" },
    RegistryEntry { name: "bohachevsky", description: "Bohachevsky (first form), 2-d, [-100,100]^2" },
    RegistryEntry { name: "schubert", description: "Shubert, 2-d, [-10,10]^2, 18 global minima" },
    RegistryEntry { name: "ackley", description: "Ackley, params {dim} (default 2), [-32.768,32.768]^d" },
    RegistryEntry { name: "hartmann6", description: "Hartmann, 6-d, [0,1]^6" },
    RegistryEntry { name: "rosenbrock", description: "Rosenbrock, params {dim} (default 2), [-5,10]^d" },
    RegistryEntry { name: "camelback", description: "Six-hump camelback, 2-d, [-3,3]x[-2,2]" },
    RegistryEntry {
        name: "gp-matern52",
        description: "GP prior draw, Matern-5/2; params {dim, anchors, lengthscale, seed}; no known minimum",
    },
    RegistryEntry {
        name: "gp-rq",
        description: "GP prior draw, rational quadratic; params {dim, anchors, lengthscale, rq_shape, seed}",
    },
];

pub const BRANIN_F_MIN: f64 = 0.397_887_357_729_738_4;
pub const SCHUBERT_F_MIN: f64 = -186.730_908_831_023_83;
pub const HARTMANN6_F_MIN: f64 = -3.322_368_011_415_508;
pub const CAMELBACK_F_MIN: f64 = -1.031_628_453_489_877_4;

/// Minimizer and maximizer of the 1-d Shubert factor, one period each.
const SHUBERT_ARGMIN: f64 = -7.708_313_735_499_347;
const SHUBERT_ARGMAX: f64 = -7.083_506_407_651_56;

const HARTMANN6_X_MIN: [f64; 6] = [
    0.201_689_512_653_738_36,
    0.150_010_692_714_313_58,
    0.476_873_972_764_361_1,
    0.275_332_418_369_183_1,
    0.311_651_619_277_451_13,
    0.657_300_529_174_672_9,
];

pub const DEFAULT_GP_ANCHORS: usize = 1000;
pub const DEFAULT_GP_LENGTHSCALE: f64 = 0.1;

fn param_usize(params: &Map<String, Value>, key: &str, default: usize) -> Result<usize> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v
            .as_u64()
            .map(|u| u as usize)
            .ok_or_else(|| Error::config(format!("objective parameter {key} must be a non-negative integer"))),
    }
}

fn param_f64(params: &Map<String, Value>, key: &str, default: f64) -> Result<f64> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v.as_f64().ok_or_else(|| Error::config(format!("objective parameter {key} must be a number"))),
    }
}

fn cube(dim: usize, lo: f64, hi: f64) -> Domain<f64> {
    Domain { lower: vec![lo; dim], upper: vec![hi; dim] }
}

fn shubert_factor(x: f64) -> f64 {
    (1..=5).map(|j| j as f64 * ((j as f64 + 1.0) * x + j as f64).cos()).sum()
}

fn periodic_copies(x0: f64, lo: f64, hi: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut x = x0 - 2.0 * PI * ((x0 - lo) / (2.0 * PI)).floor();
    while x <= hi {
        out.push(x);
        x += 2.0 * PI;
    }
    out
}

/// Looks up `name` and builds it with `params` (a JSON object, possibly empty).
pub fn get_objective(name: &str, params: &Value) -> Result<Objective> {
    let empty = Map::new();
    let params = match params {
        Value::Null => &empty,
        Value::Object(m) => m,
        _ => return Err(Error::config("objective_params must be an object")),
    };
    let noise_sd = param_f64(params, "noise_sd", 0.0)?;
    let noise = if noise_sd > 0.0 {
        Some(Noise { sd: noise_sd, seed: param_usize(params, "noise_seed", 0)? as u64 })
    } else if noise_sd < 0.0 {
        return Err(Error::config("noise_sd must be non-negative"));
    } else {
        None
    };
    let dim_param = |default: usize| -> Result<usize> {
        let d = param_usize(params, "dim", default)?;
        if d == 0 {
            return Err(Error::config("dim must be positive"));
        }
        Ok(d)
    };
    let (kind, domain, f_min, x_min) = match name {
        "branin" => (
            Kind::Branin,
            Domain { lower: vec![-5.0, 0.0], upper: vec![10.0, 15.0] },
            Some(BRANIN_F_MIN),
            vec![vec![-PI, 12.275], vec![PI, 2.275], vec![3.0 * PI, 2.475]],
        ),
        "bohachevsky" => (Kind::Bohachevsky, cube(2, -100.0, 100.0), Some(0.0), vec![vec![0.0, 0.0]]),
        "schubert" => {
            let mins = periodic_copies(SHUBERT_ARGMIN, -10.0, 10.0);
            let maxs = periodic_copies(SHUBERT_ARGMAX, -10.0, 10.0);
            let mut x_min = Vec::new();
            for a in &mins {
                for b in &maxs {
                    x_min.push(vec![*a, *b]);
                    x_min.push(vec![*b, *a]);
                }
            }
            (Kind::Schubert, cube(2, -10.0, 10.0), Some(SCHUBERT_F_MIN), x_min)
        }
        "ackley" => {
            let d = dim_param(2)?;
            (Kind::Ackley, cube(d, -32.768, 32.768), Some(0.0), vec![vec![0.0; d]])
        }
        "hartmann6" => (Kind::Hartmann6, cube(6, 0.0, 1.0), Some(HARTMANN6_F_MIN), vec![HARTMANN6_X_MIN.to_vec()]),
        "rosenbrock" => {
            let d = dim_param(2)?;
            if d < 2 {
                return Err(Error::config("rosenbrock needs dim >= 2"));
            }
            (Kind::Rosenbrock, cube(d, -5.0, 10.0), Some(0.0), vec![vec![1.0; d]])
        }
        "camelback" => (
            Kind::Camelback,
            Domain { lower: vec![-3.0, -2.0], upper: vec![3.0, 2.0] },
            Some(CAMELBACK_F_MIN),
            vec![vec![0.089_842_013_683_013_31, -0.712_656_403_270_413_5], vec![-0.089_842_013_683_013_31, 0.712_656_403_270_413_5]],
        ),
        "gp-matern52" | "gp-rq" => {
            let d = dim_param(2)?;
            let anchors = param_usize(params, "anchors", DEFAULT_GP_ANCHORS)?;
            let lengthscale = param_f64(params, "lengthscale", DEFAULT_GP_LENGTHSCALE)?;
            let seed = param_usize(params, "seed", 0)? as u64;
            let family = if name == "gp-rq" { KernelFamily::RationalQuadratic } else { KernelFamily::Matern52 };
            let mut spec = KernelSpec::isotropic(family, d, lengthscale, 1.0)?;
            spec.rq_shape = param_f64(params, "rq_shape", 1.0)?;
            let domain = Domain::unit(d);
            let sample = sample_objective(&spec, &domain, anchors, seed)?;
            (Kind::Gp(Arc::new(sample)), domain, None, Vec::new())
        }
        other => return Err(Error::config(format!("unknown objective '{other}'"))),
    };
    Ok(Objective { name: name.to_string(), domain, f_min, x_min, kind, noise })
}

impl Objective {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &Domain<f64> {
        &self.domain
    }

    pub fn f_min(&self) -> Option<f64> {
        self.f_min
    }

    pub fn x_min(&self) -> &[Vec<f64>] {
        &self.x_min
    }

    pub fn noise(&self) -> Option<Noise> {
        self.noise
    }

    /// The GP draw behind a `gp-*` objective.
    pub fn gp_sample(&self) -> Option<&GpSample<f64>> {
        match &self.kind {
            Kind::Gp(s) => Some(s),
            _ => None,
        }
    }

    /// Noise-free value.
    pub fn eval_clean(&self, x: &[f64]) -> f64 {
        match &self.kind {
            Kind::Branin => {
                let (x1, x2) = (x[0], x[1]);
                let b = 5.1 / (4.0 * PI * PI);
                let c = 5.0 / PI;
                let t = 1.0 / (8.0 * PI);
                let inner = x2 - b * x1 * x1 + c * x1 - 6.0;
                inner * inner + 10.0 * (1.0 - t) * x1.cos() + 10.0
            }
            Kind::Bohachevsky => {
                let (x1, x2) = (x[0], x[1]);
                x1 * x1 + 2.0 * x2 * x2 - 0.3 * (3.0 * PI * x1).cos() - 0.4 * (4.0 * PI * x2).cos() + 0.7
            }
            Kind::Schubert => shubert_factor(x[0]) * shubert_factor(x[1]),
            Kind::Ackley => {
                let d = x.len() as f64;
                let sq = x.iter().map(|v| v * v).sum::<f64>() / d;
                let cs = x.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>() / d;
                -20.0 * (-0.2 * sq.sqrt()).exp() - cs.exp() + 20.0 + std::f64::consts::E
            }
            Kind::Hartmann6 => hartmann6(x),
            Kind::Rosenbrock => x
                .windows(2)
                .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (w[0] - 1.0).powi(2))
                .sum(),
            Kind::Camelback => {
                let (x1, x2) = (x[0], x[1]);
                (4.0 - 2.1 * x1 * x1 + x1.powi(4) / 3.0) * x1 * x1 + x1 * x2 + (-4.0 + 4.0 * x2 * x2) * x2 * x2
            }
            Kind::Gp(s) => s.eval(x),
        }
    }

    /// Value as seen by the optimizer, noise included.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let clean = self.eval_clean(x);
        match self.noise {
            None => clean,
            Some(n) => {
                let bits: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
                let z: f64 = rng_from_seed(derive_seed(n.seed, &bits)).sample(StandardNormal);
                clean + n.sd * z
            }
        }
    }

    /// `best_y − f_min`, floored at zero.
    pub fn immediate_regret(&self, best_y: f64) -> Result<f64> {
        match self.f_min {
            Some(f) => Ok((best_y - f).max(0.0)),
            None => Err(Error::UnsupportedMetric(format!("{} has no known minimum", self.name))),
        }
    }
}

fn hartmann6(x: &[f64]) -> f64 {
    const ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
    const A: [[f64; 6]; 4] = [
        [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
        [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
        [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
        [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
    ];
    const P: [[f64; 6]; 4] = [
        [1312.0, 1696.0, 5569.0, 124.0, 8283.0, 5886.0],
        [2329.0, 4135.0, 8307.0, 3736.0, 1004.0, 9991.0],
        [2348.0, 1451.0, 3522.0, 2883.0, 3047.0, 6650.0],
        [4047.0, 8828.0, 8732.0, 5743.0, 1091.0, 381.0],
    ];
    -(0..4)
        .map(|i| {
            let s: f64 = (0..6).map(|j| A[i][j] * (x[j] - 1e-4 * P[i][j]).powi(2)).sum();
            ALPHA[i] * (-s).exp()
        })
        .sum::<f64>()
}
