use serde_json::json;

use crate::error::{Error, Result};

use super::config::{ExperimentConfig, Method};

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset { name: "smoke", description: "Branin, 3 nodes, 12 evaluations, 2 trials; a quick end-to-end check" },
    Preset { name: "branin", description: "Branin, 10 nodes x p=2, 100 evaluations, 10 trials: SP-EI, PDTS, SequentialEI" },
    Preset { name: "suite", description: "all five methods on eight benchmark functions, 10 nodes, 10 trials" },
    Preset { name: "gp-within", description: "GP Matern-5/2 draws (1000 anchors, d=2), 60 evaluations, 10 trials" },
    Preset { name: "gp-outof", description: "GP rational-quadratic draws fitted with a Matern-5/2 surrogate" },
];

/// `(label, config)` pairs making up a preset bundle.
pub fn preset(name: &str) -> Result<Vec<(String, ExperimentConfig)>> {
    let comparison = [Method::SpEi, Method::Pdts, Method::SequentialEi];
    let base = |objective: &str, methods: &[Method]| ExperimentConfig { p: Some(2), ..ExperimentConfig::new(objective, methods) };
    Ok(match name {
        "smoke" => vec![(
            "smoke".into(),
            ExperimentConfig { n_nodes: 3, budget: 12, trials: 2, ..base("branin", &comparison) },
        )],
        "branin" => vec![("branin".into(), base("branin", &comparison))],
        "suite" => {
            let panels: [(&str, &str, serde_json::Value); 8] = [
                ("branin", "branin", json!({})),
                ("bohachevsky", "bohachevsky", json!({})),
                ("schubert", "schubert", json!({})),
                ("camelback", "camelback", json!({})),
                ("ackley2", "ackley", json!({"dim": 2})),
                ("rosenbrock2", "rosenbrock", json!({"dim": 2})),
                ("hartmann6", "hartmann6", json!({})),
                ("ackley5", "ackley", json!({"dim": 5})),
            ];
            panels
                .into_iter()
                .map(|(label, obj, params)| {
                    let p = if obj == "hartmann6" || label == "ackley5" { None } else { Some(2) };
                    (label.to_string(), ExperimentConfig { objective_params: params, p, ..base(obj, &Method::ALL) })
                })
                .collect()
        }
        "gp-within" | "gp-outof" => {
            let objective = if name == "gp-within" { "gp-matern52" } else { "gp-rq" };
            vec![(
                name.to_string(),
                ExperimentConfig {
                    objective_params: json!({"dim": 2, "anchors": 1000}),
                    budget: 60,
                    ..base(objective, &comparison)
                },
            )]
        }
        other => return Err(Error::config(format!("unknown preset '{other}'"))),
    })
}
