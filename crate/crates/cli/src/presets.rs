//! Built-in experiment presets.

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

pub const NAMES: [&str; 4] = ["sp8", "sp30", "ae8", "ae30"];

pub fn source(name: &str) -> Option<&'static str> {
    Some(match name {
        "sp8" => {
            r#"task = "state-prep"
n = 8
d = 2
target = "compatible"
backends = ["exact", "shots:10", "shots:50", "shots:100", "shadow:1e5", "shadow:5e5"]
optimizer = "spsa:R=3000,s=0.5"
instances = 5
seed = 2024
output = "out/sp8"
objectives = [0.5, 0.3, 0.2, 0.1, 0.05]
"#
        }
        "sp30" => {
            r#"task = "state-prep"
n = 30
d = 4
target = "product"
backends = ["shadow:5e5"]
optimizer = "spsa:R=9000,s=0.5"
instances = 5
seed = 2024
output = "out/sp30"
"#
        }
        "ae8" => {
            r#"task = "autoencoder"
n = 8
n_b = 4
d = 2
target = "compatible"
backends = ["exact", "shots:10", "shots:50", "shots:100", "shadow:1e5", "shadow:5e5"]
optimizer = "spsa:R=3000,s=0.3"
instances = 5
seed = 2024
output = "out/ae8"
objectives = [0.3, 0.2, 0.1, 0.05, 0.02]
"#
        }
        "ae30" => {
            r#"task = "autoencoder"
n = 30
n_b = 10
d = 4
target = "product"
backends = ["shadow:5e5"]
optimizer = "spsa:R=9000,s=0.3"
instances = 5
seed = 2024
output = "out/ae30"
"#
        }
        _ => return None,
    })
}

pub fn load(name: &str) -> Result<ExperimentConfig> {
    let src = source(name)
        .ok_or_else(|| CliError::Config(format!("unknown preset {name:?} (known: {})", NAMES.join(", "))))?;
    ExperimentConfig::from_toml(src, &format!("preset {name}"))
}
