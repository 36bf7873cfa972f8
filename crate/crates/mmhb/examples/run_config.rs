//! Drives the same config-based runners as the `mmhb` binary, writing CSV and
//! JSON into a scratch directory (or MMHB_OUT).

use std::path::PathBuf;

use mmhb::experiments::{parse_config, run_experiment, Context};

const CONFIG: &str = r#"{
  "experiment": "slopes",
  "game": { "builtin": { "id": "neg-xy2" } },
  "h": 0.01,
  "beta": { "start": -0.5, "stop": 0.5, "count": 5 },
  "init": { "x": [1.0], "y": [1.0] },
  "steps": 5000
}"#;

pub fn example() -> mmhb::Result<()> {
    let out = std::env::var_os("MMHB_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("mmhb-run-config"));
    let cfg = parse_config(CONFIG, None)?;
    let summary = run_experiment(&cfg, &Context::default(), &out)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    println!("artifacts in {}", out.display());
    Ok(())
}

#[allow(dead_code)]
fn main() -> mmhb::Result<()> {
    example()
}
