//! Runs a scenario and prints its report.

use lifted_connections::scenario::{run_scenario, RunOptions, ScenarioConfig};

const CONFIG: &str = "
[base]
preset = unipotent

[bundle]
flavor = cotangent

[phi]
t = levi-civita

[checks]
suites = torsion, metric, symmetric-space, holonomy
expect_fail = symmetric-space.total, symmetric-space.base
points = 4
seed = 42
";

fn main() -> lifted_connections::Result<()> {
    let path = std::env::args().nth(1);
    let cfg = match &path {
        Some(p) => ScenarioConfig::from_file(p.as_ref())?,
        None => ScenarioConfig::parse("unipotent", CONFIG)?,
    };
    let report = run_scenario(&cfg, &RunOptions::default())?;
    for line in report.summary_lines() {
        println!("{line}");
    }
    if let Some(h) = &report.holonomy {
        println!("holonomy dimension {}", h.dimension);
    }
    println!("overall: {}", if report.ok() { "ok" } else { "failed" });
    Ok(())
}
