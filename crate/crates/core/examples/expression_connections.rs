//! Building a base connection from expressions and comparing it with the
//! matching preset.

use lifted_connections::expr::{parse_expr, parse_expr_in, Program};
use lifted_connections::presets;
use lifted_connections::scenario::ScenarioConfig;

const CONFIG: &str = "
[base]
dim = 2
domain = -3 3 -3 3
Gamma[1,2,2] = x1
";

fn main() -> lifted_connections::Result<()> {
    let ast = parse_expr("-2*(x1*x2 + x2*x1)/(1 + x1^2 + x2^2)")?;
    println!("parsed: {ast}");
    let prog = Program::compile(&ast);
    println!("value at (0.5, 1): {}", prog.eval(&[0.5, 1.0]));

    for bad in ["x1 + ", "sin(x1, x2)", "x3 * 2"] {
        println!("{bad:12} -> {}", parse_expr_in(bad, 2).unwrap_err());
    }

    let cfg = ScenarioConfig::parse("inline", CONFIG)?;
    let custom = cfg.build_base()?;
    let preset = presets::preset("poly22")?;
    let x = [0.7, -1.2];
    println!(
        "curvature difference against the preset: {:.1e}",
        custom.curvature(&x)?.max_diff(&preset.curvature(&x)?)
    );
    Ok(())
}
