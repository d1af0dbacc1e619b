//! Loads a partial TOML run configuration, fills defaults and prints the
//! resolved file; invalid files fail with a message naming the key.

use advseg::RunConfig;

fn main() -> advseg::Result<()> {
    let text = "[model]\nbase_features = 8\n\n[loss]\nlambda_v = 0.0\n\n[train]\nepochs = 5\nseed = 11\n";
    let cfg = RunConfig::from_toml_str(text)?;
    cfg.validate()?;
    print!("{}", cfg.to_toml_string());

    for bad in ["[loss]\nlambda_c = -1.0\n", "[train]\nepoch = 5\n"] {
        let err = RunConfig::from_toml_str(bad).and_then(|c| c.validate()).unwrap_err();
        println!("{bad:?} -> {err} (exit {})", err.exit_code());
    }
    Ok(())
}
