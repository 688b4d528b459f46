//! Drive the experiment harness from a TOML config, as the CLI does.

use pairdistill::harness::{cmd_correlation, cmd_ece, RunConfig};

const CONFIG: &str = r#"
seed = 1

[world]
d = 16
n_dialogues = 300
sigma_session = 1.0

[experiment]
k_values = [5, 30]
n_seeds = 3
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let config = RunConfig::from_toml(CONFIG)?.with_overrides(None, Some(dir.path().to_path_buf()))?;

    print!("{}", cmd_ece(&config)?);
    print!("{}", cmd_correlation(&config)?);

    let mut files: Vec<_> = std::fs::read_dir(dir.path())?
        .map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect::<Result<_, _>>()?;
    files.sort();
    println!("wrote {}", files.join(", "));
    Ok(())
}
