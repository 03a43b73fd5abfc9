//! Configuration text, checkpoint caching and stale-checkpoint detection.

use sshhub::checkpoint::read_checkpoint;
use sshhub::config::{parse_sections, RunConfig};
use sshhub::pipeline::{load_or_diagonalize, Source};
use sshhub::{Error, Result};

pub fn run_example() -> Result<()> {
    let dir =
        std::env::temp_dir().join(format!("sshhub-examples/checkpoint-{}", std::process::id()));
    let text = format!(
        "[chain]\nN = 6\nphase = trivial\nU = 0.2\n\n[solver]\nk = 20\n\n[output]\ndirectory = {}\n",
        dir.display()
    );
    let mut cfg = RunConfig::default();
    for (key, value) in parse_sections(&text)? {
        cfg.set(&key, &value)?;
    }
    print!("{}", cfg.to_text()?);

    let (first, path, source) = load_or_diagonalize(&cfg, None)?;
    assert_eq!(source, Source::Computed);
    let (again, _, source) = load_or_diagonalize(&cfg, None)?;
    assert_eq!(source, Source::Checkpoint);
    assert_eq!(first, again);
    println!("cached {} states in {}", again.len(), path.display());

    cfg.set("U", "0.3")?;
    match read_checkpoint(&path, &cfg.checkpoint_key()?) {
        Err(e @ Error::StaleCheckpoint { .. }) => println!("exit code {}: {e}", e.exit_code()),
        other => panic!("expected a stale checkpoint, got {:?}", other.map(|_| ())),
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
