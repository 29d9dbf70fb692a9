//! Flat `key = value` config files.
//!
//! Keys are flag names without the leading dashes (`max-iter` or
//! `max_iter`). Blank lines and `#` comments are skipped. Entries are
//! turned into `--key=value` arguments placed before the command-line
//! flags, and since later flags override earlier ones, explicit flags win
//! over the file and the file wins over defaults.

use std::path::Path;

use anyhow::{bail, Context, Result};

pub fn parse(text: &str, origin: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("{}: line {}: expected `key = value`", origin.display(), k + 1);
        };
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() || key == "config" {
            bail!("{}: line {}: invalid key {key:?}", origin.display(), k + 1);
        }
        out.push((key, value.trim().to_owned()));
    }
    Ok(out)
}

fn config_path(args: &[String]) -> Option<String> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_owned());
        }
    }
    None
}

/// Splices the entries of the `--config` file, if any, in front of the
/// subcommand's own flags. `argv[0]` is the program, `argv[1]` the
/// subcommand.
pub fn expand(argv: Vec<String>) -> Result<Vec<String>> {
    if argv.len() < 2 {
        return Ok(argv);
    }
    let Some(path) = config_path(&argv[2..]) else {
        return Ok(argv);
    };
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    let entries = parse(&text, path)?;
    let mut out = argv[..2].to_vec();
    out.extend(entries.into_iter().map(|(k, v)| format!("--{k}={v}")));
    out.extend_from_slice(&argv[2..]);
    Ok(out)
}
