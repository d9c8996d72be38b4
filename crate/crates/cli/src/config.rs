//! `--config` files hold `flag = value` lines naming long flags without the
//! leading dashes (`batch_size` and `batch-size` both work). They are
//! spliced into the argument list right after the subcommand, ahead of the
//! user's own flags; since a repeated flag keeps its last value, command-line
//! flags win over the file and the file wins over built-in defaults.
//! `flag = true` turns on a switch, `flag = false` leaves it off.

use std::path::Path;

use anyhow::{Context, Result};

const SUBCOMMANDS: [&str; 8] = ["gen-data", "label", "train", "fine-tune", "predict", "eval", "bench", "report"];

fn config_path(argv: &[String]) -> Option<&str> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        if a == "--" {
            return None;
        }
        if a == "--config" {
            return it.next().map(String::as_str);
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some(v);
        }
    }
    None
}

/// The argument list with config-file flags spliced in.
pub fn expand(argv: &[String]) -> Result<Vec<String>> {
    let Some(path) = config_path(argv) else {
        return Ok(argv.to_vec());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {path}"))?;
    let map = steinerwl::kv::parse(&text).with_context(|| format!("parsing config {}", Path::new(path).display()))?;
    let mut injected = Vec::new();
    for (k, v) in &map {
        let k = k.replace('_', "-");
        if k == "config" {
            continue;
        }
        match v.as_str() {
            "true" => injected.push(format!("--{k}")),
            "false" => {}
            _ => injected.push(format!("--{k}={v}")),
        }
    }
    let at = argv.iter().position(|a| SUBCOMMANDS.contains(&a.as_str())).map_or(argv.len(), |i| i + 1);
    let mut out = argv[..at].to_vec();
    out.extend(injected);
    out.extend_from_slice(&argv[at..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn splices_after_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.kv");
        std::fs::write(&cfg, "lr = 0.01\ncosine = true\nno_layernorm = false\nbatch_size = 8\n").unwrap();
        let c = cfg.to_str().unwrap();
        let out = expand(&args(&["steinerwl", "--config", c, "train", "--lr", "0.5"])).unwrap();
        assert_eq!(out, args(&["steinerwl", "--config", c, "train", "--batch-size=8", "--cosine", "--lr=0.01", "--lr", "0.5"]));
    }

    #[test]
    fn untouched_without_config() {
        let a = args(&["steinerwl", "eval", "--nets", "x.jsonl"]);
        assert_eq!(expand(&a).unwrap(), a);
    }
}
