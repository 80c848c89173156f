use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde_json::json;

use crate::output::write_json;
use crate::{CliError, Summary, EXIT_FAIL, EXIT_PASS};

pub const REPORT_FILE: &str = "report.json";

/// Reads every summary in `out`, writes `report.json` and returns the exit status.
pub fn run(out: &Path) -> Result<i32, CliError> {
    let entries = fs::read_dir(out).map_err(|e| CliError::Config(format!("{}: {e}", out.display())))?;
    let mut summaries: BTreeMap<String, Summary> = BTreeMap::new();
    for entry in entries {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if name == REPORT_FILE || path.extension().map_or(true, |e| e != "json") {
            continue;
        }
        let text = fs::read_to_string(&path)?;
        if let Ok(s) = serde_json::from_str::<Summary>(&text) {
            summaries.insert(name.trim_end_matches(".json").to_string(), s);
        }
    }
    if summaries.is_empty() {
        return Err(CliError::Config(format!("no summaries in {}", out.display())));
    }
    let failures: Vec<String> = summaries
        .values()
        .flat_map(|s| s.failures.iter().map(move |f| format!("{}: {f}", s.command)))
        .collect();
    let pass = failures.is_empty();
    let seeds: Vec<u64> = {
        let mut s: Vec<u64> = summaries.values().map(|s| s.seed).collect();
        s.sort_unstable();
        s.dedup();
        s
    };
    let report = json!({
        "pass": pass,
        "seeds": seeds,
        "commands": summaries.values().map(|s| json!({ "command": s.command, "pass": s.pass })).collect::<Vec<_>>(),
        "failures": failures,
        "summaries": summaries,
    });
    write_json(&out.join(REPORT_FILE), &report)?;
    if pass {
        Ok(EXIT_PASS)
    } else {
        eprintln!("{}", json!({ "failures": failures }));
        Ok(EXIT_FAIL)
    }
}
