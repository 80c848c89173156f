use std::collections::BTreeMap;

use k3limit::fibration::{singular_fibers, singular_fibers_csv};
use serde_json::json;

use crate::output::Csv;
use crate::{CliError, Context, FibrationAction, Outcome};

pub fn run(ctx: &Context, FibrationAction::Classify: FibrationAction) -> Result<Outcome, CliError> {
    let scan = singular_fibers(&ctx.fibration)?;
    Csv::from_rendered(ctx.seed, &singular_fibers_csv(&scan.records)).write(&ctx.path("fibers.csv"))?;
    let mut types: BTreeMap<String, usize> = BTreeMap::new();
    for r in &scan.records {
        *types.entry(r.kodaira_type.to_string()).or_default() += 1;
    }
    Ok(Outcome {
        results: json!({
            "fibers": scan.records.len(),
            "total_discriminant_order": scan.total_discriminant_order(),
            "types": types,
            "records": scan.records,
            "issues": scan.issues,
        }),
        failures: Vec::new(),
    })
}
