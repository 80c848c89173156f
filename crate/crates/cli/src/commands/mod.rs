//! One module per command group.

pub mod fibration;
pub mod metric;
pub mod periods;
pub mod report;
pub mod semiflat;
pub mod sk;
pub mod volume;

use crate::{CliError, Command, Context, Outcome};

pub fn dispatch(ctx: &Context, command: Command) -> Result<Outcome, CliError> {
    match command {
        Command::Fibration { action } => fibration::run(ctx, action),
        Command::Periods { action } => periods::run(ctx, action),
        Command::Volume { action } => volume::run(ctx, action),
        Command::Metric { action } => metric::run(ctx, action),
        Command::Sk { action } => sk::run(ctx, action),
        Command::Semiflat { action } => semiflat::run(ctx, action),
        Command::Report => Err(CliError::Config("report does not take a fibration".into())),
    }
}
