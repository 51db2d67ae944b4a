use framescout::lexicon::{load_lexicon, validate_lexicon};

use super::Ctx;
use crate::args::LexiconCmd;
use crate::error::CliResult;
use crate::output::{record_line, Format, Table};

pub fn run(ctx: &Ctx, cmd: LexiconCmd) -> CliResult<()> {
    let LexiconCmd::Validate { path } = cmd;
    let lex = load_lexicon(&path)?;
    let report = validate_lexicon(&lex);
    match ctx.settings.format {
        Format::Records => print!("{}", record_line(&report)),
        Format::Table => {
            println!(
                "lexicon {} with {} frames, {} warnings",
                report.lexicon_version,
                report.frame_count,
                report.warnings.len()
            );
            if !report.warnings.is_empty() {
                let mut t = Table::new(["frame", "warning"]);
                for w in &report.warnings {
                    t.row([w.label.clone(), format!("{:?}", w.kind)]);
                }
                print!("{}", t.render());
            }
        }
    }
    Ok(())
}
