use framescout::datasetops::{compute_split_stats, group_by_sentence, load_grouped, load_instances, merge_exemplars};
use framescout::jsonl::write_records;
use serde::Serialize;

use super::Ctx;
use crate::args::DatasetCmd;
use crate::error::CliResult;
use crate::manifest::beside;
use crate::output::{record_line, Format, Table};

pub fn run(ctx: &Ctx, cmd: DatasetCmd) -> CliResult<()> {
    match cmd {
        DatasetCmd::Group { input, out, split } => {
            let mut manifest = ctx.manifest();
            manifest.input(&input)?;
            let instances = load_instances(&input)?;
            let grouped = group_by_sentence(&instances, split)?;
            write_records(&out, &grouped)?;
            manifest.output(&out).finish(&beside(&out))?;
            println!(
                "grouped {} instances into {} sentences ({split}) -> {}",
                instances.len(),
                grouped.len(),
                out.display()
            );
        }
        DatasetCmd::Stats { input } => {
            let examples = load_grouped(&input)?;
            let stats = compute_split_stats(&examples)?;
            match ctx.settings.format {
                Format::Records => print!("{}", record_line(&stats)),
                Format::Table => {
                    let mut t = Table::new(["examples", "min", "max", "mean"]);
                    t.row([
                        stats.example_count.to_string(),
                        stats.min_frames.to_string(),
                        stats.max_frames.to_string(),
                        format!("{:.2}", stats.mean_frames),
                    ]);
                    print!("{}", t.render());
                }
            }
        }
        DatasetCmd::Merge {
            train,
            exemplars,
            order,
            out,
        } => {
            let mut manifest = ctx.manifest();
            manifest.input(&train)?.input(&exemplars)?;
            let merged = merge_exemplars(&load_grouped(&train)?, &load_grouped(&exemplars)?, order)?;
            write_records(&out, &merged)?;
            manifest.output(&out).finish(&beside(&out))?;
            #[derive(Serialize)]
            struct Summary {
                examples: usize,
            }
            print!("{}", record_line(&Summary { examples: merged.len() }));
        }
    }
    Ok(())
}
