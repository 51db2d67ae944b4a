use framescout::lcq2f::{build_lcq2f, load_kb_corpus, load_questions, match_questions, write_lcq2f, SignatureExtractor};
use framescout::lexicon::{load_lexicon, FrameLexicon};

use super::Ctx;
use crate::args::Lcq2fCmd;
use crate::error::CliResult;
use crate::output::{record_line, Format, Table};

pub fn run(ctx: &Ctx, cmd: Lcq2fCmd) -> CliResult<()> {
    let Lcq2fCmd::Build {
        questions,
        corpus,
        plus,
        lexicon,
        combined,
        match_mode,
        out,
    } = cmd;
    let mut manifest = ctx.manifest();
    manifest.input(&questions)?.input(&corpus)?;
    let qs = load_questions(&questions)?;
    let sentences = load_kb_corpus(&corpus)?;
    let lex = match &lexicon {
        Some(path) => {
            manifest.input(path)?;
            let lex = load_lexicon(path)?;
            manifest.lexicon_version(lex.version_tag());
            lex
        }
        None => FrameLexicon::new(framescout::lexicon::UNVERSIONED, Vec::new())?,
    };
    let rules = &ctx.settings.signature_rules;
    let extractor = SignatureExtractor::new(rules)?;
    let matches = match_questions(&qs, &sentences, &extractor, match_mode);
    let dataset = build_lcq2f(&matches, &lex, plus)?;
    let mut sources = vec![questions.as_path(), corpus.as_path()];
    if let Some(path) = &lexicon {
        sources.push(path.as_path());
    }
    let summary = write_lcq2f(&dataset, &out, combined, rules, match_mode, &sources)?;
    for file in summary.files.keys() {
        manifest.output(&out.join(file));
    }
    manifest.output(&out.join("manifest.json"));
    manifest.finish(&out.join("run.manifest.json"))?;

    match ctx.settings.format {
        Format::Records => print!("{}", record_line(&summary.files)),
        Format::Table => {
            let mut t = Table::new(["file", "entries"]);
            for (file, n) in &summary.files {
                t.row([file.clone(), n.to_string()]);
            }
            print!("{}", t.render());
        }
    }
    log::info!("{} of {} questions matched", matches.len(), qs.len());
    Ok(())
}
