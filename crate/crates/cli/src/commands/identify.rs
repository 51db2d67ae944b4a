use std::collections::BTreeSet;
use std::path::PathBuf;

use framescout::datasetops::{load_grouped, GroupedExample};
use framescout::identifier::{
    build_fsrl_prompt, build_identification_prompt, completion_stats, AuditLog, Demonstration, IdentificationResult,
    Identifier, PromptMode,
};
use framescout::lexicon::load_lexicon;
use framescout::retriever::retrieve_candidates;
use serde::Serialize;

use super::Ctx;
use crate::args::IdentifyArgs;
use crate::error::{CliError, CliResult};
use crate::manifest::beside;
use crate::output::{record_line, Format, Table};

#[derive(Serialize)]
struct Prediction<'a> {
    id: &'a str,
    #[serde(flatten)]
    result: &'a IdentificationResult,
}

fn audit_path(args: &IdentifyArgs) -> Option<PathBuf> {
    args.audit.clone().or_else(|| {
        args.out.as_ref().map(|out| {
            let mut name = out.file_name().unwrap_or_default().to_os_string();
            name.push(".audit.jsonl");
            out.with_file_name(name)
        })
    })
}

pub fn run(ctx: &Ctx, args: IdentifyArgs) -> CliResult<()> {
    let lex = load_lexicon(&args.lexicon)?;

    if let Some(label) = &args.fsrl {
        let frame = lex.get(label).ok_or_else(|| framescout::Error::UnknownLabel {
            label: label.clone(),
            context: Some("--fsrl".into()),
        })?;
        print!("{}", build_fsrl_prompt(args.sentence.as_deref().unwrap_or_default(), frame).render());
        return Ok(());
    }

    let mut prompt = ctx.settings.prompt.clone();
    if let Some(mode) = args.mode {
        prompt.mode = mode;
    }
    if let Some(budget) = args.token_budget {
        prompt.token_budget = (budget > 0).then_some(budget);
    }
    prompt.include_gold_count = args.gold_count.is_some() || args.with_gold_count;
    if let Some(path) = &args.demos {
        if prompt.mode != PromptMode::FewShot {
            return Err(CliError::Usage("--demos needs --mode few".into()));
        }
        prompt.demonstrations = load_grouped(path)?
            .into_iter()
            .take(args.demo_count)
            .map(|e| Demonstration {
                sentence: e.sentence,
                frames: e.gold_frames.into_iter().collect(),
            })
            .collect();
    }
    prompt.validate()?;

    let gold: Vec<GroupedExample> = match &args.dataset {
        Some(path) => load_grouped(path)?,
        None => Vec::new(),
    };
    let (index, embedder) = ctx.index_and_embedder(&args.index)?;

    if let Some(sentence) = &args.sentence {
        let gold_count = match args.gold_count {
            Some(n) => Some(n),
            None if args.with_gold_count => {
                let trimmed = sentence.trim();
                let ex = gold.iter().find(|e| e.sentence.trim() == trimmed).ok_or_else(|| {
                    CliError::Usage("--with-gold-count: sentence not found in --dataset".into())
                })?;
                Some(ex.gold_frames.len())
            }
            None => None,
        };
        if args.prompt_only {
            let candidates = retrieve_candidates(sentence, &index, embedder.as_ref(), args.k)?;
            let p = build_identification_prompt(sentence, &candidates, &lex, &prompt, gold_count)?;
            let text = match prompt.mode {
                PromptMode::FineTuneFormat => p.render_instruction_format(),
                _ => p.render(),
            };
            print!("{text}");
            return Ok(());
        }
        let chat = ctx.settings.chat(args.chat.as_deref(), &gold)?;
        let audit = audit_path(&args).map(|p| AuditLog::create(&p)).transpose()?;
        let mut identifier = Identifier::new(&lex, &index, embedder.as_ref(), chat.as_ref());
        identifier.prompt = prompt;
        identifier.k = args.k;
        identifier.policy = args.policy;
        identifier.workers = ctx.settings.workers;
        identifier.audit = audit.as_ref();
        let outcome = identifier.identify(sentence, gold_count)?;
        print_single(ctx, &outcome.result);
        return Ok(());
    }

    if gold.is_empty() {
        return Err(CliError::Usage("identify needs --sentence or a nonempty --dataset".into()));
    }
    let mut manifest = ctx.manifest();
    manifest.input(&args.lexicon)?.input(&args.index)?;
    if let Some(path) = &args.dataset {
        manifest.input(path)?;
    }
    let chat = ctx.settings.chat(args.chat.as_deref(), &gold)?;
    let audit_file = audit_path(&args);
    let audit = audit_file.as_deref().map(AuditLog::create).transpose()?;
    let mut identifier = Identifier::new(&lex, &index, embedder.as_ref(), chat.as_ref());
    identifier.prompt = prompt;
    identifier.k = args.k;
    identifier.policy = args.policy;
    identifier.workers = ctx.settings.workers;
    identifier.audit = audit.as_ref();

    let items: Vec<(String, Option<usize>)> = gold
        .iter()
        .map(|e| {
            let count = if args.with_gold_count { Some(e.gold_frames.len()) } else { args.gold_count };
            (e.sentence.clone(), count)
        })
        .collect();
    let outcomes = identifier.identify_batch(&items)?;

    let mut records = String::new();
    for (e, o) in gold.iter().zip(&outcomes) {
        records.push_str(&record_line(&Prediction {
            id: &e.sentence_id,
            result: &o.result,
        }));
    }
    match &args.out {
        Some(path) => {
            std::fs::write(path, &records).map_err(|e| framescout::Error::io(path, e))?;
            manifest
                .lexicon_version(lex.version_tag())
                .index_fingerprint(index.provider_fingerprint())
                .provider("embedder", embedder.fingerprint())
                .provider("chat", chat.name())
                .output(path);
            if let Some(a) = &audit_file {
                manifest.output(a);
            }
            manifest.finish(&beside(path))?;
        }
        None => print!("{records}"),
    }

    let stats = completion_stats(&outcomes, &gold)?;
    let predicted: usize = outcomes.iter().map(|o| o.result.frames.len()).sum();
    let completed: usize = outcomes.iter().map(|o| o.result.completed.len()).sum();
    let rejected: usize = outcomes.iter().map(|o| o.result.rejected.len()).sum();
    if args.out.is_some() {
        match ctx.settings.format {
            Format::Records => {
                #[derive(Serialize)]
                struct Summary<'a> {
                    examples: usize,
                    predicted: usize,
                    completed: usize,
                    rejected: usize,
                    completion: &'a framescout::identifier::CompletionStats,
                }
                print!(
                    "{}",
                    record_line(&Summary {
                        examples: outcomes.len(),
                        predicted,
                        completed,
                        rejected,
                        completion: &stats,
                    })
                );
            }
            Format::Table => {
                let mut t = Table::new(["examples", "predicted", "completed", "rejected", "recovered/incomplete"]);
                t.row([
                    outcomes.len().to_string(),
                    predicted.to_string(),
                    completed.to_string(),
                    rejected.to_string(),
                    format!("{}/{}", stats.recovered_examples, stats.incomplete_examples),
                ]);
                print!("{}", t.render());
            }
        }
    }
    Ok(())
}

fn print_single(ctx: &Ctx, result: &IdentificationResult) {
    match ctx.settings.format {
        Format::Records => print!("{}", record_line(result)),
        Format::Table => {
            let mut t = Table::new(["frame", "provenance"]);
            let tag = |set: &BTreeSet<String>, name: &str, t: &mut Table| {
                for f in set {
                    t.row([f.clone(), name.to_string()]);
                }
            };
            tag(&result.from_candidates, "candidate", &mut t);
            tag(&result.completed, "completed", &mut t);
            for r in &result.rejected {
                t.row([r.token.clone(), format!("rejected ({:?})", r.reason)]);
            }
            print!("{}", t.render());
        }
    }
}
