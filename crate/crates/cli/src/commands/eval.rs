use std::path::Path;

use framescout::datasetops::load_grouped;
use framescout::jsonl::read_records;
use framescout::metrics::{
    complexity_estimate, corpus_bleu, recall_at_k, score_sets, sparql_tokenize, FrameSet, SPARQL_TOKENIZER_VERSION,
};
use serde::{Deserialize, Serialize};

use super::Ctx;
use crate::args::EvalCmd;
use crate::error::{CliError, CliResult};
use crate::manifest::{beside, ManifestBuilder};
use crate::output::{fmt_score, record_line, write_json_file, Format, Table};

#[derive(Deserialize)]
struct PredictionRecord {
    #[serde(alias = "sentence_id")]
    id: String,
    #[serde(alias = "gold_frames")]
    frames: FrameSet,
}

#[derive(Deserialize)]
struct RankedRecord {
    #[serde(alias = "sentence_id")]
    id: String,
    ranked: Vec<String>,
}

fn gold_pairs(path: &Path) -> CliResult<Vec<(String, FrameSet)>> {
    Ok(load_grouped(path)?
        .into_iter()
        .map(|e| (e.sentence_id, e.gold_frames))
        .collect())
}

fn read_lines(path: &Path) -> CliResult<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| framescout::Error::io(path, e))?;
    Ok(text.lines().map(str::to_string).collect())
}

fn save(manifest: Option<ManifestBuilder>, out: Option<&Path>, report: &impl Serialize) -> CliResult<()> {
    if let (Some(mut manifest), Some(path)) = (manifest, out) {
        write_json_file(path, report)?;
        manifest.output(path).finish(&beside(path))?;
    }
    Ok(())
}

pub fn run(ctx: &Ctx, cmd: EvalCmd) -> CliResult<()> {
    let table = ctx.settings.format == Format::Table;
    match cmd {
        EvalCmd::Detect { pred, gold, out } => {
            let mut manifest = ctx.manifest();
            manifest.input(&pred)?.input(&gold)?;
            let preds: Vec<(String, FrameSet)> = read_records::<PredictionRecord>(&pred)?
                .into_iter()
                .map(|r| (r.id, r.frames))
                .collect();
            let report = score_sets(&preds, &gold_pairs(&gold)?)?;
            save(Some(manifest), out.as_deref(), &report)?;
            if table {
                let mut t = Table::new(["precision", "recall", "accuracy_exact", "accuracy_micro", "tp", "fp", "fn"]);
                t.row([
                    fmt_score(report.precision),
                    fmt_score(report.recall),
                    fmt_score(report.accuracy_exact),
                    fmt_score(report.accuracy_micro),
                    report.counts.tp.to_string(),
                    report.counts.fp.to_string(),
                    report.counts.fn_.to_string(),
                ]);
                print!("{}", t.render());
            } else {
                #[derive(Serialize)]
                struct Summary<'a> {
                    precision: f64,
                    recall: f64,
                    accuracy_exact: f64,
                    accuracy_micro: f64,
                    counts: &'a framescout::metrics::Counts,
                }
                print!(
                    "{}",
                    record_line(&Summary {
                        precision: report.precision,
                        recall: report.recall,
                        accuracy_exact: report.accuracy_exact,
                        accuracy_micro: report.accuracy_micro,
                        counts: &report.counts,
                    })
                );
            }
        }
        EvalCmd::RecallAtK { ranked, gold, k, out } => {
            let mut manifest = ctx.manifest();
            manifest.input(&ranked)?.input(&gold)?;
            let rankings: Vec<(String, Vec<String>)> = read_records::<RankedRecord>(&ranked)?
                .into_iter()
                .map(|r| (r.id, r.ranked))
                .collect();
            let gold = gold_pairs(&gold)?;
            let reports = k
                .iter()
                .map(|&k| recall_at_k(&rankings, &gold, k))
                .collect::<framescout::Result<Vec<_>>>()?;
            save(Some(manifest), out.as_deref(), &reports)?;
            if table {
                let mut t = Table::new(["k", "recall", "hits", "gold"]);
                for r in &reports {
                    t.row([r.k.to_string(), fmt_score(r.value), r.hits.to_string(), r.gold_total.to_string()]);
                }
                print!("{}", t.render());
            } else {
                for r in &reports {
                    print!("{}", record_line(r));
                }
            }
        }
        EvalCmd::Bleu { hyp, reference, out } => {
            let mut manifest = ctx.manifest();
            manifest.input(&hyp)?.input(&reference)?;
            let hyps = read_lines(&hyp)?;
            let refs = read_lines(&reference)?;
            if hyps.len() != refs.len() {
                return Err(CliError::Usage(format!(
                    "{} hypotheses but {} references",
                    hyps.len(),
                    refs.len()
                )));
            }
            let tok = |v: &[String]| v.iter().map(|q| sparql_tokenize(q)).collect::<Vec<_>>();
            let bleu = corpus_bleu(&tok(&hyps), &tok(&refs))?;
            #[derive(Serialize)]
            struct BleuReport {
                bleu: f64,
                pairs: usize,
                tokenizer: &'static str,
            }
            let report = BleuReport {
                bleu,
                pairs: hyps.len(),
                tokenizer: SPARQL_TOKENIZER_VERSION,
            };
            save(Some(manifest), out.as_deref(), &report)?;
            if table {
                let mut t = Table::new(["bleu", "pairs", "tokenizer"]);
                t.row([format!("{bleu:.4}"), hyps.len().to_string(), SPARQL_TOKENIZER_VERSION.into()]);
                print!("{}", t.render());
            } else {
                print!("{}", record_line(&report));
            }
        }
        EvalCmd::Complexity {
            tokens,
            lexicon_size,
            candidates,
        } => {
            if tokens == 0 || lexicon_size == 0 || candidates == Some(0) {
                return Err(CliError::Usage("complexity inputs must be at least 1".into()));
            }
            #[derive(Serialize)]
            struct ComplexityReport {
                tokens: u64,
                lexicon_size: u64,
                candidates: Option<u64>,
                without_filtering: u64,
                with_filtering: Option<u64>,
            }
            let report = ComplexityReport {
                tokens,
                lexicon_size,
                candidates,
                without_filtering: complexity_estimate(tokens, lexicon_size, None),
                with_filtering: candidates.map(|c| complexity_estimate(tokens, lexicon_size, Some(c))),
            };
            if table {
                let mut t = Table::new(["tokens", "frames", "candidates", "without", "with"]);
                let dash = || "-".to_string();
                t.row([
                    tokens.to_string(),
                    lexicon_size.to_string(),
                    candidates.map_or_else(dash, |c| c.to_string()),
                    report.without_filtering.to_string(),
                    report.with_filtering.map_or_else(dash, |c| c.to_string()),
                ]);
                print!("{}", t.render());
            } else {
                print!("{}", record_line(&report));
            }
        }
    }
    Ok(())
}
