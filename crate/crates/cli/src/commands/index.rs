use std::io::Write;

use framescout::datasetops::load_grouped;
use framescout::lexicon::load_lexicon;
use framescout::retriever::{check_gold_labels, retrieve_batch, retrieve_candidates, score_retrieval};
use framescout::vector_index::{build_index, SearchHit};
use serde::Serialize;

use super::Ctx;
use crate::args::{EmbedArgs, IndexCmd, RetrieveArgs, RetrieveCmd};
use crate::error::{CliError, CliResult};
use crate::manifest::beside;
use crate::output::{fmt_score, record_line, write_json_file, Format, Table};

#[derive(Serialize)]
struct EmbeddingRecord<'a> {
    index: usize,
    text: &'a str,
    embedding: &'a [f32],
}

pub fn embed(ctx: &Ctx, args: EmbedArgs) -> CliResult<()> {
    let mut manifest = ctx.manifest();
    manifest.input(&args.input)?;
    let text = std::fs::read_to_string(&args.input).map_err(|e| framescout::Error::io(&args.input, e))?;
    let texts: Vec<String> = text.lines().filter(|l| !l.trim().is_empty()).map(str::to_string).collect();
    let embedder = ctx.settings.embedder()?;
    let mut vectors = Vec::with_capacity(texts.len());
    for chunk in texts.chunks(embedder.batch_size().max(1)) {
        vectors.extend(embedder.embed_batch(chunk)?);
    }
    let mut out = String::new();
    for (i, (t, v)) in texts.iter().zip(&vectors).enumerate() {
        out.push_str(&record_line(&EmbeddingRecord {
            index: i,
            text: t,
            embedding: v.values(),
        }));
    }
    std::fs::write(&args.out, out).map_err(|e| framescout::Error::io(&args.out, e))?;
    manifest.provider("embedder", embedder.fingerprint()).output(&args.out);
    manifest.finish(&beside(&args.out))?;
    println!("embedded {} texts (dim {}) -> {}", texts.len(), embedder.dim(), args.out.display());
    Ok(())
}

pub fn run(ctx: &Ctx, cmd: IndexCmd) -> CliResult<()> {
    match cmd {
        IndexCmd::Build { lexicon, variant, out } => {
            let mut manifest = ctx.manifest();
            manifest.input(&lexicon)?;
            let lex = load_lexicon(&lexicon)?;
            let embedder = ctx.settings.embedder()?;
            let index = build_index(&lex, variant, embedder.as_ref())?;
            index.save(&out)?;
            manifest
                .lexicon_version(lex.version_tag())
                .index_fingerprint(index.provider_fingerprint())
                .provider("embedder", embedder.fingerprint())
                .output(&out);
            manifest.finish(&beside(&out))?;
            println!(
                "indexed {} frames ({}, dim {}, fingerprint {}) -> {}",
                index.len(),
                variant.as_str(),
                index.dim(),
                index.provider_fingerprint(),
                out.display()
            );
            Ok(())
        }
        IndexCmd::Search { index, query, k } => {
            let (index, embedder) = ctx.index_and_embedder(&index)?;
            let q = embedder.embed(&query)?;
            print_hits(ctx, &index.search_topk(&q, k)?);
            Ok(())
        }
    }
}

fn print_hits(ctx: &Ctx, hits: &[SearchHit]) {
    match ctx.settings.format {
        Format::Records => {
            let mut out = std::io::stdout().lock();
            for h in hits {
                let _ = out.write_all(record_line(h).as_bytes());
            }
        }
        Format::Table => {
            let mut t = Table::new(["rank", "frame", "score"]);
            for h in hits {
                t.row([h.rank.to_string(), h.frame_label.clone(), fmt_score(h.score)]);
            }
            print!("{}", t.render());
        }
    }
}

#[derive(Serialize)]
struct RankedRecord<'a> {
    id: &'a str,
    ranked: Vec<&'a str>,
    scores: Vec<f64>,
}

pub fn retrieve(ctx: &Ctx, args: RetrieveArgs) -> CliResult<()> {
    if let Some(RetrieveCmd::Eval {
        dataset,
        index,
        k,
        out,
        candidates_out,
    }) = args.eval
    {
        let mut manifest = ctx.manifest();
        manifest.input(&dataset)?.input(&index)?;
        let examples = load_grouped(&dataset)?;
        let (idx, embedder) = ctx.index_and_embedder(&index)?;
        if k.is_empty() || k.contains(&0) {
            return Err(CliError::Usage("-k values must be at least 1".into()));
        }
        if examples.is_empty() {
            return Err(CliError::Usage(format!("{} has no examples", dataset.display())));
        }
        check_gold_labels(&examples, &idx)?;
        let max_k = k.iter().copied().max().unwrap_or(1);
        let sentences: Vec<String> = examples.iter().map(|e| e.sentence.clone()).collect();
        let sets = retrieve_batch(&sentences, &idx, embedder.as_ref(), max_k)?;
        let reports = k
            .iter()
            .map(|&k| score_retrieval(&examples, &sets, k))
            .collect::<framescout::Result<Vec<_>>>()?;
        manifest
            .lexicon_version(idx.lexicon_version())
            .index_fingerprint(idx.provider_fingerprint())
            .provider("embedder", embedder.fingerprint());

        if let Some(path) = &candidates_out {
            let mut text = String::new();
            for (e, set) in examples.iter().zip(&sets) {
                text.push_str(&record_line(&RankedRecord {
                    id: &e.sentence_id,
                    ranked: set.labels().collect(),
                    scores: set.candidates.iter().map(|h| h.score).collect(),
                }));
            }
            std::fs::write(path, text).map_err(|e| framescout::Error::io(path, e))?;
            manifest.output(path);
        }
        if let Some(path) = &out {
            write_json_file(path, &reports)?;
            manifest.output(path);
        }
        if let Some(path) = out.as_ref().or(candidates_out.as_ref()) {
            manifest.finish(&beside(path))?;
        }

        match ctx.settings.format {
            Format::Records => {
                for r in &reports {
                    #[derive(Serialize)]
                    struct Summary {
                        k: usize,
                        precision: f64,
                        recall: f64,
                        hits: usize,
                        candidate_total: usize,
                        gold_total: usize,
                    }
                    print!(
                        "{}",
                        record_line(&Summary {
                            k: r.k,
                            precision: r.precision,
                            recall: r.recall,
                            hits: r.hits,
                            candidate_total: r.candidate_total,
                            gold_total: r.gold_total,
                        })
                    );
                }
            }
            Format::Table => {
                let mut t = Table::new(["k", "precision", "recall", "hits", "gold"]);
                for r in &reports {
                    t.row([
                        r.k.to_string(),
                        fmt_score(r.precision),
                        fmt_score(r.recall),
                        r.hits.to_string(),
                        r.gold_total.to_string(),
                    ]);
                }
                print!("{}", t.render());
            }
        }
        return Ok(());
    }

    let (Some(index), Some(sentence)) = (args.index, args.sentence) else {
        return Err(CliError::Usage("retrieve needs --index and --sentence (or the eval subcommand)".into()));
    };
    let (idx, embedder) = ctx.index_and_embedder(&index)?;
    let set = retrieve_candidates(&sentence, &idx, embedder.as_ref(), args.k)?;
    print_hits(ctx, &set.candidates);
    Ok(())
}
