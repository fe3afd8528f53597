use std::collections::BTreeMap;
use std::path::Path;

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};
use serde_json::json;
use tempocap_core::captionfmt::{
    parse_caption, render_paraphrase_prompt, render_pseudolabel_prompt, serialize_caption,
    templated_to_caption,
};
use tempocap_core::corpus::{load_clip_corpus, ClipCorpus, CorpusError};
use tempocap_core::metrics::{
    bert_score_report, bleu_report, clap_score_report, corpus_stats, median_rank, meteor_report,
    recall_at_k, rouge_report, tokenize, AudioTextPair, CaptionPair, EmbeddedPair, MetricReport,
    TokenSequence,
};
use tempocap_core::retrieval::{
    rank_all, read_segment_docs, score_matrix, DocReadOptions, RankedList, SegmentDoc,
};
use tempocap_core::sampler::{
    compose_rng, generate_compositions, render_template, CompositionPlan, SamplerConfig,
    TemplatedCaption,
};
use tempocap_core::{SegmentedCaption, TimeInterval};

use crate::io::{
    check_unique, input_error, normalize_ks, open, read_captions, read_jsonl, read_to_string,
    read_token_embeddings, read_truth, read_vectors, Output,
};
use crate::{
    ClapScoreArgs, Cli, CliError, Command, ComposeArgs, EvalCaptionsArgs, EvalRetrievalArgs,
    MetricName, Mode, ParseArgs, ParseFormat, RenderPromptArgs, RetrieveArgs, StatsArgs,
    ValidateArgs,
};

/// Runs one parsed command line.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let out = cli.out.as_ref();
    match &cli.command {
        Command::Validate(a) => validate(a, Output::new(out)),
        Command::Compose(a) => compose(a, cli.seed, Output::new(out)),
        Command::RenderPrompt(a) => render_prompt(a, Output::new(out)),
        Command::Parse(a) => parse(a, Output::new(out)),
        Command::Retrieve(a) => retrieve(a, Output::new(out)),
        Command::EvalCaptions(a) => eval_captions(a, Output::new(out)),
        Command::EvalRetrieval(a) => eval_retrieval(a, Output::new(out)),
        Command::Stats(a) => stats(a, Output::new(out)),
        Command::ClapScore(a) => clap_score(a, Output::new(out)),
    }
}

fn load_corpus(path: &Path) -> Result<ClipCorpus, CliError> {
    load_clip_corpus(path).map_err(|e| match e {
        CorpusError::Io { .. } => CliError::Input(e.to_string()),
        other => input_error(path, other),
    })
}

fn validate(a: &ValidateArgs, mut out: Output) -> Result<(), CliError> {
    let corpus = load_corpus(&a.clips)?;
    out.json_line(&json!({
        "ok": true,
        "clips": corpus.len(),
        "dim": corpus.dim(),
    }))?;
    out.finish()
}

#[derive(Serialize)]
struct ComposeRecord<'a> {
    index: usize,
    plan: &'a CompositionPlan,
    template: &'a TemplatedCaption,
    caption: String,
}

fn compose(a: &ComposeArgs, seed: u64, mut out: Output) -> Result<(), CliError> {
    if !(a.temperature.is_finite() && a.temperature > 0.0) {
        return Err(CliError::Usage(format!(
            "--temperature must be positive and finite, got {}",
            a.temperature
        )));
    }
    let corpus = load_corpus(&a.clips)?;
    let config = SamplerConfig {
        temperature: a.temperature,
        force_include_seed: a.force_include_seed,
    };
    let count =
        usize::try_from(a.count).map_err(|_| CliError::Usage("--count too large".into()))?;
    let plans = generate_compositions(&corpus, count, &config, &mut compose_rng(seed))
        .map_err(|e| input_error(&a.clips, e))?;
    for (index, plan) in plans.iter().enumerate() {
        let template = render_template(plan, &corpus).map_err(|e| input_error(&a.clips, e))?;
        let caption = templated_to_caption(&template).map_err(|e| input_error(&a.clips, e))?;
        out.json_line(&ComposeRecord {
            index,
            plan,
            template: &template,
            caption: serialize_caption(&caption),
        })?;
    }
    out.finish()
}

#[derive(Deserialize)]
struct PlanRecordIn {
    index: usize,
    template: TemplatedCaption,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotatedSegment {
    start: f64,
    end: f64,
    label: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationRecord {
    id: String,
    genre: String,
    bpm: f64,
    /// When present, segment bounds are in seconds rather than fractions.
    #[serde(default)]
    duration_s: Option<f64>,
    segments: Vec<AnnotatedSegment>,
}

fn render_prompt(a: &RenderPromptArgs, mut out: Output) -> Result<(), CliError> {
    if let Some(path) = &a.plans {
        for (_, r) in read_jsonl::<PlanRecordIn>(path)? {
            let prompt = render_paraphrase_prompt(&r.template);
            out.json_line(&json!({ "index": r.index, "prompt": prompt.as_str() }))?;
        }
    } else if let Some(path) = &a.annotations {
        for (line, r) in read_jsonl::<AnnotationRecord>(path)? {
            let at = |m: String| CliError::Input(format!("{}:{line}: {m}", path.display()));
            let segments = r
                .segments
                .into_iter()
                .map(|s| {
                    let iv = match r.duration_s {
                        Some(d) => TimeInterval::from_seconds(s.start, s.end, d),
                        None => TimeInterval::new(s.start, s.end),
                    };
                    iv.map(|iv| (iv, s.label)).map_err(|e| at(e.to_string()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let prompt = render_pseudolabel_prompt(&r.genre, r.bpm, &segments)
                .map_err(|e| at(e.to_string()))?;
            out.json_line(&json!({ "id": r.id, "prompt": prompt.as_str() }))?;
        }
    }
    out.finish()
}

fn parse(a: &ParseArgs, mut out: Output) -> Result<(), CliError> {
    let text = read_to_string(&a.input)?;
    let cap = parse_caption(&text).map_err(|e| {
        CliError::Input(format!(
            "{}:{}:{}: {}",
            a.input.display(),
            e.line,
            e.column,
            e.kind
        ))
    })?;
    match a.format {
        ParseFormat::Json => out.json_line(&cap)?,
        ParseFormat::Text => out.text(&serialize_caption(&cap))?,
    }
    out.finish()
}

/// Recall at each cut-off followed by the median rank, in that key order.
struct RetrievalMetrics {
    recall: Vec<(usize, f64)>,
    median_rank: f64,
}

impl Serialize for RetrievalMetrics {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.recall.len() + 1))?;
        for (k, v) in &self.recall {
            map.serialize_entry(&format!("R@{k}"), v)?;
        }
        map.serialize_entry("MedR", &self.median_rank)?;
        map.end()
    }
}

fn retrieval_metrics(
    rankings: &[RankedList],
    truth: &BTreeMap<String, String>,
    ks: &[usize],
    truth_path: &Path,
) -> Result<RetrievalMetrics, CliError> {
    let queries: std::collections::HashSet<&str> =
        rankings.iter().map(|r| r.query_id.as_str()).collect();
    if let Some(q) = truth.keys().find(|q| !queries.contains(q.as_str())) {
        return Err(input_error(truth_path, format!("unknown query id {q:?}")));
    }
    let metric_err = |e| input_error(truth_path, e);
    let recall = ks
        .iter()
        .map(|&k| Ok((k, recall_at_k(rankings, truth, k).map_err(metric_err)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(RetrievalMetrics {
        recall,
        median_rank: median_rank(rankings, truth).map_err(metric_err)?,
    })
}

#[derive(Serialize, Deserialize)]
struct RetrieveReport<M> {
    rankings: Vec<RankedList>,
    #[serde(skip_serializing_if = "Option::is_none")]
    metrics: Option<M>,
}

fn read_docs(path: &Path, options: &DocReadOptions) -> Result<Vec<SegmentDoc>, CliError> {
    read_segment_docs(open(path)?, options).map_err(|e| input_error(path, e))
}

fn retrieve(a: &RetrieveArgs, mut out: Output) -> Result<(), CliError> {
    let ks = normalize_ks(&a.k)?;
    if !(a.window_s.is_finite() && a.window_s > 0.0) {
        return Err(CliError::Usage(format!(
            "--window-s must be positive and finite, got {}",
            a.window_s
        )));
    }
    let options = DocReadOptions {
        window_s: a.window_s,
        include_global: a.include_global,
    };
    let texts = read_docs(&a.text_docs, &options)?;
    let audios = read_docs(&a.audio_docs, &options)?;
    let m = score_matrix(&texts, &audios).map_err(|e| CliError::Input(e.to_string()))?;
    let rankings = rank_all(&m);
    let metrics = match &a.truth {
        Some(path) => Some(retrieval_metrics(&rankings, &read_truth(path)?, &ks, path)?),
        None => None,
    };
    out.json_line(&RetrieveReport { rankings, metrics })?;
    out.finish()
}

fn eval_retrieval(a: &EvalRetrievalArgs, mut out: Output) -> Result<(), CliError> {
    let ks = normalize_ks(&a.k)?;
    let report: RetrieveReport<serde_json::Value> =
        serde_json::from_str(&read_to_string(&a.rankings)?)
            .map_err(|e| input_error(&a.rankings, e))?;
    check_unique("query", report.rankings.iter().map(|r| r.query_id.as_str()))?;
    let metrics = retrieval_metrics(&report.rankings, &read_truth(&a.truth)?, &ks, &a.truth)?;
    out.json_line(&metrics)?;
    out.finish()
}

fn caption_tokens(cap: &SegmentedCaption, mode: Mode) -> TokenSequence {
    match mode {
        Mode::Global => tokenize(cap.global()),
        Mode::Complete => tokenize(&cap.complete_text()),
    }
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Global => "global",
        Mode::Complete => "complete",
    }
}

fn eval_captions(a: &EvalCaptionsArgs, mut out: Output) -> Result<(), CliError> {
    let mut metrics = a.metrics.clone();
    metrics.sort_unstable();
    metrics.dedup();
    let wants_bert = metrics.contains(&MetricName::Bertscore);
    if wants_bert && (a.hyp_embeddings.is_none() || a.ref_embeddings.is_none()) {
        return Err(CliError::Usage(
            "bertscore needs --hyp-embeddings and --ref-embeddings".into(),
        ));
    }

    let hyps = read_captions(&a.hyp)?;
    check_unique("hypothesis", hyps.iter().map(|(id, _)| id.as_str()))?;
    let mut refs: BTreeMap<String, Vec<SegmentedCaption>> = BTreeMap::new();
    for (id, cap) in read_captions(&a.reference)? {
        refs.entry(id).or_default().push(cap);
    }
    let hyp_ids: std::collections::HashSet<&str> = hyps.iter().map(|(id, _)| id.as_str()).collect();
    if let Some(id) = refs.keys().find(|id| !hyp_ids.contains(id.as_str())) {
        return Err(input_error(
            &a.reference,
            format!("reference id {id:?} has no hypothesis"),
        ));
    }
    let pairs = hyps
        .iter()
        .map(|(id, cap)| {
            let rs = refs
                .get(id)
                .ok_or_else(|| input_error(&a.reference, format!("no reference for id {id:?}")))?;
            Ok(CaptionPair {
                id: id.clone(),
                hyp: caption_tokens(cap, a.mode),
                refs: rs.iter().map(|r| caption_tokens(r, a.mode)).collect(),
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let metric_err = |e: tempocap_core::metrics::MetricError| CliError::Input(e.to_string());
    let mut reports: Vec<MetricReport> = Vec::new();
    for metric in metrics {
        let report = match metric {
            MetricName::Bleu => bleu_report(&pairs, a.bleu_order as usize).map_err(metric_err)?,
            MetricName::Rouge => rouge_report(&pairs).map_err(metric_err)?,
            MetricName::Meteor => meteor_report(&pairs).map_err(metric_err)?,
            MetricName::Bertscore => {
                let hyp_path = a.hyp_embeddings.as_ref().expect("checked above");
                let ref_path = a.ref_embeddings.as_ref().expect("checked above");
                let h = read_token_embeddings(hyp_path)?;
                let mut r = read_token_embeddings(ref_path)?;
                let embedded = pairs
                    .iter()
                    .map(|p| {
                        let hyp = h.get(&p.id).cloned().ok_or_else(|| {
                            input_error(hyp_path, format!("no token embeddings for id {:?}", p.id))
                        })?;
                        let reference = r.remove(&p.id).ok_or_else(|| {
                            input_error(ref_path, format!("no token embeddings for id {:?}", p.id))
                        })?;
                        Ok(EmbeddedPair {
                            id: p.id.clone(),
                            hyp,
                            reference,
                        })
                    })
                    .collect::<Result<Vec<_>, CliError>>()?;
                let mut report = bert_score_report(&embedded).map_err(metric_err)?;
                report.notes.push(
                    "scored from the supplied token embeddings; --mode does not apply".into(),
                );
                report
            }
        };
        reports.push(report);
    }
    out.json_line(&json!({ "mode": mode_name(a.mode), "reports": reports }))?;
    out.finish()
}

fn stats(a: &StatsArgs, mut out: Output) -> Result<(), CliError> {
    let caps: Vec<SegmentedCaption> = read_captions(&a.input)?
        .into_iter()
        .map(|(_, c)| c)
        .collect();
    let report = corpus_stats(&caps).map_err(|e| input_error(&a.input, e))?;
    out.json_line(&report)?;
    out.finish()
}

fn clap_score(a: &ClapScoreArgs, mut out: Output) -> Result<(), CliError> {
    let audio = read_vectors(&a.audio)?;
    let mut text = read_vectors(&a.text)?;
    let mut pairs = Vec::with_capacity(audio.len());
    for (id, av) in audio {
        let tv = text
            .remove(&id)
            .ok_or_else(|| input_error(&a.text, format!("no text embedding for id {id:?}")))?;
        pairs.push(AudioTextPair {
            id,
            audio: av,
            text: tv,
        });
    }
    if let Some(id) = text.keys().next() {
        return Err(input_error(
            &a.audio,
            format!("no audio embedding for id {id:?}"),
        ));
    }
    let report = clap_score_report(&pairs).map_err(|e| CliError::Input(e.to_string()))?;
    out.json_line(&report)?;
    out.finish()
}
