//! Candidate-set prompting, chat-provider calls and output validation.
//!
//! The model is asked for a list of frame labels. Any lexicon frame it returns
//! is accepted under the default [`ValidationPolicy::Open`], including frames
//! that retrieval missed; those are reported as `completed`.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{LazyLock, Mutex};
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::datasetops::GroupedExample;
use crate::embedding::Embedder;
use crate::error::{Error, Result};
use crate::http::{JsonClient, RetryPolicy};
use crate::lexicon::{first_sentence, Frame, FrameLexicon};
use crate::retriever::{retrieve_batch, CandidateSet, DEFAULT_K};
use crate::vector_index::VectorIndex;

pub const PROMPT_TEMPLATE_VERSION: &str = "identify-prompt/v1";
pub const DEFAULT_TOKEN_BUDGET: usize = 2048;
pub const DEFAULT_WORKERS: usize = 4;
/// Label emitted by the `gold-plus-unknown` mock; never a lexicon frame in practice.
pub const MOCK_UNKNOWN_LABEL: &str = "NotAFrame";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    #[default]
    ZeroShot,
    FewShot,
    FineTuneFormat,
}

impl FromStr for PromptMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" | "zero_shot" | "zero-shot" => Ok(Self::ZeroShot),
            "few" | "few_shot" | "few-shot" => Ok(Self::FewShot),
            "ft" | "fine_tune_format" | "fine-tune" => Ok(Self::FineTuneFormat),
            other => Err(Error::InvalidArgument(format!("unknown prompt mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateDetail {
    LabelOnly,
    WithDescription,
    #[default]
    WithFesAndLus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demonstration {
    pub sentence: String,
    pub frames: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptConfig {
    pub mode: PromptMode,
    pub include_gold_count: bool,
    pub demonstrations: Vec<Demonstration>,
    pub max_candidate_detail: CandidateDetail,
    /// `None` disables the check.
    pub token_budget: Option<usize>,
}

impl Default for PromptConfig {
    fn default() -> Self {
        Self {
            mode: PromptMode::ZeroShot,
            include_gold_count: false,
            demonstrations: Vec::new(),
            max_candidate_detail: CandidateDetail::WithFesAndLus,
            token_budget: Some(DEFAULT_TOKEN_BUDGET),
        }
    }
}

impl PromptConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.demonstrations.is_empty() && self.mode != PromptMode::FewShot {
            return Err(Error::InvalidArgument(
                "demonstrations are only allowed in few_shot mode".into(),
            ));
        }
        if self.mode == PromptMode::FewShot && self.demonstrations.is_empty() {
            return Err(Error::InvalidArgument("few_shot mode needs demonstrations".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentificationPrompt {
    pub instruction: String,
    pub input: String,
    pub expected_output_schema: String,
}

impl IdentificationPrompt {
    /// Sectioned plain-text form, used for golden files and token estimates.
    pub fn render(&self) -> String {
        format!(
            "### Instruction\n{}\n\n### Input\n{}\n\n### Output format\n{}\n",
            self.instruction, self.input, self.expected_output_schema
        )
    }

    /// Instruction-Input-Response layout matching fine-tuning records.
    pub fn render_instruction_format(&self) -> String {
        format!(
            "### Instruction:\n{}\nOutput format: {}\n\n### Input:\n{}\n\n### Response:\n",
            self.instruction, self.expected_output_schema, self.input
        )
    }

    pub fn to_messages(&self, mode: PromptMode) -> Vec<ChatMessage> {
        match mode {
            PromptMode::FineTuneFormat => vec![ChatMessage::user(self.render_instruction_format())],
            PromptMode::ZeroShot | PromptMode::FewShot => vec![
                ChatMessage::system(format!(
                    "{}\nOutput format: {}",
                    self.instruction, self.expected_output_schema
                )),
                ChatMessage::user(self.input.clone()),
            ],
        }
    }
}

static TOKEN_PIECE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[A-Za-z]+|[0-9]+|[^\sA-Za-z0-9]").expect("static regex"));

/// Rough subword-token count: letters in pieces of up to 6, digits in pieces
/// of up to 3, every other visible character alone.
pub fn estimate_tokens(text: &str) -> usize {
    TOKEN_PIECE
        .find_iter(text)
        .map(|m| {
            let s = m.as_str();
            let len = s.chars().count();
            match s.as_bytes()[0] {
                b'A'..=b'Z' | b'a'..=b'z' => len.div_ceil(6),
                b'0'..=b'9' => len.div_ceil(3),
                _ => 1,
            }
        })
        .sum()
}

fn json_list<S: AsRef<str>>(labels: impl IntoIterator<Item = S>) -> String {
    let owned: Vec<String> = labels.into_iter().map(|s| s.as_ref().to_string()).collect();
    serde_json::to_string(&owned).expect("string list serializes")
}

const IDENTIFY_INSTRUCTION: &str = "Identify every semantic frame evoked by the sentence. \
A list of candidate frames retrieved for this sentence is given below. \
The list may be incomplete: you may also select frames that are not in the candidate list \
when the sentence evokes them. Use exact frame labels.";

const OUTPUT_SCHEMA: &str = "a JSON array of frame label strings and nothing else, \
for example [\"Commerce_buy\", \"Goal\"]";

fn write_candidate(out: &mut String, rank: usize, frame: &Frame, detail: CandidateDetail) {
    out.push_str(&format!("{rank}. {}\n", frame.label));
    if detail == CandidateDetail::LabelOnly {
        return;
    }
    out.push_str(&format!("   Description: {}\n", frame.description.trim()));
    if detail == CandidateDetail::WithFesAndLus {
        let fes: Vec<&str> = frame.frame_elements.iter().map(|fe| fe.name.as_str()).collect();
        let lus: Vec<String> = frame.lexical_units.iter().map(|lu| lu.to_string()).collect();
        out.push_str(&format!("   Frame elements: {}\n", fes.join(", ")));
        out.push_str(&format!("   Lexical units: {}\n", lus.join(", ")));
    }
}

/// Builds the identification prompt. Candidates appear in rank order; few-shot
/// demonstrations precede the sentence in the order given.
pub fn build_identification_prompt(
    sentence: &str,
    candidates: &CandidateSet,
    lex: &FrameLexicon,
    cfg: &PromptConfig,
    gold_count: Option<usize>,
) -> Result<IdentificationPrompt> {
    cfg.validate()?;
    if cfg.include_gold_count != gold_count.is_some() {
        return Err(Error::InvalidArgument(
            "a gold count must be given exactly when include_gold_count is set".into(),
        ));
    }
    if candidates.candidates.is_empty() {
        return Err(Error::InvalidArgument("empty candidate set".into()));
    }

    let mut instruction = IDENTIFY_INSTRUCTION.to_string();
    if let Some(n) = gold_count {
        let noun = if n == 1 { "frame" } else { "frames" };
        instruction.push_str(&format!(" The sentence evokes exactly {n} {noun}."));
    }

    let mut input = String::new();
    if cfg.mode == PromptMode::FewShot {
        input.push_str("Examples:\n");
        for demo in &cfg.demonstrations {
            input.push_str(&format!("Sentence: {}\nFrames: {}\n\n", demo.sentence.trim(), json_list(&demo.frames)));
        }
    }
    input.push_str(&format!("Sentence: {}\n\nCandidate frames:\n", sentence.trim()));
    for (i, hit) in candidates.candidates.iter().enumerate() {
        let frame = lex.get(&hit.frame_label).ok_or_else(|| Error::UnknownLabel {
            label: hit.frame_label.clone(),
            context: Some("candidate frame".into()),
        })?;
        write_candidate(&mut input, i + 1, frame, cfg.max_candidate_detail);
    }
    let input = input.trim_end().to_string();

    let prompt = IdentificationPrompt {
        instruction,
        input,
        expected_output_schema: OUTPUT_SCHEMA.to_string(),
    };
    if let Some(budget) = cfg.token_budget {
        let estimated = estimate_tokens(&prompt.render());
        if estimated > budget {
            return Err(Error::BudgetExceeded { estimated, budget });
        }
    }
    Ok(prompt)
}

/// Frame-element span labelling prompt for one frame.
pub fn build_fsrl_prompt(sentence: &str, frame: &Frame) -> IdentificationPrompt {
    let instruction = format!(
        "The sentence evokes the frame \"{}\". For each frame element listed below, \
give the exact text span of the sentence that fills it, or null if the sentence does not express it.",
        frame.label
    );
    let mut input = format!(
        "Sentence: {}\n\nFrame: {}\nDescription: {}\nFrame elements:",
        sentence.trim(),
        frame.label,
        frame.description.trim()
    );
    if frame.frame_elements.is_empty() {
        input.push_str(" (no frame elements)");
    }
    for fe in &frame.frame_elements {
        let def = first_sentence(&fe.definition);
        if def.is_empty() {
            input.push_str(&format!("\n- {}", fe.name));
        } else {
            input.push_str(&format!("\n- {}: {def}", fe.name));
        }
    }
    IdentificationPrompt {
        instruction,
        input,
        expected_output_schema: "a JSON object mapping each frame element name to its text span or null".into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FineTuneRecord {
    pub instruction: String,
    pub input: String,
    pub output: String,
}

pub fn fine_tune_record(prompt: &IdentificationPrompt, gold: &BTreeSet<String>) -> FineTuneRecord {
    FineTuneRecord {
        instruction: format!("{}\nOutput format: {}", prompt.instruction, prompt.expected_output_schema),
        input: prompt.input.clone(),
        output: json_list(gold),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationPolicy {
    /// Any lexicon frame is accepted.
    #[default]
    Open,
    /// Only candidate frames are accepted.
    Strict,
}

impl FromStr for ValidationPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "open" => Ok(Self::Open),
            "strict" => Ok(Self::Strict),
            other => Err(Error::InvalidArgument(format!("unknown validation policy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    UnknownLabel,
    NotACandidate,
    Unparseable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub token: String,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IdentificationResult {
    pub frames: BTreeSet<String>,
    pub from_candidates: BTreeSet<String>,
    pub completed: BTreeSet<String>,
    pub rejected: Vec<Rejection>,
}

fn strip_code_fence(text: &str) -> &str {
    let t = text.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    let body = rest.split_once('\n').map_or("", |(_, b)| b);
    body.trim_end().strip_suffix("```").unwrap_or(body).trim()
}

fn clean_token(raw: &str) -> String {
    let mut t = raw.trim();
    t = t.trim_start_matches(['-', '*', '•']).trim_start();
    if let Some((num, rest)) = t.split_once(['.', ')']) {
        if !num.is_empty() && num.chars().all(|c| c.is_ascii_digit()) {
            t = rest.trim_start();
        }
    }
    t.trim_end_matches([',', ';'])
        .trim()
        .trim_matches(['"', '\'', '`'])
        .trim()
        .to_string()
}

/// Label tokens in model output, or `None` when nothing list-like is found.
fn extract_tokens(raw: &str) -> Option<Vec<String>> {
    let text = strip_code_fence(raw);
    if text.is_empty() {
        return None;
    }
    if let Some(open) = text.find('[') {
        let close = open + text[open..].rfind(']')?;
        let inner = &text[open..=close];
        if let Ok(list) = serde_json::from_str::<Vec<String>>(inner) {
            return Some(list.into_iter().map(|s| s.trim().to_string()).collect());
        }
        let tokens = inner[1..inner.len() - 1]
            .split([',', '\n'])
            .map(clean_token)
            .filter(|t| !t.is_empty())
            .collect();
        return Some(tokens);
    }
    let tokens: Vec<String> = text.lines().map(clean_token).filter(|t| !t.is_empty()).collect();
    (!tokens.is_empty()).then_some(tokens)
}

/// [`parse_frame_list_with`] under the open policy.
pub fn parse_frame_list(raw: &str, lex: &FrameLexicon, candidates: &CandidateSet) -> IdentificationResult {
    parse_frame_list_with(raw, lex, candidates, ValidationPolicy::Open)
}

/// Extracts labels from a bracketed list or line-delimited output and sorts
/// each into candidates, completions or rejections. Never fails: output
/// without any list yields no frames and one `Unparseable` rejection.
pub fn parse_frame_list_with(
    raw: &str,
    lex: &FrameLexicon,
    candidates: &CandidateSet,
    policy: ValidationPolicy,
) -> IdentificationResult {
    let mut result = IdentificationResult::default();
    let Some(tokens) = extract_tokens(raw) else {
        result.rejected.push(Rejection {
            token: raw.to_string(),
            reason: RejectReason::Unparseable,
        });
        return result;
    };
    let mut seen = BTreeSet::new();
    for token in tokens {
        if !seen.insert(token.clone()) {
            continue;
        }
        let reason = if !lex.contains(&token) {
            Some(RejectReason::UnknownLabel)
        } else if candidates.contains(&token) {
            result.from_candidates.insert(token.clone());
            None
        } else if policy == ValidationPolicy::Open {
            result.completed.insert(token.clone());
            None
        } else {
            Some(RejectReason::NotACandidate)
        };
        match reason {
            Some(reason) => result.rejected.push(Rejection { token, reason }),
            None => {
                result.frames.insert(token);
            }
        }
    }
    result
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: "user".into(),
            content: content.into(),
        }
    }
}

/// Everything a provider sees. `sentence` and `candidate_labels` are carried
/// alongside the messages so offline mocks need not parse prompt text.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub sentence: String,
    pub candidate_labels: Vec<String>,
}

pub trait ChatProvider: Send + Sync {
    fn name(&self) -> String;
    fn complete(&self, request: &ChatRequest) -> Result<String>;
}

fn default_max_output_tokens() -> u32 {
    256
}

fn default_chat_timeout() -> u64 {
    60
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatProviderConfig {
    pub endpoint: String,
    pub model_name: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_output_tokens")]
    pub max_output_tokens: u32,
    #[serde(default = "default_chat_timeout")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub retry: RetryPolicy,
}

impl ChatProviderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.endpoint.trim().is_empty() {
            return Err(Error::InvalidArgument("chat endpoint is empty".into()));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(Error::InvalidArgument(format!("temperature {} must be >= 0", self.temperature)));
        }
        if self.max_output_tokens == 0 {
            return Err(Error::InvalidArgument("max_output_tokens must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct ChatBody<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatReply,
}

#[derive(Deserialize)]
struct ChatReply {
    content: Option<String>,
}

pub struct HttpChatProvider {
    config: ChatProviderConfig,
    client: JsonClient,
}

impl HttpChatProvider {
    pub fn new(config: ChatProviderConfig) -> Result<Self> {
        config.validate()?;
        let client = JsonClient::new(
            &config.endpoint,
            Duration::from_secs(config.timeout_secs),
            config.api_key_env.as_deref(),
        )?;
        Ok(Self { config, client })
    }
}

impl ChatProvider for HttpChatProvider {
    fn name(&self) -> String {
        format!("http;endpoint={};model={}", self.config.endpoint, self.config.model_name)
    }

    fn complete(&self, request: &ChatRequest) -> Result<String> {
        let body = ChatBody {
            model: &self.config.model_name,
            messages: &request.messages,
            temperature: self.config.temperature,
            max_tokens: self.config.max_output_tokens,
        };
        let resp: ChatResponse = self.config.retry.run("chat completion", || self.client.post(&body))?;
        resp.choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| Error::ProviderResponse("response has no choices[0].message.content".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MockPolicy {
    /// Returns the candidate labels verbatim.
    EchoCandidates,
    /// Returns candidates ∩ gold.
    Oracle,
    /// Returns the gold frames regardless of candidates.
    Gold,
    /// Returns gold ∪ {[`MOCK_UNKNOWN_LABEL`]}.
    GoldPlusUnknown,
    /// Returns an empty list.
    Empty,
}

impl FromStr for MockPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "echo" | "echo-candidates" => Ok(Self::EchoCandidates),
            "oracle" => Ok(Self::Oracle),
            "gold" => Ok(Self::Gold),
            "gold-plus-unknown" => Ok(Self::GoldPlusUnknown),
            "empty" => Ok(Self::Empty),
            other => Err(Error::InvalidArgument(format!("unknown mock policy {other:?}"))),
        }
    }
}

impl MockPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::EchoCandidates => "echo-candidates",
            Self::Oracle => "oracle",
            Self::Gold => "gold",
            Self::GoldPlusUnknown => "gold-plus-unknown",
            Self::Empty => "empty",
        }
    }

    pub fn needs_gold(self) -> bool {
        matches!(self, Self::Oracle | Self::Gold | Self::GoldPlusUnknown)
    }
}

/// Offline provider answering from the request and, for gold-based policies,
/// a sentence → gold-frames table keyed by trimmed sentence.
pub struct MockChatProvider {
    policy: MockPolicy,
    gold: HashMap<String, BTreeSet<String>>,
}

impl MockChatProvider {
    pub fn new(policy: MockPolicy) -> Self {
        Self {
            policy,
            gold: HashMap::new(),
        }
    }

    pub fn with_gold(policy: MockPolicy, examples: &[GroupedExample]) -> Self {
        let gold = examples
            .iter()
            .map(|e| (e.sentence.trim().to_string(), e.gold_frames.clone()))
            .collect();
        Self { policy, gold }
    }

    fn gold_for(&self, sentence: &str) -> Result<&BTreeSet<String>> {
        self.gold
            .get(sentence.trim())
            .ok_or_else(|| Error::ProviderResponse(format!("mock has no gold frames for sentence {sentence:?}")))
    }
}

impl ChatProvider for MockChatProvider {
    fn name(&self) -> String {
        format!("mock:{}", self.policy.as_str())
    }

    fn complete(&self, request: &ChatRequest) -> Result<String> {
        let labels: Vec<String> = match self.policy {
            MockPolicy::EchoCandidates => request.candidate_labels.clone(),
            MockPolicy::Empty => Vec::new(),
            MockPolicy::Oracle => {
                let gold = self.gold_for(&request.sentence)?;
                request.candidate_labels.iter().filter(|l| gold.contains(*l)).cloned().collect()
            }
            MockPolicy::Gold => self.gold_for(&request.sentence)?.iter().cloned().collect(),
            MockPolicy::GoldPlusUnknown => {
                let mut v: Vec<String> = self.gold_for(&request.sentence)?.iter().cloned().collect();
                v.push(MOCK_UNKNOWN_LABEL.to_string());
                v
            }
        };
        Ok(json_list(&labels))
    }
}

/// One prompt/response pair, as written to the audit log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatExchange {
    pub provider: String,
    pub prompt_version: &'static str,
    pub request: ChatRequest,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentificationOutcome {
    pub candidates: CandidateSet,
    pub exchange: ChatExchange,
    pub result: IdentificationResult,
}

/// JSONL audit log of chat exchanges.
pub struct AuditLog {
    path: PathBuf,
    out: Mutex<BufWriter<File>>,
}

impl AuditLog {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            out: Mutex::new(BufWriter::new(file)),
        })
    }

    pub fn record(&self, exchange: &ChatExchange) -> Result<()> {
        let mut out = self.out.lock().unwrap_or_else(|p| p.into_inner());
        crate::jsonl::write_record(&mut *out, exchange)
            .and_then(|()| out.flush())
            .map_err(|e| Error::io(&self.path, e))
    }
}

/// Retrieval, prompting, chat and parsing wired together.
pub struct Identifier<'a> {
    pub lexicon: &'a FrameLexicon,
    pub index: &'a VectorIndex,
    pub embedder: &'a dyn Embedder,
    pub chat: &'a dyn ChatProvider,
    pub prompt: PromptConfig,
    pub k: usize,
    pub policy: ValidationPolicy,
    pub workers: usize,
    pub audit: Option<&'a AuditLog>,
}

impl<'a> Identifier<'a> {
    pub fn new(
        lexicon: &'a FrameLexicon,
        index: &'a VectorIndex,
        embedder: &'a dyn Embedder,
        chat: &'a dyn ChatProvider,
    ) -> Self {
        Self {
            lexicon,
            index,
            embedder,
            chat,
            prompt: PromptConfig::default(),
            k: DEFAULT_K,
            policy: ValidationPolicy::Open,
            workers: DEFAULT_WORKERS,
            audit: None,
        }
    }

    fn complete_one(&self, candidates: CandidateSet, gold_count: Option<usize>) -> Result<IdentificationOutcome> {
        let prompt =
            build_identification_prompt(&candidates.sentence, &candidates, self.lexicon, &self.prompt, gold_count)?;
        let request = ChatRequest {
            messages: prompt.to_messages(self.prompt.mode),
            sentence: candidates.sentence.clone(),
            candidate_labels: candidates.labels().map(str::to_string).collect(),
        };
        let response = self.chat.complete(&request)?;
        let result = parse_frame_list_with(&response, self.lexicon, &candidates, self.policy);
        Ok(IdentificationOutcome {
            candidates,
            exchange: ChatExchange {
                provider: self.chat.name(),
                prompt_version: PROMPT_TEMPLATE_VERSION,
                request,
                response,
            },
            result,
        })
    }

    pub fn identify(&self, sentence: &str, gold_count: Option<usize>) -> Result<IdentificationOutcome> {
        Ok(self.identify_batch(&[(sentence.to_string(), gold_count)])?.remove(0))
    }

    /// Identifies frames for each `(sentence, gold_count)`. Chat calls fan out
    /// over at most `workers` threads; results and audit lines keep input order.
    pub fn identify_batch(&self, items: &[(String, Option<usize>)]) -> Result<Vec<IdentificationOutcome>> {
        if items.is_empty() {
            return Ok(Vec::new());
        }
        let sentences: Vec<String> = items.iter().map(|(s, _)| s.clone()).collect();
        let candidate_sets = retrieve_batch(&sentences, self.index, self.embedder, self.k)?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
        let outcomes: Vec<IdentificationOutcome> = pool.install(|| {
            use rayon::prelude::*;
            candidate_sets
                .into_par_iter()
                .zip(items.par_iter())
                .map(|(cands, (_, gold_count))| self.complete_one(cands, *gold_count))
                .collect::<Result<_>>()
        })?;
        if let Some(log) = self.audit {
            for o in &outcomes {
                log.record(&o.exchange)?;
            }
        }
        Ok(outcomes)
    }
}

/// Single-sentence convenience over [`Identifier`].
pub fn identify_frames(
    sentence: &str,
    index: &VectorIndex,
    embedder: &dyn Embedder,
    chat: &dyn ChatProvider,
    cfg: &PromptConfig,
    lex: &FrameLexicon,
) -> Result<IdentificationResult> {
    let mut identifier = Identifier::new(lex, index, embedder, chat);
    identifier.prompt = cfg.clone();
    Ok(identifier.identify(sentence, None)?.result)
}

/// How often the prediction recovers gold frames that retrieval missed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompletionStats {
    /// Examples whose candidate set lacks at least one gold frame.
    pub incomplete_examples: usize,
    /// Of those, examples where at least one missing gold frame was predicted.
    pub recovered_examples: usize,
    pub recovery_rate: f64,
}

pub fn completion_stats(outcomes: &[IdentificationOutcome], gold: &[GroupedExample]) -> Result<CompletionStats> {
    if outcomes.len() != gold.len() {
        return Err(Error::InvalidArgument(format!(
            "{} outcomes but {} gold examples",
            outcomes.len(),
            gold.len()
        )));
    }
    let (mut incomplete, mut recovered) = (0, 0);
    for (o, g) in outcomes.iter().zip(gold) {
        let missing: Vec<&String> = g.gold_frames.iter().filter(|f| !o.candidates.contains(f)).collect();
        if missing.is_empty() {
            continue;
        }
        incomplete += 1;
        if missing.iter().any(|f| o.result.completed.contains(*f)) {
            recovered += 1;
        }
    }
    Ok(CompletionStats {
        incomplete_examples: incomplete,
        recovered_examples: recovered,
        recovery_rate: if incomplete == 0 { 0.0 } else { recovered as f64 / incomplete as f64 },
    })
}
