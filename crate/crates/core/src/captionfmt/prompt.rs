//! Instruction prompts for the text-only LLM stages: paraphrasing a
//! template caption into a full-song description, and pseudo-labelling
//! annotated songs from genre, tempo and segment boundaries.

use std::fmt;

use thiserror::Error;

use super::format_percent;
use crate::interval::TimeInterval;
use crate::sampler::TemplatedCaption;

pub const CONTEXT_INSTRUCTION: &str = "This is a music analysis of a song. Note that the numbers indicate the time-boundaries of functional segments in this song.";
pub const PARAPHRASE_INSTRUCTION: &str = "Paraphrase the music analysis to make it sound like a coherent song, instead of a remix. Additionally, remove any mention of sound quality.";
pub const GLOBAL_CAPTION_INSTRUCTION: &str =
    "Start with a general description of the song focusing on subjectivity.";
pub const MUSICAL_CHANGE_INSTRUCTION: &str =
    "Describe the song in detail and explain transitions between parts of the song.";
pub const MUSIC_STRUCTURE_INSTRUCTION: &str = "Remember to indicate the temporal annotations and music structures when talking about a specific part of the song.";

const PSEUDOLABEL_DESCRIBE: &str = "Describe the music in general, in terms of mood, theme, tempo, melody, instruments, and chord progression. Then provide a detailed music analysis by describing each functional segment and its time boundary. Please note that the music boundaries are";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PromptError {
    #[error("genre must be non-empty")]
    EmptyGenre,
    #[error("bpm must be positive and finite, got {0}")]
    BadBpm(f64),
    #[error("no segments given")]
    NoSegments,
    #[error("segment {0} has an empty label")]
    EmptyLabel(usize),
    #[error("segments {first} and {second} overlap")]
    Overlap { first: usize, second: usize },
}

/// A fully rendered prompt.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PromptText(String);

impl PromptText {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl fmt::Display for PromptText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for PromptText {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// `(start%, end%, caption)` as it appears in the context block.
pub(crate) fn format_triple(start: f64, end: f64, caption: &str) -> String {
    format!(
        "({}, {}, {})",
        format_percent(start),
        format_percent(end),
        caption.trim()
    )
}

/// The five-part paraphrase instruction with the template interpolated into
/// the context block.
pub fn render_paraphrase_prompt(t: &TemplatedCaption) -> PromptText {
    let analysis: Vec<String> = t
        .entries()
        .iter()
        .map(|e| format_triple(e.start, e.end, &e.caption))
        .collect();
    PromptText(format!(
        "Context: Music Analysis {{{analysis}}}. {CONTEXT_INSTRUCTION}\n\
         Paraphrase: {PARAPHRASE_INSTRUCTION}\n\
         Global Caption: {GLOBAL_CAPTION_INSTRUCTION}\n\
         Musical Change: {MUSICAL_CHANGE_INSTRUCTION}\n\
         Music Structure: {MUSIC_STRUCTURE_INSTRUCTION}",
        analysis = analysis.join(", ")
    ))
}

fn format_bpm(bpm: f64) -> String {
    if bpm.fract() == 0.0 && bpm < 1e15 {
        format!("{bpm:.0}")
    } else {
        format!("{bpm}")
    }
}

/// The annotation-conditioned captioning prompt. Segments are listed in
/// start order as `[S%-E%] label`.
pub fn render_pseudolabel_prompt(
    genre: &str,
    bpm: f64,
    segments: &[(TimeInterval, String)],
) -> Result<PromptText, PromptError> {
    let genre = genre.trim();
    if genre.is_empty() {
        return Err(PromptError::EmptyGenre);
    }
    if !(bpm.is_finite() && bpm > 0.0) {
        return Err(PromptError::BadBpm(bpm));
    }
    if segments.is_empty() {
        return Err(PromptError::NoSegments);
    }
    if let Some(i) = segments.iter().position(|(_, l)| l.trim().is_empty()) {
        return Err(PromptError::EmptyLabel(i));
    }
    let mut order: Vec<usize> = (0..segments.len()).collect();
    order.sort_by(|&a, &b| {
        let (ia, ib) = (&segments[a].0, &segments[b].0);
        ia.start()
            .total_cmp(&ib.start())
            .then(ia.end().total_cmp(&ib.end()))
    });
    for pair in order.windows(2) {
        if segments[pair[0]].0.overlaps(&segments[pair[1]].0) {
            let (first, second) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            return Err(PromptError::Overlap { first, second });
        }
    }
    let listed: Vec<String> = order
        .iter()
        .map(|&i| {
            let (iv, label) = &segments[i];
            format!(
                "[{}-{}] {}",
                format_percent(iv.start()),
                format_percent(iv.end()),
                label.trim()
            )
        })
        .collect();
    Ok(PromptText(format!(
        "This is a {genre} music of {bpm} beat-per-minute (BPM). {PSEUDOLABEL_DESCRIBE} {segments}.",
        bpm = format_bpm(bpm),
        segments = listed.join(", ")
    )))
}
