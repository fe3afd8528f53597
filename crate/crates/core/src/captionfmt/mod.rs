//! Time-segmented caption text format.
//!
//! ```text
//! An upbeat pop song with bright synths.
//! [0.0%-18.5%] intro: filtered synth pad
//! [18.5%-52.0%] verse: vocals enter over a four-on-the-floor beat
//! [52.0%-100.0%] chorus: full band, layered harmonies
//! -> 1: the kick drum enters
//! -> 2: the energy lifts into the chorus
//! ```
//!
//! * Global caption: every line before the first segment line (a line whose
//!   first non-blank character is `[`), trimmed. May be empty.
//! * Segment line: `[S%-E%] [tag:] text`. Percentages accept up to four
//!   fractional digits and are written back with exactly one. A tag is one
//!   word of ASCII letters, digits, `_` or `-` starting with a letter,
//!   followed by `:` and whitespace. Untagged text that would read as a tag
//!   (or that starts with `:`) is written with a leading `: ` escape.
//! * Change line: `-> i: text`, the transition after segment `i`, counting
//!   segments from 1 (so `-> 1` sits between the first and second segment).
//!   [`ChangeEntry::after_segment`] holds the same position 0-based.
//! * Segments must be sorted and must not overlap. Blank lines after the
//!   global caption are ignored. Canonical output uses LF and has no
//!   trailing newline.

mod parse;
mod prompt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interval::TimeInterval;
use crate::sampler::TemplatedCaption;

pub use parse::{parse_caption, ParseError, ParseErrorKind};
pub use prompt::{
    render_paraphrase_prompt, render_pseudolabel_prompt, PromptError, PromptText,
    CONTEXT_INSTRUCTION, GLOBAL_CAPTION_INSTRUCTION, MUSICAL_CHANGE_INSTRUCTION,
    MUSIC_STRUCTURE_INSTRUCTION, PARAPHRASE_INSTRUCTION,
};

/// Conventional function tags. Any tag matching the tag syntax is accepted.
pub const CONVENTIONAL_TAGS: [&str; 6] = [
    "intro",
    "verse",
    "chorus",
    "bridge",
    "outro",
    "instrumental",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CaptionError {
    #[error("caption has no segments")]
    NoSegments,
    #[error("segment {index}: {message}")]
    BadSegment { index: usize, message: String },
    #[error("segments {first} and {second} overlap or are out of order")]
    Overlap { first: usize, second: usize },
    #[error("change {index}: {message}")]
    BadChange { index: usize, message: String },
    #[error("global caption: {0}")]
    BadGlobal(String),
    #[error(transparent)]
    Interval(#[from] crate::interval::IntervalError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentEntry {
    pub interval: TimeInterval,
    pub tag: Option<String>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeEntry {
    #[serde(rename = "after")]
    pub after_segment: usize,
    pub text: String,
}

/// A global caption plus time-bounded segment descriptions and the
/// musical changes between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CaptionJson", into = "CaptionJson")]
pub struct SegmentedCaption {
    global: String,
    segments: Vec<SegmentEntry>,
    changes: Vec<ChangeEntry>,
}

pub(crate) fn is_tag(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

fn check_line_text(text: &str) -> Result<(), String> {
    if text.is_empty() {
        return Err("empty text".into());
    }
    if text.trim() != text {
        return Err("text has leading or trailing whitespace".into());
    }
    if text.contains(['\n', '\r']) {
        return Err("text spans several lines".into());
    }
    Ok(())
}

impl SegmentedCaption {
    pub fn new(
        global: impl Into<String>,
        segments: Vec<SegmentEntry>,
        changes: Vec<ChangeEntry>,
    ) -> Result<Self, CaptionError> {
        let global = global.into();
        if global.trim() != global {
            return Err(CaptionError::BadGlobal(
                "leading or trailing whitespace".into(),
            ));
        }
        if global.contains('\r') {
            return Err(CaptionError::BadGlobal("carriage return".into()));
        }
        if global.lines().any(|l| l.trim_start().starts_with('[')) {
            return Err(CaptionError::BadGlobal(
                "a line starts with '[' and would read as a segment".into(),
            ));
        }
        if segments.is_empty() {
            return Err(CaptionError::NoSegments);
        }
        for (index, seg) in segments.iter().enumerate() {
            check_line_text(&seg.text)
                .map_err(|message| CaptionError::BadSegment { index, message })?;
            if let Some(tag) = &seg.tag {
                if !is_tag(tag) {
                    return Err(CaptionError::BadSegment {
                        index,
                        message: format!("invalid tag {tag:?}"),
                    });
                }
            }
        }
        for (i, pair) in segments.windows(2).enumerate() {
            if pair[0].interval.end() > pair[1].interval.start() {
                return Err(CaptionError::Overlap {
                    first: i,
                    second: i + 1,
                });
            }
        }
        for (index, change) in changes.iter().enumerate() {
            check_line_text(&change.text)
                .map_err(|message| CaptionError::BadChange { index, message })?;
            if change.after_segment + 1 >= segments.len() {
                return Err(CaptionError::BadChange {
                    index,
                    message: format!(
                        "refers to the transition after segment {} (counting from 1) but there are {} segments",
                        change.after_segment + 1,
                        segments.len()
                    ),
                });
            }
        }
        Ok(Self {
            global,
            segments,
            changes,
        })
    }

    pub fn global(&self) -> &str {
        &self.global
    }

    pub fn segments(&self) -> &[SegmentEntry] {
        &self.segments
    }

    pub fn changes(&self) -> &[ChangeEntry] {
        &self.changes
    }

    /// Global caption, segment descriptions (with tags) and change notes as
    /// one space-joined string, without boundary markers.
    pub fn complete_text(&self) -> String {
        let mut parts: Vec<String> = Vec::new();
        if !self.global.is_empty() {
            parts.push(self.global.clone());
        }
        for s in &self.segments {
            match &s.tag {
                Some(tag) => parts.push(format!("{tag}: {}", s.text)),
                None => parts.push(s.text.clone()),
            }
        }
        parts.extend(self.changes.iter().map(|c| c.text.clone()));
        parts.join(" ")
    }
}

/// Percentage with exactly one fractional digit, e.g. `0.3 -> "30.0%"`.
pub fn format_percent(fraction: f64) -> String {
    let permille = (fraction * 1000.0).round() as i64;
    format!("{}.{}%", permille / 10, permille % 10)
}

fn needs_escape(text: &str) -> bool {
    if text.starts_with(':') {
        return true;
    }
    match text.split_once(':') {
        Some((head, rest)) => is_tag(head) && rest.starts_with(char::is_whitespace),
        None => false,
    }
}

/// Canonical text form. Boundaries are rounded to 0.1%.
pub fn serialize_caption(cap: &SegmentedCaption) -> String {
    let mut lines: Vec<String> = Vec::with_capacity(1 + cap.segments.len() + cap.changes.len());
    if !cap.global.is_empty() {
        lines.push(cap.global.clone());
    }
    for s in &cap.segments {
        let marker = format!(
            "[{}-{}]",
            format_percent(s.interval.start()),
            format_percent(s.interval.end())
        );
        let line = match &s.tag {
            Some(tag) => format!("{marker} {tag}: {}", s.text),
            None if needs_escape(&s.text) => format!("{marker} : {}", s.text),
            None => format!("{marker} {}", s.text),
        };
        lines.push(line);
    }
    for c in &cap.changes {
        lines.push(format!("-> {}: {}", c.after_segment + 1, c.text));
    }
    lines.join("\n")
}

/// Maps template entries to untagged segments; internal whitespace in
/// captions is collapsed to single spaces.
pub fn templated_to_caption(t: &TemplatedCaption) -> Result<SegmentedCaption, CaptionError> {
    let segments = t
        .entries()
        .iter()
        .map(|e| {
            Ok(SegmentEntry {
                interval: TimeInterval::new(e.start, e.end)?,
                tag: None,
                text: e.caption.split_whitespace().collect::<Vec<_>>().join(" "),
            })
        })
        .collect::<Result<Vec<_>, CaptionError>>()?;
    SegmentedCaption::new(String::new(), segments, Vec::new())
}

#[derive(Serialize, Deserialize)]
struct SegmentJson {
    start: f64,
    end: f64,
    #[serde(default)]
    tag: Option<String>,
    text: String,
}

#[derive(Serialize, Deserialize)]
struct CaptionJson {
    #[serde(default)]
    global: String,
    segments: Vec<SegmentJson>,
    #[serde(default)]
    changes: Vec<ChangeEntry>,
}

impl TryFrom<CaptionJson> for SegmentedCaption {
    type Error = CaptionError;

    fn try_from(raw: CaptionJson) -> Result<Self, Self::Error> {
        let segments = raw
            .segments
            .into_iter()
            .map(|s| {
                Ok(SegmentEntry {
                    interval: TimeInterval::new(s.start, s.end)?,
                    tag: s.tag,
                    text: s.text,
                })
            })
            .collect::<Result<Vec<_>, CaptionError>>()?;
        SegmentedCaption::new(raw.global, segments, raw.changes)
    }
}

impl From<SegmentedCaption> for CaptionJson {
    fn from(c: SegmentedCaption) -> Self {
        CaptionJson {
            global: c.global,
            segments: c
                .segments
                .into_iter()
                .map(|s| SegmentJson {
                    start: s.interval.start(),
                    end: s.interval.end(),
                    tag: s.tag,
                    text: s.text,
                })
                .collect(),
            changes: c.changes,
        }
    }
}
