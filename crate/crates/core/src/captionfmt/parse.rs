use std::fmt;

use thiserror::Error;

use super::{is_tag, ChangeEntry, SegmentEntry, SegmentedCaption};
use crate::interval::TimeInterval;

/// 100% expressed in the parser's fixed-point unit (1e-4 percent).
const FULL_UNITS: u64 = 1_000_000;
const MAX_FRACTION_DIGITS: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    EmptyInput,
    NoSegments,
    MalformedBoundary(String),
    EndNotAfterStart,
    Overlap,
    OutOfOrder,
    EmptySegmentText,
    MalformedChange(String),
    ChangeIndexOutOfRange { number: usize, segments: usize },
    UnexpectedLine,
    StrayCarriageReturn,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmptyInput => write!(f, "empty input"),
            Self::NoSegments => write!(f, "no segment lines"),
            Self::MalformedBoundary(m) => write!(f, "malformed boundary marker: {m}"),
            Self::EndNotAfterStart => write!(f, "segment end is not after its start"),
            Self::Overlap => write!(f, "segment overlaps the previous segment"),
            Self::OutOfOrder => write!(f, "segment starts before the previous segment"),
            Self::EmptySegmentText => write!(f, "empty segment text"),
            Self::MalformedChange(m) => write!(f, "malformed change line: {m}"),
            Self::ChangeIndexOutOfRange { number, segments } => write!(
                f,
                "change after segment {number} needs at least {} segments, found {segments}",
                number + 1
            ),
            Self::UnexpectedLine => write!(f, "expected a segment line or a change line"),
            Self::StrayCarriageReturn => write!(f, "carriage return inside a line"),
        }
    }
}

/// A caption parse failure; `line` and `column` are 1-based and count
/// characters.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

fn err(line: usize, column: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { line, column, kind }
}

/// Column (1-based, in chars) of byte offset `offset` within `line`.
fn column_of(line: &str, offset: usize) -> usize {
    line[..offset].chars().count() + 1
}

/// Parses `12`, `12.5`, `12.3456` (percent, no sign) into 1e-4 percent units.
fn parse_percent(s: &str) -> Result<u64, String> {
    let (int_part, frac_part) = match s.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (s, None),
    };
    if int_part.is_empty() || !int_part.bytes().all(|b| b.is_ascii_digit()) {
        return Err(format!("expected a percentage, found {s:?}"));
    }
    if int_part.len() > 3 {
        return Err(format!("percentage {s:?} exceeds 100"));
    }
    let mut units: u64 = int_part.parse::<u64>().expect("digits") * 10_000;
    if let Some(frac) = frac_part {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("expected fractional digits in {s:?}"));
        }
        if frac.len() > MAX_FRACTION_DIGITS {
            return Err(format!(
                "{s:?} has more than {MAX_FRACTION_DIGITS} fractional digits"
            ));
        }
        let padded = format!("{frac:0<4}");
        units += padded.parse::<u64>().expect("digits");
    }
    if units > FULL_UNITS {
        return Err(format!("percentage {s:?} exceeds 100"));
    }
    Ok(units)
}

struct Marker {
    start: u64,
    end: u64,
    /// Byte offset just past `]`.
    after: usize,
}

/// Parses `[S%-E%]` at the start of `rest` (which begins at byte `base` of
/// `line`).
fn parse_marker(line: &str, base: usize, line_no: usize) -> Result<Marker, ParseError> {
    let rest = &line[base..];
    let malformed = |offset: usize, m: String| {
        err(
            line_no,
            column_of(line, base + offset),
            ParseErrorKind::MalformedBoundary(m),
        )
    };
    let close = rest
        .find(']')
        .ok_or_else(|| malformed(0, "missing ']'".into()))?;
    let inner = &rest[1..close];
    let (left, right) = inner
        .split_once('-')
        .ok_or_else(|| malformed(1, "expected 'S%-E%'".into()))?;
    let left_num = left
        .strip_suffix('%')
        .ok_or_else(|| malformed(1, "start must end with '%'".into()))?;
    let right_num = right
        .strip_suffix('%')
        .ok_or_else(|| malformed(2 + left.len(), "end must end with '%'".into()))?;
    let start = parse_percent(left_num).map_err(|m| malformed(1, m))?;
    let end = parse_percent(right_num).map_err(|m| malformed(2 + left.len(), m))?;
    Ok(Marker {
        start,
        end,
        after: base + close + 1,
    })
}

fn units_to_fraction(units: u64) -> f64 {
    units as f64 / FULL_UNITS as f64
}

/// Parses the segmented caption text format (see the module docs).
pub fn parse_caption(input: &str) -> Result<SegmentedCaption, ParseError> {
    if input.trim().is_empty() {
        return Err(err(1, 1, ParseErrorKind::EmptyInput));
    }
    let lines: Vec<&str> = input
        .split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .collect();
    for (idx, line) in lines.iter().enumerate() {
        if let Some(offset) = line.find('\r') {
            return Err(err(
                idx + 1,
                column_of(line, offset),
                ParseErrorKind::StrayCarriageReturn,
            ));
        }
    }

    let first_segment = lines.iter().position(|l| l.trim_start().starts_with('['));
    let Some(first_segment) = first_segment else {
        return Err(err(lines.len(), 1, ParseErrorKind::NoSegments));
    };
    let global = lines[..first_segment].join("\n").trim().to_string();

    let mut segments: Vec<SegmentEntry> = Vec::new();
    let mut prev_units: Option<(u64, u64)> = None;
    let mut changes: Vec<(usize, ChangeEntry)> = Vec::new();

    for (idx, line) in lines.iter().enumerate().skip(first_segment) {
        let line_no = idx + 1;
        let indent = line.len() - line.trim_start().len();
        let body = &line[indent..];
        if body.trim().is_empty() {
            continue;
        }
        if body.starts_with('[') {
            let marker = parse_marker(line, indent, line_no)?;
            let marker_col = column_of(line, indent);
            if marker.end <= marker.start {
                return Err(err(line_no, marker_col, ParseErrorKind::EndNotAfterStart));
            }
            if let Some((prev_start, prev_end)) = prev_units {
                if marker.start < prev_end {
                    let kind = if marker.end <= prev_start {
                        ParseErrorKind::OutOfOrder
                    } else {
                        ParseErrorKind::Overlap
                    };
                    return Err(err(line_no, marker_col, kind));
                }
            }
            prev_units = Some((marker.start, marker.end));

            let after = &line[marker.after..];
            let text_offset = marker.after + (after.len() - after.trim_start().len());
            let content = after.trim();
            if content.is_empty() {
                return Err(err(
                    line_no,
                    column_of(line, marker.after),
                    ParseErrorKind::EmptySegmentText,
                ));
            }
            if !after.starts_with(char::is_whitespace) {
                return Err(err(
                    line_no,
                    column_of(line, marker.after),
                    ParseErrorKind::MalformedBoundary("expected whitespace after ']'".into()),
                ));
            }
            let (tag, text) = split_tag(content);
            if text.is_empty() {
                return Err(err(
                    line_no,
                    column_of(line, text_offset),
                    ParseErrorKind::EmptySegmentText,
                ));
            }
            let interval = TimeInterval::new(
                units_to_fraction(marker.start),
                units_to_fraction(marker.end),
            )
            .expect("marker bounds checked");
            segments.push(SegmentEntry {
                interval,
                tag: tag.map(String::from),
                text: text.to_string(),
            });
        } else if let Some(rest) = body.strip_prefix("->") {
            let change = parse_change(line, indent + 2, rest, line_no)?;
            changes.push((line_no, change));
        } else {
            return Err(err(line_no, indent + 1, ParseErrorKind::UnexpectedLine));
        }
    }

    for (line_no, change) in &changes {
        if change.after_segment + 1 >= segments.len() {
            return Err(err(
                *line_no,
                1,
                ParseErrorKind::ChangeIndexOutOfRange {
                    number: change.after_segment + 1,
                    segments: segments.len(),
                },
            ));
        }
    }

    let changes = changes.into_iter().map(|(_, c)| c).collect();
    Ok(SegmentedCaption::new(global, segments, changes)
        .expect("parser enforces every caption invariant"))
}

/// Splits `tag: text`, honoring the leading-`:` escape for untagged text.
fn split_tag(content: &str) -> (Option<&str>, &str) {
    if let Some(rest) = content.strip_prefix(':') {
        return (None, rest.trim_start());
    }
    if let Some((head, rest)) = content.split_once(':') {
        if is_tag(head) && rest.starts_with(char::is_whitespace) {
            return (Some(head), rest.trim());
        }
    }
    (None, content)
}

fn parse_change(
    line: &str,
    base: usize,
    rest: &str,
    line_no: usize,
) -> Result<ChangeEntry, ParseError> {
    let malformed = |offset: usize, m: &str| {
        err(
            line_no,
            column_of(line, base + offset),
            ParseErrorKind::MalformedChange(m.to_string()),
        )
    };
    if !rest.starts_with(char::is_whitespace) {
        return Err(malformed(0, "expected whitespace after '->'"));
    }
    let lead = rest.len() - rest.trim_start().len();
    let body = &rest[lead..];
    let digits = body.bytes().take_while(u8::is_ascii_digit).count();
    if digits == 0 {
        return Err(malformed(lead, "expected a segment index"));
    }
    let index: usize = body[..digits]
        .parse()
        .map_err(|_| malformed(lead, "segment index too large"))?;
    let after_index = &body[digits..];
    let Some(text) = after_index.strip_prefix(':') else {
        return Err(malformed(
            lead + digits,
            "expected ':' after the segment index",
        ));
    };
    let text = text.trim();
    if text.is_empty() {
        return Err(malformed(lead + digits + 1, "empty change text"));
    }
    if index == 0 {
        return Err(malformed(lead, "segment numbers start at 1"));
    }
    Ok(ChangeEntry {
        after_segment: index - 1,
        text: text.to_string(),
    })
}
