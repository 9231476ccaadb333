//! Axis-word tagging.
//!
//! The built-in tagger is a leftmost-longest lexicon matcher. Annotations from
//! any other sequence labeller can be brought in through the BIO codec and
//! layered over it with [`AnnotationTable`].

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::model::{AxisAnnotation, AxisType, AxisWord, Span};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TagError {
    #[error("cannot tag an empty name")]
    EmptyName,
    #[error("BIO sequence has {chars} characters but {tags} tags")]
    LengthMismatch { chars: usize, tags: usize },
    #[error("line {line}: {message}")]
    BioLine { line: usize, message: String },
}

/// Surface string → axis type. Surfaces are unique.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    entries: BTreeMap<String, AxisType>,
    max_chars: usize,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a surface. Returns the previous type if the surface was
    /// already present.
    pub fn insert(&mut self, surface: impl Into<String>, axis_type: AxisType) -> Option<AxisType> {
        let surface = surface.into();
        self.max_chars = self.max_chars.max(surface.chars().count());
        self.entries.insert(surface, axis_type)
    }

    pub fn get(&self, surface: &str) -> Option<AxisType> {
        self.entries.get(surface).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, AxisType)> {
        self.entries.iter().map(|(s, t)| (s.as_str(), *t))
    }
}

impl<S: Into<String>> FromIterator<(S, AxisType)> for Lexicon {
    fn from_iter<I: IntoIterator<Item = (S, AxisType)>>(iter: I) -> Self {
        let mut lex = Lexicon::new();
        for (s, t) in iter {
            lex.insert(s, t);
        }
        lex
    }
}

/// Anything that can segment a disease name into axis words.
pub trait Tagger: Sync {
    fn tag(&self, name: &str) -> Result<AxisAnnotation, TagError>;
}

impl Tagger for Lexicon {
    fn tag(&self, name: &str) -> Result<AxisAnnotation, TagError> {
        tag(name, self)
    }
}

/// Greedy leftmost-longest match of `name` against the lexicon.
pub fn tag(name: &str, lexicon: &Lexicon) -> Result<AxisAnnotation, TagError> {
    if name.is_empty() {
        return Err(TagError::EmptyName);
    }
    // bounds[i] is the byte offset of char i; the last entry is name.len().
    let bounds: Vec<usize> = name
        .char_indices()
        .map(|(b, _)| b)
        .chain(std::iter::once(name.len()))
        .collect();
    let n = bounds.len() - 1;
    let mut axes = Vec::new();
    let mut i = 0;
    while i < n {
        let longest = lexicon.max_chars.min(n - i);
        let hit = (1..=longest).rev().find_map(|len| {
            let surface = &name[bounds[i]..bounds[i + len]];
            lexicon.get(surface).map(|t| (len, surface, t))
        });
        match hit {
            Some((len, surface, t)) => {
                axes.push(AxisWord::new(surface, t, Span::new(i, i + len)));
                i += len;
            }
            None => i += 1,
        }
    }
    Ok(AxisAnnotation::new(name, axes).expect("lexicon matches yield valid spans"))
}

/// Precomputed annotations (e.g. imported from a BIO file), falling back to
/// another tagger for names it does not know.
pub struct AnnotationTable<T> {
    table: HashMap<String, AxisAnnotation>,
    fallback: T,
}

impl<T: Tagger> AnnotationTable<T> {
    pub fn new(annotations: impl IntoIterator<Item = AxisAnnotation>, fallback: T) -> Self {
        let table = annotations
            .into_iter()
            .map(|a| (a.name().to_string(), a))
            .collect();
        AnnotationTable { table, fallback }
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl<T: Tagger> Tagger for AnnotationTable<T> {
    fn tag(&self, name: &str) -> Result<AxisAnnotation, TagError> {
        match self.table.get(name) {
            Some(a) => Ok(a.clone()),
            None => self.fallback.tag(name),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BioTag {
    Begin(AxisType),
    Inside(AxisType),
    Outside,
}

impl fmt::Display for BioTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BioTag::Begin(t) => write!(f, "B-{}", t.token()),
            BioTag::Inside(t) => write!(f, "I-{}", t.token()),
            BioTag::Outside => f.write_str("O"),
        }
    }
}

impl FromStr for BioTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "O" {
            return Ok(BioTag::Outside);
        }
        match s.split_once('-') {
            Some(("B", t)) => t.parse().map(BioTag::Begin),
            Some(("I", t)) => t.parse().map(BioTag::Inside),
            _ => Err(format!("invalid BIO tag `{s}`")),
        }
    }
}

/// Result of decoding one BIO sequence. `repairs` counts orphan I-tags that
/// were promoted to B.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub annotation: AxisAnnotation,
    pub repairs: usize,
}

pub fn decode_bio(chars: &[char], tags: &[BioTag]) -> Result<Decoded, TagError> {
    if chars.len() != tags.len() {
        return Err(TagError::LengthMismatch {
            chars: chars.len(),
            tags: tags.len(),
        });
    }
    let mut axes = Vec::new();
    let mut repairs = 0;
    let mut open: Option<(AxisType, usize)> = None;
    let close = |open: &mut Option<(AxisType, usize)>, end: usize, axes: &mut Vec<AxisWord>| {
        if let Some((t, start)) = open.take() {
            let surface: String = chars[start..end].iter().collect();
            axes.push(AxisWord::new(surface, t, Span::new(start, end)));
        }
    };
    for (i, tag) in tags.iter().enumerate() {
        match *tag {
            BioTag::Outside => close(&mut open, i, &mut axes),
            BioTag::Begin(t) => {
                close(&mut open, i, &mut axes);
                open = Some((t, i));
            }
            BioTag::Inside(t) => match open {
                Some((cur, _)) if cur == t => {}
                _ => {
                    repairs += 1;
                    close(&mut open, i, &mut axes);
                    open = Some((t, i));
                }
            },
        }
    }
    close(&mut open, chars.len(), &mut axes);
    let name: String = chars.iter().collect();
    let annotation = AxisAnnotation::new(name, axes).expect("decoded spans are contiguous runs");
    Ok(Decoded {
        annotation,
        repairs,
    })
}

pub fn encode_bio(annotation: &AxisAnnotation) -> Vec<BioTag> {
    let mut tags = vec![BioTag::Outside; annotation.char_len()];
    for axis in annotation.axes() {
        let Span { start, end } = axis.span;
        tags[start] = BioTag::Begin(axis.axis_type);
        for t in &mut tags[start + 1..end] {
            *t = BioTag::Inside(axis.axis_type);
        }
    }
    tags
}

/// Serializes annotations as `char<TAB>tag` lines, one blank line between
/// names.
pub fn write_bio<'a>(annotations: impl IntoIterator<Item = &'a AxisAnnotation>) -> String {
    let mut out = String::new();
    for (k, a) in annotations.into_iter().enumerate() {
        if k > 0 {
            out.push('\n');
        }
        for (c, t) in a.name().chars().zip(encode_bio(a)) {
            out.push(c);
            out.push('\t');
            out.push_str(&t.to_string());
            out.push('\n');
        }
    }
    out
}

pub fn read_bio(text: &str) -> Result<Vec<Decoded>, TagError> {
    let mut out = Vec::new();
    let mut chars = Vec::new();
    let mut tags = Vec::new();
    let mut flush = |chars: &mut Vec<char>, tags: &mut Vec<BioTag>| -> Result<(), TagError> {
        if !chars.is_empty() {
            out.push(decode_bio(chars, tags)?);
            chars.clear();
            tags.clear();
        }
        Ok(())
    };
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.is_empty() {
            flush(&mut chars, &mut tags)?;
            continue;
        }
        let (ch, tag) = line.rsplit_once('\t').ok_or_else(|| TagError::BioLine {
            line: line_no,
            message: "expected `char<TAB>tag`".into(),
        })?;
        let mut it = ch.chars();
        let c = match (it.next(), it.next()) {
            (Some(c), None) => c,
            _ => {
                return Err(TagError::BioLine {
                    line: line_no,
                    message: format!("token `{ch}` is not a single character"),
                })
            }
        };
        let tag: BioTag = tag.parse().map_err(|message| TagError::BioLine {
            line: line_no,
            message,
        })?;
        chars.push(c);
        tags.push(tag);
    }
    flush(&mut chars, &mut tags)?;
    Ok(out)
}
