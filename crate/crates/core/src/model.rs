//! Domain types shared by every pipeline stage.
//!
//! Everything here is a plain immutable value once constructed. Character
//! positions always count Unicode scalar values, never bytes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodeError {
    #[error("empty ICD code")]
    Empty,
    #[error("malformed ICD code `{0}`")]
    Malformed(String),
    #[error("ICD code `{code}` has {found}-character granularity, expected {expected}")]
    Granularity {
        code: String,
        found: usize,
        expected: usize,
    },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnnotationError {
    #[error("axis span {start}..{end} is out of bounds for `{name}`")]
    OutOfBounds {
        name: String,
        start: usize,
        end: usize,
    },
    #[error("axis `{surface}` does not match `{name}` at {start}..{end}")]
    SurfaceMismatch {
        name: String,
        surface: String,
        start: usize,
        end: usize,
    },
    #[error("axis spans in `{0}` overlap or are out of order")]
    Overlap(String),
    #[error("empty axis span in `{0}`")]
    EmptySpan(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("region `{0}` is part of a cycle")]
    Cycle(String),
    #[error("region `{child}` has two parents: `{first}` and `{second}`")]
    MultipleParents {
        child: String,
        first: String,
        second: String,
    },
}

/// The three kinds of axis word a disease name is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AxisType {
    DiseaseCenter,
    AnatomicalRegion,
    DiseaseCharacteristic,
}

impl AxisType {
    pub const ALL: [AxisType; 3] = [
        AxisType::DiseaseCenter,
        AxisType::AnatomicalRegion,
        AxisType::DiseaseCharacteristic,
    ];

    /// Token used in lexicon files, BIO tags and CLI flags.
    pub fn token(self) -> &'static str {
        match self {
            AxisType::DiseaseCenter => "center",
            AxisType::AnatomicalRegion => "region",
            AxisType::DiseaseCharacteristic => "characteristic",
        }
    }

    /// Name used inside provenance tags (`AR1-Region`, ...).
    pub fn label(self) -> &'static str {
        match self {
            AxisType::DiseaseCenter => "Center",
            AxisType::AnatomicalRegion => "Region",
            AxisType::DiseaseCharacteristic => "Characteristic",
        }
    }
}

impl fmt::Display for AxisType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for AxisType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "center" => Ok(AxisType::DiseaseCenter),
            "region" => Ok(AxisType::AnatomicalRegion),
            "characteristic" => Ok(AxisType::DiseaseCharacteristic),
            other => Err(format!("unknown axis type `{other}`")),
        }
    }
}

/// Half-open interval of character indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AxisWord {
    pub surface: String,
    pub axis_type: AxisType,
    pub span: Span,
}

impl AxisWord {
    pub fn new(surface: impl Into<String>, axis_type: AxisType, span: Span) -> Self {
        AxisWord {
            surface: surface.into(),
            axis_type,
            span,
        }
    }

    /// The (surface, type) identity used when comparing two names.
    pub fn key(&self) -> (&str, AxisType) {
        (&self.surface, self.axis_type)
    }
}

/// A name segmented into typed axis words. Characters outside every span are
/// connector text.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AxisAnnotation {
    name: String,
    axes: Vec<AxisWord>,
}

impl AxisAnnotation {
    pub fn new(name: impl Into<String>, axes: Vec<AxisWord>) -> Result<Self, AnnotationError> {
        let name = name.into();
        let chars: Vec<char> = name.chars().collect();
        let mut cursor = 0usize;
        for axis in &axes {
            let Span { start, end } = axis.span;
            if axis.span.is_empty() {
                return Err(AnnotationError::EmptySpan(name));
            }
            if end > chars.len() {
                return Err(AnnotationError::OutOfBounds { name, start, end });
            }
            if start < cursor {
                return Err(AnnotationError::Overlap(name));
            }
            let covered: String = chars[start..end].iter().collect();
            if covered != axis.surface {
                return Err(AnnotationError::SurfaceMismatch {
                    name,
                    surface: axis.surface.clone(),
                    start,
                    end,
                });
            }
            cursor = end;
        }
        Ok(AxisAnnotation { name, axes })
    }

    pub fn unannotated(name: impl Into<String>) -> Self {
        AxisAnnotation {
            name: name.into(),
            axes: Vec::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn axes(&self) -> &[AxisWord] {
        &self.axes
    }

    pub fn char_len(&self) -> usize {
        self.name.chars().count()
    }

    /// Multiset of (surface, type), sorted. Positions are ignored.
    pub fn axis_multiset(&self) -> Vec<(&str, AxisType)> {
        let mut keys: Vec<_> = self.axes.iter().map(AxisWord::key).collect();
        keys.sort_unstable();
        keys
    }

    /// Rewrites the characters under `axis.span` with `replacement`, leaving
    /// every other character untouched.
    pub fn replace_span(&self, span: Span, replacement: &str) -> String {
        let mut out = String::with_capacity(self.name.len() + replacement.len());
        for (i, c) in self.name.chars().enumerate() {
            if i == span.start {
                out.push_str(replacement);
            }
            if i < span.start || i >= span.end {
                out.push(c);
            }
        }
        if span.start >= self.char_len() {
            out.push_str(replacement);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Granularity {
    Three,
    Four,
    Six,
}

impl Granularity {
    pub fn digits(self) -> usize {
        match self {
            Granularity::Three => 3,
            Granularity::Four => 4,
            Granularity::Six => 6,
        }
    }
}

/// An ICD code in both its published and its canonical (dot-free, upper-case)
/// form. All code logic works on the canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IcdCode {
    raw: String,
    canonical: String,
}

impl IcdCode {
    pub fn parse(raw: &str) -> Result<Self, CodeError> {
        let raw = raw.trim();
        if raw.is_empty() {
            return Err(CodeError::Empty);
        }
        let canonical: String = raw
            .chars()
            .filter(|&c| c != '.')
            .map(|c| c.to_ascii_uppercase())
            .collect();
        let mut chars = canonical.chars();
        let first_ok = chars.next().is_some_and(|c| c.is_ascii_alphabetic());
        let rest_ok = chars.all(|c| c.is_ascii_alphanumeric());
        let len_ok = matches!(canonical.len(), 3 | 4 | 6);
        if !(first_ok && rest_ok && len_ok) {
            return Err(CodeError::Malformed(raw.to_string()));
        }
        Ok(IcdCode {
            raw: raw.to_string(),
            canonical,
        })
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn canonical(&self) -> &str {
        &self.canonical
    }

    pub fn granularity(&self) -> Granularity {
        match self.canonical.len() {
            3 => Granularity::Three,
            4 => Granularity::Four,
            _ => Granularity::Six,
        }
    }

    /// The 4-character parent of a 6-character code: `A18.201` becomes `A18.2`.
    pub fn prefix4(&self) -> Result<IcdCode, CodeError> {
        if self.granularity() != Granularity::Six {
            return Err(CodeError::Granularity {
                code: self.raw.clone(),
                found: self.canonical.len(),
                expected: 6,
            });
        }
        let canonical = self.canonical[..4].to_string();
        let raw = format!("{}.{}", &canonical[..3], &canonical[3..]);
        Ok(IcdCode { raw, canonical })
    }

    /// Codes starting with P, Q or any letter after T are left out of
    /// augmentation.
    pub fn is_excluded(&self) -> Result<bool, CodeError> {
        match self.canonical.chars().next() {
            Some(c) if c.is_ascii_alphabetic() => Ok(matches!(c, 'P' | 'Q' | 'U'..='Z')),
            _ => Err(CodeError::Malformed(self.raw.clone())),
        }
    }
}

impl fmt::Display for IcdCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IcdEntry {
    pub code: IcdCode,
    pub name: String,
}

/// Which technique produced a pair. Declaration order is the output order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Provenance {
    Original,
    Ar1(AxisType),
    Ar2(AxisType),
    MgaCode1,
    MgaCode2,
    MgaRegion1,
    MgaRegion2,
}

impl Provenance {
    pub fn all() -> Vec<Provenance> {
        let mut out = vec![Provenance::Original];
        out.extend(AXIS_ORDER.iter().map(|&t| Provenance::Ar1(t)));
        out.extend(AXIS_ORDER.iter().map(|&t| Provenance::Ar2(t)));
        out.extend([
            Provenance::MgaCode1,
            Provenance::MgaCode2,
            Provenance::MgaRegion1,
            Provenance::MgaRegion2,
        ]);
        out
    }

    pub fn tag(&self) -> String {
        match self {
            Provenance::Original => "Original".into(),
            Provenance::Ar1(t) => format!("AR1-{}", t.label()),
            Provenance::Ar2(t) => format!("AR2-{}", t.label()),
            Provenance::MgaCode1 => "MGA-Code-1".into(),
            Provenance::MgaCode2 => "MGA-Code-2".into(),
            Provenance::MgaRegion1 => "MGA-Region-1".into(),
            Provenance::MgaRegion2 => "MGA-Region-2".into(),
        }
    }

    /// Technique family as reported in per-technique totals.
    pub fn family(&self) -> &'static str {
        match self {
            Provenance::Original => "Original",
            Provenance::Ar1(_) => "AR1",
            Provenance::Ar2(_) => "AR2",
            Provenance::MgaCode1 | Provenance::MgaCode2 => "MGA-Code",
            Provenance::MgaRegion1 | Provenance::MgaRegion2 => "MGA-Region",
        }
    }
}

const AXIS_ORDER: [AxisType; 3] = [
    AxisType::AnatomicalRegion,
    AxisType::DiseaseCenter,
    AxisType::DiseaseCharacteristic,
];

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Provenance::all()
            .into_iter()
            .find(|p| p.tag() == s)
            .ok_or_else(|| format!("unknown provenance `{s}`"))
    }
}

/// An unnormalized name and the standard name(s) it normalizes to.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DiseasePair {
    pub udn: String,
    pub sdns: Vec<String>,
    pub provenance: Provenance,
}

impl DiseasePair {
    pub fn new(udn: impl Into<String>, sdn: impl Into<String>, provenance: Provenance) -> Self {
        DiseasePair {
            udn: udn.into(),
            sdns: vec![sdn.into()],
            provenance,
        }
    }

    /// One single-SDN pair per standard name.
    pub fn expand(&self) -> impl Iterator<Item = DiseasePair> + '_ {
        self.sdns
            .iter()
            .map(|s| DiseasePair::new(self.udn.clone(), s.clone(), self.provenance))
    }
}

/// Anatomical regions arranged child → parent; ancestors are larger regions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RegionTree {
    nodes: BTreeSet<String>,
    parent: BTreeMap<String, String>,
}

impl RegionTree {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a tree from (child, parent) edges. Repeated identical edges are
    /// accepted once.
    pub fn from_edges<I, S>(edges: I) -> Result<Self, TreeError>
    where
        I: IntoIterator<Item = (S, S)>,
        S: Into<String>,
    {
        let mut tree = RegionTree::new();
        for (child, parent) in edges {
            tree.insert_edge(child.into(), parent.into())?;
        }
        tree.check_acyclic()?;
        Ok(tree)
    }

    fn insert_edge(&mut self, child: String, parent: String) -> Result<(), TreeError> {
        if child == parent {
            return Err(TreeError::Cycle(child));
        }
        if let Some(existing) = self.parent.get(&child) {
            if *existing != parent {
                return Err(TreeError::MultipleParents {
                    child,
                    first: existing.clone(),
                    second: parent,
                });
            }
            return Ok(());
        }
        self.nodes.insert(child.clone());
        self.nodes.insert(parent.clone());
        self.parent.insert(child, parent);
        Ok(())
    }

    fn check_acyclic(&self) -> Result<(), TreeError> {
        // Nodes already proven to reach a root.
        let mut settled: BTreeSet<&str> = BTreeSet::new();
        for start in &self.nodes {
            let mut path: Vec<&str> = Vec::new();
            let mut on_path: BTreeSet<&str> = BTreeSet::new();
            let mut cur: &str = start;
            loop {
                if settled.contains(cur) {
                    break;
                }
                if !on_path.insert(cur) {
                    return Err(TreeError::Cycle(cur.to_string()));
                }
                path.push(cur);
                match self.parent.get(cur) {
                    Some(p) => cur = p,
                    None => break,
                }
            }
            settled.extend(path);
        }
        Ok(())
    }

    pub fn contains(&self, region: &str) -> bool {
        self.nodes.contains(region)
    }

    pub fn parent(&self, region: &str) -> Option<&str> {
        self.parent.get(region).map(String::as_str)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(String::as_str)
    }

    /// (child, parent) edges in child order.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.parent.iter().map(|(c, p)| (c.as_str(), p.as_str()))
    }

    /// Proper ancestors from the direct parent up to the root.
    pub fn ancestors<'a>(&'a self, region: &str) -> impl Iterator<Item = &'a str> + 'a {
        let mut cur = self.parent.get(region).map(String::as_str);
        std::iter::from_fn(move || {
            let here = cur?;
            cur = self.parent.get(here).map(String::as_str);
            Some(here)
        })
    }

    /// True when `larger` is a strict ancestor of `smaller`, at any depth.
    pub fn is_ancestor(&self, larger: &str, smaller: &str) -> bool {
        self.ancestors(smaller).any(|a| a == larger)
    }
}

/// Outcome of the two similarity gates for one pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterVerdict {
    pub ngm: f64,
    pub cosine: f64,
    pub alpha: f64,
    pub beta: f64,
    pub passed: bool,
}

impl FilterVerdict {
    pub fn new(ngm: f64, cosine: f64, alpha: f64, beta: f64) -> Self {
        FilterVerdict {
            ngm,
            cosine,
            alpha,
            beta,
            passed: ngm > alpha && cosine > beta,
        }
    }
}
