#![allow(dead_code)]

use axisaug_core::{AxisType, DiseasePair, IcdCode, IcdEntry, Lexicon, Provenance, RegionTree};
use proptest::prelude::*;

pub const REGIONS: &[&str] = &[
    "头部",
    "颈部",
    "胸部",
    "乳腺",
    "副乳腺",
    "上肢",
    "前臂",
    "腰椎",
];
pub const CENTERS: &[&str] = &["骨折", "囊肿", "肿瘤", "炎"];
pub const CHARACTERISTICS: &[&str] = &["急性", "慢性", "良性"];
pub const FILLERS: &[&str] = &["术后", "伴", "左", "右"];

pub fn lexicon() -> Lexicon {
    let mut lex = Lexicon::new();
    for r in REGIONS {
        lex.insert(*r, AxisType::AnatomicalRegion);
    }
    for c in CENTERS {
        lex.insert(*c, AxisType::DiseaseCenter);
    }
    for c in CHARACTERISTICS {
        lex.insert(*c, AxisType::DiseaseCharacteristic);
    }
    lex
}

pub fn region_tree() -> RegionTree {
    RegionTree::from_edges([("副乳腺", "乳腺"), ("乳腺", "胸部"), ("前臂", "上肢")]).unwrap()
}

fn token() -> impl Strategy<Value = &'static str> {
    prop_oneof![
        3 => proptest::sample::select(REGIONS),
        3 => proptest::sample::select(CENTERS),
        2 => proptest::sample::select(CHARACTERISTICS),
        1 => proptest::sample::select(FILLERS),
    ]
}

pub fn name() -> impl Strategy<Value = String> {
    proptest::collection::vec(token(), 1..4).prop_map(|t| t.concat())
}

pub fn code() -> impl Strategy<Value = IcdCode> {
    (
        proptest::sample::select(vec!['A', 'K', 'M', 'P', 'Q', 'Z']),
        0u8..3,
        0u8..3,
        0u8..3,
        0u8..3,
    )
        .prop_map(|(letter, cat, gran, sub, ext)| {
            let base = format!("{letter}0{cat}");
            let raw = match gran {
                0 => base,
                1 => format!("{base}.{sub}"),
                _ => format!("{base}.{sub}0{}", ext + 1),
            };
            IcdCode::parse(&raw).unwrap()
        })
}

pub fn icd_entries() -> impl Strategy<Value = Vec<IcdEntry>> {
    proptest::collection::vec((code(), name()), 1..14).prop_map(|rows| {
        let mut out: Vec<IcdEntry> = Vec::new();
        for (code, name) in rows {
            let e = IcdEntry { code, name };
            if !out.contains(&e) {
                out.push(e);
            }
        }
        out
    })
}

pub fn pairs_for(icd: Vec<IcdEntry>) -> impl Strategy<Value = (Vec<IcdEntry>, Vec<DiseasePair>)> {
    let n = icd.len();
    let pair = (name(), 0..n + 2, name()).prop_map(move |(udn, k, stray)| (udn, k, stray));
    proptest::collection::vec(pair, 0..8).prop_map(move |rows| {
        let pairs = rows
            .into_iter()
            .map(|(udn, k, stray)| {
                let sdn = icd.get(k).map_or(stray, |e| e.name.clone());
                DiseasePair::new(udn, sdn, Provenance::Original)
            })
            .collect();
        (icd.clone(), pairs)
    })
}

pub fn dataset() -> impl Strategy<Value = axisaug_core::Dataset> {
    icd_entries()
        .prop_flat_map(pairs_for)
        .prop_map(|(icd, pairs)| axisaug_core::Dataset {
            pairs,
            icd,
            region_tree: region_tree(),
            lexicon: lexicon(),
        })
}
