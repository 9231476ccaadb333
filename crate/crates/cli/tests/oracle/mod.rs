//! Brute-force enumeration of the four augmentation techniques plus a random
//! mini-dataset generator. Deliberately naive: every (name, ICD name)
//! combination is visited and the guards are applied one by one.

use std::collections::{BTreeMap, BTreeSet};

use axisaug_core::augment::Method;
use axisaug_core::tagger::tag;
use axisaug_core::{
    AxisType, Dataset, DiseasePair, IcdCode, IcdEntry, Lexicon, Provenance, RegionTree,
};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;

pub type Triple = (String, String, String);

#[derive(Clone, Debug)]
struct Word {
    surface: String,
    kind: AxisType,
    start: usize,
    end: usize,
}

#[derive(Clone, Debug)]
struct Name {
    text: String,
    words: Vec<Word>,
}

fn annotate(text: &str, lexicon: &Lexicon) -> Name {
    let a = tag(text, lexicon).expect("non-empty names");
    let words = a
        .axes()
        .iter()
        .map(|w| Word {
            surface: w.surface.clone(),
            kind: w.axis_type,
            start: w.span.start,
            end: w.span.end,
        })
        .collect();
    Name {
        text: text.to_string(),
        words,
    }
}

/// (shared count, words only in a, words only in b). Earlier occurrences pair
/// up first.
fn compare(a: &Name, b: &Name) -> (usize, Vec<Word>, Vec<Word>) {
    let mut used = vec![false; b.words.len()];
    let mut shared = 0;
    let mut only_a = Vec::new();
    for wa in &a.words {
        let hit = (0..b.words.len())
            .find(|&j| !used[j] && b.words[j].surface == wa.surface && b.words[j].kind == wa.kind);
        match hit {
            Some(j) => {
                used[j] = true;
                shared += 1;
            }
            None => only_a.push(wa.clone()),
        }
    }
    let only_b = b
        .words
        .iter()
        .zip(&used)
        .filter(|(_, u)| !**u)
        .map(|(w, _)| w.clone())
        .collect();
    (shared, only_a, only_b)
}

fn splice(text: &str, start: usize, end: usize, with: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out: String = chars[..start].iter().collect();
    out.push_str(with);
    out.extend(&chars[end..]);
    out
}

fn multiset(n: &Name) -> Vec<(String, AxisType)> {
    let mut v: Vec<_> = n
        .words
        .iter()
        .map(|w| (w.surface.clone(), w.kind))
        .collect();
    v.sort();
    v
}

fn mode_name(mode: AxisType) -> &'static str {
    match mode {
        AxisType::AnatomicalRegion => "Region",
        AxisType::DiseaseCenter => "Center",
        AxisType::DiseaseCharacteristic => "Characteristic",
    }
}

fn canonical(code: &IcdCode) -> String {
    code.raw().replace('.', "").to_uppercase()
}

fn excluded_code(code: &IcdCode) -> bool {
    matches!(canonical(code).chars().next(), Some('P' | 'Q' | 'U'..='Z'))
}

fn strict_ancestor(tree: &RegionTree, larger: &str, smaller: &str) -> bool {
    let mut cur = smaller.to_string();
    let mut steps = 0;
    while let Some(p) = tree.parent(&cur) {
        if p == larger {
            return true;
        }
        cur = p.to_string();
        steps += 1;
        assert!(steps < 1000, "cycle in region tree");
    }
    false
}

/// Expected (udn, sdn, provenance tag) triples for the given methods with
/// every axis mode and both MGA sources selected.
pub fn augment(ds: &Dataset, methods: &[Method]) -> BTreeSet<Triple> {
    let excluded: BTreeSet<&str> = ds
        .icd
        .iter()
        .filter(|e| excluded_code(&e.code))
        .map(|e| e.name.as_str())
        .collect();
    let kept: Vec<&IcdEntry> = ds
        .icd
        .iter()
        .filter(|e| !excluded.contains(e.name.as_str()))
        .collect();
    let icd_names: BTreeSet<&str> = kept.iter().map(|e| e.name.as_str()).collect();
    let training: Vec<(&str, &str)> = ds
        .pairs
        .iter()
        .flat_map(|p| p.sdns.iter().map(move |s| (p.udn.as_str(), s.as_str())))
        .filter(|(u, s)| !excluded.contains(u) && !excluded.contains(s))
        .collect();
    let mut corpus: BTreeSet<&str> = icd_names.clone();
    for (u, s) in &training {
        corpus.insert(u);
        corpus.insert(s);
    }
    let names: BTreeMap<&str, Name> = corpus
        .iter()
        .map(|n| (*n, annotate(n, &ds.lexicon)))
        .collect();
    let icd: Vec<&Name> = icd_names.iter().map(|n| &names[n]).collect();

    let mut out = BTreeSet::new();
    let mut emit = |u: String, s: &str, tag: String| {
        out.insert((u, s.to_string(), tag));
    };
    for method in methods {
        match method {
            Method::Ar1 => {
                for mode in AxisType::ALL {
                    for d1 in names.values() {
                        for s1 in &icd {
                            let (shared, a, b) = compare(d1, s1);
                            if shared >= 1
                                && a.len() == 1
                                && b.len() == 1
                                && a[0].kind == mode
                                && b[0].kind == mode
                            {
                                let u = splice(&d1.text, a[0].start, a[0].end, &b[0].surface);
                                emit(u, &s1.text, format!("AR1-{}", mode_name(mode)));
                            }
                        }
                    }
                }
            }
            Method::Ar2 => {
                for mode in AxisType::ALL {
                    for (u, s) in &training {
                        let (u1, s1) = (&names[u], &names[s]);
                        if multiset(u1) != multiset(s1) {
                            continue;
                        }
                        for s2 in &icd {
                            if s2.words.len() != s1.words.len() {
                                continue;
                            }
                            let (_, a, b) = compare(s1, s2);
                            if a.len() != 1
                                || b.len() != 1
                                || a[0].kind != mode
                                || b[0].kind != mode
                            {
                                continue;
                            }
                            let s3 = splice(&s1.text, a[0].start, a[0].end, &b[0].surface);
                            if !icd_names.contains(s3.as_str()) {
                                continue;
                            }
                            let same = |w: &&Word| w.surface == a[0].surface && w.kind == a[0].kind;
                            let k = s1
                                .words
                                .iter()
                                .filter(same)
                                .take_while(|w| w.start != a[0].start)
                                .count();
                            let target = u1
                                .words
                                .iter()
                                .filter(same)
                                .nth(k)
                                .expect("equal multisets");
                            let u2 = splice(&u1.text, target.start, target.end, &b[0].surface);
                            emit(u2, &s3, format!("AR2-{}", mode_name(mode)));
                        }
                    }
                }
            }
            Method::MgaCode => {
                let parents = |code: &IcdCode| -> Vec<&str> {
                    let c = canonical(code);
                    if c.len() != 6 {
                        return Vec::new();
                    }
                    kept.iter()
                        .filter(|e| canonical(&e.code) == c[..4])
                        .map(|e| e.name.as_str())
                        .collect()
                };
                for e in &kept {
                    for p in parents(&e.code) {
                        emit(e.name.clone(), p, "MGA-Code-1".into());
                    }
                }
                for (u, s) in &training {
                    for e in kept.iter().filter(|e| e.name == *s) {
                        for p in parents(&e.code) {
                            emit(u.to_string(), p, "MGA-Code-2".into());
                        }
                    }
                }
            }
            Method::MgaRegion => {
                let udns: BTreeSet<&str> = training.iter().map(|(u, _)| *u).collect();
                let sources: [(Vec<&Name>, &str); 2] = [
                    (icd.clone(), "MGA-Region-1"),
                    (udns.iter().map(|u| &names[u]).collect(), "MGA-Region-2"),
                ];
                for (corpus, tag) in sources {
                    for d1 in corpus {
                        for s1 in &icd {
                            let (shared, a, b) = compare(d1, s1);
                            if shared >= 1
                                && a.len() == 1
                                && b.len() == 1
                                && a[0].kind == AxisType::AnatomicalRegion
                                && b[0].kind == AxisType::AnatomicalRegion
                                && strict_ancestor(&ds.region_tree, &b[0].surface, &a[0].surface)
                            {
                                emit(d1.text.clone(), &s1.text, tag.to_string());
                            }
                        }
                    }
                }
            }
        }
    }
    out.retain(|(u, s, _)| !excluded.contains(u.as_str()) && !excluded.contains(s.as_str()));
    out
}

const REGIONS: &[&str] = &[
    "头部",
    "颈部",
    "胸部",
    "乳腺",
    "副乳腺",
    "乳房",
    "上肢",
    "前臂",
    "腰椎",
    "踝关节",
];
const CENTERS: &[&str] = &["骨折", "囊肿", "肿瘤", "炎", "结核"];
const CHARACTERISTICS: &[&str] = &["急性", "慢性", "良性", "先天性"];
const FILLERS: &[&str] = &["术后", "伴", "左", "右", "重度"];

/// Mostly `[characteristic] region center [filler]`, so that names often
/// differ in a single axis word; sometimes an arbitrary token soup.
fn random_name(rng: &mut StdRng) -> String {
    if rng.gen_bool(0.75) {
        let mut s = String::new();
        if rng.gen_bool(0.4) {
            s.push_str(CHARACTERISTICS.choose(rng).unwrap());
        }
        s.push_str(REGIONS.choose(rng).unwrap());
        s.push_str(CENTERS.choose(rng).unwrap());
        if rng.gen_bool(0.2) {
            s.push_str(FILLERS.choose(rng).unwrap());
        }
        return s;
    }
    let n = rng.gen_range(1..=4);
    (0..n)
        .map(|_| {
            let pool = match rng.gen_range(0..10) {
                0..=2 => REGIONS,
                3..=5 => CENTERS,
                6..=7 => CHARACTERISTICS,
                _ => FILLERS,
            };
            *pool.choose(rng).unwrap()
        })
        .collect()
}

fn random_code(rng: &mut StdRng) -> IcdCode {
    let letter = *['A', 'K', 'M', 'S', 'P', 'Q', 'W', 'Z']
        .choose(rng)
        .unwrap();
    let base = format!("{letter}0{}", rng.gen_range(0..3));
    let raw = match rng.gen_range(0..3) {
        0 => base,
        1 => format!("{base}.{}", rng.gen_range(0..3)),
        _ => format!("{base}.{}0{}", rng.gen_range(0..3), rng.gen_range(1..3)),
    };
    IcdCode::parse(&raw).unwrap()
}

pub fn random_dataset(rng: &mut StdRng) -> Dataset {
    let mut lexicon = Lexicon::new();
    for (pool, kind) in [
        (REGIONS, AxisType::AnatomicalRegion),
        (CENTERS, AxisType::DiseaseCenter),
        (CHARACTERISTICS, AxisType::DiseaseCharacteristic),
    ] {
        for w in pool {
            lexicon.insert(*w, kind);
        }
    }

    let mut regions = REGIONS.to_vec();
    regions.shuffle(rng);
    let mut edges = Vec::new();
    for i in 1..regions.len() {
        if rng.gen_bool(0.7) {
            let parent = regions[rng.gen_range(0..i)];
            edges.push((regions[i], parent));
        }
    }
    let region_tree = RegionTree::from_edges(edges).unwrap();

    let n_icd = rng.gen_range(1..=100);
    let mut icd: Vec<IcdEntry> = Vec::new();
    for _ in 0..n_icd {
        let name = if !icd.is_empty() && rng.gen_bool(0.15) {
            icd.choose(rng).unwrap().name.clone()
        } else {
            random_name(rng)
        };
        icd.push(IcdEntry {
            code: random_code(rng),
            name,
        });
    }

    let n_pairs = rng.gen_range(0..=100);
    let mut pairs = Vec::new();
    for _ in 0..n_pairs {
        let sdn = if rng.gen_bool(0.8) {
            icd.choose(rng).unwrap().name.clone()
        } else {
            random_name(rng)
        };
        let udn = if rng.gen_bool(0.5) {
            let filler = *FILLERS.choose(rng).unwrap();
            if rng.gen_bool(0.5) {
                format!("{filler}{sdn}")
            } else {
                format!("{sdn}{filler}")
            }
        } else {
            random_name(rng)
        };
        let mut pair = DiseasePair::new(udn, sdn, Provenance::Original);
        if rng.gen_bool(0.1) {
            pair.sdns.push(icd.choose(rng).unwrap().name.clone());
        }
        pairs.push(pair);
    }
    Dataset {
        pairs,
        icd,
        region_tree,
        lexicon,
    }
}
