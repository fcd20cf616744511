//! Linguistic analyses of a canonical mapping: word-category survival,
//! strip inventory, collisions and their benignity, and gains by caption
//! length.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::canon::{Category, WordLists};
use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::eval::{raw_cutoff, RetrievalReport, SimProvider};
use crate::stats::{pearson, Correlation};
use crate::text::{tokenize, word_count};

/// Collision-benignity thresholds on the normalized similarity scale.
pub const DEFAULT_BENIGNITY_THRESHOLDS: [f64; 3] = [0.95, 0.90, 0.85];

fn check_aligned<A, B>(orig: &[A], canon: &[B]) -> Result<()> {
    if orig.len() != canon.len() {
        return Err(Error::Shape(format!(
            "{} original captions but {} canonical captions",
            orig.len(),
            canon.len()
        )));
    }
    Ok(())
}

fn rate(survived: usize, total: usize) -> Option<f64> {
    (total > 0).then(|| 100.0 * survived as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategorySurvival {
    pub n_original: usize,
    pub n_survived: usize,
    /// Percent; absent when the category never occurs.
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Selectivity {
    Ratio(f64),
    /// Content words survive but no function word does.
    FunctionRateZero,
    /// One of the aggregate rates is undefined, or both are zero.
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalReport {
    pub per_category: BTreeMap<Category, CategorySurvival>,
    pub content_rate: Option<f64>,
    pub function_rate: Option<f64>,
    pub selectivity: Selectivity,
}

impl SurvivalReport {
    pub fn csv_header() -> String {
        let mut h: Vec<String> = Category::ALL.iter().map(|c| c.name().to_string()).collect();
        h.extend(["content".into(), "function".into(), "selectivity".into()]);
        h.join(",")
    }

    pub fn csv_row(&self) -> String {
        let fmt = |r: Option<f64>| r.map_or_else(|| "NA".to_string(), |v| format!("{v:.2}"));
        let mut cells: Vec<String> = Category::ALL
            .iter()
            .map(|c| fmt(self.per_category.get(c).and_then(|s| s.rate)))
            .collect();
        cells.push(fmt(self.content_rate));
        cells.push(fmt(self.function_rate));
        cells.push(match self.selectivity {
            Selectivity::Ratio(r) => format!("{r:.3}"),
            Selectivity::FunctionRateZero => "function rate 0".into(),
            Selectivity::NotApplicable => "NA".into(),
        });
        cells.join(",")
    }
}

/// Bag-of-words survival of categorized original tokens into the aligned
/// canonical captions. Counts are token occurrences.
pub fn pos_survival<S: AsRef<str>, T: AsRef<str>>(orig: &[S], canon: &[T], wl: &WordLists) -> Result<SurvivalReport> {
    check_aligned(orig, canon)?;
    let mut counts: BTreeMap<Category, (usize, usize)> = Category::ALL.iter().map(|&c| (c, (0, 0))).collect();
    for (o, c) in orig.iter().zip(canon) {
        let canon_set: HashSet<String> = tokenize(c.as_ref()).into_iter().collect();
        for tok in tokenize(o.as_ref()) {
            if let Some(cat) = wl.category_of(&tok) {
                let e = counts.get_mut(&cat).expect("all categories present");
                e.0 += 1;
                if wl.survives(&tok, &canon_set) {
                    e.1 += 1;
                }
            }
        }
    }
    let aggregate = |cats: &[Category]| {
        let (n, s) = cats
            .iter()
            .map(|c| counts[c])
            .fold((0, 0), |(a, b), (x, y)| (a + x, b + y));
        rate(s, n)
    };
    let content_rate = aggregate(&Category::CONTENT);
    let function_rate = aggregate(&Category::FUNCTION);
    let selectivity = match (content_rate, function_rate) {
        (Some(c), Some(f)) if f > 0.0 => Selectivity::Ratio(c / f),
        (Some(c), Some(_)) if c > 0.0 => Selectivity::FunctionRateZero,
        _ => Selectivity::NotApplicable,
    };
    Ok(SurvivalReport {
        per_category: counts
            .into_iter()
            .map(|(c, (n, s))| {
                (
                    c,
                    CategorySurvival {
                        n_original: n,
                        n_survived: s,
                        rate: rate(s, n),
                    },
                )
            })
            .collect(),
        content_rate,
        function_rate,
        selectivity,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripInventory {
    pub removed: BTreeMap<Category, usize>,
    pub uncategorized_removed: usize,
    pub total_removed: usize,
    /// Most frequently removed words, ties broken alphabetically.
    pub top_removed: Vec<(String, usize)>,
}

/// Original tokens that do not survive into the canonical caption, tallied
/// by category and by word.
pub fn strip_inventory<S: AsRef<str>, T: AsRef<str>>(
    orig: &[S],
    canon: &[T],
    wl: &WordLists,
    top_k: usize,
) -> Result<StripInventory> {
    check_aligned(orig, canon)?;
    let mut removed: BTreeMap<Category, usize> = Category::ALL.iter().map(|&c| (c, 0)).collect();
    let mut uncategorized_removed = 0;
    let mut words: HashMap<String, usize> = HashMap::new();
    for (o, c) in orig.iter().zip(canon) {
        let canon_set: HashSet<String> = tokenize(c.as_ref()).into_iter().collect();
        for tok in tokenize(o.as_ref()) {
            if wl.survives(&tok, &canon_set) {
                continue;
            }
            match wl.category_of(&tok) {
                Some(cat) => *removed.get_mut(&cat).expect("all categories present") += 1,
                None => uncategorized_removed += 1,
            }
            *words.entry(tok).or_insert(0) += 1;
        }
    }
    let mut top: Vec<(String, usize)> = words.into_iter().collect();
    top.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    top.truncate(top_k);
    Ok(StripInventory {
        total_removed: removed.values().sum::<usize>() + uncategorized_removed,
        removed,
        uncategorized_removed,
        top_removed: top,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollisionGroup {
    pub canonical: String,
    pub motion_ids: Vec<String>,
}

/// Canonical strings shared by captions of two or more distinct motions,
/// ordered by canonical text; motion ids are sorted.
pub fn collision_groups(canonical: &Dataset) -> Vec<CollisionGroup> {
    let owner = canonical.motion_of_caption();
    let mut by_text: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for (c, &m) in canonical.captions().iter().zip(&owner) {
        by_text
            .entry(c.text.as_str())
            .or_default()
            .insert(canonical.motions()[m].id.as_str());
    }
    by_text
        .into_iter()
        .filter(|(_, ms)| ms.len() >= 2)
        .map(|(t, ms)| CollisionGroup {
            canonical: t.to_string(),
            motion_ids: ms.into_iter().map(str::to_string).collect(),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenignityRate {
    pub threshold_norm: f64,
    /// Percent of groups whose originals clear `2τ − 1`; absent with no groups.
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionReport {
    pub n_groups: usize,
    pub rates: Vec<BenignityRate>,
    pub mean_max_similarity: Option<f64>,
    /// Per group, the maximum original-caption similarity across distinct
    /// motions.
    pub max_similarity: Vec<f64>,
}

impl CollisionReport {
    pub fn csv_header(&self) -> String {
        let mut h = vec!["collisions".to_string()];
        h.extend(self.rates.iter().map(|r| format!("benign@{:.2}", r.threshold_norm)));
        h.push("mean_sim".into());
        h.join(",")
    }

    pub fn csv_row(&self) -> String {
        let mut cells = vec![self.n_groups.to_string()];
        cells.extend(
            self.rates
                .iter()
                .map(|r| r.rate.map_or_else(|| "NA".into(), |v| format!("{v:.2}"))),
        );
        cells.push(self.mean_max_similarity.map_or_else(|| "NA".into(), |v| format!("{v:.4}")));
        cells.join(",")
    }
}

/// A collision is benign at `τ` when some pair of original captions from
/// distinct motions of the group already reaches raw similarity `2τ − 1`.
/// `original` supplies the original captions the groups refer to.
pub fn collision_benignity(
    original: &Dataset,
    groups: &[CollisionGroup],
    provider: &SimProvider,
    thresholds: &[f64],
) -> Result<CollisionReport> {
    let texts: Vec<&str> = original.captions().iter().map(|c| c.text.as_str()).collect();
    let sim = provider.matrix(&texts)?;
    let mut max_similarity = Vec::with_capacity(groups.len());
    for g in groups {
        let members: Vec<usize> = g
            .motion_ids
            .iter()
            .map(|id| {
                original
                    .motion_index(id)
                    .ok_or_else(|| Error::Integrity(format!("collision group names unknown motion {id}")))
            })
            .collect::<Result<_>>()?;
        let mut best = f64::NEG_INFINITY;
        for (a, &ma) in members.iter().enumerate() {
            for &mb in &members[..a] {
                for &i in original.caption_indices(ma) {
                    for &j in original.caption_indices(mb) {
                        best = best.max(sim.get(i, j));
                    }
                }
            }
        }
        max_similarity.push(best);
    }
    let n = groups.len();
    let rates = thresholds
        .iter()
        .map(|&t| {
            let cut = raw_cutoff(t);
            BenignityRate {
                threshold_norm: t,
                rate: rate(max_similarity.iter().filter(|&&s| s >= cut).count(), n),
            }
        })
        .collect();
    Ok(CollisionReport {
        n_groups: n,
        rates,
        mean_max_similarity: (n > 0).then(|| max_similarity.iter().sum::<f64>() / n as f64),
        max_similarity,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthBin {
    pub label: String,
    pub min_words: usize,
    pub max_words: Option<usize>,
    pub n: usize,
    pub base_r1: Option<f64>,
    pub treat_r1: Option<f64>,
    pub delta_pp: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthGainReport {
    pub bins: Vec<LengthBin>,
    pub correlation: Correlation,
}

impl LengthGainReport {
    pub const CSV_HEADER: &'static str = "bin,n,base_r1,treat_r1,delta_pp";

    pub fn csv(&self) -> String {
        let fmt = |r: Option<f64>| r.map_or_else(|| "NA".to_string(), |v| format!("{v:.2}"));
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for b in &self.bins {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                b.label,
                b.n,
                fmt(b.base_r1),
                fmt(b.treat_r1),
                fmt(b.delta_pp)
            ));
        }
        out
    }
}

const BINS: [(&str, usize, Option<usize>); 3] = [("short", 1, Some(6)), ("medium", 7, Some(12)), ("long", 13, None)];

/// R@1 change by query caption length between two T2M reports over the same
/// queries. `ds` supplies the query captions' original text by id.
pub fn length_gain(base: &RetrievalReport, treat: &RetrievalReport, ds: &Dataset) -> Result<LengthGainReport> {
    if base.query_ids != treat.query_ids {
        return Err(Error::validation("reports", "reports cover different query sets"));
    }
    let text_of: HashMap<&str, &str> = ds.captions().iter().map(|c| (c.id.as_str(), c.text.as_str())).collect();
    let lengths: Vec<usize> = base
        .query_ids
        .iter()
        .map(|id| {
            text_of
                .get(id.as_str())
                .map(|t| word_count(t))
                .ok_or_else(|| Error::Integrity(format!("query {id} is not a caption of the dataset")))
        })
        .collect::<Result<_>>()?;
    let hb = base.hits_at_1();
    let ht = treat.hits_at_1();
    let bins = BINS
        .iter()
        .map(|&(label, lo, hi)| {
            let inside: Vec<usize> = (0..lengths.len())
                .filter(|&i| lengths[i] >= lo && hi.is_none_or(|h| lengths[i] <= h))
                .collect();
            let n = inside.len();
            let base_r1 = rate(inside.iter().filter(|&&i| hb[i]).count(), n);
            let treat_r1 = rate(inside.iter().filter(|&&i| ht[i]).count(), n);
            LengthBin {
                label: label.to_string(),
                min_words: lo,
                max_words: hi,
                n,
                base_r1,
                treat_r1,
                delta_pp: base_r1.zip(treat_r1).map(|(b, t)| t - b),
            }
        })
        .collect();
    let x: Vec<f64> = lengths.iter().map(|&l| l as f64).collect();
    let y: Vec<f64> = hb.iter().zip(&ht).map(|(&b, &t)| t as u8 as f64 - b as u8 as f64).collect();
    Ok(LengthGainReport {
        bins,
        correlation: pearson(&x, &y),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canon::canon_stopword;
    use crate::canon::DEFAULT_STRIP;
    use crate::corpus::{Caption, CaptionSource, Motion, Split};
    use crate::eval::{Direction, Protocol, TextMode};

    #[test]
    fn identity_survival_is_complete() {
        let wl = WordLists::builtin();
        let caps = ["a person walks forward slowly", "the man raises his left arm"];
        let r = pos_survival(&caps, &caps, &wl).unwrap();
        assert_eq!(r.content_rate, Some(100.0));
        assert_eq!(r.function_rate, Some(100.0));
        assert_eq!(r.selectivity, Selectivity::Ratio(1.0));
        let inv = strip_inventory(&caps, &caps, &wl, 5).unwrap();
        assert_eq!(inv.total_removed, 0);
    }

    #[test]
    fn stopword_fixture_has_zero_function_rate() {
        let wl = WordLists::builtin();
        let orig: Vec<String> = ["a", "the", "an", "this", "that", "a", "the", "an", "this", "that"]
            .iter()
            .zip(["walk", "run", "jump", "kick", "turn", "wave", "raise", "lift", "step", "crouch"])
            .map(|(d, v)| format!("{d} {v}"))
            .collect();
        for o in &orig {
            assert_eq!(tokenize(o).iter().filter(|t| wl.contains(Category::Verbs, t)).count(), 1, "{o}");
        }
        let canon: Vec<String> = orig.iter().map(|o| canon_stopword(&wl, &DEFAULT_STRIP, o)).collect();
        let r = pos_survival(&orig, &canon, &wl).unwrap();
        assert_eq!(r.per_category[&Category::Determiners].n_original, 10);
        assert_eq!(r.per_category[&Category::Verbs].n_original, 10);
        assert_eq!(r.function_rate, Some(0.0));
        assert_eq!(r.content_rate, Some(100.0));
        assert_eq!(r.selectivity, Selectivity::FunctionRateZero);
        assert!(r.csv_row().ends_with(",function rate 0"));
        assert_eq!(r.per_category[&Category::Body].rate, None);
    }

    #[test]
    fn strip_example_and_reconciliation() {
        let wl = WordLists::builtin();
        let inv = strip_inventory(&["a person walks"], &["walks"], &wl, 5).unwrap();
        assert_eq!(inv.removed[&Category::Determiners], 1);
        assert_eq!(inv.removed[&Category::Subjects], 1);
        assert_eq!(inv.total_removed, 2);
        assert_eq!(inv.top_removed, vec![("a".to_string(), 1), ("person".to_string(), 1)]);

        let orig = ["a person slowly walks to the left and then waves", "someone kind of jumps up"];
        let canon = ["walk left wave", "jump up"];
        let s = pos_survival(&orig, &canon, &wl).unwrap();
        let inv = strip_inventory(&orig, &canon, &wl, 3).unwrap();
        for c in Category::ALL {
            let cs = s.per_category[&c];
            assert_eq!(cs.n_survived + inv.removed[&c], cs.n_original, "{c}");
        }
    }

    #[test]
    fn misaligned_lists_rejected() {
        let wl = WordLists::builtin();
        assert!(pos_survival(&["a"], &["a", "b"], &wl).is_err());
    }

    fn dataset(rows: &[(&str, &str)]) -> Dataset {
        let mut motions: Vec<Motion> = Vec::new();
        let mut captions = Vec::new();
        for (i, (m, t)) in rows.iter().enumerate() {
            if !motions.iter().any(|x| x.id == *m) {
                motions.push(Motion {
                    id: m.to_string(),
                    features: vec![1.0],
                    split: Split::Test,
                    ext_key: None,
                });
            }
            captions.push(Caption {
                id: format!("c{i}"),
                motion_id: m.to_string(),
                text: t.to_string(),
                source: CaptionSource::Original,
                latents: None,
            });
        }
        Dataset::new("fixture", 1, motions, captions).unwrap()
    }

    #[test]
    fn collisions_found_and_benign_when_originals_match() {
        let orig = dataset(&[
            ("m0", "a person walks forward"),
            ("m1", "a person walks forward"),
            ("m2", "someone jumps"),
            ("m3", "a man jumps high"),
        ]);
        let canon = dataset(&[("m0", "walk forward"), ("m1", "walk forward"), ("m2", "jump"), ("m3", "jump high")]);
        let groups = collision_groups(&canon);
        assert_eq!(
            groups,
            vec![CollisionGroup {
                canonical: "walk forward".into(),
                motion_ids: vec!["m0".into(), "m1".into()],
            }]
        );
        let r = collision_benignity(&orig, &groups, &SimProvider::TfidfCosine, &DEFAULT_BENIGNITY_THRESHOLDS).unwrap();
        assert!(r.rates.iter().all(|b| b.rate == Some(100.0)));
        assert!(collision_groups(&orig).len() == 1);
        let none = collision_groups(&dataset(&[("m0", "a"), ("m1", "b")]));
        assert!(none.is_empty());
    }

    #[test]
    fn benignity_monotone_in_threshold() {
        let orig = dataset(&[
            ("m0", "walk forward quickly"),
            ("m1", "walk forward"),
            ("m2", "jump"),
            ("m3", "jump up high now"),
            ("m4", "turn left"),
            ("m5", "spin"),
        ]);
        let groups = vec![
            CollisionGroup { canonical: "x".into(), motion_ids: vec!["m0".into(), "m1".into()] },
            CollisionGroup { canonical: "y".into(), motion_ids: vec!["m2".into(), "m3".into()] },
            CollisionGroup { canonical: "z".into(), motion_ids: vec!["m4".into(), "m5".into()] },
        ];
        let ts = [0.5, 0.7, 0.85, 0.9, 0.95, 1.0];
        let r = collision_benignity(&orig, &groups, &SimProvider::TfidfCosine, &ts).unwrap();
        let rates: Vec<f64> = r.rates.iter().map(|b| b.rate.unwrap()).collect();
        assert!(rates.windows(2).all(|w| w[1] <= w[0]), "{rates:?}");
        assert_eq!(rates[0], 100.0);
        assert!(r.csv_header().starts_with("collisions,benign@0.50"));
    }

    fn report(ids: &[&str], ranks: &[f64]) -> RetrievalReport {
        RetrievalReport::from_ranks(
            Direction::T2M,
            Protocol::dspair(),
            TextMode::Original,
            10,
            ids.iter().map(|s| s.to_string()).collect(),
            ranks.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn length_gain_by_hand() {
        let ds = dataset(&[
            ("m0", "walk"),
            ("m1", "a person walks forward and back"),
            ("m2", "a person walks forward and then back"),
            ("m3", "one two three four five six seven eight nine ten eleven twelve"),
            ("m4", "one two three four five six seven eight nine ten eleven twelve thirteen"),
            ("m5", "jump"),
        ]);
        let ids = ["c0", "c1", "c2", "c3", "c4", "c5"];
        // word counts 1, 6, 7, 12, 13, 1
        let base = report(&ids, &[1.0, 2.0, 1.0, 3.0, 2.0, 1.0]);
        let treat = report(&ids, &[1.0, 1.0, 1.0, 1.0, 1.0, 4.0]);
        let r = length_gain(&base, &treat, &ds).unwrap();
        let short = &r.bins[0];
        assert_eq!(short.n, 3);
        assert!((short.base_r1.unwrap() - 200.0 / 3.0).abs() < 1e-12);
        assert!((short.treat_r1.unwrap() - 200.0 / 3.0).abs() < 1e-12);
        assert!(short.delta_pp.unwrap().abs() < 1e-12);
        assert_eq!((r.bins[1].n, r.bins[1].base_r1, r.bins[1].treat_r1), (2, Some(50.0), Some(100.0)));
        assert_eq!((r.bins[2].n, r.bins[2].delta_pp), (1, Some(100.0)));
        // hit changes 0, +1, 0, +1, +1, −1 against lengths 1, 6, 7, 12, 13, 1
        let x = [1.0, 6.0, 7.0, 12.0, 13.0, 1.0];
        let y = [0.0, 1.0, 0.0, 1.0, 1.0, -1.0];
        assert!((r.correlation.r - pearson(&x, &y).r).abs() < 1e-15);
        assert!(r.correlation.r > 0.0);

        let same = length_gain(&base, &base, &ds).unwrap();
        assert!(same.bins.iter().all(|b| b.delta_pp.is_none_or(|d| d == 0.0)));
        assert!(same.correlation.constant);

        let other = report(&["c1", "c0", "c2", "c3", "c4", "c5"], &[1.0; 6]);
        assert!(length_gain(&base, &other, &ds).is_err());
    }
}
