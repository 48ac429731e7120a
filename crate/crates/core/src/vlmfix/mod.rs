//! Whole-video relabeling of confusable stuff classes (e.g. river / lake /
//! sea) using a vision-language model's answer to a fixed question.

mod client;

pub use client::{HttpVlmClient, MockVlmClient, VlmClient, VlmQuery};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{LabelMap, RgbFrame};

/// Closing sentence of every question sent to the model.
pub const ANSWER_INSTRUCTION: &str = "Please give me the only answer.";

/// Default share of video pixels a group must cover before it is queried.
pub const DEFAULT_MIN_PIXEL_FRACTION: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupMember {
    pub id: u16,
    pub name: String,
}

/// Classes a model tends to confuse, asked about under one stuff name.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawGroup", into = "RawGroup")]
pub struct ConfusableGroup {
    stuff: String,
    members: Vec<GroupMember>,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGroup {
    stuff: String,
    members: Vec<GroupMember>,
}

impl TryFrom<RawGroup> for ConfusableGroup {
    type Error = Error;

    fn try_from(raw: RawGroup) -> Result<Self> {
        ConfusableGroup::new(raw.stuff, raw.members)
    }
}

impl From<ConfusableGroup> for RawGroup {
    fn from(g: ConfusableGroup) -> Self {
        RawGroup {
            stuff: g.stuff,
            members: g.members,
        }
    }
}

impl ConfusableGroup {
    pub fn new(stuff: impl Into<String>, members: Vec<GroupMember>) -> Result<Self> {
        let stuff = stuff.into();
        if members.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "group {stuff:?} needs at least two members"
            )));
        }
        let mut names = BTreeSet::new();
        let mut ids = BTreeSet::new();
        for m in &members {
            if m.name.trim().is_empty() {
                return Err(Error::InvalidInput(format!("group {stuff:?} has an unnamed member")));
            }
            if !names.insert(m.name.to_lowercase()) || !ids.insert(m.id) {
                return Err(Error::InvalidInput(format!(
                    "group {stuff:?} repeats member {:?}",
                    m.name
                )));
            }
        }
        Ok(Self { stuff, members })
    }

    /// Shorthand for `(id, name)` pairs.
    pub fn from_pairs(stuff: &str, members: &[(u16, &str)]) -> Result<Self> {
        Self::new(
            stuff,
            members
                .iter()
                .map(|&(id, name)| GroupMember {
                    id,
                    name: name.to_owned(),
                })
                .collect(),
        )
    }

    pub fn stuff(&self) -> &str {
        &self.stuff
    }

    pub fn members(&self) -> &[GroupMember] {
        &self.members
    }

    pub fn contains(&self, class: u16) -> bool {
        self.members.iter().any(|m| m.id == class)
    }

    pub fn member_ids(&self) -> BTreeSet<u16> {
        self.members.iter().map(|m| m.id).collect()
    }
}

/// `"Is the {stuff} in the image a {m1, m2 or m3}? Please give me the only answer."`
pub fn build_prompt(group: &ConfusableGroup) -> String {
    let names: Vec<&str> = group.members.iter().map(|m| m.name.as_str()).collect();
    let (last, rest) = names.split_last().expect("groups have >= 2 members");
    format!(
        "Is the {} in the image a {} or {}? {ANSWER_INSTRUCTION}",
        group.stuff,
        rest.join(", "),
        last
    )
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// First whole-word, case-insensitive occurrence of `needle` in `hay`.
fn find_word(hay: &str, needle: &str) -> Option<usize> {
    let mut from = 0;
    while let Some(off) = hay[from..].find(needle) {
        let start = from + off;
        let end = start + needle.len();
        let before_ok = hay[..start].chars().next_back().is_none_or(|c| !is_word_char(c));
        let after_ok = hay[end..].chars().next().is_none_or(|c| !is_word_char(c));
        if before_ok && after_ok {
            return Some(start);
        }
        from = start + hay[start..].chars().next().map_or(1, char::len_utf8);
    }
    None
}

/// The member whose name appears first in `text`.
pub fn parse_answer(text: &str, group: &ConfusableGroup) -> Result<u16> {
    let hay = text.to_lowercase();
    group
        .members
        .iter()
        .filter_map(|m| find_word(&hay, &m.name.to_lowercase()).map(|pos| (pos, m.id)))
        .min_by_key(|&(pos, _)| pos)
        .map(|(_, id)| id)
        .ok_or_else(|| Error::UnparseableAnswer(text.to_owned()))
}

/// A group whose pixels are frequent enough in a video to be queried.
#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    pub group: ConfusableGroup,
    /// Frame holding the most pixels of the group (earliest on ties).
    pub representative_frame: usize,
    pub pixel_fraction: f64,
}

/// Groups whose member pixels make up at least `min_pixel_fraction` of the
/// video, in configuration order.
pub fn detect_confusables(
    labels: &[LabelMap],
    groups: &[ConfusableGroup],
    min_pixel_fraction: f64,
) -> Result<Vec<Detection>> {
    if labels.is_empty() {
        return Err(Error::InvalidInput("empty video".into()));
    }
    let total: usize = labels.iter().map(|l| l.data().len()).sum();
    if total == 0 {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for g in groups {
        let per_frame: Vec<usize> = labels
            .iter()
            .map(|l| l.data().iter().filter(|&&v| g.contains(v)).count())
            .collect();
        let hits: usize = per_frame.iter().sum();
        let fraction = hits as f64 / total as f64;
        if hits > 0 && fraction >= min_pixel_fraction {
            let representative_frame = per_frame
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
                .map(|(i, _)| i)
                .unwrap_or(0);
            out.push(Detection {
                group: g.clone(),
                representative_frame,
                pixel_fraction: fraction,
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correction {
    pub video_id: String,
    pub group: ConfusableGroup,
    pub chosen_class: u16,
    /// Frames where at least one pixel changed.
    pub frames_touched: usize,
    pub pixels_relabelled: usize,
}

/// Rewrites every pixel of any group member to `chosen`.
pub fn relabel_video(
    video_id: &str,
    labels: &[LabelMap],
    group: &ConfusableGroup,
    chosen: u16,
) -> Result<(Vec<LabelMap>, Correction)> {
    if !group.contains(chosen) {
        return Err(Error::InvalidInput(format!(
            "class {chosen} is not a member of group {:?}",
            group.stuff
        )));
    }
    let mut frames_touched = 0;
    let mut pixels_relabelled = 0;
    let out = labels
        .iter()
        .map(|l| {
            let mut l = l.clone();
            let mut changed = 0;
            for v in l.data_mut() {
                if *v != chosen && group.contains(*v) {
                    *v = chosen;
                    changed += 1;
                }
            }
            if changed > 0 {
                frames_touched += 1;
                pixels_relabelled += changed;
            }
            l
        })
        .collect();
    Ok((
        out,
        Correction {
            video_id: video_id.to_owned(),
            group: group.clone(),
            chosen_class: chosen,
            frames_touched,
            pixels_relabelled,
        },
    ))
}

/// Why a fired group was left untouched.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedQuery {
    pub video_id: String,
    pub stuff: String,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FixLog {
    pub corrections: Vec<Correction>,
    pub skipped: Vec<SkippedQuery>,
}

/// Detects confusable groups, asks `client` once per group and relabels
/// the video with the answer. Transport failures and unparseable answers
/// leave the labels as they were.
pub fn fix_video<C: VlmClient + ?Sized>(
    client: &C,
    video_id: &str,
    frames: &[RgbFrame],
    labels: &[LabelMap],
    groups: &[ConfusableGroup],
    min_pixel_fraction: f64,
) -> Result<(Vec<LabelMap>, FixLog)> {
    if frames.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} frames vs {} label maps",
            frames.len(),
            labels.len()
        )));
    }
    let mut current = labels.to_vec();
    let mut log = FixLog::default();
    for det in detect_confusables(labels, groups, min_pixel_fraction)? {
        let query = VlmQuery {
            video_id,
            prompt: build_prompt(&det.group),
            image: &frames[det.representative_frame],
        };
        let answer = client.ask(&query).and_then(|text| parse_answer(&text, &det.group));
        match answer {
            Ok(chosen) => {
                let (relabelled, correction) = relabel_video(video_id, &current, &det.group, chosen)?;
                current = relabelled;
                log.corrections.push(correction);
            }
            Err(e) => {
                log::warn!("video {video_id}: leaving {:?} untouched: {e}", det.group.stuff);
                log.skipped.push(SkippedQuery {
                    video_id: video_id.to_owned(),
                    stuff: det.group.stuff.clone(),
                    reason: e.to_string(),
                });
            }
        }
    }
    Ok((current, log))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn water() -> ConfusableGroup {
        ConfusableGroup::from_pairs("water", &[(1, "river"), (2, "lake"), (3, "sea")]).unwrap()
    }

    #[test]
    fn prompt_three_members() {
        assert_eq!(
            build_prompt(&water()),
            "Is the water in the image a river, lake or sea? Please give me the only answer."
        );
    }

    #[test]
    fn prompt_two_members() {
        let g = ConfusableGroup::from_pairs("water", &[(1, "river"), (2, "lake")]).unwrap();
        assert_eq!(
            build_prompt(&g),
            "Is the water in the image a river or lake? Please give me the only answer."
        );
    }

    #[test]
    fn group_invariants() {
        assert!(ConfusableGroup::from_pairs("water", &[(1, "river")]).is_err());
        assert!(ConfusableGroup::from_pairs("water", &[(1, "river"), (2, "River")]).is_err());
        assert!(ConfusableGroup::from_pairs("water", &[(1, "river"), (1, "lake")]).is_err());
        let json = r#"{"stuff":"water","members":[{"id":1,"name":"river"}]}"#;
        assert!(serde_json::from_str::<ConfusableGroup>(json).is_err());
    }

    #[test]
    fn answers() {
        let g = water();
        assert_eq!(parse_answer("The water in the image is a lake.", &g).unwrap(), 2);
        assert_eq!(
            parse_answer("The water in the image appears to be a river, as it is flowing", &g).unwrap(),
            1
        );
        assert_eq!(parse_answer("SEA", &g).unwrap(), 3);
        assert!(matches!(parse_answer("I cannot tell.", &g), Err(Error::UnparseableAnswer(_))));
        // "seashore" and "lakes" are not whole-word mentions.
        assert!(parse_answer("a seashore with lakes", &g).is_err());
    }

    #[test]
    fn earliest_mention_wins() {
        assert_eq!(parse_answer("Not a sea but a lake", &water()).unwrap(), 3);
    }

    #[test]
    fn relabel_counts() {
        let mut data = vec![0u16; 20];
        data[..10].fill(1);
        data[10..15].fill(3);
        let frame = LabelMap::new(20, 1, 5, data).unwrap();
        let (out, c) = relabel_video("v", &[frame.clone()], &water(), 2).unwrap();
        assert_eq!(c.pixels_relabelled, 15);
        assert_eq!(c.frames_touched, 1);
        assert_eq!(out[0].data().iter().filter(|&&v| v == 2).count(), 15);
        assert!(out[0].data()[15..].iter().all(|&v| v == 0));
        let (again, c2) = relabel_video("v", &out, &water(), 2).unwrap();
        assert_eq!(again, out);
        assert_eq!(c2.pixels_relabelled, 0);
        assert!(relabel_video("v", &[frame], &water(), 0).is_err());
    }

    #[test]
    fn detection_threshold_and_representative() {
        let a = LabelMap::from_fn(10, 10, 5, |x, _| if x < 2 { 1 } else { 0 });
        let b = LabelMap::from_fn(10, 10, 5, |x, _| if x < 6 { 1 } else { 0 });
        let d = detect_confusables(&[a.clone(), b], &[water()], 0.05).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].representative_frame, 1);
        assert!((d[0].pixel_fraction - 0.4).abs() < 1e-12);
        assert!(detect_confusables(&[a], &[water()], 0.5).unwrap().is_empty());
        let none = LabelMap::filled(4, 4, 5, 0);
        assert!(detect_confusables(&[none], &[water()], 0.05).unwrap().is_empty());
    }
}
