//! Directory layout: `<root>/<video>/frames/<stem>.{png,jpg}` and optional
//! `<root>/<video>/masks/<stem>.png`. Temporal order is the lexicographic
//! order of stems, so numeric stems must be zero padded.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::frame::{LabelMap, RgbFrame};

use super::images::{read_label_png, read_rgb};

const FRAME_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg"];
const MASK_EXTENSIONS: &[&str] = &["png"];

/// Frames (and ground truth when present) of one video.
#[derive(Clone, Debug, PartialEq)]
pub struct VideoData {
    pub video_id: String,
    pub stems: Vec<String>,
    pub frames: Vec<RgbFrame>,
    pub masks: Option<Vec<LabelMap>>,
}

/// Image files of `dir` with one of `extensions`, keyed and sorted by stem.
pub fn list_images(dir: &Path, extensions: &[&str]) -> Result<BTreeMap<String, PathBuf>> {
    if !dir.is_dir() {
        return Err(Error::MissingDirectory(dir.to_owned()));
    }
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if !path.is_file() || !ext.is_some_and(|e| extensions.contains(&e.as_str())) {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()).map(str::to_owned) else {
            continue;
        };
        if let Some(prev) = out.insert(stem.clone(), path.clone()) {
            return Err(Error::InvalidInput(format!(
                "stem {stem:?} appears twice: {} and {}",
                prev.display(),
                path.display()
            )));
        }
    }
    Ok(out)
}

/// Sorted names of the subdirectories of `root`.
pub fn list_videos(root: &Path) -> Result<Vec<String>> {
    if !root.is_dir() {
        return Err(Error::MissingDirectory(root.to_owned()));
    }
    let mut ids = Vec::new();
    for entry in std::fs::read_dir(root).map_err(|e| Error::io(root, e))? {
        let path = entry.map_err(|e| Error::io(root, e))?.path();
        if path.is_dir() {
            if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
                ids.push(name.to_owned());
            }
        }
    }
    ids.sort();
    Ok(ids)
}

/// Reads label maps for the given stems from `dir`, checking that every map
/// has the size `dims` (or the size of the first map when `dims` is `None`).
pub fn read_label_dir(
    dir: &Path,
    num_classes: u16,
    dims: Option<(usize, usize)>,
) -> Result<(Vec<String>, Vec<LabelMap>)> {
    let files = list_images(dir, MASK_EXTENSIONS)?;
    let mut expected = dims;
    let mut stems = Vec::with_capacity(files.len());
    let mut maps = Vec::with_capacity(files.len());
    for (stem, path) in files {
        let m = read_label_png(&path, num_classes)?;
        check_dims(&path, &mut expected, m.dims())?;
        stems.push(stem);
        maps.push(m);
    }
    Ok((stems, maps))
}

fn check_dims(path: &Path, expected: &mut Option<(usize, usize)>, found: (usize, usize)) -> Result<()> {
    match *expected {
        Some(e) if e != found => Err(Error::DimensionMismatch {
            path: path.to_owned(),
            expected: e,
            found,
        }),
        Some(_) => Ok(()),
        None => {
            *expected = Some(found);
            Ok(())
        }
    }
}

pub fn load_video_dir(root: &Path, video_id: &str, num_classes: u16) -> Result<VideoData> {
    let video_dir = root.join(video_id);
    if !video_dir.is_dir() {
        return Err(Error::MissingDirectory(video_dir));
    }
    let frame_dir = video_dir.join("frames");
    let frame_files = list_images(&frame_dir, FRAME_EXTENSIONS)?;
    if frame_files.is_empty() {
        return Err(Error::EmptyInput(format!("no frames in {}", frame_dir.display())));
    }
    let mut dims = None;
    let mut stems = Vec::with_capacity(frame_files.len());
    let mut frames = Vec::with_capacity(frame_files.len());
    for (stem, path) in &frame_files {
        let f = read_rgb(path)?;
        check_dims(path, &mut dims, f.dims())?;
        stems.push(stem.clone());
        frames.push(f);
    }

    let mask_dir = video_dir.join("masks");
    let masks = if mask_dir.is_dir() {
        let mask_files = list_images(&mask_dir, MASK_EXTENSIONS)?;
        if let Some(stem) = frame_files.keys().find(|s| !mask_files.contains_key(*s)) {
            return Err(Error::StemMismatch {
                stem: stem.clone(),
                dir: mask_dir,
            });
        }
        if let Some(stem) = mask_files.keys().find(|s| !frame_files.contains_key(*s)) {
            return Err(Error::StemMismatch {
                stem: stem.clone(),
                dir: frame_dir,
            });
        }
        let mut maps = Vec::with_capacity(mask_files.len());
        for path in mask_files.values() {
            let m = read_label_png(path, num_classes)?;
            check_dims(path, &mut dims, m.dims())?;
            maps.push(m);
        }
        Some(maps)
    } else {
        None
    };
    Ok(VideoData {
        video_id: video_id.to_owned(),
        stems,
        frames,
        masks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeio::{write_label_png, write_rgb_png};

    fn make_video(root: &Path, id: &str, n: usize, with_masks: bool) {
        let frames = root.join(id).join("frames");
        std::fs::create_dir_all(&frames).unwrap();
        for t in 0..n {
            write_rgb_png(&frames.join(format!("{t:05}.png")), &RgbFrame::filled(4, 3, [t as u8, 0, 0])).unwrap();
        }
        if with_masks {
            let masks = root.join(id).join("masks");
            std::fs::create_dir_all(&masks).unwrap();
            for t in 0..n {
                write_label_png(&masks.join(format!("{t:05}.png")), &LabelMap::filled(4, 3, 5, t as u16 % 5)).unwrap();
            }
        }
    }

    #[test]
    fn aligned_frames_and_masks() {
        let dir = tempfile::tempdir().unwrap();
        make_video(dir.path(), "v", 5, true);
        let v = load_video_dir(dir.path(), "v", 5).unwrap();
        assert_eq!(v.frames.len(), 5);
        let masks = v.masks.unwrap();
        assert_eq!(masks.len(), 5);
        assert_eq!(v.stems[3], "00003");
        assert_eq!(v.frames[3].pixel(0, 0), [3, 0, 0]);
        assert_eq!(masks[3].get(0, 0), 3);
    }

    #[test]
    fn frames_only() {
        let dir = tempfile::tempdir().unwrap();
        make_video(dir.path(), "v", 2, false);
        assert!(load_video_dir(dir.path(), "v", 5).unwrap().masks.is_none());
    }

    #[test]
    fn missing_mask_names_stem() {
        let dir = tempfile::tempdir().unwrap();
        make_video(dir.path(), "v", 3, true);
        std::fs::remove_file(dir.path().join("v/masks/00001.png")).unwrap();
        match load_video_dir(dir.path(), "v", 5) {
            Err(Error::StemMismatch { stem, .. }) => assert_eq!(stem, "00001"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_directory() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_video_dir(dir.path(), "nope", 5), Err(Error::MissingDirectory(_))));
    }

    #[test]
    fn inconsistent_dimensions_name_file() {
        let dir = tempfile::tempdir().unwrap();
        make_video(dir.path(), "v", 3, false);
        write_rgb_png(&dir.path().join("v/frames/00002.png"), &RgbFrame::filled(5, 3, [0; 3])).unwrap();
        match load_video_dir(dir.path(), "v", 5) {
            Err(Error::DimensionMismatch { path, .. }) => assert!(path.ends_with("00002.png")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn videos_are_sorted() {
        let dir = tempfile::tempdir().unwrap();
        for id in ["b", "a", "c"] {
            std::fs::create_dir(dir.path().join(id)).unwrap();
        }
        std::fs::write(dir.path().join("file.txt"), "x").unwrap();
        assert_eq!(list_videos(dir.path()).unwrap(), vec!["a", "b", "c"]);
    }
}
