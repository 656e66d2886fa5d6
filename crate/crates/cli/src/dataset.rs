//! Dataset directory layout: `images/<id>.png`, `gt.csv`, `gaze.jsonl`,
//! `display.jsonl`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use gazelabel::eval::PointsByImage;
use gazelabel::gaze::{parse_display_log, parse_gaze_log, DisplayIndex, GazeSequence};
use gazelabel::io;

use crate::CliError;

pub const IMAGES: &str = "images";
pub const GT: &str = "gt.csv";
pub const DISTRACTORS: &str = "distractors.csv";
pub const GAZE: &str = "gaze.jsonl";
pub const DISPLAY: &str = "display.jsonl";

/// `(image_id, path)` for every PNG in `dir/images`, sorted by id.
pub fn image_paths(dir: &Path) -> Result<Vec<(String, PathBuf)>, CliError> {
    let images = dir.join(IMAGES);
    let entries = std::fs::read_dir(&images)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", images.display())))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|e| CliError::Runtime(format!("{}: {e}", images.display())))?
            .path();
        if path.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.push((stem.to_string(), path.clone()));
            }
        }
    }
    out.sort();
    Ok(out)
}

pub fn read_points(path: &Path) -> Result<PointsByImage, CliError> {
    Ok(io::read_points(io::open(path)?)?)
}

/// Gaze sequences grouped by image. Malformed gaze lines are skipped and
/// reported on stderr.
pub fn read_gaze(dir: &Path) -> Result<BTreeMap<String, Vec<GazeSequence>>, CliError> {
    let displays = DisplayIndex::from_records(parse_display_log(io::open(&dir.join(DISPLAY))?)?)?;
    let log = parse_gaze_log(io::open(&dir.join(GAZE))?, &displays)?;
    if !log.errors.is_empty() {
        eprintln!(
            "gazelabel: skipped {} malformed gaze line(s); first: {}",
            log.errors.len(),
            log.errors[0]
        );
    }
    let mut out: BTreeMap<String, Vec<GazeSequence>> = BTreeMap::new();
    for s in log.sequences {
        out.entry(s.image_id.clone()).or_default().push(s);
    }
    Ok(out)
}
