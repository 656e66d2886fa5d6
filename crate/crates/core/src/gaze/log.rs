//! Line-delimited JSON gaze and display logs.
//!
//! Gaze lines:
//! `{"participant_id","image_id","t_ms","screen_x","screen_y","confidence","valid"}`,
//! where coordinates and confidence may be the string `"N/A"` (or `null`).
//!
//! Display lines:
//! `{"image_id","rotation","flip","viewport":{"origin_x","origin_y","scale"},"image_w","image_h"}`
//! with an optional `"participant_id"`; a record without one applies to every
//! participant. Unknown fields are ignored.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize, Serializer};
use serde_json::Value;

use super::{DisplayRecord, Flip, GazePoint, GazeSequence, ImageSize, Rotation, Viewport};
use crate::{Error, Result};

#[derive(Deserialize)]
struct GazeLineIn {
    participant_id: String,
    image_id: String,
    t_ms: f64,
    #[serde(default)]
    screen_x: Value,
    #[serde(default)]
    screen_y: Value,
    #[serde(default)]
    confidence: Value,
    #[serde(default = "default_valid")]
    valid: bool,
}

fn default_valid() -> bool {
    true
}

struct MaybeNa(Option<f64>);

impl Serialize for MaybeNa {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0 {
            Some(v) if v.is_finite() => s.serialize_f64(v),
            _ => s.serialize_str("N/A"),
        }
    }
}

#[derive(Serialize)]
struct GazeLineOut<'a> {
    participant_id: &'a str,
    image_id: &'a str,
    t_ms: f64,
    screen_x: MaybeNa,
    screen_y: MaybeNa,
    confidence: MaybeNa,
    valid: bool,
}

#[derive(Serialize, Deserialize)]
struct DisplayLine {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    participant_id: Option<String>,
    image_id: String,
    rotation: Rotation,
    #[serde(default)]
    flip: Flip,
    viewport: Viewport,
    image_w: u32,
    image_h: u32,
}

fn na_number(v: &Value, field: &str) -> std::result::Result<Option<f64>, String> {
    match v {
        Value::Null => Ok(None),
        Value::Number(n) => n
            .as_f64()
            .map(Some)
            .ok_or_else(|| format!("{field}: unrepresentable number")),
        Value::String(s) if s.trim().eq_ignore_ascii_case("n/a") => Ok(None),
        Value::String(s) => s
            .trim()
            .parse::<f64>()
            .map(Some)
            .map_err(|_| format!("{field}: expected a number or \"N/A\", got {s:?}")),
        other => Err(format!("{field}: expected a number or \"N/A\", got {other}")),
    }
}

fn parse_gaze_line(text: &str) -> std::result::Result<(String, String, GazePoint), String> {
    let raw: GazeLineIn = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if !(raw.t_ms.is_finite() && raw.t_ms >= 0.0) {
        return Err(format!("t_ms must be a non-negative number, got {}", raw.t_ms));
    }
    let screen_x = na_number(&raw.screen_x, "screen_x")?;
    let screen_y = na_number(&raw.screen_y, "screen_y")?;
    let confidence = na_number(&raw.confidence, "confidence")?;
    if let Some(c) = confidence {
        if !(0.0..=1.0).contains(&c) {
            return Err(format!("confidence must lie in [0, 1], got {c}"));
        }
    }
    let complete = screen_x.is_some_and(f64::is_finite)
        && screen_y.is_some_and(f64::is_finite)
        && confidence.is_some();
    let point = GazePoint {
        t_ms: raw.t_ms,
        screen_x,
        screen_y,
        confidence,
        valid: raw.valid && complete,
    };
    Ok((raw.participant_id, raw.image_id, point))
}

/// Display records keyed by participant and image.
#[derive(Debug, Clone, Default)]
pub struct DisplayIndex {
    records: HashMap<(Option<String>, String), DisplayRecord>,
}

impl DisplayIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records(records: impl IntoIterator<Item = DisplayRecord>) -> Result<Self> {
        let mut index = DisplayIndex::new();
        for r in records {
            index.insert(r)?;
        }
        Ok(index)
    }

    pub fn insert(&mut self, record: DisplayRecord) -> Result<()> {
        record.validate()?;
        let key = (record.participant_id.clone(), record.image_id.clone());
        if self.records.contains_key(&key) {
            return Err(Error::invalid(format!(
                "duplicate display record for participant {:?}, image {:?}",
                key.0, key.1
            )));
        }
        self.records.insert(key, record);
        Ok(())
    }

    /// The participant-specific record if present, else the image-wide one.
    pub fn get(&self, participant_id: &str, image_id: &str) -> Option<&DisplayRecord> {
        self.records
            .get(&(Some(participant_id.to_string()), image_id.to_string()))
            .or_else(|| self.records.get(&(None, image_id.to_string())))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &DisplayRecord> {
        self.records.values()
    }
}

pub fn parse_display_log<R: BufRead>(reader: R) -> Result<Vec<DisplayRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<display log>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: DisplayLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        let record = DisplayRecord {
            participant_id: raw.participant_id,
            image_id: raw.image_id,
            rotation: raw.rotation,
            flip: raw.flip,
            viewport: raw.viewport,
            image_size: ImageSize::new(raw.image_w, raw.image_h),
        };
        record.validate().map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

pub fn write_display_log<'a, W: Write>(
    mut writer: W,
    records: impl IntoIterator<Item = &'a DisplayRecord>,
) -> Result<()> {
    for r in records {
        let line = DisplayLine {
            participant_id: r.participant_id.clone(),
            image_id: r.image_id.clone(),
            rotation: r.rotation,
            flip: r.flip,
            viewport: r.viewport,
            image_w: r.image_size.width,
            image_h: r.image_size.height,
        };
        serde_json::to_writer(&mut writer, &line)?;
        writer
            .write_all(b"\n")
            .map_err(|e| Error::io("<display log>", e))?;
    }
    Ok(())
}

/// Parsed sequences plus the problems found along the way. Malformed lines
/// are skipped; sequences without a display record are dropped.
#[derive(Debug, Default)]
pub struct GazeLog {
    pub sequences: Vec<GazeSequence>,
    pub errors: Vec<Error>,
}

/// Group gaze lines into one sequence per (image, participant), sorted by
/// image id then participant id, points in timestamp order.
pub fn parse_gaze_log<R: BufRead>(reader: R, displays: &DisplayIndex) -> Result<GazeLog> {
    let mut groups: BTreeMap<(String, String), Vec<GazePoint>> = BTreeMap::new();
    let mut errors = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<gaze log>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_gaze_line(&line) {
            Ok((participant, image, point)) => {
                groups.entry((image, participant)).or_default().push(point)
            }
            Err(message) => errors.push(Error::Parse {
                line: i + 1,
                message,
            }),
        }
    }

    let mut sequences = Vec::with_capacity(groups.len());
    for ((image_id, participant_id), mut points) in groups {
        let Some(display) = displays.get(&participant_id, &image_id) else {
            errors.push(Error::MissingDisplayRecord {
                participant_id,
                image_id,
            });
            continue;
        };
        points.sort_by(|a, b| a.t_ms.total_cmp(&b.t_ms));
        let mut display = display.clone();
        display.participant_id = Some(participant_id.clone());
        sequences.push(GazeSequence {
            participant_id,
            image_id,
            points,
            display,
        });
    }
    Ok(GazeLog { sequences, errors })
}

pub fn write_gaze_log<'a, W: Write>(
    mut writer: W,
    sequences: impl IntoIterator<Item = &'a GazeSequence>,
) -> Result<()> {
    for seq in sequences {
        for p in &seq.points {
            let line = GazeLineOut {
                participant_id: &seq.participant_id,
                image_id: &seq.image_id,
                t_ms: p.t_ms,
                screen_x: MaybeNa(p.screen_x),
                screen_y: MaybeNa(p.screen_y),
                confidence: MaybeNa(p.confidence),
                valid: p.valid,
            };
            serde_json::to_writer(&mut writer, &line)?;
            writer
                .write_all(b"\n")
                .map_err(|e| Error::io("<gaze log>", e))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn identity_index(images: &[&str]) -> DisplayIndex {
        DisplayIndex::from_records(
            images
                .iter()
                .map(|id| DisplayRecord::identity(*id, ImageSize::square(1600))),
        )
        .unwrap()
    }

    #[test]
    fn empty_stream() {
        let log = parse_gaze_log(&b""[..], &DisplayIndex::new()).unwrap();
        assert!(log.sequences.is_empty());
        assert!(log.errors.is_empty());
    }

    #[test]
    fn groups_lines_and_sorts_by_time() {
        let text = concat!(
            r#"{"participant_id":"P1","image_id":"a","t_ms":20,"screen_x":5,"screen_y":6,"confidence":0.9,"valid":true}"#,
            "\n",
            r#"{"participant_id":"P1","image_id":"a","t_ms":3,"screen_x":1,"screen_y":2,"confidence":0.8,"valid":true}"#,
            "\n"
        );
        let log = parse_gaze_log(text.as_bytes(), &identity_index(&["a"])).unwrap();
        assert!(log.errors.is_empty());
        assert_eq!(log.sequences.len(), 1);
        let pts = &log.sequences[0].points;
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[0].t_ms, 3.0);
        assert_eq!(pts[1].screen_x, Some(5.0));
    }

    #[test]
    fn na_confidence_is_kept_but_invalid() {
        let text = r#"{"participant_id":"P1","image_id":"a","t_ms":0,"screen_x":5,"screen_y":6,"confidence":"N/A","valid":true}"#;
        let log = parse_gaze_log(text.as_bytes(), &identity_index(&["a"])).unwrap();
        let p = &log.sequences[0].points[0];
        assert!(!p.valid);
        assert_eq!(p.confidence, None);
        assert!(log.sequences[0].project(0.0).is_empty());
    }

    #[test]
    fn malformed_line_reports_position() {
        let text = concat!(
            r#"{"participant_id":"P1","image_id":"a","t_ms":0,"screen_x":5,"screen_y":6,"confidence":1,"valid":true}"#,
            "\n\nnot json\n",
            r#"{"participant_id":"P1","image_id":"a","t_ms":-1,"screen_x":5,"screen_y":6,"confidence":1,"valid":true}"#,
            "\n"
        );
        let log = parse_gaze_log(text.as_bytes(), &identity_index(&["a"])).unwrap();
        assert_eq!(log.sequences[0].points.len(), 1);
        let lines: Vec<usize> = log
            .errors
            .iter()
            .map(|e| match e {
                Error::Parse { line, .. } => *line,
                other => panic!("unexpected {other}"),
            })
            .collect();
        assert_eq!(lines, vec![3, 4]);
    }

    #[test]
    fn missing_display_record_is_sequence_error() {
        let text = r#"{"participant_id":"P1","image_id":"b","t_ms":0,"screen_x":5,"screen_y":6,"confidence":1,"valid":true}"#;
        let log = parse_gaze_log(text.as_bytes(), &identity_index(&["a"])).unwrap();
        assert!(log.sequences.is_empty());
        assert!(matches!(log.errors[0], Error::MissingDisplayRecord { .. }));
    }

    #[test]
    fn participant_specific_record_wins() {
        let mut specific = DisplayRecord::identity("a", ImageSize::square(100));
        specific.participant_id = Some("P2".into());
        specific.rotation = Rotation::R90;
        let index = DisplayIndex::from_records([
            DisplayRecord::identity("a", ImageSize::square(100)),
            specific,
        ])
        .unwrap();
        assert_eq!(index.get("P1", "a").unwrap().rotation, Rotation::R0);
        assert_eq!(index.get("P2", "a").unwrap().rotation, Rotation::R90);
    }

    #[test]
    fn display_log_rejects_bad_rotation_and_scale() {
        let bad_rot = r#"{"image_id":"a","rotation":45,"flip":"none","viewport":{"origin_x":0,"origin_y":0,"scale":1},"image_w":10,"image_h":10}"#;
        assert!(matches!(
            parse_display_log(bad_rot.as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
        let bad_scale = r#"{"image_id":"a","rotation":90,"flip":"vertical","viewport":{"origin_x":0,"origin_y":0,"scale":0},"image_w":10,"image_h":10}"#;
        assert!(parse_display_log(bad_scale.as_bytes()).is_err());
    }

    fn arb_point() -> impl Strategy<Value = GazePoint> {
        (
            0u32..100_000,
            prop::option::of(-100.0f64..2000.0),
            prop::option::of(-100.0f64..2000.0),
            prop::option::of(0.0f64..=1.0),
            any::<bool>(),
        )
            .prop_map(|(t, x, y, c, v)| GazePoint {
                t_ms: t as f64 / 3.0,
                screen_x: x,
                screen_y: y,
                confidence: c,
                valid: v && x.is_some() && y.is_some() && c.is_some(),
            })
    }

    proptest! {
        #[test]
        fn parse_serialize_parse_is_identity(
            groups in prop::collection::vec((0usize..3, 0usize..3, prop::collection::vec(arb_point(), 1..20)), 1..6),
            rot in 0usize..4,
            flip in 0usize..3,
        ) {
            let mut records = Vec::new();
            for img in 0..3 {
                records.push(DisplayRecord {
                    rotation: Rotation::ALL[rot],
                    flip: Flip::ALL[flip],
                    viewport: Viewport { origin_x: 160.0, origin_y: 0.0, scale: 0.675 },
                    ..DisplayRecord::identity(format!("img{img}"), ImageSize::new(1600, 1200))
                });
            }
            let index = DisplayIndex::from_records(records.clone()).unwrap();
            let mut text = Vec::new();
            for (p, i, pts) in &groups {
                let seq = GazeSequence {
                    participant_id: format!("P{p}"),
                    image_id: format!("img{i}"),
                    points: pts.clone(),
                    display: records[*i].clone(),
                };
                write_gaze_log(&mut text, [&seq]).unwrap();
            }
            let first = parse_gaze_log(&text[..], &index).unwrap();
            prop_assert!(first.errors.is_empty());
            let mut again = Vec::new();
            write_gaze_log(&mut again, &first.sequences).unwrap();
            let second = parse_gaze_log(&again[..], &index).unwrap();
            prop_assert_eq!(&first.sequences, &second.sequences);

            let mut disp = Vec::new();
            write_display_log(&mut disp, &records).unwrap();
            prop_assert_eq!(parse_display_log(&disp[..]).unwrap(), records);
        }
    }
}
