//! CSV, PNG and model files.
//!
//! Every CSV writer takes a list of comment lines that are written first,
//! each prefixed with `# `. Readers skip lines starting with `#`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::consensus::ConsensusLabel;
use crate::detect::{Detection, ReferenceClassifier};
use crate::eval::{PointsByImage, PrPoint, SweepTable};
use crate::gaze::ImagePoint;
use crate::{Error, Result};

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_comments<W: Write>(w: &mut W, comments: &[String]) -> std::io::Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    Ok(())
}

fn writer<W: Write>(mut w: W, comments: &[String]) -> Result<csv::Writer<W>> {
    write_comments(&mut w, comments).map_err(|e| Error::io("<output>", e))?;
    Ok(csv::Writer::from_writer(w))
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(r)
}

fn write_rows<W: Write, T: Serialize>(w: W, comments: &[String], rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut out = writer(w, comments)?;
    for row in rows {
        out.serialize(row)?;
    }
    out.flush().map_err(|e| Error::io("<output>", e))?;
    Ok(())
}

fn read_rows<R: Read, T: for<'de> Deserialize<'de>>(r: R) -> Result<Vec<T>> {
    reader(r)
        .deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

/// `image_id,x,y,area,peak`
pub fn write_labels<W: Write>(w: W, labels: &[ConsensusLabel], comments: &[String]) -> Result<()> {
    write_rows(w, comments, labels)
}

pub fn read_labels<R: Read>(r: R) -> Result<Vec<ConsensusLabel>> {
    read_rows(r)
}

#[derive(Serialize, Deserialize)]
struct PointRow {
    image_id: String,
    x: f64,
    y: f64,
}

/// `image_id,x,y`, one row per point, images in key order.
pub fn write_points<W: Write>(w: W, points: &PointsByImage, comments: &[String]) -> Result<()> {
    write_rows(
        w,
        comments,
        points.iter().flat_map(|(id, pts)| {
            pts.iter().map(move |p| PointRow {
                image_id: id.clone(),
                x: p.x,
                y: p.y,
            })
        }),
    )
}

/// Reads any CSV with `image_id`, `x` and `y` columns; other columns are
/// ignored.
pub fn read_points<R: Read>(r: R) -> Result<PointsByImage> {
    let mut out = PointsByImage::new();
    for row in read_rows::<_, PointRow>(r)? {
        out.entry(row.image_id)
            .or_default()
            .push(ImagePoint::new(row.x, row.y));
    }
    Ok(out)
}

/// `image_id,x,y,probability`
pub fn write_detections<W: Write>(w: W, detections: &[Detection], comments: &[String]) -> Result<()> {
    write_rows(w, comments, detections)
}

pub fn read_detections<R: Read>(r: R) -> Result<Vec<Detection>> {
    let rows: Vec<Detection> = read_rows(r)?;
    if let Some(d) = rows.iter().find(|d| !(0.0..=1.0).contains(&d.probability)) {
        return Err(Error::invalid(format!(
            "detection probability {} outside [0, 1]",
            d.probability
        )));
    }
    Ok(rows)
}

#[derive(Serialize)]
struct SweepCsvRow {
    k: usize,
    run: usize,
    precision: f64,
    recall: f64,
    f1: f64,
}

/// `k,run,precision,recall,f1`. Failed runs are written as `NaN`.
pub fn write_sweep<W: Write>(w: W, table: &SweepTable, comments: &[String]) -> Result<()> {
    write_rows(
        w,
        comments,
        table.rows.iter().map(|r| {
            let (precision, recall, f1) = match &r.outcome {
                Ok(m) => (m.precision, m.recall, m.f1),
                Err(_) => (f64::NAN, f64::NAN, f64::NAN),
            };
            SweepCsvRow {
                k: r.k,
                run: r.run,
                precision,
                recall,
                f1,
            }
        }),
    )
}

/// `k,metric,mean,std,min,q1,median,q3,max`, one row per k and metric.
pub fn write_sweep_summary<W: Write>(w: W, table: &SweepTable, comments: &[String]) -> Result<()> {
    let mut out = writer(w, comments)?;
    out.write_record(["k", "metric", "mean", "std", "min", "q1", "median", "q3", "max"])?;
    for s in table.summary() {
        for (metric, stats) in [("precision", s.precision), ("recall", s.recall), ("f1", s.f1)] {
            let Some(st) = stats else { continue };
            let mut record = vec![s.k.to_string(), metric.to_string()];
            record.extend(
                [st.mean, st.std, st.min, st.q1, st.median, st.q3, st.max]
                    .iter()
                    .map(|v| v.to_string()),
            );
            out.write_record(&record)?;
        }
    }
    out.flush().map_err(|e| Error::io("<output>", e))?;
    Ok(())
}

/// `threshold,precision,recall`
pub fn write_pr_curve<W: Write>(w: W, curve: &[PrPoint], comments: &[String]) -> Result<()> {
    write_rows(w, comments, curve)
}

pub fn read_pr_curve<R: Read>(r: R) -> Result<Vec<PrPoint>> {
    read_rows(r)
}

pub fn read_png(path: &Path) -> Result<RgbImage> {
    let reader = image::ImageReader::with_format(open(path)?, image::ImageFormat::Png);
    Ok(reader.decode()?.to_rgb8())
}

pub fn write_png(path: &Path, image: &RgbImage) -> Result<()> {
    let mut w = create(path)?;
    image.write_to(&mut w, image::ImageFormat::Png)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_classifier(path: &Path) -> Result<ReferenceClassifier> {
    let mut text = String::new();
    open(path)?
        .read_to_string(&mut text)
        .map_err(|e| Error::io(path, e))?;
    ReferenceClassifier::from_text(&text)
}

pub fn write_classifier(path: &Path, classifier: &ReferenceClassifier) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(classifier.to_text().as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{MetricsReport, SweepRow};

    #[test]
    fn labels_round_trip_with_comments() {
        let labels = vec![
            ConsensusLabel {
                image_id: "a".into(),
                x: 1.5,
                y: 2.25,
                area: 400,
                peak: 0.125,
            },
            ConsensusLabel {
                image_id: "b,c".into(),
                x: 0.1,
                y: 1e-9,
                area: 3,
                peak: 7.0,
            },
        ];
        let mut buf = Vec::new();
        write_labels(&mut buf, &labels, &["gazelabel seed=1".into()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# gazelabel seed=1\nimage_id,x,y,area,peak\n"));
        assert_eq!(read_labels(&buf[..]).unwrap(), labels);
    }

    #[test]
    fn points_read_from_wider_files() {
        let text = "image_id,x,y,probability\na,1,2,0.5\nb,3,4,0.25\na,5,6,1\n";
        let pts = read_points(text.as_bytes()).unwrap();
        assert_eq!(pts["a"], vec![ImagePoint::new(1.0, 2.0), ImagePoint::new(5.0, 6.0)]);
        assert_eq!(pts["b"].len(), 1);
        let mut buf = Vec::new();
        write_points(&mut buf, &pts, &[]).unwrap();
        assert_eq!(read_points(&buf[..]).unwrap(), pts);
        assert!(read_points("image_id,x\na,1\n".as_bytes()).is_err());
    }

    #[test]
    fn detections_reject_bad_probability() {
        let ok = "image_id,x,y,probability\na,1,2,0.5\n";
        assert_eq!(read_detections(ok.as_bytes()).unwrap()[0].probability, 0.5);
        let bad = "image_id,x,y,probability\na,1,2,1.5\n";
        assert!(read_detections(bad.as_bytes()).is_err());
    }

    #[test]
    fn sweep_files() {
        let table = SweepTable {
            rows: vec![
                SweepRow {
                    k: 3,
                    run: 0,
                    participants: vec![],
                    outcome: Ok(MetricsReport::from_counts(2, 1, 0)),
                },
                SweepRow {
                    k: 3,
                    run: 1,
                    participants: vec![],
                    outcome: Err("boom".into()),
                },
            ],
            radius: 30.0,
            seed: 0,
        };
        let mut buf = Vec::new();
        write_sweep(&mut buf, &table, &[]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "k,run,precision,recall,f1");
        assert!(lines[1].starts_with("3,0,0.666"));
        assert_eq!(lines[2], "3,1,NaN,NaN,NaN");

        let mut buf = Vec::new();
        write_sweep_summary(&mut buf, &table, &[]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "k,metric,mean,std,min,q1,median,q3,max");
        assert_eq!(lines.len(), 4);
        assert!(lines[2].starts_with("3,recall,1,"));
    }

    #[test]
    fn png_and_classifier_files() {
        let dir = tempfile::tempdir().unwrap();
        let img = RgbImage::from_fn(5, 4, |x, y| image::Rgb([x as u8, y as u8, 7]));
        let p = dir.path().join("a.png");
        write_png(&p, &img).unwrap();
        assert_eq!(read_png(&p).unwrap(), img);
        let c = ReferenceClassifier::default();
        let q = dir.path().join("model.txt");
        write_classifier(&q, &c).unwrap();
        assert_eq!(read_classifier(&q).unwrap().weights(), c.weights());
        assert!(matches!(read_png(&dir.path().join("missing.png")), Err(Error::Io { .. })));
    }
}
