//! Persistence and input parsing: JSON reports, the flat CSV tables, and
//! point lists read from JSON.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{close_loop, PathIndex, Point2, PolyPath, PunctureSet};
use crate::homotopy::word_of_loop;
use crate::model::{classify, word_statistics, ModelError, SimReport, StatRow};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0}")]
    Input(String),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PointRepr {
    Pair([f64; 2]),
    Named { x: f64, y: f64 },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PointsDoc {
    List(Vec<PointRepr>),
    Wrapped { vertices: Vec<PointRepr> },
    Punctures { punctures: Vec<PointRepr> },
}

/// Reads a point list: `[[x, y], ...]`, `[{"x": .., "y": ..}, ...]`, or one
/// of those under a `vertices` or `punctures` key.
pub fn parse_points(json: &str) -> Result<Vec<Point2>, HarnessError> {
    let doc: PointsDoc = serde_json::from_str(json)?;
    let list = match doc {
        PointsDoc::List(l)
        | PointsDoc::Wrapped { vertices: l }
        | PointsDoc::Punctures { punctures: l } => l,
    };
    Ok(list
        .into_iter()
        .map(|p| match p {
            PointRepr::Pair([x, y]) | PointRepr::Named { x, y } => Point2::new(x, y),
        })
        .collect())
}

pub fn read_points(path: &Path) -> Result<Vec<Point2>, HarnessError> {
    parse_points(&fs::read_to_string(path)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

pub const WINDINGS_HEADER: [&str; 10] = [
    "puncture_id",
    "x",
    "y",
    "theta",
    "theta_half",
    "beta1",
    "beta2",
    "S2",
    "S5",
    "class",
];

/// One row per puncture: winding of the closed-up path, half-turn count of
/// the open path, and the exponent statistics of the loop's word.
pub fn windings_table(
    path: &PolyPath,
    ps: &PunctureSet,
    k: f64,
    epsilon: f64,
) -> Result<Vec<StatRow>, HarnessError> {
    if path.is_closed() {
        return Err(HarnessError::Input("expected an open path".into()));
    }
    let open = path;
    let lp = close_loop(open).map_err(ModelError::from)?;
    let word = word_of_loop(&lp, ps).map_err(ModelError::from)?;
    let index = PathIndex::new(open);
    let stats = word_statistics(&word, ps, open, k, epsilon)?;
    let mut present = stats.rows.into_iter().peekable();
    let mut out = Vec::with_capacity(ps.len());
    for p in ps.punctures() {
        match present.peek() {
            Some(r) if r.puncture_id == p.id => out.push(present.next().unwrap()),
            _ => out.push(StatRow {
                puncture_id: p.id,
                x: p.point.x,
                y: p.point.y,
                theta: 0,
                theta_half: index.half_turn_count(p.point).map_err(ModelError::from)?,
                alpha_l1: 0,
                beta1: 0,
                beta2: 0,
                s2: 0,
                s5: 0,
                class: classify(0, 0, k, epsilon),
            }),
        }
    }
    Ok(out)
}

pub fn write_windings_csv<W: Write>(w: W, rows: &[StatRow]) -> Result<(), HarnessError> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(WINDINGS_HEADER)?;
    for r in rows {
        wr.write_record([
            r.puncture_id.to_string(),
            r.x.to_string(),
            r.y.to_string(),
            r.theta.to_string(),
            r.theta_half.to_string(),
            r.beta1.to_string(),
            r.beta2.to_string(),
            r.s2.to_string(),
            r.s5.to_string(),
            r.class.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

/// Header of the holonomy table for `class_dim` class coordinates.
pub fn holonomy_header(class_dim: usize) -> Vec<String> {
    let mut h = vec!["replica".to_string()];
    h.extend((0..class_dim).map(|j| format!("class_coord_{j}")));
    h.extend((0..class_dim).map(|j| format!("simpler_class_coord_{j}")));
    for f in ["e_r", "f_r", "num_punctures", "delta", "retries"] {
        h.push(f.to_string());
    }
    h
}

pub fn write_holonomy_csv<W: Write>(w: W, report: &SimReport) -> Result<(), HarnessError> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(holonomy_header(report.config.group.class_dim()))?;
    for r in &report.replicas {
        let mut rec = vec![r.replica.to_string()];
        rec.extend(r.class_coord.iter().map(f64::to_string));
        rec.extend(r.simpler_class_coord.iter().map(f64::to_string));
        rec.push(r.diagnostics.e_r.to_string());
        rec.push(r.diagnostics.f_r.to_string());
        rec.push(r.diagnostics.num_punctures.to_string());
        rec.push(r.diagnostics.delta.to_string());
        rec.push(r.retries.to_string());
        wr.write_record(rec)?;
    }
    wr.flush()?;
    Ok(())
}

/// Writes one column of reals with the given header.
pub fn write_column_csv<W: Write>(
    w: W,
    header: &[&str],
    rows: &[Vec<f64>],
) -> Result<(), HarnessError> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(header)?;
    for r in rows {
        wr.write_record(r.iter().map(f64::to_string))?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liegroup::GroupKind;
    use crate::model::{run_experiment, ModelConfig};

    #[test]
    fn point_formats() {
        let a = parse_points("[[1, 2], [3.5, -1]]").unwrap();
        let b = parse_points(r#"{"vertices": [{"x": 1, "y": 2}, {"x": 3.5, "y": -1}]}"#).unwrap();
        let c = parse_points(r#"{"punctures": [[1, 2], [3.5, -1]]}"#).unwrap();
        assert_eq!(a, vec![Point2::new(1.0, 2.0), Point2::new(3.5, -1.0)]);
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert!(parse_points("[[1]]").is_err());
    }

    #[test]
    fn windings_csv_schema() {
        let path = PolyPath::open(vec![
            Point2::new(0.0, 0.0),
            Point2::new(2.0, -1.0),
            Point2::new(2.0, 1.0),
            Point2::new(0.5, 0.9),
        ])
        .unwrap();
        let ps = PunctureSet::new(vec![Point2::new(1.5, 0.1), Point2::new(-3.0, 0.4)]).unwrap();
        let rows = windings_table(&path, &ps, 100.0, 0.04).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].theta, 1);
        assert_eq!(rows[1].theta, 0);
        assert_eq!(rows[1].theta_half, 1);
        let mut buf = Vec::new();
        write_windings_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "puncture_id,x,y,theta,theta_half,beta1,beta2,S2,S5,class"
        );
        assert!(lines.next().unwrap().ends_with(",P3"));
    }

    #[test]
    fn holonomy_csv_rows() {
        let cfg = ModelConfig::new(GroupKind::Torus(2), 10.0, 50, 3, 1);
        let rep = run_experiment(&cfg).unwrap();
        let mut buf = Vec::new();
        write_holonomy_csv(&mut buf, &rep).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("replica,class_coord_0,class_coord_1,simpler_class_coord_0"));
        assert_eq!(lines[1].split(',').count(), 10);
    }
}
