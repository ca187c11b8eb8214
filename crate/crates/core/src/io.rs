//! Text formats for channel matrices and confusion counts.
//!
//! Matrix CSV: one row of probabilities per input, no header. Lines
//! starting with `#` are ignored.
//!
//! Confusion CSV: optional `# key=value` metadata lines (`subject`,
//! `window_s`, `gaze_s`, `method`), a header row of class labels, then one
//! row of integer counts per true class.
//!
//! Confusion JSON: a serialized [`ConfusionRecord`] or an array of them.

use std::path::Path;

use crate::channel::ChannelMatrix;
use crate::design::balanced_matrix;
use crate::error::{Error, Result};
use crate::stats::ConfusionRecord;

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes())
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse { line, column: 0, message: e.to_string() }
}

/// Data rows with their 1-based line numbers; blank lines are skipped.
fn records(text: &str) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut out = Vec::new();
    for rec in reader(text).records() {
        let rec = rec.map_err(csv_error)?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let line = rec.position().map_or(0, |p| p.line() as usize);
        out.push((line, rec));
    }
    Ok(out)
}

fn parse_field<V: std::str::FromStr>(line: usize, column: usize, field: &str) -> Result<V> {
    field.parse().map_err(|_| Error::Parse { line, column, message: format!("cannot parse `{field}`") })
}

pub fn parse_matrix_csv(text: &str) -> Result<ChannelMatrix<f64>> {
    let rows = records(text)?;
    let Some((_, first)) = rows.first() else {
        return Err(Error::Parse { line: 1, column: 0, message: "no matrix rows".into() });
    };
    let width = first.len();
    let mut values = Vec::with_capacity(rows.len());
    for (line, rec) in &rows {
        if rec.len() != width {
            return Err(Error::Parse {
                line: *line,
                column: rec.len().min(width) + 1,
                message: format!("expected {width} columns, found {}", rec.len()),
            });
        }
        let row = rec.iter().enumerate().map(|(c, f)| parse_field(*line, c + 1, f)).collect::<Result<Vec<f64>>>()?;
        values.push(row);
    }
    ChannelMatrix::from_rows(values).map_err(|e| match e {
        Error::InvalidRow { row, reason } => {
            Error::Parse { line: rows[row].0, column: 0, message: format!("row {}: {reason}", row + 1) }
        }
        other => other,
    })
}

/// Shortest round-trip formatting, so re-parsing gives identical entries.
pub fn write_matrix_csv(p: &ChannelMatrix<f64>) -> String {
    let mut s = String::new();
    for row in p.rows() {
        let fields: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        s.push_str(&fields.join(","));
        s.push('\n');
    }
    s
}

/// Channel from a short description:
/// `bsc e`, `bec e`, `z e` (1 read as 2 with probability e),
/// `binary p12 p21`, `identity m`, `balanced m p`.
pub fn parse_inline_channel(spec: &str) -> Result<ChannelMatrix<f64>> {
    let parts: Vec<&str> = spec.split_whitespace().collect();
    let bad = |message: String| Error::Parse { line: 1, column: 0, message };
    let num = |i: usize| -> Result<f64> {
        let f = parts.get(i).ok_or_else(|| bad(format!("`{spec}`: missing argument {i}")))?;
        parse_field(1, i + 1, f)
    };
    let count = |i: usize| -> Result<usize> {
        let f = parts.get(i).ok_or_else(|| bad(format!("`{spec}`: missing argument {i}")))?;
        parse_field(1, i + 1, f)
    };
    let arity = |n: usize| {
        if parts.len() == n + 1 {
            Ok(())
        } else {
            Err(bad(format!("`{}` takes {n} argument(s)", parts[0])))
        }
    };
    match parts.first().copied() {
        Some("bsc") => arity(1).and_then(|_| ChannelMatrix::bsc(num(1)?)),
        Some("bec") => arity(1).and_then(|_| ChannelMatrix::bec(num(1)?)),
        Some("z") => arity(1).and_then(|_| ChannelMatrix::binary(num(1)?, 0.0)),
        Some("binary") => arity(2).and_then(|_| ChannelMatrix::binary(num(1)?, num(2)?)),
        Some("identity") => arity(1).and_then(|_| ChannelMatrix::identity(count(1)?)),
        Some("balanced") => arity(2).and_then(|_| balanced_matrix(&[num(2)?], count(1)?)),
        Some(k) => Err(bad(format!("unknown channel kind `{k}`"))),
        None => Err(bad("empty channel description".into())),
    }
}

fn metadata(text: &str, rec: &mut ConfusionRecord) -> Result<()> {
    for (n, raw) in text.lines().enumerate() {
        let Some(body) = raw.trim().strip_prefix('#') else { continue };
        let Some((k, v)) = body.split_once('=') else { continue };
        let (k, v) = (k.trim(), v.trim());
        let line = n + 1;
        match k {
            "subject" => rec.subject = Some(v.to_string()),
            "method" => rec.method = Some(v.to_string()),
            "window_s" => rec.window_s = Some(parse_field(line, 0, v)?),
            "gaze_s" => rec.gaze_s = Some(parse_field(line, 0, v)?),
            _ => {}
        }
    }
    Ok(())
}

pub fn parse_confusion_csv(text: &str) -> Result<ConfusionRecord> {
    let rows = records(text)?;
    let Some(((_, header), body)) = rows.split_first() else {
        return Err(Error::Parse { line: 1, column: 0, message: "missing header row".into() });
    };
    let m = header.len();
    if body.len() != m {
        let line = body.last().map_or(rows[0].0, |r| r.0);
        return Err(Error::Parse { line, column: 0, message: format!("{m} class labels but {} count rows", body.len()) });
    }
    let mut counts = Vec::with_capacity(m);
    for (line, rec) in body {
        if rec.len() != m {
            return Err(Error::Parse {
                line: *line,
                column: rec.len().min(m) + 1,
                message: format!("expected {m} counts, found {}", rec.len()),
            });
        }
        counts.push(rec.iter().enumerate().map(|(c, f)| parse_field(*line, c + 1, f)).collect::<Result<Vec<u64>>>()?);
    }
    let mut rec = ConfusionRecord::new(counts)?;
    metadata(text, &mut rec)?;
    Ok(rec)
}

pub fn write_confusion_csv(rec: &ConfusionRecord) -> String {
    let mut s = String::new();
    if let Some(v) = &rec.subject {
        s.push_str(&format!("# subject={v}\n"));
    }
    if let Some(v) = rec.window_s {
        s.push_str(&format!("# window_s={v:?}\n"));
    }
    if let Some(v) = rec.gaze_s {
        s.push_str(&format!("# gaze_s={v:?}\n"));
    }
    if let Some(v) = &rec.method {
        s.push_str(&format!("# method={v}\n"));
    }
    let labels: Vec<String> = (0..rec.classes()).map(|i| format!("c{i}")).collect();
    s.push_str(&labels.join(","));
    s.push('\n');
    for row in rec.counts() {
        let f: Vec<String> = row.iter().map(u64::to_string).collect();
        s.push_str(&f.join(","));
        s.push('\n');
    }
    s
}

fn json_error(e: serde_json::Error) -> Error {
    Error::Parse { line: e.line(), column: e.column(), message: e.to_string() }
}

/// One record or an array of records.
pub fn parse_confusion_json(text: &str) -> Result<Vec<ConfusionRecord>> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(json_error)?;
    let recs: Vec<ConfusionRecord> = if value.is_array() {
        serde_json::from_value(value)
    } else {
        serde_json::from_value(value).map(|r| vec![r])
    }
    .map_err(|e| Error::Parse { line: 0, column: 0, message: e.to_string() })?;
    for r in &recs {
        r.validate()?;
    }
    Ok(recs)
}

pub fn write_confusion_json(recs: &[ConfusionRecord]) -> String {
    serde_json::to_string_pretty(recs).expect("confusion records serialize")
}

/// Reads `.json` as JSON and anything else as confusion CSV.
pub fn load_confusions(path: &Path) -> Result<Vec<ConfusionRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if json {
        parse_confusion_json(&text)
    } else {
        parse_confusion_csv(&text).map(|r| vec![r])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capacity::{blahut_arimoto, BaConfig};
    use proptest::prelude::*;

    #[test]
    fn matrix_csv() {
        let p = parse_matrix_csv("# identity\n1,0,0,0\n0,1,0,0\n\n0, 0, 1, 0\n0,0,0,1\n").unwrap();
        assert_eq!(p, ChannelMatrix::identity(4).unwrap());
        assert!((blahut_arimoto(&p, &BaConfig::default()).unwrap().capacity - 2.0).abs() < 1e-9);

        let err = parse_matrix_csv("0.5,0.5\n0.6,0.6\n").unwrap_err();
        let Error::Parse { line, message, .. } = err else { panic!("{err:?}") };
        assert_eq!(line, 2);
        assert!(message.contains("row 2"), "{message}");

        let err = parse_matrix_csv("0.5,0.5\n0.5,x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, column: 2, .. }), "{err:?}");
        let err = parse_matrix_csv("0.5,0.5\n1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
        assert!(parse_matrix_csv("").is_err());
    }

    #[test]
    fn inline() {
        let c = |s: &str| blahut_arimoto(&parse_inline_channel(s).unwrap(), &BaConfig::default()).unwrap().capacity;
        assert!((c("bsc 0.1") - 0.531004).abs() < 1e-5);
        assert!((c("bec 0.3") - 0.7).abs() < 1e-6);
        assert!((c("z 0.5") - 0.321928).abs() < 1e-6);
        assert!((c("identity 3") - 3f64.log2()).abs() < 1e-9);
        assert_eq!(parse_inline_channel("binary 0.1 0.2").unwrap().get(1, 0), 0.2);
        assert!((parse_inline_channel("balanced 3 0.8").unwrap().get(0, 1) - 0.1).abs() < 1e-15);
        for bad in ["", "bsc", "bsc 0.1 0.2", "bsc x", "foo 1", "bsc 1.5"] {
            assert!(parse_inline_channel(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn confusion_csv_roundtrip() {
        let mut r = ConfusionRecord::new(vec![vec![8, 1, 1], vec![0, 9, 1], vec![2, 0, 8]]).unwrap().with_subject("s03").with_window(0.7);
        r.gaze_s = Some(0.5);
        r.method = Some("etrca".into());
        let text = write_confusion_csv(&r);
        assert!(text.starts_with("# subject=s03\n"));
        assert_eq!(parse_confusion_csv(&text).unwrap(), r);
        let json = write_confusion_json(std::slice::from_ref(&r));
        assert_eq!(parse_confusion_json(&json).unwrap(), vec![r.clone()]);
        let single = serde_json::to_string(&r).unwrap();
        assert_eq!(parse_confusion_json(&single).unwrap(), vec![r]);
    }

    #[test]
    fn confusion_csv_errors() {
        assert!(matches!(parse_confusion_csv("a,b\n1,2\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse_confusion_csv("a,b\n1,2\n3,-1\n"), Err(Error::Parse { line: 3, column: 2, .. })));
        assert!(matches!(parse_confusion_csv("a,b\n1,2\n3\n"), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(parse_confusion_csv("# window_s=abc\na,b\n1,0\n0,1\n"), Err(Error::Parse { line: 1, .. })));
        assert!(parse_confusion_csv("").is_err());
        assert!(parse_confusion_json("{\"counts\": [[0,0],[0,0]]}").is_err());
        assert!(matches!(parse_confusion_json("[1,"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(load_confusions(Path::new("/nonexistent/x.csv")), Err(Error::Io(_))));
    }

    proptest! {
        #[test]
        fn matrix_roundtrip(rows in prop::collection::vec(prop::collection::vec(0.001f64..1.0, 4), 2..6)) {
            let rows: Vec<Vec<f64>> = rows.into_iter().map(|r| { let s: f64 = r.iter().sum(); r.into_iter().map(|v| v / s).collect() }).collect();
            let p = ChannelMatrix::from_rows(rows).unwrap();
            prop_assert_eq!(parse_matrix_csv(&write_matrix_csv(&p)).unwrap(), p);
        }

        #[test]
        fn confusion_roundtrip(rows in prop::collection::vec(prop::collection::vec(0u64..1000, 5), 5), w in 0.1f64..3.0) {
            prop_assume!(rows.iter().flatten().any(|&c| c > 0));
            let r = ConfusionRecord::new(rows).unwrap().with_window(w);
            prop_assert_eq!(parse_confusion_csv(&write_confusion_csv(&r)).unwrap(), r);
        }
    }
}
