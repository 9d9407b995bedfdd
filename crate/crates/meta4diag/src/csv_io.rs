//! CSV ingestion and export of study tables.

use meta4diag_core::data::{Dataset, StudyRecord};

use crate::{Error, Result};

const NAME_COLUMNS: [&str; 3] = ["studynames", "studyname", "study"];
const COUNT_COLUMNS: [&str; 4] = ["TP", "FP", "TN", "FN"];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestOptions {
    /// Column holding the categorical modality label.
    pub modality_column: Option<String>,
}

fn parse_count(value: &str, column: &str, row: usize) -> Result<u64> {
    let v: i64 = value
        .trim()
        .parse()
        .map_err(|_| Error::input(format!("row {row}: {column} value '{value}' is not an integer")))?;
    u64::try_from(v).map_err(|_| Error::input(format!("row {row}: {column} must be nonnegative, got {v}")))
}

/// Parse a comma-separated study table with a header row.
///
/// `TP`, `FP`, `TN`, `FN` and the study name column are matched ignoring
/// case. Missing study names become `study_1 … study_n`. Every other
/// column is a continuous covariate unless it is the modality column.
pub fn parse_dataset(text: &str, opts: &IngestOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::input(format!("cannot read header: {e}")))?
        .iter()
        .map(str::to_owned)
        .collect();
    let find = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let mut counts = [0usize; 4];
    for (k, c) in COUNT_COLUMNS.iter().enumerate() {
        counts[k] = find(c).ok_or_else(|| Error::input(format!("missing mandatory column {c}")))?;
    }
    let name_col = NAME_COLUMNS.iter().find_map(|n| find(n));
    let modality_col = match &opts.modality_column {
        Some(m) => Some(find(m).ok_or_else(|| Error::input(format!("modality column '{m}' absent")))?),
        None => None,
    };
    let covariate_cols: Vec<usize> = (0..headers.len())
        .filter(|c| !counts.contains(c) && Some(*c) != name_col && Some(*c) != modality_col)
        .collect();
    let mut studies = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::input(format!("row {row}: {e}")))?;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let name = match name_col {
            Some(c) if !field(c).is_empty() => field(c).to_owned(),
            _ => format!("study_{row}"),
        };
        let mut s = StudyRecord::new(
            name,
            parse_count(field(counts[0]), "TP", row)?,
            parse_count(field(counts[1]), "FP", row)?,
            parse_count(field(counts[2]), "TN", row)?,
            parse_count(field(counts[3]), "FN", row)?,
        );
        if let Some(c) = modality_col {
            if field(c).is_empty() {
                return Err(Error::input(format!("row {row}: missing modality label")));
            }
            s = s.with_modality(field(c));
        }
        for &c in &covariate_cols {
            let v: f64 = field(c).parse().map_err(|_| {
                Error::input(format!("row {row}: covariate {} value '{}' is not a number", headers[c], field(c)))
            })?;
            s = s.with_covariate(headers[c].clone(), v);
        }
        studies.push(s);
    }
    let modality = modality_col.map(|c| headers[c].clone());
    Ok(Dataset::new(studies, modality)?)
}

/// Write a dataset as CSV that [`parse_dataset`] reads back unchanged.
pub fn write_dataset(d: &Dataset) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["studynames".to_owned()];
    header.extend(COUNT_COLUMNS.iter().map(|s| s.to_string()));
    if let Some(m) = d.modality_column() {
        header.push(m.to_owned());
    }
    header.extend(d.covariate_names().iter().cloned());
    w.write_record(&header).expect("in-memory write");
    for s in d.studies() {
        let mut row = vec![
            s.studyname.clone(),
            s.tp.to_string(),
            s.fp.to_string(),
            s.tn.to_string(),
            s.fn_.to_string(),
        ];
        if d.modality_column().is_some() {
            row.push(s.modality.clone().unwrap_or_default());
        }
        for name in d.covariate_names() {
            row.push(s.covariate(name).map(|v| v.to_string()).unwrap_or_default());
        }
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 output")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_generated_when_absent() {
        let d = parse_dataset("tp,fp,tn,fn\n1,2,3,4\n5,6,7,8\n9,1,2,3\n", &IngestOptions::default()).unwrap();
        let names: Vec<_> = d.studies().iter().map(|s| s.studyname.as_str()).collect();
        assert_eq!(names, ["study_1", "study_2", "study_3"]);
    }

    #[test]
    fn rejects_bad_rows() {
        let o = IngestOptions::default();
        assert!(parse_dataset("TP,FP,TN,FN\n-1,2,3,4\n", &o).is_err());
        assert!(parse_dataset("TP,FP,TN,FN\n1.5,2,3,4\n", &o).is_err());
        assert!(parse_dataset("TP,FP,TN,FN\n1,2,3\n", &o).is_err());
        assert!(parse_dataset("TP,FP,TN\n1,2,3\n", &o).is_err());
        assert!(parse_dataset("studynames,TP,FP,TN,FN\na,1,2,3,4\na,1,2,3,4\n", &o).is_err());
    }
}
