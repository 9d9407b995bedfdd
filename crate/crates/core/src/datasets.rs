//! Bundled example data.
//!
//! Telomerase is complete (10 studies). Only the first six rows of Scheidler
//! and Catheter are bundled; they exercise ingestion and naming, not
//! published estimates.

use alloc::vec::Vec;

use crate::data::{Dataset, StudyRecord};

pub const BUILTIN_NAMES: [&str; 3] = ["Telomerase", "Scheidler", "Catheter"];

pub fn by_name(name: &str) -> Option<Dataset> {
    match name.to_ascii_lowercase().as_str() {
        "telomerase" => Some(telomerase()),
        "scheidler" => Some(scheidler_head()),
        "catheter" => Some(catheter_head()),
        _ => None,
    }
}

pub fn telomerase() -> Dataset {
    const ROWS: [(&str, u64, u64, u64, u64); 10] = [
        ("Ito_1998", 25, 1, 25, 8),
        ("Rahat_1998", 17, 3, 11, 4),
        ("Kavaler_1998", 88, 16, 31, 16),
        ("Yoshida_1997", 16, 3, 80, 10),
        ("Ramakumar_1999", 40, 1, 137, 17),
        ("Landman_1998", 38, 6, 24, 9),
        ("Kinoshita_1997", 23, 0, 12, 19),
        ("Gelmini_2000", 27, 2, 18, 6),
        ("Cheng_2000", 14, 3, 29, 3),
        ("Cassel_2001", 37, 22, 7, 7),
    ];
    let studies = ROWS
        .iter()
        .map(|&(name, tp, fp, tn, fn_)| StudyRecord::new(name, tp, fp, tn, fn_))
        .collect();
    Dataset::new(studies, None).expect("bundled data is valid")
}

/// First six rows of the Scheidler imaging data (all CT).
pub fn scheidler_head() -> Dataset {
    const ROWS: [(&str, u64, u64, u64, u64); 6] = [
        ("Grumbine_1981", 0, 1, 17, 6),
        ("Walsh_1981", 12, 3, 7, 3),
        ("Brenner_1982", 4, 1, 13, 2),
        ("Villasanta_1983", 10, 4, 25, 3),
        ("vanEngelshoven_1984", 3, 1, 12, 4),
        ("Bandy_1985", 9, 3, 29, 3),
    ];
    let studies: Vec<StudyRecord> = ROWS
        .iter()
        .map(|&(name, tp, fp, tn, fn_)| StudyRecord::new(name, tp, fp, tn, fn_).with_modality("CT"))
        .collect();
    Dataset::new(studies, Some("modality".into())).expect("bundled data is valid")
}

/// First six rows of the Catheter segment culture data.
pub fn catheter_head() -> Dataset {
    const ROWS: [(&str, f64, u64, u64, u64, u64); 6] = [
        ("Cooper_1985", 3.6, 12, 29, 289, 0),
        ("Gutierrez_1992", 12.2, 10, 14, 72, 2),
        ("Cercenado_1990", 12.9, 17, 36, 85, 1),
        ("Rello_1991", 13.2, 13, 18, 67, 0),
        ("Maki_1977", 1.6, 4, 21, 225, 0),
        ("Aufwerber_1991", 3.1, 15, 122, 403, 2),
    ];
    let studies: Vec<StudyRecord> = ROWS
        .iter()
        .map(|&(name, prev, tp, fp, tn, fn_)| {
            StudyRecord::new(name, tp, fp, tn, fn_)
                .with_modality("Semi-quantitative")
                .with_covariate("prevalence", prev)
        })
        .collect();
    Dataset::new(studies, Some("type".into())).expect("bundled data is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn telomerase_first_row() {
        let d = telomerase();
        let ito = &d.studies()[0];
        assert_eq!(
            (ito.studyname.as_str(), ito.tp, ito.fp, ito.tn, ito.fn_),
            ("Ito_1998", 25, 1, 25, 8)
        );
        assert!((ito.observed_sensitivity() - 25.0 / 33.0).abs() < 1e-15);
        assert_eq!(d.len(), 10);
    }

    #[test]
    fn lookup_is_case_insensitive() {
        assert!(by_name("TELOMERASE").is_some());
        assert_eq!(by_name("catheter").unwrap().modality_column(), Some("type"));
        assert!(by_name("nope").is_none());
    }
}
