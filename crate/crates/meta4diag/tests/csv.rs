use meta4diag::csv_io::{parse_dataset, write_dataset, IngestOptions};
use meta4diag::engine::data::{Dataset, StudyRecord};
use meta4diag::engine::datasets;
use proptest::prelude::*;

fn round_trip(d: &Dataset) -> Dataset {
    let opts = IngestOptions { modality_column: d.modality_column().map(str::to_owned) };
    parse_dataset(&write_dataset(d), &opts).unwrap()
}

#[test]
fn bundled_datasets_survive_a_round_trip() {
    for name in datasets::BUILTIN_NAMES {
        let d = datasets::by_name(name).unwrap();
        assert_eq!(round_trip(&d), d, "{name}");
    }
}

#[test]
fn malformed_tables_are_rejected() {
    let opts = IngestOptions::default();
    let cases = [
        ("TP,FP,TN\n1,2,3\n", "missing mandatory column FN"),
        ("TP,FP,TN,FN\n1,-2,3,4\n", "nonnegative"),
        ("TP,FP,TN,FN\n1,2.5,3,4\n", "not an integer"),
        ("study,TP,FP,TN,FN\na,1,2,3,4\na,1,2,3,4\n", "duplicate study name"),
        ("TP,FP,TN,FN,age\n1,2,3,4,old\n", "not a number"),
    ];
    for (text, message) in cases {
        let err = parse_dataset(text, &opts).unwrap_err();
        assert!(err.to_string().contains(message), "{text}: {err}");
        assert!(err.is_validation());
    }
}

#[test]
fn headers_are_matched_without_case_and_names_are_generated() {
    let d = parse_dataset("tp,Fp,TN,fn\n5,1,9,2\n3,0,7,1\n", &IngestOptions::default()).unwrap();
    let names: Vec<&str> = d.studies().iter().map(|s| s.studyname.as_str()).collect();
    assert_eq!(names, ["study_1", "study_2"]);
    assert_eq!(d.studies()[1].tn, 7);
}

fn arb_dataset() -> impl Strategy<Value = Dataset> {
    let row = (0u64..500, 0u64..500, 0u64..500, 0u64..500, 0usize..3, -1e3f64..1e3);
    (prop::collection::vec(row, 1..12), any::<bool>(), any::<bool>()).prop_map(|(rows, modality, covariate)| {
        let studies = rows
            .into_iter()
            .enumerate()
            .map(|(i, (tp, fp, tn, fn_, level, x))| {
                let mut s = StudyRecord::new(format!("s{i}"), tp, fp, tn, fn_);
                if modality {
                    s = s.with_modality(["CT", "MRI", "Semi-quantitative"][level]);
                }
                if covariate {
                    s = s.with_covariate("prevalence", x);
                }
                s
            })
            .collect();
        Dataset::new(studies, modality.then(|| "type".to_owned())).unwrap()
    })
}

proptest! {
    #[test]
    fn written_tables_parse_back_unchanged(d in arb_dataset()) {
        prop_assert_eq!(round_trip(&d), d);
    }
}
