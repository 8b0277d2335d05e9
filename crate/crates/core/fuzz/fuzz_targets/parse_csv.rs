#![no_main]

use distinction_core::data::{parse_csv, LabelColumn};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    for label in [LabelColumn::Last, LabelColumn::Index(0), LabelColumn::Name("target".into())] {
        if let Ok(ds) = parse_csv(data, "fuzz", &label) {
            assert_eq!(ds.x.len(), ds.y.len());
            assert!(ds.y.iter().all(|&y| y < ds.n_classes()));
            assert!(ds.x.iter().flatten().all(|v| v.is_finite()));
        }
    }
});
