#![no_main]

use adaptive_conformal::data::LabeledDataset;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(ds) = LabeledDataset::from_csv_reader(data) {
        assert!(ds.labels().iter().all(|&y| y < ds.num_classes()));
        assert_eq!(ds.features().nrows(), ds.len());
        let mut out = Vec::new();
        ds.write_csv(&mut out).expect("writing to memory");
        let again = LabeledDataset::from_csv_reader(out.as_slice()).expect("own output parses");
        assert_eq!(again.labels(), ds.labels());
    }
});
