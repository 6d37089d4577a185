#![no_main]

use diagan::datasets::LabeledDataset;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(ds) = LabeledDataset::read_csv(data, 0) {
        let mut buf = Vec::new();
        if ds.write_csv(&mut buf).is_ok() {
            assert_eq!(LabeledDataset::read_csv(buf.as_slice(), 0).expect("written dataset parses"), ds);
        }
    }
});
