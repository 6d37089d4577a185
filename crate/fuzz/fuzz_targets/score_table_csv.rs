#![no_main]

use diagan::diagnostics::ScoreTable;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(table) = ScoreTable::read_csv(data) {
        let mut buf = Vec::new();
        table.write_csv(&mut buf).expect("parsed table writes");
        assert_eq!(ScoreTable::read_csv(buf.as_slice()).expect("written table parses"), table);
    }
});
