#![no_main]

use diagan::diagnostics::LdrLog;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(log) = LdrLog::read_csv(data) {
        let mut buf = Vec::new();
        log.write_csv(&mut buf).expect("parsed log writes");
        assert_eq!(LdrLog::read_csv(buf.as_slice()).expect("written log parses"), log);
    }
});
