#![no_main]

use diagan::datasets::{read_points_csv, write_points_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(points) = read_points_csv(data) {
        let mut buf = Vec::new();
        write_points_csv(points.view(), &mut buf).expect("parsed points write");
        assert_eq!(read_points_csv(buf.as_slice()).expect("written points parse"), points);
    }
});
