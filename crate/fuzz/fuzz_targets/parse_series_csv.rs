#![no_main]

use libfuzzer_sys::fuzz_target;
use nonbark::series::{Format, WeakValueSeries};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(series) = WeakValueSeries::parse(text, Format::Csv) {
            let again = WeakValueSeries::parse(&series.render(Format::Csv), Format::Csv).expect("re-parse of emitted series");
            assert_eq!(again, series);
        }
    }
});
