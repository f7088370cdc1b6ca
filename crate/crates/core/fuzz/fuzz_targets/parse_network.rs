#![no_main]

use libfuzzer_sys::fuzz_target;
use scalereg::format::{parse_fit_record, parse_network, parse_scaled_network, write_network};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(net) = parse_network(text) {
        assert_eq!(parse_network(&write_network(&net)).unwrap(), net);
    }
    let _ = parse_scaled_network(text);
    if let Ok(rec) = parse_fit_record(text) {
        assert_eq!(parse_fit_record(&rec.to_text()).unwrap(), rec);
    }
});
