#![no_main]

use libfuzzer_sys::fuzz_target;
use scalereg::effective_noise::read_noise_csv;
use scalereg::experiments::{read_coverage_csv, read_packing_csv, read_rate_csv};
use scalereg::format::read_dataset_csv;

fuzz_target!(|data: &[u8]| {
    let _ = read_dataset_csv(data);
    let _ = read_noise_csv(data);
    let _ = read_rate_csv(data);
    let _ = read_coverage_csv(data);
    let _ = read_packing_csv(data);
});
