#![no_main]

use jetfield::fsmooth::NumericCurve;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let lines: Vec<String> = text.lines().map(str::to_owned).collect();
    if let Ok(c) = NumericCurve::parse(&lines) {
        let _ = c.eval(0.5);
    }
});
