#![no_main]

use distinction_core::forms::{parse_form, render};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(form) = parse_form(text) {
        let again = parse_form(&render(&form)).expect("rendered form must parse");
        assert_eq!(again, form);
    }
});
