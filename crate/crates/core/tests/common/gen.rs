//! Random valid profiles.

use chrono::NaiveDate;
use proptest::prelude::*;
use snvse::profile_db::{PlatformProfile, ProfileEntry};
use snvse::Resolution;

const PRESETS: &[&str] = &["ultrafast", "veryfast", "fast", "medium", "slow", "veryslow"];

fn resolution(even: bool) -> impl Strategy<Value = Resolution> {
    (1u32..=4096, 1u32..=4096).prop_map(move |(w, h)| {
        if even {
            Resolution::new((w + 1) & !1, (h + 1) & !1)
        } else {
            Resolution::new(w, h)
        }
    })
}

pub fn entry() -> impl Strategy<Value = ProfileEntry> {
    (
        resolution(false),
        resolution(true),
        21u32..=50,
        any::<bool>(),
        "[a-zA-Z0-9_ .\\-é]{0,16}",
        1.0f64..1.0e9,
    )
        .prop_map(
            |(rho_in, rho_out, crf_hat, saturated, pair_id, target_bitrate)| ProfileEntry {
                rho_in,
                rho_out,
                crf_hat,
                saturated,
                pair_id,
                target_bitrate,
            },
        )
}

pub fn profile() -> impl Strategy<Value = PlatformProfile> {
    (
        "[a-z][a-z0-9_\\-]{0,11}",
        0i64..20000,
        prop::sample::select(PRESETS),
        prop::collection::vec(entry(), 0..40),
    )
        .prop_map(|(name, days, preset, entries)| {
            let base = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap();
            let mut p = PlatformProfile::new(name, base + chrono::Duration::days(days), preset);
            p.entries = entries;
            p
        })
}
