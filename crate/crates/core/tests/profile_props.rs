//! Profile persistence invariants over random profiles.

mod common;

use proptest::prelude::*;
use snvse::profile_db;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn save_load_save_is_identity(profile in common::gen::profile()) {
        let dir = tempfile::tempdir().unwrap();
        let first = dir.path().join("a.json");
        let second = dir.path().join("b.json");
        profile_db::save_profile(&profile, &first).unwrap();
        let loaded = profile_db::load_profile(&first).unwrap();
        prop_assert_eq!(&loaded, &profile);
        profile_db::save_profile(&loaded, &second).unwrap();
        prop_assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());
    }

    #[test]
    fn mapping_table_accounts_for_every_entry(profile in common::gen::profile()) {
        let rows = profile_db::mapping_table(&profile);
        prop_assert_eq!(rows.iter().map(|r| r.count).sum::<usize>(), profile.entries.len());
        prop_assert_eq!(
            rows.iter().map(|r| r.saturated).sum::<usize>(),
            profile.entries.iter().filter(|e| e.saturated).count()
        );
    }
}
