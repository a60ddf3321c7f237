mod common;

use common::soundness_campaign;

#[test]
fn random_programs_are_analyzed_soundly() {
    let (checked, _, failure) = soundness_campaign(10_000, 150, 200_000);
    assert!(failure.is_none(), "{}", failure.unwrap());
    assert_eq!(checked, 150);
}
