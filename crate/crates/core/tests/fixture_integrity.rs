//! The bundled reference tables must stay byte-identical to what was
//! transcribed; any edit breaks these committed digests.

use sha2::{Digest, Sha256};

const EXPECTED: [(&str, &str); 5] = [
    (
        "ex1",
        "80d660e847946332751e88ff26ff39e8fd66d79b45151a20e15bd66f6aa7cf9b",
    ),
    (
        "ex2",
        "0cfa17baf39552b486f8b2abbc937f209b19bcaff8d3af5a9efd51054210b714",
    ),
    (
        "ex3",
        "01d7e1a301ce6734b3a9909c69852a6e039c921cdce87feed4f51a4c49cf4e2a",
    ),
    (
        "ex4",
        "f9b02eaaca5f0205b7603ae3bcc9e736c25b80982af44e39aeb036aa2a77face",
    ),
    (
        "ex5",
        "aeaa7f362736c7b1c977c5cc2e4f76fc6271d58dadabff9018cf1b87f4728dcc",
    ),
];

#[test]
fn fixtures_match_committed_checksums() {
    for (id, want) in EXPECTED {
        let csv = fracbs_core::pricing::fixture_csv(id)
            .unwrap_or_else(|| panic!("no fixture for {id}"));
        let digest = Sha256::digest(csv.as_bytes());
        let got: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(got, want, "fixture {id} has been modified");
    }
}

#[test]
fn fixture_tables_carry_transcription_notes() {
    for (id, _) in EXPECTED {
        let csv = fracbs_core::pricing::fixture_csv(id).unwrap();
        assert!(
            csv.starts_with("# Reference"),
            "fixture {id} is missing its transcription note"
        );
    }
}
