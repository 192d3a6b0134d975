mod common;

use clausegen::chunk::{read_parsed_corpus, write_parsed_corpus, ParsedSentence, ReadErrorKind, ReadMode};
use clausegen::Error;
use common::arb_sentence;
use proptest::prelude::*;

proptest! {
    #[test]
    fn json_line_round_trip_is_byte_exact(s in arb_sentence(8)) {
        let line = s.to_json_line();
        let back = ParsedSentence::from_json_line(&line).unwrap();
        prop_assert_eq!(&back, &s);
        prop_assert_eq!(back.to_json_line(), line);
    }

    #[test]
    fn corpus_write_then_read(sentences in prop::collection::vec(arb_sentence(5), 0..6)) {
        let mut buf = Vec::new();
        write_parsed_corpus(&mut buf, &sentences).unwrap();
        let back: Vec<ParsedSentence> =
            read_parsed_corpus(buf.as_slice(), ReadMode::Strict).collect::<Result<_, _>>().unwrap();
        prop_assert_eq!(back, sentences);
    }
}

const GOOD: &str = r#"{"id":"a","chunks":[{"tokens":[{"s":"車","p":"NOUN_GENERAL"}],"dest":-1}]}"#;
const BACKWARD: &str = r#"{"id":"b","chunks":[{"tokens":[{"s":"車","p":"NOUN_GENERAL"}],"dest":-1},{"tokens":[{"s":"見","p":"VERB"}],"dest":0}]}"#;

#[test]
fn strict_reader_stops_at_first_bad_line() {
    let input = format!("{GOOD}\nnot json\n{GOOD}\n");
    let out: Vec<_> = read_parsed_corpus(input.as_bytes(), ReadMode::Strict).collect();
    assert!(out[0].is_ok());
    let err = out[1].as_ref().unwrap_err();
    assert_eq!(err.line, 2);
    assert!(matches!(err.kind, ReadErrorKind::Json(_)));
    assert_eq!(out.len(), 2);
}

#[test]
fn lenient_reader_skips_and_reports() {
    let input = format!("{GOOD}\n{BACKWARD}\n\n{GOOD}\n");
    let mut reader = read_parsed_corpus(input.as_bytes(), ReadMode::Lenient);
    let ok: Vec<_> = reader.by_ref().collect::<Result<_, _>>().unwrap();
    assert_eq!(ok.len(), 2);
    assert_eq!(reader.diagnostics().len(), 1);
    assert_eq!(reader.diagnostics()[0].line, 2);
    assert!(matches!(reader.diagnostics()[0].kind, ReadErrorKind::Invalid(_)));
    let e: Error = reader.diagnostics()[0].clone().into();
    assert!(e.to_string().contains("line 2"), "{e}");
}
