use std::fmt::Write as _;

use super::{CsvError, Speaker};

pub const DEFAULT_LANGUAGE: &str = "ja";

const HEADER: [&str; 4] = ["index", "speaker", "content", "narrator_note"];

/// One utterance. Narrator annotations ride along on the turn they follow
/// and never count as turns of their own.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DialogueTurn {
    pub index: usize,
    pub speaker: Speaker,
    pub content: String,
    pub narrator_note: Option<String>,
}

impl DialogueTurn {
    pub fn new(index: usize, speaker: Speaker, content: impl Into<String>) -> Self {
        Self {
            index,
            speaker,
            content: content.into(),
            narrator_note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.narrator_note = Some(note.into());
        self
    }
}

/// A validated parent–child conversation.
///
/// Turn indices run 1..=n without gaps and speakers strictly alternate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dialogue {
    scenario_id: String,
    turns: Vec<DialogueTurn>,
    language_tag: String,
}

impl Dialogue {
    pub fn new(scenario_id: impl Into<String>, turns: Vec<DialogueTurn>) -> Result<Self, CsvError> {
        Self::with_language(scenario_id, turns, DEFAULT_LANGUAGE)
    }

    pub fn with_language(
        scenario_id: impl Into<String>,
        mut turns: Vec<DialogueTurn>,
        language_tag: impl Into<String>,
    ) -> Result<Self, CsvError> {
        if turns.is_empty() {
            return Err(CsvError::NoTurns);
        }
        let mut previous: Option<Speaker> = None;
        for (i, turn) in turns.iter_mut().enumerate() {
            let row = i + 1;
            if turn.index != row {
                return Err(CsvError::IndexGap {
                    row,
                    expected: row,
                    found: turn.index,
                });
            }
            if previous == Some(turn.speaker) {
                return Err(CsvError::NotAlternating {
                    row,
                    speaker: turn.speaker.to_string(),
                });
            }
            if turn.content.trim().is_empty() {
                return Err(CsvError::EmptyContent { row });
            }
            if turn
                .narrator_note
                .as_deref()
                .is_some_and(|n| n.trim().is_empty())
            {
                turn.narrator_note = None;
            }
            previous = Some(turn.speaker);
        }
        Ok(Self {
            scenario_id: scenario_id.into(),
            turns,
            language_tag: language_tag.into(),
        })
    }

    pub fn scenario_id(&self) -> &str {
        &self.scenario_id
    }

    pub fn turns(&self) -> &[DialogueTurn] {
        &self.turns
    }

    pub fn language_tag(&self) -> &str {
        &self.language_tag
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    pub fn starter(&self) -> Speaker {
        self.turns[0].speaker
    }

    /// Copy with a different scenario id.
    pub fn renamed(&self, scenario_id: impl Into<String>) -> Self {
        Self {
            scenario_id: scenario_id.into(),
            ..self.clone()
        }
    }

    /// Parse the canonical CSV layout. The `narrator_note` column may be
    /// omitted entirely.
    pub fn from_csv(scenario_id: impl Into<String>, bytes: &[u8]) -> Result<Self, CsvError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .from_reader(bytes);
        let header = reader
            .headers()
            .map_err(|e| CsvError::Malformed(e.to_string()))?
            .clone();
        let columns: Vec<&str> = header.iter().collect();
        let with_notes = match columns.as_slice() {
            [a, b, c] if [*a, *b, *c] == HEADER[..3] => false,
            [a, b, c, d] if [*a, *b, *c, *d] == HEADER => true,
            _ => {
                return Err(CsvError::BadHeader {
                    found: columns.join(","),
                })
            }
        };

        let mut turns = Vec::new();
        let mut previous: Option<Speaker> = None;
        for (i, record) in reader.records().enumerate() {
            let row = i + 1;
            let record = record.map_err(|e| CsvError::Malformed(e.to_string()))?;
            let raw_index = &record[0];
            let index: usize = raw_index.trim().parse().map_err(|_| CsvError::BadIndex {
                row,
                value: raw_index.to_string(),
            })?;
            if index != row {
                return Err(CsvError::IndexGap {
                    row,
                    expected: row,
                    found: index,
                });
            }
            let speaker: Speaker = record[1].parse().map_err(|_| CsvError::UnknownSpeaker {
                row,
                label: record[1].to_string(),
            })?;
            if previous == Some(speaker) {
                return Err(CsvError::NotAlternating {
                    row,
                    speaker: speaker.to_string(),
                });
            }
            previous = Some(speaker);
            let note = if with_notes && !record[3].trim().is_empty() {
                Some(record[3].to_string())
            } else {
                None
            };
            turns.push(DialogueTurn {
                index,
                speaker,
                content: record[2].to_string(),
                narrator_note: note,
            });
        }
        Self::new(scenario_id, turns)
    }

    /// Canonical CSV: fixed header, rows in index order, CRLF line endings,
    /// quoting only where required.
    pub fn to_csv(&self) -> Vec<u8> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .quote_style(csv::QuoteStyle::Necessary)
            .from_writer(Vec::new());
        writer.write_record(HEADER).expect("write to Vec");
        for turn in &self.turns {
            let index = turn.index.to_string();
            writer
                .write_record([
                    index.as_str(),
                    turn.speaker.as_str(),
                    turn.content.as_str(),
                    turn.narrator_note.as_deref().unwrap_or(""),
                ])
                .expect("write to Vec");
        }
        writer.into_inner().expect("flush to Vec")
    }

    /// Plain-text transcript for prompts, one utterance per line.
    pub fn transcript(&self, include_notes: bool) -> String {
        let mut out = String::new();
        for turn in &self.turns {
            let _ = writeln!(out, "{}. {}: {}", turn.index, turn.speaker, turn.content);
            if include_notes {
                if let Some(note) = &turn.narrator_note {
                    let _ = writeln!(out, "   (narrator: {note})");
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fixture(n: usize) -> String {
        let mut s = String::from("index,speaker,content,narrator_note\n");
        for i in 1..=n {
            let speaker = if i % 2 == 1 { "parent" } else { "child" };
            s.push_str(&format!("{i},{speaker},line {i},\n"));
        }
        s
    }

    #[test]
    fn parses_ten_turn_fixture() {
        let d = Dialogue::from_csv("s01", fixture(10).as_bytes()).unwrap();
        assert_eq!(d.len(), 10);
        assert_eq!(d.starter(), Speaker::Parent);
        assert_eq!(d.language_tag(), "ja");
        assert!(d.turns().iter().all(|t| t.narrator_note.is_none()));
    }

    #[test]
    fn narrator_column_is_optional() {
        let csv = "index,speaker,content\n1,child,hi\n2,parent,hello\n";
        let d = Dialogue::from_csv("s", csv.as_bytes()).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.starter(), Speaker::Child);
    }

    #[test]
    fn gap_is_rejected() {
        let csv = "index,speaker,content,narrator_note\n1,parent,a,\n2,child,b,\n4,parent,c,\n";
        let err = Dialogue::from_csv("s", csv.as_bytes()).unwrap_err();
        assert_eq!(
            err,
            CsvError::IndexGap {
                row: 3,
                expected: 3,
                found: 4
            }
        );
    }

    #[test]
    fn distinct_errors_for_each_violation() {
        let same = "index,speaker,content\n1,parent,a\n2,parent,b\n";
        assert!(matches!(
            Dialogue::from_csv("s", same.as_bytes()),
            Err(CsvError::NotAlternating { row: 2, .. })
        ));
        let unknown = "index,speaker,content\n1,parent,a\n2,narrator,b\n";
        assert!(matches!(
            Dialogue::from_csv("s", unknown.as_bytes()),
            Err(CsvError::UnknownSpeaker { row: 2, .. })
        ));
        let ragged = "index,speaker,content\n1,parent,a,extra\n";
        assert!(matches!(
            Dialogue::from_csv("s", ragged.as_bytes()),
            Err(CsvError::Malformed(_))
        ));
        let header = "idx,who,text\n1,parent,a\n";
        assert!(matches!(
            Dialogue::from_csv("s", header.as_bytes()),
            Err(CsvError::BadHeader { .. })
        ));
        let empty = "index,speaker,content\n1,parent,  \n";
        assert_eq!(
            Dialogue::from_csv("s", empty.as_bytes()),
            Err(CsvError::EmptyContent { row: 1 })
        );
        let none = "index,speaker,content\n";
        assert_eq!(
            Dialogue::from_csv("s", none.as_bytes()),
            Err(CsvError::NoTurns)
        );
        let bad_index = "index,speaker,content\none,parent,a\n";
        assert!(matches!(
            Dialogue::from_csv("s", bad_index.as_bytes()),
            Err(CsvError::BadIndex { row: 1, .. })
        ));
    }

    #[test]
    fn empty_notes_keep_header_and_fourth_column() {
        let d = Dialogue::new(
            "s",
            vec![
                DialogueTurn::new(1, Speaker::Parent, "Did you finish?"),
                DialogueTurn::new(2, Speaker::Child, "...yes"),
            ],
        )
        .unwrap();
        let text = String::from_utf8(d.to_csv()).unwrap();
        assert_eq!(
            text,
            "index,speaker,content,narrator_note\r\n1,parent,Did you finish?,\r\n2,child,...yes,\r\n"
        );
        assert_eq!(d.to_csv(), d.to_csv());
    }

    #[test]
    fn quoting_survives_commas_quotes_and_newlines() {
        let d = Dialogue::new(
            "s",
            vec![
                DialogueTurn::new(1, Speaker::Parent, "Well, \"fine\".\nGo on.")
                    .with_note("tense, \"cold\""),
                DialogueTurn::new(2, Speaker::Child, "うん、わかった"),
            ],
        )
        .unwrap();
        let back = Dialogue::from_csv("s", &d.to_csv()).unwrap();
        assert_eq!(back, d);
    }

    fn arb_text() -> impl Strategy<Value = String> {
        prop_oneof![
            "[a-zA-Z0-9 ,.!?\"']{1,40}",
            "[ぁ-んァ-ン一-龥、。]{1,20}",
            ".{1,30}",
            "[a-z]{1,5}(\r\n|\n|,|\"){1,3}[a-z]{1,5}",
        ]
        .prop_filter("non-blank", |s| !s.trim().is_empty())
    }

    prop_compose! {
        fn arb_dialogue()(
            starter in prop_oneof![Just(Speaker::Parent), Just(Speaker::Child)],
            rows in proptest::collection::vec((arb_text(), proptest::option::of(arb_text())), 1..14),
        ) -> Dialogue {
            let mut speaker = starter;
            let turns = rows
                .into_iter()
                .enumerate()
                .map(|(i, (content, note))| {
                    let turn = DialogueTurn { index: i + 1, speaker, content, narrator_note: note };
                    speaker = speaker.other();
                    turn
                })
                .collect();
            Dialogue::new("prop", turns).unwrap()
        }
    }

    proptest! {
        #[test]
        fn csv_round_trip(d in arb_dialogue()) {
            let bytes = d.to_csv();
            let back = Dialogue::from_csv("prop", &bytes).unwrap();
            prop_assert_eq!(&back, &d);
            prop_assert_eq!(back.to_csv(), bytes);
        }

        #[test]
        fn validated_dialogues_are_consecutive_and_alternating(d in arb_dialogue()) {
            for (i, t) in d.turns().iter().enumerate() {
                prop_assert_eq!(t.index, i + 1);
                if i > 0 {
                    prop_assert_ne!(t.speaker, d.turns()[i - 1].speaker);
                }
            }
        }
    }
}
