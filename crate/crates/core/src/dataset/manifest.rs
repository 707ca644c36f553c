use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use super::{ParticipantRecord, PHQ8_MAX};
use crate::{Error, Result};

pub const MANIFEST_HEADER: [&str; 5] = ["id", "gender", "phq8", "split", "audio_path"];

pub fn load_manifest(path: &Path) -> Result<Vec<ParticipantRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(file)
}

pub fn parse_manifest(reader: impl Read) -> Result<Vec<ParticipantRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);

    let header = rdr.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?;
    if header.iter().ne(MANIFEST_HEADER) {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "header must be `{}`, got `{}`",
                MANIFEST_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for row in rdr.records() {
        let row =
            row.map_err(|e| Error::Parse { line: e.position().map_or(0, |p| p.line()), message: e.to_string() })?;
        let line = row.position().map_or(0, |p| p.line());
        let parse_err = |message: String| Error::Parse { line, message };

        let id: u32 = row[0].parse().map_err(|_| parse_err(format!("bad participant id `{}`", &row[0])))?;
        let gender = row[1].parse().map_err(|e: Error| parse_err(e.to_string()))?;
        let phq8: i64 = row[2].parse().map_err(|_| parse_err(format!("bad PHQ-8 rating `{}`", &row[2])))?;
        if !(0..=i64::from(PHQ8_MAX)).contains(&phq8) {
            return Err(Error::Validation { line, message: format!("PHQ-8 rating {phq8} outside 0..={PHQ8_MAX}") });
        }
        let split = row[3].parse().map_err(|e: Error| parse_err(e.to_string()))?;
        if row[4].is_empty() {
            return Err(parse_err("empty audio_path".into()));
        }
        if !seen.insert(id) {
            return Err(parse_err(format!("duplicate participant id {id}")));
        }
        out.push(ParticipantRecord { id, gender, phq8: phq8 as u8, split, audio_path: PathBuf::from(&row[4]) });
    }
    Ok(out)
}

pub fn write_manifest(path: &Path, records: &[ParticipantRecord]) -> Result<()> {
    let mut text = MANIFEST_HEADER.join(",");
    text.push('\n');
    for r in records {
        text.push_str(&format!("{},{},{},{},{}\n", r.id, r.gender, r.phq8, r.split.as_str(), r.audio_path.display()));
    }
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Gender, Label, Split};

    fn parse(text: &str) -> Result<Vec<ParticipantRecord>> {
        parse_manifest(text.as_bytes())
    }

    #[test]
    fn labels_follow_rating() {
        let recs = parse("id,gender,phq8,split,audio_path\n301,F,12,train,a.wav\n302,M,9,train,b.wav\n").unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].gender, Gender::Female);
        assert_eq!(recs[0].label(), Label::Depressed);
        assert_eq!(recs[1].label(), Label::NotDepressed);
        assert_eq!(recs[1].split, Split::Train);
    }

    #[test]
    fn duplicate_id_reports_line() {
        let err = parse("id,gender,phq8,split,audio_path\n301,F,12,train,a.wav\n301,M,3,train,b.wav\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn out_of_range_rating_is_validation_error() {
        let err = parse("id,gender,phq8,split,audio_path\n1,F,25,train,a.wav\n").unwrap_err();
        assert!(matches!(err, Error::Validation { line: 2, .. }), "{err}");
        let err = parse("id,gender,phq8,split,audio_path\n1,F,-1,train,a.wav\n").unwrap_err();
        assert!(matches!(err, Error::Validation { .. }));
    }

    #[test]
    fn malformed_rows() {
        for bad in [
            "id,gender,phq8,split,audio_path\nx,F,1,train,a.wav\n",
            "id,gender,phq8,split,audio_path\n1,X,1,train,a.wav\n",
            "id,gender,phq8,split,audio_path\n1,F,1,test,a.wav\n",
            "id,gender,phq8,split,audio_path\n1,F,1,train\n",
            "id,sex,phq8,split,audio_path\n1,F,1,train,a.wav\n",
        ] {
            assert!(matches!(parse(bad), Err(Error::Parse { .. })), "{bad}");
        }
    }

    #[test]
    fn write_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let recs =
            parse("id,gender,phq8,split,audio_path\n1,F,0,train,audio/1.wav\n2,M,24,validation,audio/2.wav\n").unwrap();
        write_manifest(&path, &recs).unwrap();
        assert_eq!(load_manifest(&path).unwrap(), recs);
    }
}
