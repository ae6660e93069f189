//! Readers and writers for `structured.csv`, `notes.jsonl` and `labels.csv`.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::Deserialize;

use super::record::*;
use super::IngestError;

/// Header of `structured.csv`, in the order written.
pub const STRUCTURED_HEADER: [&str; 36] = [
    "patient_id",
    "sex",
    "age_years",
    "discharge_disposition",
    "admission_type",
    "icu_transfer",
    "encounter_type",
    "length_of_stay_days",
    "bmi_category",
    "payer",
    "race_ethnicity",
    "vaccinated",
    "surgery",
    "cancer",
    "cardiovascular",
    "hypertension",
    "chronic_liver",
    "copd",
    "asthma",
    "chronic_renal",
    "diabetes",
    "bronchodilator",
    "steroid",
    "anticoagulant_antiplatelet",
    "diuretic",
    "cough_suppressant",
    "paralytic",
    "expectorant",
    "remdesivir",
    "inhaled_steroid",
    "lymphocyte_abs",
    "lymphocyte",
    "crp",
    "ferritin",
    "d_dimer",
    "procalcitonin",
];

pub const LABELS_HEADER: [&str; 2] = ["patient_id", "due_to_covid"];

fn open(path: &Path) -> Result<File, IngestError> {
    File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn create(path: &Path) -> Result<File, IngestError> {
    File::create(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "y" | "t" => Some(true),
        "0" | "false" | "no" | "n" | "f" => Some(false),
        _ => None,
    }
}

struct Row<'a> {
    row: usize,
    fields: &'a csv::StringRecord,
    cols: &'a [usize],
}

impl Row<'_> {
    fn raw(&self, col: usize) -> &str {
        self.fields.get(self.cols[col]).unwrap_or("").trim()
    }

    fn bad_category(&self, col: usize) -> IngestError {
        IngestError::BadCategory {
            row: self.row,
            column: STRUCTURED_HEADER[col].to_string(),
            value: self.raw(col).to_string(),
        }
    }

    fn cat<C: Categorical>(&self, col: usize) -> Result<C, IngestError> {
        C::parse_level(self.raw(col)).map_err(|_| self.bad_category(col))
    }

    fn flag(&self, col: usize) -> Result<bool, IngestError> {
        parse_bool(self.raw(col)).ok_or_else(|| self.bad_category(col))
    }

    fn real(&self, col: usize, lo: f64, hi: f64) -> Result<f64, IngestError> {
        let raw = self.raw(col);
        let bad = |reason: &str| IngestError::BadValue {
            row: self.row,
            column: STRUCTURED_HEADER[col].to_string(),
            value: raw.to_string(),
            reason: reason.to_string(),
        };
        let v: f64 = raw.parse().map_err(|_| bad("not a number"))?;
        if !v.is_finite() || v < lo || v > hi {
            return Err(bad(&format!("outside [{lo}, {hi}]")));
        }
        Ok(v)
    }
}

/// Parse a structured table from any reader.
pub fn read_structured<R: Read>(reader: R) -> Result<Vec<StructuredRecord>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::Headers).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let cols: Vec<usize> = STRUCTURED_HEADER
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h == *name)
                .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
        })
        .collect::<Result<_, _>>()?;

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, result) in rdr.records().enumerate() {
        let fields = result?;
        let row = Row { row: i + 1, fields: &fields, cols: &cols };
        let patient_id = row.raw(0).to_string();
        if patient_id.is_empty() {
            return Err(IngestError::BadValue {
                row: i + 1,
                column: "patient_id".into(),
                value: String::new(),
                reason: "empty patient_id".into(),
            });
        }
        if !seen.insert(patient_id.clone()) {
            return Err(IngestError::DuplicatePatient(patient_id));
        }
        let record = StructuredRecord {
            patient_id,
            sex: row.cat(1)?,
            age_years: row.real(2, 0.0, 130.0)?,
            discharge_disposition: row.cat(3)?,
            admission_type: row.cat(4)?,
            icu_transfer: row.flag(5)?,
            encounter_type: row.cat(6)?,
            length_of_stay_days: row.real(7, 0.0, f64::MAX)?,
            bmi_category: row.cat(8)?,
            payer: row.cat(9)?,
            race_ethnicity: row.cat(10)?,
            vaccinated: row.flag(11)?,
            comorbidities: Comorbidities {
                surgery: row.flag(12)?,
                cancer: row.flag(13)?,
                cardiovascular: row.flag(14)?,
                hypertension: row.flag(15)?,
                chronic_liver: row.flag(16)?,
                copd: row.flag(17)?,
                asthma: row.flag(18)?,
                chronic_renal: row.flag(19)?,
                diabetes: row.flag(20)?,
            },
            medications: Medications {
                bronchodilator: row.flag(21)?,
                steroid: row.flag(22)?,
                anticoagulant_antiplatelet: row.flag(23)?,
                diuretic: row.flag(24)?,
                cough_suppressant: row.flag(25)?,
                paralytic: row.flag(26)?,
                expectorant: row.flag(27)?,
                remdesivir: row.flag(28)?,
                inhaled_steroid: row.flag(29)?,
            },
            labs: LabPanel {
                lymphocyte_abs: row.cat(30)?,
                lymphocyte: row.cat(31)?,
                crp: row.cat(32)?,
                ferritin: row.cat(33)?,
                d_dimer: row.cat(34)?,
                procalcitonin: row.cat(35)?,
            },
        };
        out.push(record);
    }
    Ok(out)
}

pub fn load_structured(path: impl AsRef<Path>) -> Result<Vec<StructuredRecord>, IngestError> {
    read_structured(open(path.as_ref())?)
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

pub fn write_structured_to<W: Write>(
    writer: W,
    records: &[StructuredRecord],
) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(STRUCTURED_HEADER)?;
    for r in records {
        let mut row: Vec<String> = Vec::with_capacity(STRUCTURED_HEADER.len());
        row.push(r.patient_id.clone());
        row.push(r.sex.to_string());
        row.push(r.age_years.to_string());
        row.push(r.discharge_disposition.to_string());
        row.push(r.admission_type.to_string());
        row.push(flag(r.icu_transfer).into());
        row.push(r.encounter_type.to_string());
        row.push(r.length_of_stay_days.to_string());
        row.push(r.bmi_category.to_string());
        row.push(r.payer.to_string());
        row.push(r.race_ethnicity.to_string());
        row.push(flag(r.vaccinated).into());
        for f in &BinaryField::ALL[2..] {
            row.push(flag(r.binary(*f)).into());
        }
        let labs = &r.labs;
        for level in [
            labs.lymphocyte_abs,
            labs.lymphocyte,
            labs.crp,
            labs.ferritin,
            labs.d_dimer,
            labs.procalcitonin,
        ] {
            row.push(level.to_string());
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|source| IngestError::Io { path: "<structured>".into(), source })?;
    Ok(())
}

pub fn write_structured(path: impl AsRef<Path>, records: &[StructuredRecord]) -> Result<(), IngestError> {
    write_structured_to(create(path.as_ref())?, records)
}

#[derive(Deserialize)]
struct RawNote {
    patient_id: Option<String>,
    note_type: Option<String>,
    text: Option<String>,
}

/// Notes read from a `notes.jsonl` source.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadedNotes {
    pub notes: Vec<NoteDocument>,
    /// Notes whose `note_type` was present but not recognized (stored as `Other`).
    pub unknown_note_types: usize,
}

pub fn read_notes<R: Read>(reader: R) -> Result<LoadedNotes, IngestError> {
    let mut out = LoadedNotes::default();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| IngestError::Io { path: "<notes>".into(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawNote = serde_json::from_str(&line).map_err(|e| IngestError::MalformedLine {
            line: line_no,
            reason: e.to_string(),
        })?;
        let patient_id = match raw.patient_id {
            Some(id) if !id.trim().is_empty() => id,
            _ => {
                return Err(IngestError::MalformedLine {
                    line: line_no,
                    reason: "missing patient_id".into(),
                })
            }
        };
        let text = raw.text.ok_or(IngestError::MissingField { line: line_no, field: "text" })?;
        let note_type = match raw.note_type {
            None => NoteType::Other,
            Some(s) => s.parse().unwrap_or_else(|_| {
                out.unknown_note_types += 1;
                NoteType::Other
            }),
        };
        out.notes.push(NoteDocument { patient_id, note_type, text });
    }
    if out.unknown_note_types > 0 {
        log::warn!("{} notes had an unrecognized note_type; stored as Other", out.unknown_note_types);
    }
    Ok(out)
}

pub fn load_notes(path: impl AsRef<Path>) -> Result<LoadedNotes, IngestError> {
    read_notes(open(path.as_ref())?)
}

pub fn write_notes_to<W: Write>(mut writer: W, notes: &[NoteDocument]) -> Result<(), IngestError> {
    let io = |source| IngestError::Io { path: "<notes>".into(), source };
    for note in notes {
        let line = serde_json::to_string(note).expect("note serializes");
        writeln!(writer, "{line}").map_err(io)?;
    }
    writer.flush().map_err(io)
}

pub fn write_notes(path: impl AsRef<Path>, notes: &[NoteDocument]) -> Result<(), IngestError> {
    write_notes_to(std::io::BufWriter::new(create(path.as_ref())?), notes)
}

pub fn read_labels<R: Read>(reader: R) -> Result<Vec<AdjudicatedLabel>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
    };
    let (id_col, label_col) = (col(LABELS_HEADER[0])?, col(LABELS_HEADER[1])?);
    let mut out = Vec::new();
    for (i, result) in rdr.records().enumerate() {
        let fields = result?;
        let id = fields.get(id_col).unwrap_or("").to_string();
        let raw = fields.get(label_col).unwrap_or("");
        let due_to_covid = match raw {
            "0" => false,
            "1" => true,
            other => {
                return Err(IngestError::BadCategory {
                    row: i + 1,
                    column: LABELS_HEADER[1].into(),
                    value: other.to_string(),
                })
            }
        };
        out.push(AdjudicatedLabel { patient_id: id, due_to_covid });
    }
    Ok(out)
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<AdjudicatedLabel>, IngestError> {
    read_labels(open(path.as_ref())?)
}

pub fn write_labels_to<W: Write>(writer: W, labels: &[AdjudicatedLabel]) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(LABELS_HEADER)?;
    for l in labels {
        w.write_record([l.patient_id.as_str(), flag(l.due_to_covid)])?;
    }
    w.flush().map_err(|source| IngestError::Io { path: "<labels>".into(), source })?;
    Ok(())
}

pub fn write_labels(path: impl AsRef<Path>, labels: &[AdjudicatedLabel]) -> Result<(), IngestError> {
    write_labels_to(create(path.as_ref())?, labels)
}
