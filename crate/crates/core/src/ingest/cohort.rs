use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use super::record::{AdjudicatedLabel, NoteDocument, StructuredRecord};
use super::IngestError;

/// Joined, validated analysis cohort. Immutable once built.
#[derive(Debug, Clone)]
pub struct CohortDataset {
    records: Vec<StructuredRecord>,
    index: HashMap<String, usize>,
    notes_by_patient: BTreeMap<String, Vec<NoteDocument>>,
    labels: Option<BTreeMap<String, bool>>,
}

/// What `join_cohort` dropped or noticed along the way.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct JoinReport {
    /// Patients with notes but no structured record.
    pub orphan_note_patients: Vec<String>,
    pub orphan_notes: usize,
    /// Labels whose patient has no structured record.
    pub orphan_labels: Vec<String>,
    pub patients_without_notes: usize,
    pub unlabeled_records: usize,
}

/// Join structured records, notes and (optionally) labels.
///
/// Notes keep their input order within a patient; patients without notes
/// map to an empty list.
pub fn join_cohort(
    records: Vec<StructuredRecord>,
    notes: Vec<NoteDocument>,
    labels: Option<Vec<AdjudicatedLabel>>,
) -> Result<(CohortDataset, JoinReport), IngestError> {
    if records.is_empty() {
        return Err(IngestError::EmptyCohort);
    }
    let mut index = HashMap::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        if r.patient_id.is_empty() {
            return Err(IngestError::BadValue {
                row: i + 1,
                column: "patient_id".into(),
                value: String::new(),
                reason: "empty patient_id".into(),
            });
        }
        if index.insert(r.patient_id.clone(), i).is_some() {
            return Err(IngestError::DuplicatePatient(r.patient_id.clone()));
        }
    }

    let mut report = JoinReport::default();
    let mut notes_by_patient: BTreeMap<String, Vec<NoteDocument>> =
        records.iter().map(|r| (r.patient_id.clone(), Vec::new())).collect();
    let mut orphans = BTreeSet::new();
    for note in notes {
        match notes_by_patient.get_mut(&note.patient_id) {
            Some(list) => list.push(note),
            None => {
                report.orphan_notes += 1;
                orphans.insert(note.patient_id);
            }
        }
    }
    report.orphan_note_patients = orphans.into_iter().collect();
    report.patients_without_notes = notes_by_patient.values().filter(|v| v.is_empty()).count();

    let labels = match labels {
        None => None,
        Some(list) => {
            let mut map = BTreeMap::new();
            let mut orphan_labels = BTreeSet::new();
            for l in list {
                if !index.contains_key(&l.patient_id) {
                    orphan_labels.insert(l.patient_id);
                    continue;
                }
                if map.insert(l.patient_id.clone(), l.due_to_covid).is_some() {
                    return Err(IngestError::DuplicateLabel(l.patient_id));
                }
            }
            report.orphan_labels = orphan_labels.into_iter().collect();
            report.unlabeled_records = records.len() - map.len();
            Some(map)
        }
    };

    if report.orphan_notes > 0 || !report.orphan_labels.is_empty() {
        log::warn!(
            "join dropped {} notes from {} unknown patients and {} labels",
            report.orphan_notes,
            report.orphan_note_patients.len(),
            report.orphan_labels.len()
        );
    }
    if report.patients_without_notes > 0 {
        log::info!("{} patients have no notes", report.patients_without_notes);
    }

    Ok((CohortDataset { records, index, notes_by_patient, labels }, report))
}

impl CohortDataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[StructuredRecord] {
        &self.records
    }

    pub fn patient_ids(&self) -> Vec<&str> {
        self.records.iter().map(|r| r.patient_id.as_str()).collect()
    }

    pub fn position(&self, patient_id: &str) -> Option<usize> {
        self.index.get(patient_id).copied()
    }

    pub fn record(&self, patient_id: &str) -> Option<&StructuredRecord> {
        self.position(patient_id).map(|i| &self.records[i])
    }

    /// Notes for a patient in stored order; empty for unknown patients.
    pub fn notes_for(&self, patient_id: &str) -> &[NoteDocument] {
        self.notes_by_patient.get(patient_id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn notes_by_patient(&self) -> &BTreeMap<String, Vec<NoteDocument>> {
        &self.notes_by_patient
    }

    pub fn is_labeled(&self) -> bool {
        self.labels.is_some()
    }

    pub fn label(&self, patient_id: &str) -> Option<bool> {
        self.labels.as_ref()?.get(patient_id).copied()
    }

    /// Labels aligned with `records()`. Fails unless every record is labeled.
    pub fn labels(&self) -> Result<Vec<bool>, IngestError> {
        let map = self.labels.as_ref().ok_or(IngestError::Unlabeled { missing: self.len() })?;
        let missing = self.records.iter().filter(|r| !map.contains_key(&r.patient_id)).count();
        if missing > 0 {
            return Err(IngestError::Unlabeled { missing });
        }
        Ok(self.records.iter().map(|r| map[&r.patient_id]).collect())
    }

    /// A new dataset with only the records at `positions` (in that order).
    pub fn subset(&self, positions: &[usize]) -> Result<CohortDataset, IngestError> {
        let records: Vec<StructuredRecord> = positions.iter().map(|&i| self.records[i].clone()).collect();
        let notes = records
            .iter()
            .flat_map(|r| self.notes_for(&r.patient_id).iter().cloned())
            .collect();
        let labels = self.labels.as_ref().map(|map| {
            records
                .iter()
                .filter_map(|r| {
                    map.get(&r.patient_id).map(|&due_to_covid| AdjudicatedLabel {
                        patient_id: r.patient_id.clone(),
                        due_to_covid,
                    })
                })
                .collect()
        });
        join_cohort(records, notes, labels).map(|(d, _)| d)
    }

    /// Labels in record order as `AdjudicatedLabel`s (labeled records only).
    pub fn label_list(&self) -> Vec<AdjudicatedLabel> {
        let Some(map) = &self.labels else { return Vec::new() };
        self.records
            .iter()
            .filter_map(|r| {
                map.get(&r.patient_id)
                    .map(|&due_to_covid| AdjudicatedLabel { patient_id: r.patient_id.clone(), due_to_covid })
            })
            .collect()
    }

    /// All notes, grouped by patient in record order.
    pub fn all_notes(&self) -> Vec<NoteDocument> {
        self.records.iter().flat_map(|r| self.notes_for(&r.patient_id).iter().cloned()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::NoteType;

    fn note(id: &str, text: &str) -> NoteDocument {
        NoteDocument { patient_id: id.into(), note_type: NoteType::Progress, text: text.into() }
    }

    fn label(id: &str, due: bool) -> AdjudicatedLabel {
        AdjudicatedLabel { patient_id: id.into(), due_to_covid: due }
    }

    fn recs(ids: &[&str]) -> Vec<StructuredRecord> {
        ids.iter().map(|id| StructuredRecord::blank(*id)).collect()
    }

    #[test]
    fn patient_without_notes_maps_to_empty_list() {
        let (ds, report) =
            join_cohort(recs(&["a", "b", "c"]), vec![note("a", "x"), note("b", "y")], None).unwrap();
        assert_eq!(ds.notes_for("c").len(), 0);
        assert!(ds.notes_by_patient().contains_key("c"));
        assert_eq!(report.patients_without_notes, 1);
    }

    #[test]
    fn unknown_label_dropped_and_counted() {
        let (ds, report) =
            join_cohort(recs(&["a", "b"]), vec![], Some(vec![label("a", true), label("b", false), label("z", true)]))
                .unwrap();
        assert_eq!(report.orphan_labels, vec!["z".to_string()]);
        assert_eq!(ds.labels().unwrap(), vec![true, false]);
    }

    #[test]
    fn orphan_notes_reported() {
        let (_, report) = join_cohort(recs(&["a"]), vec![note("q", "x"), note("q", "y")], None).unwrap();
        assert_eq!(report.orphan_notes, 2);
        assert_eq!(report.orphan_note_patients, vec!["q".to_string()]);
    }

    #[test]
    fn empty_records_rejected() {
        assert!(matches!(join_cohort(vec![], vec![], None), Err(IngestError::EmptyCohort)));
    }

    #[test]
    fn prevalence_of_study_sized_cohort() {
        let ids: Vec<String> = (0..586).map(|i| format!("p{i}")).collect();
        let records = ids.iter().map(|id| StructuredRecord::blank(id.clone())).collect();
        let labels = ids.iter().enumerate().map(|(i, id)| label(id, i < 362)).collect();
        let (ds, _) = join_cohort(records, vec![], Some(labels)).unwrap();
        let y = ds.labels().unwrap();
        let prevalence = y.iter().filter(|&&b| b).count() as f64 / y.len() as f64;
        assert!((prevalence - 362.0 / 586.0).abs() < 1e-15);
        assert!((prevalence - 0.618).abs() < 5e-4);
    }

    #[test]
    fn note_order_across_patients_does_not_matter() {
        let a = vec![note("a", "1"), note("b", "2"), note("a", "3")];
        let b = vec![note("b", "2"), note("a", "1"), note("a", "3")];
        let (da, _) = join_cohort(recs(&["a", "b"]), a, None).unwrap();
        let (db, _) = join_cohort(recs(&["a", "b"]), b, None).unwrap();
        assert_eq!(da.notes_by_patient(), db.notes_by_patient());
        let (again, _) = join_cohort(da.records().to_vec(), da.all_notes(), None).unwrap();
        assert_eq!(again.notes_by_patient(), da.notes_by_patient());
    }

    #[test]
    fn partially_labeled_cohort_refuses_label_vector() {
        let (ds, report) = join_cohort(recs(&["a", "b"]), vec![], Some(vec![label("a", true)])).unwrap();
        assert_eq!(report.unlabeled_records, 1);
        assert!(matches!(ds.labels(), Err(IngestError::Unlabeled { missing: 1 })));
    }
}
