//! Structured per-admission record and its categorical domains.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Lowercase and strip everything but ASCII alphanumerics, so that
/// `"Not Taken"`, `"not_taken"` and `"NotTaken"` all compare equal.
pub(crate) fn normalize_label(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownLevel(pub String);

impl fmt::Display for UnknownLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown level {:?}", self.0)
    }
}

impl std::error::Error for UnknownLevel {}

/// A closed categorical domain. Levels are listed in declaration order,
/// which is also the one-hot column order.
pub trait Categorical: Sized + Copy + Eq + 'static {
    const NAME: &'static str;
    const LEVELS: &'static [Self];
    fn as_str(self) -> &'static str;
    /// Extra accepted spellings (already normalized) beyond the canonical name.
    fn aliases(self) -> &'static [&'static str] {
        &[]
    }
    fn index(self) -> usize {
        Self::LEVELS.iter().position(|l| *l == self).unwrap()
    }
    fn parse_level(s: &str) -> Result<Self, UnknownLevel> {
        let norm = normalize_label(s);
        Self::LEVELS
            .iter()
            .copied()
            .find(|l| normalize_label(l.as_str()) == norm || l.aliases().contains(&norm.as_str()))
            .ok_or_else(|| UnknownLevel(s.to_string()))
    }
}

macro_rules! categorical {
    (
        $(#[$meta:meta])*
        $name:ident, $label:literal {
            $($variant:ident => $text:literal $([$($alias:literal),*])?),+ $(,)?
        }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $($variant),+
        }

        impl Categorical for $name {
            const NAME: &'static str = $label;
            const LEVELS: &'static [Self] = &[$($name::$variant),+];
            fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
            fn aliases(self) -> &'static [&'static str] {
                match self {
                    $($name::$variant => &[$($($alias),*)?]),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = UnknownLevel;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                <$name as Categorical>::parse_level(s)
            }
        }
    };
}

categorical!(Sex, "sex" {
    Female => "Female" ["f"],
    Male => "Male" ["m"],
});

categorical!(DischargeDisposition, "discharge_disposition" {
    Dead => "Dead" ["expired", "died"],
    Home => "Home",
    OtherFacility => "OtherFacility",
});

categorical!(AdmissionType, "admission_type" {
    Emergency => "Emergency" ["emergencyadmission"],
    RoutineElective => "RoutineElective" ["routineelectiveadmission", "elective"],
    Urgent => "Urgent" ["urgentadmission"],
});

categorical!(EncounterType, "encounter_type" {
    Emergency => "Emergency" ["emergencydepartment"],
    EmergencyToInpatient => "EmergencyToInpatient" ["emergencydepartmentadmittoinpatientstay"],
    Inpatient => "Inpatient" ["inpatienthospitalstay"],
    ObservationStay => "ObservationStay" ["observation"],
});

categorical!(BmiCategory, "bmi_category" {
    Missing => "Missing",
    Normal => "Normal",
    Obese => "Obese",
    Overweight => "Overweight",
    Underweight => "Underweight",
});

categorical!(Payer, "payer" {
    Private => "Private",
    Public => "Public",
    SelfPay => "SelfPay",
    Other => "Other",
});

categorical!(RaceEthnicity, "race_ethnicity" {
    Hispanic => "Hispanic",
    NHBlack => "NHBlack" ["nonhispanicblack"],
    NHWhite => "NHWhite" ["nonhispanicwhite"],
    NHAsian => "NHAsian" ["nonhispanicasian"],
    Other => "Other" ["otherraces"],
});

categorical!(
    /// Result bucket for a laboratory test. `Missing` in source extracts
    /// means the test was not drawn and maps to `NotTaken`.
    LabLevel, "lab_level" {
    High => "High",
    Low => "Low",
    Normal => "Normal",
    NotTaken => "NotTaken" ["missing"],
});

categorical!(NoteType, "note_type" {
    EDAdmission => "EDAdmission" ["edadmissionnote", "emergencydepartmentadmission"],
    Progress => "Progress" ["progressnote"],
    Operative => "Operative" ["operativenote"],
    HistoryPhysical => "HistoryPhysical" ["hp", "historyandphysical"],
    DischargeSummary => "DischargeSummary",
    Other => "Other",
});

/// Boolean columns of the structured table, in file order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinaryField {
    IcuTransfer,
    Vaccinated,
    Surgery,
    Cancer,
    Cardiovascular,
    Hypertension,
    ChronicLiver,
    Copd,
    Asthma,
    ChronicRenal,
    Diabetes,
    Bronchodilator,
    Steroid,
    AnticoagulantAntiplatelet,
    Diuretic,
    CoughSuppressant,
    Paralytic,
    Expectorant,
    Remdesivir,
    InhaledSteroid,
}

impl BinaryField {
    pub const ALL: [BinaryField; 20] = [
        BinaryField::IcuTransfer,
        BinaryField::Vaccinated,
        BinaryField::Surgery,
        BinaryField::Cancer,
        BinaryField::Cardiovascular,
        BinaryField::Hypertension,
        BinaryField::ChronicLiver,
        BinaryField::Copd,
        BinaryField::Asthma,
        BinaryField::ChronicRenal,
        BinaryField::Diabetes,
        BinaryField::Bronchodilator,
        BinaryField::Steroid,
        BinaryField::AnticoagulantAntiplatelet,
        BinaryField::Diuretic,
        BinaryField::CoughSuppressant,
        BinaryField::Paralytic,
        BinaryField::Expectorant,
        BinaryField::Remdesivir,
        BinaryField::InhaledSteroid,
    ];

    pub fn column(self) -> &'static str {
        match self {
            BinaryField::IcuTransfer => "icu_transfer",
            BinaryField::Vaccinated => "vaccinated",
            BinaryField::Surgery => "surgery",
            BinaryField::Cancer => "cancer",
            BinaryField::Cardiovascular => "cardiovascular",
            BinaryField::Hypertension => "hypertension",
            BinaryField::ChronicLiver => "chronic_liver",
            BinaryField::Copd => "copd",
            BinaryField::Asthma => "asthma",
            BinaryField::ChronicRenal => "chronic_renal",
            BinaryField::Diabetes => "diabetes",
            BinaryField::Bronchodilator => "bronchodilator",
            BinaryField::Steroid => "steroid",
            BinaryField::AnticoagulantAntiplatelet => "anticoagulant_antiplatelet",
            BinaryField::Diuretic => "diuretic",
            BinaryField::CoughSuppressant => "cough_suppressant",
            BinaryField::Paralytic => "paralytic",
            BinaryField::Expectorant => "expectorant",
            BinaryField::Remdesivir => "remdesivir",
            BinaryField::InhaledSteroid => "inhaled_steroid",
        }
    }

    pub fn from_column(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|f| f.column() == name)
    }
}

/// Multi-level categorical columns of the structured table, in file order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CategoricalField {
    Sex,
    DischargeDisposition,
    AdmissionType,
    EncounterType,
    BmiCategory,
    Payer,
    RaceEthnicity,
    LymphocyteAbs,
    Lymphocyte,
    Crp,
    Ferritin,
    DDimer,
    Procalcitonin,
}

impl CategoricalField {
    pub const ALL: [CategoricalField; 13] = [
        CategoricalField::Sex,
        CategoricalField::DischargeDisposition,
        CategoricalField::AdmissionType,
        CategoricalField::EncounterType,
        CategoricalField::BmiCategory,
        CategoricalField::Payer,
        CategoricalField::RaceEthnicity,
        CategoricalField::LymphocyteAbs,
        CategoricalField::Lymphocyte,
        CategoricalField::Crp,
        CategoricalField::Ferritin,
        CategoricalField::DDimer,
        CategoricalField::Procalcitonin,
    ];

    pub fn column(self) -> &'static str {
        match self {
            CategoricalField::Sex => "sex",
            CategoricalField::DischargeDisposition => "discharge_disposition",
            CategoricalField::AdmissionType => "admission_type",
            CategoricalField::EncounterType => "encounter_type",
            CategoricalField::BmiCategory => "bmi_category",
            CategoricalField::Payer => "payer",
            CategoricalField::RaceEthnicity => "race_ethnicity",
            CategoricalField::LymphocyteAbs => "lymphocyte_abs",
            CategoricalField::Lymphocyte => "lymphocyte",
            CategoricalField::Crp => "crp",
            CategoricalField::Ferritin => "ferritin",
            CategoricalField::DDimer => "d_dimer",
            CategoricalField::Procalcitonin => "procalcitonin",
        }
    }

    pub fn levels(self) -> Vec<&'static str> {
        fn names<C: Categorical>() -> Vec<&'static str> {
            C::LEVELS.iter().map(|l| l.as_str()).collect()
        }
        match self {
            CategoricalField::Sex => names::<Sex>(),
            CategoricalField::DischargeDisposition => names::<DischargeDisposition>(),
            CategoricalField::AdmissionType => names::<AdmissionType>(),
            CategoricalField::EncounterType => names::<EncounterType>(),
            CategoricalField::BmiCategory => names::<BmiCategory>(),
            CategoricalField::Payer => names::<Payer>(),
            CategoricalField::RaceEthnicity => names::<RaceEthnicity>(),
            _ => names::<LabLevel>(),
        }
    }

    pub fn n_levels(self) -> usize {
        self.levels().len()
    }

    pub fn from_column(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|f| f.column() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NumericField {
    AgeYears,
    LengthOfStayDays,
}

impl NumericField {
    pub const ALL: [NumericField; 2] = [NumericField::AgeYears, NumericField::LengthOfStayDays];

    pub fn column(self) -> &'static str {
        match self {
            NumericField::AgeYears => "age_years",
            NumericField::LengthOfStayDays => "length_of_stay_days",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Comorbidities {
    pub surgery: bool,
    pub cancer: bool,
    pub cardiovascular: bool,
    pub hypertension: bool,
    pub chronic_liver: bool,
    pub copd: bool,
    pub asthma: bool,
    pub chronic_renal: bool,
    pub diabetes: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Medications {
    pub bronchodilator: bool,
    pub steroid: bool,
    pub anticoagulant_antiplatelet: bool,
    pub diuretic: bool,
    pub cough_suppressant: bool,
    pub paralytic: bool,
    pub expectorant: bool,
    pub remdesivir: bool,
    pub inhaled_steroid: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabPanel {
    pub lymphocyte_abs: LabLevel,
    pub lymphocyte: LabLevel,
    pub crp: LabLevel,
    pub ferritin: LabLevel,
    pub d_dimer: LabLevel,
    pub procalcitonin: LabLevel,
}

impl Default for LabPanel {
    fn default() -> Self {
        LabPanel {
            lymphocyte_abs: LabLevel::NotTaken,
            lymphocyte: LabLevel::NotTaken,
            crp: LabLevel::NotTaken,
            ferritin: LabLevel::NotTaken,
            d_dimer: LabLevel::NotTaken,
            procalcitonin: LabLevel::NotTaken,
        }
    }
}

/// One row of `structured.csv`: a single index admission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredRecord {
    pub patient_id: String,
    pub sex: Sex,
    pub age_years: f64,
    pub discharge_disposition: DischargeDisposition,
    pub admission_type: AdmissionType,
    pub icu_transfer: bool,
    pub encounter_type: EncounterType,
    pub length_of_stay_days: f64,
    pub bmi_category: BmiCategory,
    pub payer: Payer,
    pub race_ethnicity: RaceEthnicity,
    pub vaccinated: bool,
    pub comorbidities: Comorbidities,
    pub medications: Medications,
    pub labs: LabPanel,
}

impl StructuredRecord {
    pub fn binary(&self, field: BinaryField) -> bool {
        let c = &self.comorbidities;
        let m = &self.medications;
        match field {
            BinaryField::IcuTransfer => self.icu_transfer,
            BinaryField::Vaccinated => self.vaccinated,
            BinaryField::Surgery => c.surgery,
            BinaryField::Cancer => c.cancer,
            BinaryField::Cardiovascular => c.cardiovascular,
            BinaryField::Hypertension => c.hypertension,
            BinaryField::ChronicLiver => c.chronic_liver,
            BinaryField::Copd => c.copd,
            BinaryField::Asthma => c.asthma,
            BinaryField::ChronicRenal => c.chronic_renal,
            BinaryField::Diabetes => c.diabetes,
            BinaryField::Bronchodilator => m.bronchodilator,
            BinaryField::Steroid => m.steroid,
            BinaryField::AnticoagulantAntiplatelet => m.anticoagulant_antiplatelet,
            BinaryField::Diuretic => m.diuretic,
            BinaryField::CoughSuppressant => m.cough_suppressant,
            BinaryField::Paralytic => m.paralytic,
            BinaryField::Expectorant => m.expectorant,
            BinaryField::Remdesivir => m.remdesivir,
            BinaryField::InhaledSteroid => m.inhaled_steroid,
        }
    }

    pub fn set_binary(&mut self, field: BinaryField, value: bool) {
        let c = &mut self.comorbidities;
        let m = &mut self.medications;
        let slot = match field {
            BinaryField::IcuTransfer => &mut self.icu_transfer,
            BinaryField::Vaccinated => &mut self.vaccinated,
            BinaryField::Surgery => &mut c.surgery,
            BinaryField::Cancer => &mut c.cancer,
            BinaryField::Cardiovascular => &mut c.cardiovascular,
            BinaryField::Hypertension => &mut c.hypertension,
            BinaryField::ChronicLiver => &mut c.chronic_liver,
            BinaryField::Copd => &mut c.copd,
            BinaryField::Asthma => &mut c.asthma,
            BinaryField::ChronicRenal => &mut c.chronic_renal,
            BinaryField::Diabetes => &mut c.diabetes,
            BinaryField::Bronchodilator => &mut m.bronchodilator,
            BinaryField::Steroid => &mut m.steroid,
            BinaryField::AnticoagulantAntiplatelet => &mut m.anticoagulant_antiplatelet,
            BinaryField::Diuretic => &mut m.diuretic,
            BinaryField::CoughSuppressant => &mut m.cough_suppressant,
            BinaryField::Paralytic => &mut m.paralytic,
            BinaryField::Expectorant => &mut m.expectorant,
            BinaryField::Remdesivir => &mut m.remdesivir,
            BinaryField::InhaledSteroid => &mut m.inhaled_steroid,
        };
        *slot = value;
    }

    /// Level index of a categorical field within its declared domain.
    pub fn level(&self, field: CategoricalField) -> usize {
        match field {
            CategoricalField::Sex => self.sex.index(),
            CategoricalField::DischargeDisposition => self.discharge_disposition.index(),
            CategoricalField::AdmissionType => self.admission_type.index(),
            CategoricalField::EncounterType => self.encounter_type.index(),
            CategoricalField::BmiCategory => self.bmi_category.index(),
            CategoricalField::Payer => self.payer.index(),
            CategoricalField::RaceEthnicity => self.race_ethnicity.index(),
            CategoricalField::LymphocyteAbs => self.labs.lymphocyte_abs.index(),
            CategoricalField::Lymphocyte => self.labs.lymphocyte.index(),
            CategoricalField::Crp => self.labs.crp.index(),
            CategoricalField::Ferritin => self.labs.ferritin.index(),
            CategoricalField::DDimer => self.labs.d_dimer.index(),
            CategoricalField::Procalcitonin => self.labs.procalcitonin.index(),
        }
    }

    /// Set a categorical field by level index. Panics on an out-of-domain index.
    pub fn set_level(&mut self, field: CategoricalField, index: usize) {
        fn pick<C: Categorical>(i: usize) -> C {
            C::LEVELS[i]
        }
        match field {
            CategoricalField::Sex => self.sex = pick(index),
            CategoricalField::DischargeDisposition => self.discharge_disposition = pick(index),
            CategoricalField::AdmissionType => self.admission_type = pick(index),
            CategoricalField::EncounterType => self.encounter_type = pick(index),
            CategoricalField::BmiCategory => self.bmi_category = pick(index),
            CategoricalField::Payer => self.payer = pick(index),
            CategoricalField::RaceEthnicity => self.race_ethnicity = pick(index),
            CategoricalField::LymphocyteAbs => self.labs.lymphocyte_abs = pick(index),
            CategoricalField::Lymphocyte => self.labs.lymphocyte = pick(index),
            CategoricalField::Crp => self.labs.crp = pick(index),
            CategoricalField::Ferritin => self.labs.ferritin = pick(index),
            CategoricalField::DDimer => self.labs.d_dimer = pick(index),
            CategoricalField::Procalcitonin => self.labs.procalcitonin = pick(index),
        }
    }

    pub fn numeric(&self, field: NumericField) -> f64 {
        match field {
            NumericField::AgeYears => self.age_years,
            NumericField::LengthOfStayDays => self.length_of_stay_days,
        }
    }

    /// A record with every flag false and every categorical at a fixed default level.
    pub fn blank(patient_id: impl Into<String>) -> Self {
        StructuredRecord {
            patient_id: patient_id.into(),
            sex: Sex::Female,
            age_years: 0.0,
            discharge_disposition: DischargeDisposition::Home,
            admission_type: AdmissionType::Emergency,
            icu_transfer: false,
            encounter_type: EncounterType::EmergencyToInpatient,
            length_of_stay_days: 0.0,
            bmi_category: BmiCategory::Normal,
            payer: Payer::Private,
            race_ethnicity: RaceEthnicity::NHWhite,
            vaccinated: false,
            comorbidities: Comorbidities::default(),
            medications: Medications::default(),
            labs: LabPanel::default(),
        }
    }
}

/// One provider note.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoteDocument {
    pub patient_id: String,
    pub note_type: NoteType,
    pub text: String,
}

/// Chart-review adjudication for one patient.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjudicatedLabel {
    pub patient_id: String,
    pub due_to_covid: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lab_level_accepts_spaced_and_missing_spellings() {
        assert_eq!("Not Taken".parse::<LabLevel>().unwrap(), LabLevel::NotTaken);
        assert_eq!("not_taken".parse::<LabLevel>().unwrap(), LabLevel::NotTaken);
        assert_eq!("Missing".parse::<LabLevel>().unwrap(), LabLevel::NotTaken);
        assert_eq!("HIGH".parse::<LabLevel>().unwrap(), LabLevel::High);
    }

    #[test]
    fn unknown_sex_is_rejected() {
        assert!("Unknown".parse::<Sex>().is_err());
        assert_eq!("female".parse::<Sex>().unwrap(), Sex::Female);
    }

    #[test]
    fn table_spellings_map_to_levels() {
        assert_eq!("Self-Pay".parse::<Payer>().unwrap(), Payer::SelfPay);
        assert_eq!(
            "Emergency to Inpatient".parse::<EncounterType>().unwrap(),
            EncounterType::EmergencyToInpatient
        );
        assert_eq!(
            "Non-Hispanic Black".parse::<RaceEthnicity>().unwrap(),
            RaceEthnicity::NHBlack
        );
        assert_eq!(
            "Other Facility".parse::<DischargeDisposition>().unwrap(),
            DischargeDisposition::OtherFacility
        );
    }

    #[test]
    fn field_accessors_round_trip() {
        let mut r = StructuredRecord::blank("p");
        for f in BinaryField::ALL {
            r.set_binary(f, true);
            assert!(r.binary(f));
        }
        for f in CategoricalField::ALL {
            let last = f.n_levels() - 1;
            r.set_level(f, last);
            assert_eq!(r.level(f), last);
        }
    }
}
