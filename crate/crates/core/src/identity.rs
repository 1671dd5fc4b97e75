//! Synthetic persons, institutions and addresses drawn from bundled word
//! lists, plus per-patient identity assembly with geographic matching.
//!
//! The address corpus under `data/places.csv` is a small stand-in list of
//! real US city/county/state/ZIP rows; street lines are synthetic.

use std::sync::OnceLock;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeding;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IdentityError {
    #[error("pool counts must be at least 1")]
    EmptyPool,
    #[error("patient index {index} out of range for a pool of {len} persons")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("patient id {0} assigned twice")]
    PatientIdCollision(String),
}

pub const STATES: &[&str] = &[
    "AK", "AL", "AR", "AZ", "CA", "CO", "CT", "DC", "DE", "FL", "GA", "HI", "IA", "ID", "IL", "IN", "KS", "KY",
    "LA", "MA", "MD", "ME", "MI", "MN", "MO", "MS", "MT", "NC", "ND", "NE", "NH", "NJ", "NM", "NV", "NY", "OH",
    "OK", "OR", "PA", "RI", "SC", "SD", "TN", "TX", "UT", "VA", "VT", "WA", "WI", "WV", "WY",
];

const DEPARTMENTS: &[&str] = &["RADIOLOGY", "DIAGNOSTIC IMAGING", "MEDICAL IMAGING", "NUCLEAR MEDICINE", "CARDIOLOGY"];
const INSTITUTION_KINDS: &[&str] = &[
    "GENERAL HOSPITAL",
    "MEDICAL CENTER",
    "IMAGING CENTER",
    "COMMUNITY HOSPITAL",
    "REGIONAL MEDICAL CENTER",
];

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Address {
    pub street: String,
    pub city: String,
    pub county: String,
    pub state: String,
    pub zip: String,
    pub country: String,
}

impl Address {
    pub fn is_valid(&self) -> bool {
        self.zip.len() == 5 && self.zip.bytes().all(|b| b.is_ascii_digit()) && STATES.contains(&self.state.as_str())
    }

    /// Single-line rendering used for DICOM address attributes.
    pub fn one_line(&self) -> String {
        format!("{} {} {} {}", self.street, self.city, self.state, self.zip)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Patient,
    Physician,
    Technician,
    Operator,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sex {
    M,
    F,
    O,
}

impl Sex {
    pub fn code(self) -> &'static str {
        match self {
            Sex::M => "M",
            Sex::F => "F",
            Sex::O => "O",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Person {
    pub family_name: String,
    pub given_name: String,
    pub middle: Option<String>,
    pub role: Role,
    pub birth_date: NaiveDate,
    pub sex: Sex,
    pub phone: String,
    pub ssn_like: String,
    pub email: String,
    pub address: Address,
}

impl Person {
    /// `FAMILY^GIVEN` or `FAMILY^GIVEN^MIDDLE`.
    pub fn dicom_name(&self) -> String {
        match &self.middle {
            Some(m) => format!("{}^{}^{}", self.family_name, self.given_name, m),
            None => format!("{}^{}", self.family_name, self.given_name),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Institution {
    pub name: String,
    pub address: Address,
    pub department: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentityPool {
    pub seed: u64,
    pub persons: Vec<Person>,
    pub institutions: Vec<Institution>,
    pub addresses: Vec<Address>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticPatientRecord {
    pub patient: Person,
    pub patient_id: String,
    pub referring_physician: Person,
    pub operator: Person,
    pub institution: Institution,
    pub date_shift_days: i32,
    pub accession_seed: u64,
}

#[derive(Debug, Deserialize)]
pub struct Place {
    pub city: String,
    pub county: String,
    pub state: String,
    pub zip: String,
}

pub struct Corpus {
    pub given: Vec<&'static str>,
    pub family: Vec<&'static str>,
    pub streets: Vec<&'static str>,
    pub places: Vec<Place>,
}

fn word_list(text: &'static str) -> Vec<&'static str> {
    text.lines().map(str::trim).filter(|l| !l.is_empty()).collect()
}

/// Bundled name, street and place lists.
pub fn corpus() -> &'static Corpus {
    static CORPUS: OnceLock<Corpus> = OnceLock::new();
    CORPUS.get_or_init(|| {
        let places = csv::Reader::from_reader(include_str!("../data/places.csv").as_bytes())
            .deserialize()
            .collect::<Result<Vec<Place>, _>>()
            .expect("bundled places.csv is well-formed");
        Corpus {
            given: word_list(include_str!("../data/given_names.txt")),
            family: word_list(include_str!("../data/family_names.txt")),
            streets: word_list(include_str!("../data/street_patterns.txt")),
            places,
        }
    })
}

fn random_address(rng: &mut ChaCha8Rng) -> Address {
    let c = corpus();
    let place = c.places.choose(rng).unwrap();
    let pattern = c.streets.choose(rng).unwrap();
    Address {
        street: pattern.replace("{N}", &rng.gen_range(100..9999).to_string()),
        city: place.city.clone(),
        county: place.county.clone(),
        state: place.state.clone(),
        zip: place.zip.clone(),
        country: "USA".into(),
    }
}

fn digits(rng: &mut ChaCha8Rng, n: usize) -> String {
    (0..n).map(|_| char::from(b'0' + rng.gen_range(0..10u8))).collect()
}

fn random_person(rng: &mut ChaCha8Rng, addresses: &[Address]) -> Person {
    let c = corpus();
    let family = c.family.choose(rng).unwrap().to_string();
    let given = c.given.choose(rng).unwrap().to_string();
    let middle = rng.gen_bool(0.3).then(|| c.given.choose(rng).unwrap().to_string());
    let birth_date = NaiveDate::from_ymd_opt(1930, 1, 1).unwrap() + chrono::Days::new(rng.gen_range(0..27_000));
    let sex = *[Sex::M, Sex::F, Sex::O].choose_weighted(rng, |s| if *s == Sex::O { 1 } else { 10 }).unwrap();
    let phone = format!("{}{}", rng.gen_range(2..10), digits(rng, 9));
    let ssn_like = format!("{}-{}-{}", rng.gen_range(900..1000), digits(rng, 2), digits(rng, 4));
    let email = format!("{}.{}@example.org", given.to_lowercase(), family.to_lowercase());
    Person {
        family_name: family,
        given_name: given,
        middle,
        role: Role::Patient,
        birth_date,
        sex,
        phone,
        ssn_like,
        email,
        address: addresses.choose(rng).unwrap().clone(),
    }
}

/// Builds a pool of exactly the requested sizes; a pure function of its
/// arguments.
pub fn generate_pool(
    seed: u64,
    n_persons: usize,
    n_institutions: usize,
    n_addresses: usize,
) -> Result<IdentityPool, IdentityError> {
    if n_persons == 0 || n_institutions == 0 || n_addresses == 0 {
        return Err(IdentityError::EmptyPool);
    }
    let mut rng = seeding::stream(seed, "pool", 0);
    let addresses: Vec<Address> = (0..n_addresses).map(|_| random_address(&mut rng)).collect();
    let persons = (0..n_persons).map(|_| random_person(&mut rng, &addresses)).collect();
    let c = corpus();
    let institutions = (0..n_institutions)
        .map(|_| {
            let address = addresses.choose(&mut rng).unwrap().clone();
            let kind = INSTITUTION_KINDS.choose(&mut rng).unwrap();
            let name = if rng.gen_bool(0.5) {
                format!("{} {}", address.city, kind)
            } else {
                format!("{} MEMORIAL {}", c.family.choose(&mut rng).unwrap(), kind)
            };
            Institution {
                name,
                address,
                department: DEPARTMENTS.choose(&mut rng).unwrap().to_string(),
            }
        })
        .collect();
    Ok(IdentityPool {
        seed,
        persons,
        institutions,
        addresses,
    })
}

/// Proximity tier of `candidate` relative to `anchor`: 0 same city, 1 same
/// county, 2 same state, 3 anything else.
pub fn proximity_tier(anchor: &Address, candidate: &Address) -> u8 {
    let same_state = anchor.state == candidate.state;
    if same_state && anchor.county == candidate.county && anchor.city == candidate.city {
        0
    } else if same_state && anchor.county == candidate.county {
        1
    } else if same_state {
        2
    } else {
        3
    }
}

/// Uniform pick from the nearest non-empty proximity tier.
pub fn pick_nearby<'a, T>(
    items: &'a [T],
    address_of: impl Fn(&T) -> &Address,
    anchor: &Address,
    rng: &mut ChaCha8Rng,
) -> Option<&'a T> {
    let best = items.iter().map(|i| proximity_tier(anchor, address_of(i))).min()?;
    let tier: Vec<&T> = items.iter().filter(|i| proximity_tier(anchor, address_of(i)) == best).collect();
    tier.choose(rng).copied()
}

pub fn pick_nearby_address(pool: &IdentityPool, anchor: &Address, rng: &mut ChaCha8Rng) -> Address {
    pick_nearby(&pool.addresses, |a| a, anchor, rng)
        .expect("pool has at least one address")
        .clone()
}

/// Uniform over [-365,-1] and [1,365].
pub fn draw_date_shift(rng: &mut ChaCha8Rng) -> i32 {
    let k = rng.gen_range(0..730);
    if k < 365 {
        k - 365
    } else {
        k - 364
    }
}

pub fn assign_identity(
    pool: &IdentityPool,
    patient_index: usize,
    rng: &mut ChaCha8Rng,
) -> Result<SyntheticPatientRecord, IdentityError> {
    let patient = pool.persons.get(patient_index).ok_or(IdentityError::IndexOutOfRange {
        index: patient_index,
        len: pool.persons.len(),
    })?;
    let institution = pick_nearby(&pool.institutions, |i| &i.address, &patient.address, rng)
        .expect("pool has at least one institution")
        .clone();
    let others: Vec<&Person> = pool
        .persons
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != patient_index)
        .map(|(_, p)| p)
        .collect();
    let staff = |rng: &mut ChaCha8Rng, role: Role, anchor: &Address| -> Person {
        let mut p = if others.is_empty() {
            patient.clone()
        } else {
            (*pick_nearby(&others, |p| &p.address, anchor, rng).unwrap()).clone()
        };
        p.role = role;
        p
    };
    let referring_physician = staff(rng, Role::Physician, &patient.address);
    let operator = staff(rng, Role::Operator, &institution.address);
    let id_len = rng.gen_range(8..=10);
    let patient_id = format!("{}{}", rng.gen_range(1..10), digits(rng, id_len - 1));
    Ok(SyntheticPatientRecord {
        patient: patient.clone(),
        patient_id,
        referring_physician,
        operator,
        institution,
        date_shift_days: draw_date_shift(rng),
        accession_seed: rng.gen(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn pool_is_deterministic_and_sized() {
        let a = generate_pool(1, 10, 3, 20).unwrap();
        let b = generate_pool(1, 10, 3, 20).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.persons.len(), a.institutions.len(), a.addresses.len()), (10, 3, 20));
        assert_ne!(a, generate_pool(2, 10, 3, 20).unwrap());
        assert_eq!(generate_pool(1, 1, 1, 1).unwrap().persons.len(), 1);
        assert_eq!(generate_pool(1, 0, 1, 1), Err(IdentityError::EmptyPool));
    }

    #[test]
    fn zips_come_from_bundled_corpus() {
        let zips: HashSet<&str> = corpus().places.iter().map(|p| p.zip.as_str()).collect();
        let pool = generate_pool(9, 50, 10, 200).unwrap();
        for a in pool.addresses.iter().chain(pool.institutions.iter().map(|i| &i.address)) {
            assert!(zips.contains(a.zip.as_str()), "{}", a.zip);
            assert!(a.is_valid());
        }
    }

    #[test]
    fn bundled_states_are_known() {
        assert!(corpus().places.iter().all(|p| STATES.contains(&p.state.as_str())));
    }

    #[test]
    fn person_names_are_legal_pn() {
        let pool = generate_pool(3, 200, 1, 5).unwrap();
        for p in &pool.persons {
            let pn = p.dicom_name();
            let parts: Vec<&str> = pn.split('^').collect();
            assert!(parts.len() == 2 || parts.len() == 3);
            assert!(parts.iter().all(|c| !c.is_empty() && c.bytes().all(|b| b.is_ascii_uppercase() || b == b' ')));
            assert!(p.phone.bytes().all(|b| b.is_ascii_digit()) && p.phone.len() == 10);
            assert!(p.ssn_like.starts_with('9'));
        }
    }

    #[test]
    fn assignment_is_deterministic_with_valid_ids() {
        let pool = generate_pool(5, 30, 4, 40).unwrap();
        for i in 0..30 {
            let a = assign_identity(&pool, i, &mut seeding::stream(5, "patient", i as u64)).unwrap();
            let b = assign_identity(&pool, i, &mut seeding::stream(5, "patient", i as u64)).unwrap();
            assert_eq!(a, b);
            assert!((8..=10).contains(&a.patient_id.len()));
            assert!(a.patient_id.bytes().all(|c| c.is_ascii_digit()));
            assert_ne!(a.date_shift_days, 0);
            assert_eq!(a.referring_physician.role, Role::Physician);
        }
        assert_eq!(
            assign_identity(&pool, 30, &mut seeding::stream(5, "patient", 0)),
            Err(IdentityError::IndexOutOfRange { index: 30, len: 30 })
        );
    }

    #[test]
    fn shift_range_and_sign_balance() {
        let mut rng = seeding::stream(11, "shift", 0);
        let draws: Vec<i32> = (0..10_000).map(|_| draw_date_shift(&mut rng)).collect();
        assert!(draws.iter().all(|d| *d != 0 && (-365..=365).contains(d)));
        let neg = draws.iter().filter(|d| **d < 0).count() as f64 / draws.len() as f64;
        assert!((0.45..=0.55).contains(&neg), "{neg}");
        let seen: HashSet<i32> = draws.into_iter().collect();
        assert!(seen.contains(&-365) && seen.contains(&365) && seen.contains(&-1) && seen.contains(&1));
    }

    fn addr(city: &str, county: &str, state: &str) -> Address {
        Address {
            street: "1 MAIN ST".into(),
            city: city.into(),
            county: county.into(),
            state: state.into(),
            zip: "00000".into(),
            country: "USA".into(),
        }
    }

    fn pool_of(addresses: Vec<Address>) -> IdentityPool {
        IdentityPool {
            seed: 0,
            persons: vec![],
            institutions: vec![],
            addresses,
        }
    }

    #[test]
    fn nearby_prefers_closest_tier() {
        let addresses = vec![
            addr("A", "X", "IL"),
            addr("A", "X", "IL"),
            addr("A", "X", "IL"),
            addr("B", "X", "IL"),
            addr("C", "Y", "IL"),
            addr("D", "Z", "TX"),
        ];
        let pool = pool_of(addresses.clone());
        let mut rng = seeding::stream(1, "near", 0);
        for _ in 0..50 {
            assert_eq!(pick_nearby_address(&pool, &addr("A", "X", "IL"), &mut rng).city, "A");
            assert_eq!(pick_nearby_address(&pool, &addr("Q", "X", "IL"), &mut rng).county, "X");
            assert_eq!(pick_nearby_address(&pool, &addr("Q", "W", "IL"), &mut rng).state, "IL");
        }
        // Nothing in WA: every tier-3 address is eligible, and the oracle
        // confirms tiers 0-2 are empty.
        let anchor = addr("Q", "W", "WA");
        assert!(addresses.iter().all(|a| proximity_tier(&anchor, a) == 3));
        let seen: HashSet<String> =
            (0..200).map(|_| pick_nearby_address(&pool, &anchor, &mut rng).city).collect();
        assert_eq!(seen.len(), 4);
        let single = pool_of(vec![addr("D", "Z", "TX")]);
        assert_eq!(pick_nearby_address(&single, &addr("A", "X", "IL"), &mut rng).city, "D");
    }

    #[test]
    fn exhaustive_tier_correctness_on_generated_pool() {
        let pool = generate_pool(21, 5, 5, 120).unwrap();
        let mut rng = seeding::stream(21, "near", 0);
        for anchor in &pool.addresses {
            let best = pool.addresses.iter().map(|a| proximity_tier(anchor, a)).min().unwrap();
            let got = pick_nearby_address(&pool, anchor, &mut rng);
            assert_eq!(proximity_tier(anchor, &got), best);
        }
    }
}
