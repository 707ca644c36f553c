use rand::seq::index::sample;

use super::{Gender, Label, ParticipantRecord, Split};
use crate::seed::Rng;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Quadrant {
    pub gender: Gender,
    pub label: Label,
    pub members: Vec<u32>,
}

/// The four (gender, label) cells of one split, in the order
/// (F, ND), (F, D), (M, ND), (M, D).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Quadrants(pub [Quadrant; 4]);

impl Quadrants {
    fn index(gender: Gender, label: Label) -> usize {
        let g = match gender {
            Gender::Female => 0,
            Gender::Male => 2,
        };
        g + match label {
            Label::NotDepressed => 0,
            Label::Depressed => 1,
        }
    }

    pub fn get(&self, gender: Gender, label: Label) -> &Quadrant {
        &self.0[Self::index(gender, label)]
    }

    pub fn count(&self, gender: Gender, label: Label) -> usize {
        self.get(gender, label).members.len()
    }

    /// Sizes in (F-ND, F-D, M-ND, M-D) order.
    pub fn counts(&self) -> [usize; 4] {
        [0, 1, 2, 3].map(|i| self.0[i].members.len())
    }

    pub fn total(&self) -> usize {
        self.counts().iter().sum()
    }

    /// Empirical `p(D | gender)`; `None` when the gender is absent.
    pub fn depression_rate(&self, gender: Gender) -> Option<f64> {
        let d = self.count(gender, Label::Depressed);
        let n = d + self.count(gender, Label::NotDepressed);
        (n > 0).then(|| d as f64 / n as f64)
    }
}

/// Splits the records belonging to `split` into gender x label quadrants.
pub fn partition_quadrants(records: &[ParticipantRecord], split: Split) -> Quadrants {
    let mut quads = [
        (Gender::Female, Label::NotDepressed),
        (Gender::Female, Label::Depressed),
        (Gender::Male, Label::NotDepressed),
        (Gender::Male, Label::Depressed),
    ]
    .map(|(gender, label)| Quadrant { gender, label, members: Vec::new() });
    for r in records.iter().filter(|r| r.split == split) {
        quads[Quadrants::index(r.gender, r.label())].members.push(r.id);
    }
    Quadrants(quads)
}

/// Draws `k` of `pool` uniformly without replacement, returned in pool order.
fn draw<'a>(pool: &[&'a ParticipantRecord], k: usize, rng: &mut Rng) -> Vec<&'a ParticipantRecord> {
    let mut idx = sample(rng, pool.len(), k).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| pool[i]).collect()
}

fn restore_order(records: &[ParticipantRecord], keep: &[&ParticipantRecord]) -> Vec<ParticipantRecord> {
    let ids: std::collections::HashSet<u32> = keep.iter().map(|r| r.id).collect();
    records.iter().filter(|r| ids.contains(&r.id)).cloned().collect()
}

/// Keeps every depressed record and an equal-sized uniform sample of the rest.
pub fn subsample_class_balance(records: &[ParticipantRecord], rng: &mut Rng) -> Result<Vec<ParticipantRecord>> {
    let (depressed, not): (Vec<&ParticipantRecord>, Vec<&ParticipantRecord>) =
        records.iter().partition(|r| r.label() == Label::Depressed);
    if not.len() < depressed.len() {
        return Err(Error::PreconditionViolated(format!(
            "class balancing expects ND >= D, got ND={} D={}",
            not.len(),
            depressed.len()
        )));
    }
    let mut keep = depressed.clone();
    keep.extend(draw(&not, depressed.len(), rng));
    Ok(restore_order(records, &keep))
}

/// Sub-samples every (gender, label) quadrant down to the smallest one.
pub fn subsample_gender_balance(records: &[ParticipantRecord], rng: &mut Rng) -> Result<Vec<ParticipantRecord>> {
    let cells: Vec<Vec<&ParticipantRecord>> = [
        (Gender::Female, Label::NotDepressed),
        (Gender::Female, Label::Depressed),
        (Gender::Male, Label::NotDepressed),
        (Gender::Male, Label::Depressed),
    ]
    .iter()
    .map(|&(g, l)| records.iter().filter(|r| r.gender == g && r.label() == l).collect())
    .collect();
    if let Some(pos) = cells.iter().position(Vec::is_empty) {
        let name = ["F-ND", "F-D", "M-ND", "M-D"][pos];
        return Err(Error::InsufficientData(format!("quadrant {name} is empty")));
    }
    let smallest = cells.iter().map(Vec::len).min().unwrap_or(0);
    let keep: Vec<&ParticipantRecord> = cells.iter().flat_map(|c| draw(c, smallest, rng)).collect();
    Ok(restore_order(records, &keep))
}
