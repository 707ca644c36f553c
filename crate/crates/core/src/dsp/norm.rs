use std::collections::BTreeMap;

use ndarray::{Array1, Array2, Axis};

use super::{FeatureTensor, Normalization};
use crate::dataset::Gender;
use crate::{Error, Result};

/// Lower bound applied to every standard deviation before dividing.
pub const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormScope {
    PerSignal,
    PerGenderCorpus(Gender),
}

/// Per-row mean and (population, floored) standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub scope: NormScope,
}

impl NormStats {
    fn apply(&self, data: &Array2<f64>) -> Array2<f64> {
        let mean = Array1::from(self.mean.clone()).insert_axis(Axis(1));
        let std = Array1::from(self.std.clone()).insert_axis(Axis(1));
        (data - &mean) / &std
    }
}

fn row_stats(rows: usize, mats: &[&Array2<f64>]) -> (Vec<f64>, Vec<f64>) {
    let mut count = 0usize;
    let mut sum = vec![0.0; rows];
    for m in mats {
        count += m.ncols();
        for (s, row) in sum.iter_mut().zip(m.rows()) {
            *s += row.sum();
        }
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
    let mut sq = vec![0.0; rows];
    for m in mats {
        for ((acc, row), mu) in sq.iter_mut().zip(m.rows()).zip(&mean) {
            *acc += row.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>();
        }
    }
    let std = sq.iter().map(|s| (s / count as f64).sqrt().max(STD_FLOOR)).collect();
    (mean, std)
}

/// Standardises each row of one signal by that row's own mean and std.
pub fn znorm_per_signal(x: &FeatureTensor) -> Result<(FeatureTensor, NormStats)> {
    if x.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "per-signal normalisation needs at least 2 columns, participant {} has {}",
            x.source_id,
            x.len()
        )));
    }
    let (mean, std) = row_stats(x.rows(), &[&x.data]);
    let stats = NormStats { mean, std, scope: NormScope::PerSignal };
    let out = FeatureTensor {
        data: stats.apply(&x.data),
        kind: x.kind,
        source_id: x.source_id,
        norm: Normalization::PerSignal,
    };
    Ok((out, stats))
}

/// Standardises with statistics pooled over the training features of `gender`.
pub fn znorm_per_gender(x: &FeatureTensor, gender: Gender, stats: &NormStats) -> Result<FeatureTensor> {
    match stats.scope {
        NormScope::PerGenderCorpus(g) if g == gender => {}
        other => {
            return Err(Error::InvalidArgument(format!(
                "participant {} is {gender} but stats have scope {other:?}",
                x.source_id
            )))
        }
    }
    if stats.mean.len() != x.rows() || stats.std.len() != x.rows() {
        return Err(Error::InvalidArgument(format!("stats cover {} rows, feature has {}", stats.mean.len(), x.rows())));
    }
    Ok(FeatureTensor {
        data: stats.apply(&x.data),
        kind: x.kind,
        source_id: x.source_id,
        norm: Normalization::PerGender(stats.clone()),
    })
}

pub fn compute_gender_stats(training: &[(&FeatureTensor, Gender)]) -> Result<BTreeMap<Gender, NormStats>> {
    let mut out = BTreeMap::new();
    for gender in [Gender::Female, Gender::Male] {
        let group: Vec<&Array2<f64>> = training.iter().filter(|(_, g)| *g == gender).map(|(f, _)| &f.data).collect();
        let Some(first) = group.first() else {
            return Err(Error::InsufficientData(format!("no training features for gender {gender}")));
        };
        let rows = first.nrows();
        if group.iter().any(|m| m.nrows() != rows) {
            return Err(Error::InvalidArgument(format!("training features of gender {gender} disagree on row count")));
        }
        if group.iter().map(|m| m.ncols()).sum::<usize>() == 0 {
            return Err(Error::InsufficientData(format!("training features of gender {gender} are empty")));
        }
        let (mean, std) = row_stats(rows, &group);
        out.insert(gender, NormStats { mean, std, scope: NormScope::PerGenderCorpus(gender) });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::FeatureKind;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    fn tensor(id: u32, data: Array2<f64>) -> FeatureTensor {
        FeatureTensor { data, kind: FeatureKind::MelLog, source_id: id, norm: Normalization::None }
    }

    #[test]
    fn per_signal_known_rows() {
        let (out, stats) = znorm_per_signal(&tensor(1, array![[1.0, 2.0, 3.0], [5.0, 5.0, 5.0]])).unwrap();
        let s = (2.0f64 / 3.0).sqrt();
        assert_abs_diff_eq!(stats.std[0], s, epsilon = 1e-15);
        for (a, b) in out.data.row(0).iter().zip([-1.0 / s, 0.0, 1.0 / s]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(out.data[[0, 2]], 1.2247, epsilon = 1e-4);
        assert_eq!(out.data.row(1).to_vec(), vec![0.0, 0.0, 0.0]);
        assert_eq!(stats.std[1], STD_FLOOR);
        assert_eq!(out.norm, Normalization::PerSignal);
    }

    #[test]
    fn per_signal_is_idempotent() {
        let (once, _) = znorm_per_signal(&tensor(1, array![[0.3, -1.0, 2.0, 7.5]])).unwrap();
        let (twice, _) = znorm_per_signal(&once).unwrap();
        for (a, b) in once.data.iter().zip(twice.data.iter()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-9);
        }
    }

    #[test]
    fn per_signal_needs_two_columns() {
        assert!(matches!(znorm_per_signal(&tensor(1, array![[1.0]])), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn gender_stats_pool_columns() {
        let a = tensor(1, array![[1.0, 2.0], [0.0, 0.0]]);
        let b = tensor(2, array![[4.0, 5.0, 6.0, 7.0], [1.0, 1.0, 1.0, 1.0]]);
        let m = tensor(3, array![[1.0, 3.0], [2.0, 4.0]]);
        let stats = compute_gender_stats(&[(&a, Gender::Female), (&b, Gender::Female), (&m, Gender::Male)]).unwrap();
        let f = &stats[&Gender::Female];
        // (1+2+4+5+6+7)/6 and (0+0+1+1+1+1)/6
        assert_abs_diff_eq!(f.mean[0], 25.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.mean[1], 4.0 / 6.0, epsilon = 1e-12);
        let var0 = [1.0, 2.0, 4.0, 5.0, 6.0, 7.0].iter().map(|x: &f64| (x - 25.0 / 6.0).powi(2)).sum::<f64>() / 6.0;
        assert_abs_diff_eq!(f.std[0], var0.sqrt(), epsilon = 1e-12);

        // one signal per gender reproduces that signal's own stats
        let (_, own) = znorm_per_signal(&m).unwrap();
        assert_eq!(stats[&Gender::Male].mean, own.mean);
        assert_eq!(stats[&Gender::Male].std, own.std);

        // duplicating a signal does not move the stats
        let dup = compute_gender_stats(&[(&a, Gender::Female), (&a, Gender::Female), (&m, Gender::Male)]).unwrap();
        let single = compute_gender_stats(&[(&a, Gender::Female), (&m, Gender::Male)]).unwrap();
        assert_eq!(dup, single);
    }

    #[test]
    fn gender_stats_need_both_genders() {
        let a = tensor(1, array![[1.0, 2.0]]);
        assert!(matches!(compute_gender_stats(&[(&a, Gender::Female)]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn per_gender_application() {
        let x = tensor(1, array![[1.0, 2.0, 3.0]]);
        let identity = NormStats { mean: vec![0.0], std: vec![1.0], scope: NormScope::PerGenderCorpus(Gender::Male) };
        assert_eq!(znorm_per_gender(&x, Gender::Male, &identity).unwrap().data, x.data);
        assert!(matches!(znorm_per_gender(&x, Gender::Female, &identity), Err(Error::InvalidArgument(_))));

        let train = [tensor(2, array![[0.0, 1.0, 2.0, 3.0]]), tensor(3, array![[10.0, 11.0]])];
        let stats = compute_gender_stats(&[(&train[0], Gender::Male), (&train[1], Gender::Male), (&x, Gender::Female)])
            .unwrap();
        let male = &stats[&Gender::Male];
        let pooled: Vec<f64> =
            train.iter().flat_map(|t| znorm_per_gender(t, Gender::Male, male).unwrap().data.into_iter()).collect();
        assert_abs_diff_eq!(pooled.iter().sum::<f64>() / pooled.len() as f64, 0.0, epsilon = 1e-6);

        let held_out = znorm_per_gender(&tensor(4, array![[20.0, 21.0]]), Gender::Male, male).unwrap();
        assert!(held_out.data.mean().unwrap().abs() > 0.1);
    }

    proptest! {
        #[test]
        fn per_signal_rows_are_standardised(
            rows in 1usize..5,
            cols in 2usize..60,
            seed in proptest::collection::vec(-100.0f64..100.0, 300),
        ) {
            let data = Array2::from_shape_fn((rows, cols), |(r, c)| seed[(r * 61 + c * 7) % seed.len()] + (c as f64).sin() * (r + 1) as f64);
            let (out, stats) = znorm_per_signal(&tensor(0, data)).unwrap();
            for (row, s) in out.data.rows().into_iter().zip(&stats.std) {
                let n = row.len() as f64;
                let mean = row.sum() / n;
                prop_assert!(mean.abs() < 1e-6);
                if *s > STD_FLOOR {
                    let std = (row.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
                    prop_assert!((std - 1.0).abs() < 1e-6);
                }
            }
        }
    }
}
