use std::collections::HashMap;

use super::{DatasetError, DatasetManifest, ManifestRow, Split};
use crate::config::Scenario;
use crate::groundtruth::ClassLabel;
use crate::raster::div_round_half_even;
use crate::seed::{tags, Stream};

/// Stratum of every row in `rows`: the class for classification, the count
/// decile (empirical, over `rows`) for counting.
pub fn strata_for(scenario: Scenario, rows: &[&ManifestRow]) -> Vec<usize> {
    match scenario {
        Scenario::FireClassification => rows
            .iter()
            .map(|r| match r.ground_truth.class_label {
                Some(ClassLabel::Forest) => 0,
                Some(ClassLabel::Fire) => 1,
                None => 2,
            })
            .collect(),
        Scenario::HouseCounting => {
            let counts: Vec<u32> = rows
                .iter()
                .map(|r| r.ground_truth.house_count.unwrap_or(0))
                .collect();
            let mut sorted = counts.clone();
            sorted.sort_unstable();
            let n = sorted.len();
            let thresholds: Vec<u32> = if n == 0 {
                Vec::new()
            } else {
                (1..10).map(|k| sorted[k * n / 10]).collect()
            };
            counts
                .iter()
                .map(|c| thresholds.iter().filter(|&&t| t <= *c).count())
                .collect()
        }
    }
}

/// Reassigns the train/val pool so that `round_half_even(n·val_fraction)`
/// rows are validation, allocated across strata by largest remainder.
///
/// Only non-augmented train/val rows form the pool; augmented rows follow
/// their parent and test/external rows are left alone. Within a stratum rows
/// are ordered by id and shuffled with a stream forked from `split_seed`.
pub fn split_dataset(
    manifest: &DatasetManifest,
    val_fraction: f64,
    split_seed: u64,
) -> Result<DatasetManifest, DatasetError> {
    if !(0.0..=1.0).contains(&val_fraction) {
        return Err(DatasetError::InvalidArgument(format!(
            "validation fraction {val_fraction} is outside [0, 1]"
        )));
    }
    let pool: Vec<usize> = manifest
        .rows
        .iter()
        .enumerate()
        .filter(|(_, r)| matches!(r.split, Split::Train | Split::Val) && r.parent_id.is_none())
        .map(|(i, _)| i)
        .collect();
    let pool_rows: Vec<&ManifestRow> = pool.iter().map(|&i| &manifest.rows[i]).collect();
    let strata = strata_for(manifest.header.scenario, &pool_rows);
    let n_strata = strata.iter().copied().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_strata];
    for (&row, &s) in pool.iter().zip(&strata) {
        members[s].push(row);
    }

    let quotas = allocate(
        &members.iter().map(Vec::len).collect::<Vec<_>>(),
        val_fraction,
    );
    let mut out = manifest.clone();
    for (s, rows) in members.iter_mut().enumerate() {
        rows.sort_by(|&a, &b| manifest.rows[a].image_id.cmp(&manifest.rows[b].image_id));
        Stream::forked(split_seed, tags::SPLIT_STRATUM_BASE + s as u64).shuffle(rows);
        for (rank, &i) in rows.iter().enumerate() {
            out.rows[i].split = if rank < quotas[s] {
                Split::Val
            } else {
                Split::Train
            };
        }
    }

    let parent_split: HashMap<String, Split> = pool
        .iter()
        .map(|&i| (out.rows[i].image_id.clone(), out.rows[i].split))
        .collect();
    for row in &mut out.rows {
        if let Some(p) = &row.parent_id {
            if let Some(&s) = parent_split.get(p) {
                row.split = s;
            }
        }
    }
    Ok(out)
}

/// Largest-remainder apportionment of `round_half_even(Σ sizes · f)`.
fn allocate(sizes: &[usize], fraction: f64) -> Vec<usize> {
    let n: usize = sizes.iter().sum();
    // Fraction on a 2^32 grid keeps the total exact for whole-percent inputs.
    const SCALE: u64 = 1 << 32;
    let f = (fraction * SCALE as f64).round() as u64;
    let total = div_round_half_even(n as u64 * f, SCALE) as usize;
    let mut quotas: Vec<usize> = sizes
        .iter()
        .map(|&s| (s as u64 * f / SCALE) as usize)
        .collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(sizes[i] as u64 * f % SCALE), i));
    let mut remaining = total.saturating_sub(quotas.iter().sum());
    for &i in order.iter().cycle().take(sizes.len() * 2) {
        if remaining == 0 {
            break;
        }
        if quotas[i] < sizes[i] {
            quotas[i] += 1;
            remaining -= 1;
        }
    }
    quotas
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ManifestHeader;
    use crate::groundtruth::GroundTruth;

    fn row(id: String, label: Option<ClassLabel>, count: Option<u32>) -> ManifestRow {
        ManifestRow {
            image_id: id.clone(),
            path: format!("images/{id}.png"),
            image_seed: None,
            split: Split::Train,
            ground_truth: GroundTruth {
                image_id: id,
                class_label: label,
                house_count: count,
                boxes: vec![],
                density_ref: None,
            },
            config_hash: None,
            detail_version: None,
            parent_id: None,
            augmentation: None,
        }
    }

    fn balanced(n: usize) -> DatasetManifest {
        DatasetManifest {
            header: ManifestHeader::new(Scenario::FireClassification, 100, 100, 38),
            rows: (0..n)
                .map(|i| {
                    let label = if i % 2 == 0 {
                        ClassLabel::Fire
                    } else {
                        ClassLabel::Forest
                    };
                    row(format!("img_{i:06}"), Some(label), None)
                })
                .collect(),
        }
    }

    fn count_split(m: &DatasetManifest, s: Split) -> usize {
        m.rows.iter().filter(|r| r.split == s).count()
    }

    #[test]
    fn twenty_percent_of_2000_balanced() {
        let m = split_dataset(&balanced(2000), 0.2, 5).unwrap();
        assert_eq!(count_split(&m, Split::Train), 1600);
        assert_eq!(count_split(&m, Split::Val), 400);
        let val_fire = m
            .rows
            .iter()
            .filter(|r| {
                r.split == Split::Val && r.ground_truth.class_label == Some(ClassLabel::Fire)
            })
            .count();
        assert_eq!(val_fire, 200);
    }

    #[test]
    fn split_is_deterministic_and_seed_sensitive() {
        let a = split_dataset(&balanced(300), 0.3, 1).unwrap();
        assert_eq!(a, split_dataset(&balanced(300), 0.3, 1).unwrap());
        assert_ne!(a, split_dataset(&balanced(300), 0.3, 2).unwrap());
    }

    #[test]
    fn split_does_not_depend_on_row_order() {
        let m = balanced(100);
        let mut rev = m.clone();
        rev.rows.reverse();
        let a = split_dataset(&m, 0.25, 8).unwrap();
        let b = split_dataset(&rev, 0.25, 8).unwrap();
        for r in &a.rows {
            assert_eq!(b.row(&r.image_id).unwrap().split, r.split);
        }
    }

    #[test]
    fn bad_fraction_is_rejected() {
        assert!(split_dataset(&balanced(10), 1.5, 0).is_err());
        assert!(split_dataset(&balanced(10), -0.1, 0).is_err());
        assert!(split_dataset(&balanced(10), f64::NAN, 0).is_err());
    }

    #[test]
    fn extremes() {
        assert_eq!(
            count_split(&split_dataset(&balanced(10), 0.0, 0).unwrap(), Split::Val),
            0
        );
        assert_eq!(
            count_split(&split_dataset(&balanced(10), 1.0, 0).unwrap(), Split::Val),
            10
        );
    }

    #[test]
    fn counting_strata_cover_all_deciles_and_total_is_exact() {
        let rows: Vec<ManifestRow> = (0..1000)
            .map(|i| row(format!("img_{i:06}"), None, Some((i * 7 % 39) as u32)))
            .collect();
        let m = DatasetManifest {
            header: ManifestHeader::new(Scenario::HouseCounting, 100, 100, 38),
            rows,
        };
        let refs: Vec<&ManifestRow> = m.rows.iter().collect();
        let strata = strata_for(Scenario::HouseCounting, &refs);
        assert_eq!(strata.iter().max(), Some(&9));
        let s = split_dataset(&m, 0.15, 3).unwrap();
        assert_eq!(count_split(&s, Split::Val), 150);
    }

    #[test]
    fn augmented_rows_follow_parent_and_test_rows_stay() {
        let mut m = balanced(20);
        let mut child = m.rows[0].clone();
        child.image_id = "img_000000_aug1_hflip".into();
        child.parent_id = Some("img_000000".into());
        m.rows.push(child);
        m.rows[5].split = Split::Test;
        let s = split_dataset(&m, 0.5, 11).unwrap();
        assert_eq!(s.rows[20].split, s.rows[0].split);
        assert_eq!(s.rows[5].split, Split::Test);
        // Pool of 19 -> round_half_even(9.5) = 10.
        let val_pool = s.rows[..20]
            .iter()
            .filter(|r| r.split == Split::Val)
            .count();
        assert_eq!(val_pool, 10);
    }

    #[test]
    fn allocation_sums_to_rounded_total() {
        assert_eq!(allocate(&[1000, 1000], 0.2), vec![200, 200]);
        assert_eq!(allocate(&[3, 3, 3], 0.5).iter().sum::<usize>(), 4);
        assert_eq!(allocate(&[5, 5], 0.25).iter().sum::<usize>(), 2);
        assert_eq!(allocate(&[], 0.5), Vec::<usize>::new());
    }
}
