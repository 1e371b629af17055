//! Synthetic data for the Kotanchek function
//! `exp(-(x-1)²) / (1.2 + (y-2.5)²)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Table;

pub fn kotanchek(x: f64, y: f64) -> f64 {
    (-(x - 1.0).powi(2)).exp() / (1.2 + (y - 2.5).powi(2))
}

pub const TRAIN_SIZE: usize = 100;
pub const TRAIN_RANGE: (f64, f64) = (0.3, 4.0);
/// Test grid `-0.2 : 0.1 : 4.2` on both axes.
pub const GRID_START: f64 = -0.2;
pub const GRID_STEP: f64 = 0.1;
pub const GRID_LEN: usize = 45;

fn table(rows: Vec<Vec<f64>>) -> Table {
    Table { headers: vec!["x".into(), "y".into(), "f".into()], rows }
}

/// 100 noise-free samples drawn uniformly from `[0.3, 4]²`.
pub fn training_set(seed: u64) -> Table {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = TRAIN_RANGE;
    table(
        (0..TRAIN_SIZE)
            .map(|_| {
                let x = rng.gen_range(lo..=hi);
                let y = rng.gen_range(lo..=hi);
                vec![x, y, kotanchek(x, y)]
            })
            .collect(),
    )
}

/// The 45×45 evaluation grid, `x` varying slowest.
pub fn test_grid() -> Table {
    let axis: Vec<f64> = (0..GRID_LEN).map(|k| ((GRID_START + k as f64 * GRID_STEP) * 10.0).round() / 10.0).collect();
    table(axis.iter().flat_map(|&x| axis.iter().map(move |&y| vec![x, y, kotanchek(x, y)])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_are_seeded_and_in_range() {
        let a = training_set(1);
        assert_eq!(a, training_set(1));
        assert_ne!(a, training_set(2));
        assert_eq!(a.rows.len(), TRAIN_SIZE);
        assert!(a.rows.iter().all(|r| (0.3..=4.0).contains(&r[0]) && (0.3..=4.0).contains(&r[1])));
    }

    #[test]
    fn grid_covers_the_square() {
        let g = test_grid();
        assert_eq!(g.rows.len(), 45 * 45);
        assert_eq!(g.rows[0][..2], [-0.2, -0.2]);
        assert_eq!(g.rows[g.rows.len() - 1][..2], [4.2, 4.2]);
        assert!((g.rows[12 * 45 + 27][2] - kotanchek(1.0, 2.5)).abs() < 1e-15);
        assert_eq!(kotanchek(1.0, 2.5), 1.0 / 1.2);
    }
}
