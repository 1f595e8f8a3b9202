//! Fixtures shared by the unit tests.

use crate::perm::{Ranking, RankingSample};

pub(crate) const TABLE1_N0: [f64; 6] = [0.0, 5.0, 10.0, 15.0, 16.0, 20.0];

pub(crate) fn r(v: &[u32]) -> Ranking {
    Ranking::new(v.to_vec()).unwrap()
}

/// Thirty rankings of four items with rank totals (70, 65, 90, 75).
pub(crate) fn table1_like_sample() -> RankingSample {
    let mut rows = Vec::new();
    rows.extend(std::iter::repeat_n(r(&[2, 1, 4, 3]), 15));
    rows.extend(std::iter::repeat_n(r(&[3, 4, 1, 2]), 5));
    rows.extend(std::iter::repeat_n(r(&[2, 4, 1, 3]), 5));
    rows.extend(std::iter::repeat_n(r(&[3, 2, 4, 1]), 5));
    let s = RankingSample::new(rows).unwrap();
    assert_eq!(s.column_sums(), vec![70, 65, 90, 75]);
    s
}
