//! Leap-and-Shift proposal on `P_n`.
//!
//! One item `u` is drawn uniformly; its rank leaps to a value drawn uniformly
//! from `{max(1, r_u - L), .., min(n, r_u + L)} \ {r_u}`, and every item
//! ranked between the old and new position shifts by one toward the vacated
//! rank. The transition probability of a move sums `1/n * 1/|window|` over
//! every `(item, new rank)` pair that produces it; adjacent transpositions
//! are reachable from both of the swapped items.

use rand::Rng;

use crate::error::{MallowsError, Result};
use crate::perm::Ranking;

#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub rho: Ranking,
    /// `log p_LS(proposed | current)`
    pub log_fwd: f64,
    /// `log p_LS(current | proposed)`
    pub log_bwd: f64,
}

pub(crate) fn check_leap(n: usize, leap: usize) -> Result<()> {
    if n < 2 || leap == 0 || leap >= n {
        return Err(MallowsError::InvalidParameter(format!(
            "leap size must satisfy 1 <= L <= n - 1 (n = {n}, L = {leap})"
        )));
    }
    Ok(())
}

fn window(rank: u32, n: usize, leap: usize) -> (u32, u32) {
    let lo = rank.saturating_sub(leap as u32).max(1);
    let hi = (rank + leap as u32).min(n as u32);
    (lo, hi)
}

fn window_size(rank: u32, n: usize, leap: usize) -> u32 {
    let (lo, hi) = window(rank, n, leap);
    hi - lo
}

/// Moves `item` to `new_rank`, shifting the items in between.
pub(crate) fn apply_move(ranks: &[u32], item: usize, new_rank: u32) -> Vec<u32> {
    let old = ranks[item];
    ranks
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            if i == item {
                new_rank
            } else if new_rank > old && r > old && r <= new_rank {
                r - 1
            } else if new_rank < old && r >= new_rank && r < old {
                r + 1
            } else {
                r
            }
        })
        .collect()
}

/// `log p_LS(to | from)`; `-inf` when `to` is unreachable in one move.
pub fn transition_log_prob(from: &Ranking, to: &Ranking, leap: usize) -> f64 {
    let n = from.len();
    if to.len() != n || from == to {
        return f64::NEG_INFINITY;
    }
    let (a, b) = (from.ranks(), to.ranks());
    let mut prob = 0.0;
    for u in 0..n {
        let (old, new) = (a[u], b[u]);
        if old == new || old.abs_diff(new) as usize > leap {
            continue;
        }
        if apply_move(a, u, new) == b {
            prob += 1.0 / (n as f64 * window_size(old, n, leap) as f64);
        }
    }
    if prob > 0.0 {
        prob.ln()
    } else {
        f64::NEG_INFINITY
    }
}

pub fn leap_and_shift<R: Rng + ?Sized>(rho: &Ranking, leap: usize, rng: &mut R) -> Result<Proposal> {
    let n = rho.len();
    check_leap(n, leap)?;
    let ranks = rho.ranks();
    let u = rng.random_range(0..n);
    let (lo, hi) = window(ranks[u], n, leap);
    // uniform over the window with the current rank removed
    let mut new_rank = rng.random_range(lo..hi);
    if new_rank >= ranks[u] {
        new_rank += 1;
    }
    let proposed = Ranking::from_vec_unchecked(apply_move(ranks, u, new_rank));
    let log_fwd = transition_log_prob(rho, &proposed, leap);
    let log_bwd = transition_log_prob(&proposed, rho, leap);
    Ok(Proposal { rho: proposed, log_fwd, log_bwd })
}
