//! Minimum-cost perfect matching on square cost matrices.

/// Exact minimum-cost assignment (Hungarian method with potentials, O(n^3)).
/// Returns `assign[row] = column` and the total cost.
pub fn hungarian(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = cost.len();
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    // 1-based arrays with a virtual column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        assign[owner[j] - 1] = j - 1;
    }
    let total = assign.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    (assign, total)
}

/// Forward auction with epsilon scaling. The final matching costs at most
/// `n * final_eps` more than the optimum.
pub fn auction(cost: &[Vec<f64>], final_eps: f64) -> (Vec<usize>, f64) {
    let n = cost.len();
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    let max_cost = cost.iter().flatten().fold(0.0f64, |a, &c| a.max(c.abs()));
    if max_cost == 0.0 {
        return ((0..n).collect(), 0.0);
    }
    let final_eps = final_eps.max(max_cost * 1e-12);
    let mut prices = vec![0.0; n];
    let mut eps = (max_cost / 4.0).max(final_eps);
    let mut owner: Vec<Option<usize>>;
    let mut assign: Vec<Option<usize>>;
    loop {
        owner = vec![None; n];
        assign = vec![None; n];
        let mut queue: Vec<usize> = (0..n).rev().collect();
        while let Some(i) = queue.pop() {
            // benefit is -cost - price; find best and second best objects
            let (mut best_j, mut best, mut second) = (0, f64::NEG_INFINITY, f64::NEG_INFINITY);
            for j in 0..n {
                let val = -cost[i][j] - prices[j];
                if val > best {
                    second = best;
                    best = val;
                    best_j = j;
                } else if val > second {
                    second = val;
                }
            }
            let increment = if second.is_finite() { best - second + eps } else { eps };
            prices[best_j] += increment;
            if let Some(prev) = owner[best_j].replace(i) {
                assign[prev] = None;
                queue.push(prev);
            }
            assign[i] = Some(best_j);
        }
        if eps <= final_eps {
            break;
        }
        eps = (eps / 5.0).max(final_eps);
    }
    let assign: Vec<usize> = assign.into_iter().map(|a| a.expect("complete")).collect();
    let total = assign.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    (assign, total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force(cost: &[Vec<f64>]) -> f64 {
        fn rec(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>) -> f64 {
            if row == cost.len() {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for j in 0..cost.len() {
                if !used[j] {
                    used[j] = true;
                    best = best.min(cost[row][j] + rec(cost, row + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        rec(cost, 0, &mut vec![false; cost.len()])
    }

    fn random_cost(n: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..n).map(|_| rng.random_range(0.0..1.0)).collect()).collect()
    }

    #[test]
    fn hungarian_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..=7 {
            for _ in 0..10 {
                let c = random_cost(n, &mut rng);
                let (assign, total) = hungarian(&c);
                let mut seen = assign.clone();
                seen.sort();
                assert_eq!(seen, (0..n).collect::<Vec<_>>());
                assert!((total - brute_force(&c)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn auction_is_near_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let c = random_cost(30, &mut rng);
            let (_, exact) = hungarian(&c);
            let (assign, approx) = auction(&c, 1e-4);
            let mut seen = assign.clone();
            seen.sort();
            assert_eq!(seen, (0..30).collect::<Vec<_>>());
            assert!(approx >= exact - 1e-12);
            assert!(approx <= exact + 30.0 * 1e-4 + 1e-12);
        }
    }

    #[test]
    fn empty_and_zero_costs() {
        assert_eq!(hungarian(&[]).1, 0.0);
        assert_eq!(auction(&[], 0.1).1, 0.0);
        assert_eq!(auction(&vec![vec![0.0; 3]; 3], 0.1).1, 0.0);
    }
}
