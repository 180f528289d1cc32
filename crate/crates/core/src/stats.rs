//! Small statistical helpers: sample moments and an O(n log n) Kendall tau.

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n-1 denominator).
pub fn sample_sd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() as f64 - 1.0)).sqrt()
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let mx = mean(xs);
    let my = mean(ys);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Sample Kendall tau-b via Knight's algorithm (merge-sort inversion
/// counting), O(n log n). Handles ties in either coordinate.
pub fn kendall_tau(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    assert!(n >= 2);

    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        xs[a]
            .partial_cmp(&xs[b])
            .unwrap()
            .then(ys[a].partial_cmp(&ys[b]).unwrap())
    });

    let mut y_sorted: Vec<f64> = idx.iter().map(|&i| ys[i]).collect();
    let x_sorted: Vec<f64> = idx.iter().map(|&i| xs[i]).collect();

    // Tied pairs in x and joint (x, y) ties.
    let mut n1 = 0u64;
    let mut n3 = 0u64;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && x_sorted[j] == x_sorted[i] {
            j += 1;
        }
        let g = (j - i) as u64;
        n1 += g * (g - 1) / 2;
        let mut a = i;
        while a < j {
            let mut b = a + 1;
            while b < j && y_sorted[b] == y_sorted[a] {
                b += 1;
            }
            let gg = (b - a) as u64;
            n3 += gg * (gg - 1) / 2;
            a = b;
        }
        i = j;
    }

    let swaps = merge_count(&mut y_sorted);

    // Tied pairs in y.
    let mut y2 = ys.to_vec();
    y2.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut n2 = 0u64;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && y2[j] == y2[i] {
            j += 1;
        }
        let g = (j - i) as u64;
        n2 += g * (g - 1) / 2;
        i = j;
    }

    let n0 = (n as u64) * (n as u64 - 1) / 2;
    let numer = n0 as f64 - n1 as f64 - n2 as f64 + n3 as f64 - 2.0 * swaps as f64;
    let denom = (((n0 - n1) as f64) * ((n0 - n2) as f64)).sqrt();
    numer / denom
}

/// Counts the swaps a stable merge sort performs; equal elements are not
/// counted as inversions.
fn merge_count(xs: &mut [f64]) -> u64 {
    let n = xs.len();
    if n < 2 {
        return 0;
    }
    let mut buf = xs.to_vec();
    merge_count_rec(xs, &mut buf)
}

fn merge_count_rec(xs: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = xs.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = 0;
    {
        let (left, right) = xs.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        count += merge_count_rec(left, bl);
        count += merge_count_rec(right, br);
    }
    buf[..n].copy_from_slice(xs);
    let (left, right) = buf[..n].split_at(mid);
    let mut i = 0;
    let mut j = 0;
    for slot in xs.iter_mut() {
        if i < left.len() && (j >= right.len() || left[i] <= right[j]) {
            *slot = left[i];
            i += 1;
        } else {
            *slot = right[j];
            j += 1;
            count += (left.len() - i) as u64;
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn kendall_naive(xs: &[f64], ys: &[f64]) -> f64 {
        let n = xs.len();
        let mut num = 0.0;
        let mut tx = 0u64;
        let mut ty = 0u64;
        let n0 = (n * (n - 1) / 2) as u64;
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = xs[i] - xs[j];
                let dy = ys[i] - ys[j];
                if dx == 0.0 {
                    tx += 1;
                }
                if dy == 0.0 {
                    ty += 1;
                }
                let sx = if dx > 0.0 { 1.0 } else if dx < 0.0 { -1.0 } else { 0.0 };
                let sy = if dy > 0.0 { 1.0 } else if dy < 0.0 { -1.0 } else { 0.0 };
                num += sx * sy;
            }
        }
        num / (((n0 - tx) as f64) * ((n0 - ty) as f64)).sqrt()
    }

    #[test]
    fn kendall_matches_naive() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for trial in 0..20 {
            let n = 40 + trial * 5;
            let xs: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() * 8.0).round()).collect();
            let ys: Vec<f64> = xs
                .iter()
                .map(|x| x + 3.0 * (rng.random::<f64>() * 4.0).round())
                .collect();
            let fast = kendall_tau(&xs, &ys);
            let slow = kendall_naive(&xs, &ys);
            assert!((fast - slow).abs() < 1e-12, "fast={fast} slow={slow}");
        }
    }

    #[test]
    fn kendall_perfect_orders() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let up = [2.0, 3.0, 9.0, 11.0];
        let down = [5.0, 4.0, 3.0, 2.0];
        assert!((kendall_tau(&xs, &up) - 1.0).abs() < 1e-15);
        assert!((kendall_tau(&xs, &down) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn standardize_helpers() {
        let xs = [1.0, 2.0, 3.0];
        assert!((mean(&xs) - 2.0).abs() < 1e-15);
        assert!((sample_sd(&xs) - 1.0).abs() < 1e-15);
    }
}
