//! Lattice points on probability simplices, used to seed and scan the optimizers.

/// Number of lattice intervals for a grid step, e.g. `0.05 -> 20`.
pub fn divisions(step: f64) -> usize {
    ((1.0 / step).round() as usize).max(1)
}

/// All points of `{p ∈ Δ_k : p_i ∈ (1/N)ℤ}` with `N = divisions(step)`, in
/// lexicographic order of descending first coordinate.
pub fn simplex_grid(k: usize, step: f64) -> Vec<Vec<f64>> {
    let support = vec![true; k];
    support_grid(&support, step)
}

/// Lattice points supported on the letters marked `true`, zero elsewhere.
pub fn support_grid(support: &[bool], step: f64) -> Vec<Vec<f64>> {
    let n = divisions(step);
    let letters: Vec<usize> = (0..support.len()).filter(|&i| support[i]).collect();
    let mut out = Vec::new();
    if letters.is_empty() {
        return out;
    }
    let mut counts = vec![0usize; letters.len()];
    compositions(n, &mut counts, 0, &mut |c| {
        let mut p = vec![0.0; support.len()];
        for (&l, &ci) in letters.iter().zip(c) {
            p[l] = ci as f64 / n as f64;
        }
        out.push(p);
    });
    out
}

/// Visits every composition of `n` into `parts.len()` nonnegative parts.
pub(crate) fn compositions(n: usize, parts: &mut [usize], at: usize, visit: &mut dyn FnMut(&[usize])) {
    if at + 1 == parts.len() {
        parts[at] = n;
        visit(parts);
        return;
    }
    for c in (0..=n).rev() {
        parts[at] = c;
        compositions(n - c, parts, at + 1, visit);
    }
}

/// Points near `center` on a finer lattice: every support coordinate except the
/// last moves by multiples of `step` within `±radius`, the last one absorbs the
/// difference. Points leaving the simplex are dropped. `center` itself is
/// always included.
pub fn local_grid(center: &[f64], support: &[bool], radius: f64, step: f64) -> Vec<Vec<f64>> {
    let letters: Vec<usize> = (0..center.len()).filter(|&i| support[i]).collect();
    if letters.len() <= 1 {
        return vec![center.to_vec()];
    }
    let m = (radius / step).round() as i64;
    let free = &letters[..letters.len() - 1];
    let last = letters[letters.len() - 1];
    let mut out = Vec::new();
    let mut offsets = vec![-m; free.len()];
    loop {
        let mut p = center.to_vec();
        let mut ok = true;
        let mut moved = 0.0;
        for (&l, &o) in free.iter().zip(&offsets) {
            let v = center[l] + o as f64 * step;
            if !(-1e-12..=1.0 + 1e-12).contains(&v) {
                ok = false;
                break;
            }
            p[l] = v.clamp(0.0, 1.0);
            moved += p[l] - center[l];
        }
        if ok {
            let v = center[last] - moved;
            if v >= -1e-12 {
                p[last] = v.max(0.0);
                let s: f64 = p.iter().sum();
                p.iter_mut().for_each(|x| *x /= s);
                out.push(p);
            }
        }
        // odometer over offsets
        let mut d = 0;
        loop {
            if d == offsets.len() {
                return out;
            }
            offsets[d] += 1;
            if offsets[d] <= m {
                break;
            }
            offsets[d] = -m;
            d += 1;
        }
    }
}

/// Number of lattice points `C(N + k − 1, k − 1)`, saturating.
pub fn grid_size(k: usize, step: f64) -> u128 {
    let n = divisions(step) as u128;
    binomial((n + k as u128).saturating_sub(1), (k as u128).saturating_sub(1))
}

pub(crate) fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}
