//! Exact Euclidean distance transform on an anisotropic box lattice, by the
//! separable lower-envelope-of-parabolas method.

use rayon::prelude::*;

/// Squared distance transform of a 1-D array of squared costs `f` at
/// spacing `h`, written into `out`. `f` may contain `INFINITY`.
fn edt_1d(f: &[f64], h: f64, out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    let mut first = None;
    for q in 0..n {
        if f[q].is_finite() {
            first = Some(q);
            break;
        }
    }
    let Some(q0) = first else {
        out.fill(f64::INFINITY);
        return;
    };
    let pos = |q: usize| q as f64 * h;
    v[0] = q0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in q0 + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        loop {
            let p = v[k];
            let s = ((f[q] + pos(q) * pos(q)) - (f[p] + pos(p) * pos(p))) / (2.0 * (pos(q) - pos(p)));
            if s <= z[k] {
                // k >= 1 here: z[0] is -inf
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < pos(q) {
            k += 1;
        }
        let d = pos(q) - pos(v[k]);
        *o = d * d + f[v[k]];
    }
}

/// Applies the 1-D transform along one axis of a row-major `dims` array.
fn pass(data: &mut [f64], dims: [usize; 3], axis: usize, h: f64) {
    let n = dims[axis];
    if n == 1 {
        return;
    }
    let stride = match axis {
        0 => dims[1] * dims[2],
        1 => dims[2],
        _ => 1,
    };
    // lines along `axis`, identified by their starting offset
    let starts: Vec<usize> = (0..dims[0])
        .flat_map(|i| (0..dims[1]).flat_map(move |j| (0..dims[2]).map(move |k| (i, j, k))))
        .filter(|&(i, j, k)| [i, j, k][axis] == 0)
        .map(|(i, j, k)| (i * dims[1] + j) * dims[2] + k)
        .collect();
    let lines: Vec<Vec<f64>> = starts
        .par_iter()
        .map_init(
            || (vec![0.0; n], vec![0usize; n], vec![0.0; n + 1]),
            |(buf, v, z), &s| {
                let f: Vec<f64> = (0..n).map(|q| data[s + q * stride]).collect();
                edt_1d(&f, h, buf, v, z);
                buf.clone()
            },
        )
        .collect();
    for (s, line) in starts.iter().zip(lines) {
        for (q, val) in line.into_iter().enumerate() {
            data[s + q * stride] = val;
        }
    }
}

/// Squared Euclidean distance from every node to the nearest node with
/// `seed == true`, for a row-major lattice of shape `dims` and spacings `h`.
/// Nodes are at distance 0 from themselves; returns `INFINITY` if there is no seed.
pub fn squared_distance_to(seed: &[bool], dims: [usize; 3], h: [f64; 3]) -> Vec<f64> {
    assert_eq!(seed.len(), dims[0] * dims[1] * dims[2]);
    let mut data: Vec<f64> = seed.iter().map(|&s| if s { 0.0 } else { f64::INFINITY }).collect();
    for axis in [2, 1, 0] {
        pass(&mut data, dims, axis, h[axis]);
    }
    data
}

/// Same as [`squared_distance_to`] but independently in every slice of
/// fixed first index (distances within the last two axes only).
pub fn squared_distance_to_in_slices(seed: &[bool], dims: [usize; 3], h: [f64; 3]) -> Vec<f64> {
    assert_eq!(seed.len(), dims[0] * dims[1] * dims[2]);
    let mut data: Vec<f64> = seed.iter().map(|&s| if s { 0.0 } else { f64::INFINITY }).collect();
    for axis in [2, 1] {
        pass(&mut data, dims, axis, h[axis]);
    }
    data
}
