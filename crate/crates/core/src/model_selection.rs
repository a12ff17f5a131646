//! Condensing communities whose marginal columns are nearly identical, so the
//! number of communities can float below the `q` used for inference.

use crate::error::{Error, Result};
use crate::metrics::Marginals;

/// Default merge threshold on the mean absolute column distance.
pub const DEFAULT_THRESHOLD: f64 = 0.02;

/// Mean over rows of `|p_s - p_t|` for every pair of columns.
pub fn column_distances(marg: &Marginals) -> Vec<Vec<f64>> {
    let q = marg.q();
    let mut dist = vec![vec![0.0; q]; q];
    for row in marg.rows() {
        for s in 0..q {
            for t in s + 1..q {
                dist[s][t] += (row[s] - row[t]).abs();
            }
        }
    }
    let n = marg.n_rows().max(1) as f64;
    for s in 0..q {
        for t in s + 1..q {
            dist[s][t] /= n;
            dist[t][s] = dist[s][t];
        }
    }
    dist
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// One round of single-linkage merging. Groups are numbered in order of
/// their smallest member.
fn merge_once(marg: &Marginals, threshold: f64) -> (Vec<usize>, Marginals) {
    let q = marg.q();
    let dist = column_distances(marg);
    let mut parent: Vec<usize> = (0..q).collect();
    for s in 0..q {
        for t in s + 1..q {
            if dist[s][t] < threshold {
                let (a, b) = (find(&mut parent, s), find(&mut parent, t));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut mapping = vec![0; q];
    let mut next = vec![usize::MAX; q];
    let mut k = 0;
    for s in 0..q {
        let root = find(&mut parent, s);
        if next[root] == usize::MAX {
            next[root] = k;
            k += 1;
        }
        mapping[s] = next[root];
    }
    if k == q {
        return (mapping, marg.clone());
    }
    let mut data = Vec::with_capacity(marg.n_rows() * k);
    let mut merged = vec![0.0; k];
    for row in marg.rows() {
        merged.iter_mut().for_each(|x| *x = 0.0);
        for (s, &p) in row.iter().enumerate() {
            merged[mapping[s]] += p;
        }
        let z: f64 = merged.iter().sum();
        data.extend(merged.iter().map(|p| p / z));
    }
    (mapping, Marginals::new(k, data).expect("row-major data of width k"))
}

/// Merges columns closer than `threshold` (single linkage), repeating on the
/// reduced marginals until nothing merges. Returns the old-to-new label map
/// and the reduced marginals.
pub fn collapse_communities(marg: &Marginals, threshold: f64) -> Result<(Vec<usize>, Marginals)> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "collapse threshold must lie in (0, 1), got {threshold}"
        )));
    }
    let mut mapping: Vec<usize> = (0..marg.q()).collect();
    let mut current = marg.clone();
    loop {
        let (step, reduced) = merge_once(&current, threshold);
        let changed = reduced.q() < current.q();
        mapping.iter_mut().for_each(|m| *m = step[*m]);
        current = reduced;
        if !changed {
            return Ok((mapping, current));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_columns_merge() {
        let m = Marginals::from_rows(&[
            vec![0.5, 0.1, 0.2, 0.2],
            vec![0.1, 0.5, 0.2, 0.2],
            vec![0.3, 0.3, 0.2, 0.2],
        ])
        .unwrap();
        let (map, red) = collapse_communities(&m, 0.02).unwrap();
        assert_eq!(map, vec![0, 1, 2, 2]);
        assert_eq!(red.q(), 3);
        assert!((red.row(0)[2] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn one_hot_rows_do_not_merge() {
        let m = Marginals::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]])
            .unwrap();
        let (map, red) = collapse_communities(&m, 0.1).unwrap();
        assert_eq!(map, vec![0, 1, 2]);
        assert_eq!(red, m);
    }

    #[test]
    fn two_pairs() {
        let m = Marginals::from_rows(&[vec![0.4, 0.4, 0.1, 0.1], vec![0.05, 0.05, 0.45, 0.45]])
            .unwrap();
        let (map, red) = collapse_communities(&m, 0.02).unwrap();
        assert_eq!(map, vec![0, 0, 1, 1]);
        assert_eq!(red.q(), 2);
    }

    #[test]
    fn uniform_collapses_to_one() {
        let (map, red) = collapse_communities(&Marginals::uniform(5, 4), 0.02).unwrap();
        assert_eq!(map, vec![0; 4]);
        assert_eq!(red.q(), 1);
        assert!(red.as_slice().iter().all(|&p| p == 1.0));
    }

    #[test]
    fn threshold_must_be_in_unit_interval() {
        let m = Marginals::uniform(2, 2);
        assert!(collapse_communities(&m, 0.0).is_err());
        assert!(collapse_communities(&m, 1.0).is_err());
    }
}
