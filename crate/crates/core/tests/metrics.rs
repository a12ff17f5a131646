mod common;

use std::collections::HashMap;

use multilayer_bp::metrics::{ami, ami_labels, layer_averaged_ami, marginal_entropy, modularity};
use multilayer_bp::{CouplingPreset, Marginals, Partition};
use proptest::prelude::*;

fn mutual_information(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let mut ca: HashMap<usize, f64> = HashMap::new();
    let mut cb: HashMap<usize, f64> = HashMap::new();
    let mut joint: HashMap<(usize, usize), f64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *ca.entry(x).or_default() += 1.0;
        *cb.entry(y).or_default() += 1.0;
        *joint.entry((x, y)).or_default() += 1.0;
    }
    joint.iter().map(|(&(x, y), &c)| c / n * (n * c / (ca[&x] * cb[&y])).ln()).sum()
}

fn entropy(a: &[usize]) -> f64 {
    let n = a.len() as f64;
    let mut c: HashMap<usize, f64> = HashMap::new();
    for &x in a {
        *c.entry(x).or_default() += 1.0;
    }
    -c.values().map(|&k| k / n * (k / n).ln()).sum::<f64>()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..n {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// AMI with the expected mutual information taken literally as the average
/// over every reordering of `b`.
fn ami_by_enumeration(a: &[usize], b: &[usize]) -> f64 {
    let perms = permutations(a.len());
    let emi = perms
        .iter()
        .map(|p| {
            let shuffled: Vec<usize> = p.iter().map(|&k| b[k]).collect();
            mutual_information(a, &shuffled)
        })
        .sum::<f64>()
        / perms.len() as f64;
    (mutual_information(a, b) - emi) / (entropy(a).max(entropy(b)) - emi)
}

#[test]
fn crossed_four_node_ami_matches_enumeration() {
    let a = [0, 0, 1, 1];
    let b = [0, 1, 0, 1];
    let got = ami_labels(&a, &b).unwrap();
    assert!((got - ami_by_enumeration(&a, &b)).abs() < 1e-10, "{got}");
}

#[test]
fn ami_matches_enumeration_on_small_labelings() {
    let cases: [(&[usize], &[usize]); 4] = [
        (&[0, 0, 1, 1, 2, 2], &[0, 0, 0, 1, 1, 2]),
        (&[0, 1, 0, 1, 0, 1, 1], &[2, 2, 0, 0, 1, 1, 1]),
        (&[0, 0, 0, 0, 1, 1, 2], &[0, 1, 0, 1, 0, 1, 0]),
        (&[3, 3, 1, 1, 1, 0, 0], &[0, 0, 0, 1, 1, 1, 1]),
    ];
    for (a, b) in cases {
        let got = ami_labels(a, b).unwrap();
        let want = ami_by_enumeration(a, b);
        assert!((got - want).abs() < 1e-10, "{a:?} {b:?}: {got} vs {want}");
    }
}

#[test]
fn layer_average_of_perfect_and_independent_layers() {
    let net = common::random_net(4, 2, 0.8, false, CouplingPreset::Temporal, 3);
    let truth = Partition::new(vec![0, 0, 1, 1, 0, 0, 1, 1]);
    let found = Partition::new(vec![0, 0, 1, 1, 0, 1, 0, 1]);
    let crossed = ami_labels(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap();
    let got = layer_averaged_ami(&net, &truth, &found).unwrap();
    assert!((got - 0.5 * (1.0 + crossed)).abs() < 1e-12);
}

#[test]
fn per_layer_relabeling_keeps_layer_ami_at_one() {
    let net = common::random_net(6, 3, 0.5, false, CouplingPreset::Multiplex, 1);
    let a = Partition::new(vec![0, 0, 1, 1, 2, 2, 0, 0, 1, 1, 2, 2, 0, 0, 0, 1, 1, 1]);
    let maps = [[0, 1, 2], [2, 0, 1], [1, 0, 2]];
    let b: Vec<usize> = a.labels().iter().enumerate().map(|(i, &x)| maps[net.layer_of(i)][x]).collect();
    let b = Partition::new(b);
    assert_eq!(layer_averaged_ami(&net, &a, &b).unwrap(), 1.0);
    assert!(ami(&a, &b).unwrap() < 1.0);
}

#[test]
fn entropy_of_uniform_and_split_rows() {
    let m = Marginals::from_rows(&[vec![0.25; 4], vec![0.5, 0.5, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0]]).unwrap();
    let (rows, mean) = marginal_entropy(&m).unwrap();
    assert!((rows[0] - 4f64.ln()).abs() < 1e-15);
    assert!((rows[1] - 2f64.ln()).abs() < 1e-15);
    assert_eq!(rows[2], 0.0);
    assert!((mean - (4f64.ln() + 2f64.ln()) / 3.0).abs() < 1e-15);
}

#[test]
fn two_triangle_split_is_the_exhaustive_optimum() {
    let net = common::two_triangles();
    let split = Partition::new(vec![0, 0, 0, 1, 1, 1]);
    let (best, q_best) = common::brute_force_optimum(&net, 1.0, 0.0);
    assert!(common::same_partition(&best, split.labels()));
    let q = modularity(&net, &split, 1.0, 0.0).unwrap();
    assert!((q - q_best).abs() < 1e-12);
}

fn labels_strategy(n: usize, k: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0..k, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn modularity_matches_dense_definition(
        seed in 0u64..1000,
        layers in 1usize..4,
        weighted in any::<bool>(),
        preset in prop::sample::select(vec![CouplingPreset::None, CouplingPreset::Temporal, CouplingPreset::Multiplex]),
        gamma in 0.0f64..2.0,
        omega in 0.0f64..3.0,
        labels in labels_strategy(5 * 3, 3),
    ) {
        let net = common::random_net(5, layers, 0.4, weighted, preset, seed);
        let labels = labels[..net.n_node_layers()].to_vec();
        let got = modularity(&net, &Partition::new(labels.clone()), gamma, omega).unwrap();
        let want = common::dense_modularity(&net, &labels, gamma, omega);
        prop_assert!((got - want).abs() < 1e-12, "{} vs {}", got, want);
    }

    #[test]
    fn modularity_ignores_label_names(
        seed in 0u64..1000,
        labels in labels_strategy(12, 4),
        shift in 1usize..50,
    ) {
        let net = common::random_net(6, 2, 0.5, true, CouplingPreset::Temporal, seed);
        let renamed: Vec<usize> = labels.iter().map(|&x| (x * 7 + shift) % 97).collect();
        let a = modularity(&net, &Partition::new(labels), 1.0, 0.7).unwrap();
        let b = modularity(&net, &Partition::new(renamed), 1.0, 0.7).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn ami_is_symmetric_and_bounded(a in labels_strategy(30, 4), b in labels_strategy(30, 5)) {
        let ab = ami_labels(&a, &b).unwrap();
        let ba = ami_labels(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() < 1e-10);
        prop_assert!(ab <= 1.0 + 1e-12);
    }

    #[test]
    fn ami_is_one_under_relabeling(a in labels_strategy(25, 5), offset in 1usize..10) {
        let b: Vec<usize> = a.iter().map(|&x| 4 - x + offset).collect();
        prop_assert_eq!(ami_labels(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn entropy_lies_between_zero_and_log_q(rows in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 3), 1..10)) {
        let rows: Vec<Vec<f64>> = rows
            .into_iter()
            .map(|r| {
                let s: f64 = r.iter().sum();
                if s > 0.0 { r.iter().map(|x| x / s).collect() } else { vec![1.0, 0.0, 0.0] }
            })
            .collect();
        let m = Marginals::from_rows(&rows).unwrap();
        let (h, _) = marginal_entropy(&m).unwrap();
        for x in h {
            prop_assert!((-1e-12..=3f64.ln() + 1e-12).contains(&x));
        }
    }
}
