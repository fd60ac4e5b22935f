use abcrf::forest::TreeNode;
use rand::Rng;
use rand_xoshiro::Xoshiro256PlusPlus;

/// Weighted Gini of a two-way split as an exact fraction `num / den`
/// (scaled by the node size, which is constant within a node).
pub fn score(left: [u64; 2], right: [u64; 2]) -> (u128, u128) {
    let part = |c: [u64; 2]| {
        let n = (c[0] + c[1]) as u128;
        (n * n - (c[0] as u128).pow(2) - (c[1] as u128).pow(2), n)
    };
    let (a, nl) = part(left);
    let (b, nr) = part(right);
    (a * nr + b * nl, nl * nr)
}

pub fn less(x: (u128, u128), y: (u128, u128)) -> bool {
    x.0 * y.1 < y.0 * x.1
}

/// Every (feature, midpoint) pair in order; keeps the first strict minimum,
/// which is the lowest feature and then the smallest threshold among ties.
pub fn brute_split(rows: &[Vec<f64>], labels: &[bool], idx: &[usize]) -> Option<(usize, f64)> {
    let p = rows[0].len();
    let mut best: Option<((u128, u128), usize, f64)> = None;
    for f in 0..p {
        let mut values: Vec<f64> = idx.iter().map(|&i| rows[i][f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let mut l = [0u64; 2];
            let mut r = [0u64; 2];
            for &i in idx {
                let side = if rows[i][f] <= t { &mut l } else { &mut r };
                side[labels[i] as usize] += 1;
            }
            let s = score(l, r);
            if best.as_ref().map_or(true, |b| less(s, b.0)) {
                best = Some((s, f, t));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

pub fn brute_tree(rows: &[Vec<f64>], labels: &[bool], idx: &[usize], out: &mut Vec<TreeNode>) {
    let ones = idx.iter().filter(|&&i| labels[i]).count();
    let leaf = TreeNode::Leaf(ones as f64 / idx.len() as f64);
    if ones == 0 || ones == idx.len() {
        out.push(leaf);
        return;
    }
    let Some((feature, threshold)) = brute_split(rows, labels, idx) else {
        out.push(leaf);
        return;
    };
    let at = out.len();
    out.push(TreeNode::Split { feature, threshold, right: 0 });
    let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| rows[i][feature] <= threshold);
    brute_tree(rows, labels, &l, out);
    let right = out.len();
    out[at] = TreeNode::Split { feature, threshold, right };
    brute_tree(rows, labels, &r, out);
}

/// Small datasets on a coarse grid, so duplicates and ties are common.
pub fn dataset(rng: &mut Xoshiro256PlusPlus) -> (Vec<Vec<f64>>, Vec<bool>) {
    loop {
        let n = rng.gen_range(2..=12);
        let p = rng.gen_range(1..=3);
        let levels = rng.gen_range(2..=6);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| rng.gen_range(0..levels) as f64 * 0.25).collect())
            .collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        if labels.iter().any(|&b| b) && labels.iter().any(|&b| !b) {
            return (rows, labels);
        }
    }
}

/// Trains one unbootstrapped, all-features tree per random dataset and
/// returns the cases whose node list differs from the enumerator's.
pub fn mismatches(cases: u64, seed: u64) -> Vec<u64> {
    use abcrf::forest::{train, Bootstrap, Hyperparams, TrainingSet};
    use rand::SeedableRng;

    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut bad = Vec::new();
    for case in 0..cases {
        let (rows, labels) = dataset(&mut rng);
        let data = TrainingSet::new(&rows, labels.clone()).unwrap();
        let hp = Hyperparams {
            n_trees: 1,
            mtry: Some(rows[0].len()),
            bootstrap: Bootstrap::Disabled,
            ..Hyperparams::default()
        };
        let forest = train(&data, &hp, case).unwrap();
        let mut expected = Vec::new();
        let idx: Vec<usize> = (0..rows.len()).collect();
        brute_tree(&rows, &labels, &idx, &mut expected);
        if forest.trees()[0].nodes() != expected.as_slice() {
            bad.push(case);
        }
    }
    bad
}
