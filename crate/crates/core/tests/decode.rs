use std::collections::BTreeSet;

use xrsim_core::netsim::decode::{decodable_set, is_decodable};
use xrsim_core::traffic::FrameType;

/// Every GOP of length `n`: I first, then any mix of P and B.
fn patterns(n: usize) -> impl Iterator<Item = Vec<FrameType>> {
    (0u32..1 << (n - 1)).map(move |mask| {
        let mut v = vec![FrameType::I];
        for i in 0..n - 1 {
            v.push(if mask >> i & 1 == 1 {
                FrameType::B
            } else {
                FrameType::P
            });
        }
        v
    })
}

/// Dependency closure by fixpoint: start from the delivered set and keep
/// removing frames with a missing reference until nothing changes.
fn closure_oracle(types: &[FrameType], delivered: &[bool], next_i: bool) -> BTreeSet<usize> {
    let n = types.len();
    let anchor = |t: FrameType| t != FrameType::B;
    let mut deps: Vec<Vec<Option<usize>>> = vec![Vec::new(); n];
    for i in 0..n {
        let prev = (0..i).rev().find(|&j| anchor(types[j]));
        let next = (i + 1..n).find(|&j| anchor(types[j]));
        match types[i] {
            FrameType::P => deps[i].push(prev),
            FrameType::B => {
                deps[i].push(prev);
                deps[i].push(next);
            }
            _ => {}
        }
    }
    let mut ok: Vec<bool> = delivered.to_vec();
    loop {
        let mut changed = false;
        for i in 0..n {
            if ok[i] && deps[i].iter().any(|d| !d.map_or(next_i, |j| ok[j])) {
                ok[i] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    (0..n).filter(|&i| ok[i]).collect()
}

#[test]
fn matches_brute_force_closure_up_to_length_eight() {
    let mut cases = 0u64;
    for n in 1..=8 {
        for types in patterns(n) {
            for loss in 0u32..1 << n {
                let delivered: Vec<bool> = (0..n).map(|i| loss >> i & 1 == 0).collect();
                for next_i in [false, true] {
                    let got = decodable_set(&types, &delivered, next_i).unwrap();
                    assert_eq!(
                        got,
                        closure_oracle(&types, &delivered, next_i),
                        "{types:?} {delivered:?}"
                    );
                    cases += 1;
                }
            }
        }
    }
    assert_eq!(
        cases,
        2 * (1..=8).map(|n| (1u64 << (n - 1)) << n).sum::<u64>()
    );
}

#[test]
fn lookup_agrees_with_set() {
    let types: Vec<FrameType> = "IBPBP"
        .chars()
        .map(|c| c.to_string().parse().unwrap())
        .collect();
    let delivered = [true, true, false, true, true];
    let set = decodable_set(&types, &delivered, false).unwrap();
    for i in 0..types.len() {
        assert_eq!(
            is_decodable(&types, &delivered, false, i).unwrap(),
            set.contains(&i)
        );
    }
}
