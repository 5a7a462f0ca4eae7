mod support;

use support::{icp_vs_oracle, q, random_conjunction, rng, Agreement};

#[test]
fn icp_and_grid_oracle_agree() {
    let mut r = rng(11);
    let mut decided = 0;
    for k in 0..60 {
        let delta = [q(1, 2), q(1, 10), q(1, 100)][k % 3].clone();
        let sf = random_conjunction(&mut r);
        match icp_vs_oracle(&sf, &delta, 1 << 22) {
            Agreement::Agree | Agreement::Overlap => decided += 1,
            Agreement::Undecided => {}
            Agreement::Contradiction(msg) => panic!("delta {delta}: {msg}\n{sf}"),
        }
    }
    assert!(decided >= 40, "{decided}");
}
