use proptest::prelude::*;
use shmpc_milp::format::{parse, write};
use shmpc_milp::{BigM, Cmp, LpProblem, MilpProblem, Row};

fn bound() -> impl Strategy<Value = f64> {
    prop_oneof![
        Just(f64::INFINITY),
        Just(f64::NEG_INFINITY),
        -1e6f64..1e6,
        Just(0.1 + 0.2),
    ]
}

fn problem() -> impl Strategy<Value = MilpProblem> {
    (1usize..6).prop_flat_map(|n| {
        let cmp = prop_oneof![Just(Cmp::Le), Just(Cmp::Eq), Just(Cmp::Ge)];
        let row = (
            prop::collection::vec((0..n, -1e3f64..1e3), 0..4),
            cmp,
            -1e3f64..1e3,
        )
            .prop_map(|(terms, cmp, rhs)| Row::new(terms, cmp, rhs));
        (
            prop::collection::vec(-10f64..10.0, n),
            prop::collection::vec(row, 0..5),
            prop::collection::vec((bound(), bound()), n),
            prop::collection::vec(0..n, 0..3),
            prop::collection::vec((0usize..5, 0f64..100.0, -50f64..0.0, 0f64..50.0), 0..3),
        )
            .prop_map(|(objective, rows, bounds, binaries, ms)| {
                let (lower, upper) = bounds.into_iter().unzip();
                MilpProblem {
                    lp: LpProblem { objective, rows, lower, upper },
                    binaries,
                    big_m: ms
                        .into_iter()
                        .enumerate()
                        .map(|(k, (row, value, lo, hi))| BigM {
                            label: format!("m{k}"),
                            row,
                            value,
                            range: (lo, hi),
                        })
                        .collect(),
                }
            })
    })
}

proptest! {
    #[test]
    fn write_then_parse_is_identity(p in problem()) {
        let text = write(&p);
        let back = parse(&text).unwrap();
        prop_assert_eq!(back, p);
    }
}
