use proptest::prelude::*;

use reclink::mi::{combine, DfMethod, MiInput};

fn inputs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..15).prop_flat_map(|m| {
        (
            prop::collection::vec(-100.0f64..100.0, m),
            prop::collection::vec(0.01f64..20.0, m),
        )
    })
}

fn method() -> impl Strategy<Value = DfMethod> {
    prop_oneof![
        Just(DfMethod::Normal),
        Just(DfMethod::BarnardRubinPaper),
        Just(DfMethod::BarnardRubinStandard),
    ]
}

proptest! {
    #[test]
    fn total_variance_identity_and_ordering((q, se) in inputs(), method in method(), vcom in 5.0f64..1e4) {
        let m = q.len() as f64;
        let r = combine(&MiInput { estimates: q, std_errors: se, level: 0.9, df_method: method, vcom: Some(vcom) }).unwrap();
        let expected = (1.0 + 1.0 / m) * r.between + r.within;
        prop_assert!((r.total - expected).abs() <= 1e-12 * expected);
        prop_assert!(r.total >= r.within && r.within >= 0.0);
        prop_assert!(r.lower <= r.estimate && r.estimate <= r.upper);
        if let Some(df) = r.df {
            prop_assert!(df > 0.0);
        }
    }

    #[test]
    fn scale_equivariance((q, se) in inputs(), c in 0.01f64..100.0, method in method()) {
        let base = combine(&MiInput { estimates: q.clone(), std_errors: se.clone(), level: 0.95, df_method: method, vcom: Some(100.0) }).unwrap();
        let scaled = combine(&MiInput {
            estimates: q.iter().map(|v| c * v).collect(),
            std_errors: se.iter().map(|v| c * v).collect(),
            level: 0.95,
            df_method: method,
            vcom: Some(100.0),
        }).unwrap();
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * (1.0 + y.abs());
        prop_assert!(close(scaled.estimate, c * base.estimate));
        prop_assert!(close(scaled.total, c * c * base.total));
        prop_assert!(close(scaled.upper - scaled.lower, c * (base.upper - base.lower)));
    }
}

#[test]
fn shrinking_between_variance_approaches_the_normal_interval() {
    let mut last_df = 0.0;
    let normal_half = {
        let r = combine(&MiInput {
            estimates: vec![1.0, 1.0, 1.0, 1.0],
            std_errors: vec![0.5; 4],
            level: 0.95,
            df_method: DfMethod::Normal,
            vcom: None,
        })
        .unwrap();
        r.upper - r.estimate
    };
    let mut last_gap = f64::INFINITY;
    for k in 1..=8 {
        let spread = 0.5 / 4f64.powi(k);
        let r = combine(&MiInput {
            estimates: vec![1.0 - spread, 1.0, 1.0, 1.0 + spread],
            std_errors: vec![0.5; 4],
            level: 0.95,
            df_method: DfMethod::BarnardRubinPaper,
            vcom: Some(1e6),
        })
        .unwrap();
        let df = r.df.unwrap();
        assert!(df > last_df, "df must grow as B shrinks");
        last_df = df;
        let gap = (r.upper - r.estimate) - normal_half;
        assert!(gap >= 0.0 && gap < last_gap);
        last_gap = gap;
    }
    assert!(last_gap < 1e-3);
}
