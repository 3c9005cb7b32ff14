use proptest::prelude::*;
use rdrrt::data::{load_dataset, window, ColumnMap, Observation, Window};
use rdrrt::Error;

fn obs_strategy() -> impl Strategy<Value = Vec<Observation>> {
    prop::collection::vec(
        (0.0f64..=1.0, any::<bool>(), any::<bool>()).prop_map(|(x, t, y)| Observation { x, t, y }),
        1..300,
    )
}

proptest! {
    #[test]
    fn windowing_is_idempotent(data in obs_strategy(), h in 0.01f64..0.2) {
        let w = Window::new(0.2, h).unwrap();
        if let Ok(once) = window(&data, &w) {
            let twice = window(&once.to_observations(), &w).unwrap();
            prop_assert_eq!(once, twice);
        }
    }

    #[test]
    fn cell_count_means_equal_direct_averages(data in obs_strategy()) {
        let w = Window::new(0.2, 0.2).unwrap();
        if let Ok(s) = window(&data, &w) {
            let c = s.cell_counts();
            for z in [false, true] {
                let arm: Vec<_> = s.records.iter().filter(|r| r.z == z).collect();
                let n = arm.len() as f64;
                let avg = |f: &dyn Fn(&rdrrt::WindowedRecord) -> bool| {
                    arm.iter().filter(|r| f(r)).count() as f64 / n
                };
                prop_assert!((c.mean_y(z) - avg(&|r| r.y)).abs() < 1e-12);
                prop_assert!((c.mean_t(z) - avg(&|r| r.t)).abs() < 1e-12);
                prop_assert!((c.mean_y_tbar(z) - avg(&|r| r.y && !r.t)).abs() < 1e-12);
                prop_assert!((c.mean_y_t(z) - avg(&|r| r.y && r.t)).abs() < 1e-12);
                prop_assert_eq!(c.n(z) as usize, s.n(z));
            }
            prop_assert_eq!(s.n1 + s.n0, s.len());
        }
    }

    #[test]
    fn window_keeps_exactly_the_band(data in obs_strategy(), h in 0.01f64..0.2) {
        let w = Window::new(0.2, h).unwrap();
        if let Ok(s) = window(&data, &w) {
            let expected = data.iter().filter(|o| (o.x - 0.2).abs() <= h).count();
            prop_assert_eq!(s.len(), expected);
            for r in &s.records {
                prop_assert_eq!(r.z, r.x >= 0.2);
                prop_assert!((r.x_star - (r.x - 0.2)).abs() < 1e-15);
            }
        }
    }
}

#[test]
fn csv_round_trip_with_renamed_columns() {
    let text = "risk,treated,event,extra\n0.19,0,1,a\n0.21,1,0,b\n0.2,1,1,c\n";
    let cols = ColumnMap {
        x: "risk".into(),
        t: "treated".into(),
        y: "event".into(),
    };
    let d = load_dataset(text.as_bytes(), &cols).unwrap();
    assert_eq!(d.len(), 3);
    assert_eq!(
        d[2],
        Observation {
            x: 0.2,
            t: true,
            y: true
        }
    );
    let s = window(&d, &Window::new(0.2, 0.05).unwrap()).unwrap();
    assert_eq!((s.n1, s.n0), (2, 1));
}

#[test]
fn malformed_inputs_are_reported_with_row() {
    let bad_t = "x,t,y\n0.1,0,0\n0.2,1,0\n0.3,2,1\n";
    let e = load_dataset(bad_t.as_bytes(), &ColumnMap::default()).unwrap_err();
    assert_eq!(e.to_string(), "row 3: t must be 0/1");
    assert!(e.is_input_error());
    let bad_x = "x,t,y\n1.5,0,0\n";
    assert!(load_dataset(bad_x.as_bytes(), &ColumnMap::default())
        .unwrap_err()
        .to_string()
        .contains("must be in [0,1]"));
    let missing = "x,t\n0.1,0\n";
    assert!(matches!(
        load_dataset(missing.as_bytes(), &ColumnMap::default()),
        Err(Error::MissingColumn(_))
    ));
    let empty = "x,t,y\n";
    assert_eq!(
        load_dataset(empty.as_bytes(), &ColumnMap::default())
            .unwrap_err()
            .to_string(),
        "no observations"
    );
}

#[test]
fn empty_arm_is_an_error() {
    let d = vec![Observation {
        x: 0.25,
        t: true,
        y: true,
    }];
    assert!(matches!(
        window(&d, &Window::new(0.2, 0.1).unwrap()),
        Err(Error::EmptyArm)
    ));
}
