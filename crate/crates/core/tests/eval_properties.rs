use proptest::prelude::*;

use faceflow::eval::{landmark_epe, masked_epe, Correspondence, LandmarkOptions};
use faceflow::flow::{FlowField, Mask};

fn grid() -> impl Strategy<Value = f32> {
    (-4096i32..4096).prop_map(|k| k as f32 / 128.0)
}

proptest! {
    #[test]
    fn epe_is_symmetric_and_translation_invariant(
        w in 1usize..10, h in 1usize..10,
        a in prop::collection::vec((grid(), grid()), 100),
        b in prop::collection::vec((grid(), grid()), 100),
        c in (grid(), grid()),
    ) {
        let fa = FlowField::from_fn(w, h, |x, y| { let v = a[y * w + x]; [v.0, v.1] });
        let fb = FlowField::from_fn(w, h, |x, y| { let v = b[y * w + x]; [v.0, v.1] });
        let shift = |f: &FlowField| FlowField::from_fn(w, h, |x, y| { let d = f.get(x, y); [d[0] + c.0, d[1] + c.1] });
        let mask = Mask::full(w, h);
        let e = masked_epe(&fa, &fb, &mask).unwrap().aggregate;
        prop_assert_eq!(e, masked_epe(&fb, &fa, &mask).unwrap().aggregate);
        prop_assert_eq!(e, masked_epe(&shift(&fa), &shift(&fb), &mask).unwrap().aggregate);
        prop_assert!(e >= 0.0);
    }

    #[test]
    fn landmark_error_is_zero_exactly_when_displacements_match(
        x in (256i32..3584).prop_map(|k| k as f64 / 256.0), y in (256i32..3584).prop_map(|k| k as f64 / 256.0), du in -3.0f64..3.0, dv in -3.0f64..3.0,
    ) {
        let flow = FlowField::from_fn(16, 16, |_, _| [1.5, -2.25]);
        let hit = Correspondence { id: "a".into(), c1: [x, y], c2: [x + 1.5, y - 2.25], region: None };
        prop_assert_eq!(landmark_epe(&flow, &[hit], &LandmarkOptions::default()).unwrap().aggregate, 0.0);
        let miss = Correspondence { id: "b".into(), c1: [x, y], c2: [x + 1.5 + du, y - 2.25 + dv], region: None };
        let e = landmark_epe(&flow, &[miss], &LandmarkOptions::default()).unwrap().aggregate;
        prop_assert!((e - du.hypot(dv)).abs() < 1e-9);
    }
}

#[test]
fn empty_intersection_is_an_error() {
    let mut a = FlowField::zeros(2, 2);
    a.set_invalid(0);
    let mask = Mask::new(2, 2, vec![true, false, false, false]).unwrap();
    assert_eq!(masked_epe(&a, &FlowField::zeros(2, 2), &mask).unwrap_err().kind(), "domain");
}
