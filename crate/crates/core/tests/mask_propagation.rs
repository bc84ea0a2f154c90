use vedit_core::pipeline::{execute, mask_iou};
use vedit_core::synth::{build_session, SceneSpec};

fn check(spec: SceneSpec, min_mean: f64) {
    let (session, oracle) = build_session(&spec).unwrap();
    let run = execute(&session).unwrap();
    let iou = mask_iou(&run.masks, &oracle.masks).unwrap();
    assert!(iou.per_frame[0] >= 0.98, "frame 0 IoU {}", iou.per_frame[0]);
    assert!(
        iou.mean >= min_mean,
        "mean IoU {} ({:?})",
        iou.mean,
        iou.per_frame
    );
}

#[test]
fn orbit_insertion_tracks_the_silhouette() {
    check(SceneSpec::insertion_orbit(96, 72, 8), 0.93);
}

#[test]
fn dolly_insertion_tracks_the_silhouette() {
    check(SceneSpec::insertion_dolly(96, 72, 8), 0.93);
}

#[test]
fn dilated_user_mask_still_covers_the_edit() {
    let mut spec = SceneSpec::insertion_orbit(64, 48, 4);
    spec.mask_dilate = 2;
    let (session, oracle) = build_session(&spec).unwrap();
    let run = execute(&session).unwrap();
    // a generous mask propagates to a superset of the true silhouette, up
    // to a thin band at the edit's far edge
    for (pred, truth) in run.masks.iter().zip(&oracle.masks) {
        let missed = truth.and(&pred.complement()).count();
        assert!(
            missed * 50 <= truth.count(),
            "{missed} of {} missed",
            truth.count()
        );
    }
}
