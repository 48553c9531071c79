//! Property suites at reduced sizes; the full sizes run in the acceptance target.

use sublift_core::verify::{
    dataterm_duality, epigraph_split, jump_continuum, min_pooling, projections, tv_reduction, two_label_infconv,
};

#[cfg(not(feature = "fault-injection"))]
#[test]
fn jump_sets_match_continuum() {
    let r = jump_continuum(101, 300);
    assert!(r.passed(), "{r}");
}

#[cfg(not(feature = "fault-injection"))]
#[test]
fn capacities_are_min_pooled() {
    let r = min_pooling(102, 60);
    assert!(r.passed(), "{r}");
}

#[cfg(not(feature = "fault-injection"))]
#[test]
fn split_matches_sampled_infimum() {
    let r = epigraph_split(103, 300);
    assert!(r.passed(), "{r}");
}

#[cfg(not(feature = "fault-injection"))]
#[test]
fn tv_reduces_to_balls() {
    let r = tv_reduction(104, 300);
    assert!(r.passed(), "{r}");
}

#[cfg(not(feature = "fault-injection"))]
#[test]
fn dataterm_primal_equals_dual() {
    let r = dataterm_duality(105, 10);
    assert!(r.passed(), "{r}");
}

#[cfg(not(feature = "fault-injection"))]
#[test]
fn two_labels_equal_reference() {
    let r = two_label_infconv(106, 2);
    assert!(r.passed(), "{r}");
}

#[cfg(not(feature = "fault-injection"))]
#[test]
fn projections_are_exact() {
    let r = projections(107, 60);
    assert!(r.passed(), "{r}");
}

#[cfg(feature = "fault-injection")]
#[test]
fn corrupted_projection_is_caught() {
    assert!(!epigraph_split(103, 300).passed());
    assert!(!projections(107, 20).passed());
}
