use lsgraph_ffi::*;
use std::ffi::CStr;
use std::ptr;

fn last_error() -> String {
    let p = lsg_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn graph_embedding_round_trip() {
    unsafe {
        let mut g = ptr::null_mut();
        let mut latent = vec![0.0; 200 * 3];
        assert_eq!(lsg_graph_sample_hw(1.0, 1.0, 200, 3, latent.as_mut_ptr(), latent.len(), &mut g), LsgStatus::Ok);
        assert_eq!(lsg_graph_n(g), 200);
        assert!(lsg_graph_edge_count(g) > 0);
        assert!(latent.iter().all(|v| (0.0..=1.0).contains(v)));

        let mut e = ptr::null_mut();
        assert_eq!(lsg_embed(g, 3, &mut e), LsgStatus::Ok);
        let (mut n, mut d) = (0, 0);
        assert_eq!(lsg_embedding_shape(e, &mut n, &mut d), LsgStatus::Ok);
        assert_eq!((n, d), (200, 3));
        let mut vals = [0.0; 3];
        assert_eq!(lsg_embedding_eigenvalues(e, vals.as_mut_ptr(), 3), LsgStatus::Ok);
        assert!(vals[0].abs() >= vals[1].abs() && vals[1].abs() >= vals[2].abs());
        let mut small = [0.0; 2];
        assert_eq!(lsg_embedding_eigenvalues(e, small.as_mut_ptr(), 2), LsgStatus::BufferTooSmall);
        assert!(last_error().contains("3 needed"));
        lsg_embedding_free(e);
        lsg_graph_free(g);
    }
}

#[test]
fn invalid_inputs_map_to_codes() {
    unsafe {
        let mut g = ptr::null_mut();
        assert_eq!(lsg_graph_sample_hw(-1.0, 1.0, 10, 1, ptr::null_mut(), 0, &mut g), LsgStatus::Validation);
        assert!(g.is_null());
        let edges = [0usize, 0];
        assert_eq!(lsg_graph_from_edges(3, edges.as_ptr(), 1, &mut g), LsgStatus::Validation);
        assert!(last_error().contains("invalid input"));
        assert_eq!(lsg_graph_from_edges(3, ptr::null(), 1, &mut g), LsgStatus::NullPointer);
        let path = c"/nonexistent/graph.edges";
        assert_eq!(lsg_graph_read(path.as_ptr(), &mut g), LsgStatus::Io);
        // Freeing null handles is a no-op.
        lsg_graph_free(ptr::null_mut());
        lsg_embedding_free(ptr::null_mut());
        lsg_curve_free(ptr::null_mut());
    }
}

#[test]
fn curves_and_estimates() {
    unsafe {
        let mut hw = ptr::null_mut();
        assert_eq!(lsg_curve_hardy_weinberg(&mut hw), LsgStatus::Ok);
        let control = [0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0];
        let mut bez = ptr::null_mut();
        assert_eq!(lsg_curve_bezier(control.as_ptr(), 3, &mut bez), LsgStatus::Ok);
        assert_eq!(lsg_curve_dim(bez), 3);
        // The Hardy-Weinberg curve is this Bezier curve.
        assert!((lsg_curve_length(hw) - lsg_curve_length(bez)).abs() < 1e-9);
        let (mut p, mut q) = ([0.0; 3], [0.0; 3]);
        assert_eq!(lsg_curve_point(hw, 0.3, p.as_mut_ptr(), 3), LsgStatus::Ok);
        assert_eq!(lsg_curve_point(bez, 0.3, q.as_mut_ptr(), 3), LsgStatus::Ok);
        for k in 0..3 {
            assert!((p[k] - q[k]).abs() < 1e-8);
        }
        assert_eq!(lsg_curve_point(hw, 1.5, p.as_mut_ptr(), 3), LsgStatus::Validation);

        let y: Vec<f64> = (1..200).map(|i| i as f64 / 200.0).collect();
        let (mut a, mut b) = (0.0, 0.0);
        assert_eq!(lsg_fit_beta(y.as_ptr(), y.len(), &mut a, &mut b), LsgStatus::Ok);
        assert!((a - 1.0).abs() < 0.1 && (b - 1.0).abs() < 0.1);

        // Points on the curve: the M-estimate equals the fit on their parameters.
        let mut x = Vec::new();
        for &s in &y {
            let mut pt = [0.0; 3];
            assert_eq!(lsg_curve_point(hw, s, pt.as_mut_ptr(), 3), LsgStatus::Ok);
            x.extend(pt);
        }
        let (mut a2, mut b2) = (0.0, 0.0);
        assert_eq!(lsg_m_estimate(x.as_ptr(), y.len(), 3, hw, 1e-6, 0, &mut a2, &mut b2), LsgStatus::Ok);
        assert!((a - a2).abs() < 1e-6 && (b - b2).abs() < 1e-6);
        lsg_curve_free(hw);
        lsg_curve_free(bez);
    }
}

#[test]
fn ks_and_two_sample() {
    unsafe {
        let y1 = [0.1, 0.2, 0.3];
        let y2 = [0.4, 0.5, 0.6];
        let (mut d, mut p) = (0.0, 0.0);
        assert_eq!(lsg_ks_test(y1.as_ptr(), 3, y2.as_ptr(), 3, &mut d, &mut p), LsgStatus::Ok);
        assert_eq!(d, 1.0);
        assert!(p < 0.1);

        let mut g = ptr::null_mut();
        assert_eq!(lsg_graph_sample_hw(2.0, 5.0, 150, 11, ptr::null_mut(), 0, &mut g), LsgStatus::Ok);
        let (mut s, mut pv, mut fs, mut fp) = (0.0, 0.0, 0.0, 0.0);
        assert_eq!(lsg_two_sample_test(g, g, 3, &mut s, &mut pv, &mut fs, &mut fp), LsgStatus::Ok);
        assert_eq!(s, 0.0);
        assert_eq!(pv, 1.0);
        assert!(fs > 0.0);
        lsg_graph_free(g);
    }
}

#[test]
fn version_is_set() {
    let v = unsafe { CStr::from_ptr(lsg_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
