mod common;

use std::f64::consts::PI;

use kernelwave::kernels::{
    csv_row, eval_kernel, heat_term, parse_queries, relation_conn_s, relation_conn_ss, rescaled_airy_lhs,
    rescaled_pearcey_lhs, transition_interpolation_check, Backend, KernelId, KernelQuery, Variance, CSV_HEADER,
};
use kernelwave::quadrature::QuadOptions;

fn eval(k: KernelId, t1: f64, t2: f64, u: f64, v: f64) -> f64 {
    eval_kernel(&KernelQuery::new(k, t1, t2, u, v)).unwrap().value.re
}

#[test]
fn airy_diagonal_matches_series() {
    // Equal times shift the argument by tau^2.
    for x in [-1.5, -0.4, 0.0, 0.7] {
        for tau in [0.0, 0.2] {
            let k = eval(KernelId::AiryExt, tau, tau, x, x);
            assert!((k - common::airy_kernel_diag(x + tau * tau)).abs() < 1e-11, "x = {x}, tau = {tau}: {k}");
        }
    }
}

#[test]
fn airy_off_diagonal_matches_series() {
    let (x, y) = (0.4, -0.9);
    let (ax, dx) = common::airy_ai(x);
    let (ay, dy) = common::airy_ai(y);
    let expected = (ax * dy - dx * ay) / (x - y);
    assert!((eval(KernelId::AiryExt, 0.0, 0.0, x, y) - expected).abs() < 1e-11);
}

#[test]
fn sine_variants_on_the_diagonal() {
    assert!((eval(KernelId::SineExt, 0.5, 0.5, 0.3, 0.3) - 1.0).abs() < 1e-13);
    assert!((eval(KernelId::S1, 0.0, 0.0, 0.0, 0.0) - 1.0 / PI).abs() < 1e-14);
    assert!((eval(KernelId::S2, -0.2, -0.2, 0.0, 0.0) - 3f64.sqrt() / (2.0 * PI)).abs() < 1e-14);
}

#[test]
fn heat_terms_follow_each_definition() {
    let (dt, dx) = (0.7, 0.4);
    let s1_up = eval(KernelId::S1, dt, 0.0, dx, 0.0);
    let direct = {
        // The integral part alone, by symmetry of the segment: (1/pi) int_0^1 e^{-dt s^2} cos(dx s) ds.
        let n = 2000;
        (0..n)
            .map(|j| {
                let s = (j as f64 + 0.5) / n as f64;
                (-dt * s * s).exp() * (dx * s).cos()
            })
            .sum::<f64>()
            / (n as f64 * PI)
    };
    assert!((s1_up - (direct - heat_term(dt, dx, Variance::FourPi))).abs() < 1e-7);
    assert_eq!(heat_term(0.0, 1.0, Variance::TwoPi), 0.0);
}

#[test]
fn conn_relations_with_ordered_times() {
    for &(t1, t2, u, v) in &[(-0.3, 0.6, 0.2, -0.9), (0.4, 0.1, -0.5, 0.5), (0.0, 0.0, 0.8, 0.8)] {
        let (l, r) = relation_conn_s(t1, t2, u, v).unwrap();
        assert!((l.value - r.value).norm() < 1e-10);
        let (l, r) = relation_conn_ss(t1, t2, u, v).unwrap();
        assert!((l.value - r.value).norm() < 1e-10);
    }
}

#[test]
fn direct_value_is_independent_of_the_vertex_offset() {
    let base = KernelQuery::new(KernelId::PearceyExt, 0.3, -0.1, 0.6, -0.4);
    let a = eval_kernel(&base).unwrap().value;
    let b = eval_kernel(&base.with_opts(QuadOptions { direct_offset: 0.6, ..QuadOptions::default() })).unwrap().value;
    assert!((a - b).norm() < 1e-12);
    let base = KernelQuery::new(KernelId::AiryExt, 0.3, -0.1, 0.6, -0.4);
    let a = eval_kernel(&base).unwrap().value;
    let b = eval_kernel(&base.with_opts(QuadOptions { direct_offset: 0.6, ..QuadOptions::default() })).unwrap().value;
    assert!((a - b).norm() < 1e-12);
}

#[test]
fn saddle_backend_on_plain_queries() {
    for k in [KernelId::AiryExt, KernelId::PearceyExt] {
        let q = KernelQuery::new(k, -0.4, 0.2, -2.5, -3.0);
        let d = eval_kernel(&q).unwrap();
        let s = eval_kernel(&q.with_backend(Backend::Saddle)).unwrap();
        assert_eq!(s.backend_used, Backend::Saddle);
        assert!((d.value - s.value).norm() < 1e-10, "{k:?}: {} vs {}", d.value, s.value);
    }
    let t = eval_kernel(&KernelQuery::transition(1.0, 0.0, 0.0, 0.0, 0.0).with_backend(Backend::Saddle)).unwrap();
    assert_eq!(t.backend_used, Backend::Direct);
}

#[test]
fn rescaled_backends_agree() {
    let o = QuadOptions::default();
    for a in [3.0, 9.0] {
        let d = rescaled_airy_lhs(a, 0.1, -0.3, 0.4, 0.2, Backend::Direct, &o).unwrap();
        let s = rescaled_airy_lhs(a, 0.1, -0.3, 0.4, 0.2, Backend::Saddle, &o).unwrap();
        assert!((d.value - s.value).norm() < 1e-10);
        let d = rescaled_pearcey_lhs(a, 0.1, -0.3, 0.4, 0.2, Backend::Direct, &o).unwrap();
        let s = rescaled_pearcey_lhs(a, 0.1, -0.3, 0.4, 0.2, Backend::Saddle, &o).unwrap();
        assert!((d.value - s.value).norm() < 1e-10);
    }
    assert!(rescaled_airy_lhs(0.0, 0.0, 0.0, 0.0, 0.0, Backend::Saddle, &o).is_err());
}

#[test]
fn transition_kernel_limits() {
    let (k0, _) = transition_interpolation_check(0.0, 0.2, -0.3, 0.1, 0.4).unwrap();
    let p = eval(KernelId::PearceyExt, 0.2, -0.3, 0.1, 0.4);
    assert!((k0.value.re - p).abs() < 1e-10);
    let (k, ai) = transition_interpolation_check(8.0, 0.0, 0.0, 0.0, 0.0).unwrap();
    assert!((k.value - ai.value).norm() < 1e-2);
}

#[test]
fn invalid_queries_are_usage_errors() {
    let bad = KernelQuery::new(KernelId::S1, f64::NAN, 0.0, 0.0, 0.0);
    assert!(matches!(eval_kernel(&bad), Err(kernelwave::Error::Usage(_))));
    let bad = KernelQuery { opts: QuadOptions { nodes_per_panel: 0, ..QuadOptions::default() }, ..KernelQuery::new(KernelId::S1, 0.0, 0.0, 0.0, 0.0) };
    assert!(eval_kernel(&bad).is_err());
}

#[test]
fn csv_round_trip_is_lossless() {
    let queries = [
        KernelQuery::new(KernelId::SineExt, 0.1 / 3.0, -0.2, 1.0 / 7.0, 0.3),
        KernelQuery::transition(2.0 / 3.0, 0.0, 0.0, 0.1, -0.1),
    ];
    let mut csv = format!("{CSV_HEADER}\n");
    let mut values = vec![];
    for q in &queries {
        let r = eval_kernel(q).unwrap();
        csv.push_str(&csv_row(q, &r));
        csv.push('\n');
        values.push(r.value);
    }
    let back = parse_queries(&csv, &QuadOptions::default()).unwrap();
    for ((q, b), v) in queries.iter().zip(&back).zip(&values) {
        assert_eq!(q.tau1, b.tau1);
        assert_eq!(q.u, b.u);
        assert_eq!(q.a_param, b.a_param);
        assert!((eval_kernel(b).unwrap().value - v).norm() <= 1e-12);
    }
}
