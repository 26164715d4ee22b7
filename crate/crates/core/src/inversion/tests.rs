use super::*;
use crate::fields::Field;

fn field_a() -> Field {
    Field::gaussian(2, 1.0, 1.0)
}

#[test]
fn ladder_construction_rules() {
    let l = geometric_ladder(16.0, 2.0, 3).unwrap();
    assert_eq!(l, vec![16.0, 32.0, 64.0]);
    assert!(geometric_ladder(0.0, 2.0, 3).is_err());
    assert!(geometric_ladder(16.0, 1.0, 3).is_err());
    assert!(geometric_ladder(16.0, 2.0, 0).is_err());
}

#[test]
fn synthetic_two_term_model_recovered_exactly() {
    // a(s) = c₀ + c₁/s and s·b(s) = d₀ + d₁/s are identifiable from any pair
    let lines = LineSet::new(4, 5, 2.0).unwrap();
    let ladder = geometric_ladder(10.0, 2.0, 3).unwrap();
    let c0 = [0.4, -0.3, 0.0];
    let c1 = [-1.1, 0.2, 0.0];
    let d0 = [0.25, 0.5, 0.0];
    let d1 = [-0.7, 0.9, 0.0];
    let n = lines.len();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for &s in &ladder {
        for _ in 0..n {
            a.push(vec3::axpy(c0, 1.0 / s, c1));
            b.push(vec3::scale(vec3::axpy(d0, 1.0 / s, d1), 1.0 / s));
        }
    }
    let sweep =
        EnergySweep::from_parts(lines, ladder, a, b, vec![false; 3 * n]).unwrap();
    let lim = extract_limits(&sweep, 1e-6).unwrap();
    for li in 0..n {
        assert!(vec3::norm(vec3::sub(lim.terms[li].a_zeroth, c0)) < 1e-12);
        assert!(vec3::norm(vec3::sub(lim.terms[li].a_first, c1)) < 1e-11);
        assert!(vec3::norm(vec3::sub(lim.terms[li].b_zeroth, d0)) < 1e-12);
        assert!(vec3::norm(vec3::sub(lim.terms[li].b_first, d1)) < 1e-11);
        assert!(lim.residual[li] < 1e-12);
        assert!(!lim.flagged[li]);
    }
}

#[test]
fn zero_field_sweep_extracts_zeros() {
    let f = Field::zero(2);
    let lines = LineSet::new(4, 5, 2.0).unwrap();
    let ladder = geometric_ladder(8.0, 2.0, 3).unwrap();
    let sweep = generate_sweep(&f, lines, ladder, &Controls::default()).unwrap();
    let lim = extract_limits(&sweep, 1e-6).unwrap();
    for t in &lim.terms {
        assert!(vec3::norm(t.a_zeroth) < 1e-11);
        assert!(vec3::norm(t.a_first) < 1e-9);
        assert!(vec3::norm(t.b_zeroth) < 1e-11);
        assert!(vec3::norm(t.b_first) < 1e-9);
    }
}

#[test]
fn short_ladder_rejected() {
    let lines = LineSet::new(4, 5, 2.0).unwrap();
    let ladder = vec![8.0, 16.0];
    let n = 2 * lines.len();
    let sweep = EnergySweep::from_parts(
        lines,
        ladder,
        vec![vec3::ZERO; n],
        vec![vec3::ZERO; n],
        vec![false; n],
    )
    .unwrap();
    assert!(extract_limits(&sweep, 1e-6).is_err());
}

#[test]
fn sweep_limits_match_quadrature_coefficients() {
    let f = field_a();
    let lines = LineSet::new(8, 9, 3.0).unwrap();
    let ladder = geometric_ladder(16.0, 2.0, 3).unwrap();
    let ctl = Controls {
        rtol: 1e-12,
        atol: 1e-14,
        ..Controls::default()
    };
    let sweep = generate_sweep(&f, lines, ladder, &ctl).unwrap();
    let lim = extract_limits(&sweep, 1e-2).unwrap();
    let oracle = limits_from_field(&f, lines, 2049).unwrap();
    for li in 0..lines.len() {
        let gap = vec3::norm(vec3::sub(
            lim.terms[li].a_zeroth,
            oracle.terms[li].a_zeroth,
        )) / (1.0 + vec3::norm(oracle.terms[li].a_zeroth));
        // the top-pair estimate carries the unmodeled third-order term; its
        // error is bounded by the reported cross-pair spread
        assert!(
            gap <= lim.residual[li].max(1e-9),
            "a₀ gap {gap} exceeds reported spread {} on line {li}",
            lim.residual[li]
        );
        assert!(gap <= 2e-3, "a₀ gap {gap} on line {li}");
    }
}

#[test]
fn extraction_residual_shrinks_with_ladder_base() {
    let f = field_a();
    let lines = LineSet::new(4, 5, 2.0).unwrap();
    let ctl = Controls {
        rtol: 1e-12,
        atol: 1e-14,
        ..Controls::default()
    };
    let res_at = |base: f64| {
        let ladder = geometric_ladder(base, 2.0, 3).unwrap();
        let sweep = generate_sweep(&f, lines, ladder, &ctl).unwrap();
        let lim = extract_limits(&sweep, 1.0).unwrap();
        lim.residual.iter().cloned().fold(0.0, f64::max)
    };
    let (r16, r32) = (res_at(16.0), res_at(32.0));
    // two-term-model error is O(1/s²): doubling the base should cut the
    // pair spread by roughly 4
    assert!(r32 < 0.5 * r16, "spread {r16} → {r32}");
}

#[test]
fn grid_field_reproduces_sampled_magnetic_component() {
    let f = field_a();
    let spec = GridSpec {
        half_width: 5.0,
        res: 161,
    };
    let grid = GridFunction::from_fn(spec, 1, |p| [f.b_matrix(p)[0][1], 0.0, 0.0]);
    let gf = GridField2::new(grid).unwrap();
    for &p in &[[0.3, 0.4, 0.0], [-1.2, 2.0, 0.0], [2.5, -2.5, 0.0]] {
        let got = gf.b_upper(p)[0];
        let expect = f.b_matrix(p)[0][1];
        assert!((got - expect).abs() < 1e-5, "value at {p:?}: {got} vs {expect}");
        let gg = gf.grad_b(p, 0, 1);
        let ge = f.grad_b(p, 0, 1);
        assert!(
            vec3::norm(vec3::sub(gg, ge)) < 1e-3,
            "gradient at {p:?}: {gg:?} vs {ge:?}"
        );
    }
    // zero outside the grid
    assert_eq!(gf.b_upper([7.0, 0.0, 0.0])[0], 0.0);
}

#[test]
fn ablation_reconstruction_from_quadrature_limits() {
    // feeding exact expansion coefficients isolates the tomography error
    let f = field_a();
    let lines = LineSet::new(96, 129, 6.0).unwrap();
    let lim = limits_from_field(&f, lines, 2049).unwrap();
    let cfg = ReconConfig {
        grid: GridSpec {
            half_width: 3.5,
            res: 65,
        },
        points: 1537,
        ..ReconConfig::default()
    };
    let rep = reconstruct_from_a(&lim, &cfg, Some(&f)).unwrap();
    let b_err = rep.b_errors.unwrap()[0].rel_l2;
    assert!(b_err <= 0.03, "tomography-only B error {b_err}");
    let gv_err = rep.grad_v_errors.unwrap();
    for n in &gv_err {
        assert!(n.rel_l2 <= 0.03, "tomography-only ∇V error {}", n.rel_l2);
    }
}

#[test]
fn electric_only_reconstruction_skips_magnetic_step() {
    // B ≡ 0: the a₁ data are pure −P∇V and B̂ is numerically zero
    let f = Field::gaussian(2, 1.0, 0.0);
    let lines = LineSet::new(64, 97, 6.0).unwrap();
    let lim = limits_from_field(&f, lines, 1537).unwrap();
    let cfg = ReconConfig {
        grid: GridSpec {
            half_width: 3.0,
            res: 49,
        },
        points: 1025,
        ..ReconConfig::default()
    };
    let rep = reconstruct_from_a(&lim, &cfg, Some(&f)).unwrap();
    let b_sup = rep.b_recon.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(b_sup < 1e-8, "spurious magnetic reconstruction {b_sup}");
    for n in &rep.grad_v_errors.unwrap() {
        assert!(n.rel_l2 <= 0.03, "∇V error {}", n.rel_l2);
    }
}

#[test]
fn reconstruction_error_monotone_in_ladder_base() {
    let f = field_a();
    let lines = LineSet::new(48, 65, 6.0).unwrap();
    let ctl = Controls::default();
    let cfg = ReconConfig {
        grid: GridSpec {
            half_width: 3.0,
            res: 49,
        },
        points: 1025,
        ..ReconConfig::default()
    };
    let err_at = |base: f64| {
        let ladder = geometric_ladder(base, 2.0, 3).unwrap();
        let sweep = generate_sweep(&f, lines, ladder, &ctl).unwrap();
        let lim = extract_limits(&sweep, 1.0).unwrap();
        let rep = reconstruct_from_a(&lim, &cfg, Some(&f)).unwrap();
        rep.b_errors.unwrap()[0].rel_l2
    };
    let (e16, e32) = (err_at(16.0), err_at(32.0));
    assert!(e32 <= e16, "B error did not improve: {e16} → {e32}");
}

#[test]
fn potential_from_position_data_with_zero_b() {
    let f = Field::gaussian(2, 1.0, 0.0);
    let lines = LineSet::new(96, 129, 6.0).unwrap();
    let lim = limits_from_field(&f, lines, 1537).unwrap();
    let cfg = ReconConfig {
        grid: GridSpec {
            half_width: 3.0,
            res: 49,
        },
        points: 1025,
        ..ReconConfig::default()
    };
    let rep = reconstruct_v_from_b(&lim, &Field::zero(2), &cfg, Some(&f)).unwrap();
    let err = rep.v_errors.unwrap()[0].rel_l2;
    assert!(err <= 0.05, "V error {err}");
    assert!(!rep.caveats.is_empty());
}

#[test]
fn potential_from_position_data_with_known_b() {
    let f = field_a();
    let lines = LineSet::new(96, 129, 6.0).unwrap();
    let lim = limits_from_field(&f, lines, 2049).unwrap();
    let cfg = ReconConfig {
        grid: GridSpec {
            half_width: 3.0,
            res: 49,
        },
        points: 2049,
        ..ReconConfig::default()
    };
    let rep = reconstruct_v_from_b(&lim, &f, &cfg, Some(&f)).unwrap();
    let err = rep.v_errors.unwrap()[0].rel_l2;
    assert!(err <= 0.08, "V error {err}");
}

#[test]
fn error_report_conventions() {
    let spec = GridSpec {
        half_width: 1.0,
        res: 17,
    };
    let truth = GridFunction::from_fn(spec, 1, |p| {
        [(-vec3::dot(p, p)).exp(), 0.0, 0.0]
    });
    let same = error_report(&truth, &truth).unwrap();
    assert_eq!(same[0].rel_l2, 0.0);
    assert_eq!(same[0].rel_max, 0.0);

    let mut double = truth.clone();
    for v in double.data.iter_mut() {
        *v *= 2.0;
    }
    let r = error_report(&truth, &double).unwrap();
    assert!((r[0].rel_l2 - 1.0).abs() < 1e-13);

    // adding a bump of known relative mass moves the L² error by exactly
    // that fraction
    let truth_norm: f64 = truth.data.iter().map(|v| v * v).sum::<f64>().sqrt();
    let eps = 0.01;
    let mut bumped = truth.clone();
    bumped.data[5] += eps * truth_norm;
    let r = error_report(&truth, &bumped).unwrap();
    assert!((r[0].rel_l2 - eps).abs() < 1e-12, "{}", r[0].rel_l2);
}

#[test]
fn flagged_quota_aborts_reconstruction() {
    let f = field_a();
    let lines = LineSet::new(8, 9, 3.0).unwrap();
    let mut lim = limits_from_field(&f, lines, 1025).unwrap();
    for fl in lim.flagged.iter_mut() {
        *fl = true;
    }
    let cfg = ReconConfig::default();
    match reconstruct_from_a(&lim, &cfg, None) {
        Err(Error::Coverage(_)) => {}
        other => panic!("expected coverage error, got {:?}", other.err()),
    }
}

#[test]
fn three_dimensional_pipeline_from_quadrature_limits() {
    let f = Field::potential3(0.6, [0.8, -0.5, 0.3]);
    let mk = |pair| PlaneFamily::uniform_slices(pair, 3.2, 17, 24, 33, 5.0);
    let fams = [
        family_limits_from_field(&f, &mk((0, 1)), 1025).unwrap(),
        family_limits_from_field(&f, &mk((0, 2)), 1025).unwrap(),
        family_limits_from_field(&f, &mk((1, 2)), 1025).unwrap(),
    ];
    let cfg = ReconConfig {
        grid: GridSpec {
            half_width: 3.2,
            res: 33,
        },
        points: 1025,
        ..ReconConfig::default()
    };
    let rep = reconstruct3_from_a(&fams, &cfg, Some(&f)).unwrap();
    // coarse sampling: 24 plane angles dominate the error budget
    let b_errs = rep.b_errors.unwrap();
    for (idx, e) in b_errs.iter().enumerate() {
        assert!(*e <= 0.2, "pair {idx} magnetic stack error {e}");
    }
    let gv = rep.grad_v_error.unwrap();
    assert!(gv <= 0.3, "potential-gradient stack error {gv}");
}
