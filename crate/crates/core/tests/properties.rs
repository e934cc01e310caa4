use kpz_core::grid::pair_rounding_bound;
use kpz_core::noise::pair_increments;
use kpz_core::renorm::association_errors;
use kpz_core::rng::NoiseStream;
use kpz_core::*;
use proptest::prelude::*;

fn grid() -> GridSpec<f64> {
    make_grid(1.0, 64, 2e-3, 50).unwrap()
}

fn spec_strategy() -> impl Strategy<Value = TestFunctionSpec> {
    (0.0f64..0.04, 0.01f64..0.05, 0.3f64..0.7, 0.05f64..0.2)
        .prop_filter("support inside the horizon", |(c, w, _, _)| c + w < 0.099)
        .prop_map(|(ac, aw, bc, bw)| TestFunctionSpec::new(ac, aw, bc, bw))
}

fn field_strategy() -> impl Strategy<Value = FieldPath<f64>> {
    let g = grid();
    prop::collection::vec(-2.0f64..2.0, g.steps() + 1 + g.points()).prop_map(move |v| {
        FieldPath::from_fn(g, |t, x| {
            let k = (t / g.dt()).round() as usize;
            let i = (x / g.dx()).round() as usize;
            v[k] * v[g.steps() + 1 + i] + (7.0 * x).sin()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pairing_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, f in field_strategy(), h in field_strategy(), spec in spec_strategy()) {
        let tf = make_test_function(&grid(), &spec).unwrap();
        let combo = f.combine(a, &h, b).unwrap();
        let lhs = kpz_core::pair(&combo, tf.phi()).unwrap();
        let rhs = a * kpz_core::pair(&f, tf.phi()).unwrap() + b * kpz_core::pair(&h, tf.phi()).unwrap();
        let tol = 8.0 * (pair_rounding_bound(&combo, tf.phi()) + pair_rounding_bound(&f, tf.phi()) * a.abs() + pair_rounding_bound(&h, tf.phi()) * b.abs()) + 1e-15;
        prop_assert!((lhs - rhs).abs() <= tol);
    }

    #[test]
    fn x_independent_paths_are_invisible(vals in prop::collection::vec(-1e3f64..1e3, 51), spec in spec_strategy(), f in field_strategy()) {
        let g = grid();
        let tf = make_test_function(&g, &spec).unwrap();
        let c = FieldPath::from_fn(g, |t, _| vals[(t / g.dt()).round() as usize]);
        let v = kpz_core::pair(&c, tf.phi()).unwrap();
        prop_assert!(v.abs() < 1e-12);
        let shifted = f.add(&c).unwrap();
        let d = kpz_core::pair(&shifted, tf.phi()).unwrap() - kpz_core::pair(&f, tf.phi()).unwrap();
        prop_assert!(d.abs() < 1e-12);
    }

    #[test]
    fn phi_rows_telescope(spec in spec_strategy()) {
        let tf = make_test_function(&grid(), &spec).unwrap();
        for row in tf.phi().rows() {
            let s: f64 = row.iter().sum();
            let scale: f64 = row.iter().map(|v| v.abs()).sum();
            prop_assert!(s.abs() <= 1e-14 * scale.max(1.0));
        }
    }

    #[test]
    fn adjoint_identity_holds_per_realization(seed in any::<u64>(), replica in 0u64..1000, spec in spec_strategy(), n in 2u32..=16) {
        let g = grid();
        let tf = make_test_function(&g, &spec).unwrap();
        let op = make_mollifier(&g, n).unwrap();
        let noise = sample_white_noise(&g, seed, replica);
        let direct = pair_increments(&mollify_noise(&noise, &op).unwrap(), tf.phi()).unwrap();
        let adjoint = noise_pairing(&noise, tf.phi(), Some(&op)).unwrap();
        prop_assert!((direct - adjoint).abs() <= 1e-12 * (1.0 + direct.abs()));
    }

    #[test]
    fn mollification_is_linear(seed in any::<u64>(), a in -2.0f64..2.0) {
        let g = grid();
        let op = make_mollifier(&g, 8).unwrap();
        let x = sample_white_noise(&g, seed, 0);
        let y = sample_white_noise(&g, seed, 1);
        let sum: Vec<f64> = x.increments().iter().zip(y.increments()).map(|(p, q)| a * p + q).collect();
        let z = WhiteNoiseLattice::from_increments(&g, 0, 0, sum).unwrap();
        let (px, py, pz) = (mollify_noise(&x, &op).unwrap(), mollify_noise(&y, &op).unwrap(), mollify_noise(&z, &op).unwrap());
        for ((u, v), w) in px.increments().iter().zip(py.increments()).zip(pz.increments()) {
            prop_assert!((a * u + v - w).abs() <= 1e-12);
        }
    }

    #[test]
    fn streams_are_addressable(seed in any::<u64>(), replica in any::<u64>(), first in 0u64..10_000, len in 1usize..64) {
        let s = NoiseStream::new(seed, replica);
        let mut all = vec![0.0; (first as usize) + len];
        s.fill(0, &mut all);
        let mut part = vec![0.0; len];
        s.fill(first, &mut part);
        prop_assert_eq!(&all[first as usize..], &part[..]);
    }

    #[test]
    fn coarsening_adds_cell_masses(seed in any::<u64>(), tf in prop::sample::select(vec![1usize, 2, 5, 10]), sf in prop::sample::select(vec![1usize, 2, 4, 8])) {
        let g = grid();
        let noise = sample_white_noise(&g, seed, 0);
        let c = noise.coarsen(tf, sf).unwrap();
        let (mc, dxc, dx) = (c.grid().points(), c.grid().dx(), g.dx());
        for kc in 0..c.grid().steps() {
            for ic in 0..mc {
                let mass: f64 = (0..tf).flat_map(|r| (0..sf).map(move |j| (kc * tf + r, ic * sf + j)))
                    .map(|(k, i)| noise.row(k)[i] * dx).sum();
                prop_assert!((c.row(kc)[ic] * dxc - mass).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn association_symmetric_and_additive(s1 in any::<u64>(), spec in spec_strategy()) {
        let g = grid();
        let phis = vec![make_test_function(&g, &spec).unwrap()];
        let levels = vec![2u32, 4, 8];
        let build = |shift: f64| {
            let paths = levels.iter().map(|&n| {
                let noise = sample_white_noise(&g, s1, 0);
                let p = mollify_noise(&noise, &make_mollifier(&g, n).unwrap()).unwrap();
                p.cumulative().map(|v| v + shift * v * v)
            }).collect();
            SequenceField::new(levels.clone(), paths, (s1, 0), "W").unwrap()
        };
        let (f, gg, h) = (build(0.0), build(0.5), build(-1.0));
        let (fg, _) = association_errors(&f, Reference::Sequence(&gg), &phis).unwrap();
        let (gf, _) = association_errors(&gg, Reference::Sequence(&f), &phis).unwrap();
        let (gh, _) = association_errors(&gg, Reference::Sequence(&h), &phis).unwrap();
        let (fh, _) = association_errors(&f, Reference::Sequence(&h), &phis).unwrap();
        for l in 0..levels.len() {
            prop_assert!((fg[0][l] + gf[0][l]).abs() <= 1e-14);
            prop_assert!((fg[0][l] + gh[0][l] - fh[0][l]).abs() <= 1e-12);
        }
    }

    #[test]
    fn delta_net_unit_mass(steps in prop::collection::btree_set(4usize..50, 1..5)) {
        let g = grid();
        let eps: Vec<f64> = steps.iter().rev().map(|&s| s as f64 * g.dt()).collect();
        let net = make_delta_net(&g, &eps).unwrap();
        for j in 0..eps.len() {
            prop_assert!((net.mass(j) - 1.0).abs() < 1e-13);
        }
    }
}
