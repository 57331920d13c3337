use bvdeg_core::gallery::{make_map, GallerySpec};
use bvdeg_core::variation::{
    coarea_sides, directional_variation, hausdorff_content, slice_variation_integral, superlevel_perimeter, tv_1d,
};
use bvdeg_core::{coordinate_pair, restrict_slice, Grid, Rational, SampledMap};
use num_rational::BigRational;
use proptest::prelude::*;

fn scalar_field(max: usize) -> impl Strategy<Value = SampledMap<f64>> {
    (prop::collection::vec(2usize..max, 2), 0.05f64..3.0, any::<bool>()).prop_flat_map(|(shape, h, quantized)| {
        let n: usize = shape.iter().product();
        let values = if quantized {
            prop::collection::vec((0i32..5).prop_map(|v| v as f64 * 0.25), n).boxed()
        } else {
            prop::collection::vec(-10.0f64..10.0, n).boxed()
        };
        (Just(shape), values).prop_map(move |(shape, v)| {
            SampledMap::new(Grid::new(shape, vec![h, 1.3 * h], vec![0.0, 0.0]).unwrap(), 1, v).unwrap()
        })
    })
}

fn rational_field() -> impl Strategy<Value = SampledMap<Rational>> {
    (prop::collection::vec(2usize..7, 2), 1i64..5).prop_flat_map(|(shape, den)| {
        let n: usize = shape.iter().product();
        (Just(shape), prop::collection::vec(-20i64..20, n)).prop_map(move |(shape, v)| {
            let q = |a: i64, b: i64| BigRational::new(a.into(), b.into());
            let values = v.into_iter().map(|a| q(a, den)).collect();
            SampledMap::new(Grid::new(shape, vec![q(1, 3), q(2, 7)], vec![q(0, 1), q(0, 1)]).unwrap(), 1, values)
                .unwrap()
        })
    })
}

fn vector_field() -> impl Strategy<Value = SampledMap<f64>> {
    (prop::collection::vec(2usize..6, 3), 1usize..4).prop_flat_map(|(shape, m)| {
        let n: usize = shape.iter().product::<usize>() * m;
        (Just(shape), Just(m), prop::collection::vec(-4.0f64..4.0, n)).prop_map(|(shape, m, v)| {
            SampledMap::new(Grid::new(shape, vec![0.5, 0.25, 0.75], vec![0.0; 3]).unwrap(), m, v).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn coarea_holds_for_float_fields(u in scalar_field(30)) {
        let (tv, layer) = coarea_sides(&u).unwrap();
        prop_assert!((tv - layer).abs() <= 1e-10 * tv.abs().max(1e-300), "{} vs {}", tv, layer);
    }

    #[test]
    fn coarea_is_exact_for_rational_fields(u in rational_field()) {
        let (tv, layer) = coarea_sides(&u).unwrap();
        prop_assert_eq!(tv, layer);
    }

    #[test]
    fn slice_integral_matches_directional_variation(f in vector_field(), axis in 0usize..3) {
        let a = slice_variation_integral(&f, axis).unwrap();
        let b = directional_variation(&f, axis).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300), "{} vs {}", a, b);
    }

    #[test]
    fn tv_1d_ignores_reversal(s in prop::collection::vec(-1e3f64..1e3, 2..200)) {
        let mut r = s.clone();
        r.reverse();
        let (a, b) = (tv_1d(&s).unwrap(), tv_1d(&r).unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
    }

    #[test]
    fn tv_1d_ignores_reversal_exactly_for_rationals(s in prop::collection::vec(-50i64..50, 2..40)) {
        let q: Vec<Rational> = s.iter().map(|&v| BigRational::new(v.into(), 7.into())).collect();
        let mut r = q.clone();
        r.reverse();
        prop_assert_eq!(tv_1d(&q).unwrap(), tv_1d(&r).unwrap());
    }
}

/// Points of `{u = t}` on fine lines along both axes.
fn level_points(u: &SampledMap<f64>, t: f64, per_cell: usize) -> Vec<[f64; 2]> {
    let g = u.grid();
    let mut pts = Vec::new();
    for axis in 0..2 {
        let other = 1 - axis;
        let (lo, hi) = g.extent(other);
        let lines = (g.shape[other] - 1) * per_cell;
        for i in 0..=lines {
            let c = lo + (hi - lo) * i as f64 / lines as f64;
            let eval = |s: f64| {
                let mut x = [0.0; 2];
                x[axis] = s;
                x[other] = c;
                let mut out = [0.0];
                u.interpolate(&x, &mut out);
                (x, out[0] - t)
            };
            let (a, b) = g.extent(axis);
            let steps = (g.shape[axis] - 1) * per_cell;
            let mut prev = eval(a);
            for k in 1..=steps {
                let cur = eval(a + (b - a) * k as f64 / steps as f64);
                if (prev.1 > 0.0) != (cur.1 > 0.0) {
                    let w = prev.1 / (prev.1 - cur.1);
                    pts.push([
                        prev.0[0] + w * (cur.0[0] - prev.0[0]),
                        prev.0[1] + w * (cur.0[1] - prev.0[1]),
                    ]);
                }
                prev = cur;
            }
        }
    }
    pts
}

#[test]
fn superlevel_perimeter_is_bounded_by_level_line_content() {
    // Coordinates of axis-aligned homeomorphism slices; the anisotropic
    // perimeter exceeds Euclidean length along oblique level lines.
    let cantor = make_map(&GallerySpec::CantorShear3d { level: 5 }, &[65, 33, 33]).unwrap();
    let diag = make_map(
        &GallerySpec::Linear { matrix: vec![1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 3.0] },
        &[17, 17, 17],
    )
    .unwrap();
    let mut fields = Vec::new();
    for f in [&cantor, &diag] {
        for (k, j) in [(2, 2), (1, 1), (0, 0)] {
            let pair = coordinate_pair(&restrict_slice(f, k, &0.43).unwrap(), j).unwrap();
            fields.push(pair.component(0).unwrap());
            fields.push(pair.component(1).unwrap());
        }
    }
    for u in &fields {
        let h = u.grid().spacing.iter().cloned().fold(0.0, f64::max);
        let (lo, hi) = u.value_bounds();
        for i in 1..10 {
            let t = lo[0] + (hi[0] - lo[0]) * (i as f64 + 0.37) / 10.0;
            let per = superlevel_perimeter(u, &t).unwrap();
            let pts = level_points(u, t, 8);
            if pts.is_empty() {
                assert_eq!(per, 0.0);
                continue;
            }
            let content = hausdorff_content(&pts, 1, h).unwrap().value;
            assert!(per <= content + h, "t {t}: perimeter {per} vs content {content}");
        }
    }
}
