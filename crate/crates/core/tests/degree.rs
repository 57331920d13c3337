use std::f64::consts::TAU;

use bvdeg_core::degree::{
    boundary_image, check_degree_axioms, preimage_count, random_guillotine, topological_degree, winding_number, FnMap,
    PlanarMap, PlanarRegion,
};
use bvdeg_core::gallery::{make_map, GallerySpec};
use bvdeg_core::{coordinate_pair, restrict_slice, ClosedPolyline, Error, SampledMap};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn circle_from(p: [f64; 2], center: [f64; 2], n: usize, turns: f64) -> Vec<[f64; 2]> {
    let r = ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)).sqrt();
    let a0 = (p[1] - center[1]).atan2(p[0] - center[0]);
    (0..n)
        .map(|i| {
            let a = a0 + turns.signum() * TAU * i as f64 / n as f64;
            [center[0] + r * a.cos(), center[1] + r * a.sin()]
        })
        .collect()
}

fn planar_homeomorphisms() -> Vec<(String, SampledMap<f64>)> {
    let mut out: Vec<(String, SampledMap<f64>)> = [
        GallerySpec::Zpow { k: 1 },
        GallerySpec::Shear2d { amount: 0.2 },
        GallerySpec::RadialStretch { power: 2.0 },
        GallerySpec::Linear { matrix: vec![2.0, 1.0, 0.5, 1.5] },
    ]
    .into_iter()
    .map(|s| (s.label().to_string(), make_map(&s, &[129, 129]).unwrap()))
    .collect();
    let cantor = make_map(&GallerySpec::CantorShear3d { level: 5 }, &[65, 33, 33]).unwrap();
    for (k, j) in [(2, 2), (1, 1)] {
        let slice = coordinate_pair(&restrict_slice(&cantor, k, &0.41).unwrap(), j).unwrap();
        out.push((format!("cantor slice {k}{j}"), slice));
    }
    out
}

fn random_region(rng: &mut ChaCha8Rng, lo: [f64; 2], hi: [f64; 2]) -> PlanarRegion {
    let w = [hi[0] - lo[0], hi[1] - lo[1]];
    if rng.gen_bool(0.5) {
        let r = rng.gen_range(0.1..0.4) * w[0].min(w[1]);
        let c = [rng.gen_range(lo[0] + r..hi[0] - r), rng.gen_range(lo[1] + r..hi[1] - r)];
        PlanarRegion::disk(c, r * 0.99)
    } else {
        let s = [rng.gen_range(0.2..0.8) * w[0], rng.gen_range(0.2..0.8) * w[1]];
        let c = [rng.gen_range(lo[0]..hi[0] - s[0]), rng.gen_range(lo[1]..hi[1] - s[1])];
        PlanarRegion::rect(c, s)
    }
}

fn is_unstable(e: &Error) -> bool {
    matches!(e.root(), Error::UnstableDegree { .. } | Error::OnBoundary { .. })
}

proptest! {
    #[test]
    fn winding_adds_over_concatenated_loops(
        c1 in (-1.0f64..1.0, -1.0f64..1.0),
        c2 in (-1.0f64..1.0, -1.0f64..1.0),
        y in (-3.0f64..3.0, -3.0f64..3.0),
        o1 in any::<bool>(),
        o2 in any::<bool>(),
    ) {
        let p = [0.1, 0.2];
        let a = circle_from(p, [c1.0, c1.1], 200, if o1 { 1.0 } else { -1.0 });
        let b = circle_from(p, [c2.0, c2.1], 300, if o2 { 1.0 } else { -1.0 });
        let y = [y.0, y.1];
        let wa = winding_number(&ClosedPolyline::new(a.clone()).unwrap(), &y);
        let wb = winding_number(&ClosedPolyline::new(b.clone()).unwrap(), &y);
        let both: Vec<[f64; 2]> = a.into_iter().chain(b).collect();
        let wab = winding_number(&ClosedPolyline::new(both).unwrap(), &y);
        if let (Ok(wa), Ok(wb), Ok(wab)) = (wa, wb, wab) {
            prop_assert_eq!(wab, wa + wb);
        }
    }

    #[test]
    fn degree_survives_perturbations_below_the_distance(
        k in prop::sample::select(vec![1, 2, 3, -1, -2]),
        y in (-0.9f64..0.9, -0.9f64..0.9),
        amp in 0.0f64..1.0,
        freq in (0.5f64..6.0, 0.5f64..6.0),
    ) {
        let g = make_map(&GallerySpec::Zpow { k }, &[129, 129]).unwrap();
        let region = PlanarRegion::disk([0.0, 0.0], 0.7);
        let y = [y.0, y.1];
        let bi = boundary_image(&g, &region).unwrap();
        let d = bi.distance(y);
        prop_assume!(d > 4.0 * bi.margin);
        let base = bi.degree(y).unwrap();
        let eps = 0.45 * d * amp;
        let wiggled = FnMap(|p: [f64; 2]| {
            let v = g.eval(p);
            [v[0] + eps * (freq.0 * p[0] + 3.0 * p[1]).sin(), v[1] + eps * (freq.1 * p[1] - p[0]).cos()]
        });
        match topological_degree(&wiggled, &region, y) {
            Ok(deg) => prop_assert_eq!(deg, base),
            Err(e) => prop_assert!(is_unstable(&e), "{}", e),
        }
    }
}

#[test]
fn orientation_preserving_homeomorphisms_have_degree_zero_or_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (label, g) in planar_homeomorphisms() {
        let (lo, hi) = g.domain().unwrap();
        let mut seen = [0usize; 2];
        for _ in 0..60 {
            let region = random_region(&mut rng, lo, hi);
            let y = g.eval([rng.gen_range(lo[0]..hi[0]), rng.gen_range(lo[1]..hi[1])]);
            match topological_degree(&g, &region, y) {
                Ok(d) => {
                    assert!(d == 0 || d == 1, "{label}: degree {d}");
                    seen[d as usize] += 1;
                }
                Err(e) => assert!(is_unstable(&e), "{label}: {e}"),
            }
        }
        assert!(seen[0] > 0 && seen[1] > 0, "{label}: {seen:?}");
    }
}

#[test]
fn degree_is_bounded_by_preimage_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut maps = planar_homeomorphisms();
    maps.push(("zpow 3".into(), make_map(&GallerySpec::Zpow { k: 3 }, &[129, 129]).unwrap()));
    for (label, g) in maps {
        let (lo, hi) = g.domain().unwrap();
        for _ in 0..25 {
            let region = random_region(&mut rng, lo, hi);
            let y = g.eval([rng.gen_range(lo[0]..hi[0]), rng.gen_range(lo[1]..hi[1])]);
            let Ok(d) = topological_degree(&g, &region, y) else { continue };
            let n = preimage_count(&g, &region, y, 128).unwrap();
            assert!(d.unsigned_abs() as usize <= n, "{label}: deg {d} > N {n}");
        }
    }
}

#[test]
fn guillotine_pieces_add_up() {
    let g = make_map(&GallerySpec::Zpow { k: 2 }, &[129, 129]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut applicable = 0;
    for _ in 0..30 {
        let s = [rng.gen_range(0.3..1.5), rng.gen_range(0.3..1.5)];
        let region = PlanarRegion::rect([rng.gen_range(-1.0..1.0 - s[0]), rng.gen_range(-1.0..1.0 - s[1])], s);
        let pieces = random_guillotine(&region, rng.gen_range(2..6), &mut rng).unwrap();
        let y = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
        match check_degree_axioms(&g, &region, &pieces, y, 128) {
            Ok(r) => {
                assert!(r.passed(), "{:?}", r.checks);
                applicable += r.checks.iter().filter(|c| c.asserted).count();
            }
            Err(e) => assert!(is_unstable(&e), "{e}"),
        }
    }
    assert!(applicable > 0);
}
