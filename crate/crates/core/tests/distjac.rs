use bvdeg_core::degree::{degree_integral, PlanarMap, PlanarRegion};
use bvdeg_core::distjac::{boundary_pairing, jacobian_measure, DyadicGrid, DyadicSurvey, SurveyConfig};
use bvdeg_core::gallery::{make_map, GallerySpec};
use bvdeg_core::{coordinate_pair, restrict_slice, SampledMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn smooth_maps() -> Vec<(GallerySpec, SampledMap<f64>)> {
    [
        GallerySpec::Zpow { k: 1 },
        GallerySpec::Zpow { k: 2 },
        GallerySpec::Shear2d { amount: 0.2 },
        GallerySpec::RadialStretch { power: 2.0 },
        GallerySpec::Linear { matrix: vec![2.0, 1.0, 0.5, 1.5] },
    ]
    .into_iter()
    .map(|s| {
        let f = make_map(&s, &[257, 257]).unwrap();
        (s, f)
    })
    .collect()
}

fn cantor_slice() -> SampledMap<f64> {
    let f = make_map(&GallerySpec::CantorShear3d { level: 5 }, &[97, 33, 33]).unwrap();
    coordinate_pair(&restrict_slice(&f, 2, &0.5).unwrap(), 2).unwrap()
}

fn square(g: &SampledMap<f64>) -> ([f64; 2], [f64; 2]) {
    let (lo, hi) = g.domain().unwrap();
    (lo, [hi[0] - lo[0], hi[1] - lo[1]])
}

#[test]
fn dyadic_u_never_decreases_with_depth() {
    let mut maps: Vec<SampledMap<f64>> = smooth_maps().into_iter().map(|m| m.1).collect();
    maps.push(make_map(&GallerySpec::Zpow { k: 3 }, &[129, 129]).unwrap());
    maps.push(cantor_slice());
    let config = SurveyConfig {
        max_depth: 4,
        raster: 192,
        edge_subdivisions: 4,
    };
    for g in &maps {
        let (corner, sides) = square(g);
        let s = DyadicSurvey::run(g, corner, sides, &DyadicGrid::for_rect(corner, sides), &config).unwrap();
        let u: Vec<f64> = s.depths.iter().map(|d| d.u()).collect();
        assert!(u.windows(2).all(|w| w[1] >= w[0]), "{u:?}");
        for d in &s.depths {
            assert!(d.u() <= d.v() + 1e-12);
        }
    }
}

#[test]
fn jacobian_measure_is_nonnegative_for_orientation_preserving_maps() {
    let mut maps: Vec<SampledMap<f64>> = smooth_maps().into_iter().map(|m| m.1).collect();
    maps.push(cantor_slice());
    for g in &maps {
        let (corner, sides) = square(g);
        let mu = jacobian_measure(g, corner, sides, &DyadicGrid::for_rect(corner, sides), 3, 192).unwrap();
        let min = mu.weights().iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min >= -1e-9, "{min}");
    }
}

#[test]
fn cell_degree_integral_is_bounded_by_jacobian_mass() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let depth = 3;
    for (spec, g) in smooth_maps() {
        let (corner, sides) = square(&g);
        let dy = DyadicGrid::for_rect(corner, sides);
        let config = SurveyConfig {
            max_depth: depth,
            raster: 256,
            edge_subdivisions: 8,
        };
        let s = DyadicSurvey::run(&g, corner, sides, &dy, &config).unwrap();
        let cells = s.finest();
        for _ in 0..50 {
            let i = rng.gen_range(0..cells.cells.len());
            let (c, w) = cells.cells[i];
            let region = PlanarRegion::rect(c, w).with_resolution(256);
            let abs = degree_integral(&g, &region, 256).unwrap().absolute;
            let mass = cells.signed[i].abs();
            assert!(abs <= mass * 1.03 + 1e-3 * w[0] * w[1], "{spec:?} cell {i}: {abs} vs {mass}");
        }
    }
}

#[test]
fn boundary_pairing_matches_degree_integral() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for (spec, g) in smooth_maps() {
        let (lo, hi) = g.domain().unwrap();
        let c = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
        let rmax = 0.45 * (hi[0] - lo[0]);
        for _ in 0..20 {
            let r = rng.gen_range(0.2 * rmax..rmax);
            let disk = PlanarRegion::disk(c, r).with_resolution(1024);
            let Ok(di) = degree_integral(&g, &disk, 512) else { continue };
            let p = boundary_pairing(&g, c, r, 1024).unwrap();
            let gap = (p - di.signed).abs() / di.signed.abs();
            assert!(gap <= 0.03, "{spec:?} r {r}: pairing {p} vs {}", di.signed);
        }
    }
}
