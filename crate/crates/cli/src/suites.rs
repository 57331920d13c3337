//! Suite runners. Each suite turns a [`SuiteConfig`] into a list of checks
//! plus metadata; computation errors become failed rows.

use std::time::Instant;

use anyhow::{bail, Result};
use bvdeg_core::adjugate::{
    distributional_adjugate, regularity_verdict, weak_convergence_stability,
    AdjugateConfig, VerdictConfig,
};
use bvdeg_core::degree::{
    boundary_image, check_degree_axioms, preimage_count, random_guillotine, random_sectors, PlanarMap,
    PlanarRegion, RegionKind,
};
use bvdeg_core::distjac::{
    degree_identity, lebesgue_area_bounds, mollified_boundary_convergence, DyadicGrid, SurveyConfig,
};
use bvdeg_core::gallery::{
    oracle, oracle_adj_entries, oracle_inverse_tv, oracle_mu_axes, CantorStaircase, GallerySpec, Quantity,
};
use bvdeg_core::variation::{coarea_check, directional_variation, slice_variation_integral};
use bvdeg_core::{coordinate_pair, restrict_slice, Check, Grid, SampledMap, VerificationReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{MapSource, SuiteConfig};

/// Checks and metadata of one suite run, with wall-clock time per check.
#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub report: VerificationReport,
    pub runtimes_ms: Vec<f64>,
}

struct Runner {
    report: VerificationReport,
    runtimes_ms: Vec<f64>,
}

impl Runner {
    fn new(suite: &str) -> Self {
        Runner {
            report: VerificationReport::new(suite),
            runtimes_ms: Vec::new(),
        }
    }

    /// Runs one case; every check is prefixed with `id`.
    fn case(&mut self, id: &str, f: impl FnOnce() -> Result<Vec<Check>>) {
        let start = Instant::now();
        let checks = match f() {
            Ok(c) => c,
            Err(e) => vec![Check::failed("error", format!("{e:#}"))],
        };
        let ms = start.elapsed().as_secs_f64() * 1e3;
        for mut c in checks {
            c.name = format!("{id}/{}", c.name);
            self.report.push(c);
            self.runtimes_ms.push(ms);
        }
    }

    fn finish(self) -> SuiteOutcome {
        SuiteOutcome {
            report: self.report,
            runtimes_ms: self.runtimes_ms,
        }
    }
}

fn maps_or(cfg: &SuiteConfig, defaults: Vec<GallerySpec>) -> Vec<MapSource> {
    if cfg.maps.is_empty() {
        defaults.into_iter().map(MapSource::Gallery).collect()
    } else {
        cfg.maps.clone()
    }
}

fn diag123() -> GallerySpec {
    GallerySpec::Linear {
        matrix: vec![1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 3.0],
    }
}

/// `true` when `lhs >= floor`; the gap is the shortfall.
fn at_least(name: &str, lhs: f64, floor: f64) -> Check {
    let mut c = Check::at_most(name, floor, lhs, 0.0);
    c.lhs = lhs;
    c.rhs = floor;
    c
}

fn strictly_below(name: &str, lhs: f64, rhs: f64) -> Check {
    let mut c = Check::at_most(name, lhs, rhs, 0.0);
    c.pass = lhs < rhs;
    c
}

pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteOutcome> {
    cfg.validate()?;
    let outcome = match cfg.suite.as_str() {
        "degree-identity" => degree_identity_suite(cfg),
        "coarea" => coarea_suite(cfg),
        "bvl" => bvl_suite(cfg),
        "lemma61" => lemma61_suite(cfg),
        "adjugate" => adjugate_suite(cfg),
        "regularity" => regularity_suite(cfg),
        "stability" => stability_suite(cfg),
        "areas" => areas_suite(cfg),
        "axioms" => axioms_suite(cfg),
        "boundary-convergence" => boundary_convergence_suite(cfg),
        other => bail!("unknown suite '{other}'"),
    };
    Ok(outcome)
}

fn centre_of(g: &SampledMap<f64>) -> [f64; 2] {
    let grid = g.grid();
    let (a, b) = grid.extent(0);
    let (c, d) = grid.extent(1);
    [0.5 * (a + b), 0.5 * (c + d)]
}

fn degree_identity_suite(cfg: &SuiteConfig) -> SuiteOutcome {
    let mut run = Runner::new(&cfg.suite);
    let tol = cfg.tol_or(0.03);
    let maps = maps_or(cfg, (1..=3).map(|k| GallerySpec::Zpow { k }).collect());
    for (i, m) in maps.iter().enumerate() {
        run.case(&format!("map{i}"), || {
            let g = m.load(&cfg.shape_for(2, &[512, 512]))?;
            let disk = PlanarRegion::disk(centre_of(&g), cfg.radius).with_resolution(1024);
            let d = degree_identity(&g, &disk, cfg.raster, cfg.delta)?;
            let reference = m
                .gallery()
                .and_then(|s| oracle(s, Quantity::JacobianMassDisk { radius: cfg.radius }).ok());
            let scale = reference.unwrap_or(d.degree_side).abs().max(1e-300);
            let gap = (d.degree_side - d.jacobian_side).abs() / scale;
            let mut checks = vec![Check {
                name: "degree_vs_jacobian".into(),
                lhs: d.degree_side,
                rhs: d.jacobian_side,
                gap,
                tol,
                pass: gap <= tol,
                asserted: true,
                note: Some(m.label()),
            }];
            if let Some(r) = reference {
                checks.push(Check::relative("degree_vs_oracle", d.degree_side, r, tol));
                checks.push(Check::relative("jacobian_vs_oracle", d.jacobian_side, r, tol));
            }
            Ok(checks)
        });
    }
    run.report.meta("region", json!({"kind": "disk", "radius": cfg.radius}));
    run.finish()
}

fn random_field(rng: &mut ChaCha8Rng, dims: usize, m: usize) -> Result<SampledMap<f64>> {
    let shape: Vec<usize> = (0..dims).map(|_| rng.gen_range(2..=if dims == 3 { 12 } else { 40 })).collect();
    let spacing: Vec<f64> = (0..dims).map(|_| rng.gen_range(0.2..2.0)).collect();
    let origin: Vec<f64> = (0..dims).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let n: usize = shape.iter().product::<usize>() * m;
    // Half the fields use a few quantized levels so thresholds repeat.
    let quantized = rng.gen_bool(0.5);
    let values = (0..n)
        .map(|_| {
            if quantized {
                rng.gen_range(0..6) as f64 * 0.5
            } else {
                rng.gen_range(-3.0..3.0)
            }
        })
        .collect();
    Ok(SampledMap::new(Grid::new(shape, spacing, origin)?, m, values)?)
}

fn coarea_suite(cfg: &SuiteConfig) -> SuiteOutcome {
    let mut run = Runner::new(&cfg.suite);
    let tol = cfg.tol_or(1e-10);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for i in 0..cfg.cases.unwrap_or(100) {
        let field = random_field(&mut rng, 2, 1);
        run.case(&format!("field{i}"), || {
            let r = coarea_check(&field?, tol)?;
            Ok(r.checks.into_iter().filter(|c| c.asserted).collect())
        });
    }
    run.finish()
}

fn bvl_suite(cfg: &SuiteConfig) -> SuiteOutcome {
    let mut run = Runner::new(&cfg.suite);
    let tol = cfg.tol_or(1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for i in 0..cfg.cases.unwrap_or(50) {
        let dims = rng.gen_range(2..=3);
        let m = rng.gen_range(1..=3);
        let field = random_field(&mut rng, dims, m);
        run.case(&format!("field{i}"), || {
            let f = field?;
            (0..f.dim_in())
                .map(|a| {
                    Ok(Check::relative(
                        format!("axis{a}"),
                        slice_variation_integral(&f, a)?,
                        directional_variation(&f, a)?,
                        tol,
                    ))
                })
                .collect()
        });
    }
    run.finish()
}

/// Planar maps for the degree suites: gallery planar maps are sampled on
/// their domain, 3D maps contribute one coordinate pair of one slice.
fn planar_cases(cfg: &SuiteConfig, defaults: Vec<(GallerySpec, Option<(usize, f64, usize)>)>) -> Vec<(String, Result<SampledMap<f64>>)> {
    let list: Vec<(MapSource, Option<(usize, f64, usize)>)> = if cfg.maps.is_empty() {
        defaults.into_iter().map(|(s, sl)| (MapSource::Gallery(s), sl)).collect()
    } else {
        cfg.maps
            .iter()
            .map(|m| (m.clone(), (m.dim_in() == Some(3)).then_some((2, 0.5, 2))))
            .collect()
    };
    list.into_iter()
        .map(|(m, slice)| {
            let label = match slice {
                Some((k, t, j)) => format!("{} slice x{k}={t} drop {j}", m.label()),
                None => m.label(),
            };
            let map = match slice {
                None => m.load(&cfg.shape_for(2, &[257, 257])),
                Some((k, t, j)) => m
                    .load(&cfg.shape_for(3, &[49, 49, 49]))
                    .and_then(|f| Ok(coordinate_pair(&restrict_slice(&f, k, &t)?, j)?)),
            };
            (label, map)
        })
        .collect()
}

fn random_region(rng: &mut ChaCha8Rng, lo: [f64; 2], hi: [f64; 2]) -> PlanarRegion {
    let w = [hi[0] - lo[0], hi[1] - lo[1]];
    if rng.gen_bool(0.5) {
        let r = rng.gen_range(0.1..0.35) * w[0].min(w[1]);
        let c = [
            rng.gen_range(lo[0] + r * 1.05..hi[0] - r * 1.05),
            rng.gen_range(lo[1] + r * 1.05..hi[1] - r * 1.05),
        ];
        PlanarRegion::disk(c, r)
    } else {
        let s = [rng.gen_range(0.2..0.7) * w[0], rng.gen_range(0.2..0.7) * w[1]];
        let c = [
            rng.gen_range(lo[0] + 0.02 * w[0]..hi[0] - s[0] - 0.02 * w[0]),
            rng.gen_range(lo[1] + 0.02 * w[1]..hi[1] - s[1] - 0.02 * w[1]),
        ];
        PlanarRegion::rect(c, s)
    }
}

fn random_inside(rng: &mut ChaCha8Rng, region: &PlanarRegion) -> [f64; 2] {
    let (lo, hi) = region.bbox();
    loop {
        let x = [rng.gen_range(lo[0]..hi[0]), rng.gen_range(lo[1]..hi[1])];
        if region.contains(x) {
            return x;
        }
    }
}

fn lemma61_suite(cfg: &SuiteConfig) -> SuiteOutcome {
    let mut run = Runner::new(&cfg.suite);
    let cases = cfg.cases.unwrap_or(200);
    let defaults = vec![
        (GallerySpec::Zpow { k: 1 }, None),
        (GallerySpec::Zpow { k: -1 }, None),
        (GallerySpec::Zpow { k: 2 }, None),
        (GallerySpec::Shear2d { amount: 0.2 }, None),
        (GallerySpec::RadialStretch { power: 2.0 }, None),
        (GallerySpec::Linear { matrix: vec![2.0, 1.0, 0.5, 1.5] }, None),
        (GallerySpec::CantorShear3d { level: 4 }, Some((1, 0.37, 1))),
        (GallerySpec::CantorShear3d { level: 4 }, Some((2, 0.61, 2))),
        (GallerySpec::Identity3d, Some((0, 0.5, 0))),
        (diag123(), Some((1, 0.29, 1))),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for (mi, (label, map)) in planar_cases(cfg, defaults).into_iter().enumerate() {
        let mut local = ChaCha8Rng::seed_from_u64(rng.gen::<u64>());
        run.case(&format!("map{mi}"), || {
            let g = map?;
            let (lo, hi) = g.domain().expect("sampled maps have a domain");
            let (mut violations, mut checked, mut unstable, mut max_deg) = (0i64, 0usize, 0usize, 0i64);
            for _ in 0..cases {
                let region = random_region(&mut local, lo, hi);
                let x = random_inside(&mut local, &region);
                let gx = g.eval(x);
                let bi = boundary_image(&g, &region)?;
                let jitter = 0.02 * bi.diameter;
                let y = [gx[0] + local.gen_range(-jitter..jitter), gx[1] + local.gen_range(-jitter..jitter)];
                let deg = match bi.degree(y) {
                    Ok(d) => d,
                    Err(_) => {
                        unstable += 1;
                        continue;
                    }
                };
                let n = preimage_count(&g, &region, y, cfg.search_resolution)? as i64;
                checked += 1;
                max_deg = max_deg.max(deg.abs());
                if deg.abs() > n {
                    violations += 1;
                }
            }
            Ok(vec![
                Check::integer("violations", violations, 0).with_note(label),
                Check::integer("checked", checked as i64, cases as i64)
                    .informational()
                    .with_note(format!("{unstable} points within the stability margin, max |deg| {max_deg}")),
            ])
        });
    }
    run.report.meta("search_resolution", cfg.search_resolution);
    run.finish()
}

fn adjugate_config(cfg: &SuiteConfig) -> AdjugateConfig {
    AdjugateConfig {
        n_slices: cfg.slices,
        survey: SurveyConfig {
            max_depth: cfg.depth,
            raster: cfg.survey_raster,
            edge_subdivisions: 2,
        },
        seed: cfg.seed,
        ..AdjugateConfig::default()
    }
}

fn default_grid3(spec: Option<&GallerySpec>) -> Vec<usize> {
    match spec {
        Some(GallerySpec::CantorShear3d { .. }) => vec![193, 97, 97],
        _ => vec![49, 49, 49],
    }
}

fn entry_checks(prefix: &str, got: [[f64; 3]; 3], want: [[f64; 3]; 3], tol: f64, off_tol: f64) -> Vec<Check> {
    let mut out = Vec::new();
    for k in 0..3 {
        for j in 0..3 {
            let name = format!("{prefix}[{k}][{j}]");
            out.push(if want[k][j] == 0.0 {
                Check::absolute(name, got[k][j], 0.0, off_tol)
            } else {
                Check::relative(name, got[k][j], want[k][j], tol)
            });
        }
    }
    out
}

fn adjugate_suite(cfg: &SuiteConfig) -> SuiteOutcome {
    let mut run = Runner::new(&cfg.suite);
    let tol = cfg.tol_or(0.03);
    let maps = maps_or(cfg, vec![GallerySpec::CantorShear3d { level: 6 }]);
    let mut results = Vec::new();
    for (i, m) in maps.iter().enumerate() {
        run.case(&format!("map{i}"), || {
            let f = m.load(&cfg.shape_for(3, &default_grid3(m.gallery())))?;
            let t = distributional_adjugate(&f, &adjugate_config(cfg))?;
            let got = t.integrated();
            results.push(json!({
                "map": m,
                "adj": {"entries": got, "total": t.total, "slice_ts": t.slice_ts},
                "skipped": t.skipped,
            }));
            let mut checks = Vec::new();
            match m.gallery().and_then(|s| oracle_adj_entries(s).ok()) {
                Some(want) => {
                    checks.extend(entry_checks("entry", got, want, tol, 0.02));
                    checks.push(Check::relative("total", t.total, want.iter().flatten().sum::<f64>(), tol));
                }
                None => checks.push(Check::relative("total", t.total, t.total, tol).informational()),
            }
            checks.push(Check::integer("skipped_slices", t.skipped.len() as i64, 0).informational());
            Ok(checks)
        });
    }
    run.report.meta("results", results);
    run.finish()
}

fn regularity_suite(cfg: &SuiteConfig) -> SuiteOutcome {
    let mut run = Runner::new(&cfg.suite);
    let tol = cfg.tol_or(0.03);
    let maps = maps_or(
        cfg,
        vec![GallerySpec::Identity3d, diag123(), GallerySpec::CantorShear3d { level: 6 }],
    );
    let mut results = Vec::new();
    for (i, m) in maps.iter().enumerate() {
        run.case(&format!("map{i}"), || {
            let f = m.load(&cfg.shape_for(3, &default_grid3(m.gallery())))?;
            let analytic = m.gallery().map(|s| s.evaluator()).transpose()?;
            let vc = VerdictConfig {
                adjugate: adjugate_config(cfg),
                ..VerdictConfig::default()
            };
            let v = regularity_verdict(&f, analytic.as_ref(), &vc)?;
            let mut checks = vec![Check::relative("inverse_tv_vs_mu", v.inverse_tv.total, v.mu.total, 0.05)];
            checks.push(
                Check::relative("adj_vs_inverse_tv", v.adj.total, v.inverse_tv.total, tol)
                    .informational()
                    .with_note("equality is not asserted"),
            );
            if let Some(spec) = m.gallery() {
                if let Ok(w) = oracle_inverse_tv(spec) {
                    checks.push(Check::relative("inverse_tv", v.inverse_tv.total, w.iter().sum::<f64>(), 0.04));
                }
                if let Ok(w) = oracle_mu_axes(spec) {
                    checks.push(Check::relative("mu", v.mu.total, w.iter().sum::<f64>(), 0.04));
                }
                if let Ok(w) = oracle(spec, Quantity::AdjTotalVariation) {
                    checks.push(Check::relative("adj", v.adj.total, w, tol));
                }
                if spec.is_smooth() {
                    let p = v.pointwise_adj.unwrap_or(v.sampled_adj);
                    checks.push(Check::relative("inverse_tv_vs_pointwise_adj", v.inverse_tv.total, p, tol));
                    checks.push(Check::relative("adj_vs_pointwise_adj", v.adj.total, p, tol));
                } else if let Some(p) = v.pointwise_adj {
                    if let Ok(w) = oracle(spec, Quantity::PointwiseAdjTotal) {
                        checks.push(Check::relative("pointwise_adj", p, w, tol));
                    }
                    checks.push(
                        at_least("singular_gap", v.adj.total - p, 1.9)
                            .with_note("distributional total exceeds the pointwise adjugate"),
                    );
                    checks.push(
                        Check::relative("sampled_adj", v.sampled_adj, v.adj.total, tol)
                            .informational()
                            .with_note("finite differences of the samples see the singular part"),
                    );
                }
            }
            checks.push(
                Check::absolute("pushforward_top_fraction", *v.pushforward.fractions.last().unwrap_or(&0.0), 0.0, 1.0)
                    .informational()
                    .with_note("heuristic concentration statistic"),
            );
            results.push(json!({
                "map": m,
                "adj": {"entries": v.adj.integrated(), "total": v.adj.total},
                "mu": v.mu,
                "inverse_tv": v.inverse_tv,
                "pointwise_adj": v.pointwise_adj,
                "pointwise_skipped": v.pointwise_skipped,
                "sampled_adj": v.sampled_adj,
                "pushforward": v.pushforward,
                "gaps": v.consistency_gaps,
                "inversion": v.inversion,
                "adj_finite": v.adj_finite,
                "slice_areas_finite": v.slice_areas_finite,
                "skipped": v.adj.skipped,
            }));
            Ok(checks)
        });
    }
    run.report.meta("results", results);
    run.finish()
}

fn stability_suite(cfg: &SuiteConfig) -> SuiteOutcome {
    let mut run = Runner::new(&cfg.suite);
    let tol = cfg.tol_or(0.04);
    let (specs, limit): (Vec<GallerySpec>, f64) = if cfg.sequence == "linear" {
        let n = cfg.cases.unwrap_or(6);
        let specs = (1..=n)
            .map(|j| {
                let a = 1.0 + 0.5f64.powi(j as i32 + 4);
                GallerySpec::Linear {
                    matrix: vec![a, 0.0, 0.0, 0.0, a, 0.0, 0.0, 0.0, a],
                }
            })
            .collect();
        // Scalings of the identity converging to it.
        (specs, 3.0)
    } else {
        (cfg.levels.iter().map(|&level| GallerySpec::CantorShear3d { level }).collect(), 5.0)
    };
    let shape = cfg.shape_for(3, &default_grid3(specs.first()));
    let mut totals = Value::Null;
    run.case("sequence", || {
        let r = weak_convergence_stability(&specs, &shape, &adjugate_config(cfg), Some(limit), tol)?;
        totals = r.metadata.get("totals").cloned().unwrap_or(Value::Null);
        Ok(r.checks)
    });
    run.report.meta("totals", totals).meta("maps", &specs);
    run.finish()
}

fn surface(shape: usize, f: impl Fn(f64, f64) -> [f64; 3]) -> Result<SampledMap<f64>> {
    let g = Grid::spanning(&[shape, shape], &[0.0, 0.0], &[1.0, 1.0])?;
    Ok(SampledMap::from_fn(g, 3, |x, o| o.copy_from_slice(&f(x[0], x[1])))?)
}

/// Area of the graph of `(x^2 + y^2) / 2` over the unit square by a
/// tensor Gauss-Legendre rule.
fn paraboloid_area() -> f64 {
    let gl = [
        (-0.906_179_845_938_664, 0.236_926_885_056_189),
        (-0.538_469_310_105_683, 0.478_628_670_499_366),
        (0.0, 0.568_888_888_888_889),
        (0.538_469_310_105_683, 0.478_628_670_499_366),
        (0.906_179_845_938_664, 0.236_926_885_056_189),
    ];
    let n = 64;
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            for (u, wu) in gl {
                for (v, wv) in gl {
                    let x = (i as f64 + 0.5 + 0.5 * u) / n as f64;
                    let y = (j as f64 + 0.5 + 0.5 * v) / n as f64;
                    acc += wu * wv * (1.0 + x * x + y * y).sqrt();
                }
            }
        }
    }
    acc / (4.0 * (n * n) as f64)
}

fn areas_suite(cfg: &SuiteConfig) -> SuiteOutcome {
    let mut run = Runner::new(&cfg.suite);
    let tol = cfg.tol_or(0.02);
    let n = cfg.grid.as_ref().map(|g| g[0]).unwrap_or(65);
    let survey = SurveyConfig {
        max_depth: cfg.depth,
        raster: cfg.survey_raster,
        edge_subdivisions: 4,
    };
    let dy = DyadicGrid::for_rect([0.0, 0.0], [1.0, 1.0]);
    let bounds = |f: &SampledMap<f64>| lebesgue_area_bounds(f, [0.0, 0.0], [1.0, 1.0], &dy, &survey);
    run.case("flat", || {
        let b = bounds(&surface(n, |x, y| [x, y, 0.3])?)?;
        Ok(vec![Check::relative("lower", b.lower, 1.0, tol), Check::relative("upper", b.upper, 1.0, tol)])
    });
    run.case("tilted", || {
        let b = bounds(&surface(n, |x, y| [x, y, x])?)?;
        let area = 2f64.sqrt();
        Ok(vec![
            Check::relative("lower", b.lower, 1.0, tol),
            Check::relative("upper", b.upper, 2.0, tol),
            Check::at_most("lower_le_area", b.lower, area, 0.0),
            Check::at_most("area_le_upper", area, b.upper, 0.0),
        ])
    });
    run.case("paraboloid", || {
        let b = bounds(&surface(n, |x, y| [x, y, 0.5 * (x * x + y * y)])?)?;
        let area = paraboloid_area();
        Ok(vec![
            Check::at_most("lower_le_area", b.lower, area, tol * area),
            Check::at_most("area_le_upper", area, b.upper, tol * area),
        ])
    });
    run.case("cantor_graph", || {
        let h = CantorStaircase::new(6)?;
        let b = bounds(&surface(n.max(244), |x, y| [h.eval(x), y, 0.5])?)?;
        Ok(vec![Check::relative("lower", b.lower, 2.0, tol), Check::relative("upper", b.upper, 2.0, tol)])
    });
    run.finish()
}

fn axioms_suite(cfg: &SuiteConfig) -> SuiteOutcome {
    let mut run = Runner::new(&cfg.suite);
    let cases = cfg.cases.unwrap_or(50);
    let defaults = vec![
        (GallerySpec::Zpow { k: 1 }, None),
        (GallerySpec::Zpow { k: 2 }, None),
        (GallerySpec::Zpow { k: 3 }, None),
        (GallerySpec::Shear2d { amount: 0.2 }, None),
        (GallerySpec::RadialStretch { power: 2.0 }, None),
        (GallerySpec::Linear { matrix: vec![2.0, 1.0, 0.5, 1.5] }, None),
        (GallerySpec::CantorShear3d { level: 4 }, Some((1, 0.37, 1))),
    ];
    let res = 128;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for (mi, (label, map)) in planar_cases(cfg, defaults).into_iter().enumerate() {
        let mut local = ChaCha8Rng::seed_from_u64(rng.gen::<u64>());
        run.case(&format!("map{mi}"), || {
            let g = map?;
            let (lo, hi) = g.domain().expect("sampled maps have a domain");
            let (mut violations, mut applicable, mut attempts) = (0i64, 0usize, 0usize);
            let mut done = 0;
            while done < cases {
                attempts += 1;
                if attempts > 20 * cases {
                    break;
                }
                let region = random_region(&mut local, lo, hi).with_resolution(256);
                let excision = done % 2 == 1;
                let pieces = if excision {
                    // A sub-disk around a preimage of y.
                    let (blo, bhi) = region.bbox();
                    let r = 0.2 * (bhi[0] - blo[0]).min(bhi[1] - blo[1]);
                    let x = random_inside(&mut local, &region);
                    let sub = PlanarRegion::disk(x, r).with_resolution(256);
                    if !(0..64).all(|i| {
                        let t = std::f64::consts::TAU * i as f64 / 64.0;
                        region.contains([x[0] + r * t.cos(), x[1] + r * t.sin()])
                    }) {
                        continue;
                    }
                    vec![sub]
                } else if matches!(region.kind, RegionKind::Rect { .. }) {
                    random_guillotine(&region, local.gen_range(2..=6), &mut local)?
                } else {
                    random_sectors(&region, local.gen_range(2..=6), &mut local)?
                };
                let anchor = if excision {
                    match &pieces[0].kind {
                        RegionKind::Disk { center, .. } => *center,
                        _ => unreachable!("excision pieces are disks"),
                    }
                } else {
                    random_inside(&mut local, &region)
                };
                let y = g.eval(anchor);
                match check_degree_axioms(&g, &region, &pieces, y, res) {
                    Ok(r) => {
                        done += 1;
                        for c in r.checks.iter().filter(|c| c.asserted) {
                            applicable += 1;
                            if !c.pass {
                                violations += 1;
                            }
                        }
                    }
                    // y too close to some boundary image; draw again.
                    Err(e) if matches!(
                        e.root(),
                        bvdeg_core::Error::UnstableDegree { .. } | bvdeg_core::Error::OnBoundary { .. }
                    ) => {}
                    Err(e) => return Err(e.into()),
                }
            }
            Ok(vec![
                Check::integer("violations", violations, 0).with_note(label),
                Check::integer("cases", done as i64, cases as i64),
                Check::integer("applicable", applicable as i64, done as i64).informational(),
            ])
        });
    }
    run.finish()
}

fn boundary_convergence_suite(cfg: &SuiteConfig) -> SuiteOutcome {
    let mut run = Runner::new(&cfg.suite);
    let tol = cfg.tol_or(0.05);
    let n = cfg.grid.as_ref().map(|g| g[0]).unwrap_or(257);
    let level = cfg.levels.last().copied().unwrap_or(6).min(8);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let map = (|| -> Result<SampledMap<f64>> {
        let h = CantorStaircase::new(level)?;
        let g = Grid::spanning(&[n, n], &[0.0, 0.0], &[1.0, 1.0])?;
        Ok(SampledMap::from_fn(g, 2, |x, o| {
            o[0] = h.eval(x[0]);
            o[1] = x[1];
        })?)
    })();
    let eps = [0.08, 0.04, 0.02, 0.01];
    for i in 0..cfg.cases.unwrap_or(10) {
        let c = [rng.gen_range(0.35..0.65), rng.gen_range(0.35..0.65)];
        let r = rng.gen_range(0.1..0.25);
        run.case(&format!("circle{i}"), || {
            let f = map.as_ref().map_err(|e| anyhow::anyhow!("{e:#}"))?;
            let bc = mollified_boundary_convergence(f, c, r, &eps, 1024, 128)?;
            let (first, last) = (bc.gaps[0], *bc.gaps.last().expect("non-empty"));
            Ok(vec![
                Check::at_most("final_gap", last, tol, 0.0)
                    .with_note(format!("centre {c:?} radius {r}")),
                strictly_below("final_below_first", last, first),
            ])
        });
    }
    run.report.meta("epsilons", eps).meta("level", level);
    run.finish()
}
