use bvdeg_core::degree::{topological_degree, PlanarRegion};
use bvdeg_core::gallery::{make_map, GallerySpec};
use bvdeg_core::variation::anisotropic_tv;

fn main() -> bvdeg_core::Result<()> {
    // z -> z^2 / |z| on [-1, 1]^2, sampled on a 257 x 257 grid.
    let g = make_map(&GallerySpec::Zpow { k: 2 }, &[257, 257])?;
    let disk = PlanarRegion::disk([0.0, 0.0], 0.8);
    assert_eq!(topological_degree(&g, &disk, [0.1, 0.2])?, 2);
    println!("TV = {}", anisotropic_tv(&g)?);
    Ok(())
}
