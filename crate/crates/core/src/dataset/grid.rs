use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::{DatasetError, SourcePlacement, Split};
use crate::rng::{self, tags};
use crate::scene::{Point3, Scene, Vec3};

/// Grid points closer than this to a room boundary are dropped, meters.
pub const WALL_CLEARANCE: f64 = 0.05;

/// Positions closer than this count as the same source, meters.
pub const COINCIDENCE: f64 = 1e-3;

/// The single region containing `p` at least [`WALL_CLEARANCE`] away from
/// its horizontal boundaries.
fn interior_region(scene: &Scene, p: Point3) -> Option<&str> {
    scene
        .regions()
        .iter()
        .find(|r| {
            p.x >= r.min.x + WALL_CLEARANCE
                && p.x <= r.max.x - WALL_CLEARANCE
                && p.z >= r.min.z + WALL_CLEARANCE
                && p.z <= r.max.z - WALL_CLEARANCE
                && p.y > r.min.y
                && p.y < r.max.y
        })
        .map(|r| r.name.as_str())
}

/// Lattice nodes along one axis, centered over `[lo, hi]`.
fn axis(lo: f64, hi: f64, spacing: f64) -> Vec<f64> {
    let n = ((hi - lo) / spacing + 1e-9).floor() as usize + 1;
    let start = lo + (hi - lo - (n - 1) as f64 * spacing) / 2.0;
    (0..n).map(|i| start + i as f64 * spacing).collect()
}

/// Square lattice over the floor at `height`, keeping the nodes that fall
/// inside a room. Before filtering there are `floor(extent / spacing) + 1`
/// nodes per horizontal axis.
pub fn coordinate_grid(scene: &Scene, spacing: f64, height: f64) -> Result<Vec<SourcePlacement>, DatasetError> {
    let b = scene.bounding_box();
    let ext = b.extent();
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(DatasetError::Invalid(format!("spacing {spacing} must be positive")));
    }
    if spacing > ext.x || spacing > ext.z {
        return Err(DatasetError::Invalid(format!(
            "spacing {spacing} m exceeds the floor extent {:.2} x {:.2} m",
            ext.x, ext.z
        )));
    }
    if !(height > b.min.y && height < b.max.y) {
        return Err(DatasetError::Invalid(format!("height {height} m is outside the scene")));
    }
    let xs = axis(b.min.x, b.max.x, spacing);
    let zs = axis(b.min.z, b.max.z, spacing);
    let mut out = Vec::new();
    for &z in &zs {
        for &x in &xs {
            let p = Vec3::new(x, height, z);
            if let Some(region) = interior_region(scene, p) {
                out.push(SourcePlacement { position: p, region: Some(region.to_string()), split: Split::Train });
            }
        }
    }
    Ok(out)
}

/// Node count of [`coordinate_grid`] before the room filter.
pub fn coordinate_grid_size(scene: &Scene, spacing: f64) -> usize {
    let ext = scene.bounding_box().extent();
    ((ext.x / spacing + 1e-9).floor() as usize + 1) * ((ext.z / spacing + 1e-9).floor() as usize + 1)
}

/// `rows x cols` cell centers inside every region's bounds scaled by
/// `shrink` about its centroid. Rows run along z, columns along x.
pub fn region_grid(
    scene: &Scene,
    rows: usize,
    cols: usize,
    height: f64,
    shrink: f64,
) -> Result<Vec<SourcePlacement>, DatasetError> {
    if rows == 0 || cols == 0 {
        return Err(DatasetError::Invalid("grid needs at least 1x1 points".into()));
    }
    if !(shrink > 0.0 && shrink <= 1.0) {
        return Err(DatasetError::Invalid(format!("shrink {shrink} must be in (0, 1]")));
    }
    if scene.regions().is_empty() {
        return Err(DatasetError::Invalid("scene has no regions".into()));
    }
    let mut out = Vec::with_capacity(scene.regions().len() * rows * cols);
    for region in scene.regions() {
        let b = region.shrunk(shrink);
        let ext = b.extent();
        let (dx, dz) = (ext.x / cols as f64, ext.z / rows as f64);
        if dx < 2.0 * COINCIDENCE || dz < 2.0 * COINCIDENCE || !(height > b.min.y && height < b.max.y) {
            return Err(DatasetError::Invalid(format!(
                "region `{}` is too small for a {rows}x{cols} grid at height {height} m after shrinking by {shrink}",
                region.name
            )));
        }
        for i in 0..rows {
            for j in 0..cols {
                let p = Vec3::new(b.min.x + (j as f64 + 0.5) * dx, height, b.min.z + (i as f64 + 0.5) * dz);
                out.push(SourcePlacement { position: p, region: Some(region.name.clone()), split: Split::Train });
            }
        }
    }
    Ok(out)
}

/// Smallest positive gap between distinct sorted coordinates.
fn step(mut v: Vec<f64>) -> Option<f64> {
    v.sort_by(f64::total_cmp);
    v.windows(2).map(|w| w[1] - w[0]).filter(|d| *d > COINCIDENCE).min_by(f64::total_cmp)
}

/// Test positions offset from the nodes of `base` by half the lattice
/// spacing in x and z (the cell corners), at least [`COINCIDENCE`] away from
/// every base position.
///
/// Every region gets one position first, the rest are drawn without
/// replacement from `seed`. Labels come from [`Scene::region_of`].
pub fn offset_test_grid(
    scene: &Scene,
    base: &[SourcePlacement],
    count: usize,
    seed: u64,
) -> Result<Vec<SourcePlacement>, DatasetError> {
    let regions: Vec<&str> = scene.regions().iter().map(|r| r.name.as_str()).collect();
    if count < regions.len() {
        return Err(DatasetError::Coverage(format!(
            "{count} test points cannot cover {} regions",
            regions.len()
        )));
    }

    // Spacing is measured within each label group so per-region grids with
    // different cell sizes are handled.
    let mut groups: BTreeMap<Option<&str>, Vec<Point3>> = BTreeMap::new();
    for p in base {
        groups.entry(p.region.as_deref()).or_default().push(p.position);
    }
    let mut candidates: Vec<Point3> = Vec::new();
    for points in groups.values() {
        let hx = step(points.iter().map(|p| p.x).collect()).map_or(0.0, |s| s / 2.0);
        let hz = step(points.iter().map(|p| p.z).collect()).map_or(0.0, |s| s / 2.0);
        for p in points {
            for (sx, sz) in [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)] {
                candidates.push(Vec3::new(p.x + sx * hx, p.y, p.z + sz * hz));
            }
        }
    }
    candidates.sort_by(|a, b| a.z.total_cmp(&b.z).then(a.x.total_cmp(&b.x)).then(a.y.total_cmp(&b.y)));
    candidates.dedup_by(|a, b| a.distance(*b) < COINCIDENCE);
    let mut by_region: Vec<Vec<Point3>> = vec![Vec::new(); regions.len()];
    for c in candidates {
        if base.iter().any(|b| b.position.distance(c) < COINCIDENCE) {
            continue;
        }
        if let Some(name) = interior_region(scene, c) {
            let idx = regions.iter().position(|r| *r == name).expect("region from scene");
            by_region[idx].push(c);
        }
    }
    let available: usize = by_region.iter().map(Vec::len).sum();
    if let Some(i) = by_region.iter().position(Vec::is_empty) {
        return Err(DatasetError::Coverage(format!("no offset position falls inside region `{}`", regions[i])));
    }
    if count > available {
        return Err(DatasetError::Invalid(format!("requested {count} test points, only {available} offset positions exist")));
    }

    let mut rng = rng::stream(rng::derive_seed(seed, tags::TEST_GRID), 0);
    let mut chosen = Vec::with_capacity(count);
    let mut rest = Vec::new();
    for list in &mut by_region {
        list.shuffle(&mut rng);
        chosen.push(list[0]);
        rest.extend_from_slice(&list[1..]);
    }
    rest.shuffle(&mut rng);
    chosen.extend(rest.into_iter().take(count - regions.len()));

    chosen
        .into_iter()
        .map(|p| {
            let region = scene.region_of(p)?.map(str::to_string);
            Ok(SourcePlacement { position: p, region, split: Split::Test })
        })
        .collect()
}
