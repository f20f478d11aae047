//! Mean-shift segmentation (joint spatial/range filtering in L*u*v*, region fusion, minimum-size
//! pruning) and most-common-color sky marking.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use crate::color::{luv_to_rgb, rgb_to_luv};
use crate::error::{Error, Result};
use crate::raster::{Raster, Rgb, SkyMask};

pub const CONVERGENCE_TOLERANCE: f64 = 0.01;
pub const MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanShiftParams {
    /// Spatial window radius in pixels.
    pub spatial_radius: u32,
    /// Color window radius in L*u*v* units.
    pub range_radius: f64,
    /// Smallest region kept after pruning, in pixels.
    pub min_density: usize,
}

impl MeanShiftParams {
    pub fn new(spatial_radius: u32, range_radius: f64, min_density: usize) -> Result<Self> {
        if spatial_radius < 1 || !(range_radius > 0.0) || min_density < 1 {
            return Err(Error::InvalidInput(format!(
                "mean-shift parameters out of range: h_s={spatial_radius}, h_r={range_radius}, M={min_density}"
            )));
        }
        Ok(Self {
            spatial_radius,
            range_radius,
            min_density,
        })
    }
}

/// Converged mode color for every pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredImage {
    pub width: usize,
    pub height: usize,
    pub modes: Vec<[f64; 3]>,
}

pub fn meanshift_filter(img: &Raster, p: &MeanShiftParams) -> FilteredImage {
    let luv: Vec<[f64; 3]> = img.pixels().iter().map(|&c| rgb_to_luv(c)).collect();
    filter_luv(img.width(), img.height(), &luv, p)
}

/// Flat-kernel joint-domain mean shift started from every pixel of a L*u*v* field.
pub fn filter_luv(width: usize, height: usize, luv: &[[f64; 3]], p: &MeanShiftParams) -> FilteredImage {
    let hs = p.spatial_radius as f64;
    let hs2 = hs * hs;
    let hr2 = p.range_radius * p.range_radius;
    let r = p.spatial_radius as isize;
    let mut modes = Vec::with_capacity(width * height);
    for y0 in 0..height {
        for x0 in 0..width {
            let (mut x, mut y) = (x0 as f64, y0 as f64);
            let mut c = luv[y0 * width + x0];
            for _ in 0..MAX_ITERATIONS {
                let cx = x.round() as isize;
                let cy = y.round() as isize;
                let (mut sx, mut sy, mut sc, mut n) = (0.0, 0.0, [0.0f64; 3], 0usize);
                for yy in (cy - r).max(0)..=(cy + r).min(height as isize - 1) {
                    let dy = yy as f64 - y;
                    let row = yy as usize * width;
                    for xx in (cx - r).max(0)..=(cx + r).min(width as isize - 1) {
                        let dx = xx as f64 - x;
                        if dx * dx + dy * dy > hs2 {
                            continue;
                        }
                        let q = luv[row + xx as usize];
                        let dc = (q[0] - c[0]).powi(2) + (q[1] - c[1]).powi(2) + (q[2] - c[2]).powi(2);
                        if dc > hr2 {
                            continue;
                        }
                        sx += xx as f64;
                        sy += yy as f64;
                        sc[0] += q[0];
                        sc[1] += q[1];
                        sc[2] += q[2];
                        n += 1;
                    }
                }
                if n == 0 {
                    break;
                }
                let inv = 1.0 / n as f64;
                let (nx, ny) = (sx * inv, sy * inv);
                let nc = sc.map(|v| v * inv);
                let shift2 = (nx - x).powi(2)
                    + (ny - y).powi(2)
                    + (nc[0] - c[0]).powi(2)
                    + (nc[1] - c[1]).powi(2)
                    + (nc[2] - c[2]).powi(2);
                x = nx;
                y = ny;
                c = nc;
                if shift2 < CONVERGENCE_TOLERANCE * CONVERGENCE_TOLERANCE {
                    break;
                }
            }
            modes.push(c);
        }
    }
    FilteredImage {
        width,
        height,
        modes,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedImage {
    pub width: usize,
    pub height: usize,
    /// Region id per pixel, ids numbered in raster order of first appearance.
    pub labels: Vec<usize>,
    /// Mean mode color per region (L*u*v*).
    pub region_colors: Vec<[f64; 3]>,
    pub region_rgb: Vec<Rgb>,
    pub region_sizes: Vec<usize>,
}

impl SegmentedImage {
    pub fn region_count(&self) -> usize {
        self.region_sizes.len()
    }

    /// Each pixel painted with its region's color.
    pub fn to_raster(&self) -> Raster {
        Raster::new(
            self.width,
            self.height,
            self.labels.iter().map(|&l| self.region_rgb[l]).collect(),
        )
        .expect("segmentation is non-empty")
    }
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller root wins, which keeps the result independent of visit order
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

/// Forward half of the 8-neighborhood, so every adjacent pair is visited once.
const FORWARD: [(isize, isize); 4] = [(1, 0), (-1, 1), (0, 1), (1, 1)];

fn forward_pairs(width: usize, height: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..height).flat_map(move |y| {
        (0..width).flat_map(move |x| {
            FORWARD.iter().filter_map(move |&(dx, dy)| {
                let nx = x as isize + dx;
                let ny = y as isize + dy;
                (nx >= 0 && nx < width as isize && ny < height as isize)
                    .then(|| (y * width + x, ny as usize * width + nx as usize))
            })
        })
    })
}

/// 8-connected fusion of pixels whose modes are closer than the range radius, then iterative
/// merging of undersized regions (smallest first) into the adjacent region of closest mean color.
pub fn fuse_and_prune(filtered: &FilteredImage, p: &MeanShiftParams) -> SegmentedImage {
    let (w, h) = (filtered.width, filtered.height);
    let n = w * h;
    let hr2 = p.range_radius * p.range_radius;

    let mut ds = DisjointSet::new(n);
    for (a, b) in forward_pairs(w, h) {
        if dist2(&filtered.modes[a], &filtered.modes[b]) < hr2 {
            ds.union(a, b);
        }
    }
    let mut root_to_region: HashMap<usize, usize> = HashMap::new();
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let root = ds.find(i);
        let next = root_to_region.len();
        labels.push(*root_to_region.entry(root).or_insert(next));
    }
    let regions = root_to_region.len();

    let mut sizes = vec![0usize; regions];
    let mut sums = vec![[0.0f64; 3]; regions];
    for (i, &l) in labels.iter().enumerate() {
        sizes[l] += 1;
        for c in 0..3 {
            sums[l][c] += filtered.modes[i][c];
        }
    }
    let mut adjacency = vec![BTreeSet::new(); regions];
    for (a, b) in forward_pairs(w, h) {
        let (la, lb) = (labels[a], labels[b]);
        if la != lb {
            adjacency[la].insert(lb);
            adjacency[lb].insert(la);
        }
    }

    let mean = |sums: &[[f64; 3]], sizes: &[usize], r: usize| sums[r].map(|v| v / sizes[r] as f64);
    let mut merged_into: Vec<usize> = (0..regions).collect();
    let mut alive = regions;
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> = (0..regions)
        .filter(|&r| sizes[r] < p.min_density)
        .map(|r| Reverse((sizes[r], r)))
        .collect();
    while let Some(Reverse((size, r))) = heap.pop() {
        if alive <= 1 {
            break;
        }
        if merged_into[r] != r || sizes[r] != size || size >= p.min_density {
            continue;
        }
        let color = mean(&sums, &sizes, r);
        let Some(target) = adjacency[r]
            .iter()
            .copied()
            .map(|q| (dist2(&color, &mean(&sums, &sizes, q)), q))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, q)| q)
        else {
            continue;
        };
        merged_into[r] = target;
        alive -= 1;
        sizes[target] += sizes[r];
        for c in 0..3 {
            sums[target][c] += sums[r][c];
        }
        let neighbors = std::mem::take(&mut adjacency[r]);
        for q in neighbors {
            adjacency[q].remove(&r);
            if q != target {
                adjacency[q].insert(target);
                adjacency[target].insert(q);
            }
        }
        if sizes[target] < p.min_density {
            heap.push(Reverse((sizes[target], target)));
        }
    }

    let resolve = |mut r: usize| {
        while merged_into[r] != r {
            r = merged_into[r];
        }
        r
    };
    let mut compact: HashMap<usize, usize> = HashMap::new();
    let mut final_labels = Vec::with_capacity(n);
    for &l in &labels {
        let root = resolve(l);
        let next = compact.len();
        final_labels.push(*compact.entry(root).or_insert(next));
    }
    let k = compact.len();
    let mut region_sizes = vec![0usize; k];
    let mut color_sums = vec![[0.0f64; 3]; k];
    for (i, &l) in final_labels.iter().enumerate() {
        region_sizes[l] += 1;
        for c in 0..3 {
            color_sums[l][c] += filtered.modes[i][c];
        }
    }
    let region_colors: Vec<[f64; 3]> = color_sums
        .iter()
        .zip(&region_sizes)
        .map(|(s, &n)| s.map(|v| v / n as f64))
        .collect();
    let region_rgb = region_colors.iter().map(|&c| luv_to_rgb(c)).collect();
    SegmentedImage {
        width: w,
        height: h,
        labels: final_labels,
        region_colors,
        region_rgb,
        region_sizes,
    }
}

/// Marks every pixel carrying the color that covers the most pixels in the top half of the image.
///
/// Regions are bucketed by their 8-bit color. Ties go to the color whose pixels sit higher on
/// average, then to the lexicographically smaller color.
pub fn mark_sky_most_common(seg: &SegmentedImage) -> SkyMask {
    let (w, h) = (seg.width, seg.height);
    let top_rows = h / 2;
    // color -> (top-half count, row sum, total count)
    let mut buckets: HashMap<Rgb, (usize, usize, usize)> = HashMap::new();
    for (i, &l) in seg.labels.iter().enumerate() {
        let row = i / w;
        let e = buckets.entry(seg.region_rgb[l]).or_default();
        if row < top_rows {
            e.0 += 1;
        }
        e.1 += row;
        e.2 += 1;
    }
    let winner = buckets
        .iter()
        .max_by(|(ca, a), (cb, b)| {
            a.0.cmp(&b.0)
                // higher mean row loses: compare b's mean against a's
                .then_with(|| (b.1 as f64 / b.2 as f64).total_cmp(&(a.1 as f64 / a.2 as f64)))
                .then_with(|| cb.cmp(ca))
        })
        .map(|(c, _)| *c)
        .expect("segmentation is non-empty");
    SkyMask::new(
        w,
        h,
        seg.labels.iter().map(|&l| seg.region_rgb[l] == winner).collect(),
    )
    .expect("labels cover the image")
}

pub fn meanshift_segment(img: &Raster, p: &MeanShiftParams) -> SegmentedImage {
    fuse_and_prune(&meanshift_filter(img, p), p)
}

pub fn meanshift_mask(img: &Raster, p: &MeanShiftParams) -> SkyMask {
    mark_sky_most_common(&meanshift_segment(img, p))
}
