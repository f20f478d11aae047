//! Benchmark sky marker: rescale to 512x512, Sobel edge mask, flood fill from the top row.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::gradient::sobel_gradient;
use crate::raster::{Raster, SkyMask};

pub const WORK_SIZE: usize = 512;
/// Edge threshold as a fraction of the image's maximum gradient magnitude.
pub const RELATIVE_EDGE_THRESHOLD: f64 = 0.1;
pub const EDGE_THRESHOLD_FLOOR: f64 = 1.0;

/// 512x512 edge barrier map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMask {
    bits: Vec<bool>,
}

impl EdgeMask {
    pub fn new(bits: Vec<bool>) -> Result<Self> {
        if bits.len() != WORK_SIZE * WORK_SIZE {
            return Err(Error::InvalidInput(format!(
                "edge mask must have {} entries, got {}",
                WORK_SIZE * WORK_SIZE,
                bits.len()
            )));
        }
        Ok(Self { bits })
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(WORK_SIZE * WORK_SIZE);
        for y in 0..WORK_SIZE {
            for x in 0..WORK_SIZE {
                bits.push(f(x, y));
            }
        }
        Self { bits }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * WORK_SIZE + x]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }
}

pub fn resize_512(img: &Raster) -> Raster {
    img.resize_bilinear(WORK_SIZE, WORK_SIZE)
        .expect("512x512 is a valid target")
}

pub fn edge_mask(img: &Raster) -> Result<EdgeMask> {
    if img.width() != WORK_SIZE || img.height() != WORK_SIZE {
        return Err(Error::DimensionMismatch {
            expected_w: WORK_SIZE,
            expected_h: WORK_SIZE,
            got_w: img.width(),
            got_h: img.height(),
        });
    }
    let grad = sobel_gradient(&img.to_gray())?;
    let t = (RELATIVE_EDGE_THRESHOLD * grad.max()).max(EDGE_THRESHOLD_FLOOR);
    EdgeMask::new(grad.mag.iter().map(|&m| m >= t).collect())
}

/// 4-connected fill seeded at every non-edge pixel of row 0.
pub fn floodfill_sky(edges: &EdgeMask) -> SkyMask {
    let n = WORK_SIZE;
    let mut sky = SkyMask::filled(n, n, false);
    let mut queue: VecDeque<(usize, usize)> = VecDeque::new();
    for x in 0..n {
        if !edges.get(x, 0) {
            sky.set(x, 0, true);
            queue.push_back((x, 0));
        }
    }
    while let Some((x, y)) = queue.pop_front() {
        let mut visit = |nx: usize, ny: usize, sky: &mut SkyMask| {
            if !edges.get(nx, ny) && !sky.get(nx, ny) {
                sky.set(nx, ny, true);
                queue.push_back((nx, ny));
            }
        };
        if x > 0 {
            visit(x - 1, y, &mut sky);
        }
        if x + 1 < n {
            visit(x + 1, y, &mut sky);
        }
        if y > 0 {
            visit(x, y - 1, &mut sky);
        }
        if y + 1 < n {
            visit(x, y + 1, &mut sky);
        }
    }
    sky
}

/// Full benchmark at the input resolution (nearest-neighbor mask upscale).
pub fn floodfill_mask(img: &Raster) -> SkyMask {
    let work = resize_512(img);
    let edges = edge_mask(&work).expect("work image is 512x512");
    floodfill_sky(&edges).resize_nearest(img.width(), img.height())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resize_identity_and_constant() {
        let img = Raster::from_fn(512, 512, |x, y| [(x % 256) as u8, (y % 256) as u8, 3]).unwrap();
        assert_eq!(resize_512(&img), img);
        let c = Raster::filled(1024, 1024, [10, 200, 30]).unwrap();
        assert!(resize_512(&c).pixels().iter().all(|&p| p == [10, 200, 30]));
    }

    #[test]
    fn bilinear_checker_ramp() {
        // 2x2 checker (black, white / white, black) to 4x4: sample positions -0.25 (clamped), 0.25, 0.75, 1.25 (clamped)
        let img = Raster::from_fn(2, 2, |x, y| if (x + y) % 2 == 0 { [0; 3] } else { [255; 3] }).unwrap();
        let out = img.resize_bilinear(4, 4).unwrap();
        let pos = [0.0, 0.25, 0.75, 1.0];
        for y in 0..4 {
            for x in 0..4 {
                let (fx, fy): (f64, f64) = (pos[x], pos[y]);
                // value(x,y) = 255 * [ (1-fx) fy + fx (1-fy) ] for this checker
                let want = (255.0 * ((1.0 - fx) * fy + fx * (1.0 - fy))).round() as u8;
                assert_eq!(out.get(x, y), [want; 3], "({x},{y})");
            }
        }
    }

    #[test]
    fn edge_mask_shape_checked() {
        let img = Raster::filled(100, 512, [0; 3]).unwrap();
        assert!(edge_mask(&img).is_err());
    }

    #[test]
    fn constant_image_no_edges() {
        let img = Raster::filled(512, 512, [90, 140, 220]).unwrap();
        assert!(edge_mask(&img).unwrap().bits().iter().all(|&b| !b));
    }

    #[test]
    fn step_edges_sit_on_the_step() {
        let img = Raster::from_fn(512, 512, |_, y| if y < 200 { [200; 3] } else { [50; 3] }).unwrap();
        let e = edge_mask(&img).unwrap();
        for y in 0..512 {
            let want = y == 199 || y == 200;
            assert!((0..512).all(|x| e.get(x, y) == want), "row {y}");
        }
    }

    #[test]
    fn relative_threshold_is_scale_free() {
        let base = Raster::from_fn(512, 512, |x, y| {
            let v = ((x / 37 + y / 53) % 4) as u8 * 20 + (x % 7) as u8;
            [v, v / 2, 60]
        })
        .unwrap();
        let doubled = Raster::new(
            512,
            512,
            base.pixels().iter().map(|p| p.map(|c| c * 2)).collect(),
        )
        .unwrap();
        assert_eq!(edge_mask(&base).unwrap(), edge_mask(&doubled).unwrap());
    }

    #[test]
    fn fill_cases() {
        assert!(floodfill_sky(&EdgeMask::from_fn(|_, _| false)).bits().iter().all(|&b| b));
        let r = 300;
        let line = floodfill_sky(&EdgeMask::from_fn(|_, y| y == r));
        for y in 0..512 {
            assert!((0..512).all(|x| line.get(x, y) == (y < r)));
        }
        assert_eq!(floodfill_sky(&EdgeMask::from_fn(|_, y| y == 0)).count(), 0);
    }

    #[test]
    fn fill_respects_barriers_and_connectivity() {
        // a closed box of edges below the top: interior is unreachable
        let edges = EdgeMask::from_fn(|x, y| {
            (y == 100 || y == 200) && (100..=200).contains(&x) || (x == 100 || x == 200) && (100..=200).contains(&y)
        });
        let sky = floodfill_sky(&edges);
        assert!(!sky.get(150, 150));
        assert!(sky.get(50, 150) && sky.get(150, 300));
        for i in 0..512 * 512 {
            assert!(!(sky.bits()[i] && edges.bits()[i]));
        }
    }

    #[test]
    fn uniform_sky_is_all_sky() {
        let img = Raster::filled(97, 61, [120, 170, 240]).unwrap();
        let m = floodfill_mask(&img);
        assert_eq!((m.width(), m.height()), (97, 61));
        assert_eq!(m.count(), 97 * 61);
    }

    #[test]
    fn clean_step_within_a_row() {
        let (w, h, r) = (80, 60, 25);
        let img = Raster::from_fn(w, h, |_, y| if y < r { [110, 160, 235] } else { [40, 40, 35] }).unwrap();
        let m = floodfill_mask(&img);
        for y in 0..h {
            for x in 0..w {
                if y + 1 < r {
                    assert!(m.get(x, y), "({x},{y}) should be sky");
                } else if y > r {
                    assert!(!m.get(x, y), "({x},{y}) should be ground");
                }
            }
        }
    }

    #[test]
    fn textured_top_row_gives_no_sky() {
        let img = Raster::from_fn(64, 48, |x, y| {
            if y < 3 {
                if (x + y) % 2 == 0 { [20, 60, 10] } else { [220, 230, 200] }
            } else if y < 30 {
                [110, 160, 235]
            } else {
                [40, 40, 35]
            }
        })
        .unwrap();
        assert_eq!(floodfill_mask(&img).count(), 0);
    }
}
