//! Six cube-face tiles to one equirectangular panorama.

use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::{Raster, Rgb};

pub const TILE_SIZE: usize = 640;
pub const STITCHED_WIDTH: usize = 1280;
pub const STITCHED_HEIGHT: usize = 960;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Face {
    Front,
    Right,
    Back,
    Left,
    Up,
    Down,
}

impl Face {
    pub const ALL: [Face; 6] = [Face::Front, Face::Right, Face::Back, Face::Left, Face::Up, Face::Down];

    pub fn name(self) -> &'static str {
        match self {
            Face::Front => "front",
            Face::Right => "right",
            Face::Back => "back",
            Face::Left => "left",
            Face::Up => "up",
            Face::Down => "down",
        }
    }
}

/// Cube faces seen from the inside. Front looks along +z, right along +x, up along +y.
/// Side faces are upright; the up face has its top edge toward the back, the down face toward the front.
#[derive(Debug, Clone, PartialEq)]
pub struct CubeTiles {
    pub front: Raster,
    pub right: Raster,
    pub back: Raster,
    pub left: Raster,
    pub up: Raster,
    pub down: Raster,
}

impl CubeTiles {
    pub fn face(&self, f: Face) -> &Raster {
        match f {
            Face::Front => &self.front,
            Face::Right => &self.right,
            Face::Back => &self.back,
            Face::Left => &self.left,
            Face::Up => &self.up,
            Face::Down => &self.down,
        }
    }

    /// Takes tiles in `Face::ALL` order.
    pub fn from_vec(tiles: Vec<Raster>) -> Result<Self> {
        if tiles.len() != 6 {
            return Err(Error::InvalidInput(format!("expected 6 cube tiles, got {}", tiles.len())));
        }
        let mut it = tiles.into_iter();
        let mut next = || it.next().expect("six tiles");
        Ok(Self {
            front: next(),
            right: next(),
            back: next(),
            left: next(),
            up: next(),
            down: next(),
        })
    }

    /// Loads `<face>.png` (or `.jpg`) for every face from `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut tiles = Vec::with_capacity(6);
        for f in Face::ALL {
            let png = dir.join(format!("{}.png", f.name()));
            let path = if png.exists() { png } else { dir.join(format!("{}.jpg", f.name())) };
            tiles.push(Raster::load(&path)?);
        }
        Self::from_vec(tiles)
    }
}

/// Face hit by a view direction and the tile coordinates in [-1,1]² (s right, t down).
pub fn face_coords(d: [f64; 3]) -> (Face, f64, f64) {
    let [x, y, z] = d;
    let (ax, ay, az) = (x.abs(), y.abs(), z.abs());
    if ax >= ay && ax >= az {
        if x > 0.0 {
            (Face::Right, -z / ax, -y / ax)
        } else {
            (Face::Left, z / ax, -y / ax)
        }
    } else if ay >= az {
        if y > 0.0 {
            (Face::Up, x / ay, z / ay)
        } else {
            (Face::Down, x / ay, -z / ay)
        }
    } else if z > 0.0 {
        (Face::Front, x / az, -y / az)
    } else {
        (Face::Back, -x / az, -y / az)
    }
}

/// Unit view direction for an output pixel center: longitude 0 is the front face, growing toward the right face.
pub fn pixel_direction(x: usize, y: usize, width: usize, height: usize) -> [f64; 3] {
    use std::f64::consts::PI;
    let lon = (x as f64 + 0.5) / width as f64 * 2.0 * PI - PI;
    let lat = PI / 2.0 - (y as f64 + 0.5) / height as f64 * PI;
    [lat.cos() * lon.sin(), lat.sin(), lat.cos() * lon.cos()]
}

fn sample(tile: &Raster, s: f64, t: f64) -> Rgb {
    let (w, h) = (tile.width(), tile.height());
    let fx = ((s + 1.0) / 2.0 * w as f64 - 0.5).clamp(0.0, (w - 1) as f64);
    let fy = ((t + 1.0) / 2.0 * h as f64 - 0.5).clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (ax, ay) = (fx - x0 as f64, fy - y0 as f64);
    let (p00, p10, p01, p11) = (tile.get(x0, y0), tile.get(x1, y0), tile.get(x0, y1), tile.get(x1, y1));
    let mut out = [0u8; 3];
    for c in 0..3 {
        let top = p00[c] as f64 * (1.0 - ax) + p10[c] as f64 * ax;
        let bottom = p01[c] as f64 * (1.0 - ax) + p11[c] as f64 * ax;
        out[c] = (top * (1.0 - ay) + bottom * ay).round() as u8;
    }
    out
}

/// 1280x960 equirectangular rendering of six 640x640 faces, bilinear within each face.
pub fn stitch_cube(tiles: &CubeTiles) -> Result<Raster> {
    for f in Face::ALL {
        let t = tiles.face(f);
        if t.width() != TILE_SIZE || t.height() != TILE_SIZE {
            return Err(Error::InvalidDimensions {
                width: t.width(),
                height: t.height(),
                reason: "cube tiles must be 640x640",
            });
        }
    }
    Raster::from_fn(STITCHED_WIDTH, STITCHED_HEIGHT, |x, y| {
        let (face, s, t) = face_coords(pixel_direction(x, y, STITCHED_WIDTH, STITCHED_HEIGHT));
        sample(tiles.face(face), s, t)
    })
}
