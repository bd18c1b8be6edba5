//! Tile arena, noisy ground-sensor observations and sensor degradation.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum WorldError {
    #[error("invalid world configuration: {0}")]
    InvalidConfig(String),
    #[error("position ({x}, {y}) is outside the {side} m arena")]
    OutOfBounds { x: f64, y: f64, side: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TileColor {
    White,
    Black,
}

impl TileColor {
    pub fn flipped(self) -> Self {
        match self {
            TileColor::White => TileColor::Black,
            TileColor::Black => TileColor::White,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Square lattice of black and white tiles covering a square arena.
///
/// The number of tiles per side is `round(side_length / tile_size)` (at least
/// one); the actual tile edge is stretched so the lattice covers the arena
/// exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct TileGrid {
    side_length: f64,
    tile_size: f64,
    tiles_per_side: usize,
    // row-major, row index = y
    tiles: Vec<bool>,
    target_fill_ratio: f64,
    realized_fill_ratio: f64,
}

impl TileGrid {
    /// Builds a grid with exactly `round(f * total)` black tiles placed by a
    /// uniform shuffle.
    pub fn generate<R: Rng + ?Sized>(
        side_length: f64,
        tile_size: f64,
        target_fill_ratio: f64,
        rng: &mut R,
    ) -> Result<Self, WorldError> {
        if !(side_length > 0.0 && side_length.is_finite()) {
            return Err(WorldError::InvalidConfig(format!(
                "side length must be positive, got {side_length}"
            )));
        }
        if !(tile_size > 0.0 && tile_size <= side_length) {
            return Err(WorldError::InvalidConfig(format!(
                "tile size must be in (0, {side_length}], got {tile_size}"
            )));
        }
        if !(0.0..=1.0).contains(&target_fill_ratio) {
            return Err(WorldError::InvalidConfig(format!(
                "fill ratio must be in [0, 1], got {target_fill_ratio}"
            )));
        }
        let tiles_per_side = ((side_length / tile_size).round() as usize).max(1);
        let total = tiles_per_side * tiles_per_side;
        let black = (target_fill_ratio * total as f64).round() as usize;
        let mut tiles = vec![false; total];
        tiles[..black].iter_mut().for_each(|t| *t = true);
        tiles.shuffle(rng);
        Ok(Self {
            side_length,
            tile_size: side_length / tiles_per_side as f64,
            tiles_per_side,
            tiles,
            target_fill_ratio,
            realized_fill_ratio: black as f64 / total as f64,
        })
    }

    pub fn side_length(&self) -> f64 {
        self.side_length
    }

    /// Edge of one tile after stretching to cover the arena.
    pub fn tile_size(&self) -> f64 {
        self.tile_size
    }

    pub fn tiles_per_side(&self) -> usize {
        self.tiles_per_side
    }

    pub fn total_tiles(&self) -> usize {
        self.tiles.len()
    }

    pub fn black_tiles(&self) -> usize {
        self.tiles.iter().filter(|t| **t).count()
    }

    pub fn target_fill_ratio(&self) -> f64 {
        self.target_fill_ratio
    }

    pub fn realized_fill_ratio(&self) -> f64 {
        self.realized_fill_ratio
    }

    pub fn contains(&self, p: Point) -> bool {
        (0.0..=self.side_length).contains(&p.x) && (0.0..=self.side_length).contains(&p.y)
    }

    /// Lattice `(column, row)` of the tile under `p`. Points on the far edge
    /// belong to the last tile.
    pub fn tile_index(&self, p: Point) -> Result<(usize, usize), WorldError> {
        if !self.contains(p) {
            return Err(WorldError::OutOfBounds {
                x: p.x,
                y: p.y,
                side: self.side_length,
            });
        }
        let last = self.tiles_per_side - 1;
        let col = ((p.x / self.tile_size) as usize).min(last);
        let row = ((p.y / self.tile_size) as usize).min(last);
        Ok((col, row))
    }

    pub fn color_at(&self, p: Point) -> Result<TileColor, WorldError> {
        let (col, row) = self.tile_index(p)?;
        Ok(if self.tiles[row * self.tiles_per_side + col] {
            TileColor::Black
        } else {
            TileColor::White
        })
    }

    /// Debug dump: one line of `0`/`1` per lattice row.
    pub fn to_text_matrix(&self) -> String {
        let mut out = String::with_capacity(self.tiles.len() + self.tiles_per_side);
        for row in self.tiles.chunks(self.tiles_per_side) {
            out.extend(row.iter().map(|t| if *t { '1' } else { '0' }));
            out.push('\n');
        }
        out
    }
}

/// Wiener-process parameters of a sensor's true accuracy, per control step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegradationParams {
    pub drift: f64,
    pub diffusion: f64,
    pub lower: f64,
    pub upper: f64,
}

impl DegradationParams {
    pub fn new(drift: f64, diffusion: f64, lower: f64, upper: f64) -> Result<Self, WorldError> {
        let params = Self {
            drift,
            diffusion,
            lower,
            upper,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        if !(self.drift <= 0.0 && self.drift.is_finite()) {
            return Err(WorldError::InvalidConfig(format!(
                "drift must be finite and <= 0, got {}",
                self.drift
            )));
        }
        if !(self.diffusion >= 0.0 && self.diffusion.is_finite()) {
            return Err(WorldError::InvalidConfig(format!(
                "diffusion must be finite and >= 0, got {}",
                self.diffusion
            )));
        }
        if !(0.5 <= self.lower && self.lower <= self.upper && self.upper <= 1.0) {
            return Err(WorldError::InvalidConfig(format!(
                "saturation bounds must satisfy 0.5 <= lower <= upper <= 1, got [{}, {}]",
                self.lower, self.upper
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorState {
    accuracy: f64,
    params: DegradationParams,
}

impl SensorState {
    pub fn new(accuracy: f64, params: DegradationParams) -> Result<Self, WorldError> {
        params.validate()?;
        if !(params.lower..=params.upper).contains(&accuracy) {
            return Err(WorldError::InvalidConfig(format!(
                "initial accuracy {accuracy} outside [{}, {}]",
                params.lower, params.upper
            )));
        }
        Ok(Self { accuracy, params })
    }

    pub fn accuracy(&self) -> f64 {
        self.accuracy
    }

    pub fn params(&self) -> &DegradationParams {
        &self.params
    }

    /// One Wiener step `b + drift + diffusion * g`, clamped to the saturation
    /// bounds. Always consumes exactly one standard-normal draw.
    pub fn degrade<R: Rng + ?Sized>(&self, rng: &mut R) -> Self {
        let g: f64 = rng.sample(StandardNormal);
        let next = self.accuracy + self.params.drift + self.params.diffusion * g;
        Self {
            accuracy: next.clamp(self.params.lower, self.params.upper),
            params: self.params,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Observation {
    pub black: bool,
    pub step: u64,
}

impl Observation {
    pub fn value(&self) -> u8 {
        self.black as u8
    }
}

/// Coin-flip sensor: reports the true tile color with probability equal to the
/// sensor accuracy, the opposite color otherwise. Consumes exactly one uniform
/// draw.
pub fn observe<R: Rng + ?Sized>(
    grid: &TileGrid,
    position: Point,
    sensor: &SensorState,
    step: u64,
    rng: &mut R,
) -> Result<Observation, WorldError> {
    let truth = grid.color_at(position)?;
    let u: f64 = rng.random();
    let seen = if u < sensor.accuracy() {
        truth
    } else {
        truth.flipped()
    };
    Ok(Observation {
        black: seen == TileColor::Black,
        step,
    })
}

/// Probability that a sensor of accuracy `b` reports black in an environment
/// with fill ratio `f`, `b f + (1 - b)(1 - f)`.
///
/// Evaluated as `0.5 + (2b - 1)(f - 0.5)` so that the `b = 0.5` row and the
/// `f = 0.5` column come out as exactly one half.
pub fn black_tile_probability(b: f64, f: f64) -> f64 {
    (0.5 + (2.0 * b - 1.0) * (f - 0.5)).clamp(0.0, 1.0)
}
