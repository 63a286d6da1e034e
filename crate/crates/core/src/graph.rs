//! Graph families: complete graph, hypercube and two-dimensional torus.
//!
//! Vertices are encoded as 64-bit labels and never enumerated, so degree,
//! neighbour sampling and distance are all O(1) in the vertex count.
//!
//! * complete(N): labels `0..N`.
//! * hypercube(n): an `n`-bit mask, bit `i` set iff spin `i` is `-1`; label 0
//!   is the all-ones spin configuration.
//! * torus2d(n): side `L = 2^n`, label `x | (y << n)`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VertexId(pub u64);

impl VertexId {
    /// The distinguished start vertex.
    pub const ORIGIN: VertexId = VertexId(0);
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Topology {
    Complete { vertices: u64 },
    Hypercube { dim: u32 },
    Torus2d { bits: u32 },
}

impl Topology {
    pub fn complete(vertices: u64) -> Result<Self> {
        if vertices < 2 {
            return Err(Error::Topology(format!(
                "complete graph needs at least 2 vertices, got {vertices}"
            )));
        }
        Ok(Topology::Complete { vertices })
    }

    pub fn hypercube(dim: u32) -> Result<Self> {
        if dim == 0 || dim > 63 {
            return Err(Error::Topology(format!(
                "hypercube dimension must be in 1..=63, got {dim}"
            )));
        }
        Ok(Topology::Hypercube { dim })
    }

    pub fn torus2d(bits: u32) -> Result<Self> {
        // 2^{2n} must fit in 63 bits
        if bits == 0 || bits > 31 {
            return Err(Error::Topology(format!(
                "torus exponent must be in 1..=31, got {bits}"
            )));
        }
        Ok(Topology::Torus2d { bits })
    }

    pub fn vertex_count(&self) -> u64 {
        match *self {
            Topology::Complete { vertices } => vertices,
            Topology::Hypercube { dim } => 1u64 << dim,
            Topology::Torus2d { bits } => 1u64 << (2 * bits),
        }
    }

    pub fn degree(&self) -> u64 {
        match *self {
            Topology::Complete { vertices } => vertices - 1,
            Topology::Hypercube { dim } => dim as u64,
            Topology::Torus2d { .. } => 4,
        }
    }

    /// Side length of the torus; `None` for the other families.
    pub fn side(&self) -> Option<u64> {
        match *self {
            Topology::Torus2d { bits } => Some(1u64 << bits),
            _ => None,
        }
    }

    pub fn contains(&self, v: VertexId) -> bool {
        v.0 < self.vertex_count()
    }

    /// Packs torus coordinates. Coordinates are reduced modulo the side.
    pub fn torus_vertex(&self, x: u64, y: u64) -> VertexId {
        match *self {
            Topology::Torus2d { bits } => {
                let mask = (1u64 << bits) - 1;
                VertexId((x & mask) | ((y & mask) << bits))
            }
            _ => panic!("torus_vertex called on {self}"),
        }
    }

    pub fn torus_coords(&self, v: VertexId) -> (u64, u64) {
        match *self {
            Topology::Torus2d { bits } => {
                let mask = (1u64 << bits) - 1;
                (v.0 & mask, v.0 >> bits)
            }
            _ => panic!("torus_coords called on {self}"),
        }
    }

    /// Uniform neighbour of `v`; never `v` itself.
    #[inline]
    pub fn sample_neighbor<R: Rng + ?Sized>(&self, v: VertexId, rng: &mut R) -> VertexId {
        match *self {
            Topology::Complete { vertices } => {
                let w = rng.gen_range(0..vertices - 1);
                VertexId(if w >= v.0 { w + 1 } else { w })
            }
            Topology::Hypercube { dim } => VertexId(v.0 ^ (1u64 << rng.gen_range(0..dim))),
            Topology::Torus2d { bits } => {
                // table lookup rather than a four-way branch, which mispredicts
                let mask = (1u64 << bits) - 1;
                let dir = (rng.gen::<u32>() >> 30) as usize;
                let dx = [1, mask, 0, 0][dir];
                let dy = [0, 0, 1, mask][dir];
                let x = (v.0 & mask).wrapping_add(dx) & mask;
                let y = (v.0 >> bits).wrapping_add(dy) & mask;
                VertexId(x | (y << bits))
            }
        }
    }

    /// All neighbours of `v`, in a fixed order. Only for small graphs and
    /// exact computations.
    pub fn neighbors(&self, v: VertexId) -> Vec<VertexId> {
        match *self {
            Topology::Complete { vertices } => {
                (0..vertices).filter(|&w| w != v.0).map(VertexId).collect()
            }
            Topology::Hypercube { dim } => (0..dim).map(|i| VertexId(v.0 ^ (1u64 << i))).collect(),
            Topology::Torus2d { .. } => {
                let (x, y) = self.torus_coords(v);
                let side = self.side().unwrap();
                vec![
                    self.torus_vertex(x + 1, y),
                    self.torus_vertex(x + side - 1, y),
                    self.torus_vertex(x, y + 1),
                    self.torus_vertex(x, y + side - 1),
                ]
            }
        }
    }

    /// Graph distance.
    pub fn distance(&self, u: VertexId, v: VertexId) -> u64 {
        match *self {
            Topology::Complete { .. } => u64::from(u != v),
            Topology::Hypercube { .. } => (u.0 ^ v.0).count_ones() as u64,
            Topology::Torus2d { .. } => {
                let side = self.side().unwrap();
                let (ux, uy) = self.torus_coords(u);
                let (vx, vy) = self.torus_coords(v);
                let wrap = |a: u64, b: u64| {
                    let d = a.abs_diff(b);
                    d.min(side - d)
                };
                wrap(ux, vx) + wrap(uy, vy)
            }
        }
    }

    /// Hypercube vertex at distance `k` from the origin obtained by flipping
    /// the first `k` spins.
    pub fn hypercube_z(&self, k: u32) -> VertexId {
        match *self {
            Topology::Hypercube { dim } => {
                assert!(k <= dim);
                VertexId(if k == 64 { u64::MAX } else { (1u64 << k) - 1 })
            }
            _ => panic!("hypercube_z called on {self}"),
        }
    }

    /// Spin configuration of a hypercube vertex, `+1`/`-1` per coordinate.
    pub fn spins(&self, v: VertexId) -> Vec<i8> {
        match *self {
            Topology::Hypercube { dim } => (0..dim)
                .map(|i| if v.0 >> i & 1 == 1 { -1 } else { 1 })
                .collect(),
            _ => panic!("spins called on {self}"),
        }
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Topology::Complete { vertices } => write!(f, "complete:{vertices}"),
            Topology::Hypercube { dim } => write!(f, "hypercube:{dim}"),
            Topology::Torus2d { bits } => write!(f, "torus2d:{bits}"),
        }
    }
}

impl FromStr for Topology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (family, size) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::Topology(format!("expected family:size, got {s:?}")))?;
        let size: u64 = size
            .trim()
            .parse()
            .map_err(|_| Error::Topology(format!("bad size in {s:?}")))?;
        let small = |size: u64| {
            u32::try_from(size).map_err(|_| Error::Topology(format!("size too large in {s:?}")))
        };
        match family.trim() {
            "complete" => Topology::complete(size),
            "hypercube" => Topology::hypercube(small(size)?),
            "torus2d" | "torus" => Topology::torus2d(small(size)?),
            other => Err(Error::Topology(format!("unknown family {other:?}"))),
        }
    }
}
