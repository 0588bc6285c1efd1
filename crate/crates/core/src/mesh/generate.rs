//! Procedural test meshes.

use std::collections::HashMap;
use std::f64::consts::PI;

use super::{SurfaceMesh, Vec3};
use crate::error::{IppError, Result};

/// Incremental triangle soup with vertex welding on a 1e-9 m lattice.
#[derive(Debug, Default)]
pub struct MeshBuilder {
    vertices: Vec<Vec3>,
    lookup: HashMap<[i64; 3], usize>,
    triangles: Vec<[usize; 3]>,
}

impl MeshBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn vertex(&mut self, p: Vec3) -> usize {
        let key = [p.x, p.y, p.z].map(|c| (c * 1e9).round() as i64);
        *self.lookup.entry(key).or_insert_with(|| {
            self.vertices.push(p);
            self.vertices.len() - 1
        })
    }

    pub fn triangle(&mut self, a: Vec3, b: Vec3, c: Vec3) {
        let t = [self.vertex(a), self.vertex(b), self.vertex(c)];
        self.triangles.push(t);
    }

    /// Counter-clockwise quad `a b c d` as seen from outside.
    pub fn quad(&mut self, a: Vec3, b: Vec3, c: Vec3, d: Vec3) {
        self.triangle(a, b, c);
        self.triangle(a, c, d);
    }

    /// Rectangular patch `origin + s*u + t*v`, s,t ∈ [0,1], split into
    /// `nu × nv` quads; outward normal along `u × v`.
    pub fn patch(&mut self, origin: Vec3, u: Vec3, v: Vec3, nu: usize, nv: usize) {
        let at = |i: usize, j: usize| origin + u * (i as f64 / nu as f64) + v * (j as f64 / nv as f64);
        for i in 0..nu {
            for j in 0..nv {
                self.quad(at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1));
            }
        }
    }

    pub fn build(self) -> Result<SurfaceMesh> {
        SurfaceMesh::from_triangles(self.vertices, self.triangles)
    }
}

/// Axis-aligned unit cube `[0,1]³`, 12 facets.
pub fn unit_cube() -> SurfaceMesh {
    let mut b = MeshBuilder::new();
    let x = Vec3::x();
    let y = Vec3::y();
    let z = Vec3::z();
    let o = Vec3::zeros();
    b.patch(o, y, x, 1, 1); // bottom, -z
    b.patch(z, x, y, 1, 1); // top, +z
    b.patch(o, x, z, 1, 1); // front, -y
    b.patch(y, z, x, 1, 1); // back, +y
    b.patch(o, z, y, 1, 1); // left, -x
    b.patch(x, y, z, 1, 1); // right, +x
    b.build().expect("unit cube is valid")
}

#[derive(Debug, Clone, Copy)]
struct TankLayout {
    sectors: usize,
    rows: usize,
    bottom_rings: usize,
    dome_rings: usize,
}

impl TankLayout {
    fn cap_facets(sectors: usize, rings: usize) -> usize {
        if rings == 0 {
            sectors - 2
        } else {
            sectors * (2 * rings - 1)
        }
    }

    fn facet_count(&self) -> usize {
        2 * self.sectors * self.rows
            + Self::cap_facets(self.sectors, self.bottom_rings)
            + Self::cap_facets(self.sectors, self.dome_rings)
    }
}

/// Closed storage-tank mesh: vertical side wall on `z ∈ [0, height]`, a flat
/// bottom disk, and a spherical-cap dome of height `dome_height` on top.
/// The lattice resolution is chosen so the facet count lands as close as
/// possible to `target_facets`.
pub fn generate_cylinder_tank(
    radius: f64,
    height: f64,
    dome_height: f64,
    target_facets: usize,
) -> Result<SurfaceMesh> {
    for (field, v) in [("radius", radius), ("height", height), ("dome_height", dome_height)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(IppError::param(field, format!("must be positive, got {v}")));
        }
    }
    if target_facets < 8 {
        return Err(IppError::param("target_facets", format!("must be ≥ 8, got {target_facets}")));
    }

    let sphere = (radius * radius + dome_height * dome_height) / (2.0 * dome_height);
    let polar_max = (radius / sphere).asin();
    let dome_arc = sphere * polar_max;

    let max_sectors = 3 + 4 * (target_facets as f64).sqrt() as usize;
    let layout = (3..=max_sectors)
        .map(|sectors| {
            let edge = 2.0 * PI * radius / sectors as f64;
            TankLayout {
                sectors,
                rows: ((height / edge).round() as usize).max(1),
                bottom_rings: (radius / edge).round() as usize,
                dome_rings: (dome_arc / edge).round() as usize,
            }
        })
        .min_by_key(|l| l.facet_count().abs_diff(target_facets))
        .expect("non-empty search range");

    let TankLayout {
        sectors,
        rows,
        bottom_rings,
        dome_rings,
    } = layout;
    let angle = |i: usize| 2.0 * PI * (i % sectors) as f64 / sectors as f64;
    let wall = |i: usize, z: f64| Vec3::new(radius * angle(i).cos(), radius * angle(i).sin(), z);

    let mut b = MeshBuilder::new();
    for j in 0..rows {
        let z0 = height * j as f64 / rows as f64;
        let z1 = height * (j + 1) as f64 / rows as f64;
        for i in 0..sectors {
            b.quad(wall(i, z0), wall(i + 1, z0), wall(i + 1, z1), wall(i, z1));
        }
    }

    // Bottom disk, facing -z.
    let bottom = |ring: usize, i: usize| {
        if ring == bottom_rings {
            wall(i, 0.0)
        } else {
            let r = radius * ring as f64 / bottom_rings as f64;
            Vec3::new(r * angle(i).cos(), r * angle(i).sin(), 0.0)
        }
    };
    if bottom_rings == 0 {
        for i in 1..sectors - 1 {
            b.triangle(wall(0, 0.0), wall(i + 1, 0.0), wall(i, 0.0));
        }
    } else {
        for i in 0..sectors {
            b.triangle(Vec3::zeros(), bottom(1, i + 1), bottom(1, i));
        }
        for ring in 1..bottom_rings {
            for i in 0..sectors {
                b.quad(bottom(ring, i), bottom(ring, i + 1), bottom(ring + 1, i + 1), bottom(ring + 1, i));
            }
        }
    }

    // Dome, facing +z. Ring 0 is the apex, the last ring is the wall rim.
    let center_z = height + dome_height - sphere;
    let dome = |ring: usize, i: usize| {
        if ring == dome_rings {
            wall(i, height)
        } else {
            let polar = polar_max * ring as f64 / dome_rings as f64;
            let r = sphere * polar.sin();
            Vec3::new(r * angle(i).cos(), r * angle(i).sin(), center_z + sphere * polar.cos())
        }
    };
    if dome_rings == 0 {
        for i in 1..sectors - 1 {
            b.triangle(wall(0, height), wall(i, height), wall(i + 1, height));
        }
    } else {
        let apex = Vec3::new(0.0, 0.0, height + dome_height);
        for i in 0..sectors {
            b.triangle(apex, dome(1, i), dome(1, i + 1));
        }
        for ring in 1..dome_rings {
            for i in 0..sectors {
                b.quad(dome(ring, i), dome(ring + 1, i), dome(ring + 1, i + 1), dome(ring, i + 1));
            }
        }
    }

    let mesh = b.build()?;
    debug_assert_eq!(mesh.len(), layout.facet_count());
    Ok(mesh)
}

/// Non-convex airplane stand-in: a 12-sided prism fuselage along +x with two
/// box wings extruded from its ±y faces. About 800 facets.
pub fn composite_airplane() -> SurfaceMesh {
    const SIDES: usize = 12;
    const RADIUS: f64 = 3.0;
    const LENGTH: f64 = 30.0;
    const CELLS_X: usize = 20;
    const WING_START: usize = 8; // first fuselage cell covered by the wing root
    const WING_CELLS: usize = 4;
    const SPAN: f64 = 10.0;
    const SPAN_CELLS: usize = 7;

    let dx = LENGTH / CELLS_X as f64;
    let corner = |k: usize, x: f64| {
        let beta = (k as f64 + 0.5) * 2.0 * PI / SIDES as f64;
        Vec3::new(x, RADIUS * beta.cos(), RADIUS * beta.sin())
    };
    // Side k spans corners k and k+1; its outward normal sits at angle (k+1)·2π/SIDES.
    let plus_y = SIDES - 1;
    let minus_y = SIDES / 2 - 1;
    let wing_cells = WING_START..WING_START + WING_CELLS;

    let mut b = MeshBuilder::new();
    for k in 0..SIDES {
        for c in 0..CELLS_X {
            if (k == plus_y || k == minus_y) && wing_cells.contains(&c) {
                continue;
            }
            let (x0, x1) = (c as f64 * dx, (c + 1) as f64 * dx);
            let (k0, k1) = (k, (k + 1) % SIDES);
            b.quad(corner(k0, x0), corner(k0, x1), corner(k1, x1), corner(k1, x0));
        }
    }
    let nose = Vec3::zeros();
    let tail = Vec3::new(LENGTH, 0.0, 0.0);
    for k in 0..SIDES {
        let k1 = (k + 1) % SIDES;
        b.triangle(nose, corner(k1, 0.0), corner(k, 0.0));
        b.triangle(tail, corner(k, LENGTH), corner(k1, LENGTH));
    }

    let xa = WING_START as f64 * dx;
    let chord = WING_CELLS as f64 * dx;
    for (side, dir) in [(plus_y, 1.0), (minus_y, -1.0)] {
        // root rectangle on the fuselage face
        let lo = corner(side, xa);
        let hi = corner((side + 1) % SIDES, xa);
        let (z_lo, z_hi) = (lo.z.min(hi.z), lo.z.max(hi.z));
        let root_y = lo.y;
        let out = Vec3::new(0.0, dir * SPAN, 0.0);
        let along = Vec3::new(chord, 0.0, 0.0);
        let up = Vec3::new(0.0, 0.0, z_hi - z_lo);
        let base = Vec3::new(xa, root_y, z_lo);
        // Orientation is fixed globally after welding, so winding here only
        // needs to be consistent per patch.
        b.patch(base, along, out, WING_CELLS, SPAN_CELLS); // bottom
        b.patch(base + up, out, along, SPAN_CELLS, WING_CELLS); // top
        b.patch(base, out, up, SPAN_CELLS, 1); // leading face
        b.patch(base + along, up, out, 1, SPAN_CELLS); // trailing face
        b.patch(base + out, up, along, 1, WING_CELLS); // tip
    }
    b.build().expect("composite airplane is valid")
}
