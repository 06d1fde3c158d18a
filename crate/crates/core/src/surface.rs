//! Table and wall planes, the mats on them, and the seam where they meet.

use std::fmt;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::SurfaceError;

/// Millimetres per mat unit of the positioning mat.
pub const MAT_UNIT_MM: f64 = 1.42;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(transparent)]
pub struct SurfaceId(pub String);

impl SurfaceId {
    pub fn table() -> Self {
        Self("table".into())
    }

    pub fn wall() -> Self {
        Self("wall".into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for SurfaceId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

impl fmt::Display for SurfaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceKind {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSpec {
    pub id: SurfaceId,
    pub kind: SurfaceKind,
    /// World position of mat coordinate (0, 0), mm.
    pub origin_world: Vector3<f64>,
    /// World directions of the mat x and y axes.
    pub basis: [Vector3<f64>; 2],
    /// Mat width and height in mat units.
    pub extent: [f64; 2],
    pub unit_mm: f64,
    pub ferromagnetic: bool,
}

impl SurfaceSpec {
    pub fn normal(&self) -> Vector3<f64> {
        self.basis[0].cross(&self.basis[1])
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (0.0..=self.extent[0]).contains(&x) && (0.0..=self.extent[1]).contains(&y)
    }

    pub fn center(&self) -> [f64; 2] {
        [self.extent[0] / 2.0, self.extent[1] / 2.0]
    }
}

/// Position of a robot on a mat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct MatPose {
    pub surface: SurfaceId,
    pub x: f64,
    pub y: f64,
    /// Degrees in `[0, 360)`, 0 along mat +x, counter-clockwise positive.
    pub heading: f64,
}

pub fn normalize_heading(deg: f64) -> f64 {
    let h = deg.rem_euclid(360.0);
    if h >= 360.0 {
        0.0
    } else {
        h
    }
}

/// Signed smallest difference `to - from` in degrees, in `(-180, 180]`.
pub fn heading_delta(from: f64, to: f64) -> f64 {
    let d = (to - from).rem_euclid(360.0);
    if d > 180.0 {
        d - 360.0
    } else {
        d
    }
}

impl MatPose {
    pub fn new(surface: impl Into<SurfaceId>, x: f64, y: f64, heading: f64) -> Self {
        Self { surface: surface.into(), x, y, heading: normalize_heading(heading) }
    }

    pub fn table(x: f64, y: f64, heading: f64) -> Self {
        Self::new(SurfaceId::table(), x, y, heading)
    }

    pub fn wall(x: f64, y: f64, heading: f64) -> Self {
        Self::new(SurfaceId::wall(), x, y, heading)
    }

    /// Mat-unit distance to another pose on the same surface.
    pub fn planar_distance(&self, other: &MatPose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn xy(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

/// A straight edge segment on one surface, in that surface's mat units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeamEdge {
    pub surface: SurfaceId,
    pub a: [f64; 2],
    pub b: [f64; 2],
}

impl SeamEdge {
    fn vec(&self) -> Vector2<f64> {
        Vector2::new(self.b[0] - self.a[0], self.b[1] - self.a[1])
    }

    /// Position along the edge (0 at `a`, 1 at `b`) and perpendicular
    /// distance, both for a point in mat units.
    pub fn project(&self, p: [f64; 2]) -> (f64, f64) {
        let v = self.vec();
        let rel = Vector2::new(p[0] - self.a[0], p[1] - self.a[1]);
        let t = rel.dot(&v) / v.norm_squared();
        let foot = Vector2::new(self.a[0], self.a[1]) + v * t;
        let dist = (Vector2::new(p[0], p[1]) - foot).norm();
        (t, dist)
    }

    pub fn point_at(&self, t: f64) -> [f64; 2] {
        let v = self.vec();
        [self.a[0] + v.x * t, self.a[1] + v.y * t]
    }

    pub fn length_units(&self) -> f64 {
        self.vec().norm()
    }
}

/// Where the table meets the wall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeamSpec {
    pub table_edge: SeamEdge,
    pub wall_edge: SeamEdge,
    /// Maximum distance from the edge, mat units, for a pose to be
    /// transferred.
    pub capture_band: f64,
    /// Distance from the edge at which a transferred robot's centre lands,
    /// mm (robot half-depth).
    pub entry_offset_mm: f64,
}

/// Surfaces plus seam; immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceWorld {
    pub surfaces: Vec<SurfaceSpec>,
    pub seam: SeamSpec,
    /// Recorded for completeness; not modelled geometrically.
    #[serde(default)]
    pub whiteboard_thickness_mm: f64,
}

impl Default for SurfaceWorld {
    fn default() -> Self {
        Self::standard(550.0, 550.0, MAT_UNIT_MM)
    }
}

impl SurfaceWorld {
    /// Table mat at z = 0 and a wall mat rising from the table's far edge
    /// (mat y = `height` on the table).
    pub fn standard(width: f64, height: f64, unit_mm: f64) -> Self {
        let table = SurfaceSpec {
            id: SurfaceId::table(),
            kind: SurfaceKind::Horizontal,
            origin_world: Vector3::zeros(),
            basis: [Vector3::x(), Vector3::y()],
            extent: [width, height],
            unit_mm,
            ferromagnetic: false,
        };
        let wall = SurfaceSpec {
            id: SurfaceId::wall(),
            kind: SurfaceKind::Vertical,
            origin_world: Vector3::new(0.0, height * unit_mm, 0.0),
            basis: [Vector3::x(), Vector3::z()],
            extent: [width, height],
            unit_mm,
            ferromagnetic: true,
        };
        let seam = SeamSpec {
            table_edge: SeamEdge { surface: SurfaceId::table(), a: [0.0, height], b: [width, height] },
            wall_edge: SeamEdge { surface: SurfaceId::wall(), a: [0.0, 0.0], b: [width, 0.0] },
            capture_band: 15.0,
            entry_offset_mm: 16.0,
        };
        Self { surfaces: vec![table, wall], seam, whiteboard_thickness_mm: 3.0 }
    }

    pub fn from_json(text: &str) -> Result<Self, SurfaceError> {
        let world: Self =
            serde_json::from_str(text).map_err(|e| SurfaceError::Invalid(e.to_string()))?;
        world.validate()?;
        Ok(world)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("world serializes")
    }

    pub fn validate(&self) -> Result<(), SurfaceError> {
        for s in &self.surfaces {
            let [bx, by] = &s.basis;
            let ortho = (bx.norm() - 1.0).abs() < 1e-9
                && (by.norm() - 1.0).abs() < 1e-9
                && bx.dot(by).abs() < 1e-9;
            if !ortho {
                return Err(SurfaceError::Invalid(format!("basis of {} is not orthonormal", s.id)));
            }
            if !(s.unit_mm > 0.0) || !(s.extent[0] > 0.0 && s.extent[1] > 0.0) {
                return Err(SurfaceError::Invalid(format!("bad scale or extent on {}", s.id)));
            }
        }
        let t = self.surface(&self.seam.table_edge.surface)?;
        let w = self.surface(&self.seam.wall_edge.surface)?;
        let lt = self.seam.table_edge.length_units() * t.unit_mm;
        let lw = self.seam.wall_edge.length_units() * w.unit_mm;
        if (lt - lw).abs() > 1e-6 {
            return Err(SurfaceError::Invalid(format!(
                "seam edges differ in length: {lt} mm vs {lw} mm"
            )));
        }
        Ok(())
    }

    pub fn surface(&self, id: &SurfaceId) -> Result<&SurfaceSpec, SurfaceError> {
        self.surfaces
            .iter()
            .find(|s| &s.id == id)
            .ok_or_else(|| SurfaceError::UnknownSurface(id.0.clone()))
    }

    pub fn check_pose(&self, pose: &MatPose) -> Result<&SurfaceSpec, SurfaceError> {
        let s = self.surface(&pose.surface)?;
        if !s.contains(pose.x, pose.y) {
            return Err(SurfaceError::OutOfExtent {
                surface: pose.surface.0.clone(),
                x: pose.x,
                y: pose.y,
            });
        }
        Ok(s)
    }

    /// World point and facing direction of a mat pose.
    pub fn to_world(&self, pose: &MatPose) -> Result<(Vector3<f64>, Vector3<f64>), SurfaceError> {
        let s = self.check_pose(pose)?;
        let point = s.origin_world + (s.basis[0] * pose.x + s.basis[1] * pose.y) * s.unit_mm;
        let (sin, cos) = pose.heading.to_radians().sin_cos();
        let facing = s.basis[0] * cos + s.basis[1] * sin;
        Ok((point, facing))
    }

    /// Inverse of [`Self::to_world`] for a point; the heading is 0.
    pub fn from_world(&self, point: &Vector3<f64>, surface: &SurfaceId) -> Result<MatPose, SurfaceError> {
        let s = self.surface(surface)?;
        let rel = point - s.origin_world;
        let off = rel.dot(&s.normal());
        if off.abs() > 1e-6 {
            return Err(SurfaceError::OffPlane { surface: surface.0.clone(), distance_mm: off.abs() });
        }
        let pose = MatPose::new(
            surface.clone(),
            rel.dot(&s.basis[0]) / s.unit_mm,
            rel.dot(&s.basis[1]) / s.unit_mm,
            0.0,
        );
        Ok(pose)
    }

    /// Like [`Self::from_world`] but recovers the heading from a facing
    /// vector lying in the surface plane.
    pub fn from_world_facing(
        &self,
        point: &Vector3<f64>,
        facing: &Vector3<f64>,
        surface: &SurfaceId,
    ) -> Result<MatPose, SurfaceError> {
        let s = self.surface(surface)?;
        let mut pose = self.from_world(point, surface)?;
        let heading = facing.dot(&s.basis[1]).atan2(facing.dot(&s.basis[0])).to_degrees();
        pose.heading = normalize_heading(heading);
        Ok(pose)
    }

    /// Physical distance, mm, between two poses on the same surface.
    pub fn distance_mm(&self, a: &MatPose, b: &MatPose) -> Result<f64, SurfaceError> {
        let (pa, _) = self.to_world(a)?;
        let (pb, _) = self.to_world(b)?;
        Ok((pa - pb).norm())
    }

    /// Edge of the seam lying on `surface`, with the opposite edge.
    pub fn seam_edges(&self, surface: &SurfaceId) -> Result<(&SeamEdge, &SeamEdge), SurfaceError> {
        let seam = &self.seam;
        if &seam.table_edge.surface == surface {
            Ok((&seam.table_edge, &seam.wall_edge))
        } else if &seam.wall_edge.surface == surface {
            Ok((&seam.wall_edge, &seam.table_edge))
        } else {
            Err(SurfaceError::UnknownSurface(surface.0.clone()))
        }
    }

    /// The surface on the other side of the seam.
    pub fn opposite(&self, surface: &SurfaceId) -> Result<SurfaceId, SurfaceError> {
        Ok(self.seam_edges(surface)?.1.surface.clone())
    }

    /// Heading (degrees) pointing from the seam into `surface`.
    pub fn inward_heading(&self, surface: &SurfaceId) -> Result<f64, SurfaceError> {
        let (edge, _) = self.seam_edges(surface)?;
        let s = self.surface(surface)?;
        let v = edge.vec();
        let mut n = Vector2::new(-v.y, v.x).normalize();
        let c = s.center();
        let mid = edge.point_at(0.5);
        if n.dot(&Vector2::new(c[0] - mid[0], c[1] - mid[1])) < 0.0 {
            n = -n;
        }
        Ok(normalize_heading(n.y.atan2(n.x).to_degrees()))
    }

    /// Lateral seam parameter and distance from the seam, mat units.
    pub fn seam_coordinates(&self, pose: &MatPose) -> Result<(f64, f64), SurfaceError> {
        let (edge, _) = self.seam_edges(&pose.surface)?;
        Ok(edge.project(pose.xy()))
    }

    /// Pose on `surface` at seam parameter `t`, `offset` mat units in from
    /// the edge, with the given heading.
    pub fn seam_pose(&self, surface: &SurfaceId, t: f64, offset: f64, heading: f64) -> Result<MatPose, SurfaceError> {
        let (edge, _) = self.seam_edges(surface)?;
        let inward = self.inward_heading(surface)?.to_radians();
        let p = edge.point_at(t);
        let mut x = p[0] + offset * inward.cos();
        let mut y = p[1] + offset * inward.sin();
        // trig rounding may push a corner pose a hair off the mat
        let [w, h] = self.surface(surface)?.extent;
        if (-1e-9..0.0).contains(&x) || (w..w + 1e-9).contains(&x) {
            x = x.clamp(0.0, w);
        }
        if (-1e-9..0.0).contains(&y) || (h..h + 1e-9).contains(&y) {
            y = y.clamp(0.0, h);
        }
        Ok(MatPose::new(surface.clone(), x, y, heading))
    }

    /// Entry offset of a transferred robot in the target surface's units.
    pub fn entry_offset(&self, surface: &SurfaceId) -> Result<f64, SurfaceError> {
        Ok(self.seam.entry_offset_mm / self.surface(surface)?.unit_mm)
    }

    /// Maps a pose near the seam to the matching pose just across it.
    pub fn seam_transfer(&self, pose: &MatPose) -> Result<MatPose, SurfaceError> {
        self.check_pose(pose)?;
        let (t, dist) = self.seam_coordinates(pose)?;
        let band = self.seam.capture_band;
        if dist > band + 1e-9 || !(-1e-9..=1.0 + 1e-9).contains(&t) {
            return Err(SurfaceError::OutsideCaptureBand { distance: dist, band });
        }
        let target = self.opposite(&pose.surface)?;
        let heading = self.inward_heading(&target)?;
        self.seam_pose(&target, t, self.entry_offset(&target)?, heading)
    }
}
