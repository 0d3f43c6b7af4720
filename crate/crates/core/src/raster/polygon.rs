//! Cell-edge tracing of visible regions into GeoJSON polygons.

use std::collections::HashMap;

use serde_json::{json, Value};

use super::{Visibility, VisibilityRaster};

/// Grid vertex (x = column line, y = row line).
type Vertex = (i64, i64);

#[derive(Debug, Clone, Copy)]
struct Edge {
    from: Vertex,
    dir: (i64, i64),
}

impl Edge {
    fn to(&self) -> Vertex {
        (self.from.0 + self.dir.0, self.from.1 + self.dir.1)
    }

    /// Cell on the left of the edge as seen in map orientation (north up).
    fn left_cell(&self) -> (usize, usize) {
        let (dx, dy) = self.dir;
        let x2 = 2 * self.from.0 + dx + dy;
        let y2 = 2 * self.from.1 + dy - dx;
        ((y2 / 2) as usize, (x2 / 2) as usize)
    }
}

/// Left turn in map orientation, expressed in grid (row-down) coordinates.
fn left_of(dir: (i64, i64)) -> (i64, i64) {
    (dir.1, -dir.0)
}

/// Ring in grid vertices plus the component it bounds.
struct Ring {
    vertices: Vec<Vertex>,
    component: usize,
}

fn label_components(vs: &VisibilityRaster) -> (Vec<usize>, usize) {
    const NONE: usize = usize::MAX;
    let (rows, cols) = (vs.transform.rows, vs.transform.cols);
    let mut labels = vec![NONE; rows * cols];
    let mut next = 0;
    let mut stack = Vec::new();
    for start in 0..rows * cols {
        if labels[start] != NONE || vs.cells()[start] != Visibility::Visible {
            continue;
        }
        labels[start] = next;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (r, c) = (i / cols, i % cols);
            let mut visit = |j: usize| {
                if labels[j] == NONE && vs.cells()[j] == Visibility::Visible {
                    labels[j] = next;
                    stack.push(j);
                }
            };
            if r > 0 {
                visit(i - cols);
            }
            if r + 1 < rows {
                visit(i + cols);
            }
            if c > 0 {
                visit(i - 1);
            }
            if c + 1 < cols {
                visit(i + 1);
            }
        }
        next += 1;
    }
    (labels, next)
}

fn boundary_edges(vs: &VisibilityRaster) -> Vec<Edge> {
    let (rows, cols) = (vs.transform.rows, vs.transform.cols);
    let visible = |r: i64, c: i64| {
        r >= 0 && c >= 0 && (r as usize) < rows && (c as usize) < cols && vs.get(r as usize, c as usize) == Visibility::Visible
    };
    let mut edges = Vec::new();
    for r in 0..rows as i64 {
        for c in 0..cols as i64 {
            if !visible(r, c) {
                continue;
            }
            // Counter-clockwise in map orientation: interior stays on the left.
            if !visible(r - 1, c) {
                edges.push(Edge { from: (c + 1, r), dir: (-1, 0) });
            }
            if !visible(r, c - 1) {
                edges.push(Edge { from: (c, r), dir: (0, 1) });
            }
            if !visible(r + 1, c) {
                edges.push(Edge { from: (c, r + 1), dir: (1, 0) });
            }
            if !visible(r, c + 1) {
                edges.push(Edge { from: (c + 1, r + 1), dir: (0, -1) });
            }
        }
    }
    edges
}

fn trace_rings(vs: &VisibilityRaster, labels: &[usize]) -> Vec<Ring> {
    let edges = boundary_edges(vs);
    let mut outgoing: HashMap<Vertex, Vec<usize>> = HashMap::with_capacity(edges.len());
    for (i, e) in edges.iter().enumerate() {
        outgoing.entry(e.from).or_default().push(i);
    }
    let cols = vs.transform.cols;
    let mut used = vec![false; edges.len()];
    let mut rings = Vec::new();
    for start in 0..edges.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let (r, c) = edges[start].left_cell();
        let component = labels[r * cols + c];
        let mut vertices = vec![edges[start].from];
        let mut current = start;
        loop {
            let here = edges[current].to();
            let dir = edges[current].dir;
            let options = &outgoing[&here];
            // Two exits only where regions touch at a corner; turning left
            // keeps diagonal neighbours in separate rings.
            let next = if options.len() == 1 {
                options[0]
            } else {
                let want = left_of(dir);
                *options
                    .iter()
                    .find(|&&i| edges[i].dir == want)
                    .unwrap_or(&options[0])
            };
            if edges[next].dir != dir {
                vertices.push(here);
            }
            if next == start {
                break;
            }
            used[next] = true;
            current = next;
        }
        // The start vertex is only a corner when the closing turn changes direction.
        if edges[start].dir == edges[current].dir {
            vertices.remove(0);
        } else {
            vertices.pop();
        }
        rings.push(Ring { vertices, component });
    }
    rings
}

/// Shoelace area in grid units; positive for counter-clockwise in map orientation.
fn signed_area(v: &[Vertex]) -> i64 {
    let mut twice = 0;
    for i in 0..v.len() {
        let (x0, y0) = v[i];
        let (x1, y1) = v[(i + 1) % v.len()];
        // Grid y points down, so flip the sign to get map orientation.
        twice -= x0 * y1 - x1 * y0;
    }
    twice / 2
}

/// Traces 4-connected visible regions into a GeoJSON FeatureCollection.
///
/// One Polygon feature per region, exterior ring counter-clockwise and holes
/// clockwise, in map easting/northing. Each feature carries `cells` and
/// `area_m2` properties.
pub fn polygonize(vs: &VisibilityRaster) -> Value {
    let t = vs.transform;
    let (labels, n) = label_components(vs);
    let mut exteriors: Vec<Option<Vec<Vertex>>> = vec![None; n];
    let mut holes: Vec<Vec<Vec<Vertex>>> = vec![Vec::new(); n];
    for ring in trace_rings(vs, &labels) {
        if signed_area(&ring.vertices) > 0 {
            exteriors[ring.component] = Some(ring.vertices);
        } else {
            holes[ring.component].push(ring.vertices);
        }
    }
    let mut cells = vec![0usize; n];
    for l in labels.iter().filter(|l| **l != usize::MAX) {
        cells[*l] += 1;
    }

    let to_coords = |ring: &[Vertex]| -> Value {
        let mut pts: Vec<Value> = ring
            .iter()
            .map(|&(x, y)| {
                let (e, n) = t.pixel_to_map(x as f64, y as f64);
                json!([e, n])
            })
            .collect();
        pts.push(pts[0].clone());
        Value::Array(pts)
    };

    let px2 = t.pixel_size * t.pixel_size;
    let features: Vec<Value> = exteriors
        .iter()
        .enumerate()
        .filter_map(|(i, ext)| {
            let ext = ext.as_ref()?;
            let mut rings = vec![to_coords(ext)];
            rings.extend(holes[i].iter().map(|h| to_coords(h)));
            Some(json!({
                "type": "Feature",
                "properties": { "cells": cells[i], "area_m2": cells[i] as f64 * px2 },
                "geometry": { "type": "Polygon", "coordinates": rings },
            }))
        })
        .collect();

    let mut fc = json!({
        "type": "FeatureCollection",
        "crs_note": "coordinates are map-frame easting/northing in meters, same CRS as the source DEM",
        "features": features,
    });
    if !vs.provenance.is_empty() {
        fc["provenance"] = Value::String(vs.provenance.clone());
    }
    fc
}

/// Sum of polygon areas (exteriors minus holes) in a FeatureCollection
/// produced by [`polygonize`].
pub fn feature_collection_area(fc: &Value) -> f64 {
    let ring_area = |ring: &Value| -> f64 {
        let pts: Vec<(f64, f64)> = ring
            .as_array()
            .map(|a| {
                a.iter()
                    .filter_map(|p| Some((p[0].as_f64()?, p[1].as_f64()?)))
                    .collect()
            })
            .unwrap_or_default();
        let mut twice = 0.0;
        for w in pts.windows(2) {
            twice += w[0].0 * w[1].1 - w[1].0 * w[0].1;
        }
        twice / 2.0
    };
    fc["features"]
        .as_array()
        .map(|fs| {
            fs.iter()
                .flat_map(|f| f["geometry"]["coordinates"].as_array().cloned().unwrap_or_default())
                .map(|r| ring_area(&r))
                .sum()
        })
        .unwrap_or(0.0)
}
