"""Poisson point sampling and clipped 3D Voronoi tessellation construction.

Each cell is the intersection of bisector half-spaces (against every other
generator) with the cuboidal window, built by successive convex-polyhedron
clipping.  Generators are visited nearest first, and clipping stops once the
next bisector provably cannot cut the current cell, which keeps construction
fast at the point counts used here.

Facets are deduplicated across cells by their generator pair (interior) or
generator + window face (boundary); vertices are merged on a tolerance grid
of 1e-9 times the window diameter.  Facet weights default to area and edge
weights to length ("geometric"); "unit" and "randomized" modes are
available for experimentation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyTessellationError, VolumeError

_WEIGHT_MODES = ("geometric", "unit", "randomized")
# accepted spellings for the weight modes (facet weight / edge weight):
#   geometric  - facet area / edge length (the default)
#   unit       - all weights 1
#   randomized - geometric weight times a uniform random mark in [0.5, 1.5]
_WEIGHT_ALIASES = {
    "facet-area": "geometric", "area": "geometric",
    "edge-length": "geometric", "randomized-mark": "randomized",
}

# window face ids: 2*axis + (0 for the low side, 1 for the high side)
_FACE_AXES = [(0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 1)]


def _canonical_weight_mode(mode: str) -> str:
    mode = _WEIGHT_ALIASES.get(mode, mode)
    if mode not in _WEIGHT_MODES:
        raise VolumeError(f"unknown weight_mode {mode!r}")
    return mode


@dataclass(frozen=True)
class VoronoiParams:
    """Poisson intensity (points per unit volume), window, weights, seed."""

    intensity: float
    window: tuple[tuple[float, float, float], tuple[float, float, float]]
    weight_mode: str = "geometric"
    seed: int = 0

    def __post_init__(self):
        if not self.intensity > 0:
            raise VolumeError(f"intensity must be > 0, got {self.intensity}")
        lo, hi = (np.asarray(self.window[0], float),
                  np.asarray(self.window[1], float))
        if lo.shape != (3,) or hi.shape != (3,) or not np.all(hi > lo):
            raise VolumeError(f"window must have positive extent, got {self.window}")
        object.__setattr__(self, "weight_mode",
                           _canonical_weight_mode(self.weight_mode))
        object.__setattr__(self, "window",
                           (tuple(map(float, lo)), tuple(map(float, hi))))


@dataclass(frozen=True)
class Facet:
    """Planar convex polygon of the tessellation, shared between cells."""

    vertex_ids: tuple[int, ...]
    area: float
    weight: float
    cells: tuple[int, ...]          # 2 generators (interior) or 1 (boundary)
    window_face: int | None         # window face id for boundary facets
    normal: tuple[float, float, float]
    offset: float                   # plane is normal . x == offset


@dataclass
class Tessellation:
    points: np.ndarray
    window: tuple[tuple[float, float, float], tuple[float, float, float]]
    vertices: np.ndarray                    # (V, 3)
    vertex_faces: list[frozenset[int]]      # window faces through each vertex
    edges: np.ndarray                       # (E, 2) vertex ids
    edge_lengths: np.ndarray
    edge_weights: np.ndarray
    edge_faces: list[frozenset[int]]        # window faces containing the edge
    edge_facets: list[list[int]]
    facets: list[Facet]
    facet_edges: list[list[int]]
    cell_facets: list[list[int]]
    cell_volumes: np.ndarray
    merge_tol: float = field(default=0.0)

    @property
    def n_cells(self) -> int:
        return len(self.cell_facets)

    def window_volume(self) -> float:
        lo, hi = np.asarray(self.window[0]), np.asarray(self.window[1])
        return float(np.prod(hi - lo))


def sample_poisson_points(params: VoronoiParams) -> np.ndarray:
    """Homogeneous Poisson point process in the window; count ~ Poisson(mean)."""
    rng = np.random.default_rng(params.seed)
    lo = np.asarray(params.window[0])
    hi = np.asarray(params.window[1])
    mean = params.intensity * float(np.prod(hi - lo))
    n = int(rng.poisson(mean))
    if n == 0:
        raise EmptyTessellationError(
            f"empty tessellation: Poisson({mean:.3g}) drew 0 points")
    return lo + rng.random((n, 3)) * (hi - lo)


def _box_cell(lo: np.ndarray, hi: np.ndarray) -> list[tuple[object, list[np.ndarray]]]:
    """The window box as six keyed face polygons."""
    c = {}
    for ix in (0, 1):
        for iy in (0, 1):
            for iz in (0, 1):
                c[ix, iy, iz] = np.array([
                    hi[0] if ix else lo[0],
                    hi[1] if iy else lo[1],
                    hi[2] if iz else lo[2]])
    faces = []
    loops = {
        0: [(0, 0, 0), (0, 1, 0), (0, 1, 1), (0, 0, 1)],
        1: [(1, 0, 0), (1, 0, 1), (1, 1, 1), (1, 1, 0)],
        2: [(0, 0, 0), (0, 0, 1), (1, 0, 1), (1, 0, 0)],
        3: [(0, 1, 0), (1, 1, 0), (1, 1, 1), (0, 1, 1)],
        4: [(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0)],
        5: [(0, 0, 1), (0, 1, 1), (1, 1, 1), (1, 0, 1)],
    }
    for fid, loop in loops.items():
        faces.append((("w", fid), [c[t] for t in loop]))
    return faces


def _clip_polygon(poly: list[np.ndarray], dvals: list[float],
                  tol: float) -> list[np.ndarray]:
    """Keep the part of a convex polygon with signed distance <= 0."""
    out = []
    k = len(poly)
    for i in range(k):
        j = (i + 1) % k
        di, dj = dvals[i], dvals[j]
        if di <= tol:
            out.append(poly[i])
        if (di < -tol and dj > tol) or (di > tol and dj < -tol):
            t = di / (di - dj)
            out.append(poly[i] + t * (poly[j] - poly[i]))
    return out


def _dedupe_loop(poly: list[np.ndarray], tol: float) -> list[np.ndarray]:
    out: list[np.ndarray] = []
    for p in poly:
        if not out or np.abs(p - out[-1]).max() > tol:
            out.append(p)
    if len(out) > 1 and np.abs(out[0] - out[-1]).max() <= tol:
        out.pop()
    return out


def _clip_cell(faces, normal, offset, new_key, tol):
    """Clip a convex cell (keyed face list) by the half-space n.x <= offset."""
    kept = []
    cap_points: list[np.ndarray] = []
    changed = False
    for key, poly in faces:
        dvals = [float(np.dot(normal, v) - offset) for v in poly]
        if all(d <= tol for d in dvals):
            kept.append((key, poly))
            cap_points.extend(v for v, d in zip(poly, dvals) if abs(d) <= tol)
            continue
        changed = True
        if all(d >= -tol for d in dvals):
            continue
        clipped = _dedupe_loop(_clip_polygon(poly, dvals, tol), tol)
        if len(clipped) >= 3:
            kept.append((key, clipped))
        cap_points.extend(
            v for v in clipped if abs(float(np.dot(normal, v) - offset)) <= 2 * tol)
    if not changed:
        return faces
    cap = _order_cap(cap_points, normal, tol)
    if len(cap) >= 3:
        kept.append((new_key, cap))
    return kept


def _order_cap(points: list[np.ndarray], normal: np.ndarray,
               tol: float) -> list[np.ndarray]:
    """Order the cut cross-section (convex) by angle around its centroid."""
    uniq: list[np.ndarray] = []
    for p in points:
        if all(np.abs(p - q).max() > tol for q in uniq):
            uniq.append(p)
    if len(uniq) < 3:
        return uniq
    unit = normal / np.linalg.norm(normal)
    u = _any_perpendicular(unit)
    v = np.cross(unit, u)
    arr = np.array(uniq)
    center = arr.mean(axis=0)
    ang = np.arctan2((arr - center) @ v, (arr - center) @ u)
    return [uniq[i] for i in np.argsort(ang)]


def _any_perpendicular(n: np.ndarray) -> np.ndarray:
    n = n / np.linalg.norm(n)
    pick = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = np.cross(n, pick)
    return u / np.linalg.norm(u)


def _polygon_area_normal(poly: list[np.ndarray]) -> tuple[float, np.ndarray]:
    """Area and unit normal of a planar polygon (Newell's method)."""
    n = np.zeros(3)
    for i in range(len(poly)):
        a, b = poly[i], poly[(i + 1) % len(poly)]
        n += np.cross(a, b)
    norm = np.linalg.norm(n)
    if norm == 0:
        return 0.0, np.array([0.0, 0.0, 1.0])
    return 0.5 * norm, n / norm


def build_cell(cell_index: int, points: np.ndarray, lo: np.ndarray,
               hi: np.ndarray, tol: float):
    """Intersect the window with all bisector half-spaces of one generator."""
    p = points[cell_index]
    others = np.delete(np.arange(len(points)), cell_index)
    dists = np.linalg.norm(points[others] - p, axis=1)
    order = others[np.argsort(dists)]
    faces = _box_cell(lo, hi)

    def radius2():
        return max(float(np.dot(v - p, v - p))
                   for _, poly in faces for v in poly)

    r2 = radius2()
    for j in order:
        q = points[j]
        d2 = float(np.dot(q - p, q - p))
        if d2 <= tol * tol:
            continue  # coincident generators resolve to an empty bisector
        if d2 > 4.0 * r2:
            break  # bisector plane lies beyond the cell circumradius
        normal = q - p
        offset = float(np.dot(normal, 0.5 * (p + q)))
        new_faces = _clip_cell(faces, normal, offset, ("b", j), tol)
        if new_faces is not faces:
            faces = new_faces
            r2 = radius2()
    return faces


def _cell_volume(faces, p: np.ndarray) -> float:
    """Cone decomposition from the interior generator point."""
    vol = 0.0
    for _, poly in faces:
        area, n = _polygon_area_normal(poly)
        h = abs(float(np.dot(n, poly[0] - p)))
        vol += area * h / 3.0
    return vol


def build_voronoi(points: np.ndarray,
                  window: tuple[tuple[float, float, float], tuple[float, float, float]],
                  weight_mode: str = "geometric", seed: int = 0) -> Tessellation:
    """Assemble the clipped Voronoi complex of the given generators."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 3 or len(points) < 1:
        raise VolumeError(f"need an (n, 3) point array, got {points.shape}")
    weight_mode = _canonical_weight_mode(weight_mode)
    lo = np.asarray(window[0], dtype=np.float64)
    hi = np.asarray(window[1], dtype=np.float64)
    if not np.all(hi > lo):
        raise VolumeError(f"window must have positive extent, got {window}")
    if np.any(points < lo - 1e-12) or np.any(points > hi + 1e-12):
        raise VolumeError("generator points must lie inside the window")
    diameter = float(np.linalg.norm(hi - lo))
    tol = 1e-9 * diameter
    area_tol = 1e-12 * diameter * diameter

    vertex_ids: dict[tuple[int, int, int], int] = {}
    vertex_coords: list[np.ndarray] = []

    def vid(pnt: np.ndarray) -> int:
        key = tuple(int(round(c / tol)) for c in pnt)
        known = vertex_ids.get(key)
        if known is None:
            known = len(vertex_coords)
            vertex_ids[key] = known
            vertex_coords.append(pnt.copy())
        return known

    facet_by_key: dict[tuple, dict] = {}
    cells_by_key: dict[tuple, set[int]] = {}
    cell_volumes = np.zeros(len(points))
    cell_facet_keys: list[list[tuple]] = [[] for _ in points]

    for i in range(len(points)):
        faces = build_cell(i, points, lo, hi, tol)
        cell_volumes[i] = _cell_volume(faces, points[i])
        for key, poly in faces:
            area, normal = _polygon_area_normal(poly)
            if area < area_tol:
                continue  # degenerate sliver from a near-cospherical config
            if key[0] == "b":
                fkey = ("b", min(i, key[1]), max(i, key[1]))
            else:
                fkey = ("w", i, key[1])
            cell_facet_keys[i].append(fkey)
            cells_by_key.setdefault(fkey, set()).add(i)
            if fkey in facet_by_key:
                continue
            ids = []
            for v in poly:
                k = vid(v)
                if not ids or ids[-1] != k:
                    ids.append(k)
            if len(ids) >= 2 and ids[0] == ids[-1]:
                ids.pop()
            if len(ids) < 3:
                continue
            facet_by_key[fkey] = {
                "vertex_ids": tuple(ids),
                "area": area,
                "window_face": key[1] if key[0] == "w" else None,
                "normal": tuple(normal),
                "offset": float(np.dot(normal, poly[0])),
            }

    # deterministic facet order: boundary keys after interior, sorted
    ordered_keys = sorted(facet_by_key, key=lambda k: (k[0], k[1], k[2]))
    facet_index = {k: idx for idx, k in enumerate(ordered_keys)}

    rng = np.random.default_rng(seed)
    facets: list[Facet] = []
    for k in ordered_keys:
        e = facet_by_key[k]
        if weight_mode == "unit":
            w = 1.0
        elif weight_mode == "randomized":
            w = e["area"] * rng.uniform(0.5, 1.5)
        else:
            w = e["area"]
        facets.append(Facet(
            vertex_ids=e["vertex_ids"], area=e["area"], weight=w,
            cells=tuple(sorted(cells_by_key[k])), window_face=e["window_face"],
            normal=e["normal"], offset=e["offset"]))

    vertices = np.array(vertex_coords) if vertex_coords else np.zeros((0, 3))
    vertex_faces = [_window_faces_of(v, lo, hi, tol) for v in vertices]

    edge_ids: dict[tuple[int, int], int] = {}
    edge_list: list[tuple[int, int]] = []
    edge_facets: list[list[int]] = []
    facet_edges: list[list[int]] = []
    for fidx, f in enumerate(facets):
        own_edges = []
        ids = f.vertex_ids
        for a, b in zip(ids, ids[1:] + ids[:1]):
            key = (min(a, b), max(a, b))
            eid = edge_ids.get(key)
            if eid is None:
                eid = len(edge_list)
                edge_ids[key] = eid
                edge_list.append(key)
                edge_facets.append([])
            edge_facets[eid].append(fidx)
            own_edges.append(eid)
        facet_edges.append(own_edges)

    edges = np.array(edge_list, dtype=np.int64) if edge_list else np.zeros((0, 2), np.int64)
    if len(edges):
        edge_lengths = np.linalg.norm(
            vertices[edges[:, 0]] - vertices[edges[:, 1]], axis=1)
    else:
        edge_lengths = np.zeros(0)
    if weight_mode == "unit":
        edge_weights = np.ones_like(edge_lengths)
    elif weight_mode == "randomized":
        edge_weights = edge_lengths * rng.uniform(0.5, 1.5, size=edge_lengths.shape)
    else:
        edge_weights = edge_lengths.copy()
    edge_faces = [vertex_faces[a] & vertex_faces[b] for a, b in edge_list]

    cell_facets = [
        sorted({facet_index[k] for k in keys if k in facet_index})
        for keys in cell_facet_keys
    ]
    return Tessellation(
        points=points, window=(tuple(lo), tuple(hi)), vertices=vertices,
        vertex_faces=vertex_faces, edges=edges, edge_lengths=edge_lengths,
        edge_weights=edge_weights, edge_faces=edge_faces,
        edge_facets=edge_facets, facets=facets, facet_edges=facet_edges,
        cell_facets=cell_facets, cell_volumes=cell_volumes, merge_tol=tol)


def _window_faces_of(v: np.ndarray, lo: np.ndarray, hi: np.ndarray,
                     tol: float) -> frozenset[int]:
    faces = set()
    for fid, (axis, side) in enumerate(_FACE_AXES):
        plane = hi[axis] if side else lo[axis]
        if abs(v[axis] - plane) <= 2 * tol:
            faces.add(fid)
    return frozenset(faces)


def build_from_params(params: VoronoiParams) -> Tessellation:
    """Sample a Poisson configuration and build its tessellation."""
    points = sample_poisson_points(params)
    return build_voronoi(points, params.window,
                         weight_mode=params.weight_mode, seed=params.seed)
