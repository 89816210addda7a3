"""Geometric measurements on discrete phase fields.

Everything here is read-only measurement: level-set masks, ball densities,
interface measure profiles, cubic-grid boundary counting, clean-ball
search, interface width, and symmetric differences.  Masks extend beyond
the fundamental domain by periodicity across the strip and by their
far-field membership flags along it, so balls may reach past the buffers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .lattice import Field, GeometryError, StripDomain


@dataclass
class SetMask:
    """Boolean phase indicator on the fundamental domain.

    ``far_below``/``far_above`` record whether the two far-field
    half-planes belong to the set.
    """

    domain: StripDomain
    inside: np.ndarray
    far_below: bool
    far_above: bool

    def __post_init__(self):
        self.inside = np.asarray(self.inside, dtype=bool)
        if self.inside.shape != self.domain.shape:
            raise GeometryError("mask shape does not match the domain")

    def complement(self) -> "SetMask":
        return SetMask(self.domain, ~self.inside,
                       not self.far_below, not self.far_above)

    @property
    def measure(self) -> float:
        """Measure of the mask within the fundamental slab."""
        return float(np.count_nonzero(self.inside)) * self.domain.cell_volume

    def indicator_field(self) -> Field:
        """chi_E - chi_(complement) as a field."""
        vals = np.where(self.inside, 1.0, -1.0)
        return Field(self.domain, vals,
                     1.0 if self.far_below else -1.0,
                     1.0 if self.far_above else -1.0)

    def unrolled(self, rect) -> np.ndarray:
        """Mask values over an absolute cell-index rectangle."""
        d = self.domain
        ip0, ip1, it0, it1 = rect
        ips = np.arange(ip0, ip1)
        its = np.arange(it0, it1)
        cols = np.mod(ips, d.n_p)
        out = np.empty((ips.size, its.size), dtype=bool)
        inside_rows = (its >= 0) & (its < d.n_t)
        out[:, ~inside_rows] = np.where(its[~inside_rows] < 0,
                                        self.far_below, self.far_above)[None, :]
        out[:, inside_rows] = self.inside[np.ix_(cols, its[inside_rows])]
        return out

    def dump_csv(self, path) -> None:
        d = self.domain
        xy = d.world_centers().reshape(-1, d.dim)
        flags = self.inside.reshape(-1).astype(int)
        with open(path, "w") as f:
            f.write(("x1,inside\n" if d.dim == 1 else "x1,x2,inside\n"))
            for row, flag in zip(xy, flags):
                coords = ",".join(f"{c:.17g}" for c in row)
                f.write(f"{coords},{flag}\n")


def level_mask(field: Field, eta: float, mode: str = "above") -> SetMask:
    """Strict-inequality level set {u > eta}, {u < eta} or band {|u| < eta}."""
    if not -1.0 < eta < 1.0 and mode != "band":
        raise GeometryError("eta must lie in (-1, 1)")
    u = field.values
    if mode == "above":
        return SetMask(field.domain, u > eta,
                       field.far_below > eta, field.far_above > eta)
    if mode == "below":
        return SetMask(field.domain, u < eta,
                       field.far_below < eta, field.far_above < eta)
    if mode == "band":
        return SetMask(field.domain, np.abs(u) < eta,
                       abs(field.far_below) < eta, abs(field.far_above) < eta)
    raise GeometryError(f"unknown mode {mode!r}")


def _rect_cover(domain: StripDomain, center, radius: float) -> tuple:
    p0, t0 = center
    h = domain.h
    it0 = int(math.floor((t0 - radius - domain.t_lo) / h)) - 1
    it1 = int(math.ceil((t0 + radius - domain.t_lo) / h)) + 1
    if domain.dim == 1:
        return (0, 1, it0, it1)
    ip0 = int(math.floor((p0 - radius) / h)) - 1
    ip1 = int(math.ceil((p0 + radius) / h)) + 1
    return (ip0, ip1, it0, it1)


def _rect_grids(domain: StripDomain, rect):
    ips = np.arange(rect[0], rect[1])
    its = np.arange(rect[2], rect[3])
    p = (ips + 0.5) * domain.h
    t = domain.t_lo + (its + 0.5) * domain.h
    return np.meshgrid(p, t, indexing="ij")


def ball_count(mask: SetMask, center, radius: float) -> int:
    """Number of mask cells with center inside the ball (periodic images
    and far-field cells included)."""
    rect = _rect_cover(mask.domain, center, radius)
    P, T = _rect_grids(mask.domain, rect)
    inball = (P - center[0]) ** 2 + (T - center[1]) ** 2 < radius ** 2
    return int(np.count_nonzero(mask.unrolled(rect) & inball))


def density_profile(mask: SetMask, center, radii, xi: float | None = None) -> list:
    """Rows (R, |mask ∩ B_R| / R^n, tag) for each requested radius."""
    d = mask.domain
    rows = []
    for R in radii:
        tags = []
        if center[1] - R < d.t_lo or center[1] + R > d.t_hi:
            tags.append("exceeds-slab")
        if xi is not None and R > xi / 3.0:
            tags.append("R>xi/3")
        val = ball_count(mask, center, R) * d.cell_volume / R ** d.dim
        rows.append((float(R), float(val), "+".join(tags) if tags else "ok"))
    return rows


def interface_profile(field: Field, theta: float, center, radii,
                      xi: float | None = None) -> list:
    """Rows (R, |{|u| < theta} ∩ B_R| / R^(n-1), tag)."""
    band = level_mask(field, theta, "band")
    d = field.domain
    rows = []
    for R in radii:
        tags = []
        if center[1] - R < d.t_lo or center[1] + R > d.t_hi:
            tags.append("exceeds-slab")
        if xi is not None and R > xi:
            tags.append("R>xi")
        val = ball_count(band, center, R) * d.cell_volume / R ** (d.dim - 1)
        rows.append((float(R), float(val), "+".join(tags) if tags else "ok"))
    return rows


def boundary_cells(mask: SetMask, rect) -> np.ndarray:
    """Discrete boundary on a rectangle: cells with an axis neighbor in the
    other phase (both sides of the seam)."""
    grid = mask.unrolled((rect[0] - 1, rect[1] + 1, rect[2] - 1, rect[3] + 1))
    core = grid[1:-1, 1:-1]
    differs = np.zeros_like(core)
    for ax, shift in ((0, 1), (0, -1), (1, 1), (1, -1)):
        neigh = np.roll(grid, shift, axis=ax)[1:-1, 1:-1]
        differs |= neigh != core
    return differs


def grid_boundary_count(mask: SetMask, cube, k: int,
                        c_star: float | None = None) -> tuple:
    """Number of subcubes of a k^n partition meeting both phases.

    ``cube`` is (corner, r) with the corner in frame coordinates.  Returns
    (count, passed) where passed compares against c_star * k^(n-1) when a
    threshold constant is supplied (and is None otherwise).
    """
    corner, r = cube
    d = mask.domain
    if r / k < d.h:
        raise GeometryError(
            f"subcube side {r / k} must be at least one cell h={d.h}")
    h = d.h
    it0 = int(math.floor((corner[1] - d.t_lo) / h))
    it1 = int(math.ceil((corner[1] + r - d.t_lo) / h))
    ip0 = int(math.floor(corner[0] / h))
    ip1 = int(math.ceil((corner[0] + r) / h))
    if d.dim == 1:
        ip0, ip1 = 0, 1
    rect = (ip0, ip1, it0, it1)
    grid = mask.unrolled(rect)
    P, T = _rect_grids(d, rect)
    inx = (P >= corner[0]) & (P < corner[0] + r) if d.dim == 2 else np.ones_like(P, bool)
    iny = (T >= corner[1]) & (T < corner[1] + r)
    incube = inx & iny
    sub_p = np.clip(((P - corner[0]) / (r / k)).astype(int), 0, k - 1)
    sub_t = np.clip(((T - corner[1]) / (r / k)).astype(int), 0, k - 1)
    has_in = np.zeros((k, k), dtype=bool)
    has_out = np.zeros((k, k), dtype=bool)
    sel = incube
    np.logical_or.at(has_in, (sub_p[sel & grid], sub_t[sel & grid]), True)
    np.logical_or.at(has_out, (sub_p[sel & ~grid], sub_t[sel & ~grid]), True)
    count = int(np.count_nonzero(has_in & has_out))
    passed = None if c_star is None else count >= c_star * k ** (d.dim - 1)
    return count, passed


def boundary_cube_family(mask: SetMask, cube, k: int) -> list:
    """Non-overlapping side-r/k cubes centered at discrete boundary cells.

    Mixed subcubes are thinned to a single residue class of the 3x3 index
    pattern (the largest one), which keeps at least a ninth of them and
    guarantees disjointness after recentering; all returned cubes lie in
    the doubled open cube.
    """
    corner, r = cube
    d = mask.domain
    if r / k < d.h:
        raise GeometryError("subcube side must be at least one cell")
    h = d.h
    it0 = int(math.floor((corner[1] - d.t_lo) / h))
    it1 = int(math.ceil((corner[1] + r - d.t_lo) / h))
    ip0 = int(math.floor(corner[0] / h))
    ip1 = int(math.ceil((corner[0] + r) / h))
    rect = (ip0, ip1, it0, it1)
    grid = mask.unrolled(rect)
    P, T = _rect_grids(d, rect)
    bcells = boundary_cells(mask, rect)
    incube = ((P >= corner[0]) & (P < corner[0] + r)
              & (T >= corner[1]) & (T < corner[1] + r))
    sub_p = np.clip(((P - corner[0]) / (r / k)).astype(int), 0, k - 1)
    sub_t = np.clip(((T - corner[1]) / (r / k)).astype(int), 0, k - 1)

    # mixed subcubes and one boundary-cell representative for each
    reps = {}
    sel = incube & bcells
    for i, j in zip(*np.nonzero(sel)):
        key = (int(sub_p[i, j]), int(sub_t[i, j]))
        if key not in reps:
            reps[key] = (float(P[i, j]), float(T[i, j]))
    mixed = {}
    selin = incube & grid
    selout = incube & ~grid
    has_in = np.zeros((k, k), dtype=bool)
    has_out = np.zeros((k, k), dtype=bool)
    np.logical_or.at(has_in, (sub_p[selin], sub_t[selin]), True)
    np.logical_or.at(has_out, (sub_p[selout], sub_t[selout]), True)
    for a, b in zip(*np.nonzero(has_in & has_out)):
        key = (int(a), int(b))
        if key in reps:
            mixed[key] = reps[key]

    best = []
    for ra in range(3):
        for rb in range(3):
            cls = [(key, c) for key, c in mixed.items()
                   if key[0] % 3 == ra and key[1] % 3 == rb]
            if len(cls) > len(best):
                best = cls
    side = r / k
    return [{"center": c, "side": side, "subcube": key} for key, c in best]


def clean_ball_search(field: Field, theta: float, center, R: float) -> dict:
    """Largest phase-pure inscribed balls inside B_R for both phases."""
    d = field.domain
    rect = _rect_cover(d, center, R)
    P, T = _rect_grids(d, rect)
    dist_to_edge = R - np.hypot(P - center[0], T - center[1])
    inball = dist_to_edge > 0.0
    out = {}
    for tag, mode in (("plus", "above"), ("minus", "below")):
        mask = level_mask(field, theta if tag == "plus" else -theta, mode)
        grid = mask.unrolled(rect)
        if not np.any(grid & inball):
            out[tag] = {"radius": 0.0, "center": None}
            continue
        # distance from each phase cell to the nearest non-phase cell center
        edt = ndimage.distance_transform_edt(grid, sampling=d.h)
        score = np.minimum(edt, dist_to_edge)
        score[~(grid & inball)] = -np.inf
        i, j = np.unravel_index(int(np.argmax(score)), score.shape)
        out[tag] = {"radius": float(score[i, j]),
                    "center": (float(P[i, j]), float(T[i, j]))}
    return out


def interface_width(field: Field, theta: float) -> float:
    """Extent along the strip normal of the band {|u| < theta}."""
    band = np.abs(field.values) < theta
    cols = np.any(band, axis=0)
    if not cols.any():
        return 0.0
    t = field.domain.t_centers()[cols]
    return float(t.max() - t.min())


def symmetric_difference_measure(mask_a: SetMask, mask_b: SetMask) -> float:
    if mask_a.domain is not mask_b.domain and mask_a.domain != mask_b.domain:
        raise GeometryError("masks live on different domains")
    return (float(np.count_nonzero(mask_a.inside != mask_b.inside))
            * mask_a.domain.cell_volume)
