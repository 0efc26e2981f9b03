"""Level-set interfaces and the cut decomposition of a background mesh.

Subdomains are numbered ``0 .. k`` for ``k`` interfaces.  Every interface
has a *side value* that is positive on the side of the lower-numbered
subdomain; for a single interface, subdomain 0 plays the role of Omega_1 and
interface normals point from it into subdomain 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import GeometryError
from .mesh import TriangleMesh
from .quadrature import signed_areas

DEFAULT_SNAP_TOL = 1e-10


@dataclass(frozen=True)
class LevelSetInterface:
    """Straight line ``x = offset`` or circle of squared radius ``radius2``.

    The linear interface separates ``x < offset`` (lower subdomain) from
    ``x > offset``; the circular one separates its interior (lower subdomain)
    from the exterior.
    """

    kind: str
    offset: float = 0.0
    center: tuple[float, float] = (0.5, 0.5)
    radius2: float = 0.0

    def __post_init__(self):
        if self.kind not in ("linear", "circular"):
            raise ValueError(f"unknown interface kind {self.kind!r}")
        if self.kind == "circular" and self.radius2 <= 0.0:
            raise ValueError("circular interface needs a positive squared radius")

    @classmethod
    def linear(cls, offset: float) -> "LevelSetInterface":
        return cls("linear", offset=float(offset))

    @classmethod
    def circular(cls, center, radius2: float) -> "LevelSetInterface":
        return cls("circular", center=(float(center[0]), float(center[1])), radius2=float(radius2))

    def level_set(self, x, y):
        """The defining function: ``x - c`` or ``r0^2 - |x - c|^2``."""
        if self.kind == "linear":
            return np.asarray(x, dtype=float) - self.offset
        return self.radius2 - ((np.asarray(x) - self.center[0]) ** 2 + (np.asarray(y) - self.center[1]) ** 2)

    def side_value(self, x, y):
        """Signed value, positive on the lower subdomain's side."""
        if self.kind == "linear":
            return self.offset - np.asarray(x, dtype=float)
        return self.level_set(x, y)

    def edge_root(self, p, q, vp: float, vq: float) -> float:
        """Parameter ``t`` in ``(0, 1)`` of the interface crossing on segment ``p -> q``."""
        if self.kind == "linear":
            return vp / (vp - vq)
        d = np.asarray(q, dtype=float) - p
        w = np.asarray(p, dtype=float) - self.center
        a = d @ d
        b = 2.0 * (d @ w)
        c = w @ w - self.radius2
        disc = max(b * b - 4.0 * a * c, 0.0)
        sq = np.sqrt(disc)
        # numerically stable pair of roots
        qq = -0.5 * (b + np.copysign(sq, b))
        roots = [qq / a] + ([c / qq] if qq != 0.0 else [])
        inside = [t for t in roots if 0.0 <= t <= 1.0]
        if not inside:
            return vp / (vp - vq)
        return min(inside, key=lambda t: abs(t - vp / (vp - vq)))


def sort_interfaces(interfaces) -> list:
    """Validate and order interfaces; parallel lines are sorted by offset."""
    interfaces = list(interfaces)
    if len(interfaces) > 1:
        if any(itf.kind != "linear" for itf in interfaces):
            raise GeometryError("multiple interfaces are supported for parallel lines only")
        interfaces.sort(key=lambda itf: itf.offset)
        offs = [itf.offset for itf in interfaces]
        if any(b <= a for a, b in zip(offs, offs[1:])):
            raise GeometryError("interfaces must be pairwise disjoint")
    return interfaces


@dataclass(frozen=True, eq=False)
class CutDecomposition:
    """Classification of the elements of one mesh with respect to the interfaces.

    Cut element ``c`` (an index into the ``cut_*`` arrays) is element
    ``cut_elements[c]``.  Its side 0 lies in subdomain ``cut_domains[c, 0]``
    (positive side value of interface ``cut_interface[c]``) and side 1 in
    ``cut_domains[c, 1]``.  The parts are tiled by the sub-triangles ``s`` with
    ``sub_cut[s] == c`` and ``sub_side[s] == side``.
    """

    mesh: TriangleMesh
    interfaces: list
    n_subdomains: int
    element_domain: np.ndarray  # (ne,) subdomain of uncut elements, -1 if cut
    cut_elements: np.ndarray  # (nc,)
    cut_interface: np.ndarray  # (nc,)
    cut_domains: np.ndarray  # (nc, 2)
    segments: np.ndarray  # (nc, 2, 2) interface chord endpoints
    normals: np.ndarray  # (nc, 2) unit normal from side 0 into side 1
    part_areas: np.ndarray  # (nc, 2)
    sub_triangles: np.ndarray  # (ns, 3, 2), positively oriented
    sub_cut: np.ndarray  # (ns,)
    sub_side: np.ndarray  # (ns,)

    @property
    def n_cut(self) -> int:
        return len(self.cut_elements)

    @cached_property
    def cut_index(self) -> np.ndarray:
        """Map element id -> cut index (or -1)."""
        idx = np.full(self.mesh.n_elements, -1, dtype=np.int64)
        idx[self.cut_elements] = np.arange(self.n_cut)
        return idx

    @cached_property
    def segment_lengths(self) -> np.ndarray:
        d = self.segments[:, 1] - self.segments[:, 0]
        return np.hypot(d[:, 0], d[:, 1])

    def elements_of(self, subdomain: int) -> np.ndarray:
        """All elements with a positive-measure part in ``subdomain`` (T_i)."""
        uncut = np.flatnonzero(self.element_domain == subdomain)
        cut = self.cut_elements[(self.cut_domains == subdomain).any(axis=1)]
        return np.sort(np.concatenate([uncut, cut]))

    def part(self, cut: int, side: int) -> np.ndarray:
        """Sub-triangles tiling one side of a cut element, ``(m, 3, 2)``."""
        return self.sub_triangles[(self.sub_cut == cut) & (self.sub_side == side)]

    @cached_property
    def ghost_faces(self) -> list:
        """Per subdomain: ``(n_faces, 3)`` rows of (edge id, element, element).

        A face qualifies when it is an edge of a cut element with a part in the
        subdomain and the element across it also belongs to that subdomain's
        mesh (boundary faces of the subdomain mesh are excluded).
        """
        edges = self.mesh.edges
        out = []
        for i in range(self.n_subdomains):
            in_ti = np.zeros(self.mesh.n_elements, dtype=bool)
            in_ti[self.elements_of(i)] = True
            cut_i = self.cut_elements[(self.cut_domains == i).any(axis=1)]
            cand = np.unique(edges.of_element[cut_i].ravel())
            left, right = edges.left[cand], edges.right[cand]
            ok = (right >= 0)
            ok[ok] &= in_ti[left[ok]] & in_ti[right[ok]]
            out.append(np.column_stack([cand[ok], left[ok], right[ok]]))
        return out


def _snapped_values(mesh: TriangleMesh, interfaces, snap_tol: float) -> np.ndarray:
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    vals = np.array([itf.side_value(x, y) for itf in interfaces]).reshape(len(interfaces), -1)
    vals[np.abs(vals) < snap_tol * mesh.h] = 0.0
    return vals


def _cut_triangle(xy: np.ndarray, vids: np.ndarray, v: np.ndarray, interface) -> tuple:
    """Split one triangle by the chord between its two interface crossings.

    Walks the (counter-clockwise) boundary inserting edge crossings; the
    points with side value >= 0 form the convex positive part and those with
    value <= 0 the negative part.  Returns the chord and both fan
    triangulations.
    """
    ring, ring_val = [], []
    for a, b in ((0, 1), (1, 2), (2, 0)):
        ring.append(xy[a])
        ring_val.append(v[a])
        if v[a] * v[b] < 0.0:
            # canonical direction (lower vertex id first) makes neighbours agree
            p, q = (a, b) if vids[a] < vids[b] else (b, a)
            t = interface.edge_root(xy[p], xy[q], v[p], v[q])
            ring.append(xy[p] + t * (xy[q] - xy[p]))
            ring_val.append(0.0)
    ring_val = np.array(ring_val)
    chord = [p for p, s in zip(ring, ring_val) if s == 0.0]
    if len(chord) != 2:
        raise GeometryError(f"expected two interface points, found {len(chord)}")

    def fan(mask):
        # rotate so the run of selected points is contiguous from index 0
        m = len(ring)
        start = next(k for k in range(m) if mask[k] and not mask[k - 1])
        poly = [ring[(start + k) % m] for k in range(m) if mask[(start + k) % m]]
        return [np.array([poly[0], poly[k], poly[k + 1]]) for k in range(1, len(poly) - 1)]

    return np.array(chord), fan(ring_val >= 0.0), fan(ring_val <= 0.0)


def classify_and_cut(mesh: TriangleMesh, interfaces, snap_tol: float = DEFAULT_SNAP_TOL) -> CutDecomposition:
    """Classify elements against the interfaces and sub-triangulate cut elements.

    Vertices within ``snap_tol * h`` of an interface are snapped onto it before
    classification.  Each interface is linearized per element to the chord
    between its edge crossings.
    """
    if snap_tol <= 0.0:
        raise ValueError("snap_tol must be positive")
    interfaces = sort_interfaces(interfaces)
    n_itf = len(interfaces)
    ne = mesh.n_elements
    if n_itf == 0:
        empty2 = np.zeros((0, 2), dtype=np.int64)
        return CutDecomposition(
            mesh, [], 1, np.zeros(ne, dtype=np.int64), np.zeros(0, dtype=np.int64),
            np.zeros(0, dtype=np.int64), empty2, np.zeros((0, 2, 2)), np.zeros((0, 2)),
            np.zeros((0, 2)), np.zeros((0, 3, 2)), np.zeros(0, dtype=np.int64),
            np.zeros(0, dtype=np.int64),
        )
    vals = _snapped_values(mesh, interfaces, snap_tol)
    ev = vals[:, mesh.triangles]  # (n_itf, ne, 3)
    pos = (ev > 0).any(axis=2)
    neg = (ev < 0).any(axis=2)
    cut_by = pos & neg
    n_cuts = cut_by.sum(axis=0)
    if np.any(n_cuts > 1):
        bad = int(np.flatnonzero(n_cuts > 1)[0])
        raise GeometryError(f"element {bad} is intersected by more than one interface")
    negative_of = (neg & ~pos).sum(axis=0)  # interfaces the element lies wholly beyond
    is_cut = n_cuts == 1
    element_domain = np.where(is_cut, -1, negative_of)

    cut_elements = np.flatnonzero(is_cut)
    cut_interface = np.argmax(cut_by[:, cut_elements], axis=0) if len(cut_elements) else np.zeros(0, dtype=np.int64)
    lower = negative_of[cut_elements]
    cut_domains = np.column_stack([lower, lower + 1])

    segments, normals, areas = [], [], []
    subs, sub_cut, sub_side = [], [], []
    coords = mesh.coords
    for c, (e, l) in enumerate(zip(cut_elements, cut_interface)):
        xy = coords[e]
        v = ev[l, e]
        seg, ptris, ntris = _cut_triangle(xy, mesh.triangles[e], v, interfaces[l])
        d = seg[1] - seg[0]
        nrm = np.array([d[1], -d[0]]) / np.hypot(d[0], d[1])
        probe = xy[np.argmin(v)] - seg[0]  # a vertex strictly on the negative side
        if nrm @ probe < 0.0:
            nrm = -nrm
        segments.append(seg)
        normals.append(nrm)
        areas.append([sum(signed_areas(t) for t in ptris), sum(signed_areas(t) for t in ntris)])
        for side, tris in ((0, ptris), (1, ntris)):
            subs.extend(tris)
            sub_cut.extend([c] * len(tris))
            sub_side.extend([side] * len(tris))

    nc = len(cut_elements)
    return CutDecomposition(
        mesh=mesh,
        interfaces=interfaces,
        n_subdomains=n_itf + 1,
        element_domain=element_domain,
        cut_elements=cut_elements,
        cut_interface=np.asarray(cut_interface, dtype=np.int64),
        cut_domains=cut_domains.astype(np.int64).reshape(nc, 2),
        segments=np.array(segments).reshape(nc, 2, 2),
        normals=np.array(normals).reshape(nc, 2),
        part_areas=np.array(areas, dtype=float).reshape(nc, 2),
        sub_triangles=np.array(subs).reshape(-1, 3, 2),
        sub_cut=np.array(sub_cut, dtype=np.int64),
        sub_side=np.array(sub_side, dtype=np.int64),
    )


def write_decomposition(path, decomp: CutDecomposition) -> None:
    """Dump vertices, triangles and interface chords as plain text.

    Format: a ``vertices N`` header followed by ``x y`` lines, a ``triangles M``
    header followed by ``a b c domain`` lines (domain -1 marks cut elements),
    and a ``segments K`` header followed by ``element x0 y0 x1 y1`` lines.
    """
    mesh = decomp.mesh
    with open(path, "w") as fh:
        fh.write(f"vertices {mesh.n_vertices}\n")
        for x, y in mesh.vertices:
            fh.write(f"{x:.17g} {y:.17g}\n")
        fh.write(f"triangles {mesh.n_elements}\n")
        for (a, b, c), d in zip(mesh.triangles, decomp.element_domain):
            fh.write(f"{a} {b} {c} {d}\n")
        fh.write(f"segments {decomp.n_cut}\n")
        for e, s in zip(decomp.cut_elements, decomp.segments):
            fh.write(f"{e} {s[0, 0]:.17g} {s[0, 1]:.17g} {s[1, 0]:.17g} {s[1, 1]:.17g}\n")
