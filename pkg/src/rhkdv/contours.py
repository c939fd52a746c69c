"""Oriented, point-symmetric contour systems and collocation grids.

The deformed contour consists of: the two band segments outside the local
discs, the middle segment outside the discs (split where the lenses cross
it), truncated lens arcs through +-ib, polyline loops around the bands, and
the square disc boundaries around +-ia split at the eight junctions.

Every arc is a straight segment. The lower half of the system is the point
mirror (k -> -k, same parameter order) of the upper half, so mirrored arcs
carry exactly mirrored node sets and the symmetry operator of the integral
equation becomes a pure node permutation. With that convention the plus
side of an arc (left of the direction of travel) maps to the plus side of
its mirror image.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .specfun import gauss_legendre


@dataclass(frozen=True)
class Arc:
    """A straight oriented arc from za to zb.

    kind is one of band / middle / lens / loop / disc; the plus side is the
    left of the za -> zb direction (for the cut segments, oriented downward
    in the upper half plane, this is Re k > 0).
    """
    za: complex
    zb: complex
    kind: str
    label: str
    is_master: bool

    @property
    def length(self):
        return abs(self.zb - self.za)

    def point(self, s):
        return self.za + np.asarray(s) * (self.zb - self.za)


@dataclass(frozen=True)
class Contour:
    """Arc list plus the k -> -k pairing and geometry metadata."""
    arcs: tuple
    pairing: dict           # arc index -> index of its point-mirror image
    junctions: tuple        # tabulated intersection / split points
    geometry: dict          # a, b, c, r, d, L, cap height, truncation data

    def mirror_index(self, i):
        return self.pairing[i]

    def to_polylines(self):
        """JSON-ready dump of the arcs for plotting."""
        return {
            "arcs": [
                {"label": a.label, "kind": a.kind,
                 "points": [[a.za.real, a.za.imag], [a.zb.real, a.zb.imag]]}
                for a in self.arcs
            ],
            "geometry": {k: v for k, v in self.geometry.items()},
        }

    def to_json(self):
        return json.dumps(self.to_polylines(), sort_keys=True)


def _lens_truncation(pd, truncation_tol, t_ref):
    """Half-length L of the lens arcs such that the lens jump entry is
    below truncation_tol at the endpoints for all t >= t_ref.

    Uses |e^{2itg}| ~ exp(-t(24 x^2 b - 8 b^3 + 24 xi b)) on Im k = b (the
    large-k matching of g), with a 30 percent margin; |R| <= 1.
    """
    b, xi = pd.b, pd.xi
    need = -math.log(truncation_tol) / t_ref + 8.0 * b ** 3 - 24.0 * xi * b
    L = math.sqrt(max(need, 0.0) / (24.0 * b))
    return max(1.3 * L, 2.0 * pd.c)


def build_sigma_tilde(pd, truncation_tol=1e-16, t_ref=50.0,
                      band_levels=0, band_ratio=0.15):
    """Build the deformed contour for the given phase data.

    Orientations: cut segments run downward in the upper half plane (plus
    side Re k > 0); lenses run outward from +-ib; loops run counterclockwise
    around the upper band; disc boundaries counterclockwise (plus side is
    the disc interior), the lower ones inheriting the orientation of their
    point mirrors.

    band_levels > 0 splits the band segment into geometrically graded
    panels accumulating at the band edge ic (grading factor band_ratio).
    Densities behave like a -1/4 power there, so composite panels are
    needed for tight L2 accuracy of the solved boundary values.
    """
    a, b, c, r = pd.a, pd.b, pd.c, pd.r
    if not 0.0 < b < a:
        raise ValueError("lens height b = %g must lie in (0, a)" % b)
    rmax = min(a - b, c - a)
    if not 0.0 < r < rmax:
        raise ValueError("disc half-width r = %g conflicts with the gaps; "
                         "suggest r = %g" % (r, 0.5 * rmax))
    d = r / math.sqrt(3.0)   # exit abscissa of the 60/120 degree stub rays
    cap = c + d
    L = _lens_truncation(pd, truncation_tol, t_ref)

    ia, ic = 1j * a, 1j * c
    if not (band_levels >= 0 and 0.0 < band_ratio < 1.0):
        raise ValueError("band_levels must be >= 0 and band_ratio in (0,1)")
    ell = c - (a + r)
    # keep the innermost breakpoint well above rounding scale so no node
    # collides with the band edge in floating point
    while band_levels > 0 and ell * band_ratio ** band_levels < 1e-12 * c:
        band_levels -= 1
    band_pts = [ic]
    for j in range(band_levels, 0, -1):
        band_pts.append(1j * (c - ell * band_ratio ** j))
    band_pts.append(1j * (a + r))
    masters = []
    if band_levels == 0:
        masters.append(Arc(ic, 1j * (a + r), "band", "band.U", True))
    else:
        for i in range(len(band_pts) - 1):
            masters.append(Arc(band_pts[i], band_pts[i + 1], "band",
                               "band.U%d" % i, True))
    masters += [
        Arc(1j * (a - r), 1j * b, "middle", "mid.U1", True),
        Arc(1j * b, 0j, "middle", "mid.U2", True),
        Arc(1j * b, L + 1j * b, "lens", "lens.UR", True),
        Arc(-L + 1j * b, 1j * b, "lens", "lens.UL", True),
        Arc(d + 1j * (a + r), d + 1j * cap, "loop", "loop.UR", True),
        Arc(d + 1j * cap, -d + 1j * cap, "loop", "loop.UC", True),
        Arc(-d + 1j * cap, -d + 1j * (a + r), "loop", "loop.UL", True),
    ]
    # square boundary of the upper disc, counterclockwise from the lower
    # right corner, split at the 8 junctions (4 corners, stub-ray exits at
    # x = +-d, and the two cut crossings at x = 0)
    sq = [r - 1j * r, r + 1j * r, d + 1j * r, 1j * r, -d + 1j * r,
          -r + 1j * r, -r - 1j * r, -1j * r, r - 1j * r]
    for j in range(8):
        masters.append(Arc(ia + sq[j], ia + sq[j + 1], "disc",
                           "disc.U%d" % j, True))

    arcs = list(masters)
    pairing = {}
    for i, m in enumerate(masters):
        arcs.append(Arc(-m.za, -m.zb, m.kind,
                        m.label.replace("U", "L", 1), False))
        pairing[i] = len(masters) + i
        pairing[len(masters) + i] = i

    junctions = [z for z in band_pts[1:-1]] \
        + [-z for z in band_pts[1:-1]]
    junctions += [ic, -ic, 1j * (a + r), -1j * (a + r), 1j * (a - r),
                 -1j * (a - r), 1j * b, -1j * b, 0j,
                 d + 1j * (a + r), -d + 1j * (a + r),
                 -d - 1j * (a + r), d - 1j * (a + r),
                 d + 1j * cap, -d + 1j * cap, d - 1j * cap, -d - 1j * cap]
    junctions += [ia + p for p in sq[:-1]] + [-ia - p for p in sq[:-1]]

    geometry = {"a": a, "b": b, "c": c, "r": r, "d": d, "cap": cap,
                "L": L, "truncation_tol": truncation_tol, "t_ref": t_ref}
    return Contour(arcs=tuple(arcs), pairing=pairing,
                   junctions=tuple(junctions), geometry=geometry)


@dataclass(frozen=True)
class CollocationGrid:
    """Per-arc Gauss-Legendre nodes with the global index bookkeeping."""
    contour: Contour
    n_per_arc: int
    nodes: np.ndarray        # complex, all arcs concatenated
    weights: np.ndarray      # complex contour-integral weights
    arc_of: np.ndarray       # int, arc index per node
    starts: np.ndarray       # int, first node index of each arc
    mirror_perm: np.ndarray  # int, node index of the point-mirror node

    @property
    def n_nodes(self):
        return self.nodes.size

    def arc_slice(self, i):
        return slice(self.starts[i], self.starts[i] + self.n_per_arc)

    def master_mask(self):
        m = np.zeros(self.n_nodes, dtype=bool)
        for i, arc in enumerate(self.contour.arcs):
            if arc.is_master:
                m[self.arc_slice(i)] = True
        return m


def collocate(contour, n_per_arc):
    """Composite Gauss-Legendre collocation grid on the contour.

    Mirrored arcs receive exactly mirrored node sets (float negation is
    exact), so the k -> -k permutation is available node-by-node.
    """
    if n_per_arc < 4:
        raise ValueError("need at least 4 nodes per arc")
    nodes, weights, arc_of, starts = [], [], [], []
    pos = 0
    for i, arc in enumerate(contour.arcs):
        z, w = gauss_legendre((arc.za, arc.zb), n_per_arc)
        nodes.append(z)
        weights.append(w)
        arc_of.append(np.full(n_per_arc, i))
        starts.append(pos)
        pos += n_per_arc
    nodes = np.concatenate(nodes)
    weights = np.concatenate(weights)
    arc_of = np.concatenate(arc_of)
    starts = np.asarray(starts)

    mirror_perm = np.empty(nodes.size, dtype=int)
    for i in range(len(contour.arcs)):
        j = contour.pairing[i]
        mirror_perm[starts[i]:starts[i] + n_per_arc] = \
            np.arange(starts[j], starts[j] + n_per_arc)
    # sanity: the pairing really is the point mirror, node by node
    if not np.array_equal(nodes[mirror_perm], -nodes):
        raise ValueError("contour pairing is not an exact point mirror")
    return CollocationGrid(contour=contour, n_per_arc=n_per_arc,
                           nodes=nodes, weights=weights, arc_of=arc_of,
                           starts=starts, mirror_perm=mirror_perm)
