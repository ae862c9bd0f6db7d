"""Elements, DOF numbering and quadrature for standard and varying-order patches."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nurbs import NurbsPatch
from .refine import ConfigurationError, VoPatch, standard_vo

POLICIES = ("default", "ironing-3x")


@dataclass(frozen=True, eq=False)
class Element:
    """One knot box of a (VO) patch.

    ``index`` are the (u, v) element indices, ``conn`` the body-local control
    point indices in the order returned by :meth:`VoPatch.element_basis`.
    """

    index: tuple[int, int]
    box: tuple[float, float, float, float]
    conn: np.ndarray
    kind: str  # "bulk" or "contact-layer"
    orders: tuple[int, int]  # (p along u, p along v) used for volume quadrature
    layer_order: int  # order of the 1D layer basis (contact-layer elements)

    @property
    def n_cp(self) -> int:
        return len(self.conn)

    @property
    def measure(self) -> float:
        x0, x1, y0, y1 = self.box
        return (x1 - x0) * (y1 - y0)


def gauss_rule(n: int, a: float = -1.0, b: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    h = 0.5 * (b - a)
    return a + h * (x + 1.0), h * w


def quadrature_for(element: Element, policy: str = "default"):
    """Volume rule ``(xi, eta, w)`` on the element box (weights in parameter space)."""
    if policy not in POLICIES:
        raise ConfigurationError(f"unknown quadrature policy {policy!r}")
    x0, x1, y0, y1 = element.box
    xu, wu = gauss_rule(element.orders[0] + 1, x0, x1)
    xv, wv = gauss_rule(element.orders[1] + 1, y0, y1)
    XI, ETA = np.meshgrid(xu, xv, indexing="ij")
    return XI.ravel(), ETA.ravel(), np.outer(wu, wv).ravel()


def surface_rule(element: Element, policy: str = "default"):
    """1D rule along the contact layer of a contact-layer element."""
    if policy not in POLICIES:
        raise ConfigurationError(f"unknown quadrature policy {policy!r}")
    if element.kind != "contact-layer":
        raise ValueError("surface rule requested for a bulk element")
    n = element.layer_order + 1
    if policy == "ironing-3x":
        n *= 3
    return gauss_rule(n, element.box[0], element.box[1])


def build_elements(patch) -> tuple[list[Element], "DofMap"]:
    """Element list (row-major: contact row first) and a single-body DOF map."""
    vp = patch if isinstance(patch, VoPatch) else standard_vo(patch)
    ne_u, ne_v = vp.n_elements
    out = []
    for b in range(ne_v):
        for a in range(ne_u):
            contact = b == 0
            pu = max(vp.pc, vp.p1) if contact else vp.p1
            out.append(Element((a, b), vp.element_box(a, b), vp.element_connectivity(a, b),
                               "contact-layer" if contact else "bulk", (pu, vp.p2), vp.pc))
    return out, DofMap([vp.n_cp])


@dataclass
class DofMap:
    """Dense global numbering: body ``k`` control point ``i`` -> DOFs ``2*(off_k+i)+{0,1}``."""

    n_cp: list[int]
    fixed: dict[int, float] = field(default_factory=dict)

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.n_cp)[:-1]]).astype(int)

    @property
    def n_dof(self) -> int:
        return 2 * int(sum(self.n_cp))

    def dofs(self, body: int, cps, comp=None) -> np.ndarray:
        g = self.offsets[body] + np.asarray(cps, dtype=int)
        if comp is None:
            return np.stack([2 * g, 2 * g + 1], axis=-1).reshape(*g.shape[:-1], -1) \
                if g.ndim else np.array([2 * g, 2 * g + 1])
        return 2 * g + comp

    def free(self, dirichlet) -> np.ndarray:
        mask = np.ones(self.n_dof, bool)
        mask[np.asarray(list(dirichlet), dtype=int)] = False
        return np.flatnonzero(mask)


# --------------------------------------------------------------------------
# precomputed integration data for vectorised assembly

@dataclass(frozen=True, eq=False)
class ElementGroup:
    """Elements sharing a connectivity length, with reference-configuration data."""

    conn: np.ndarray  # (E, ne)
    dNdX: np.ndarray  # (E, q, ne, 2) reference gradients
    wdV: np.ndarray  # (E, q) reference volume weights
    R: np.ndarray  # (E, q, ne)


def integration_groups(vp: VoPatch, elements: list[Element]) -> list[ElementGroup]:
    X = vp.control_points()
    groups: dict[tuple[int, int], list] = {}
    for el in elements:
        xi, eta, w = quadrature_for(el)
        R, dR = vp.element_basis(el.index[0], el.index[1], xi, eta)
        Jac = np.einsum("qdk,kj->qjd", dR, X[el.conn])  # dX_j/dxi_d
        det = np.linalg.det(Jac)
        if np.any(det <= 0):
            raise ValueError(f"non-positive geometric Jacobian in element {el.index}")
        dNdX = np.einsum("qdk,qdj->qkj", dR, np.linalg.inv(Jac))  # dN/dX_j = dN/dxi_d dxi_d/dX_j
        groups.setdefault((len(el.conn), len(xi)), []).append((el.conn, dNdX, w * det, R))
    out = []
    for items in groups.values():
        c, d, w, r = zip(*items)
        out.append(ElementGroup(np.array(c), np.array(d), np.array(w), np.array(r)))
    return out
