import numpy as np

from vocontact.contact import ContactPair, ContactSurface, RigidLine, outward_sign
from vocontact.mechanics import Material
from vocontact.problems import rectangle_patch
from vocontact.refine import build_vo_patch, parse_plan
from vocontact.solver import Body, DirichletBC, Model


def block(x0, x1, y0, y1, plan="N2", parts=(4, 2), side="eta0"):
    return build_vo_patch(rectangle_patch(x0, x1, y0, y1),
                          parse_plan(plan, subdivisions=parts, order_v=2, contact_side=side))


def block_on_line(depth=0.02, slide=0.2, n_down=4, n_slide=8, mu=0.3, plan="N2", eps=1e3):
    """Elastic block pressed onto and dragged along the rigid line y = 0."""
    vp = block(0.0, 1.0, 0.0, 0.5, plan)
    top = vp.edge_indices("eta1")
    k = np.arange(1, n_down + n_slide + 1)
    hy = -depth * np.minimum(k, n_down) / n_down
    hx = slide * np.clip(k - n_down, 0, None) / max(n_slide, 1)
    bcs = [DirichletBC(0, top, 0, hx), DirichletBC(0, top, 1, hy)]
    s = ContactSurface(vp.layer, 0, outward_sign(vp))
    pair = ContactPair(s, RigidLine(0.0, 1.0), eps, eps if mu > 0 else 0.0, mu)
    return Model([Body(vp, Material(10.0, 0.3), "block")], bcs, [pair], len(k),
                 {"top": (0, top)})


def two_blocks(parts_up=(3, 2), parts_lo=(4, 2), depth=0.01, n_steps=2, plan="N2", eps=1e4,
               mu=0.0):
    """Upper block (slave, bottom face) pressed onto a lower block (master, top face).

    Both bodies can expand laterally, so the exact state is uniform
    uniaxial compression with a constant contact pressure.
    """
    up = block(0.0, 1.0, 0.5, 1.0, plan, parts_up, "eta0")
    lo = block(0.0, 1.0, 0.0, 0.5, plan, parts_lo, "eta1")
    top, bot = up.edge_indices("eta1"), lo.edge_indices("eta1")
    k = np.arange(1, n_steps + 1)
    z = np.zeros(n_steps)
    # one lateral support per body, both at x = 0
    left = [c[np.argmin(vp.control_points()[c, 0])] for vp, c in ((up, top), (lo, bot))]
    bcs = [DirichletBC(0, top, 1, -depth * k / n_steps), DirichletBC(0, left[:1], 0, z),
           DirichletBC(1, bot, 1, z), DirichletBC(1, left[1:], 0, z)]
    pair = ContactPair(ContactSurface(up.layer, 0, outward_sign(up)),
                       ContactSurface(lo.layer, 1, outward_sign(lo)), eps, eps if mu else 0.0, mu)
    return Model([Body(up, Material(10.0, 0.3), "upper"), Body(lo, Material(10.0, 0.3), "lower")],
                 bcs, [pair], n_steps, {"top": (0, top), "bottom": (1, bot)})
