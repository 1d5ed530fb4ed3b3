"""Text snapshots of potentials and node masks.

Snapshot layout (one item per line, floats at 17 significant digits so the
round trip is bit-exact)::

    mhessian-snapshot 1
    carrier radial|grid
    domain ball|box
    n <int>
    resolution <int>
    rho1 <float>              (radial carrier: squared outer radius)
    radius <float>            (grid on a ball)
    extents <f> <f> ...       (grid on a box)
    dirichlet 0|1             (grid)
    values <count>
    <value>
    ...

Node masks are plain text with one 0/1 per node in the same order.
"""

from __future__ import annotations

import numpy as np

from mhessian.fields import Domain, GridPotential, RadialGrid, RadialPotential, make_grid

MAGIC = "mhessian-snapshot 1"


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def snapshot_text(u) -> str:
    c = u.carrier
    radial = isinstance(u, RadialPotential)
    dom = c.domain
    lines = [
        MAGIC,
        f"carrier {'radial' if radial else 'grid'}",
        f"domain {dom.kind}",
        f"n {dom.n}",
        f"resolution {c.points if radial else c.shape[0]}",
    ]
    if radial:
        lines.append(f"rho1 {_fmt(c.rho1)}")
    elif dom.kind == "ball":
        lines.append(f"radius {_fmt(dom.radius)}")
    else:
        lines.append("extents " + " ".join(_fmt(e) for e in dom.extents))
    if not radial:
        lines.append(f"dirichlet {int(u.dirichlet)}")
    vals = np.asarray(u.values, dtype=float).ravel()
    lines.append(f"values {vals.size}")
    lines.extend(_fmt(v) for v in vals)
    return "\n".join(lines) + "\n"


def save_snapshot(u, path) -> None:
    with open(path, "w") as fh:
        fh.write(snapshot_text(u))


def parse_snapshot(text: str):
    lines = text.splitlines()
    if not lines or lines[0].strip() != MAGIC:
        raise ValueError("not a snapshot file (bad header)")
    head = {}
    i = 1
    while i < len(lines):
        key, _, rest = lines[i].partition(" ")
        i += 1
        if key == "values":
            count = int(rest)
            break
        head[key] = rest.strip()
    else:
        raise ValueError("snapshot has no values section")
    vals = np.array([float(x) for x in lines[i : i + count]])
    if vals.size != count:
        raise ValueError(f"snapshot truncated: expected {count} values, found {vals.size}")
    n = int(head["n"])
    res = int(head["resolution"])
    if head["carrier"] == "radial":
        return RadialPotential(RadialGrid(n, float(head["rho1"]), res), vals)
    if head["domain"] == "ball":
        dom = Domain.ball(n, float(head["radius"]))
    else:
        dom = Domain.box(n, tuple(float(x) for x in head["extents"].split()))
    carrier = make_grid(dom, res)
    return GridPotential(carrier, vals.reshape(carrier.shape), dirichlet=head.get("dirichlet", "1") == "1")


def load_snapshot(path):
    with open(path) as fh:
        return parse_snapshot(fh.read())


def load_mask(path, carrier) -> np.ndarray:
    vals = np.loadtxt(path, dtype=int, ndmin=1)
    if vals.size != int(np.prod(carrier.shape)):
        raise ValueError(f"mask has {vals.size} entries, carrier has {int(np.prod(carrier.shape))} nodes")
    if np.any((vals != 0) & (vals != 1)):
        raise ValueError("mask entries must be 0 or 1")
    return vals.reshape(carrier.shape).astype(bool)


def save_mask(mask, path) -> None:
    np.savetxt(path, np.asarray(mask, dtype=int).ravel(), fmt="%d")
