"""Monte-Carlo IoU oracle for random overlapping box pairs.

Boxes are (center, dims, yaw) in a y-down camera frame: center is the
bottom-center, dims are (h, w, l), the length axis points along
(cos yaw, -sin yaw) on the (x, z) ground plane and the box spans [y - h, y].

Samples are stratified-jittered inside box A (1000 x 1000 footprint strata,
100^3 volume strata); the hit fraction in B times A's measure estimates the
intersection.

    python3 gen_iou_oracle.py > iou_oracle.json
"""
import json
import math

import numpy as np

PAIRS = 500
rng = np.random.default_rng(20240611)


def random_box():
    h, w, l = rng.uniform(1.0, 2.0), rng.uniform(0.5, 2.0), rng.uniform(0.5, 5.0)
    return dict(center=[rng.uniform(-10, 10), rng.uniform(1.0, 2.0), rng.uniform(5, 40)],
                dims=[h, w, l], yaw=rng.uniform(-math.pi, math.pi))


def perturb(a):
    h, w, l = (d * rng.uniform(0.6, 1.4) for d in a["dims"])
    c = a["center"]
    reach = 0.5 * (a["dims"][2] + l) * 0.6
    return dict(center=[c[0] + rng.uniform(-reach, reach), c[1] + rng.uniform(-0.8, 0.8),
                        c[2] + rng.uniform(-reach, reach)],
                dims=[h, w, l], yaw=rng.uniform(-math.pi, math.pi))


def jitter(n, dims):
    """Stratified-jittered unit samples, n strata per dimension."""
    grids = np.meshgrid(*[np.arange(n)] * dims, indexing="ij")
    cells = np.stack([g.ravel() for g in grids], axis=1).astype(float)
    return (cells + rng.random(cells.shape)) / n


def to_world(box, lx, lz):
    c, s = math.cos(box["yaw"]), math.sin(box["yaw"])
    return box["center"][0] + c * lx + s * lz, box["center"][2] - s * lx + c * lz


def inside_footprint(box, x, z):
    c, s = math.cos(box["yaw"]), math.sin(box["yaw"])
    dx, dz = x - box["center"][0], z - box["center"][2]
    lx, lz = c * dx - s * dz, s * dx + c * dz
    return (np.abs(lx) <= box["dims"][2] / 2) & (np.abs(lz) <= box["dims"][1] / 2)


def footprint_samples(box, u):
    lx = (u[:, 0] - 0.5) * box["dims"][2]
    lz = (u[:, 1] - 0.5) * box["dims"][1]
    return to_world(box, lx, lz)


def bev_iou(a, b):
    x, z = footprint_samples(a, jitter(1000, 2))
    area_a, area_b = a["dims"][1] * a["dims"][2], b["dims"][1] * b["dims"][2]
    inter = inside_footprint(b, x, z).mean() * area_a
    return inter / (area_a + area_b - inter)


def iou_3d(a, b):
    u = jitter(100, 3)
    x, z = footprint_samples(a, u[:, :2])
    y = a["center"][1] - a["dims"][0] * u[:, 2]
    in_b = inside_footprint(b, x, z) & (y <= b["center"][1]) & (y >= b["center"][1] - b["dims"][0])
    vol = lambda bx: bx["dims"][0] * bx["dims"][1] * bx["dims"][2]
    inter = in_b.mean() * vol(a)
    return inter / (vol(a) + vol(b) - inter)


cases = []
while len(cases) < PAIRS:
    a = random_box()
    b = perturb(a)
    bev = bev_iou(a, b)
    if bev <= 0.0:
        continue
    cases.append(dict(a=a, b=b, bev_iou=bev, iou_3d=iou_3d(a, b)))
print(json.dumps(dict(samples_per_pair=1_000_000, cases=cases), indent=1))
