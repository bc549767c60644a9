#!/usr/bin/env python3
"""Generates scene fixtures, golden hand traces and their expected outcomes.

The expected event logs and final states are produced by a small reference
reducer written here in plain Python (no shared code with the C++ engine).
Scenes use analytic shapes (boxes, spheres) for the reference containment
test, and the traces keep fingertips well away from entity surfaces so the
analytic and tessellated answers agree.

Run from the repository root:  python3 scripts/gen_fixtures.py
"""

import json
import math
import os

ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "fixtures")

PINCH_ENGAGE = 0.02
PINCH_RELEASE = 0.03
MEASURE_START = 0.015
DEGENERATE_GRAB = 1e-4
MIN_SCALE, MAX_SCALE = 1e-4, 1e4


# ---------------------------------------------------------------------------
# small vector helpers
# ---------------------------------------------------------------------------

def add(a, b): return [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
def sub(a, b): return [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
def mul(a, s): return [a[0] * s, a[1] * s, a[2] * s]
def dotp(a, b): return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
def crossp(a, b): return [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
def length(a): return math.sqrt(dotp(a, a))
def dist(a, b): return length(sub(a, b))


def qmul(p, q):
    pw, px, py, pz = p
    qw, qx, qy, qz = q
    return [pw * qw - px * qx - py * qy - pz * qz,
            pw * qx + px * qw + py * qz - pz * qy,
            pw * qy - px * qz + py * qw + pz * qx,
            pw * qz + px * qy - py * qx + pz * qw]


def qrot(q, v):
    # explicit rotation matrix from the quaternion
    w, x, y, z = q
    m = [[1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
         [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
         [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)]]
    return [sum(m[i][j] * v[j] for j in range(3)) for i in range(3)]


def qconj(q): return [q[0], -q[1], -q[2], -q[3]]


def roty(angle, v):
    c, s = math.cos(angle), math.sin(angle)
    return [c * v[0] + s * v[2], v[1], -s * v[0] + c * v[2]]


# ---------------------------------------------------------------------------
# meshes
# ---------------------------------------------------------------------------

def box_mesh(lo, hi):
    x0, y0, z0 = lo
    x1, y1, z1 = hi
    v = [[x0, y0, z0], [x1, y0, z0], [x1, y1, z0], [x0, y1, z0],
         [x0, y0, z1], [x1, y0, z1], [x1, y1, z1], [x0, y1, z1]]
    # outward-facing, counter-clockwise seen from outside
    f = [(0, 2, 1), (0, 3, 2), (4, 5, 6), (4, 6, 7), (0, 1, 5), (0, 5, 4),
         (1, 2, 6), (1, 6, 5), (2, 3, 7), (2, 7, 6), (3, 0, 4), (3, 4, 7)]
    return v, f


def icosphere(center, radius, level):
    t = (1 + 5 ** 0.5) / 2
    base = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0), (0, -1, t), (0, 1, t),
            (0, -1, -t), (0, 1, -t), (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    verts = [mul(list(p), 1 / length(list(p))) for p in base]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11), (1, 5, 9), (5, 11, 4),
             (11, 10, 2), (10, 7, 6), (7, 1, 8), (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8),
             (3, 8, 9), (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    for _ in range(level):
        cache = {}

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = add(verts[a], verts[b])
                verts.append(mul(m, 1 / length(m)))
                cache[key] = len(verts) - 1
            return cache[key]

        nf = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            nf += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = nf
    verts = [add(center, mul(p, radius)) for p in verts]
    return verts, faces


def fmt(x):
    r = repr(float(x))
    return r[:-2] if r.endswith(".0") else r


def write_obj(path, entities):
    lines = ["# generated by scripts/gen_fixtures.py"]
    offset = 1
    for name, (verts, faces) in entities:
        lines.append(f"o {name}")
        for p in verts:
            lines.append("v " + " ".join(fmt(c) for c in p))
        for a, b, c in faces:
            lines.append(f"f {a + offset} {b + offset} {c + offset}")
        offset += len(verts)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_scene(name, meta, entities):
    d = os.path.join(ROOT, "scenes", name)
    os.makedirs(d, exist_ok=True)
    with open(os.path.join(d, "scene.json"), "w") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    write_obj(os.path.join(d, "entities.obj"), entities)


def meta(name, mpu=1.0):
    return {"name": name, "voxelSizeUm": [0.5, 0.5, 2.0], "dimensions": [64, 64, 16],
            "channels": [{"id": 0, "name": "DAPI"}, {"id": 1, "name": "CD31"}],
            "metersPerMicrometer": mpu}


# Demo scene used by all gesture traces: 1 um maps to 1 mm at unit scale.
DEMO_MPU = 0.001
DEMO_SHAPES = [
    # (id, kind, params, volume used for nesting tie-break)
    ("cube_1", "box", ([0, 0, 0], [100, 100, 100])),
    ("glom_1", "sphere", ([300, 300, 50], 30.0)),
    ("glom_1_core", "sphere", ([300, 300, 50], 10.0)),
]


def shape_volume(kind, params):
    if kind == "box":
        lo, hi = params
        return (hi[0] - lo[0]) * (hi[1] - lo[1]) * (hi[2] - lo[2])
    return 4 / 3 * math.pi * params[1] ** 3


def shape_contains(kind, params, p):
    if kind == "box":
        lo, hi = params
        return all(lo[i] < p[i] < hi[i] for i in range(3))
    c, r = params
    return dist(p, c) < r


def build_scenes():
    write_scene("cube", {**meta("unit-cube"), "dimensions": [2, 2, 2]},
                [("cube_1", box_mesh([0, 0, 0], [1, 1, 1]))])
    write_scene("translated_cube", meta("translated-cube"),
                [("cube_1", box_mesh([10, -5, 3], [11, -4, 4]))])
    write_scene("icosphere", meta("icosphere"),
                [("sphere", icosphere([0, 0, 0], 10.0, 3))])
    write_scene("nested_cubes", meta("nested-cubes"),
                [("outer", box_mesh([0, 0, 0], [10, 10, 10])),
                 ("inner", box_mesh([4, 4, 4], [6, 6, 6]))])
    demo_entities = []
    for name, kind, params in DEMO_SHAPES:
        if kind == "box":
            demo_entities.append((name, box_mesh(*params)))
        else:
            demo_entities.append((name, icosphere(params[0], params[1], 2)))
    write_scene("demo", {"name": "kidney-demo", "voxelSizeUm": [0.5, 0.5, 2.0],
                         "dimensions": [800, 800, 200],
                         "channels": [{"id": 0, "name": "DAPI"}, {"id": 1, "name": "CD31"},
                                      {"id": 2, "name": "Podocin"}],
                         "metersPerMicrometer": DEMO_MPU}, demo_entities)


# ---------------------------------------------------------------------------
# reference reducer
# ---------------------------------------------------------------------------

IDENTITY = {"t": [0.0, 0.0, 0.0], "q": [1.0, 0.0, 0.0, 0.0], "s": 1.0}


def world_to_data(p, tr):
    local = qrot(qconj(tr["q"]), sub(p, tr["t"]))
    return mul(local, 1.0 / (tr["s"] * DEMO_MPU))


def hover_query(p_data):
    best = None
    for name, kind, params in DEMO_SHAPES:
        if shape_contains(kind, params, p_data):
            v = shape_volume(kind, params)
            if best is None or (v, name) < best:
                best = (v, name)
    return best


def pinch_center(hand):
    return mul(add(hand["index"], hand["thumb"]), 0.5)


class Reference:
    def __init__(self, prefix="meas"):
        self.mode = "idle"
        self.grab_hand = None
        self.locked_hand = None
        self.pinch = {"left": False, "right": False}
        self.consumed = {"left": False, "right": False}
        self.hover = None
        self.counter = 0
        self.armed = True
        self.prefix = prefix
        self.meas = None  # dict(id, a, b)
        self.last_emitted_meas = None
        self.chain = None
        self.snap = None
        self.state = {"transform": dict(IDENTITY), "selection": [], "hover": None, "measurements": {}}
        self.events = []

    def emit_meas(self, final):
        m = self.meas
        val = {"a": m["a"], "b": m["b"], "lengthUm": dist(m["a"], m["b"]), "finalized": final}
        return m["id"], val

    def step(self, frame):
        t = frame["t"]
        hands = {"left": frame["left"], "right": frame["right"]}
        engaged = {}
        for h in ("left", "right"):
            hd = hands[h]
            was = self.pinch[h]
            if hd is None:
                now = False
            else:
                d = dist(hd["index"], hd["thumb"])
                now = (d < PINCH_ENGAGE) if not was else not (d > PINCH_RELEASE)
            engaged[h] = now and not was
            if not now:
                self.consumed[h] = False
            self.pinch[h] = now

        in_grab = self.mode in ("grab_one", "grab_two")
        tr = self.chain if in_grab else self.state["transform"]
        new_state = {k: v for k, v in self.state.items()}
        updates = {}

        measuring = self.mode in ("placing", "locked_one")
        if measuring:
            if hands["left"] is None or hands["right"] is None:
                self.events.append({"t": t, "kind": "MeasureAborted", "measurementId": self.meas["id"]})
                updates["meas"] = (self.meas["id"], None)
                self.mode = "idle"
                for h in ("left", "right"):
                    self.consumed[h] = self.pinch[h]
                self.meas = None
            else:
                dl = world_to_data(hands["left"]["index"], tr)
                dr = world_to_data(hands["right"]["index"], tr)
                final = False
                if self.mode == "placing":
                    self.meas["a"], self.meas["b"] = dl, dr
                    for h in ("left", "right"):
                        if not engaged[h]:
                            continue
                        self.consumed[h] = True
                        if self.mode == "placing":
                            self.mode = "locked_one"
                            self.locked_hand = h
                            mid, val = self.emit_meas(False)
                            self.events.append({"t": t, "kind": "MeasureEndpointLocked", "hand": h,
                                                "measurement": dict(val, id=mid)})
                        else:
                            final = True
                else:
                    other = "right" if self.locked_hand == "left" else "left"
                    if other == "left":
                        self.meas["a"] = dl
                    else:
                        self.meas["b"] = dr
                    if engaged[other]:
                        self.consumed[other] = True
                        final = True
                if final:
                    mid, val = self.emit_meas(True)
                    self.events.append({"t": t, "kind": "MeasureFinalized", "measurement": dict(val, id=mid)})
                    updates["meas"] = (mid, val)
                    self.mode = "idle"
                    self.meas = None
                else:
                    mid, val = self.emit_meas(False)
                    if self.last_emitted_meas != (mid, val):
                        updates["meas"] = (mid, val)
        else:
            # selection toggle
            if self.hover is not None and any(engaged[h] and not self.consumed[h] for h in engaged):
                sel = set(self.state["selection"])
                selected = self.hover not in sel
                if selected:
                    sel.add(self.hover)
                else:
                    sel.discard(self.hover)
                self.events.append({"t": t, "kind": "SelectionToggled", "entity": self.hover, "selected": selected})
                updates["selection"] = sorted(sel)
                for h in engaged:
                    if engaged[h]:
                        self.consumed[h] = True
            # grabs
            active = [h for h in ("left", "right")
                      if hands[h] is not None and self.pinch[h] and not self.consumed[h]]
            if len(active) == 2:
                if self.mode != "grab_two":
                    gl, gr = pinch_center(hands["left"]), pinch_center(hands["right"])
                    if dist(gl, gr) >= DEGENERATE_GRAB:
                        self.mode = "grab_two"
                        self.snap = (gl, gr, tr)
                        self.chain = tr
            elif len(active) == 1:
                h = active[0]
                if not (self.mode == "grab_one" and self.grab_hand == h):
                    self.mode = "grab_one"
                    self.grab_hand = h
                    self.snap = (pinch_center(hands[h]), tr)
                    self.chain = tr
            else:
                self.mode = "idle"
            if self.mode == "grab_one":
                g, t0 = self.snap
                p = pinch_center(hands[self.grab_hand])
                new_tr = {"t": add(t0["t"], sub(p, g)), "q": t0["q"], "s": t0["s"]}
            elif self.mode == "grab_two":
                gl, gr, t0 = self.snap
                l, r = pinch_center(hands["left"]), pinch_center(hands["right"])
                s = dist(l, r) / dist(gl, gr)
                new_s = min(max(s * t0["s"], MIN_SCALE), MAX_SCALE)
                s = new_s / t0["s"]
                u, v = [gr[0] - gl[0], 0.0, gr[2] - gl[2]], [r[0] - l[0], 0.0, r[2] - l[2]]
                if length(u) < 1e-6 or length(v) < 1e-6:
                    yaw = 0.0
                else:
                    u, v = mul(u, 1 / length(u)), mul(v, 1 / length(v))
                    yaw = math.atan2(crossp(u, v)[1], dotp(u, v))
                g = mul(add(gl, gr), 0.5)
                m = mul(add(l, r), 0.5)
                qy = [math.cos(yaw / 2), 0.0, math.sin(yaw / 2), 0.0]
                d = sub(t0["t"], g)
                # t0 + (m - g) + (s*R(d) - d): unmoved hands give t0 bit-for-bit
                new_tr = {"t": add(add(t0["t"], sub(m, g)), sub(mul(roty(yaw, d), s), d)),
                          "q": qmul(qy, t0["q"]), "s": new_s}
            else:
                new_tr = None
            if new_tr is not None:
                if not close_transform(new_tr, tr):
                    self.events.append({"t": t, "kind": "TransformUpdated", "transform": new_tr})
                    updates["transform"] = new_tr
                self.chain = new_tr
                tr = new_tr
            # measurement start; re-armed once the fingertips have separated
            close = (hands["left"] is not None and hands["right"] is not None
                     and dist(hands["left"]["index"], hands["right"]["index"]) < MEASURE_START)
            if not close:
                self.armed = True
            if (self.mode == "idle" and self.armed and close
                    and not self.pinch["left"] and not self.pinch["right"]):
                self.counter += 1
                self.meas = {"id": f"{self.prefix}-{self.counter}",
                             "a": world_to_data(hands["left"]["index"], tr),
                             "b": world_to_data(hands["right"]["index"], tr)}
                self.mode = "placing"
                self.armed = False
                mid, val = self.emit_meas(False)
                self.events.append({"t": t, "kind": "MeasureStarted", "measurement": dict(val, id=mid)})
                updates["meas"] = (mid, val)

        if self.mode not in ("placing", "locked_one"):
            best = None
            for h in ("left", "right"):
                hd = hands[h]
                if hd is None or self.pinch[h]:
                    continue
                hit = hover_query(world_to_data(hd["index"], tr))
                if hit is not None and (best is None or hit < best):
                    best = hit
            hv = best[1] if best else None
            if hv != self.hover:
                self.events.append({"t": t, "kind": "HoverChanged", "entity": hv})
                updates["hover"] = hv
                self.hover = hv

        # apply to local replica
        if "transform" in updates:
            new_state["transform"] = updates["transform"]
        if "selection" in updates:
            new_state["selection"] = updates["selection"]
        if "hover" in updates:
            new_state["hover"] = updates["hover"]
        if "meas" in updates:
            mid, val = updates["meas"]
            ms = dict(new_state["measurements"])
            if val is None:
                ms.pop(mid, None)
            else:
                ms[mid] = val
            new_state["measurements"] = ms
            self.last_emitted_meas = (mid, val)
        self.state = new_state


def close_transform(a, b):
    return a["t"] == b["t"] and a["q"] == b["q"] and a["s"] == b["s"]


# ---------------------------------------------------------------------------
# traces
# ---------------------------------------------------------------------------

DT = 0.05


def hand(index, pinched=False):
    index = [float(c) for c in index]
    thumb = add(index, [0.0, -0.01, 0.0] if pinched else [0.0, -0.05, 0.0])
    wrist = add(index, [0.0, -0.08, -0.06])
    return {"index": index, "thumb": thumb, "wrist": wrist}


def frames(seq):
    out = []
    for k, (left, right) in enumerate(seq):
        out.append({"t": round(k * DT, 6), "left": left, "right": right})
    return out


def lerp(a, b, f):
    return [a[i] + (b[i] - a[i]) * f for i in range(3)]


def trace_hover():
    xs = [0.2, 0.15, 0.09, 0.05, 0.05, 0.09, 0.15, 0.2]
    return frames([(None, hand([x, 0.05, 0.05])) for x in xs])


def trace_select_cube():
    inside = [0.05, 0.05, 0.05]
    seq = [(None, hand([0.2, 0.05, 0.05])), (None, hand([0.1 + 0.04, 0.05, 0.05])),
           (None, hand(inside)), (None, hand(inside)),
           (None, hand(inside, True)), (None, hand(inside, True)),
           (None, hand(inside)), (None, hand([0.2, 0.05, 0.05])), (None, hand([0.25, 0.05, 0.05]))]
    return frames(seq)


def trace_select_toggle():
    inside = [0.05, 0.05, 0.05]
    seq = [(None, hand([0.2, 0.05, 0.05])), (None, hand(inside)),
           (None, hand(inside, True)), (None, hand(inside)),
           (None, hand(inside, True)), (None, hand(inside)),
           (None, hand([0.2, 0.05, 0.05]))]
    return frames(seq)


def trace_translate():
    seq = [(None, hand([0.5, 0.0, 0.0])), (None, hand([0.5, 0.0, 0.0], True))]
    for k in range(1, 11):
        seq.append((None, hand([0.5, 0.03 * k, 0.0], True)))
    seq.append((None, hand([0.5, 0.3, 0.0])))
    seq.append((None, hand([0.5, 0.35, 0.0])))
    return frames(seq)


def trace_zoom():
    seq = [(hand([0.4, 0, 0]), hand([0.6, 0, 0])),
           (hand([0.4, 0, 0], True), hand([0.6, 0, 0], True))]
    for k in range(1, 11):
        f = k / 10
        seq.append((hand(lerp([0.4, 0, 0], [0.3, 0, 0], f), True),
                    hand(lerp([0.6, 0, 0], [0.7, 0, 0], f), True)))
    seq.append((hand([0.3, 0, 0]), hand([0.7, 0, 0])))
    seq.append((hand([0.3, 0, 0]), hand([0.7, 0, 0])))
    return frames(seq)


def trace_yaw():
    mid = [0.5, 0.0, 0.0]

    def pair(phi, pinched):
        d = [math.cos(phi) * 0.1, 0.0, -math.sin(phi) * 0.1]
        return (hand(sub(mid, d), pinched), hand(add(mid, d), pinched))

    seq = [pair(0.0, False), pair(0.0, True)]
    for k in range(1, 11):
        seq.append(pair(-math.pi / 2 * k / 10, True))
    end = pair(-math.pi / 2, False)
    seq += [end, end]
    return frames(seq)


def trace_measure_simple():
    left = [-0.2, 0.0, 0.0]
    target = [-0.197, 0.004, 0.0]
    seq = [(hand(left), hand([-0.1, 0.0, 0.0])), (hand(left), hand([-0.15, 0.0, 0.0])),
           (hand(left), hand([-0.199, 0.0, 0.0]))]
    for k in range(1, 6):
        seq.append((hand(left), hand(lerp([-0.199, 0.0, 0.0], target, k / 5))))
    seq.append((hand(left, True), hand(target)))
    seq.append((hand(left, True), hand(target, True)))
    seq.append((hand(left), hand(target)))
    seq.append((hand([-0.25, 0.0, 0.0]), hand([-0.1, 0.0, 0.0])))
    return frames(seq)


def trace_measure_abort():
    left = [-0.2, 0.0, 0.0]
    seq = [(hand(left), hand([-0.1, 0.0, 0.0])), (hand(left), hand([-0.195, 0.0, 0.0])),
           (hand(left), hand([-0.19, 0.002, 0.0])), (hand(left), None), (hand(left), None),
           (hand(left), hand([-0.1, 0.0, 0.0]))]
    return frames(seq)


TRACES = {
    "hover": trace_hover,
    "select_cube": trace_select_cube,
    "select_toggle": trace_select_toggle,
    "translate_one_hand": trace_translate,
    "zoom_2x": trace_zoom,
    "yaw_neg90": trace_yaw,
    "measure_simple": trace_measure_simple,
    "measure_abort": trace_measure_abort,
}


def write_jsonl(path, rows):
    with open(path, "w") as fh:
        for r in rows:
            fh.write(json.dumps(r, separators=(",", ":")) + "\n")


def build_traces():
    os.makedirs(os.path.join(ROOT, "traces"), exist_ok=True)
    os.makedirs(os.path.join(ROOT, "expected"), exist_ok=True)
    for name, fn in TRACES.items():
        fr = fn()
        write_jsonl(os.path.join(ROOT, "traces", f"{name}.jsonl"), fr)
        ref = Reference()
        for f in fr:
            ref.step(f)
        write_jsonl(os.path.join(ROOT, "traces", f"{name}.events.jsonl"), ref.events)
        with open(os.path.join(ROOT, "expected", f"{name}.json"), "w") as fh:
            json.dump(ref.state, fh, indent=2)
            fh.write("\n")
        kinds = [e["kind"] for e in ref.events]
        print(f"{name:20s} {len(fr):3d} frames  events: {kinds}")


if __name__ == "__main__":
    build_scenes()
    build_traces()
