#!/usr/bin/env python3
"""Generates models/humanoid25.json: 25-DoF humanoid, 29.5 kg, ~1.3 m tall."""
import json


def vec(x, y, z):
    return [x, y, z]


def inertia(m, lx, ly, lz):
    # Solid-box approximation about the CoM.
    return [m / 12 * (ly**2 + lz**2), 0.0, 0.0,
            m / 12 * (lx**2 + lz**2), 0.0,
            m / 12 * (lx**2 + ly**2)]


links = []
joints = []
keypoints = []
contact_points = []
collision_pairs = []


def add(name, mass, com, iner, parent, kind="revolute", origin=(0, 0, 0),
        axis=(0, 0, 1), q=(0, 0), v=0.0, tau=0.0, capsule=None, jname=None):
    idx = len(links)
    link = {"name": name, "mass": mass, "com_offset": list(com),
            "inertia": iner}
    if capsule:
        link["capsule"] = {"a": list(capsule[0]), "b": list(capsule[1]),
                           "radius": capsule[2]}
    links.append(link)
    joint = {"name": jname or name, "kind": kind, "parent": parent,
             "origin": list(origin)}
    if kind == "revolute":
        joint.update({"axis": list(axis), "q_min": q[0], "q_max": q[1],
                      "v_min": -v, "v_max": v, "tau_min": -tau, "tau_max": tau})
    joints.append(joint)
    return idx


pelvis = add("pelvis", 4.5, (0, 0, 0.05), inertia(4.5, 0.20, 0.24, 0.15),
             -1, kind="floating_base")
keypoints.append({"name": "pelvis", "link": pelvis, "offset": vec(0, 0, 0)})

torso = add("torso", 7.9, (0, 0, 0.20), inertia(7.9, 0.22, 0.26, 0.40),
            pelvis, origin=(0, 0, 0.10), axis=(0, 0, 1), q=(-1.2, 1.2),
            v=40.0, tau=18.0)
keypoints.append({"name": "chest", "link": torso, "offset": vec(0, 0, 0.35)})

for side, s in (("l", 1.0), ("r", -1.0)):
    sp = add(f"{side}_shoulder_pitch", 0.15, (0, 0, 0),
             inertia(0.15, 0.06, 0.06, 0.06), torso,
             origin=(0, s * 0.16, 0.35), axis=(0, 1, 0), q=(-3.0, 3.0),
             v=40.0, tau=18.0)
    sr = add(f"{side}_shoulder_roll", 0.15, (0, 0, 0),
             inertia(0.15, 0.06, 0.06, 0.06), sp,
             origin=(0, s * 0.03, 0), axis=(1, 0, 0), q=(-1.6, 1.6),
             v=40.0, tau=18.0)
    ua = add(f"{side}_upper_arm", 0.8, (0, 0, -0.11),
             inertia(0.8, 0.06, 0.06, 0.22), sr,
             origin=(0, 0, 0), axis=(0, 0, 1), q=(-1.6, 1.6), v=40.0,
             tau=18.0)
    fa = add(f"{side}_forearm", 0.5, (0, 0, -0.10),
             inertia(0.5, 0.05, 0.05, 0.20), ua,
             origin=(0, 0, -0.22), axis=(0, 1, 0), q=(-2.4, 0.3), v=40.0,
             tau=18.0)
    ha = add(f"{side}_hand", 0.3, (0, 0, -0.05),
             inertia(0.3, 0.04, 0.04, 0.10), fa,
             origin=(0, 0, -0.20), axis=(1, 0, 0), q=(-1.6, 1.6), v=40.0,
             tau=18.0)
    keypoints += [
        {"name": f"{side}_shoulder", "link": sp, "offset": vec(0, 0, 0)},
        {"name": f"{side}_elbow", "link": fa, "offset": vec(0, 0, 0)},
        {"name": f"{side}_wrist", "link": ha, "offset": vec(0, 0, 0)},
    ]

thigh_caps = {}
shank_caps = {}
foot_idx = {}
for side, s in (("l", 1.0), ("r", -1.0)):
    hy = add(f"{side}_hip_yaw", 0.5, (0, 0, -0.02),
             inertia(0.5, 0.08, 0.08, 0.08), pelvis,
             origin=(0, s * 0.08, -0.05), axis=(0, 0, 1), q=(-1.0, 1.0),
             v=20.0, tau=48.0)
    hr = add(f"{side}_hip_roll", 0.4, (0, 0, -0.02),
             inertia(0.4, 0.07, 0.07, 0.07), hy,
             origin=(0, 0, -0.04), axis=(1, 0, 0), q=(-0.8, 0.8), v=20.0,
             tau=48.0)
    th = add(f"{side}_thigh", 2.8, (0, 0, -0.16),
             inertia(2.8, 0.10, 0.10, 0.32), hr,
             origin=(0, 0, -0.03), axis=(0, 1, 0), q=(-2.2, 1.6), v=20.0,
             tau=48.0, capsule=((0, 0, 0), (0, 0, -0.32), 0.06),
             jname=f"{side}_hip_pitch")
    sh = add(f"{side}_shank", 1.6, (0, 0, -0.15),
             inertia(1.6, 0.08, 0.08, 0.32), th,
             origin=(0, 0, -0.32), axis=(0, 1, 0), q=(-0.1, 2.6), v=10.0,
             tau=200.0, capsule=((0, 0, 0), (0, 0, -0.32), 0.05),
             jname=f"{side}_knee")
    ap = add(f"{side}_ankle_pitch", 0.3, (0, 0, 0),
             inertia(0.3, 0.05, 0.05, 0.05), sh,
             origin=(0, 0, -0.32), axis=(0, 1, 0), q=(-1.0, 1.0), v=10.0,
             tau=100.0)
    ft = add(f"{side}_ankle_roll", 0.8, (0.03, 0, -0.03),
             inertia(0.8, 0.16, 0.08, 0.05), ap,
             origin=(0, 0, 0), axis=(1, 0, 0), q=(-0.6, 0.6), v=10.0,
             tau=100.0, capsule=((-0.06, 0, -0.03), (0.10, 0, -0.03), 0.035))
    toe = add(f"{side}_toe", 0.25, (0.03, 0, 0),
              inertia(0.25, 0.08, 0.06, 0.02), ft,
              origin=(0.10, 0, -0.04), axis=(0, 1, 0), q=(-0.8, 0.8), v=20.0,
              tau=10.0)
    # 5 contact points per foot: two on the front of the toe, two on the
    # back of the toe, one heel.
    contact_points += [
        {"link": toe, "offset": vec(0.06, 0.03, 0)},
        {"link": toe, "offset": vec(0.06, -0.03, 0)},
        {"link": toe, "offset": vec(0.0, 0.03, 0)},
        {"link": toe, "offset": vec(0.0, -0.03, 0)},
        {"link": ft, "offset": vec(-0.06, 0, -0.04)},
    ]
    keypoints += [
        {"name": f"{side}_hip", "link": th, "offset": vec(0, 0, 0)},
        {"name": f"{side}_knee", "link": sh, "offset": vec(0, 0, 0)},
        {"name": f"{side}_ankle", "link": ft, "offset": vec(0, 0, 0)},
        {"name": f"{side}_toe", "link": toe, "offset": vec(0.05, 0, 0)},
    ]
    thigh_caps[side] = th
    shank_caps[side] = sh
    foot_idx[side] = ft

collision_pairs = [
    [thigh_caps["l"], thigh_caps["r"]],
    [shank_caps["l"], shank_caps["r"]],
    [foot_idx["l"], foot_idx["r"]],
    [shank_caps["l"], foot_idx["r"]],
    [shank_caps["r"], foot_idx["l"]],
]

total = sum(l["mass"] for l in links)
doc = {"links": links, "joints": joints, "contact_points": contact_points,
       "keypoints": keypoints, "collision_pairs": collision_pairs,
       "total_mass": round(total, 9)}
assert abs(total - 29.5) < 1e-9, total
assert sum(1 for j in joints if j["kind"] == "revolute") == 25
assert len(contact_points) == 10

with open("models/humanoid25.json", "w") as f:
    json.dump(doc, f, indent=1)
    f.write("\n")
print("wrote models/humanoid25.json:", len(links), "links, total", total, "kg")
