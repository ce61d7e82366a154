#!/usr/bin/env python3
"""Generates models/reduced_biped.json: floating base, 3-DoF support (left)
leg, 7-DoF kicking (right) leg, 10 contact points."""
import json


def inertia(m, lx, ly, lz):
    return [m / 12 * (ly**2 + lz**2), 0.0, 0.0,
            m / 12 * (lx**2 + lz**2), 0.0,
            m / 12 * (lx**2 + ly**2)]


links, joints, keypoints, contact_points = [], [], [], []


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


pelvis = add("pelvis", 15.85, (0, 0, 0.12), inertia(15.85, 0.22, 0.26, 0.42),
             -1, kind="floating_base")
keypoints.append({"name": "pelvis", "link": pelvis, "offset": [0, 0, 0]})

# Support (left) leg: hip pitch, knee, ankle pitch.
l_th = add("l_thigh", 3.0, (0, 0, -0.17), inertia(3.0, 0.10, 0.10, 0.35),
           pelvis, origin=(0, 0.08, -0.05), axis=(0, 1, 0), q=(-2.2, 1.6),
           v=20.0, tau=48.0, jname="l_hip_pitch",
           capsule=((0, 0, 0), (0, 0, -0.35), 0.06))
l_sh = add("l_shank", 2.0, (0, 0, -0.16), inertia(2.0, 0.08, 0.08, 0.35),
           l_th, origin=(0, 0, -0.35), axis=(0, 1, 0), q=(-0.1, 2.6), v=10.0,
           tau=200.0, jname="l_knee",
           capsule=((0, 0, 0), (0, 0, -0.35), 0.05))
l_ft = add("l_foot", 1.2, (0.03, 0, -0.02), inertia(1.2, 0.18, 0.08, 0.05),
           l_sh, origin=(0, 0, -0.35), axis=(0, 1, 0), q=(-1.0, 1.0), v=10.0,
           tau=100.0, jname="l_ankle_pitch")
contact_points += [
    {"link": l_ft, "offset": [0.12, 0.03, -0.04]},
    {"link": l_ft, "offset": [0.12, -0.03, -0.04]},
    {"link": l_ft, "offset": [0.04, 0.03, -0.04]},
    {"link": l_ft, "offset": [0.04, -0.03, -0.04]},
    {"link": l_ft, "offset": [-0.06, 0, -0.04]},
]
keypoints += [
    {"name": "l_hip", "link": l_th, "offset": [0, 0, 0]},
    {"name": "l_knee", "link": l_sh, "offset": [0, 0, 0]},
    {"name": "l_foot", "link": l_ft, "offset": [0, 0, 0]},
]

# Kicking (right) leg: full 7 DoF including the actuated toe.
r_hy = add("r_hip_yaw", 0.5, (0, 0, -0.01), inertia(0.5, 0.08, 0.08, 0.08),
           pelvis, origin=(0, -0.08, -0.05), axis=(0, 0, 1), q=(-1.0, 1.0),
           v=20.0, tau=48.0)
r_hr = add("r_hip_roll", 0.4, (0, 0, -0.01), inertia(0.4, 0.07, 0.07, 0.07),
           r_hy, origin=(0, 0, 0), axis=(1, 0, 0), q=(-0.8, 0.8), v=20.0,
           tau=48.0)
r_th = add("r_thigh", 3.0, (0, 0, -0.17), inertia(3.0, 0.10, 0.10, 0.35),
           r_hr, origin=(0, 0, 0), axis=(0, 1, 0), q=(-2.2, 1.6), v=20.0,
           tau=48.0, jname="r_hip_pitch",
           capsule=((0, 0, 0), (0, 0, -0.35), 0.06))
r_sh = add("r_shank", 2.0, (0, 0, -0.16), inertia(2.0, 0.08, 0.08, 0.35),
           r_th, origin=(0, 0, -0.35), axis=(0, 1, 0), q=(-0.1, 2.6), v=10.0,
           tau=200.0, jname="r_knee",
           capsule=((0, 0, 0), (0, 0, -0.35), 0.05))
r_ap = add("r_ankle_pitch", 0.3, (0, 0, 0), inertia(0.3, 0.05, 0.05, 0.05),
           r_sh, origin=(0, 0, -0.35), axis=(0, 1, 0), q=(-1.0, 1.0), v=10.0,
           tau=100.0)
r_ft = add("r_foot", 1.0, (0.03, 0, -0.02), inertia(1.0, 0.16, 0.08, 0.05),
           r_ap, origin=(0, 0, 0), axis=(1, 0, 0), q=(-0.6, 0.6), v=10.0,
           tau=100.0, jname="r_ankle_roll")
r_toe = add("r_toe", 0.25, (0.02, 0, 0), inertia(0.25, 0.08, 0.06, 0.02),
            r_ft, origin=(0.10, 0, -0.04), axis=(0, 1, 0), q=(-0.8, 0.8),
            v=20.0, tau=10.0)
contact_points += [
    {"link": r_toe, "offset": [0.06, 0.03, 0]},
    {"link": r_toe, "offset": [0.06, -0.03, 0]},
    {"link": r_toe, "offset": [0.0, 0.03, 0]},
    {"link": r_toe, "offset": [0.0, -0.03, 0]},
    {"link": r_ft, "offset": [-0.06, 0, -0.04]},
]
keypoints += [
    {"name": "r_hip", "link": r_th, "offset": [0, 0, 0]},
    {"name": "r_knee", "link": r_sh, "offset": [0, 0, 0]},
    {"name": "r_foot", "link": r_ft, "offset": [0, 0, 0]},
    {"name": "r_toe", "link": r_toe, "offset": [0.02, 0, 0]},
]

collision_pairs = [[l_th, r_th], [l_sh, r_sh], [l_sh, r_th]]

total = sum(l["mass"] for l in links)
assert abs(total - 29.5) < 1e-9, total
assert len(contact_points) == 10
assert sum(1 for j in joints if j["kind"] == "revolute") == 10

doc = {"links": links, "joints": joints, "contact_points": contact_points,
       "keypoints": keypoints, "collision_pairs": collision_pairs,
       "total_mass": 29.5}
with open("models/reduced_biped.json", "w") as f:
    json.dump(doc, f, indent=1)
    f.write("\n")
print("wrote models/reduced_biped.json:", len(links), "links,", total, "kg")
