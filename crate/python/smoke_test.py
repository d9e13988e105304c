#!/usr/bin/env python3
"""End-to-end smoke test of the Python bindings.

Build the module first:

    cargo build -p elastmap-py --features extension-module --release

then run:

    python3 python/smoke_test.py
"""

import math
import os
import shutil
import sys
import tempfile


def import_module():
    here = os.path.dirname(os.path.abspath(__file__))
    root = os.path.dirname(here)
    candidates = [os.environ.get("ELASTMAP_PY_SO")] if os.environ.get("ELASTMAP_PY_SO") else []
    candidates += [
        os.path.join(root, "target", profile, "libelastmap_py.so")
        for profile in ("release", "debug")
    ]
    so = next((p for p in candidates if p and os.path.isfile(p)), None)
    if so is None:
        sys.exit(
            "libelastmap_py.so not found; build it with "
            "`cargo build -p elastmap-py --features extension-module --release`"
        )
    tmp = tempfile.mkdtemp(prefix="elastmap_py_")
    shutil.copy(so, os.path.join(tmp, "elastmap.so"))
    sys.path.insert(0, tmp)
    import elastmap

    return elastmap


def main():
    em = import_module()
    checks = 0

    def ok(name, cond):
        nonlocal checks
        if not cond:
            sys.exit(f"FAIL {name}")
        checks += 1
        print(f"ok {name}")

    mesh = em.Mesh(4)
    ok("mesh counts", mesh.node_count() == 41 and mesh.element_count() == 64)
    ok("mesh corner", mesh.nodes()[0] == (0.0, 0.0))

    intensity = em.sample_grf(mesh, length_scale=0.2, seed=3)
    ok("grf range", len(intensity) == 41 and all(0.0 <= v <= 1.0 for v in intensity))

    modulus = em.elemental_modulus(mesh, intensity)
    ok("modulus range", len(modulus) == 64 and all(1.0 <= v <= 4.0 for v in modulus))

    sol = em.forward_solve(mesh, [2.0] * 64, d=0.2, steps=5)
    ok("uniform strain exx", max(abs(e - 0.48) for e in sol.exx) < 1e-8)
    ok("uniform strain eyy", max(abs(e - 0.48) for e in sol.eyy) < 1e-8)
    ok("uniform strain exy", max(abs(e) for e in sol.exy) < 1e-8)
    ok("corner displacement", sol.u[0] == (-0.2, -0.2))

    same = em.add_strain_noise(sol.exx, sol.eyy, sol.exy, percent=0.0)
    ok("zero noise is identity", same == (sol.exx, sol.eyy, sol.exy))
    noisy = em.add_strain_noise(sol.exx, sol.eyy, sol.exy, percent=5.0, seed=1)
    ok("noise perturbs", noisy[0] != sol.exx)

    ok("modulus transform midpoint", em.modulus_transform(0.0) == 3.0)
    ok(
        "modulus transform open interval",
        1.0 < em.modulus_transform(-1e6) < em.modulus_transform(1e6) < 5.0,
    )

    het = em.forward_solve(mesh, modulus, d=0.2, steps=5)
    fit = em.train_pinn(
        mesh,
        het.exx,
        het.eyy,
        het.exy,
        het.u,
        variant="B",
        fcnn="II",
        iterations=60,
        log_stride=20,
        truth_modulus=modulus,
        truth_solution=het,
    )
    ok("training history logged", len(fit.history) >= 3)
    ok("training loss finite", math.isfinite(fit.history[-1][4]))
    ok("learned modulus in box", all(1.0 < e < 5.0 for e in fit.e_nodes))
    ok("error maps computed", fit.l2 is not None and all(math.isfinite(v) for v in fit.l2))

    inv = em.invert_fea(
        mesh,
        sol.exx,
        sol.eyy,
        sol.exy,
        e_init=1.5,
        max_iter=10,
        truth_modulus=[2.0] * 64,
    )
    # a uniform rescale of the modulus leaves these strains unchanged, so the
    # strain objective is already at its optimum
    ok("scaled start matches strains", inv.converged and inv.history[0][2] < 1e-4)

    flat = [[0.5] * 8 for _ in range(8)]
    ok("constant field has zero score", em.delentropy(flat) == 0.0)
    ramp = [[(r * c) / 49.0 for c in range(8)] for r in range(8)]
    ok("structured field has positive score", em.delentropy(ramp) > 0.0)

    print(f"PASS ({checks} checks)")


if __name__ == "__main__":
    main()
