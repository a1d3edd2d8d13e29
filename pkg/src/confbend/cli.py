"""Batch front-end: generate artifacts, verify them, export geometry.

Subcommands: generate, verify, export, report.  All behavior is driven
by a declarative JSON config file; there is no interactive mode.  Exit
codes: 0 success, 1 verification failure, 2 generation failure (a
hypothesis of the construction failed, with a structured reason), 3
configuration or I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import pipeline
from .bending import (
    BendingField,
    associated_tensors,
    cib_residual,
    d_conditions,
    first_order_conformality,
    random_killing,
    theta_checks,
    triviality_test,
)
from .gauss_param import (
    HypersurfaceFamily,
    focal_loop,
    random_sample_set,
    samples_to_csv,
    samples_to_json,
    slice_to_obj,
)
from .pair import g_from_pair, pair_from_g, SpecialPair, validate_pair
from .pde import GridFunction, GridSpec
from .reports import CheckReport, report_set_to_json
from .surface import (
    ConjugateStructure,
    GenerationError,
    SurfacePatch,
    cartan_condition,
    check_conjugate,
    check_special,
    codazzi_residual,
    compute_m,
    solve_mu,
)

__all__ = ["JobConfig", "main", "cmd_generate", "cmd_verify",
           "cmd_export", "cmd_report"]


@dataclass
class JobConfig:
    """Declarative description of one generate/verify job."""

    kind: str = "hyperbolic"
    n: int = 5
    grid: GridSpec = None
    seed: int = 0
    use_solver: bool = True
    sample_count: int = 60
    killing_count: int = 5
    tol_scale: float = 1.0
    out: str = "out"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("hyperbolic", "elliptic"):
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.n < 5:
            raise ValueError("the construction needs n >= 5")
        if self.grid is None:
            self.grid = pipeline.default_spec()

    @classmethod
    def load(cls, path, overrides=None):
        with open(path) as fh:
            raw = json.load(fh)
        grid = raw.pop("grid", None)
        cfg = cls(grid=GridSpec.from_dict(grid) if grid else None,
                  **{k: raw.pop(k) for k in list(raw)
                     if k in ("kind", "n", "seed", "use_solver",
                              "sample_count", "killing_count",
                              "tol_scale", "out")},
                  extra=raw)
        for key, val in (overrides or {}).items():
            if val is not None:
                setattr(cfg, key, val)
        return cfg

    def path(self, name):
        return os.path.join(self.out, name)


def _fail(code, reason, location=None):
    payload = {"error": reason}
    if location is not None:
        payload["location"] = [float(x) for x in location]
    print(json.dumps(payload))
    return code


def cmd_generate(cfg):
    """Run the construction chain and write every artifact to disk."""
    os.makedirs(cfg.out, exist_ok=True)
    try:
        gen = pipeline.generate(cfg.kind, spec=cfg.grid, n=cfg.n,
                                seed=cfg.seed, use_solver=cfg.use_solver,
                                component_scale=cfg.extra.get(
                                    "component_scale"))
        pair = pair_from_g(gen.patch)
        rep = validate_pair(pair)
        if not (pair.immersion_ok and pair.gradient_ok):
            reason = ("h_not_immersion" if not pair.immersion_ok
                      else "grad_r_ge_1")
            raise GenerationError(reason, rep.argmax or None)
        family = HypersurfaceFamily(pair, n=cfg.n)
        points = random_sample_set(family, cfg.sample_count, cfg.seed)
        samples = [family.sample(u, v, t) for u, v, t in points]
    except GenerationError as exc:
        return _fail(2, exc.reason, exc.location)

    gen.patch.save_json(cfg.path("patch.json"))
    gen.mu.save_json(cfg.path("mu.json"))
    pair.save_json(cfg.path("pair.json"))
    with open(cfg.path("solutions.json"), "w") as fh:
        json.dump([s.to_json_dict() for s in gen.solutions], fh)
    samples_to_csv(samples, cfg.path("samples.csv"))
    samples_to_json(samples, cfg.path("samples.json"))
    with open(cfg.path("manifest.json"), "w") as fh:
        json.dump({"kind": cfg.kind, "n": cfg.n, "seed": cfg.seed,
                   "grid": cfg.grid.to_dict(),
                   "use_solver": cfg.use_solver,
                   "sample_count": cfg.sample_count}, fh, indent=2,
                  sort_keys=True)
    print(json.dumps({"written": sorted(os.listdir(cfg.out))}))
    return 0


def _load_artifacts(cfg):
    with open(cfg.path("manifest.json")) as fh:
        manifest = json.load(fh)
    patch = SurfacePatch.load_json(cfg.path("patch.json"))
    mu = GridFunction.load_json(cfg.path("mu.json"))
    pair = SpecialPair.load_json(cfg.path("pair.json"))
    return manifest, patch, mu, pair


def _verify_battery(cfg, manifest, patch, mu, pair):
    """All checks of the verification battery, one CheckReport each."""
    kind, n, seed = manifest["kind"], manifest["n"], manifest["seed"]
    ts = cfg.tol_scale
    struct = ConjugateStructure(kind=kind, mu=mu)
    family = HypersurfaceFamily(pair, n=n)
    points = random_sample_set(family, cfg.sample_count, seed)
    samples = [family.sample(u, v, t) for u, v, t in points]

    def scaled(rep):
        rep.tolerance *= ts
        return rep

    def surface_checks():
        out = [scaled(check_conjugate(patch, kind)),
               scaled(check_special(patch, kind))]
        try:
            mu_fit, mismatch = solve_mu(patch, kind)
            err = np.max(np.abs(mu_fit.values / mu_fit.values[0, 0]
                                - mu.values / mu.values[0, 0]))
            out.append(CheckReport("mu_round_trip", float(err),
                                   ts * patch.h2_tolerance(40.0)))
        except GenerationError as exc:
            out.append(CheckReport("mu_round_trip", float("inf"),
                                   0.0, extra={"reason": exc.reason}))
        out.append(scaled(codazzi_residual(patch, struct)))
        cart = cartan_condition(patch, kind)
        # witnessed when the residual is far above discretization noise
        witnessed = cart.max_residual > 0.05
        out.append(CheckReport("cartan_strictly_larger_class",
                               0.0 if witnessed else 1.0, 0.5,
                               extra={"cartan_residual":
                                      float(cart.max_residual)}))
        return out

    def pair_checks():
        rep = validate_pair(pair)
        back = g_from_pair(pair)
        rt = float(np.max(np.abs(back.g - patch.g)))
        return [rep, CheckReport("pair_round_trip", rt, 1e-12)]

    def hyper_checks():
        bad = sum(1 for s in samples if not s.regular)
        out = [CheckReport("regularity", bad / max(len(samples), 1),
                           0.1, extra={"total": len(samples)})]
        h2 = patch.h2_tolerance(40.0)
        worst = 0.0
        for s in samples:
            if not s.regular or s.eigenvalues is None:
                continue
            close = np.abs(s.eigenvalues - s.lam) <= ts * h2 * abs(s.lam)
            if close.sum() != n - 2:
                worst = 1.0
        out.append(CheckReport("multiplicity_n_minus_2", worst, 0.5))
        out.extend(scaled(r) for r in
                   focal_loop(family, samples,
                              patch_g=GridFunction(patch.spec,
                                                   patch.g)))
        return out

    def bending_checks():
        sub = points[:min(8, len(points))]
        rng = np.random.default_rng(seed)
        worst_cib = worst_flat = worst_fo = 0.0
        trivial_all = True
        for i in range(cfg.killing_count):
            bf = BendingField.from_killing(
                random_killing(n + 1, seed=int(rng.integers(1 << 31)),
                               scale=0.7))
            worst_cib = max(worst_cib,
                            cib_residual(bf, family, sub).max_residual)
            tens = associated_tensors(bf, family, sub)
            flat, _ = theta_checks(tens, seed=seed, spec=family.spec)
            worst_flat = max(worst_flat, flat.max_residual)
            trivial_all &= triviality_test(tens, tol=1e-6)[0]
            worst_fo = max(worst_fo,
                           first_order_conformality(bf, family,
                                                    sub).max_residual)
        out = [CheckReport("killing_bending_equation", worst_cib,
                           1e-10 * ts),
               CheckReport("killing_theta_flat", worst_flat, 1e-8 * ts),
               CheckReport("killing_triviality",
                           0.0 if trivial_all else 1.0, 0.5),
               CheckReport("killing_first_order_conformality",
                           worst_fo, 2e-7 * ts)]
        out.extend(d_conditions(family, struct.j_matrix, mu.values,
                                sub[:4], tol_scale=ts))
        btens = _reconstructed_bending(family, struct, mu, sub)
        out.append(CheckReport("reconstructed_nontrivial",
                               0.0 if not triviality_test(
                                   btens, tol=1e-6)[0] else 1.0, 0.5))
        return out

    with ThreadPoolExecutor(max_workers=4) as pool:
        futures = [pool.submit(fn) for fn in
                   (surface_checks, pair_checks, hyper_checks,
                    bending_checks)]
        reports = []
        for fut in futures:  # single-threaded reduction, stable order
            reports.extend(fut.result())
    return reports


def _reconstructed_bending(family, struct, mu, points):
    """curly-B = (A - lam I) D on the horizontal plane, as tensors.

    Padded with zeros on the vertical directions (the free constant b
    is taken as 0), which is enough for the triviality test.
    """
    from .bending import _HorizontalCalculus

    calc = _HorizontalCalculus(family, struct.j_matrix, mu.values)
    out = []
    for u, v, theta in points:
        pt = calc.point(u, v, theta)
        amli = pt["a"] - pt["lam"] * np.eye(2)
        b2 = amli @ pt["d"]
        b_full = np.zeros((family.n, family.n))
        b_full[:2, :2] = b2
        a_full = np.eye(family.n) * pt["lam"]
        a_full[:2, :2] = pt["a"]
        out.append({"B": b_full, "A": a_full})
    return out


def cmd_verify(cfg):
    try:
        artifacts = _load_artifacts(cfg)
    except (OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
        return _fail(3, f"artifact_load_failed: {exc}")
    try:
        reports = _verify_battery(cfg, *artifacts)
    except GenerationError as exc:
        reports = [CheckReport("verification_aborted", float("inf"), 0.0,
                               extra={"reason": exc.reason})]
    text = report_set_to_json(reports, kind=artifacts[0]["kind"],
                              seed=artifacts[0]["seed"],
                              tol_scale=cfg.tol_scale)
    with open(cfg.path("report.json"), "w") as fh:
        fh.write(text)
    for rep in reports:
        print(rep)
    ok = all(r.passed for r in reports)
    print(json.dumps({"all_passed": ok,
                      "report": cfg.path("report.json")}))
    return 0 if ok else 1


def cmd_export(cfg, what, out_path, theta=None):
    try:
        if what == "samples":
            from .gauss_param import HypersurfaceSample

            with open(cfg.path("samples.json")) as fh:
                raw = json.load(fh)
            samples = [HypersurfaceSample.from_dict(d) for d in raw]
            if out_path.endswith(".json"):
                samples_to_json(samples, out_path)
            else:
                samples_to_csv(samples, out_path)
        elif what == "mesh":
            pair = SpecialPair.load_json(cfg.path("pair.json"))
            with open(cfg.path("manifest.json")) as fh:
                n = json.load(fh)["n"]
            family = HypersurfaceFamily(pair, n=n)
            if theta is None:
                theta = [np.pi / 2] * (n - 3) + [np.pi]
            slice_to_obj(family, np.array(theta, dtype=float), out_path)
        elif what == "pair":
            pair = SpecialPair.load_json(cfg.path("pair.json"))
            pair.save_h_csv(out_path)
        else:
            return _fail(3, f"unknown export target {what!r}")
    except OSError as exc:
        return _fail(3, f"export_failed: {exc}")
    print(json.dumps({"written": out_path}))
    return 0


def cmd_report(path):
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        return _fail(3, f"report_load_failed: {exc}")
    for chk in payload["checks"]:
        state = "pass" if chk["passed"] else "FAIL"
        print(f"[{state}] {chk['name']}: max residual "
              f"{chk['max_residual']:.3e} (tol {chk['tolerance']:.3e})")
    print(json.dumps({"all_passed": payload["all_passed"]}))
    return 0 if payload["all_passed"] else 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="confbend",
        description="Construct and verify hypersurfaces with nontrivial "
                    "conformal infinitesimal variations.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("generate", "verify", "export"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--tol-scale", type=float, default=None,
                       dest="tol_scale")
    sub.choices["export"].add_argument("--what", required=True,
                                       choices=["samples", "mesh",
                                                "pair"])
    sub.choices["export"].add_argument("--file", required=True)
    sub.choices["export"].add_argument("--theta", type=float,
                                       nargs="*", default=None)
    rep = sub.add_parser("report")
    rep.add_argument("--in", dest="path", required=True)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "report":
        return cmd_report(args.path)
    try:
        cfg = JobConfig.load(args.config,
                             overrides={"seed": args.seed,
                                        "out": args.out,
                                        "tol_scale": args.tol_scale})
    except (OSError, ValueError, KeyError, TypeError,
            json.JSONDecodeError) as exc:
        return _fail(3, f"config_error: {exc}")
    if args.command == "generate":
        return cmd_generate(cfg)
    if args.command == "verify":
        return cmd_verify(cfg)
    return cmd_export(cfg, args.what, args.file, theta=args.theta)


if __name__ == "__main__":
    sys.exit(main())
