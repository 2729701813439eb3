"""Command line scenario runner.

    invgeo list-scenarios
    invgeo run --scenario sphere_rotation_equator --theta 1.0 --out runs/eq
    invgeo index-table runs/eq/records.jsonl
    invgeo bangert-verify --family torus_wiggle --m 2 4 8 16

Exit status: 0 on success, 1 when a scenario check fails, 2 for bad arguments
or configuration.  ``INVGEO_THREADS`` caps the number of worker processes used
for seed batches.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .bangert import bangert_path, verify_estimate
from .config import (
    Scenario,
    apply_overrides,
    builtin_scenario_data,
    builtin_scenarios,
    load_scenario,
    scenario_from_data,
)
from .errors import ArgumentError, InvGeoError
from .families import LOOP_FAMILIES, REFERENCE_CURVES, loop_family
from .manifold import Sphere
from .optimizer import (
    Family,
    GeodesicRecord,
    dedup_orbits,
    read_jsonl,
    run_batch,
    seed_library,
    threads_from_env,
    write_jsonl,
    write_summary_csv,
)
from .pathspace import average_index

log = logging.getLogger("invgeo")

INDEX_COLUMNS = ["family", "m", "shift", "energy", "index", "nullity", "spectrum_head"]


@dataclass
class IndexRow:
    family: str
    m: Optional[int]
    shift: float
    energy: float
    index: int
    nullity: int
    spectrum_head: List[float]


def _iterate_multiple(rec: GeodesicRecord, base: float) -> Optional[int]:
    ratio = math.sqrt(rec.energy / base) if base > 0 else float("nan")
    k = round(ratio)
    return int(k) if k >= 1 and abs(ratio - k) < 1e-6 else None


def rows_from_families(families: Sequence[Family]) -> List[IndexRow]:
    rows = []
    for fam in families:
        base = min(r.energy for r in fam.members)
        for rec in fam.members:
            rep = rec.index_report
            rows.append(IndexRow(str(fam.family_id), _iterate_multiple(rec, base), rec.path.shift, rec.energy,
                                 rep.index, rep.nullity, rep.spectrum_head))
    return rows


def report_index_table(rows: Iterable) -> str:
    """CSV text with columns family, m, shift, energy, index, nullity, spectrum_head.

    Accepts :class:`IndexRow` objects or geodesic records (grouped into families first).
    """
    rows = list(rows)
    if rows and isinstance(rows[0], GeodesicRecord):
        rows = rows_from_families(dedup_orbits(rows))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(INDEX_COLUMNS)
    for r in rows:
        w.writerow([r.family, "" if r.m is None else r.m, repr(float(r.shift)), repr(float(r.energy)),
                    r.index, r.nullity, json.dumps([float(v) for v in r.spectrum_head])])
    return buf.getvalue()


# -- scenario steps -------------------------------------------------------------------


class Run:
    def __init__(self, scn: Scenario, out_dir: str, threads: int):
        self.scn = scn
        self.out = out_dir
        self.threads = threads
        self.lines: List[str] = [f"scenario {scn.name}", scn.description, ""]
        self.failures: List[str] = []
        self.records: List[GeodesicRecord] = []
        self.families: List[Family] = []
        self.searched = False

    def path(self, name: str) -> str:
        return os.path.join(self.out, name)

    def say(self, line: str = ""):
        self.lines.append(line)

    def check(self, ok: bool, what: str):
        self.say(("PASS " if ok else "FAIL ") + what)
        if not ok:
            self.failures.append(what)

    # steps
    def search(self):
        if self.searched:
            return
        self.searched = True
        scn = self.scn
        seeds = []
        for spec in scn.seeds:
            params = {k: v for k, v in spec.items() if k != "strategy"}
            seeds.extend(seed_library(scn.manifold, scn.isometry, spec["strategy"], N=scn.N, **params))
        outcomes = run_batch(seeds, scn.search, self.threads)
        with open(self.path("outcomes.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["start", "status", "iterations", "energy", "diagnostic"])
            for i, o in enumerate(outcomes):
                w.writerow([i, o.status, o.iterations, repr(float(o.final_energy)), o.diagnostic])
        self.records = [o.record for o in outcomes if o.record is not None]
        positive = [r for r in self.records if r.energy > scn.search.zero_energy]
        counts = {}
        for o in outcomes:
            counts[o.status] = counts.get(o.status, 0) + 1
        self.say(f"{len(positive)} positive-energy records out of {len(seeds)} starts")
        self.say("outcomes: " + ", ".join(f"{k}={v}" for k, v in sorted(counts.items())))
        stalls = [o.final_path.samples[0] for o in outcomes if o.status == "stalled"]
        if stalls:
            fix = scn.isometry.fixed_point_set()
            on_fix = int(np.sum(fix.contains(np.array(stalls), 1e-6)))
            self.say(f"stalls on the fixed-point set ({fix.kind}): {on_fix} of {len(stalls)}")
            pts = {}
            for x in stalls:
                key = tuple(float(v) for v in np.mod(np.round(x, 4), 1.0) + 0.0) if self._periodic() else tuple(
                    float(v) for v in np.round(x, 4) + 0.0
                )
                pts[key] = pts.get(key, 0) + 1
            for key, n in sorted(pts.items()):
                self.say(f"  stall point {list(key)}: {n}")
        self.families = dedup_orbits(self.records)
        write_jsonl([r for f in self.families for r in f.members], self.path("records.jsonl"))
        write_summary_csv(self.families, self.path("summary.csv"))
        self.say(f"{len(self.families)} geometric families")
        for fam in self.families:
            e = ", ".join(f"{v:.6f}" for v in fam.energies)
            self.say(f"  family {fam.family_id}: energies [{e}]")
        exp = scn.expect
        if "max_positive_records" in exp:
            self.check(len(positive) <= exp["max_positive_records"],
                       f"positive-energy records {len(positive)} <= {exp['max_positive_records']}")
        if exp.get("image") == "equator":
            self._check_equator(exp.get("image_tol", 1e-3), exp.get("closed_form_rtol", 1e-3))

    def _periodic(self) -> bool:
        return all(type(f).__name__ == "FlatTorus" for f in self.scn.manifold.factors)

    def _check_equator(self, tol: float, rtol: float):
        iso = self.scn.isometry
        if not isinstance(self.scn.manifold, Sphere) or iso.kind != "sphere_rotation":
            raise ArgumentError("the equator check needs a rotation of the 2-sphere")
        theta = iso.params["angle"] * float(np.sign(iso.params["axis"][2]))
        worst_img, worst_e = 0.0, 0.0
        for rec in self.records:
            z = rec.path.samples[:, 2]
            worst_img = max(worst_img, float(np.max(np.arcsin(np.minimum(np.abs(z), 1.0)))))
            k = rec.winding[0][0] if rec.winding and rec.winding[0] is not None else None
            if k is None:
                worst_e = float("inf")
                continue
            target = (theta + 2 * np.pi * k) ** 2
            worst_e = max(worst_e, abs(rec.energy - target) / target)
        self.check(bool(self.records), "at least one converged record")
        self.check(worst_img < tol, f"all images on the equator (max distance {worst_img:.2e} < {tol:g})")
        self.check(worst_e < rtol, f"energies match (theta + 2 pi k)^2 (max rel. error {worst_e:.2e} < {rtol:g})")

    def index_table(self):
        self.search()
        text = report_index_table(rows_from_families(self.families))
        with open(self.path("index_table.csv"), "w") as fh:
            fh.write(text)
        self.say(f"index table: {len(text.splitlines()) - 1} rows")

    def average_index(self):
        cfg = self.scn.average_index or {}
        name = cfg.get("curve", "equator")
        path = REFERENCE_CURVES[name](self.scn.N)
        est = average_index(path, cfg.get("p", 1.0), cfg["m_list"])
        rows = []
        for (m, ind), rep in zip(est.samples, est.reports):
            rows.append(IndexRow(name, m, 1.0, rep.energy, ind, rep.nullity, rep.spectrum_head))
        with open(self.path("index_table.csv"), "w") as fh:
            fh.write(report_index_table(rows))
        self.say(f"average index of {name}: iterate indices {[i for _, i in est.samples]}")
        self.say(f"slope estimate {est.slope_estimate:.6f}, converged={est.converged}")
        self.check(est.slope_estimate >= -1e-9, "slope estimate is non-negative")

    def bangert_verify(self):
        cfg = self.scn.bangert or {}
        gamma = loop_family(cfg["family"], S=cfg.get("S", 9), N=self.scn.N)
        rep = verify_estimate(gamma, cfg["m_list"])
        _write_bangert(gamma, rep, cfg["m_list"], self.out)
        self.say(f"bangert estimate for {cfg['family']}: C_hat={rep.c_hat:.6f}")
        for m, ex, sc in zip(rep.m_values, rep.excess, rep.scaled_excess):
            self.say(f"  m={m}: excess={ex:.6e} excess*mp={sc:.6f}")
        self.check(rep.max_junction < 1e-9, f"seams continuous (max jump {rep.max_junction:.1e})")
        self.check(rep.passed and rep.bounded, "excess(m) <= C_hat/(mp) with no growth in excess*mp")

    def product_theorem_demo(self):
        self.search()
        iso = self.scn.isometry
        if iso.kind != "product":
            raise ArgumentError("product_theorem_demo needs a product twist")
        angles = [c.params.get("angle", 0.0) for c in iso.children]
        rtol = self.scn.expect.get("closed_form_rtol", 1e-3)
        classes = set()
        with open(self.path("theorem_demo.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["family", "windings", "energy", "closed_form", "rel_error"])
            for fam in self.families:
                for rec in fam.members:
                    wind = rec.winding
                    if not wind or any(v is None for v in wind):
                        continue
                    ks = [v[0] for v in wind]
                    closed = sum((a + 2 * np.pi * k) ** 2 for a, k in zip(angles, ks))
                    err = abs(rec.energy - closed) / closed
                    if err < rtol:
                        classes.add(tuple(ks))
                    w.writerow([fam.family_id, json.dumps(ks), repr(rec.energy), repr(closed), repr(err)])
        self.say(f"slope classes matching the closed form: {sorted(classes)}")
        exp = self.scn.expect
        if "min_families" in exp:
            self.check(len(self.families) >= exp["min_families"],
                       f"{len(self.families)} geometrically distinct families >= {exp['min_families']}")
        if "min_slope_classes" in exp:
            self.check(len(classes) >= exp["min_slope_classes"],
                       f"{len(classes)} closed-form slope classes >= {exp['min_slope_classes']}")

    def run(self) -> int:
        os.makedirs(self.out, exist_ok=True)
        for step in self.scn.analysis:
            getattr(self, step)()
        self.say("")
        self.say("result: " + ("FAIL" if self.failures else "OK"))
        with open(self.path("report.txt"), "w") as fh:
            fh.write("\n".join(self.lines) + "\n")
        with open(self.path("scenario.json"), "w") as fh:
            # the output location is left out so reruns elsewhere compare byte for byte
            raw = {k: v for k, v in self.scn.raw.items() if k != "output"}
            json.dump(raw, fh, indent=2, sort_keys=True)
        print("\n".join(self.lines))
        return 1 if self.failures else 0


def _write_bangert(gamma, rep, m_list, out_dir):
    with open(os.path.join(out_dir, "bangert_estimate.json"), "w") as fh:
        json.dump(rep.to_dict(), fh, indent=2, sort_keys=True)
    for m in m_list:
        res = bangert_path(gamma, m)
        res.write_profile_csv(os.path.join(out_dir, f"bangert_profile_m{m}.csv"))
    bangert_path(gamma, min(m_list)).result.write_csv(os.path.join(out_dir, f"bangert_grid_m{min(m_list)}.csv"))


# -- argument handling ------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="invgeo", description="Invariant geodesic experiments.")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", help="name of a built-in scenario")
    src.add_argument("--config", help="path to a scenario JSON file")
    run.add_argument("--theta", type=float, help="rotation angle of the sphere twist")
    run.add_argument("--seeds", type=int, help="number of random starts (or starts per winding class)")
    run.add_argument("--N", type=int, help="samples per path")
    run.add_argument("--out", help="output directory (default runs/<name>)")

    tab = sub.add_parser("index-table", help="index/nullity table of saved records")
    tab.add_argument("records", help="records.jsonl written by run")
    tab.add_argument("--out", help="CSV destination (default stdout)")

    bv = sub.add_parser("bangert-verify", help="energy estimate of Bangert's homotopy")
    bv.add_argument("--family", default="torus_wiggle", choices=sorted(LOOP_FAMILIES))
    bv.add_argument("--m", type=int, nargs="+", default=[2, 4, 8, 16])
    bv.add_argument("--S", type=int, default=9, help="rows of the input family")
    bv.add_argument("--N", type=int, default=32, help="samples per input loop")
    bv.add_argument("--out", help="output directory for profiles (optional)")

    sub.add_parser("list-scenarios", help="list built-in scenarios")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = _parser().parse_args(argv)
    try:
        threads = threads_from_env()
        if args.command == "list-scenarios":
            for name in builtin_scenarios():
                print(f"{name:28s} {builtin_scenario_data(name).get('description', '')}")
            return 0
        if args.command == "run":
            data = builtin_scenario_data(args.scenario) if args.scenario else load_scenario(args.config)
            data = apply_overrides(data, theta=args.theta, seeds=args.seeds, N=args.N, out=args.out)
            scn = scenario_from_data(data)
            out = scn.output or os.path.join("runs", scn.name)
            return Run(scn, out, threads).run()
        if args.command == "index-table":
            records = read_jsonl(args.records)
            text = report_index_table(records)
            if args.out:
                with open(args.out, "w") as fh:
                    fh.write(text)
            else:
                sys.stdout.write(text)
            return 0
        if args.command == "bangert-verify":
            if any(m < 2 for m in args.m):
                raise ArgumentError("--m values must be at least 2")
            gamma = loop_family(args.family, S=args.S, N=args.N)
            rep = verify_estimate(gamma, args.m)
            if args.out:
                os.makedirs(args.out, exist_ok=True)
                _write_bangert(gamma, rep, args.m, args.out)
            print(json.dumps(rep.to_dict(), indent=2, sort_keys=True))
            ok = rep.passed and rep.bounded and rep.max_junction < 1e-9
            return 0 if ok else 1
    except ArgumentError as exc:
        print(f"invgeo: error: {exc}", file=sys.stderr)
        return 2
    except InvGeoError as exc:
        print(f"invgeo: failed: {exc}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
