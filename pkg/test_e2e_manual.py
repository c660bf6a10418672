#!/usr/bin/env python3
"""
Manual End-to-End Experiments

Run this script locally when you want to verify that SSAS actually learns to
disambiguate on the synthetic benchmark. It generates the full desk-scale
dataset and trains several models, so expect it to take a while (roughly
15-30 minutes on a desktop CPU).

Usage:
    python test_e2e_manual.py

    # Or run only some experiments:
    python test_e2e_manual.py --only disambiguation shifts holdout
    python test_e2e_manual.py --workdir /tmp/shiftlab-e2e --keep
"""

import argparse
import csv
import json
import shutil
import sys
import tempfile
from pathlib import Path

from src.checkpoint import load_model
from src.config_models import GenConfig
from src.main import main as cli_main
from src.metrics import duplicate_iou_cap
from src.models import MASKED, Query, SceneCache, single_query_batch
from src.saccade import GraphEdge, SceneGraph, argmax_cell, traverse
from src.scenes import box_to_mask, generate_split, load_split
from src.tensor import Tensor

SEED = 17
GRID = 14


def run_cli(*argv: str) -> int:
    """Run one CLI command in-process and return its exit code."""
    try:
        cli_main(list(argv))
    except SystemExit as e:
        return int(e.code or 0)
    return 0


class Workspace:
    """Dataset, checkpoints and reports shared by the experiments."""

    def __init__(self, root: Path):
        self.root = root
        self.data = root / "data"
        self._trained = {}
        self._evaluated = {}

    def dataset(self) -> Path:
        if not (self.data / "meta.json").exists():
            print(f"Generating dataset (seed {SEED}) in {self.data}...")
            code = run_cli(
                "generate", "--out", str(self.data), "--seed", str(SEED), "--no-rasters"
            )
            assert code == 0, f"generate exited with {code}"
        return self.data

    def train(self, name: str, *flags: str) -> Path:
        if name not in self._trained:
            ckpt = self.root / "ckpt" / f"{name}.ckpt"
            ckpt.parent.mkdir(parents=True, exist_ok=True)
            print(f"Training {name} ({' '.join(flags)})...")
            code = run_cli(
                "train", "--data", str(self.dataset()), "--out", str(ckpt),
                "--seed", str(SEED), *flags,
            )
            assert code == 0, f"train {name} exited with {code}"
            self._trained[name] = ckpt
        return self._trained[name]

    def evaluate(self, name: str, mask: str = "none", *flags: str) -> dict:
        key = (name, mask, flags)
        if key not in self._evaluated:
            out = self.eval_dir(name, mask, *flags)
            code = run_cli(
                "eval", "--ckpt", str(self._trained[name]), "--data", str(self.dataset()),
                "--mask", mask, "--out", str(out), *flags,
            )
            assert code == 0, f"eval {name} exited with {code}"
            self._evaluated[key] = json.loads((out / "summary.json").read_text())
        return self._evaluated[key]

    def eval_dir(self, name: str, mask: str = "none", *flags: str) -> Path:
        suffix = "".join(f.strip("-").replace("-", "_") for f in flags)
        return self.root / "eval" / "_".join(p for p in (name, mask, suffix) if p)

    def unambiguous_iou(self, name: str) -> tuple:
        """Mean S/O IoU over roles with no same-category distractor."""
        self.evaluate(name)
        with open(self.eval_dir(name) / "metrics.csv", newline="") as f:
            rows = list(csv.DictReader(f))
        s = [float(r["s_iou"]) for r in rows if r["s_ambiguous"] == "False"]
        o = [float(r["o_iou"]) for r in rows if r["o_ambiguous"] == "False"]
        return sum(s) / max(len(s), 1), sum(o) / max(len(o), 1)


def check(condition: bool, message: str) -> bool:
    print(f"{'✓' if condition else '✗'} {message}")
    return condition


def banner(title: str):
    print("=" * 60)
    print(title)
    print("=" * 60)


def test_disambiguation(ws: Workspace) -> bool:
    """SSAS separates same-category instances; co-occurrence cannot."""
    banner("DISAMBIGUATION: SSAS t=2 vs CO-OCCURRENCE")
    test_scenes, _, _ = load_split(ws.dataset(), "test")
    cap = duplicate_iou_cap(test_scenes, GRID)
    print(f"Duplicate-instance IoU cap on ambiguous test queries: {cap:.3f}")

    ws.train("ssas_t2", "--model", "ssas", "--iterations", "2")
    ws.train("cooccur", "--model", "cooccur")
    ssas = ws.evaluate("ssas_t2")["ambiguous"]
    cooccur = ws.evaluate("cooccur")["ambiguous"]
    print(f"SSAS     S-IoU {ssas['s_iou']:.3f}  O-IoU {ssas['o_iou']:.3f}  (n={ssas['n']})")
    print(f"cooccur  S-IoU {cooccur['s_iou']:.3f}  O-IoU {cooccur['o_iou']:.3f}")
    plain_s, plain_o = ws.unambiguous_iou("cooccur")
    print(f"cooccur on unambiguous roles  S-IoU {plain_s:.3f}  O-IoU {plain_o:.3f}")

    results = [
        check(cap < 0.75, "duplicate cap is below the SSAS target"),
        check(min(plain_s, plain_o) >= 0.75, "cooccur fits unambiguous roles (IoU >= 0.75)"),
        check(ssas["s_iou"] >= 0.75, "SSAS ambiguous subject IoU >= 0.75"),
        check(ssas["o_iou"] >= 0.75, "SSAS ambiguous object IoU >= 0.75"),
        check(ssas["s_iou"] - cooccur["s_iou"] >= 0.15, "subject margin over cooccur >= 0.15"),
        check(ssas["o_iou"] - cooccur["o_iou"] >= 0.15, "object margin over cooccur >= 0.15"),
    ]
    return all(results)


def test_ordering(ws: Workspace) -> bool:
    """Statistical shifts beat co-occurrence; a second iteration does not hurt."""
    banner("ORDERING: SPATIAL SHIFT, ITERATIONS")
    ws.train("ssas_t2", "--model", "ssas", "--iterations", "2")
    ws.train("ssas_t1", "--model", "ssas", "--iterations", "1")
    ws.train("cooccur", "--model", "cooccur")
    ws.train("spatialshift", "--model", "spatialshift")

    names = ("ssas_t1", "ssas_t2", "cooccur", "spatialshift")
    scores = {name: ws.evaluate(name)["ambiguous"] for name in names}
    for name, row in sorted(scores.items()):
        print(f"{name:<14} S-IoU {row['s_iou']:.3f}  O-IoU {row['o_iou']:.3f}")

    def mean_iou(name):
        return (scores[name]["s_iou"] + scores[name]["o_iou"]) / 2

    return all(
        [
            check(
                mean_iou("spatialshift") >= mean_iou("cooccur"),
                "spatial shift >= co-occurrence on the ambiguous subset",
            ),
            check(mean_iou("ssas_t2") >= mean_iou("ssas_t1") - 0.02, "SSAS t=2 >= t=1 - 0.02"),
        ]
    )


def test_shifts(ws: Workspace) -> bool:
    """Learned shifts move centred attention the way their predicate says."""
    banner("SHIFT INTERPRETABILITY")
    ckpt = ws.train("ssas_t2", "--model", "ssas", "--iterations", "2")
    # predicate -> (axis, sign of the forward displacement)
    expected = {"left": (1, 1), "right": (1, -1), "above": (0, 1), "below": (0, -1)}
    results = []
    for predicate, (axis, sign) in expected.items():
        out = ws.root / "shifts"
        code = run_cli(
            "render-shift", "--ckpt", str(ckpt), "--predicate", predicate, "--out", str(out)
        )
        if not check(code == 0, f"render-shift {predicate} exited cleanly"):
            results.append(False)
            continue
        sidecar = json.loads((out / f"{predicate}_shift.json").read_text())
        forward = sidecar["forward"]["displacement"][axis] * sign
        inverse = sidecar["inverse"]["displacement"][axis] * sign
        print(f"{predicate:<6} forward {forward:+.2f}  inverse {inverse:+.2f} (signed)")
        results.append(check(forward > 0.5, f"{predicate} forward shift points the right way"))
        results.append(check(inverse < -0.5, f"{predicate} inverse shift points back"))
    return all(results)


def test_masked(ws: Workspace) -> bool:
    """With the subject hidden, SSAS still finds the object; VRD cannot."""
    banner("MASKED QUERIES: NO SUBJECT")
    ws.train("ssas_masked", "--model", "ssas", "--mask-rate", "0.3")
    ws.train("vrd_masked", "--model", "vrd", "--mask-rate", "0.3")
    ssas = ws.evaluate("ssas_masked", "subject")["overall"]
    vrd = ws.evaluate("vrd_masked", "subject")["overall"]
    print(f"SSAS O-IoU {ssas['o_iou']:.3f}   VRD O-IoU {vrd['o_iou']:.3f}")
    return all(
        [
            check(ssas["o_iou"] >= 0.5, "SSAS object IoU >= 0.5 without a subject"),
            check(ssas["o_iou"] > vrd["o_iou"], "SSAS beats VRD under the same masking"),
        ]
    )


def test_holdout(ws: Workspace) -> bool:
    """Categories never seen in training are still found through masked queries."""
    banner("HELD-OUT CATEGORIES")
    _, vocabulary, _ = load_split(ws.dataset(), "test")
    held = vocabulary.categories[0]
    ws.train("ssas_holdout", "--model", "ssas", "--mask-rate", "0.3", "--holdout", held)
    scores = ws.evaluate("ssas_holdout", "subject", "--holdout-only")
    row = scores["overall"]
    print(f"Held out {held!r}: O-IoU {row['o_iou']:.3f} over {row['n']} queries")
    return check(row["o_iou"] >= 0.5, "object IoU >= 0.5 on held-out queries without a subject")


def test_determinism(ws: Workspace) -> bool:
    """Identical flags give identical logs, checkpoints and reports."""
    banner("DETERMINISM")
    data = str(ws.dataset())
    runs = []
    for run in ("a", "b"):
        ckpt = ws.root / "determinism" / f"{run}.ckpt"
        ckpt.parent.mkdir(parents=True, exist_ok=True)
        code = run_cli(
            "train", "--data", data, "--out", str(ckpt), "--seed", str(SEED), "--epochs", "1"
        )
        assert code == 0, f"train {run} exited with {code}"
        out = ws.root / "determinism" / f"eval_{run}"
        code = run_cli("eval", "--ckpt", str(ckpt), "--data", data, "--out", str(out))
        assert code == 0, f"eval {run} exited with {code}"
        runs.append((ckpt, out))

    (ckpt_a, eval_a), (ckpt_b, eval_b) = runs
    return all(
        [
            check(
                ckpt_a.with_suffix(".csv").read_bytes() == ckpt_b.with_suffix(".csv").read_bytes(),
                "training logs are identical",
            ),
            check(ckpt_a.read_bytes() == ckpt_b.read_bytes(), "checkpoints are bit-identical"),
            check(
                all(
                    (eval_a / name).read_bytes() == (eval_b / name).read_bytes()
                    for name in ("metrics.csv", "report_by_entity.csv", "summary.json")
                ),
                "evaluation outputs are byte-identical",
            ),
        ]
    )


def _chain(scene):
    """First a -> b -> c relationship chain over three distinct entities."""
    for first in scene.relationships:
        for second in scene.relationships:
            if second.subject_idx == first.object_idx and second.object_idx != first.subject_idx:
                return (first.subject_idx, first.object_idx, second.object_idx), (
                    first.predicate,
                    second.predicate,
                )
    return None


def test_saccade(ws: Workspace, scenes_wanted: int = 100) -> bool:
    """Three-node walks land on each node's entity in unique-category scenes."""
    banner("SACCADE CHAINS")
    ckpt = ws.train("ssas_t2", "--model", "ssas", "--iterations", "2")
    model, _, vocabulary, config = load_model(ckpt, expected_kind="ssas")
    gen = GenConfig(ambiguous_fraction=0.0, min_entities=3, max_entities=6)
    candidates = generate_split(gen, SEED + 1, "test", 4 * scenes_wanted)
    chained = [(s, c) for s in candidates if (c := _chain(s)) is not None][:scenes_wanted]
    if not check(len(chained) == scenes_wanted, f"found {scenes_wanted} scenes with a chain"):
        return False

    scenes = [s for s, _ in chained]
    cache = SceneCache(scenes, vocabulary, GRID, config.encoder.mode)
    hits = 0
    for index, (scene, (entities, predicates)) in enumerate(chained):
        batch = single_query_batch(cache, index, Query(MASKED, 0, MASKED))
        mu = Tensor(model.features(batch).values[0])
        graph = SceneGraph(
            nodes=[scene.entities[i].category for i in entities],
            path=[GraphEdge(0, predicates[0], 1), GraphEdge(1, predicates[1], 2)],
        )
        maps = traverse(mu, graph, model.params)
        inside = []
        for node, entity_idx in enumerate(entities):
            truth = box_to_mask(scene.entities[entity_idx].bbox, scene.width, GRID, scene.height)
            row, col = argmax_cell(maps[node])
            inside.append(bool(truth.grid[row, col]))
        hits += all(inside)

    rate = hits / scenes_wanted
    print(f"All three nodes localised in {hits}/{scenes_wanted} scenes")
    return check(rate >= 0.9, "chain argmax accuracy >= 90%")


EXPERIMENTS = {
    "disambiguation": test_disambiguation,
    "ordering": test_ordering,
    "shifts": test_shifts,
    "masked": test_masked,
    "holdout": test_holdout,
    "determinism": test_determinism,
    "saccade": test_saccade,
}


def main():
    parser = argparse.ArgumentParser(description="Manual end-to-end experiments")
    parser.add_argument(
        "--only", nargs="+", choices=sorted(EXPERIMENTS), help="Run only these experiments"
    )
    parser.add_argument("--workdir", help="Directory for data and checkpoints (default: temp)")
    parser.add_argument("--keep", action="store_true", help="Keep the working directory")
    args = parser.parse_args()

    root = Path(args.workdir or tempfile.mkdtemp(prefix="shiftlab-e2e-"))
    root.mkdir(parents=True, exist_ok=True)
    ws = Workspace(root)
    selected = args.only or list(EXPERIMENTS)

    print("\n⚠️  This trains several models on the full synthetic dataset.")
    print(f"Working directory: {root}\n")

    results = {}
    for name in selected:
        try:
            results[name] = EXPERIMENTS[name](ws)
        except Exception as e:
            print(f"\n✗ {name} failed: {e}")
            import traceback

            traceback.print_exc()
            results[name] = False
        print()

    if not (args.keep or args.workdir):
        shutil.rmtree(root, ignore_errors=True)

    banner("SUMMARY")
    for name, passed in results.items():
        print(f"{name:<16} {'PASS' if passed else 'FAIL'}")
    print("=" * 60)
    if all(results.values()):
        print("All experiments passed! ✨")
        sys.exit(0)
    print("Some experiments failed")
    sys.exit(1)


if __name__ == "__main__":
    main()
