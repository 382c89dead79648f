# SPDX-License-Identifier: Apache-2.0
"""End-to-end tests for the symlat command-line tool.

Usage: cli_test.py <symlat binary> <schema dir> <fixture dir>
"""

import json
import pathlib
import subprocess
import sys
import tempfile
import unittest

import jsonschema

BINARY = None
SCHEMAS = None
FIXTURES = None

BCC_REQUEST = "a lightweight lattice with body-centred symmetry"

TINY_CONFIG = {
    "model": {
        "d_lattice": 2,
        "d_position": 2,
        "d_edge": 2,
        "d_semantic": 2,
        "hidden": 6,
        "rounds": 2,
        "predictor_hidden": 4,
        "max_epochs": 20,
        "predictor_max_epochs": 60,
        "predictor_patience": 30,
        "kl_warmup_epochs": 5,
    },
    "evolution": {"iterations": 100},
}


def run(*args, expect=0):
    proc = subprocess.run([str(BINARY), *map(str, args)], capture_output=True, text=True)
    if proc.returncode != expect:
        raise AssertionError(
            f"symlat {' '.join(map(str, args))} exited {proc.returncode}, expected {expect}\n"
            f"stdout: {proc.stdout[:2000]}\nstderr: {proc.stderr[:2000]}"
        )
    return proc


def schema(name):
    return json.loads((SCHEMAS / f"{name}.schema.json").read_text())


def validated(proc, name):
    out = json.loads(proc.stdout)
    jsonschema.validate(out, schema(name))
    return out


def error_of(proc):
    err = json.loads(proc.stderr)
    jsonschema.validate(err, schema("cli-error"))
    return err


class Workspace(unittest.TestCase):
    """One synthetic dataset and one trained default model shared by all tests."""

    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        cls.root = pathlib.Path(cls.tmp.name)
        cls.data = cls.root / "data"
        validated(run("--seed", 3, "synth", "--out", cls.data, "--count", 40), "cli-synth")
        cls.backbone = cls.root / "model.ckpt"
        cls.train_out = validated(run("train", "--data", cls.data, "--out", cls.backbone), "cli-train")
        cls.model = cls.root / "predictor.ckpt"
        cls.predictor_out = validated(
            run("train-predictor", "--data", cls.data, "--checkpoint", cls.backbone, "--out", cls.model),
            "cli-train-predictor",
        )
        cls.source = cls.data / "bcc-0001.json"
        cls.scaffold = cls.data / "fcc-0002.json"

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def evolve(self, *extra, expect=0):
        return run(
            "evolve", "--checkpoint", self.model, "--source", self.source, "--scaffold", self.scaffold, *extra,
            expect=expect,
        )

    def test_version(self):
        self.assertTrue(run("--version").stdout.startswith("symlat "))

    def test_synth_writes_manifest_and_lattices(self):
        manifest = json.loads((self.data / "manifest.json").read_text())
        jsonschema.validate(manifest, schema("manifest"))
        self.assertEqual(manifest["count"], 40)
        self.assertEqual(len(manifest["files"]), 40)
        lattice_schema = schema("lattice")
        for entry in manifest["files"]:
            jsonschema.validate(json.loads((self.data / entry["file"]).read_text()), lattice_schema)
        self.assertEqual(len(list(self.data.glob("*.json"))), 41)

    def test_synth_is_reproducible(self):
        a, b = self.root / "a", self.root / "b"
        run("--seed", 9, "synth", "--out", a, "--count", 6)
        run("--seed", 9, "synth", "--out", b, "--count", 6)
        for f in sorted(a.iterdir()):
            self.assertEqual(f.read_bytes(), (b / f.name).read_bytes(), f.name)

    def test_synth_rejects_unknown_family(self):
        err = error_of(run("synth", "--out", self.root / "bad", "--families", "foo", expect=1))
        self.assertEqual(err["error"], "validation")

    def test_metrics_on_clean_lattices(self):
        clean = self.root / "clean"
        run("synth", "--out", clean, "--count", 8, "--jitter", 0)
        out = validated(run("metrics", "--dir", clean, "--reference", clean), "cli-metrics")
        self.assertEqual(out["count"], 8)
        self.assertEqual(out["v_p"], 1.0)
        self.assertEqual(out["v_s"], 1.0)
        self.assertEqual(out["cov_r"], 1.0)

    def test_training_is_reproducible(self):
        again = self.root / "again.ckpt"
        out = validated(run("train", "--data", self.data, "--out", again), "cli-train")
        self.assertEqual(again.read_bytes(), self.backbone.read_bytes())
        self.assertEqual(out["backbone_hash"], self.train_out["backbone_hash"])

    def test_predictor_keeps_backbone(self):
        self.assertEqual(self.predictor_out["backbone_hash"], self.train_out["backbone_hash"])

    def test_encode_and_predict(self):
        enc = validated(run("encode", "--checkpoint", self.model, "--input", self.source), "cli-encode")
        self.assertEqual(len(enc["latent"]["position"]), len(json.loads(self.source.read_text())["nodes"]))
        pred = validated(run("predict", "--checkpoint", self.model, "--input", self.source), "cli-predict")
        self.assertEqual(set(pred["properties"]), {"young", "shear", "poisson"})

    def test_predict_requires_trained_head(self):
        error_of(run("predict", "--checkpoint", self.backbone, "--input", self.source, expect=1))

    def test_mix_weight_controls_distance(self):
        near = validated(self.evolve("--op", "mix", "--lambda", 0), "cli-evolve")
        far = validated(self.evolve("--op", "mix", "--lambda", 1), "cli-evolve")
        self.assertLess(near["distance_to_source"], 0.1)
        self.assertLessEqual(near["distance_to_source"], far["distance_to_source"])

    def test_evolve_writes_outputs(self):
        lattice_out = self.root / "evolved.json"
        trace_out = self.root / "trace.json"
        out = validated(
            self.evolve("--op", "union", "--iters", 20, "--out", lattice_out, "--trace-out", trace_out, "--dump-plan"),
            "cli-evolve",
        )
        self.assertIn("plan", out)
        jsonschema.validate(json.loads(lattice_out.read_text()), schema("lattice"))
        trace = json.loads(trace_out.read_text())
        self.assertEqual(len(trace["iterations"]), 21)

    def test_evolve_accepts_scaffold_text(self):
        out = run(
            "evolve", "--checkpoint", self.model, "--source", self.source,
            "--scaffold", FIXTURES / "bcc_scaffold.txt", "--op", "intersect", "--iters", 20,
        )
        validated(out, "cli-evolve")

    def test_evolve_rejects_unknown_operator(self):
        err = error_of(self.evolve("--op", "bogus", expect=1))
        self.assertEqual(err["error"], "usage")

    def test_infeasible_negation_is_a_runtime_failure(self):
        err = error_of(self.evolve("--op", "negate", "--alpha", 0.1, "--beta", 5, expect=2))
        self.assertEqual(err["error"], "negation_infeasible")

    def test_export_tiled(self):
        clean = self.root / "tile"
        run("synth", "--out", clean, "--count", 1, "--families", "cubic", "--jitter", 0)
        out = validated(run("export-tiled", "--input", clean / "cubic-0000.json"), "cli-export-tiled")
        self.assertEqual(len(out["points"]), 27)
        self.assertEqual(len(out["edges"]), 54)

    def test_bad_config_key(self):
        config = self.root / "bad-config.json"
        config.write_text(json.dumps({"model": {"seed": 3}}))
        err = error_of(run("--config", config, "synth", "--out", self.root / "x", expect=1))
        self.assertIn("model.seed", err["message"])


class AgentLoop(unittest.TestCase):
    def test_mock_loop_matches_golden_trace(self):
        with tempfile.TemporaryDirectory() as tmp:
            root = pathlib.Path(tmp)
            config = root / "tiny.json"
            config.write_text(json.dumps(TINY_CONFIG))
            data = root / "data"
            run("--seed", 5, "synth", "--out", data, "--count", 24, "--jitter", 0.04)
            run("--config", config, "--seed", 7, "train", "--data", data, "--out", root / "m.ckpt")
            run("--config", config, "--seed", 7, "train-predictor", "--data", data,
                "--checkpoint", root / "m.ckpt", "--out", root / "p.ckpt")
            proc = run(
                "--config", config, "--seed", 0, "agent-loop", "--prompt", BCC_REQUEST,
                "--mock", FIXTURES / "bcc_loop.jsonl", "--checkpoint", root / "p.ckpt", "--data", data,
                "--trace-out", root / "trace.json",
            )
            trace = validated(proc, "cli-agent-loop")
            self.assertEqual(proc.stdout, (FIXTURES / "bcc_loop_trace.json").read_text())
            self.assertEqual((root / "trace.json").read_text(), proc.stdout)
            self.assertTrue(trace)

    def test_loop_needs_a_client(self):
        with tempfile.TemporaryDirectory() as tmp:
            root = pathlib.Path(tmp)
            run("synth", "--out", root / "d", "--count", 4)
            (root / "fake.ckpt").write_text("{}")
            error_of(run("agent-loop", "--prompt", "x", "--checkpoint", root / "fake.ckpt", "--data", root / "d",
                         expect=1))


if __name__ == "__main__":
    BINARY = pathlib.Path(sys.argv[1])
    SCHEMAS = pathlib.Path(sys.argv[2])
    FIXTURES = pathlib.Path(sys.argv[3])
    unittest.main(argv=[sys.argv[0], "-v"])
